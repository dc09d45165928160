//! Runs the full scenario registry and prints the summary table. Pass an
//! output directory to also write the per-scenario CSV and JSON files.

use std::path::PathBuf;

use krylov_lab::scenario::{list_scenarios, run_suite, SuiteConfig};

fn main() -> krylov_lab::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let ids: Vec<String> = list_scenarios().iter().map(|e| format!("\"{}\"", e.id)).collect();
    let cfg = SuiteConfig::from_json(&format!(r#"{{"scenarios": [{}], "seed": 1}}"#, ids.join(", ")))?;
    let report = run_suite(&cfg, out.as_deref(), rayon::current_num_threads())?;
    print!("{}", report.table());
    std::process::exit(report.exit_code());
}
