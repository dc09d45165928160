use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use krylov_lab::gap::{d_metric, delta, dhat_metric, gap_hat, principal_cosines};
use krylov_lab::kclass::{check_kclass, SpectralEnclosure};
use krylov_lab::krylov::{solvability_verdict, SolvabilityConfig};
use krylov_lab::operator::{apply, LinearOperatorSpec};
use krylov_lab::scenario::{list_scenarios, run_scenario, run_suite, ScenarioSpec, SuiteConfig};
use krylov_lab::space::{AmbientSpace, CoeffVector, SpaceKind, SubspaceBasis, WeakNormSpec};
use krylov_lab::weak::{d_w, BallSet, WeakGapConfig};
use krylov_lab::zoo::{build_example_operator, OpParams};
use krylov_lab::{Error, Result, C64};

#[derive(Parser)]
#[command(name = "krylov-lab", version, about = "Krylov solvability under perturbations, on finite sections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Registered scenarios
    Scenario {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
    /// Batch run from a JSON config
    Suite {
        #[command(subcommand)]
        action: SuiteCmd,
    },
    /// Solvability diagnostics for one operator
    Krylov {
        #[command(subcommand)]
        action: KrylovCmd,
    },
    /// Classical gap between two subspaces of C^D
    Gap {
        #[command(subcommand)]
        action: GapCmd,
    },
    /// Weak gap between two subspace balls of l2(1..D)
    Weakgap {
        #[command(subcommand)]
        action: GapCmd,
    },
    /// K-class certificate for a registered operator
    Kclass {
        #[command(subcommand)]
        action: KclassCmd,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    List {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    Run {
        #[arg(long)]
        id: String,
        /// `key=value`; `n=6` sets both ends of the perturbation range
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum SuiteCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum KrylovCmd {
    Diagnose {
        /// Operator id from the registry
        #[arg(long)]
        op: String,
        #[arg(long = "param")]
        params: Vec<String>,
        /// Solution: `e:k`, `ones`, `x` (grid spaces) or comma-separated reals
        #[arg(long)]
        f: String,
        /// Datum, same syntax; defaults to `A f`
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum GapCmd {
    Compute {
        #[arg(long)]
        dim: usize,
        /// Spanning vectors separated by `;`, each a comma list of reals
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum KclassCmd {
    Check {
        #[arg(long)]
        op: String,
        #[arg(long = "param")]
        params: Vec<String>,
        /// `interval:m,M` or `disk:re,im,r`
        #[arg(long)]
        enclosure: String,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::BadParams(format!("`{t}` is not a number"))))
        .collect()
}

fn vector(space: &std::sync::Arc<AmbientSpace>, s: &str) -> Result<CoeffVector> {
    if let Some(k) = s.strip_prefix("e:") {
        let k: i64 = k.parse().map_err(|_| Error::BadParams(format!("bad basis index `{k}`")))?;
        return space
            .position(k)
            .map(|p| CoeffVector::unit_at(space, p))
            .ok_or_else(|| Error::BadParams(format!("index {k} outside the truncation")));
    }
    match s {
        "ones" => CoeffVector::from_real(space, &vec![1.0; space.dim()]),
        "x" if space.kind() == SpaceKind::GridL2 => CoeffVector::from_fn(space, |x| C64::new(x, 0.0)),
        _ => CoeffVector::from_real(space, &reals(s)?),
    }
}

fn subspace(space: &std::sync::Arc<AmbientSpace>, s: &str, label: &str) -> Result<SubspaceBasis> {
    let vs = s.split(';').map(|v| CoeffVector::from_real(space, &reals(v)?)).collect::<Result<Vec<_>>>()?;
    SubspaceBasis::span(space, &vs, label)
}

fn operator(id: &str, params: &[String]) -> Result<LinearOperatorSpec> {
    build_example_operator(id, &OpParams::parse(params.iter().map(String::as_str))?)
}

fn emit(format: Format, csv: String, json: String) {
    match format {
        Format::Csv => print!("{csv}"),
        Format::Json => println!("{}", json.trim_end()),
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Scenario { action: ScenarioCmd::List { format } } => {
            let all = list_scenarios();
            let mut csv = String::from("id,citation,expected,qualitative,params,summary\n");
            for e in &all {
                let params: Vec<String> = e.params.iter().map(|p| format!("{}={}", p.name, p.default)).collect();
                csv.push_str(&format!("{},{},{:?},{},{},\"{}\"\n", e.id, e.citation, e.expected, e.qualitative, params.join(" "), e.summary));
            }
            emit(format, csv, serde_json::to_string_pretty(&all).expect("registry serialises"));
            Ok(0)
        }
        Command::Scenario { action: ScenarioCmd::Run { id, params, seed, format } } => {
            let mut spec = ScenarioSpec::from_pairs(&id, params.iter().map(String::as_str))?;
            if !params.iter().any(|p| p.trim_start().starts_with("seed=")) {
                spec.seed = seed;
            }
            let r = run_scenario(&spec)?;
            emit(format, r.to_csv(), r.to_json());
            eprintln!("{}: {:?} (expected {:?}) {}", r.id, r.classification, r.expected_classification, if r.pass { "PASS" } else { "FAIL" });
            Ok(if r.pass { 0 } else { 1 })
        }
        Command::Suite { action: SuiteCmd::Run { config, out, seed, jobs, format } } => {
            let mut cfg = SuiteConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = run_suite(&cfg, Some(&out), jobs)?;
            match format {
                Format::Csv => print!("{}", r.table()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r).expect("summary serialises")),
            }
            Ok(r.exit_code() as u8)
        }
        Command::Krylov { action: KrylovCmd::Diagnose { op, params, f, g, n_max, format } } => {
            let a = operator(&op, &params)?;
            let f = vector(a.space(), &f)?;
            let g = match g {
                Some(g) => vector(a.space(), &g)?,
                None => apply(&a, &f)?,
            };
            let r = solvability_verdict(&a, &g, &f, &SolvabilityConfig { n_max, ..SolvabilityConfig::default() })?;
            emit(format, r.to_csv(), r.to_json());
            eprintln!("verdict: {:?}", r.verdict);
            Ok(0)
        }
        Command::Gap { action: GapCmd::Compute { dim, u, v, format, .. } } => {
            let s = AmbientSpace::unilateral(dim);
            let (u, v) = (subspace(&s, &u, "U")?, subspace(&s, &v, "V")?);
            let vals = [
                ("delta_uv", delta(&u, &v)?),
                ("delta_vu", delta(&v, &u)?),
                ("gap_hat", gap_hat(&u, &v)?),
                ("d_uv", d_metric(&u, &v)?),
                ("d_vu", d_metric(&v, &u)?),
                ("dhat", dhat_metric(&u, &v)?),
            ];
            let csv = vals.iter().map(|(k, x)| format!("{k},{x:.12e}\n")).collect::<String>();
            let mut json = serde_json::Map::new();
            for (k, x) in vals {
                json.insert(k.into(), x.into());
            }
            json.insert("principal_cosines".into(), serde_json::to_value(principal_cosines(&u, &v)?).expect("floats"));
            emit(format, format!("quantity,value\n{csv}"), serde_json::to_string_pretty(&json).expect("json"));
            Ok(0)
        }
        Command::Weakgap { action: GapCmd::Compute { dim, u, v, seed, format } } => {
            let s = AmbientSpace::unilateral(dim);
            let spec = WeakNormSpec::canonical(&s)?;
            let cfg = WeakGapConfig { seed, ..WeakGapConfig::default() };
            let (bu, bv) = (BallSet::subspace(subspace(&s, &u, "U")?), BallSet::subspace(subspace(&s, &v, "V")?));
            let uv = d_w(&bu, &bv, &spec, &cfg)?;
            let vu = d_w(&bv, &bu, &spec, &cfg)?;
            let csv = format!(
                "quantity,value,method\nd_w_uv,{:.12e},{:?}\nd_w_vu,{:.12e},{:?}\ndhat_w,{:.12e},\n",
                uv.value,
                uv.method,
                vu.value,
                vu.method,
                uv.value.max(vu.value)
            );
            let json = serde_json::json!({ "d_w_uv": uv, "d_w_vu": vu, "dhat_w": uv.value.max(vu.value) });
            emit(format, csv, serde_json::to_string_pretty(&json).expect("json"));
            Ok(0)
        }
        Command::Kclass { action: KclassCmd::Check { op, params, enclosure, margin, samples, format } } => {
            let a = operator(&op, &params)?;
            let (kind, nums) = enclosure
                .split_once(':')
                .ok_or_else(|| Error::BadParams(format!("enclosure `{enclosure}` is not kind:numbers")))?;
            let nums = reals(nums)?;
            let enc = match (kind, nums.as_slice()) {
                ("interval", [m, big_m]) => SpectralEnclosure::interval(*m, *big_m),
                ("disk", [re, im, r]) => SpectralEnclosure::disk(C64::new(*re, *im), *r),
                _ => return Err(Error::BadParams(format!("unsupported enclosure `{enclosure}`"))),
            }
            .with_margin(margin);
            let cert = check_kclass(&a, &enc, samples);
            let csv = format!("verdict,evidence_digest,reason\n{:?},{},\"{}\"\n", cert.verdict, cert.evidence_digest(), cert.reason);
            emit(format, csv, cert.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
