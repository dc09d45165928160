//! Batch runs driven by a JSON config.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, scenario_entry, Classification, ScenarioReport, ScenarioSpec, Tolerances};
use crate::error::{Error, Result};

/// A value applied to every scenario, or one per id.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PerScenario {
    All(f64),
    ById(BTreeMap<String, f64>),
}

impl PerScenario {
    fn get(&self, id: &str) -> Option<f64> {
        match self {
            Self::All(v) => Some(*v),
            Self::ById(m) => m.get(id).copied(),
        }
    }

    fn ids(&self) -> Vec<&str> {
        match self {
            Self::All(_) => Vec::new(),
            Self::ById(m) => m.keys().map(String::as_str).collect(),
        }
    }
}

/// ```json
/// { "scenarios": ["EX31", "LEM62"], "dims": {"EX31": 60}, "depths": 12,
///   "seed": 7, "tolerances": {"plateau": 0.9} }
/// ```
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub dims: Option<PerScenario>,
    #[serde(default)]
    pub depths: Option<PerScenario>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let known = |id: &str| scenario_entry(id).map_err(|_| Error::ConfigParse(format!("unknown scenario id `{id}`")));
        for id in &cfg.scenarios {
            known(id)?;
        }
        for (key, map) in [("dims", &cfg.dims), ("depths", &cfg.depths)] {
            for id in map.iter().flat_map(|m| m.ids()) {
                known(id)?;
                if !cfg.scenarios.iter().any(|s| s == id) {
                    return Err(Error::ConfigParse(format!("`{key}` names {id}, which is not in `scenarios`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// The `ScenarioSpec` run for one id; a per-id depth on a scenario without one is an error.
    pub fn spec_for(&self, id: &str) -> Result<ScenarioSpec> {
        let entry = scenario_entry(id)?;
        let mut spec = ScenarioSpec::new(id);
        spec.seed = self.seed;
        spec.tolerances = self.tolerances;
        let has_depth = entry.params.iter().any(|p| p.name == "N_max");
        if let Some(d) = self.dims.as_ref().and_then(|m| m.get(id)) {
            let name = entry.dim_param.ok_or_else(|| Error::ConfigParse(format!("{id} has no dimension parameter")))?;
            spec = spec.with(name, d);
        }
        match self.depths.as_ref() {
            Some(PerScenario::ById(m)) if m.contains_key(id) && !has_depth => {
                return Err(Error::ConfigParse(format!("{id} has no depth parameter")));
            }
            Some(m) if has_depth => {
                if let Some(n) = m.get(id) {
                    spec = spec.with("N_max", n);
                }
            }
            _ => {}
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub id: String,
    pub classification: Option<Classification>,
    pub expected: Option<Classification>,
    pub pass: bool,
    pub checks_passed: usize,
    pub checks_total: usize,
    pub rows: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    #[serde(skip)]
    pub reports: Vec<Option<ScenarioReport>>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// 0 when every scenario passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    /// `summary.csv`; no timings, so reruns are byte-identical.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("id,classification,expected,pass,checks_passed,checks_total,rows,error\n");
        let show = |c: &Option<Classification>| c.map(|c| format!("{c:?}")).unwrap_or_default();
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.id,
                show(&e.classification),
                show(&e.expected),
                e.pass,
                e.checks_passed,
                e.checks_total,
                e.rows,
                e.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<8} {:<14} {:<14} {:>7} {:>6}  {}\n", "id", "class", "expected", "checks", "rows", "result");
        for e in &self.entries {
            let show = |c: &Option<Classification>| c.map(|c| format!("{c:?}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<8} {:<14} {:<14} {:>7} {:>6}  {}\n",
                e.id,
                show(&e.classification),
                show(&e.expected),
                format!("{}/{}", e.checks_passed, e.checks_total),
                e.rows,
                match (&e.error, e.pass) {
                    (Some(err), _) => format!("ERROR {err}"),
                    (None, true) => "PASS".into(),
                    (None, false) => "FAIL".into(),
                }
            ));
        }
        s
    }
}

/// Runs every scenario of the config on `jobs` threads (results keep config
/// order) and, when `out` is given, writes `<ID>.csv`, `<ID>.json` and
/// `summary.csv` there.
pub fn run_suite(cfg: &SuiteConfig, out: Option<&Path>, jobs: usize) -> Result<SuiteReport> {
    let specs: Vec<ScenarioSpec> = cfg.scenarios.iter().map(|id| cfg.spec_for(id)).collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::BadParams(format!("thread pool: {e}")))?;
    let results: Vec<Result<ScenarioReport>> = pool.install(|| specs.par_iter().map(run_scenario).collect());
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    for (spec, r) in specs.iter().zip(results) {
        match r {
            Ok(rep) => {
                entries.push(SuiteEntry {
                    id: rep.id.clone(),
                    classification: Some(rep.classification),
                    expected: Some(rep.expected_classification),
                    pass: rep.pass,
                    checks_passed: rep.checks.iter().filter(|c| c.pass).count(),
                    checks_total: rep.checks.len(),
                    rows: rep.rows.len(),
                    error: None,
                });
                reports.push(Some(rep));
            }
            Err(e) => {
                entries.push(SuiteEntry {
                    id: spec.id.clone(),
                    classification: None,
                    expected: scenario_entry(&spec.id).ok().map(|e| e.expected),
                    pass: false,
                    checks_passed: 0,
                    checks_total: 0,
                    rows: 0,
                    error: Some(e.to_string()),
                });
                reports.push(None);
            }
        }
    }
    let report = SuiteReport { entries, reports };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for rep in report.reports.iter().flatten() {
            fs::write(dir.join(format!("{}.csv", rep.id)), rep.to_csv())?;
            fs::write(dir.join(format!("{}.json", rep.id)), rep.to_json())?;
        }
        fs::write(dir.join("summary.csv"), report.summary_csv())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let c = SuiteConfig::from_json(r#"{"scenarios": ["EX31", "LEM62"], "dims": {"EX31": 60}, "depths": 10}"#).unwrap();
        let s = c.spec_for("EX31").unwrap();
        assert_eq!(s.params.get("D"), Some(60.0));
        assert_eq!(s.params.get("N_max"), Some(10.0));
        // LEM62 has no depth; a blanket depth simply does not apply
        assert_eq!(c.spec_for("LEM62").unwrap().params.get("N_max"), None);
    }

    #[test]
    fn empty_selection_passes() {
        let c = SuiteConfig::from_json(r#"{"scenarios": []}"#).unwrap();
        let r = run_suite(&c, None, 1).unwrap();
        assert!(r.entries.is_empty());
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn config_errors_name_the_culprit() {
        let err = |t: &str| match SuiteConfig::from_json(t) {
            Err(Error::ConfigParse(m)) => m,
            other => panic!("{other:?}"),
        };
        assert!(err(r#"{"scenarios": ["EX31"], "colour": 1}"#).contains("colour"));
        assert!(err(r#"{"scenarios": ["EX99"]}"#).contains("EX99"));
        assert!(err(r#"{"scenarios": ["EX31"], "dims": {"LEM62": 8}}"#).contains("LEM62"));
        assert!(err(r#"{"scenarios": ["EX31"], "tolerances": {"platau": 0.5}}"#).contains("platau"));
        let c = SuiteConfig::from_json(r#"{"scenarios": ["LEM62"], "depths": {"LEM62": 4}}"#).unwrap();
        assert!(matches!(c.spec_for("LEM62"), Err(Error::ConfigParse(_))));
    }
}
