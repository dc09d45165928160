//! Registry of the example operators, addressed by id.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kclass::{ArcPiece, SpectralEnclosure};
use crate::operator::{unit_circle_symbol, LaurentSymbol, LinearOperatorSpec};
use crate::space::{AmbientSpace, CoeffVector, C64};

/// Symbol sample count shared by all EX44 sections, so that sections of
/// different widths are principal submatrices of one circulant.
pub const EX44_SAMPLES: usize = 16384;

/// Lower constant `c` in `||A - A_n|| >= c / n` at `K = 256`, from the
/// dense-SVD study in `examples/lid_convergence.rs` (rounded down).
pub const EX44_CALIBRATION_C: f64 = 0.999;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamSchema {
    pub name: &'static str,
    pub doc: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorEntry {
    pub id: &'static str,
    pub space: &'static str,
    pub description: &'static str,
    pub citation: &'static str,
    pub params: Vec<ParamSchema>,
}

const fn int(name: &'static str, doc: &'static str, default: f64, min: f64, max: f64) -> ParamSchema {
    ParamSchema { name, doc, default, min, max, integer: true }
}

const DIM: ParamSchema = int("D", "truncation dimension", 100.0, 2.0, 4096.0);
const HALF: ParamSchema = int("K", "window half-width, indices -K..K", 64.0, 1.0, 1024.0);
const GRID: ParamSchema = int("N", "number of grid cells", 128.0, 2.0, 4096.0);
const INDEX: ParamSchema = int("n", "perturbation index", 6.0, 1.0, 1e6);
const SAMPLES: ParamSchema = int("L", "symbol samples (rounded up to a power of two >= 8K)", EX44_SAMPLES as f64, 8.0, 1048576.0);

pub fn operator_registry() -> Vec<OperatorEntry> {
    let e = |id, space, description, citation, params: &[ParamSchema]| OperatorEntry {
        id,
        space,
        description,
        citation,
        params: params.to_vec(),
    };
    vec![
        e("IDENTITY", "UnilateralSeq", "identity", "notation", &[DIM]),
        e("SHIFT", "UnilateralSeq", "right shift e_k -> e_{k+1}", "Example 3.2", &[DIM]),
        e("BISHIFT", "BilateralSeq", "bilateral right shift", "Example 3.3", &[HALF]),
        e("EX31_R", "UnilateralSeq", "weighted shift sum_k k^-2 |e_{k+1}><e_k|", "Example 3.1", &[DIM]),
        e(
            "EX31_Rn",
            "UnilateralSeq",
            "R_n = sum_{k<n} k^-2 |e_{k+1}><e_k| + n^-2 |e_1><e_n|",
            "Example 3.1",
            &[DIM, ParamSchema { min: 2.0, ..INDEX }],
        ),
        e("EX32_A", "UnilateralSeq", "|e_2><e_2|", "Example 3.2", &[DIM]),
        e("EX32_An", "UnilateralSeq", "|e_2><e_2| + (1/n) shift", "Example 3.2", &[DIM, INDEX]),
        e("VOLTERRA", "GridL2", "Volterra integration, left-endpoint rule", "Example 3.4", &[GRID]),
        e("LEM43_A", "UnilateralSeq", "diag(1/k)", "Lemma 4.3", &[DIM]),
        e("LEM43_An", "UnilateralSeq", "diag(1/k) + 1/n", "Lemma 4.3", &[DIM, INDEX]),
        e("EX44_A", "BilateralSeq", "Laurent operator with symbol e^{2 pi i x}", "Example 4.4", &[HALF, SAMPLES]),
        e(
            "EX44_An",
            "BilateralSeq",
            "Laurent operator whose symbol is lifted to radius 1 + 1/n on [0, 1/(2 pi n)]",
            "Example 4.4",
            &[HALF, INDEX, SAMPLES],
        ),
    ]
}

/// The manifest shipped in `registry/operators.json`.
pub fn operator_manifest() -> String {
    let v = serde_json::json!({
        "operators": operator_registry(),
        "calibration": {
            "EX44_An": { "K": 256, "c": EX44_CALIBRATION_C, "samples": EX44_SAMPLES },
        },
    });
    serde_json::to_string_pretty(&v).expect("manifest serialises") + "\n"
}

/// Numeric parameters by name, e.g. parsed from `n=4`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OpParams(BTreeMap<String, f64>);

impl OpParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    /// Parses `key=value` pairs.
    pub fn parse<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = Self::new();
        for p in pairs {
            let (k, v) = p.split_once('=').ok_or_else(|| Error::BadParams(format!("expected key=value, got `{p}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::BadParams(format!("`{v}` is not a number")))?;
            out.set(k.trim(), v);
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }

    pub(crate) fn resolve(&self, id: &str, schema: &[ParamSchema]) -> Result<BTreeMap<&'static str, f64>> {
        for k in self.0.keys() {
            if !schema.iter().any(|s| s.name == k) {
                return Err(Error::BadParams(format!("{id} has no parameter `{k}`")));
            }
        }
        let mut out = BTreeMap::new();
        for s in schema {
            let v = self.get(s.name).unwrap_or(s.default);
            if !(s.min..=s.max).contains(&v) || (s.integer && v.fract() != 0.0) {
                return Err(Error::BadParams(format!("{id}: {} = {v} outside [{}, {}]", s.name, s.min, s.max)));
            }
            out.insert(s.name, v);
        }
        Ok(out)
    }
}

/// EX44 symbol: `e^{2 pi i x}`, lifted to radius `1 + 1/n` on the lid
/// `[0, 1/(2 pi n)]`.
pub fn lid_symbol(n: usize) -> impl Fn(f64) -> C64 {
    let cut = 1.0 / n as f64;
    move |x| {
        let r = if x <= cut / (2.0 * PI) { 1.0 + cut } else { 1.0 };
        C64::from_polar(r, 2.0 * PI * x)
    }
}

/// Arc tube around the range of [`lid_symbol`]: the lid arc at radius
/// `1 + 1/n` over angles `[0, 1/n]`, the unit arc elsewhere, half-width
/// `1/(4n)`. The radial gaps at both lid ends keep the complement connected.
pub fn lid_enclosure(n: usize) -> SpectralEnclosure {
    let cut = 1.0 / n as f64;
    SpectralEnclosure::arc_tube(
        vec![
            ArcPiece { radius: 1.0 + cut, start: 0.0, end: cut },
            ArcPiece { radius: 1.0, start: cut, end: 2.0 * PI },
        ],
        0.25 * cut,
    )
}

/// Symbol of the EX33 candidate data: `exp(-a / (x - 1/2))` on `(1/2, 1)` and
/// `1` on `[0, 1/2]`. It is positive a.e. with `log|s|` not integrable, the
/// Szego-type condition under which a vector is cyclic for the bilateral right
/// shift. The jump at `x = 0` makes its coefficients decay like `1/k`, so
/// truncations stay visibly non-cyclic. As `a -> 0` it tends to `1` in `L2`.
pub fn cyclic_candidate_symbol(a: f64) -> impl Fn(f64) -> C64 {
    move |x| {
        let t = x - 0.5;
        C64::new(if t > 0.0 { (-a / t).exp() } else { 1.0 }, 0.0)
    }
}

/// Coefficients `c_k`, `|k| <= K`, of [`cyclic_candidate_symbol`] on a bilateral
/// window, so that `sum_k c_k e^{2 pi i k x}` is the symbol.
pub fn cyclic_candidate(space: &Arc<AmbientSpace>, a: f64) -> Result<CoeffVector> {
    let half = space
        .half_width()
        .ok_or_else(|| Error::BadParams("cyclic candidates live on a bilateral window".into()))?;
    if !(a > 0.0) {
        return Err(Error::BadParams(format!("candidate parameter a = {a} must be positive")));
    }
    let sym = LaurentSymbol::from_fn(half, EX44_SAMPLES, cyclic_candidate_symbol(a));
    let coords = (-(half as i64)..=half as i64).map(|k| sym.coeff(k)).collect::<Vec<_>>();
    CoeffVector::new(space, nalgebra::DVector::from_vec(coords))
}

pub fn build_example_operator(id: &str, params: &OpParams) -> Result<LinearOperatorSpec> {
    let entry = operator_registry()
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::UnknownScenario(id.to_string()))?;
    let p = params.resolve(id, &entry.params)?;
    let u = |name: &str| p[name] as usize;
    let seq = |d: usize| AmbientSpace::unilateral(d);
    match id {
        "IDENTITY" => Ok(LinearOperatorSpec::identity(&seq(u("D")))),
        "SHIFT" => LinearOperatorSpec::right_shift(&seq(u("D"))),
        "BISHIFT" => LinearOperatorSpec::right_shift(&AmbientSpace::bilateral(u("K"))),
        "EX31_R" => LinearOperatorSpec::inverse_square_shift(&seq(u("D"))),
        "EX31_Rn" => LinearOperatorSpec::wrapped_shift(&seq(u("D")), u("n")),
        "EX32_A" | "EX32_An" => {
            let s = seq(u("D"));
            let e2 = CoeffVector::basis(&s, 2);
            let a = LinearOperatorSpec::rank_one(e2.clone(), e2)?;
            if id == "EX32_A" {
                return Ok(a);
            }
            let shift = LinearOperatorSpec::right_shift(&s)?.scaled_re(1.0 / p["n"]);
            LinearOperatorSpec::sum(vec![a, shift])
        }
        "VOLTERRA" => LinearOperatorSpec::volterra(&AmbientSpace::grid_l2(u("N"))),
        "LEM43_A" | "LEM43_An" => {
            let d = u("D");
            let s = seq(d);
            let shift = if id == "LEM43_An" { 1.0 / p["n"] } else { 0.0 };
            let vals: Vec<f64> = (1..=d).map(|k| 1.0 / k as f64 + shift).collect();
            LinearOperatorSpec::diagonal_real(&s, &vals)
        }
        "EX44_A" => {
            let k = u("K");
            LinearOperatorSpec::laurent(&AmbientSpace::bilateral(k), LaurentSymbol::from_fn(k, u("L"), unit_circle_symbol))
        }
        "EX44_An" => {
            let k = u("K");
            LinearOperatorSpec::laurent(&AmbientSpace::bilateral(k), LaurentSymbol::from_fn(k, u("L"), lid_symbol(u("n"))))
        }
        _ => unreachable!("registry and builder disagree on {id}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{finite_section, op_norm_dense, op_norm_est};
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_entry_builds_with_defaults() {
        for e in operator_registry() {
            let op = build_example_operator(e.id, &OpParams::new().with("D", 8.0).with("K", 4.0).with("N", 8.0).with("n", 3.0));
            // not every id takes every parameter
            let op = op.or_else(|_| {
                let mut p = OpParams::new();
                for s in &e.params {
                    let v = match s.name {
                        "D" | "N" => 8.0,
                        "K" => 4.0,
                        "n" => 3.0,
                        _ => s.default,
                    };
                    p.set(s.name, v);
                }
                build_example_operator(e.id, &p)
            });
            assert!(op.is_ok(), "{}: {:?}", e.id, op.err());
        }
    }

    #[test]
    fn ex31_rn_entries() {
        let op = build_example_operator("EX31_Rn", &OpParams::new().with("n", 2.0).with("D", 6.0)).unwrap();
        let m = finite_section(&op);
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.25, 0.0));
        let nonzero = m.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn ex32_an_at_one() {
        let op = build_example_operator("EX32_An", &OpParams::new().with("n", 1.0).with("D", 5.0)).unwrap();
        let m = finite_section(&op);
        for i in 0..5 {
            for j in 0..5 {
                let expected = if (i, j) == (1, 1) || i == j + 1 { 1.0 } else { 0.0 };
                assert_eq!(m[(i, j)], C64::new(expected, 0.0), "({i},{j})");
            }
        }
    }

    #[test]
    fn ex44_difference_norm_below_one_over_n() {
        let p = OpParams::new().with("K", 64.0);
        let a = build_example_operator("EX44_A", &p).unwrap();
        let an = build_example_operator("EX44_An", &p.clone().with("n", 4.0)).unwrap();
        let diff = a.minus(&an).unwrap();
        let dense = op_norm_dense(&diff);
        assert!(dense <= 0.25 + 1e-9, "{dense}");
        let est = op_norm_est(&diff, 5000, 1e-14).unwrap_or_else(|e| match e {
            Error::NoConvergence { estimate, .. } => estimate,
            e => panic!("{e}"),
        });
        assert!(est <= 0.25 + 1e-9);
        // clustered top singular values: power iteration converges slowly here
        assert_abs_diff_eq!(est, dense, epsilon = 1e-4);
    }

    #[test]
    fn unknown_ids_and_params() {
        assert!(matches!(build_example_operator("NOPE", &OpParams::new()), Err(Error::UnknownScenario(_))));
        assert!(matches!(build_example_operator("SHIFT", &OpParams::new().with("q", 1.0)), Err(Error::BadParams(_))));
        assert!(matches!(build_example_operator("EX31_Rn", &OpParams::new().with("n", 1.0)), Err(Error::BadParams(_))));
        assert!(matches!(build_example_operator("SHIFT", &OpParams::new().with("D", 2.5)), Err(Error::BadParams(_))));
        assert_eq!(OpParams::parse(["n=4", "D = 6"]).unwrap(), OpParams::new().with("n", 4.0).with("D", 6.0));
        assert!(OpParams::parse(["n"]).is_err());
    }

    #[test]
    fn shipped_manifest_is_current() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/registry/operators.json");
        if std::env::var_os("KRYLOV_LAB_BLESS").is_some() {
            std::fs::write(path, operator_manifest()).unwrap();
        }
        let shipped = std::fs::read_to_string(path).unwrap();
        assert_eq!(shipped, operator_manifest(), "regenerate registry/operators.json");
    }
}
