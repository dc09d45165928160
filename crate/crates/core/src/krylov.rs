//! Krylov subspaces and solvability diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{apply, finite_section, op_norm, smallest_singular_value, spectral_norm, LinearOperatorSpec};
use crate::space::{dist_to_subspace, orthogonalize, same_space, CoeffVector, SubspaceBasis, C64};

pub const DEFAULT_BREAKDOWN_TOL: f64 = 1e-10;

/// Orthonormal basis of `K_N(A, g) = span{g, Ag, ..., A^{N-1} g}`.
#[derive(Clone, Debug)]
pub struct KrylovBasis {
    base: SubspaceBasis,
    order: usize,
    breakdown: bool,
    op: LinearOperatorSpec,
    g: CoeffVector,
}

impl KrylovBasis {
    pub fn base(&self) -> &SubspaceBasis {
        &self.base
    }

    /// Number of iterates requested.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn effective_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    pub fn operator(&self) -> &LinearOperatorSpec {
        &self.op
    }

    pub fn datum(&self) -> &CoeffVector {
        &self.g
    }

    /// Basis of `K_n` for `n <= order`. Past a breakdown `K_n = K_p`.
    pub fn prefix(&self, n: usize) -> SubspaceBasis {
        self.base.truncated(n).with_label(format!("K_{n}"))
    }
}

/// Arnoldi with two-pass Gram-Schmidt. Breakdown is declared when the new
/// direction is below `breakdown_tol` relative to the largest `||A q_j||` seen.
pub fn build_krylov_basis(op: &LinearOperatorSpec, g: &CoeffVector, n: usize, breakdown_tol: f64) -> Result<KrylovBasis> {
    same_space(op.space(), g.space())?;
    if n == 0 {
        return Err(Error::BadParams("Krylov order must be at least 1".into()));
    }
    let gn = g.norm();
    if gn == 0.0 {
        return Err(Error::ZeroDatum);
    }
    let space = op.space().clone();
    let mut q: Vec<DVector<C64>> = vec![g.iso() / C64::new(gn, 0.0)];
    let mut last = g.scale_re(1.0 / gn);
    let mut scale = 0.0f64;
    let mut breakdown = false;
    while q.len() < n {
        let w = apply(op, &last)?;
        let wn = w.norm();
        scale = scale.max(wn);
        let (r, _) = orthogonalize(&q, w.iso());
        let rn = r.norm();
        if wn == 0.0 || rn <= breakdown_tol * scale {
            breakdown = true;
            break;
        }
        let next = r / C64::new(rn, 0.0);
        last = CoeffVector::from_iso(&space, next.clone());
        q.push(next);
    }
    let m = DMatrix::from_columns(&q);
    let base = SubspaceBasis::from_iso_columns(&space, &m, format!("K_{n}"));
    Ok(KrylovBasis { base, order: n, breakdown, op: op.clone(), g: g.clone() })
}

/// `dist(f, K_N) / ||f||`
pub fn krylov_error(op: &LinearOperatorSpec, g: &CoeffVector, f: &CoeffVector, n: usize) -> Result<f64> {
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return Err(Error::ZeroDatum);
    }
    let k = build_krylov_basis(op, g, n, DEFAULT_BREAKDOWN_TOL)?;
    Ok((dist_to_subspace(f, k.base())? / fnorm).clamp(0.0, 1.0))
}

/// `(N, dist(f, K_N)/||f||)` for `N = 1..=order` from one basis.
pub fn rel_dist_profile(k: &KrylovBasis, f: &CoeffVector) -> Result<Vec<(usize, f64)>> {
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return Err(Error::ZeroDatum);
    }
    same_space(k.base.space(), f.space())?;
    // Residual after projecting on successive columns.
    let mut r = f.iso();
    let mut out = Vec::with_capacity(k.order);
    let cols: Vec<DVector<C64>> = k.base.columns().iter().map(|c| c.iso()).collect();
    for n in 1..=k.order {
        if let Some(q) = cols.get(n - 1) {
            for _ in 0..2 {
                let c = q.dotc(&r);
                r -= q * c;
            }
        }
        out.push((n, (r.norm() / fnorm).clamp(0.0, 1.0)));
    }
    Ok(out)
}

/// `||P_K A P_{K^perp}||` by dense SVD of the compressed block.
pub fn reducibility_residual(op: &LinearOperatorSpec, k: &KrylovBasis) -> Result<f64> {
    same_space(op.space(), k.base.space())?;
    let q = k.base.iso_matrix();
    let qp = k.base.complement().iso_matrix();
    if qp.ncols() == 0 || q.ncols() == 0 {
        return Ok(0.0);
    }
    let m = finite_section(op);
    Ok(spectral_norm(&(q.adjoint() * m * qp)))
}

/// Sine of the smallest angle between `K` and `A(K^perp)`, where image
/// directions with `||Ay|| < floor_tol` are discarded.
pub fn intersection_measure(op: &LinearOperatorSpec, k: &KrylovBasis, floor_tol: f64) -> Result<f64> {
    same_space(op.space(), k.base.space())?;
    let q = k.base.iso_matrix();
    let qp = k.base.complement().iso_matrix();
    if qp.ncols() == 0 {
        return Err(Error::DegenerateComplement);
    }
    let b = finite_section(op) * qp;
    let svd = b.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] >= floor_tol).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateComplement);
    }
    let ur = DMatrix::from_columns(&keep.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let residual = &ur - &q * (q.adjoint() * &ur);
    Ok(smallest_singular_value(&residual).clamp(0.0, 1.0))
}

/// `g_n = sum_{k<n} A^k g / (n^{2k} ||A||^k)`
pub fn inner_approximants(op: &LinearOperatorSpec, g: &CoeffVector, n: usize) -> Result<CoeffVector> {
    same_space(op.space(), g.space())?;
    if n == 0 {
        return Err(Error::BadParams("inner approximant index must be at least 1".into()));
    }
    if g.norm() == 0.0 {
        return Err(Error::ZeroDatum);
    }
    let a = op_norm(op);
    if a == 0.0 {
        return Ok(g.clone());
    }
    let step = 1.0 / ((n * n) as f64 * a);
    let mut term = g.clone();
    let mut acc = g.clone();
    for _ in 1..n {
        term = apply(op, &term)?.scale_re(step);
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolvabilityConfig {
    pub n_max: usize,
    pub breakdown_tol: f64,
    pub solvable_tol: f64,
    pub plateau_window: usize,
    pub plateau_floor: f64,
    pub residual_tol: f64,
    pub floor_tol: f64,
}

impl Default for SolvabilityConfig {
    fn default() -> Self {
        Self {
            n_max: 20,
            breakdown_tol: DEFAULT_BREAKDOWN_TOL,
            solvable_tol: 1e-6,
            plateau_window: 5,
            plateau_floor: 1e-3,
            residual_tol: 1e-10,
            floor_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    KrylovSolvable,
    NotKrylovSolvable,
    Inconclusive,
}

/// Finite-section verdict; `dim` and `n_max` are part of the claim.
#[derive(Clone, Debug, Serialize)]
pub struct SolvabilityReport {
    pub dim: usize,
    pub n_max: usize,
    pub effective_dim: usize,
    pub breakdown: bool,
    pub rel_dist_profile: Vec<(usize, f64)>,
    pub reducibility_residual: f64,
    /// `None` when `A` annihilates the complement.
    pub intersection_measure: Option<f64>,
    pub complement_dim: usize,
    /// Set when the measure rests on fewer than 10 complement dimensions.
    pub measure_unreliable: bool,
    pub verdict: Verdict,
    pub config: SolvabilityConfig,
}

impl SolvabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,rel_dist\n");
        for (n, v) in &self.rel_dist_profile {
            s.push_str(&format!("{n},{v:.12e}\n"));
        }
        s
    }
}

pub fn classify_profile(profile: &[(usize, f64)], cfg: &SolvabilityConfig) -> Verdict {
    let Some(&(_, last)) = profile.last() else {
        return Verdict::Inconclusive;
    };
    let monotone = profile.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-10);
    if last < cfg.solvable_tol && monotone {
        return Verdict::KrylovSolvable;
    }
    let w = cfg.plateau_window.max(1);
    if profile.len() >= w {
        let tail = &profile[profile.len() - w..];
        let lo = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = tail.iter().map(|p| p.1).fold(0.0, f64::max);
        if lo >= cfg.plateau_floor && hi - lo <= cfg.plateau_floor {
            return Verdict::NotKrylovSolvable;
        }
    }
    Verdict::Inconclusive
}

pub fn solvability_verdict(
    op: &LinearOperatorSpec,
    g: &CoeffVector,
    f: &CoeffVector,
    cfg: &SolvabilityConfig,
) -> Result<SolvabilityReport> {
    same_space(op.space(), g.space())?;
    same_space(op.space(), f.space())?;
    let gn = g.norm();
    if gn == 0.0 {
        return Err(Error::ZeroDatum);
    }
    let residual = apply(op, f)?.sub(g)?.norm() / gn;
    if residual > cfg.residual_tol {
        return Err(Error::NotASolution { residual, tolerance: cfg.residual_tol });
    }
    let k = build_krylov_basis(op, g, cfg.n_max, cfg.breakdown_tol)?;
    let profile = rel_dist_profile(&k, f)?;
    let complement_dim = op.dim() - k.effective_dim();
    let measure = match intersection_measure(op, &k, cfg.floor_tol) {
        Ok(m) => Some(m),
        Err(Error::DegenerateComplement) => None,
        Err(e) => return Err(e),
    };
    Ok(SolvabilityReport {
        dim: op.dim(),
        n_max: cfg.n_max,
        effective_dim: k.effective_dim(),
        breakdown: k.breakdown(),
        verdict: classify_profile(&profile, cfg),
        rel_dist_profile: profile,
        reducibility_residual: reducibility_residual(op, &k)?,
        intersection_measure: measure,
        complement_dim,
        measure_unreliable: complement_dim < 10,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::delta;
    use crate::operator::finite_section;
    use crate::space::{project, AmbientSpace};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn shift(d: usize) -> (Arc<crate::space::AmbientSpace>, LinearOperatorSpec) {
        let s = AmbientSpace::unilateral(d);
        let r = LinearOperatorSpec::right_shift(&s).unwrap();
        (s, r)
    }

    fn ex32_an(s: &Arc<AmbientSpace>, n: usize) -> LinearOperatorSpec {
        let e2 = CoeffVector::basis(s, 2);
        LinearOperatorSpec::sum(vec![
            LinearOperatorSpec::rank_one(e2.clone(), e2).unwrap(),
            LinearOperatorSpec::right_shift(s).unwrap().scaled_re(1.0 / n as f64),
        ])
        .unwrap()
    }

    #[test]
    fn shift_basis_is_canonical() {
        let (s, r) = shift(8);
        let k = build_krylov_basis(&r, &CoeffVector::basis(&s, 2), 4, 1e-10).unwrap();
        assert!(!k.breakdown());
        for (j, col) in k.base().columns().iter().enumerate() {
            assert_eq!(*col, CoeffVector::basis(&s, j as i64 + 2));
        }
    }

    #[test]
    fn rank_one_breaks_down_immediately() {
        let s = AmbientSpace::unilateral(6);
        let e2 = CoeffVector::basis(&s, 2);
        let a = LinearOperatorSpec::rank_one(e2.clone(), e2.clone()).unwrap();
        let k = build_krylov_basis(&a, &e2, 5, 1e-10).unwrap();
        assert!(k.breakdown());
        assert_eq!(k.effective_dim(), 1);
        assert_eq!(k.base().columns()[0], e2);
    }

    #[test]
    fn zero_datum_is_rejected() {
        let (s, r) = shift(4);
        assert!(matches!(build_krylov_basis(&r, &CoeffVector::zeros(&s), 3, 1e-10), Err(Error::ZeroDatum)));
    }

    #[test]
    fn ex32_iterates_match_matrix_powers() {
        let s = AmbientSpace::unilateral(12);
        let n = 3;
        let a = ex32_an(&s, n);
        let g = CoeffVector::basis(&s, 2);
        let m = finite_section(&a);
        let mut x = g.iso();
        for k in 0..6 {
            // closed form sum_{j<=k} n^-j e_{j+2}
            let mut expected = DVector::zeros(12);
            for j in 0..=k {
                expected[j as usize + 1] = C64::new((n as f64).powi(-j), 0.0);
            }
            assert!((&x - expected).norm() < 1e-14, "k = {k}");
            x = &m * x;
        }
    }

    #[test]
    fn krylov_error_examples() {
        let (s, r) = shift(10);
        let (e1, e2) = (CoeffVector::basis(&s, 1), CoeffVector::basis(&s, 2));
        for n in 1..8 {
            assert_eq!(krylov_error(&r, &e2, &e1, n).unwrap(), 1.0);
        }
        let rn = LinearOperatorSpec::wrapped_shift(&s, 6).unwrap();
        assert!(krylov_error(&rn, &e2, &e1, 5).unwrap() > 0.5);
        for n in 6..10 {
            assert!(krylov_error(&rn, &e2, &e1, n).unwrap() < 1e-12);
        }
    }

    #[test]
    fn volterra_error_decreases() {
        let s = AmbientSpace::grid_l2(128);
        let v = LinearOperatorSpec::volterra(&s).unwrap();
        let g = CoeffVector::from_fn(&s, |x| C64::new(x, 0.0)).unwrap();
        let one = CoeffVector::from_fn(&s, |_| C64::new(1.0, 0.0)).unwrap();
        let k = build_krylov_basis(&v, &g, 12, 1e-10).unwrap();
        let prof = rel_dist_profile(&k, &one).unwrap();
        assert!(prof.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-10));
        assert!(prof[9].1 < 0.3, "{:?}", prof[9]);
    }

    #[test]
    fn reducibility_examples() {
        let (s, r) = shift(8);
        let k = build_krylov_basis(&r, &CoeffVector::basis(&s, 2), 4, 1e-10).unwrap();
        assert_abs_diff_eq!(reducibility_residual(&r, &k).unwrap(), 1.0, epsilon = 1e-12);

        let d = LinearOperatorSpec::diagonal_real(&s, &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 5.0, 6.0]).unwrap();
        let g = CoeffVector::from_real(&s, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let k = build_krylov_basis(&d, &g, 8, 1e-10).unwrap();
        assert!(reducibility_residual(&d, &k).unwrap() < 1e-10);

        let e2 = CoeffVector::basis(&s, 2);
        let p = LinearOperatorSpec::rank_one(e2.clone(), e2.clone()).unwrap();
        let k = build_krylov_basis(&p, &e2, 3, 1e-10).unwrap();
        assert!(reducibility_residual(&p, &k).unwrap() < 1e-14);
    }

    #[test]
    fn intersection_examples() {
        let (s, r) = shift(12);
        let g = CoeffVector::basis(&s, 2);
        let id = LinearOperatorSpec::identity(&s);
        let k = build_krylov_basis(&r, &g, 4, 1e-10).unwrap();
        assert_abs_diff_eq!(intersection_measure(&id, &k, 1e-12).unwrap(), 1.0, epsilon = 1e-12);
        let k = build_krylov_basis(&r, &g, 10, 1e-10).unwrap();
        assert!(intersection_measure(&r, &k, 1e-12).unwrap() < 1e-12);
        let zero = LinearOperatorSpec::zero(&s);
        assert!(matches!(intersection_measure(&zero, &k, 1e-12), Err(Error::DegenerateComplement)));
    }

    #[test]
    fn inner_approximant_examples() {
        let s = AmbientSpace::unilateral(10);
        let r = LinearOperatorSpec::inverse_square_shift(&s).unwrap();
        let g = CoeffVector::basis(&s, 1);
        assert_eq!(inner_approximants(&r, &g, 1).unwrap(), g);
        let g2 = inner_approximants(&r, &g, 2).unwrap();
        let expected = g.add(&apply(&r, &g).unwrap().scale_re(0.25)).unwrap();
        assert!(g2.sub(&expected).unwrap().norm() < 1e-12);
        let g5 = inner_approximants(&r, &g, 5).unwrap();
        assert!(g.sub(&g5).unwrap().norm() <= g.norm() / 5.0);
    }

    #[test]
    fn verdict_examples() {
        let (s, r) = shift(40);
        let (e1, e2) = (CoeffVector::basis(&s, 1), CoeffVector::basis(&s, 2));
        let cfg = SolvabilityConfig { n_max: 12, ..Default::default() };
        let rep = solvability_verdict(&r, &e2, &e1, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::NotKrylovSolvable);
        assert!(rep.rel_dist_profile.iter().all(|p| p.1 == 1.0));

        let rn = LinearOperatorSpec::wrapped_shift(&s, 6).unwrap();
        let rep = solvability_verdict(&rn, &e2, &e1, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::KrylovSolvable);
        assert!(rep.breakdown);
        assert!(rep.rel_dist_profile[5].1 < 1e-12);

        let err = solvability_verdict(&r, &e1, &e1, &cfg).unwrap_err();
        assert!(matches!(err, Error::NotASolution { .. }));
        assert!(rep.to_csv().starts_with("N,rel_dist\n1,"));
        assert!(rep.to_json().contains("\"plateau_window\": 5"));
    }

    #[test]
    fn verdict_on_random_diagonal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = AmbientSpace::unilateral(15);
        let diag: Vec<f64> = (0..15).map(|_| rng.random_range(1.0..2.0)).collect();
        let a = LinearOperatorSpec::diagonal_real(&s, &diag).unwrap();
        let fv: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = CoeffVector::from_real(&s, &fv).unwrap();
        let g = apply(&a, &f).unwrap();
        let cfg = SolvabilityConfig { n_max: 15, breakdown_tol: 1e-14, ..Default::default() };
        let rep = solvability_verdict(&a, &g, &f, &cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::KrylovSolvable, "{:?}", rep.rel_dist_profile);
    }

    #[test]
    fn breakdown_leaves_an_invariant_subspace() {
        let s = AmbientSpace::unilateral(10);
        let rn = LinearOperatorSpec::wrapped_shift(&s, 4).unwrap();
        let g = CoeffVector::basis(&s, 2);
        let k = build_krylov_basis(&rn, &g, 8, 1e-10).unwrap();
        assert!(k.breakdown());
        assert_eq!(k.effective_dim(), 4);
        let mut x = g.clone();
        for _ in 0..4 {
            x = apply(&rn, &x).unwrap();
        }
        assert!(dist_to_subspace(&x, k.base()).unwrap() < 1e-10 * g.norm());
        for q in k.base().columns() {
            let aq = apply(&rn, q).unwrap();
            assert!(aq.sub(&project(&aq, k.base()).unwrap()).unwrap().norm() < 1e-10);
        }
    }

    fn arb_diag() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (prop::collection::vec(0.5f64..3.0, 10), prop::collection::vec(-1.0f64..1.0, 10))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn nested_and_shift_invariant((diag, gv) in arb_diag()) {
            let s = AmbientSpace::unilateral(10);
            let mut rng_shift = diag.clone();
            rng_shift.rotate_left(1);
            let a = LinearOperatorSpec::sum(vec![
                LinearOperatorSpec::diagonal_real(&s, &diag).unwrap(),
                LinearOperatorSpec::right_shift(&s).unwrap().scaled_re(0.3),
            ]).unwrap();
            let g = CoeffVector::from_real(&s, &gv).unwrap();
            prop_assume!(g.norm() > 1e-3);
            let big = build_krylov_basis(&a, &g, 8, 1e-10).unwrap();
            prop_assert!(big.base().orthonormality_error() < 1e-12);
            for n in 1..big.effective_dim() {
                let kn = big.prefix(n);
                let kn1 = big.prefix(n + 1);
                prop_assert!(delta(&kn, &kn1).unwrap() < 1e-10);
                for q in kn.columns() {
                    let aq = apply(&a, q).unwrap();
                    prop_assert!(dist_to_subspace(&aq, &kn1).unwrap() < 1e-10);
                }
            }
        }

        #[test]
        fn profile_is_monotone((diag, gv) in arb_diag(), fv in prop::collection::vec(-1.0f64..1.0, 10)) {
            let s = AmbientSpace::unilateral(10);
            let a = LinearOperatorSpec::diagonal_real(&s, &diag).unwrap();
            let g = CoeffVector::from_real(&s, &gv).unwrap();
            let f = CoeffVector::from_real(&s, &fv).unwrap();
            prop_assume!(g.norm() > 1e-3 && f.norm() > 1e-3);
            let k = build_krylov_basis(&a, &g, 10, 1e-10).unwrap();
            let prof = rel_dist_profile(&k, &f).unwrap();
            prop_assert!(prof.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-10));
        }

        #[test]
        fn invertible_invariant_case_is_solvable(diag in prop::collection::vec(1.0f64..2.0, 8), gv in prop::collection::vec(-1.0f64..1.0, 8)) {
            // A self-adjoint and invertible: K is A-invariant with A K = K, so A^-1 g in K.
            let s = AmbientSpace::unilateral(8);
            let a = LinearOperatorSpec::diagonal_real(&s, &diag).unwrap();
            let g = CoeffVector::from_real(&s, &gv).unwrap();
            prop_assume!(g.norm() > 1e-3);
            let fv: Vec<f64> = gv.iter().zip(&diag).map(|(x, d)| x / d).collect();
            let f = CoeffVector::from_real(&s, &fv).unwrap();
            let k = build_krylov_basis(&a, &g, 8, 1e-10).unwrap();
            prop_assert!(dist_to_subspace(&f, k.base()).unwrap() / f.norm() < 1e-6);
        }
    }
}
