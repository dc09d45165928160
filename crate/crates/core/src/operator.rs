//! Symbolic operators with matrix-free application.
//!
//! A [`LinearOperatorSpec`] describes an operator on one [`AmbientSpace`]; the
//! action, the adjoint (with respect to the weighted inner product) and the
//! dense finite section are all derived from the description.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::space::{same_space, AmbientSpace, CoeffVector, SpaceKind, C64};

#[derive(Clone, Debug)]
pub struct LinearOperatorSpec {
    space: Arc<AmbientSpace>,
    kind: OperatorKind,
}

#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// Matrix acting on raw coordinates.
    Dense(DMatrix<C64>),
    Diagonal(Vec<C64>),
    /// `e_p -> weights[p] e_{p+1}`; the last coordinate leaves the window.
    UnilateralShift(Vec<C64>),
    /// `R_n = sum_{k<n} k^-2 |e_{k+1}><e_k| + n^-2 |e_1><e_n|`.
    WrappedShift(usize),
    /// `f -> <phi, f> psi`
    RankOne { psi: CoeffVector, phi: CoeffVector },
    /// Left-endpoint rectangle rule for `f -> int_0^x f`.
    VolterraQuad,
    Laurent(LaurentSymbol),
    Scaled(C64, Box<LinearOperatorSpec>),
    Sum(Vec<LinearOperatorSpec>),
}

/// Samples of a symbol `a(x)`, `x in [0,1)` (angle `2 pi x`), and its Fourier
/// coefficients `c_m`, `|m| <= 2K`, for a bilateral window of half-width `K`.
#[derive(Clone, Debug)]
pub struct LaurentSymbol {
    half: usize,
    samples: Vec<C64>,
    coeffs: Vec<C64>,
}

impl LaurentSymbol {
    /// Samples `a` at `2^m >= max(8K, min_samples)` equispaced points and takes
    /// the discrete Fourier transform.
    pub fn from_fn(half: usize, min_samples: usize, a: impl Fn(f64) -> C64) -> Self {
        let needed = (8 * half).max(min_samples).max(8);
        let len = needed.next_power_of_two();
        let samples: Vec<C64> = (0..len).map(|j| a(j as f64 / len as f64)).collect();
        Self::from_samples(half, samples)
    }

    pub fn from_samples(half: usize, samples: Vec<C64>) -> Self {
        let len = samples.len();
        assert!(len > 4 * half, "need more than 4K symbol samples");
        let mut buf = samples.clone();
        FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut buf);
        let span = 2 * half;
        let coeffs = (0..=2 * span)
            .map(|i| {
                let m = i as i64 - span as i64;
                buf[m.rem_euclid(len as i64) as usize] / len as f64
            })
            .collect();
        Self { half, samples, coeffs }
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// Fourier coefficient `c_m`; zero outside `|m| <= 2K`.
    pub fn coeff(&self, m: i64) -> C64 {
        let span = 2 * self.half as i64;
        if m.abs() > span {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + span) as usize]
        }
    }
}

impl LinearOperatorSpec {
    fn new(space: &Arc<AmbientSpace>, kind: OperatorKind) -> Self {
        Self { space: space.clone(), kind }
    }

    pub fn dense(space: &Arc<AmbientSpace>, m: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::BadParams(format!("dense matrix must be {d}x{d}")));
        }
        Ok(Self::new(space, OperatorKind::Dense(m)))
    }

    pub fn diagonal(space: &Arc<AmbientSpace>, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != space.dim() {
            return Err(Error::BadParams("diagonal length must equal the dimension".into()));
        }
        Ok(Self::new(space, OperatorKind::Diagonal(entries)))
    }

    pub fn diagonal_real(space: &Arc<AmbientSpace>, entries: &[f64]) -> Result<Self> {
        Self::diagonal(space, entries.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn identity(space: &Arc<AmbientSpace>) -> Self {
        Self::new(space, OperatorKind::Diagonal(vec![C64::new(1.0, 0.0); space.dim()]))
    }

    pub fn zero(space: &Arc<AmbientSpace>) -> Self {
        Self::new(space, OperatorKind::Diagonal(vec![C64::new(0.0, 0.0); space.dim()]))
    }

    /// Weighted right shift on a sequence space; `weights[p]` multiplies the
    /// coordinate moving from position `p` to `p + 1`.
    pub fn shift(space: &Arc<AmbientSpace>, weights: Vec<C64>) -> Result<Self> {
        match space.kind() {
            SpaceKind::UnilateralSeq | SpaceKind::BilateralSeq => {}
            _ => return Err(Error::BadParams("shifts act on sequence spaces".into())),
        }
        if weights.len() != space.dim() {
            return Err(Error::BadParams("shift needs one weight per coordinate".into()));
        }
        Ok(Self::new(space, OperatorKind::UnilateralShift(weights)))
    }

    /// Unweighted right shift `e_k -> e_{k+1}`.
    pub fn right_shift(space: &Arc<AmbientSpace>) -> Result<Self> {
        Self::shift(space, vec![C64::new(1.0, 0.0); space.dim()])
    }

    /// `R = sum_k k^-2 |e_{k+1}><e_k|` on `l2(N)`.
    pub fn inverse_square_shift(space: &Arc<AmbientSpace>) -> Result<Self> {
        let w = (1..=space.dim()).map(|k| C64::new(1.0 / (k * k) as f64, 0.0)).collect();
        Self::shift(space, w)
    }

    pub fn wrapped_shift(space: &Arc<AmbientSpace>, n: usize) -> Result<Self> {
        if space.kind() != SpaceKind::UnilateralSeq {
            return Err(Error::BadParams("R_n lives on l2(N)".into()));
        }
        if n < 2 || n > space.dim() {
            return Err(Error::BadParams(format!("R_n needs 2 <= n <= D, got n = {n}")));
        }
        Ok(Self::new(space, OperatorKind::WrappedShift(n)))
    }

    pub fn rank_one(psi: CoeffVector, phi: CoeffVector) -> Result<Self> {
        same_space(psi.space(), phi.space())?;
        let space = psi.space().clone();
        Ok(Self::new(&space, OperatorKind::RankOne { psi, phi }))
    }

    pub fn volterra(space: &Arc<AmbientSpace>) -> Result<Self> {
        if space.kind() != SpaceKind::GridL2 {
            return Err(Error::BadParams("Volterra quadrature needs a GridL2 space".into()));
        }
        Ok(Self::new(space, OperatorKind::VolterraQuad))
    }

    pub fn laurent(space: &Arc<AmbientSpace>, symbol: LaurentSymbol) -> Result<Self> {
        match space.half_width() {
            Some(k) if k == symbol.half => Ok(Self::new(space, OperatorKind::Laurent(symbol))),
            Some(_) => Err(Error::BadParams("symbol window does not match the space".into())),
            None => Err(Error::BadParams("Laurent operators need a BilateralSeq space".into())),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(&self.space, OperatorKind::Scaled(c, Box::new(self.clone())))
    }

    pub fn scaled_re(&self, c: f64) -> Self {
        self.scaled(C64::new(c, 0.0))
    }

    pub fn sum(terms: Vec<LinearOperatorSpec>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::BadParams("empty operator sum".into()))?;
        let space = first.space.clone();
        for t in &terms {
            same_space(&space, &t.space)?;
        }
        Ok(Self::new(&space, OperatorKind::Sum(terms)))
    }

    /// `self - other`
    pub fn minus(&self, other: &LinearOperatorSpec) -> Result<Self> {
        Self::sum(vec![self.clone(), other.scaled_re(-1.0)])
    }

    /// Block-diagonal operator on `first.space ⊕ second.space`.
    pub fn direct_sum(first: &LinearOperatorSpec, second: &LinearOperatorSpec) -> Result<Self> {
        let space = AmbientSpace::direct_sum(&first.space, &second.space);
        let (d1, d2) = (first.space.dim(), second.space.dim());
        let mut m = DMatrix::zeros(d1 + d2, d1 + d2);
        m.view_mut((0, 0), (d1, d1)).copy_from(&first.coord_matrix());
        m.view_mut((d1, d1), (d2, d2)).copy_from(&second.coord_matrix());
        Self::dense(&space, m)
    }

    pub fn space(&self) -> &Arc<AmbientSpace> {
        &self.space
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn apply_coords(&self, x: &DVector<C64>) -> DVector<C64> {
        let d = x.len();
        match &self.kind {
            OperatorKind::Dense(m) => m * x,
            OperatorKind::Diagonal(e) => DVector::from_iterator(d, x.iter().zip(e).map(|(a, b)| a * b)),
            OperatorKind::UnilateralShift(w) => {
                let mut y = DVector::zeros(d);
                for p in 0..d.saturating_sub(1) {
                    y[p + 1] = w[p] * x[p];
                }
                y
            }
            OperatorKind::WrappedShift(n) => {
                let n = *n;
                let mut y = DVector::zeros(d);
                for k in 1..n {
                    y[k] = x[k - 1] / (k * k) as f64;
                }
                y[0] += x[n - 1] / (n * n) as f64;
                y
            }
            OperatorKind::RankOne { psi, phi } => {
                let s: C64 = phi
                    .coords()
                    .iter()
                    .zip(x.iter())
                    .zip(self.space.quad_weights())
                    .map(|((a, b), w)| a.conj() * b * *w)
                    .sum();
                psi.coords() * s
            }
            OperatorKind::VolterraQuad => {
                let h = self.space.quad_weights()[0];
                let mut y = DVector::zeros(d);
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..d {
                    y[i] = acc * h;
                    acc += x[i];
                }
                y
            }
            OperatorKind::Laurent(sym) => {
                let labels = self.space.labels();
                DVector::from_fn(d, |j, _| {
                    (0..d).map(|k| sym.coeff(labels[j] - labels[k]) * x[k]).sum()
                })
            }
            OperatorKind::Scaled(c, inner) => inner.apply_coords(x) * *c,
            OperatorKind::Sum(terms) => {
                let mut y = DVector::zeros(d);
                for t in terms {
                    y += t.apply_coords(x);
                }
                y
            }
        }
    }

    fn adjoint_coords(&self, x: &DVector<C64>) -> DVector<C64> {
        let d = x.len();
        match &self.kind {
            OperatorKind::Dense(m) => {
                // A* = W^-1 M^H W for the weighted inner product.
                let w = self.space.quad_weights();
                let wx = DVector::from_iterator(d, x.iter().zip(w).map(|(z, w)| z * *w));
                let y = m.adjoint() * wx;
                DVector::from_iterator(d, y.iter().zip(w).map(|(z, w)| z / *w))
            }
            OperatorKind::Diagonal(e) => {
                DVector::from_iterator(d, x.iter().zip(e).map(|(a, b)| a * b.conj()))
            }
            OperatorKind::UnilateralShift(w) => {
                let mut y = DVector::zeros(d);
                for p in 0..d.saturating_sub(1) {
                    y[p] = w[p].conj() * x[p + 1];
                }
                y
            }
            OperatorKind::WrappedShift(n) => {
                let n = *n;
                let mut y = DVector::zeros(d);
                for k in 1..n {
                    y[k - 1] = x[k] / (k * k) as f64;
                }
                y[n - 1] += x[0] / (n * n) as f64;
                y
            }
            OperatorKind::RankOne { psi, phi } => {
                let s: C64 = psi
                    .coords()
                    .iter()
                    .zip(x.iter())
                    .zip(self.space.quad_weights())
                    .map(|((a, b), w)| a.conj() * b * *w)
                    .sum();
                phi.coords() * s
            }
            OperatorKind::VolterraQuad => {
                let h = self.space.quad_weights()[0];
                let mut y = DVector::zeros(d);
                let mut acc = C64::new(0.0, 0.0);
                for i in (0..d).rev() {
                    y[i] = acc * h;
                    acc += x[i];
                }
                y
            }
            OperatorKind::Laurent(sym) => {
                let labels = self.space.labels();
                DVector::from_fn(d, |k, _| {
                    (0..d).map(|j| sym.coeff(labels[j] - labels[k]).conj() * x[j]).sum()
                })
            }
            OperatorKind::Scaled(c, inner) => inner.adjoint_coords(x) * c.conj(),
            OperatorKind::Sum(terms) => {
                let mut y = DVector::zeros(d);
                for t in terms {
                    y += t.adjoint_coords(x);
                }
                y
            }
        }
    }

    /// Matrix of the action on raw coordinates.
    pub fn coord_matrix(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = C64::new(1.0, 0.0);
            m.set_column(j, &self.apply_coords(&e));
        }
        m
    }
}

pub fn apply(op: &LinearOperatorSpec, x: &CoeffVector) -> Result<CoeffVector> {
    same_space(&op.space, x.space())?;
    CoeffVector::new(&op.space, op.apply_coords(x.coords()))
}

/// Adjoint with respect to the space's weighted inner product.
pub fn adjoint_apply(op: &LinearOperatorSpec, x: &CoeffVector) -> Result<CoeffVector> {
    same_space(&op.space, x.space())?;
    CoeffVector::new(&op.space, op.adjoint_coords(x.coords()))
}

/// `M_ij = <e_i, A e_j>` in the orthonormal coordinate basis, so that
/// `apply(op, x).iso() == M * x.iso()`. On spaces with uniform weights this is
/// also the matrix of the action on raw coordinates.
pub fn finite_section(op: &LinearOperatorSpec) -> DMatrix<C64> {
    let m = op.coord_matrix();
    let s: Vec<f64> = op.space.quad_weights().iter().map(|w| w.sqrt()).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[i] / s[j]))
}

/// Largest singular value of the finite section by dense SVD.
pub fn op_norm_dense(op: &LinearOperatorSpec) -> f64 {
    spectral_norm(&finite_section(op))
}

pub(crate) fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub(crate) fn smallest_singular_value(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Power iteration on `A*A` from the normalised all-ones vector. Stops when the
/// relative change of the estimate drops below `tol`.
pub fn op_norm_est(op: &LinearOperatorSpec, iters: usize, tol: f64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::BadParams("op_norm_est needs at least one iteration".into()));
    }
    let d = op.dim();
    let sqrt_w: Vec<f64> = op.space.quad_weights().iter().map(|w| w.sqrt()).collect();
    // iso coordinates
    let mut v = DVector::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0));
    let to_coords = |v: &DVector<C64>| DVector::from_iterator(d, v.iter().zip(&sqrt_w).map(|(z, s)| z / *s));
    let to_iso = |v: &DVector<C64>| DVector::from_iterator(d, v.iter().zip(&sqrt_w).map(|(z, s)| z * *s));
    let mut estimate = 0.0;
    for _ in 0..iters {
        let av = op.apply_coords(&to_coords(&v));
        let sigma = to_iso(&av).norm();
        let w = to_iso(&op.adjoint_coords(&av));
        let wn = w.norm();
        if wn == 0.0 || sigma == 0.0 {
            return Ok(sigma.max(estimate));
        }
        let done = (sigma - estimate).abs() <= tol * sigma;
        estimate = sigma;
        if done {
            return Ok(estimate);
        }
        v = w / C64::new(wn, 0.0);
    }
    Err(Error::NoConvergence { iters, estimate })
}

/// Norm estimate used by routines that only need a reasonable value: the
/// power-iteration result, or its best estimate when the budget runs out.
pub fn op_norm(op: &LinearOperatorSpec) -> f64 {
    match op_norm_est(op, 2000, 1e-12) {
        Ok(v) => v,
        Err(Error::NoConvergence { estimate, .. }) => estimate,
        Err(_) => op_norm_dense(op),
    }
}

/// Symbol `e^{2 pi i x}` of the multiplication operator unitarily equivalent to
/// the bilateral right shift.
pub fn unit_circle_symbol(x: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::inner;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_vec(space: &Arc<AmbientSpace>, rng: &mut ChaCha8Rng) -> CoeffVector {
        let d = space.dim();
        CoeffVector::new(
            space,
            DVector::from_fn(d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
        )
        .unwrap()
    }

    fn all_variants() -> Vec<LinearOperatorSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seq = AmbientSpace::unilateral(9);
        let bi = AmbientSpace::bilateral(4);
        let grid = AmbientSpace::grid_l2(12);
        let dense = DMatrix::from_fn(9, 9, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let psi = random_vec(&seq, &mut rng);
        let phi = random_vec(&seq, &mut rng);
        let sym = LaurentSymbol::from_fn(4, 0, |x| C64::from_polar(1.0 + 0.3 * x, 2.0 * PI * x));
        let shift = LinearOperatorSpec::inverse_square_shift(&seq).unwrap();
        vec![
            LinearOperatorSpec::dense(&seq, dense).unwrap(),
            LinearOperatorSpec::diagonal(&seq, (0..9).map(|k| C64::new(k as f64, 1.0)).collect()).unwrap(),
            shift.clone(),
            LinearOperatorSpec::right_shift(&bi).unwrap(),
            LinearOperatorSpec::wrapped_shift(&seq, 5).unwrap(),
            LinearOperatorSpec::rank_one(psi, phi).unwrap(),
            LinearOperatorSpec::volterra(&grid).unwrap(),
            LinearOperatorSpec::laurent(&bi, sym).unwrap(),
            shift.scaled(C64::new(0.5, -2.0)),
            LinearOperatorSpec::sum(vec![shift.clone(), LinearOperatorSpec::identity(&seq)]).unwrap(),
            LinearOperatorSpec::direct_sum(&LinearOperatorSpec::volterra(&grid).unwrap(), &shift).unwrap(),
        ]
    }

    #[test]
    fn shift_moves_basis_vectors() {
        let s = AmbientSpace::unilateral(5);
        let r = LinearOperatorSpec::right_shift(&s).unwrap();
        assert_eq!(apply(&r, &CoeffVector::basis(&s, 2)).unwrap(), CoeffVector::basis(&s, 3));
        assert_eq!(adjoint_apply(&r, &CoeffVector::basis(&s, 3)).unwrap(), CoeffVector::basis(&s, 2));
        // last coordinate leaves the window
        assert_eq!(apply(&r, &CoeffVector::basis(&s, 5)).unwrap().norm(), 0.0);
    }

    #[test]
    fn rank_one_projector_fixes_its_vector() {
        let s = AmbientSpace::unilateral(4);
        let e2 = CoeffVector::basis(&s, 2);
        let a = LinearOperatorSpec::rank_one(e2.clone(), e2.clone()).unwrap();
        assert_eq!(apply(&a, &e2).unwrap(), e2);
    }

    #[test]
    fn volterra_integrates_constants() {
        let s = AmbientSpace::grid_l2(200);
        let v = LinearOperatorSpec::volterra(&s).unwrap();
        let one = CoeffVector::from_fn(&s, |_| c(1.0)).unwrap();
        let y = apply(&v, &one).unwrap();
        let h = 1.0 / 200.0;
        let pts = s.grid_points().unwrap();
        let err = y.coords().iter().zip(&pts).map(|(a, x)| (a.re - x).abs()).fold(0.0, f64::max);
        assert!(err <= h, "max error {err}");
    }

    #[test]
    fn volterra_section_is_strictly_lower_triangular() {
        let s = AmbientSpace::grid_l2(6);
        let m = finite_section(&LinearOperatorSpec::volterra(&s).unwrap());
        for i in 0..6 {
            for j in i..6 {
                assert_eq!(m[(i, j)], c(0.0));
            }
        }
        assert_abs_diff_eq!(m[(3, 0)].re, 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_real_is_self_adjoint() {
        let s = AmbientSpace::unilateral(4);
        let d = LinearOperatorSpec::diagonal_real(&s, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        let x = CoeffVector::from_real(&s, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(apply(&d, &x).unwrap(), adjoint_apply(&d, &x).unwrap());
    }

    #[test]
    fn duality_identity_for_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for op in all_variants() {
            for _ in 0..100 {
                let u = random_vec(op.space(), &mut rng);
                let v = random_vec(op.space(), &mut rng);
                let lhs = inner(&apply(&op, &u).unwrap(), &v).unwrap();
                let rhs = inner(&u, &adjoint_apply(&op, &v).unwrap()).unwrap();
                assert!((lhs - rhs).norm() < 1e-10, "{:?}: {lhs} vs {rhs}", op.kind());
            }
        }
    }

    #[test]
    fn finite_section_reproduces_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in all_variants() {
            let m = finite_section(&op);
            let x = random_vec(op.space(), &mut rng);
            let y = apply(&op, &x).unwrap().iso();
            assert!((m * x.iso() - y).norm() < 1e-12);
        }
    }

    #[test]
    fn finite_section_examples() {
        let s = AmbientSpace::unilateral(3);
        let m = finite_section(&LinearOperatorSpec::right_shift(&s).unwrap());
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).map(c);
        assert_eq!(m, expected);
        let d = finite_section(&LinearOperatorSpec::diagonal_real(&s, &[1.0, 2.0, 3.0]).unwrap());
        assert_eq!(d, DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(2.0), c(3.0)])));
    }

    #[test]
    fn laurent_unit_circle_symbol_is_the_shift() {
        let s = AmbientSpace::bilateral(2);
        let op = LinearOperatorSpec::laurent(&s, LaurentSymbol::from_fn(2, 0, unit_circle_symbol)).unwrap();
        let m = finite_section(&op);
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j + 1 { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - c(expected)).norm() < 1e-12, "({i},{j}) = {}", m[(i, j)]);
            }
        }
    }

    #[test]
    fn norm_examples() {
        for d in [2, 5, 40] {
            let s = AmbientSpace::unilateral(d);
            let r = LinearOperatorSpec::right_shift(&s).unwrap();
            assert_abs_diff_eq!(op_norm_est(&r, 100, 1e-14).unwrap(), 1.0, epsilon = 1e-12);
        }
        let s = AmbientSpace::unilateral(30);
        let r = LinearOperatorSpec::inverse_square_shift(&s).unwrap();
        assert_abs_diff_eq!(op_norm_est(&r, 500, 1e-15).unwrap(), 1.0, epsilon = 1e-10);
        let diff = r.minus(&LinearOperatorSpec::wrapped_shift(&s, 2).unwrap()).unwrap();
        let est = op_norm_est(&diff, 500, 1e-15).unwrap();
        assert_abs_diff_eq!(est, 2f64.sqrt() / 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(op_norm_dense(&diff), 2f64.sqrt() / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for op in all_variants() {
            let dense = op_norm_dense(&op);
            let est = op_norm_est(&op, 20_000, 1e-15).unwrap_or_else(|e| match e {
                Error::NoConvergence { estimate, .. } => estimate,
                other => panic!("{other}"),
            });
            assert!((est - dense).abs() <= 1e-8 * dense.max(1e-300), "{:?}: {est} vs {dense}", op.kind());
        }
        // random dense, D = 120
        let s = AmbientSpace::unilateral(120);
        let m = DMatrix::from_fn(120, 120, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
        let op = LinearOperatorSpec::dense(&s, m).unwrap();
        let est = op_norm_est(&op, 20_000, 1e-15).unwrap();
        assert!((est - op_norm_dense(&op)).abs() <= 1e-8 * est);
    }

    #[test]
    fn zero_iterations_is_rejected() {
        let s = AmbientSpace::unilateral(3);
        assert!(op_norm_est(&LinearOperatorSpec::identity(&s), 0, 1e-6).is_err());
    }

    #[test]
    fn invariants_of_constructors() {
        let seq = AmbientSpace::unilateral(4);
        let grid = AmbientSpace::grid_l2(4);
        assert!(LinearOperatorSpec::volterra(&seq).is_err());
        assert!(LinearOperatorSpec::laurent(&seq, LaurentSymbol::from_fn(1, 0, unit_circle_symbol)).is_err());
        assert!(LinearOperatorSpec::sum(vec![LinearOperatorSpec::identity(&seq), LinearOperatorSpec::identity(&grid)]).is_err());
        assert!(LinearOperatorSpec::wrapped_shift(&seq, 5).is_err());
    }
}
