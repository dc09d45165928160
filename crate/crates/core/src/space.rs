//! Finite-section Hilbert spaces.
//!
//! Every vector lives in an [`AmbientSpace`]: a truncation of `l2(N)`, `l2(Z)`,
//! `L2[0,1]` (midpoint grid) or a direct sum of two such spaces. Coordinates are
//! stored as plain complex numbers; the inner product carries the quadrature
//! weights, so the map `x -> sqrt(w) * x` ("isometric coordinates") turns every
//! space into standard `C^D`. Dense linear algebra is done in those coordinates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerance used when checking that a set of columns is orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    /// `l2(N)` truncated to indices `1..=D`.
    UnilateralSeq,
    /// `l2(Z)` truncated to the window `-K..=K`, `D = 2K + 1`.
    BilateralSeq,
    /// `L2[0,1]` sampled at `N` cell midpoints with weights `h = 1/N`.
    GridL2,
    /// Orthogonal sum of two of the above; coordinates are concatenated.
    DirectSum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmbientSpace {
    kind: SpaceKind,
    quad_weights: Vec<f64>,
    /// Abstract index carried by each coordinate position.
    labels: Vec<i64>,
    /// Coordinate positions listed in test-family enumeration order.
    enumeration: Vec<usize>,
    /// Size of the first summand for `DirectSum`.
    split: Option<usize>,
}

impl AmbientSpace {
    pub fn unilateral(dim: usize) -> Arc<Self> {
        assert!(dim > 0, "dimension must be positive");
        Arc::new(Self {
            kind: SpaceKind::UnilateralSeq,
            quad_weights: vec![1.0; dim],
            labels: (1..=dim as i64).collect(),
            enumeration: (0..dim).collect(),
            split: None,
        })
    }

    /// Window `-half..=half` of `l2(Z)`. Enumeration runs 0, +1, -1, +2, -2, ...
    pub fn bilateral(half: usize) -> Arc<Self> {
        let dim = 2 * half + 1;
        let mut enumeration = Vec::with_capacity(dim);
        enumeration.push(half);
        for k in 1..=half {
            enumeration.push(half + k);
            enumeration.push(half - k);
        }
        Arc::new(Self {
            kind: SpaceKind::BilateralSeq,
            quad_weights: vec![1.0; dim],
            labels: (-(half as i64)..=half as i64).collect(),
            enumeration,
            split: None,
        })
    }

    /// Uniform midpoint grid on `[0,1]` with `n` cells.
    pub fn grid_l2(n: usize) -> Arc<Self> {
        assert!(n > 0, "grid size must be positive");
        let h = 1.0 / n as f64;
        Arc::new(Self {
            kind: SpaceKind::GridL2,
            quad_weights: vec![h; n],
            labels: (0..n as i64).collect(),
            enumeration: (0..n).collect(),
            split: None,
        })
    }

    /// `first ⊕ second`. The two enumerations are interleaved.
    pub fn direct_sum(first: &AmbientSpace, second: &AmbientSpace) -> Arc<Self> {
        let d1 = first.dim();
        let mut quad_weights = first.quad_weights.clone();
        quad_weights.extend_from_slice(&second.quad_weights);
        let mut labels = first.labels.clone();
        labels.extend_from_slice(&second.labels);
        let mut enumeration = Vec::with_capacity(d1 + second.dim());
        let (mut a, mut b) = (first.enumeration.iter(), second.enumeration.iter());
        loop {
            match (a.next(), b.next()) {
                (None, None) => break,
                (x, y) => {
                    if let Some(&p) = x {
                        enumeration.push(p);
                    }
                    if let Some(&p) = y {
                        enumeration.push(d1 + p);
                    }
                }
            }
        }
        Arc::new(Self {
            kind: SpaceKind::DirectSum,
            quad_weights,
            labels,
            enumeration,
            split: Some(d1),
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn split(&self) -> Option<usize> {
        self.split
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn enumeration(&self) -> &[usize] {
        &self.enumeration
    }

    /// Half-width `K` of a bilateral window.
    pub fn half_width(&self) -> Option<usize> {
        (self.kind == SpaceKind::BilateralSeq).then(|| self.dim() / 2)
    }

    /// Coordinate position of an abstract index (`e_1` is index 1 in `l2(N)`,
    /// `e_0` is the centre of a bilateral window, grid cells count from 0).
    pub fn position(&self, index: i64) -> Option<usize> {
        match self.kind {
            SpaceKind::UnilateralSeq => (index >= 1 && index <= self.dim() as i64).then(|| (index - 1) as usize),
            SpaceKind::BilateralSeq => {
                let half = (self.dim() / 2) as i64;
                (index.abs() <= half).then(|| (index + half) as usize)
            }
            SpaceKind::GridL2 => (index >= 0 && index < self.dim() as i64).then_some(index as usize),
            SpaceKind::DirectSum => None,
        }
    }

    /// Cell midpoints of a grid space.
    pub fn grid_points(&self) -> Option<Vec<f64>> {
        (self.kind == SpaceKind::GridL2).then(|| {
            let h = self.quad_weights[0];
            (0..self.dim()).map(|i| (i as f64 + 0.5) * h).collect()
        })
    }

    pub(crate) fn sqrt_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.quad_weights.iter().map(|w| w.sqrt())
    }
}

pub(crate) fn same_space(a: &Arc<AmbientSpace>, b: &Arc<AmbientSpace>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoeffVector {
    space: Arc<AmbientSpace>,
    coords: DVector<C64>,
}

impl CoeffVector {
    pub fn new(space: &Arc<AmbientSpace>, coords: DVector<C64>) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(Error::BadParams(format!(
                "coordinate length {} does not match dimension {}",
                coords.len(),
                space.dim()
            )));
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadParams("non-finite coordinate".into()));
        }
        Ok(Self { space: space.clone(), coords })
    }

    pub fn from_real(space: &Arc<AmbientSpace>, values: &[f64]) -> Result<Self> {
        Self::new(space, DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
    }

    pub fn zeros(space: &Arc<AmbientSpace>) -> Self {
        Self { space: space.clone(), coords: DVector::zeros(space.dim()) }
    }

    /// Canonical basis vector at an abstract index. Panics if the index is outside
    /// the truncation window.
    pub fn basis(space: &Arc<AmbientSpace>, index: i64) -> Self {
        let pos = space
            .position(index)
            .unwrap_or_else(|| panic!("index {index} outside the truncation of {:?}", space.kind()));
        Self::unit_at(space, pos)
    }

    /// Unit coordinate vector at a raw position, normalised in the weighted norm.
    pub fn unit_at(space: &Arc<AmbientSpace>, pos: usize) -> Self {
        let mut coords = DVector::zeros(space.dim());
        coords[pos] = C64::new(1.0 / space.quad_weights[pos].sqrt(), 0.0);
        Self { space: space.clone(), coords }
    }

    /// Samples a function at the midpoints of a grid space.
    pub fn from_fn(space: &Arc<AmbientSpace>, f: impl Fn(f64) -> C64) -> Result<Self> {
        let pts = space
            .grid_points()
            .ok_or_else(|| Error::BadParams("function sampling needs a GridL2 space".into()))?;
        Self::new(space, DVector::from_iterator(pts.len(), pts.into_iter().map(f)))
    }

    pub(crate) fn from_iso(space: &Arc<AmbientSpace>, iso: DVector<C64>) -> Self {
        let coords = DVector::from_iterator(
            iso.len(),
            iso.iter().zip(space.sqrt_weights()).map(|(z, s)| z / s),
        );
        Self { space: space.clone(), coords }
    }

    pub fn space(&self) -> &Arc<AmbientSpace> {
        &self.space
    }

    pub fn coords(&self) -> &DVector<C64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<C64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Coordinates scaled by `sqrt(quad_weight)`, so the weighted inner product
    /// becomes the Euclidean one.
    pub fn iso(&self) -> DVector<C64> {
        DVector::from_iterator(
            self.dim(),
            self.coords.iter().zip(self.space.sqrt_weights()).map(|(z, s)| z * s),
        )
    }

    pub fn norm(&self) -> f64 {
        self.coords
            .iter()
            .zip(&self.space.quad_weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { space: self.space.clone(), coords: &self.coords * c }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_space(&self.space, &other.space)?;
        Ok(Self { space: self.space.clone(), coords: &self.coords + &other.coords })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_space(&self.space, &other.space)?;
        Ok(Self { space: self.space.clone(), coords: &self.coords - &other.coords })
    }

    /// `self + c * other`
    pub fn axpy(&self, c: C64, other: &Self) -> Result<Self> {
        same_space(&self.space, &other.space)?;
        Ok(Self { space: self.space.clone(), coords: &self.coords + &other.coords * c })
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroDatum);
        }
        Ok(self.scale_re(1.0 / n))
    }

    /// Coordinate at an abstract index, `0` outside the window.
    pub fn at(&self, index: i64) -> C64 {
        self.space.position(index).map(|p| self.coords[p]).unwrap_or_default()
    }
}

impl fmt::Display for CoeffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, z) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if z.im == 0.0 {
                write!(f, "{}", z.re)?;
            } else {
                write!(f, "{}{:+}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

/// `<x, y>`, anti-linear in the first slot.
pub fn inner(x: &CoeffVector, y: &CoeffVector) -> Result<C64> {
    same_space(&x.space, &y.space)?;
    Ok(x.coords
        .iter()
        .zip(y.coords.iter())
        .zip(&x.space.quad_weights)
        .map(|((a, b), w)| a.conj() * b * *w)
        .sum())
}

pub fn norm(x: &CoeffVector) -> f64 {
    x.norm()
}

/// Test family and weights of the weak norm `sum_n w_n |<xi_n, x>|`.
///
/// The test family is the canonical basis `e_n` (raw coordinate vectors) taken
/// in the space's enumeration order, with `w_n = 2^-n`. On a grid
/// `<e_n, x> = h x_n`, so `||e_n|| = sqrt(h)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakNormSpec {
    #[serde(skip)]
    space: Arc<AmbientSpace>,
    /// Weight attached to each coordinate position.
    weights: Vec<f64>,
    /// `w_n ||e_n||`, the factor multiplying `|iso_n|`.
    #[serde(skip)]
    coord_weights: Vec<f64>,
    test_family: TestFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFamily {
    CanonicalBasis,
}

impl WeakNormSpec {
    pub fn canonical(space: &Arc<AmbientSpace>) -> Result<Self> {
        // 2^-1074 is the smallest positive double.
        if space.dim() > 1074 {
            return Err(Error::BadParams(format!(
                "weak norm weights 2^-n underflow beyond n = 1074 (dimension {})",
                space.dim()
            )));
        }
        let mut weights = vec![0.0; space.dim()];
        for (n, &pos) in space.enumeration.iter().enumerate() {
            weights[pos] = 0.5f64.powi(n as i32 + 1);
        }
        let coord_weights = weights.iter().zip(space.sqrt_weights()).map(|(w, s)| w * s).collect();
        Ok(Self { space: space.clone(), weights, coord_weights, test_family: TestFamily::CanonicalBasis })
    }

    pub fn space(&self) -> &Arc<AmbientSpace> {
        &self.space
    }

    /// Weights indexed by coordinate position (not by enumeration order).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights acting on isometric coordinates.
    pub(crate) fn coord_weights(&self) -> &[f64] {
        &self.coord_weights
    }

    pub fn test_family(&self) -> TestFamily {
        self.test_family
    }

    /// Weak norm of a vector given in isometric coordinates.
    pub(crate) fn eval_iso(&self, iso: &DVector<C64>) -> f64 {
        iso.iter().zip(&self.coord_weights).map(|(z, w)| w * z.norm()).sum()
    }
}

pub fn weak_norm(x: &CoeffVector, spec: &WeakNormSpec) -> Result<f64> {
    same_space(&x.space, &spec.space)?;
    Ok(spec.eval_iso(&x.iso()))
}

/// Orthonormal spanning set of a subspace of the truncated space.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    space: Arc<AmbientSpace>,
    columns: Vec<CoeffVector>,
    label: String,
}

impl SubspaceBasis {
    pub fn zero(space: &Arc<AmbientSpace>) -> Self {
        Self { space: space.clone(), columns: Vec::new(), label: "{0}".into() }
    }

    pub fn full(space: &Arc<AmbientSpace>) -> Self {
        let columns = (0..space.dim()).map(|p| CoeffVector::unit_at(space, p)).collect();
        Self { space: space.clone(), columns, label: "full".into() }
    }

    /// Takes columns that are already orthonormal; rejects them otherwise.
    pub fn from_orthonormal(space: &Arc<AmbientSpace>, columns: Vec<CoeffVector>, label: impl Into<String>) -> Result<Self> {
        for c in &columns {
            same_space(space, &c.space)?;
        }
        let basis = Self { space: space.clone(), columns, label: label.into() };
        let err = basis.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::BadParams(format!("columns are not orthonormal (error {err:.3e})")));
        }
        Ok(basis)
    }

    /// Orthonormalises a spanning set with two-pass Gram-Schmidt, dropping
    /// vectors whose remainder falls below `drop_tol` relative to their norm.
    pub fn span(space: &Arc<AmbientSpace>, vectors: &[CoeffVector], label: impl Into<String>) -> Result<Self> {
        let mut q: Vec<DVector<C64>> = Vec::new();
        for v in vectors {
            same_space(space, &v.space)?;
            let x = v.iso();
            let scale = x.norm();
            if scale == 0.0 {
                continue;
            }
            let (r, _) = orthogonalize(&q, x);
            let rn = r.norm();
            if rn > 1e-10 * scale {
                q.push(r / C64::new(rn, 0.0));
            }
        }
        let columns = q.into_iter().map(|c| CoeffVector::from_iso(space, c)).collect();
        Ok(Self { space: space.clone(), columns, label: label.into() })
    }

    pub(crate) fn from_iso_columns(space: &Arc<AmbientSpace>, q: &DMatrix<C64>, label: impl Into<String>) -> Self {
        let columns = q.column_iter().map(|c| CoeffVector::from_iso(space, c.into_owned())).collect();
        Self { space: space.clone(), columns, label: label.into() }
    }

    pub fn space(&self) -> &Arc<AmbientSpace> {
        &self.space
    }

    pub fn columns(&self) -> &[CoeffVector] {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// First `p` columns.
    pub fn truncated(&self, p: usize) -> Self {
        Self {
            space: self.space.clone(),
            columns: self.columns[..p.min(self.dim())].to_vec(),
            label: format!("{}[..{}]", self.label, p),
        }
    }

    /// `D x p` matrix of isometric coordinates; its columns are Euclidean-orthonormal.
    pub fn iso_matrix(&self) -> DMatrix<C64> {
        let d = self.space.dim();
        let mut m = DMatrix::zeros(d, self.dim());
        for (j, c) in self.columns.iter().enumerate() {
            m.set_column(j, &c.iso());
        }
        m
    }

    /// Largest entry of `|Q*Q - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let q = self.iso_matrix();
        let g = q.adjoint() * &q;
        let mut err = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        err
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Self {
        let q = orthonormal_complement(&self.iso_matrix());
        Self::from_iso_columns(&self.space, &q, format!("({})^perp", self.label))
    }

    /// The vector `sum_j c_j col_j`.
    pub fn combine(&self, coeffs: &[C64]) -> CoeffVector {
        let mut out = DVector::zeros(self.space.dim());
        for (c, col) in coeffs.iter().zip(&self.columns) {
            out += &col.coords * *c;
        }
        CoeffVector { space: self.space.clone(), coords: out }
    }
}

/// `P_U x`
pub fn project(x: &CoeffVector, u: &SubspaceBasis) -> Result<CoeffVector> {
    same_space(&x.space, &u.space)?;
    let mut out = CoeffVector::zeros(&x.space);
    for col in &u.columns {
        let c = inner(col, x)?;
        out.coords += &col.coords * c;
    }
    Ok(out)
}

/// `||x - P_U x||`
pub fn dist_to_subspace(x: &CoeffVector, u: &SubspaceBasis) -> Result<f64> {
    let p = project(x, u)?;
    Ok(x.sub(&p)?.norm())
}

/// Removes the components of `x` along the orthonormal vectors `q`, twice.
/// Returns the remainder and the accumulated coefficients.
pub(crate) fn orthogonalize(q: &[DVector<C64>], mut x: DVector<C64>) -> (DVector<C64>, Vec<C64>) {
    let mut coeffs = vec![C64::new(0.0, 0.0); q.len()];
    for _ in 0..2 {
        for (j, qj) in q.iter().enumerate() {
            let c = qj.dotc(&x);
            x -= qj * c;
            coeffs[j] += c;
        }
    }
    (x, coeffs)
}

/// Orthonormal basis (Euclidean) of the complement of the column span of `q`,
/// whose columns are assumed orthonormal.
pub(crate) fn orthonormal_complement(q: &DMatrix<C64>) -> DMatrix<C64> {
    let d = q.nrows();
    let target = d - q.ncols().min(d);
    let mut basis: Vec<DVector<C64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    // Candidates sorted so that coordinates least represented in span(q) go first.
    let mut order: Vec<usize> = (0..d).collect();
    let weight: Vec<f64> = (0..d).map(|i| q.row(i).norm_squared()).collect();
    order.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(a.cmp(&b)));
    for i in order {
        if basis.len() - start == target {
            break;
        }
        let mut e = DVector::zeros(d);
        e[i] = C64::new(1.0, 0.0);
        let (r, _) = orthogonalize(&basis, e);
        let rn = r.norm();
        if rn > 1e-8 {
            basis.push(r / C64::new(rn, 0.0));
        }
    }
    let cols: Vec<DVector<C64>> = basis.split_off(start);
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
