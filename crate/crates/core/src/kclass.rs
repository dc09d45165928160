//! K-class certification, polynomial inverses and the perturbation bound.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::operator::{apply, finite_section, smallest_singular_value, spectral_norm, LinearOperatorSpec, OperatorKind};
use crate::space::{same_space, CoeffVector, C64};

/// Circular arc `{ radius * e^{i t} : t in [start, end] }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcPiece {
    pub radius: f64,
    pub start: f64,
    pub end: f64,
}

impl ArcPiece {
    fn dist(&self, z: C64) -> f64 {
        let mut t = z.arg();
        // bring t into [start, start + 2 pi)
        while t < self.start {
            t += 2.0 * PI;
        }
        while t >= self.start + 2.0 * PI {
            t -= 2.0 * PI;
        }
        if t <= self.end {
            (z.norm() - self.radius).abs()
        } else {
            let a = C64::from_polar(self.radius, self.start);
            let b = C64::from_polar(self.radius, self.end);
            (z - a).norm().min((z - b).norm())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnclosureShape {
    /// Real segment `[m, M]`.
    Interval { m: f64, big_m: f64 },
    /// Open disk.
    Disk { center: C64, radius: f64 },
    /// Open tube of the given half-width around a union of arcs.
    ArcTube { arcs: Vec<ArcPiece>, half_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEnclosure {
    pub shape: EnclosureShape,
    pub margin: f64,
}

impl SpectralEnclosure {
    pub fn interval(m: f64, big_m: f64) -> Self {
        Self { shape: EnclosureShape::Interval { m, big_m }, margin: 0.0 }
    }

    pub fn disk(center: C64, radius: f64) -> Self {
        Self { shape: EnclosureShape::Disk { center, radius }, margin: 0.0 }
    }

    pub fn arc_tube(arcs: Vec<ArcPiece>, half_width: f64) -> Self {
        Self { shape: EnclosureShape::ArcTube { arcs, half_width }, margin: 0.0 }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// Membership in the closure, with an absolute slack.
    pub fn contains(&self, z: C64, slack: f64) -> bool {
        match &self.shape {
            EnclosureShape::Interval { m, big_m } => z.im.abs() <= slack && z.re >= m - slack && z.re <= big_m + slack,
            EnclosureShape::Disk { center, radius } => (z - center).norm() <= radius + slack,
            EnclosureShape::ArcTube { arcs, half_width } => arcs.iter().any(|a| a.dist(z) <= half_width + slack),
        }
    }

    /// Distance from 0 to the enclosure.
    pub fn zero_clearance(&self) -> f64 {
        let zero = C64::new(0.0, 0.0);
        match &self.shape {
            EnclosureShape::Interval { m, big_m } => {
                if *m > 0.0 {
                    *m
                } else if *big_m < 0.0 {
                    -big_m
                } else {
                    0.0
                }
            }
            EnclosureShape::Disk { center, radius } => (center.norm() - radius).max(0.0),
            EnclosureShape::ArcTube { arcs, half_width } => {
                arcs.iter().map(|a| a.dist(zero)).fold(f64::INFINITY, f64::min) - half_width
            }
        }
        .max(0.0)
    }

    /// Checks the geometric requirements: bounded, `0` outside the closure by
    /// at least `margin`, connected complement.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let clearance = self.zero_clearance();
        if clearance <= 0.0 || clearance < self.margin {
            return Err(format!("0 is not separated from the enclosure (clearance {clearance:.3e})"));
        }
        match &self.shape {
            EnclosureShape::Interval { m, big_m } if m > big_m => Err("empty interval".into()),
            EnclosureShape::Disk { radius, .. } if *radius <= 0.0 => Err("empty disk".into()),
            EnclosureShape::ArcTube { arcs, half_width } => {
                if arcs.is_empty() || *half_width <= 0.0 {
                    return Err("empty arc tube".into());
                }
                if !self.complement_connected() {
                    return Err("complement of the enclosure is not connected".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Rasterised flood fill from the border of a bounding box.
    fn complement_connected(&self) -> bool {
        let EnclosureShape::ArcTube { arcs, half_width } = &self.shape else {
            return true;
        };
        let rmax = arcs.iter().map(|a| a.radius).fold(0.0, f64::max) + half_width + 0.5;
        let n = 801usize;
        let h = 2.0 * rmax / (n - 1) as f64;
        // Slightly fattened so thin corridors must be wider than one cell.
        let fat = 0.75 * h;
        let at = |i: usize, j: usize| C64::new(-rmax + i as f64 * h, -rmax + j as f64 * h);
        let blocked: Vec<bool> = (0..n * n).map(|k| self.contains(at(k / n, k % n), fat)).collect();
        let mut seen = vec![false; n * n];
        let mut queue = VecDeque::new();
        for k in 0..n {
            for idx in [k, (n - 1) * n + k, k * n, k * n + n - 1] {
                if !blocked[idx] && !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(idx);
                }
            }
        }
        while let Some(idx) = queue.pop_front() {
            let (i, j) = (idx / n, idx % n);
            let mut push = |ii: usize, jj: usize| {
                let k = ii * n + jj;
                if !blocked[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < n {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < n {
                push(i, j + 1);
            }
        }
        (0..n * n).all(|k| blocked[k] || seen[k])
    }

    /// Points on the boundary, used for resolvent sampling.
    fn boundary_samples(&self, count: usize) -> Vec<C64> {
        let count = count.max(4);
        match &self.shape {
            EnclosureShape::Interval { m, big_m } => {
                // stadium at distance m/2 around the segment
                let eta = 0.5 * m;
                let c = C64::new(0.5 * (m + big_m), 0.0);
                let half = 0.5 * (big_m - m);
                (0..count)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / count as f64;
                        c + C64::new((half + eta) * t.cos(), eta * t.sin())
                    })
                    .collect()
            }
            EnclosureShape::Disk { center, radius } => {
                (0..count).map(|k| center + C64::from_polar(*radius, 2.0 * PI * k as f64 / count as f64)).collect()
            }
            EnclosureShape::ArcTube { .. } => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KVerdict {
    Certified,
    Refuted,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub enum Evidence {
    /// Exact spectrum of a normal finite section.
    Eigenvalues(Vec<C64>),
    /// Samples of a Laurent symbol; their closure is the spectrum of the
    /// bi-infinite operator, not of its finite section.
    SymbolSamples(Vec<C64>),
    /// `||A - c|| < r` puts the spectrum inside the open disk.
    NormBound { center: C64, norm: f64, radius: f64 },
    /// `(z, ||(A - z)^-1||)` on the boundary; `None` for failed solves.
    Resolvent(Vec<(C64, Option<f64>)>),
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct KClassCert {
    pub verdict: KVerdict,
    pub evidence: Evidence,
    pub enclosure: SpectralEnclosure,
    pub reason: String,
    /// Normal operator: spectral mapping makes scalar bounds operator bounds.
    pub normal: bool,
}

impl KClassCert {
    pub fn evidence_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.evidence).expect("evidence serialises");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "verdict": self.verdict,
            "enclosure": self.enclosure,
            "evidence_digest": self.evidence_digest(),
            "margins": {
                "required": self.enclosure.margin,
                "zero_clearance": self.enclosure.zero_clearance(),
            },
            "reason": self.reason,
        }))
        .expect("certificate serialises")
    }
}

/// Diagonal entries when the operator is structurally diagonal.
pub(crate) fn as_diagonal(op: &LinearOperatorSpec) -> Option<Vec<C64>> {
    match op.kind() {
        OperatorKind::Diagonal(d) => Some(d.clone()),
        OperatorKind::Scaled(c, inner) => as_diagonal(inner).map(|d| d.into_iter().map(|x| x * c).collect()),
        OperatorKind::Sum(terms) => {
            let mut acc = vec![C64::new(0.0, 0.0); op.dim()];
            for t in terms {
                for (a, b) in acc.iter_mut().zip(as_diagonal(t)?) {
                    *a += b;
                }
            }
            Some(acc)
        }
        _ => None,
    }
}

/// Symbol samples when the operator is a combination of Laurent operators and
/// multiples of the identity.
pub(crate) fn as_symbol(op: &LinearOperatorSpec) -> Option<Vec<C64>> {
    fn walk(op: &LinearOperatorSpec, len: &mut Option<usize>) -> Option<Symbolic> {
        match op.kind() {
            OperatorKind::Laurent(s) => {
                if let Some(l) = len {
                    if *l != s.samples().len() {
                        return None;
                    }
                }
                *len = Some(s.samples().len());
                Some(Symbolic::Samples(s.samples().to_vec()))
            }
            OperatorKind::Diagonal(d) => {
                let c = *d.first()?;
                d.iter().all(|x| *x == c).then_some(Symbolic::Constant(c))
            }
            OperatorKind::Scaled(c, inner) => Some(match walk(inner, len)? {
                Symbolic::Constant(x) => Symbolic::Constant(x * c),
                Symbolic::Samples(s) => Symbolic::Samples(s.into_iter().map(|x| x * c).collect()),
            }),
            OperatorKind::Sum(terms) => {
                let parts: Vec<Symbolic> = terms.iter().map(|t| walk(t, len)).collect::<Option<_>>()?;
                let mut constant = C64::new(0.0, 0.0);
                let mut samples: Option<Vec<C64>> = None;
                for p in parts {
                    match p {
                        Symbolic::Constant(c) => constant += c,
                        Symbolic::Samples(s) => match &mut samples {
                            Some(acc) => acc.iter_mut().zip(s).for_each(|(a, b)| *a += b),
                            None => samples = Some(s),
                        },
                    }
                }
                Some(match samples {
                    Some(s) => Symbolic::Samples(s.into_iter().map(|x| x + constant).collect()),
                    None => Symbolic::Constant(constant),
                })
            }
            _ => None,
        }
    }
    enum Symbolic {
        Constant(C64),
        Samples(Vec<C64>),
    }
    let mut len = None;
    match walk(op, &mut len)? {
        Symbolic::Samples(s) => Some(s),
        Symbolic::Constant(_) => None,
    }
}

fn is_normal(m: &DMatrix<C64>) -> bool {
    let scale = spectral_norm(m).max(1e-300);
    let comm = m * m.adjoint() - m.adjoint() * m;
    spectral_norm(&comm) <= 1e-10 * scale * scale
}

fn eigenvalues(m: &DMatrix<C64>) -> Option<Vec<C64>> {
    let herm = (m - m.adjoint()).norm() <= 1e-13 * m.norm().max(1e-300);
    if herm {
        return Some(m.clone().symmetric_eigen().eigenvalues.iter().map(|&x| C64::new(x, 0.0)).collect());
    }
    m.clone().try_schur(1e-14, 10_000).and_then(|s| s.eigenvalues()).map(|e| e.iter().cloned().collect())
}

/// Is the spectrum of `op` inside the enclosure, which itself avoids 0 and has
/// connected complement?
pub fn check_kclass(op: &LinearOperatorSpec, enclosure: &SpectralEnclosure, n_boundary_samples: usize) -> KClassCert {
    let mk = |verdict, evidence, reason: String, normal| KClassCert { verdict, evidence, enclosure: enclosure.clone(), reason, normal };
    if let Err(why) = enclosure.validate() {
        return mk(KVerdict::Refuted, Evidence::None, format!("no admissible enclosure: {why}"), false);
    }
    let slack = 1e-12;
    let judge = |points: &[C64], what: &str| -> (KVerdict, String) {
        match points.iter().find(|z| !enclosure.contains(**z, slack)) {
            Some(z) => (KVerdict::Refuted, format!("{what} {z} lies outside the enclosure")),
            None => (KVerdict::Certified, format!("all {} {what}s inside the enclosure", points.len())),
        }
    };
    if let Some(d) = as_diagonal(op) {
        let (v, why) = judge(&d, "eigenvalue");
        return mk(v, Evidence::Eigenvalues(d), why, true);
    }
    if let Some(s) = as_symbol(op) {
        let (v, why) = judge(&s, "symbol value");
        let why = format!("{why}; verdict refers to the bi-infinite Laurent operator");
        return mk(v, Evidence::SymbolSamples(s), why, true);
    }
    let m = finite_section(op);
    if is_normal(&m) {
        return match eigenvalues(&m) {
            Some(ev) => {
                let (v, why) = judge(&ev, "eigenvalue");
                mk(v, Evidence::Eigenvalues(ev), why, true)
            }
            None => mk(KVerdict::Unknown, Evidence::None, "eigenvalue iteration failed".into(), true),
        };
    }
    // Non-normal: eigenvalues can refute, a norm bound can certify a disk.
    if let Some(ev) = eigenvalues(&m) {
        if let (KVerdict::Refuted, why) = judge(&ev, "eigenvalue") {
            return mk(KVerdict::Refuted, Evidence::Eigenvalues(ev), why, false);
        }
    }
    if let EnclosureShape::Disk { center, radius } = &enclosure.shape {
        let shifted = &m - DMatrix::identity(m.nrows(), m.ncols()) * *center;
        let norm = spectral_norm(&shifted);
        if norm < *radius {
            return mk(
                KVerdict::Certified,
                Evidence::NormBound { center: *center, norm, radius: *radius },
                format!("||A - c|| = {norm:.6e} < r"),
                false,
            );
        }
    }
    let limit = if enclosure.margin > 0.0 { 1.0 / enclosure.margin } else { 1e12 };
    let samples: Vec<(C64, Option<f64>)> = enclosure
        .boundary_samples(n_boundary_samples)
        .into_iter()
        .map(|z| {
            let shifted = &m - DMatrix::identity(m.nrows(), m.ncols()) * z;
            let smin = smallest_singular_value(&shifted);
            (z, (smin > 1e-14).then(|| 1.0 / smin))
        })
        .collect();
    let bad = samples.iter().find(|(_, r)| r.is_none_or(|r| r > limit));
    match bad {
        Some((z, r)) => {
            let why = format!("resolvent at {z} is {r:?}, above {limit:.3e}");
            mk(KVerdict::Refuted, Evidence::Resolvent(samples), why, false)
        }
        None => mk(
            KVerdict::Unknown,
            Evidence::Resolvent(samples),
            "non-normal operator: boundary resolvent bounded, no certificate".into(),
            false,
        ),
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum PolyBasis {
    /// `p(z) = sum_k c_k T_k((2z - M - m)/(M - m))`
    Chebyshev { m: f64, big_m: f64 },
    /// `p(z) = sum_k c_k (1 - z/center)^k`
    Neumann { center: C64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyInverse {
    pub basis: PolyBasis,
    pub coeffs: Vec<C64>,
    /// `sup |p(z) - 1/z|` over the enclosure.
    pub sup_bound: f64,
    /// When false the bound is scalar only: the operator is not normal.
    pub operator_claim: bool,
}

impl PolyInverse {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        match &self.basis {
            PolyBasis::Chebyshev { m, big_m } => {
                let t = (z * 2.0 - (big_m + m)) / (big_m - m);
                let (mut b1, mut b2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for &c in self.coeffs.iter().skip(1).rev() {
                    let b0 = c + t * b1 * 2.0 - b2;
                    b2 = b1;
                    b1 = b0;
                }
                self.coeffs[0] + t * b1 - b2
            }
            PolyBasis::Neumann { center } => {
                let w = C64::new(1.0, 0.0) - z / center;
                self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * w + c)
            }
        }
    }

    /// `p(A) g` with `degree` applications of `A`.
    pub fn apply(&self, op: &LinearOperatorSpec, g: &CoeffVector) -> Result<CoeffVector> {
        same_space(op.space(), g.space())?;
        match &self.basis {
            PolyBasis::Chebyshev { m, big_m } => {
                let (a, b) = (2.0 / (big_m - m), -(big_m + m) / (big_m - m));
                let t = |x: &CoeffVector| -> Result<CoeffVector> { apply(op, x)?.scale_re(a).axpy(C64::new(b, 0.0), x) };
                let mut b1 = CoeffVector::zeros(g.space());
                let mut b2 = CoeffVector::zeros(g.space());
                for &c in self.coeffs.iter().skip(1).rev() {
                    let b0 = t(&b1)?.scale_re(2.0).sub(&b2)?.axpy(c, g)?;
                    b2 = b1;
                    b1 = b0;
                }
                if self.coeffs.len() == 1 {
                    return Ok(g.scale(self.coeffs[0]));
                }
                t(&b1)?.sub(&b2)?.axpy(self.coeffs[0], g)
            }
            PolyBasis::Neumann { center } => {
                let mut y = g.scale(*self.coeffs.last().expect("non-empty"));
                for &c in self.coeffs.iter().rev().skip(1) {
                    let ay = apply(op, &y)?.scale(C64::new(1.0, 0.0) / center);
                    y = y.sub(&ay)?.axpy(c, g)?;
                }
                Ok(y)
            }
        }
    }
}

/// Chebyshev interpolant of `1/z` on `[m, M]` (degree `d`, `d+1` Chebyshev
/// points) and the aliasing bound on its sup error.
pub fn chebyshev_inverse(m: f64, big_m: f64, degree: usize) -> PolyInverse {
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
    let vals: Vec<f64> = nodes.iter().map(|th| 1.0 / (0.5 * (big_m + m) + 0.5 * (big_m - m) * th.cos())).collect();
    let coeffs: Vec<C64> = (0..n)
        .map(|k| {
            let s: f64 = nodes.iter().zip(&vals).map(|(th, v)| v * (k as f64 * th).cos()).sum();
            let c = 2.0 * s / n as f64;
            C64::new(if k == 0 { 0.5 * c } else { c }, 0.0)
        })
        .collect();
    let a = (big_m + m) / (big_m - m);
    let rho = a + (a * a - 1.0).sqrt();
    let tail = 2.0 * (2.0 / (big_m - m)) * (2.0 / (a * a - 1.0).sqrt()) * rho.powi(-(n as i32)) / (1.0 - 1.0 / rho);
    // plus a rounding allowance for the Clenshaw recurrence
    let sup_bound = tail + 4.0 * n as f64 * f64::EPSILON / m;
    PolyInverse { basis: PolyBasis::Chebyshev { m, big_m }, coeffs, sup_bound, operator_claim: true }
}

/// Truncated Neumann series of `1/z` around `center`, valid on `|z - c| <= r`.
pub fn neumann_inverse(center: C64, radius: f64, degree: usize) -> PolyInverse {
    let c_inv = C64::new(1.0, 0.0) / center;
    let q = radius / center.norm();
    let sup_bound = q.powi(degree as i32 + 1) / (center.norm() * (1.0 - q));
    PolyInverse { basis: PolyBasis::Neumann { center }, coeffs: vec![c_inv; degree + 1], sup_bound, operator_claim: true }
}

pub fn poly_inverse_approx(op: &LinearOperatorSpec, enclosure: &SpectralEnclosure, degree: usize) -> Result<PolyInverse> {
    let cert = check_kclass(op, enclosure, 64);
    if cert.verdict != KVerdict::Certified {
        return Err(Error::NotCertified(cert.reason));
    }
    let mut p = match &enclosure.shape {
        EnclosureShape::Interval { m, big_m } if big_m > m => chebyshev_inverse(*m, *big_m, degree),
        EnclosureShape::Interval { m, .. } => PolyInverse {
            basis: PolyBasis::Neumann { center: C64::new(*m, 0.0) },
            coeffs: vec![C64::new(1.0 / m, 0.0)],
            sup_bound: 0.0,
            operator_claim: true,
        },
        EnclosureShape::Disk { center, radius } => neumann_inverse(*center, *radius, degree),
        EnclosureShape::ArcTube { .. } => {
            return Err(Error::NotCertified("polynomial inverses are built only for Interval and Disk enclosures".into()))
        }
    };
    p.operator_claim = cert.normal;
    Ok(p)
}

/// `p(A) g`, an element of `K_{degree+1}(A, g)` approximating `A^-1 g`.
pub fn krylov_via_polynomial(op: &LinearOperatorSpec, g: &CoeffVector, enclosure: &SpectralEnclosure, degree: usize) -> Result<CoeffVector> {
    poly_inverse_approx(op, enclosure, degree)?.apply(op, g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundVerdict {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub verdict: BoundVerdict,
    pub inv_norm: f64,
    pub diff_norm: f64,
    /// `||f - f'||`
    pub lhs: Option<f64>,
    /// `2 ||g|| ||A^-1||^2 ||A - A'||`
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
}

fn dense_solve(m: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    m.clone().lu().solve(b).ok_or(Error::SingularSolve)
}

pub fn perturbation_bound_check(a: &LinearOperatorSpec, a_prime: &LinearOperatorSpec, g: &CoeffVector) -> Result<PerturbationReport> {
    same_space(a.space(), a_prime.space())?;
    same_space(a.space(), g.space())?;
    let m = finite_section(a);
    let mp = finite_section(a_prime);
    let smin = smallest_singular_value(&m);
    if smin <= 1e-14 * spectral_norm(&m).max(1e-300) {
        return Err(Error::SingularSolve);
    }
    let inv_norm = 1.0 / smin;
    let diff_norm = spectral_norm(&(&mp - &m));
    if diff_norm > 0.5 / inv_norm {
        return Ok(PerturbationReport { verdict: BoundVerdict::NotApplicable, inv_norm, diff_norm, lhs: None, rhs: None, ratio: None });
    }
    let gi = g.iso();
    let f = dense_solve(&m, &gi)?;
    let fp = dense_solve(&mp, &gi)?;
    let lhs = (f - fp).norm();
    let rhs = 2.0 * g.norm() * inv_norm * inv_norm * diff_norm;
    let verdict = if lhs <= rhs + 1e-10 { BoundVerdict::Holds } else { BoundVerdict::Violated };
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(PerturbationReport { verdict, inv_norm, diff_norm, lhs: Some(lhs), rhs: Some(rhs), ratio: Some(ratio) })
}
