//! Weak gap distances between subsets of the unit ball.
//!
//! The inner problem `inf_{v in B_V} ||x - v||_w` over a subspace ball is a
//! convex weighted-l1 problem in the coefficients `c`, `||c|| <= 1`. It is
//! solved by iteratively reweighted least squares (each step a small
//! trust-region problem) and bracketed from below by a feasible point of the
//! dual `max_{|z_n| <= w_n} Re<z, x> - ||V^* z||`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::space::{same_space, AmbientSpace, CoeffVector, SubspaceBasis, TestFamily, WeakNormSpec, C64};

/// Coordinates with weak weight below this are dropped from the inner problem;
/// the objective changes by less than `2 * sum` of the dropped weights.
const ROW_CUTOFF: f64 = 1e-20;

#[derive(Clone, Debug)]
pub struct BallSet {
    space: Arc<AmbientSpace>,
    kind: BallKind,
}

#[derive(Clone, Debug)]
pub enum BallKind {
    /// `B_U = {U c : ||c|| <= 1}`
    SubspaceBall(SubspaceBasis),
    FiniteSet(Vec<CoeffVector>),
    Singleton(CoeffVector),
}

impl BallSet {
    pub fn subspace(u: SubspaceBasis) -> Self {
        Self { space: u.space().clone(), kind: BallKind::SubspaceBall(u) }
    }

    pub fn finite(space: &Arc<AmbientSpace>, members: Vec<CoeffVector>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::BadParams("finite ball set must be non-empty".into()));
        }
        for m in &members {
            same_space(space, m.space())?;
            check_in_ball(m)?;
        }
        Ok(Self { space: space.clone(), kind: BallKind::FiniteSet(members) })
    }

    pub fn singleton(x: CoeffVector) -> Result<Self> {
        check_in_ball(&x)?;
        Ok(Self { space: x.space().clone(), kind: BallKind::Singleton(x) })
    }

    pub fn space(&self) -> &Arc<AmbientSpace> {
        &self.space
    }

    pub fn kind(&self) -> &BallKind {
        &self.kind
    }

    /// Dimension of the coefficient ball; 0 for finite sets.
    pub fn intrinsic_dim(&self) -> usize {
        match &self.kind {
            BallKind::SubspaceBall(u) => u.dim(),
            _ => 0,
        }
    }

    /// Invariant under multiplication by unimodular scalars.
    fn balanced(&self) -> bool {
        match &self.kind {
            BallKind::SubspaceBall(_) => true,
            BallKind::Singleton(x) => x.norm() == 0.0,
            BallKind::FiniteSet(_) => false,
        }
    }

    fn members(&self) -> Option<Vec<DVector<C64>>> {
        match &self.kind {
            BallKind::SubspaceBall(_) => None,
            BallKind::FiniteSet(m) => Some(m.iter().map(|v| v.iso()).collect()),
            BallKind::Singleton(x) => Some(vec![x.iso()]),
        }
    }
}

fn check_in_ball(x: &CoeffVector) -> Result<()> {
    if x.norm() > 1.0 + 1e-12 {
        return Err(Error::BadParams(format!("vector of norm {} is outside the unit ball", x.norm())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakGapConfig {
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub outer_starts: usize,
    /// Angular (and radial) step of the exhaustive sphere grid.
    pub outer_grid: f64,
    pub seed: u64,
    /// Number of projected `xi_n` directions used as deterministic starts.
    pub xi_starts: usize,
    pub ascent_iters: usize,
    /// Largest intrinsic dimension handled by the exhaustive grid.
    pub exhaustive_max_dim: usize,
}

impl Default for WeakGapConfig {
    fn default() -> Self {
        Self {
            inner_iters: 300,
            inner_tol: 1e-9,
            outer_starts: 64,
            outer_grid: 0.05,
            seed: 0,
            xi_starts: 32,
            ascent_iters: 30,
            exhaustive_max_dim: 2,
        }
    }
}

impl WeakGapConfig {
    pub fn digest(&self, spec: &WeakNormSpec) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serialises"));
        h.update(format!("{:?}/{}", spec.test_family(), spec.weights().len()).as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapMethod {
    ClosedForm,
    Heuristic,
    Oracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub value: f64,
    pub method: GapMethod,
    #[serde(rename = "bounds")]
    pub certified_bounds: Option<(f64, f64)>,
    pub config_digest: String,
}

impl GapReport {
    pub fn lower(&self) -> Option<f64> {
        self.certified_bounds.map(|b| b.0)
    }
}

/// Inner problem data restricted to the rows that carry weight.
struct InnerProblem {
    rows: Vec<usize>,
    w: Vec<f64>,
    /// `rows x p`
    v: DMatrix<C64>,
    /// Full `D x p` basis, for exact evaluation.
    v_full: DMatrix<C64>,
}

struct InnerSolution {
    value: f64,
    lower: f64,
    c: DVector<C64>,
    /// Dual point in full isometric coordinates.
    z: DVector<C64>,
}

impl InnerProblem {
    fn new(u: &SubspaceBasis, spec: &WeakNormSpec) -> Self {
        let weights = spec.coord_weights();
        let rows: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= ROW_CUTOFF).collect();
        let v_full = u.iso_matrix();
        let v = DMatrix::from_fn(rows.len(), v_full.ncols(), |i, j| v_full[(rows[i], j)]);
        let w = rows.iter().map(|&i| weights[i]).collect();
        Self { rows, w, v, v_full }
    }

    fn p(&self) -> usize {
        self.v.ncols()
    }

    fn objective(&self, x: &DVector<C64>, c: &DVector<C64>) -> f64 {
        let r = x - &self.v * c;
        r.iter().zip(&self.w).map(|(z, w)| w * z.norm()).sum()
    }

    fn solve(&self, x_full: &DVector<C64>, spec: &WeakNormSpec, cfg: &WeakGapConfig, warm: Option<&DVector<C64>>) -> InnerSolution {
        let x = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|&i| x_full[i]));
        let p = self.p();
        let d = x_full.len();
        if p == 0 {
            let value = spec.eval_iso(x_full);
            let mut z = DVector::zeros(d);
            for (k, &i) in self.rows.iter().enumerate() {
                z[i] = phase(x[k]) * self.w[k];
            }
            return InnerSolution { value, lower: value, c: DVector::zeros(0), z };
        }

        let mut candidates = vec![DVector::zeros(p), clip(self.v.adjoint() * &x)];
        if let Some(c) = warm {
            candidates.push(clip(c.clone()));
        }
        let (mut best_c, mut best) = candidates
            .into_iter()
            .map(|c| {
                let f = self.objective(&x, &c);
                (c, f)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let mut c = best_c.clone();
        let xmax = x.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut eps = 0.1 * xmax;
        let mut lower = f64::NEG_INFINITY;
        let mut z_best = DVector::zeros(x.len());
        for it in 0..cfg.inner_iters {
            let r = &x - &self.v * &c;
            let omega: Vec<f64> = r.iter().zip(&self.w).map(|(ri, w)| w / ri.norm().max(eps)).collect();
            let mut vw = self.v.clone();
            for (i, o) in omega.iter().enumerate() {
                vw.row_mut(i).scale_mut(o.sqrt());
            }
            let xw = DVector::from_iterator(x.len(), x.iter().zip(&omega).map(|(xi, o)| xi * o.sqrt()));
            let h = vw.adjoint() * &vw;
            let b = vw.adjoint() * xw;
            c = trust_region(&h, &b);
            let f = self.objective(&x, &c);
            if f < best {
                best = f;
                best_c = c.clone();
            }
            eps = (eps * 0.5).max(1e-15 * xmax);
            if (it + 1) % 25 == 0 || it + 1 == cfg.inner_iters {
                let (l, z) = self.dual_bound(&x, &best_c);
                if l > lower {
                    lower = l;
                    z_best = z;
                }
                if best - lower <= cfg.inner_tol {
                    break;
                }
            }
        }
        if lower == f64::NEG_INFINITY {
            let (l, z) = self.dual_bound(&x, &best_c);
            lower = l;
            z_best = z;
        }
        let mut z = DVector::zeros(d);
        for (k, &i) in self.rows.iter().enumerate() {
            z[i] = z_best[k];
        }
        let residual = x_full - &self.v_full * &best_c;
        let value = spec.eval_iso(&residual);
        InnerSolution { value, lower: lower.min(value).max(0.0), c: best_c, z }
    }

    /// Feasible dual point built from the primal residual, improved by
    /// projected supergradient steps. Returns `(L(z), z)`.
    fn dual_bound(&self, x: &DVector<C64>, c: &DVector<C64>) -> (f64, DVector<C64>) {
        let n = x.len();
        let r = x - &self.v * c;
        let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let tau = 1e-9 * scale;
        let active: Vec<bool> = r.iter().map(|ri| ri.norm() > tau).collect();
        let mut z = DVector::from_fn(n, |i, _| if active[i] { phase(r[i]) * self.w[i] } else { C64::new(0.0, 0.0) });
        let eval = |z: &DVector<C64>| -> f64 { z.dotc(x).re - (self.v.adjoint() * z).norm() };
        let mut best = eval(&z);
        let mut best_z = z.clone();

        // Free coordinates first: push V^* z towards the direction of c.
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let passes: [Option<&[usize]>; 2] = [Some(&free), None];
        for subset in passes {
            if matches!(subset, Some(s) if s.is_empty()) {
                continue;
            }
            for k in 0..150 {
                let s = self.v.adjoint() * &z;
                let sn = s.norm();
                let g = if sn > 0.0 { x - &self.v * (s / C64::new(sn, 0.0)) } else { x.clone() };
                let t = 0.5 / ((k + 1) as f64).sqrt();
                let mut step = |i: usize| {
                    let zi = z[i] + g[i] * (t * self.w[i]);
                    let m = zi.norm();
                    z[i] = if m > self.w[i] { zi * (self.w[i] / m) } else { zi };
                };
                match subset {
                    Some(s) => s.iter().for_each(|&i| step(i)),
                    None => (0..n).for_each(step),
                }
                let l = eval(&z);
                if l > best {
                    best = l;
                    best_z = z.clone();
                }
            }
            z = best_z.clone();
        }
        (best, best_z)
    }
}

fn phase(z: C64) -> C64 {
    let m = z.norm();
    if m == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z / m
    }
}

fn clip(c: DVector<C64>) -> DVector<C64> {
    let n = c.norm();
    if n > 1.0 {
        c / C64::new(n, 0.0)
    } else {
        c
    }
}

/// `argmin c^* H c - 2 Re(b^* c)` over `||c|| <= 1`, `H` Hermitian PSD.
fn trust_region(h: &DMatrix<C64>, b: &DVector<C64>) -> DVector<C64> {
    let eig = h.clone().symmetric_eigen();
    let lam = eig.eigenvalues;
    let e = eig.eigenvectors;
    let bp = e.adjoint() * b;
    let lmax = lam.iter().cloned().fold(0.0, f64::max);
    let thr = 1e-13 * lmax.max(1e-300);
    let y = DVector::from_fn(bp.len(), |i, _| if lam[i] > thr { bp[i] / lam[i] } else { C64::new(0.0, 0.0) });
    if y.norm() <= 1.0 {
        return &e * y;
    }
    let psi = |mu: f64| -> f64 { bp.iter().zip(lam.iter()).map(|(bi, l)| bi.norm_sqr() / (l.max(0.0) + mu).powi(2)).sum() };
    let (mut lo, mut hi) = (0.0, bp.norm().max(1e-300));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = DVector::from_fn(bp.len(), |i, _| bp[i] / (lam[i].max(0.0) + hi));
    clip(&e * y)
}

/// `inf_{v in V} ||x - v||_w`
pub fn weak_dist_point_to_ball(x: &CoeffVector, v: &BallSet, spec: &WeakNormSpec, cfg: &WeakGapConfig) -> Result<GapReport> {
    same_space(x.space(), v.space())?;
    same_space(x.space(), spec.space())?;
    check_in_ball(x)?;
    let digest = cfg.digest(spec);
    let xi = x.iso();
    Ok(match &v.kind {
        BallKind::SubspaceBall(u) => {
            let sol = InnerProblem::new(u, spec).solve(&xi, spec, cfg, None);
            GapReport {
                value: sol.value,
                method: GapMethod::Heuristic,
                certified_bounds: Some((sol.lower, sol.value)),
                config_digest: digest,
            }
        }
        _ => {
            let value = finite_min(&xi, &v.members().expect("finite"), spec).0;
            GapReport { value, method: GapMethod::ClosedForm, certified_bounds: Some((value, value)), config_digest: digest }
        }
    })
}

fn finite_min(x: &DVector<C64>, members: &[DVector<C64>], spec: &WeakNormSpec) -> (f64, usize) {
    members
        .iter()
        .enumerate()
        .map(|(k, m)| (spec.eval_iso(&(x - m)), k))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("non-empty set")
}

/// Evaluator of `h(u) = inf_{v in V} ||u - v||_w` with a supergradient-type
/// direction `z` (`h(u') >= h(u) + Re<z, u' - u>` when `V` is convex).
struct InnerOracle<'a> {
    spec: &'a WeakNormSpec,
    cfg: &'a WeakGapConfig,
    problem: Option<InnerProblem>,
    members: Option<Vec<DVector<C64>>>,
}

struct Eval {
    value: f64,
    lower: f64,
    z: DVector<C64>,
    c: Option<DVector<C64>>,
}

impl<'a> InnerOracle<'a> {
    fn new(v: &BallSet, spec: &'a WeakNormSpec, cfg: &'a WeakGapConfig) -> Self {
        match &v.kind {
            BallKind::SubspaceBall(b) => Self { spec, cfg, problem: Some(InnerProblem::new(b, spec)), members: None },
            _ => Self { spec, cfg, problem: None, members: v.members() },
        }
    }

    fn eval(&self, u: &DVector<C64>, warm: Option<&DVector<C64>>) -> Eval {
        if let Some(pr) = &self.problem {
            let s = pr.solve(u, self.spec, self.cfg, warm);
            return Eval { value: s.value, lower: s.lower, z: s.z, c: Some(s.c) };
        }
        let members = self.members.as_ref().expect("finite set");
        let (value, k) = finite_min(u, members, self.spec);
        let w = self.spec.coord_weights();
        let z = DVector::from_fn(u.len(), |i, _| phase(u[i] - members[k][i]) * w[i]);
        Eval { value, lower: value, z, c: None }
    }
}

fn grid(lo: f64, hi: f64, step: f64, include_end: bool) -> Vec<f64> {
    let n = (((hi - lo) / step).ceil() as usize).max(1);
    let h = (hi - lo) / n as f64;
    let top = if include_end { n + 1 } else { n };
    (0..top).map(|k| lo + k as f64 * h).collect()
}

/// Coefficient vectors covering the unit sphere (or ball when `radial`) of
/// `C^p`, `p <= 2`, at angular step `step`. Returns the points and the
/// covering radius.
fn sphere_grid(p: usize, step: f64, drop_global_phase: bool, radial: bool) -> (Vec<DVector<C64>>, f64) {
    let phases = if drop_global_phase { vec![0.0] } else { grid(0.0, 2.0 * PI, step, false) };
    let radii = if radial { grid(0.0, 1.0, step, true) } else { vec![1.0] };
    let mut axes = if drop_global_phase { 0 } else { 1 } + usize::from(radial);
    let mut pts = Vec::new();
    match p {
        0 => pts.push(DVector::zeros(0)),
        1 => {
            for &r in &radii {
                for &a in &phases {
                    pts.push(DVector::from_element(1, C64::from_polar(r, a)));
                }
            }
        }
        2 => {
            axes += 2;
            let ts = grid(0.0, PI / 2.0, step, true);
            let betas = grid(0.0, 2.0 * PI, step, false);
            for &r in &radii {
                for &a in &phases {
                    for &t in &ts {
                        for &b in &betas {
                            pts.push(DVector::from_vec(vec![C64::from_polar(r * t.cos(), a), C64::from_polar(r * t.sin(), a + b)]));
                        }
                    }
                }
            }
        }
        _ => unreachable!("sphere grids only for p <= 2"),
    }
    (pts, 0.5 * step * (axes as f64).sqrt())
}

/// `sup_{u in U} inf_{v in V} ||u - v||_w`
pub fn d_w(u: &BallSet, v: &BallSet, spec: &WeakNormSpec, cfg: &WeakGapConfig) -> Result<GapReport> {
    same_space(u.space(), v.space())?;
    same_space(u.space(), spec.space())?;
    let digest = cfg.digest(spec);
    let oracle = InnerOracle::new(v, spec, cfg);

    if let Some(members) = u.members() {
        let evals: Vec<Eval> = members.iter().map(|m| oracle.eval(m, None)).collect();
        let (value, lower) = evals.iter().fold((0.0f64, 0.0f64), |acc, e| (acc.0.max(e.value), acc.1.max(e.lower)));
        let method = if oracle.problem.is_some() { GapMethod::Heuristic } else { GapMethod::ClosedForm };
        return Ok(GapReport { value, method, certified_bounds: Some((lower, value)), config_digest: digest });
    }
    let BallKind::SubspaceBall(ub) = &u.kind else { unreachable!() };
    let q = ub.iso_matrix();
    let p = ub.dim();
    if p == 0 {
        let e = oracle.eval(&DVector::zeros(spec.weights().len()), None);
        return Ok(GapReport {
            value: e.value,
            method: GapMethod::Heuristic,
            certified_bounds: Some((e.lower, e.value)),
            config_digest: digest,
        });
    }
    // h is convex when V is convex, so its sup over B_U sits on the sphere.
    let radial = matches!(&v.kind, BallKind::FiniteSet(m) if m.len() > 1);

    if p <= cfg.exhaustive_max_dim {
        let (pts, radius) = sphere_grid(p, cfg.outer_grid, v.balanced(), radial);
        let evals: Vec<(f64, f64)> = pts
            .par_iter()
            .map(|s| {
                let e = oracle.eval(&(&q * s), None);
                (e.value, e.lower)
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for (k, &(val, lo)) in evals.iter().enumerate() {
            if val > best.0 {
                best = (val, k);
            }
            lower = lower.max(lo);
            upper = upper.max(val);
        }
        // Sharpen from the best grid point.
        let (refined, refined_lower) = ascend(&oracle, &q, pts[best.1].clone(), cfg.ascent_iters);
        let value = best.0.max(refined);
        lower = lower.max(refined_lower);
        let upper = (upper + radius).max(value);
        return Ok(GapReport {
            value,
            method: GapMethod::Oracle,
            certified_bounds: Some((lower.min(value), upper)),
            config_digest: digest,
        });
    }

    let starts = ascent_starts(&q, spec, cfg);
    let results: Vec<(f64, f64)> = starts.into_par_iter().map(|s| ascend(&oracle, &q, s, cfg.ascent_iters)).collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, r) in results.iter().enumerate() {
        if r.0 > best.0 {
            best = (r.0, k);
        }
    }
    Ok(GapReport { value: best.0.max(0.0), method: GapMethod::Heuristic, certified_bounds: None, config_digest: digest })
}

/// Projected `xi_n` directions followed by seeded random directions.
fn ascent_starts(q: &DMatrix<C64>, spec: &WeakNormSpec, cfg: &WeakGapConfig) -> Vec<DVector<C64>> {
    let p = q.ncols();
    let mut starts = Vec::new();
    for &pos in spec.space().enumeration().iter().take(cfg.xi_starts) {
        let s: DVector<C64> = q.row(pos).adjoint();
        let n = s.norm();
        if n > 1e-12 {
            starts.push(s / C64::new(n, 0.0));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.outer_starts {
        let s = DVector::from_fn(p, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let n = s.norm();
        if n > 0.0 {
            starts.push(s / C64::new(n, 0.0));
        }
    }
    if starts.is_empty() {
        let mut s = DVector::zeros(p);
        s[0] = C64::new(1.0, 0.0);
        starts.push(s);
    }
    starts
}

/// Linearised ascent on the sphere of `U`: `s <- Q^* z / ||Q^* z||`. Returns
/// the best value and the best dual lower bound seen.
fn ascend(oracle: &InnerOracle, q: &DMatrix<C64>, start: DVector<C64>, iters: usize) -> (f64, f64) {
    let mut s = start;
    let mut e = oracle.eval(&(q * &s), None);
    let mut lower = e.lower;
    for _ in 0..iters {
        let t: DVector<C64> = q.adjoint() * &e.z;
        let tn = t.norm();
        if tn < 1e-15 {
            break;
        }
        let next = t / C64::new(tn, 0.0);
        let ne = oracle.eval(&(q * &next), e.c.as_ref());
        lower = lower.max(ne.lower);
        if ne.value <= e.value + 1e-12 {
            break;
        }
        s = next;
        e = ne;
    }
    let _ = s;
    (e.value, lower)
}

pub fn dhat_w(u: &BallSet, v: &BallSet, spec: &WeakNormSpec, cfg: &WeakGapConfig) -> Result<GapReport> {
    let a = d_w(u, v, spec, cfg)?;
    let b = d_w(v, u, spec, cfg)?;
    let method = match (a.method, b.method) {
        (GapMethod::Heuristic, _) | (_, GapMethod::Heuristic) => GapMethod::Heuristic,
        (GapMethod::Oracle, _) | (_, GapMethod::Oracle) => GapMethod::Oracle,
        _ => GapMethod::ClosedForm,
    };
    let bounds = match (a.certified_bounds, b.certified_bounds) {
        (Some(x), Some(y)) => Some((x.0.max(y.0), x.1.max(y.1))),
        _ => None,
    };
    Ok(GapReport { value: a.value.max(b.value), method, certified_bounds: bounds, config_digest: a.config_digest })
}

/// Conservative membership in the weak `eps`-expansion of `U`.
pub fn eps_expansion_member(x: &CoeffVector, u: &BallSet, eps: f64, spec: &WeakNormSpec, cfg: &WeakGapConfig) -> Result<bool> {
    let r = weak_dist_point_to_ball(x, u, spec, cfg)?;
    Ok(r.value < eps - cfg.inner_tol)
}

/// Exhaustive grid evaluation of `d_w` for intrinsic dimensions at most 2.
/// The inner infimum runs over a grid of the whole coefficient ball; the outer
/// supremum over the sphere (the ball when `V` is a finite set with several
/// members). Global phases are skipped when `V` is balanced.
pub fn brute_force_d_w(u: &BallSet, v: &BallSet, spec: &WeakNormSpec, grid_step: f64) -> Result<f64> {
    same_space(u.space(), v.space())?;
    same_space(u.space(), spec.space())?;
    let dim = u.intrinsic_dim().max(v.intrinsic_dim());
    if dim > 2 {
        return Err(Error::DimTooLarge(dim));
    }
    if !(grid_step > 0.0) {
        return Err(Error::BadParams("grid step must be positive".into()));
    }
    let weights = spec.coord_weights();
    let rows: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= ROW_CUTOFF).collect();
    let restrict = |x: &DVector<C64>| -> Vec<C64> { rows.iter().map(|&i| x[i]).collect() };
    let w: Vec<f64> = rows.iter().map(|&i| weights[i]).collect();

    let inner_points: Vec<Vec<C64>> = match &v.kind {
        BallKind::SubspaceBall(b) => {
            let qv = b.iso_matrix();
            let (pts, _) = sphere_grid(b.dim(), grid_step, false, true);
            pts.iter().map(|c| restrict(&(&qv * c))).collect()
        }
        _ => v.members().expect("finite").iter().map(&restrict).collect(),
    };
    let outer_points: Vec<Vec<C64>> = match &u.kind {
        BallKind::SubspaceBall(b) => {
            let qu = b.iso_matrix();
            let radial = matches!(&v.kind, BallKind::FiniteSet(m) if m.len() > 1);
            let (pts, _) = sphere_grid(b.dim(), grid_step, v.balanced(), radial && b.dim() > 0);
            pts.iter().map(|c| restrict(&(&qu * c))).collect()
        }
        _ => u.members().expect("finite").iter().map(&restrict).collect(),
    };
    let value = outer_points
        .par_iter()
        .map(|x| {
            inner_points
                .iter()
                .map(|y| x.iter().zip(y).zip(&w).map(|((a, b), w)| w * (a - b).norm()).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(value)
}

/// Family used for the weak norm in reports.
pub fn test_family_name(spec: &WeakNormSpec) -> &'static str {
    match spec.test_family() {
        TestFamily::CanonicalBasis => "canonical-basis",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn setup(d: usize) -> (Arc<AmbientSpace>, WeakNormSpec) {
        let s = AmbientSpace::unilateral(d);
        let spec = WeakNormSpec::canonical(&s).unwrap();
        (s, spec)
    }

    fn span(s: &Arc<AmbientSpace>, vs: &[&[f64]]) -> SubspaceBasis {
        let v: Vec<CoeffVector> = vs.iter().map(|v| CoeffVector::from_real(s, v).unwrap()).collect();
        SubspaceBasis::span(s, &v, "test").unwrap()
    }

    #[test]
    fn trust_region_interior_and_boundary() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(4.0, 0.0)]));
        let b = DVector::from_vec(vec![C64::new(0.2, 0.0), C64::new(0.4, 0.0)]);
        let c = trust_region(&h, &b);
        assert!((c[0].re - 0.1).abs() < 1e-14 && (c[1].re - 0.1).abs() < 1e-14);
        let b = DVector::from_vec(vec![C64::new(20.0, 0.0), C64::new(0.0, 0.0)]);
        let c = trust_region(&h, &b);
        assert!((c.norm() - 1.0).abs() < 1e-12 && (c[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_distance_examples() {
        let (s, spec) = setup(6);
        let cfg = WeakGapConfig::default();
        let e1 = CoeffVector::basis(&s, 1);
        let member = span(&s, &[&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]]);
        let x = member.columns()[0].scale_re(0.7);
        let r = weak_dist_point_to_ball(&x, &BallSet::subspace(member), &spec, &cfg).unwrap();
        assert!(r.value < 1e-8, "{r:?}");

        let perp = SubspaceBasis::span(&s, &(2..=6).map(|k| CoeffVector::basis(&s, k)).collect::<Vec<_>>(), "perp").unwrap();
        let r = weak_dist_point_to_ball(&e1, &BallSet::subspace(perp), &spec, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-9);
        let (lo, hi) = r.certified_bounds.unwrap();
        assert!(lo <= r.value && r.value <= hi && hi - lo < 1e-6, "{lo} {hi}");

        let zero = BallSet::singleton(CoeffVector::zeros(&s)).unwrap();
        let r = weak_dist_point_to_ball(&e1, &zero, &spec, &cfg).unwrap();
        assert_eq!(r.value, 0.5);
        assert_eq!(r.method, GapMethod::ClosedForm);
    }

    #[test]
    fn lemma_segment_distances() {
        let (s, spec) = setup(14);
        let cfg = WeakGapConfig::default();
        let e1 = CoeffVector::basis(&s, 1);
        for n in 3..=12 {
            let mut v = vec![0.0; 14];
            v[0] = 1.0;
            v[n - 1] = 1.0;
            let u = BallSet::subspace(span(&s, &[&v]));
            let r = weak_dist_point_to_ball(&e1, &u, &spec, &cfg).unwrap();
            let expected = 0.5 * (1.0 - FRAC_1_SQRT_2) + 0.5f64.powi(n as i32) * FRAC_1_SQRT_2;
            assert_abs_diff_eq!(r.value, expected, epsilon = 1e-9);
            let half = weak_dist_point_to_ball(&e1.scale_re(0.5), &u, &spec, &cfg).unwrap();
            assert_abs_diff_eq!(half.value, 0.5f64.powi(n as i32 + 1), epsilon = 1e-8);
        }
    }

    #[test]
    fn d_w_examples() {
        let (s, spec) = setup(8);
        let cfg = WeakGapConfig::default();
        let u = BallSet::subspace(span(&s, &[&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]]));
        assert!(d_w(&u, &u, &spec, &cfg).unwrap().value < 1e-8);
        let zero = BallSet::singleton(CoeffVector::zeros(&s)).unwrap();
        for n in 1..=8 {
            let en = BallSet::subspace(SubspaceBasis::span(&s, &[CoeffVector::basis(&s, n)], "e").unwrap());
            let r = d_w(&en, &zero, &spec, &cfg).unwrap();
            assert_abs_diff_eq!(r.value, 0.5f64.powi(n as i32), epsilon = 1e-15);
        }
        let full = BallSet::subspace(SubspaceBasis::full(&s));
        let perp = BallSet::subspace(SubspaceBasis::span(&s, &[CoeffVector::basis(&s, 1)], "e1").unwrap().complement());
        let r = d_w(&full, &perp, &spec, &cfg).unwrap();
        assert!(r.value >= 0.5 - 1e-6, "{r:?}");
        assert_eq!(r.method, GapMethod::Heuristic);
    }

    #[test]
    fn nested_balls_are_one_sided() {
        let (s, spec) = setup(4);
        let cfg = WeakGapConfig::default();
        let small = BallSet::subspace(span(&s, &[&[1.0, 0.0, 1.0, 0.0]]));
        let big = BallSet::subspace(span(&s, &[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]));
        assert!(d_w(&small, &big, &spec, &cfg).unwrap().value < 1e-8);
        assert!(d_w(&big, &small, &spec, &cfg).unwrap().value > 0.1);
    }

    #[test]
    fn eps_expansion_examples() {
        let (s, spec) = setup(4);
        let cfg = WeakGapConfig::default();
        let e1 = CoeffVector::basis(&s, 1);
        let zero = BallSet::singleton(CoeffVector::zeros(&s)).unwrap();
        assert!(!eps_expansion_member(&e1, &zero, 0.4, &spec, &cfg).unwrap());
        assert!(eps_expansion_member(&e1, &zero, 0.6, &spec, &cfg).unwrap());
        let line = BallSet::subspace(SubspaceBasis::span(&s, &[e1.clone()], "e1").unwrap());
        assert!(eps_expansion_member(&e1, &line, 1e-3, &spec, &cfg).unwrap());
    }

    #[test]
    fn brute_force_examples() {
        let (s, spec) = setup(3);
        let e1 = BallSet::subspace(SubspaceBasis::span(&s, &[CoeffVector::basis(&s, 1)], "e1").unwrap());
        let e2 = BallSet::subspace(SubspaceBasis::span(&s, &[CoeffVector::basis(&s, 2)], "e2").unwrap());
        assert!(brute_force_d_w(&e1, &e1, &spec, 1e-2).unwrap() < 1e-12);
        // sup at u = e1, best v = 0: distance 1/2.
        assert_abs_diff_eq!(brute_force_d_w(&e1, &e2, &spec, 1e-2).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(brute_force_d_w(&e2, &e1, &spec, 1e-2).unwrap(), 0.25, epsilon = 1e-12);
        let zero = BallSet::singleton(CoeffVector::zeros(&s)).unwrap();
        assert_abs_diff_eq!(brute_force_d_w(&e2, &zero, &spec, 1e-2).unwrap(), 0.25, epsilon = 1e-12);
        let full = BallSet::subspace(SubspaceBasis::full(&s));
        assert!(matches!(brute_force_d_w(&full, &e1, &spec, 0.1), Err(Error::DimTooLarge(3))));
    }

    #[test]
    fn grid_d_w_agrees_with_brute_force_on_planes() {
        let (s, spec) = setup(3);
        let cfg = WeakGapConfig { outer_grid: 0.05, ..Default::default() };
        let a = BallSet::subspace(span(&s, &[&[1.0, 0.3, 0.0], &[0.0, 0.2, 1.0]]));
        let b = BallSet::subspace(span(&s, &[&[0.2, 1.0, 0.5]]));
        let fast = d_w(&a, &b, &spec, &cfg).unwrap();
        let slow = brute_force_d_w(&a, &b, &spec, 0.02).unwrap();
        assert!((fast.value - slow).abs() < 1e-2, "{} vs {slow}", fast.value);
        let (lo, hi) = fast.certified_bounds.unwrap();
        assert!(lo <= fast.value && fast.value <= hi);
    }

    #[test]
    fn heuristic_matches_oracle_on_random_lines() {
        let (s, spec) = setup(3);
        let cfg = WeakGapConfig { exhaustive_max_dim: 0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let mut rv = || {
                let v: Vec<C64> = (0..3).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                BallSet::subspace(SubspaceBasis::span(&s, &[CoeffVector::new(&s, DVector::from_vec(v)).unwrap()], "r").unwrap())
            };
            let (a, b) = (rv(), rv());
            let h = d_w(&a, &b, &spec, &cfg).unwrap().value;
            let o = brute_force_d_w(&a, &b, &spec, 1e-2).unwrap();
            assert!((h - o).abs() <= 5e-3, "{h} vs {o}");
        }
    }

    #[test]
    fn digest_changes_with_config() {
        let (_, spec) = setup(3);
        let a = WeakGapConfig::default();
        let b = WeakGapConfig { seed: 1, ..Default::default() };
        assert_ne!(a.digest(&spec), b.digest(&spec));
        assert_eq!(a.digest(&spec), WeakGapConfig::default().digest(&spec));
    }
}
