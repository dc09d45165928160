//! Scenarios about limits of Krylov subspaces in the weak gap.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{classify, profile, profile_status, trailing_decreases, Col, Ctx, Outcome, Status};
use crate::error::{Error, Result};
use crate::gap::gap_hat;
use crate::kclass::{check_kclass, KVerdict, SpectralEnclosure};
use crate::krylov::{build_krylov_basis, inner_approximants, solvability_verdict, SolvabilityConfig, Verdict, DEFAULT_BREAKDOWN_TOL};
use crate::operator::LinearOperatorSpec;
use crate::space::{dist_to_subspace, AmbientSpace, CoeffVector, SubspaceBasis};
use crate::space::WeakNormSpec;
use crate::weak::{d_w, dhat_w, weak_dist_point_to_ball, BallSet, GapReport, WeakGapConfig};

const N_COL: Col = Col("n", "perturbation index", true);

fn check_n_hi(ctx: &Ctx, max: usize) -> Result<()> {
    if ctx.u("n_hi") > max {
        return Err(Error::BadParams(format!("n_hi = {} exceeds {max} for D = {}", ctx.u("n_hi"), ctx.u("D"))));
    }
    Ok(())
}

/// Two independent seeded Gaussian unit vectors.
fn random_pair(space: &Arc<AmbientSpace>, seed: u64) -> Result<(CoeffVector, CoeffVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Result<CoeffVector> {
        let v: Vec<f64> = (0..space.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        CoeffVector::from_real(space, &v)?.normalized()
    };
    Ok((draw()?, draw()?))
}

/// Diagonal with eigenvalues spread evenly over `[1, 2]`.
fn spread_diagonal(d: usize) -> Result<LinearOperatorSpec> {
    let vals: Vec<f64> = (0..d).map(|k| 1.0 + k as f64 / (d - 1) as f64).collect();
    LinearOperatorSpec::diagonal_real(&AmbientSpace::unilateral(d), &vals)
}

fn ball(u: &SubspaceBasis) -> BallSet {
    BallSet::subspace(u.clone())
}

fn krylov_space(op: &LinearOperatorSpec, g: &CoeffVector, n: usize) -> Result<SubspaceBasis> {
    Ok(build_krylov_basis(op, g, n, DEFAULT_BREAKDOWN_TOL)?.base().clone())
}

/// `true` when `xs` never rises by more than `slack`.
fn nonincreasing(xs: &[f64], slack: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn lower(r: &GapReport) -> f64 {
    r.lower().unwrap_or(f64::NAN)
}

pub(crate) fn lem62(ctx: &mut Ctx) -> Result<Outcome> {
    let d = ctx.u("D");
    check_n_hi(ctx, d - 1)?;
    let s = AmbientSpace::unilateral(d);
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = ctx.weak_cfg();
    let e1 = CoeffVector::basis(&s, 1);
    let u = |n: usize| -> Result<SubspaceBasis> {
        SubspaceBasis::span(&s, &[e1.add(&CoeffVector::basis(&s, n as i64))?], format!("span(e_1 + e_{n})"))
    };
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Outcome::new(vec![
        N_COL,
        Col("dist_e1", "weak distance of e_1 to the unit ball of U_n", false),
        Col("dist_e1_exact", "0.5 (1 - 1/sqrt2) + 2^-n / sqrt2", false),
        Col("dist_half", "weak distance of e_1 / 2 to the unit ball of U_n", false),
        Col("dist_edge", "weak distance of e_1 / sqrt2 to the unit ball of U_n", false),
        Col("cauchy", "weak gap between the unit balls of U_n and U_{n+1}", false),
        Col("cauchy_bound", "(2^-n + 2^-(n+1)) / sqrt2", false),
    ]);
    let (mut err, mut min_e1, mut last_half) = (0.0f64, f64::INFINITY, f64::NAN);
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let un = ball(&u(n)?);
        let dist = |x: &CoeffVector| weak_dist_point_to_ball(x, &un, &spec, &cfg).map(|r| r.value);
        let de1 = dist(&e1)?;
        let exact = 0.5 * (1.0 - r2) + 0.5f64.powi(n as i32) * r2;
        let half = dist(&e1.scale_re(0.5))?;
        let edge = dist(&e1.scale_re(r2))?;
        let cauchy = dhat_w(&un, &ball(&u(n + 1)?), &spec, &cfg)?.value;
        let bound = r2 * (0.5f64.powi(n as i32) + 0.5f64.powi(n as i32 + 1));
        out.check_le(&format!("cauchy_n{n}"), cauchy, bound + 1e-6);
        err = err.max((de1 - exact).abs());
        min_e1 = min_e1.min(de1);
        last_half = half;
        out.rows.push(vec![n as f64, de1, exact, half, edge, cauchy, bound]);
    }
    out.check_le("dist_e1_vs_exact", err, 1e-4);
    out.check_ge("dist_e1_min", min_e1, 0.14);
    out.check_le("dist_half_last", last_half, 2e-3);
    Ok(out)
}

pub(crate) fn lem71(ctx: &mut Ctx) -> Result<Outcome> {
    let (grid, n_max) = (ctx.u("grid"), ctx.u("N_max"));
    if n_max < 2 {
        return Err(Error::BadParams("LEM71 needs N_max >= 2".into()));
    }
    let s = AmbientSpace::grid_l2(grid);
    let spec = WeakNormSpec::canonical(&s)?;
    // the 2-dim sphere grid against a 16-dim inner ball costs minutes
    let cfg = WeakGapConfig { exhaustive_max_dim: 1, ..ctx.weak_cfg() };
    let v = LinearOperatorSpec::volterra(&s)?;
    let one = CoeffVector::from_fn(&s, |_| crate::C64::new(1.0, 0.0))?;
    let k = build_krylov_basis(&v, &one, n_max, DEFAULT_BREAKDOWN_TOL)?;
    let top = k.prefix(k.effective_dim());
    let mut out = Outcome::new(vec![
        Col("N", "Krylov depth", true),
        Col("dhat_w", "symmetric weak gap between K_N and K_N_max", false),
        Col("d_w_top_to_N", "d_w(K_N_max, K_N)", false),
        Col("d_w_N_to_top", "d_w(K_N, K_N_max)", false),
        Col("gap_hat", "classical gap between K_N and K_N_max", false),
    ]);
    if k.breakdown() {
        out.notes.push(format!("Arnoldi broke down at dimension {}", k.effective_dim()));
    }
    let mut series = Vec::new();
    for n in 1..=k.effective_dim() {
        if ctx.over_budget() {
            break;
        }
        let kn = k.prefix(n);
        let a = d_w(&ball(&top), &ball(&kn), &spec, &cfg)?.value;
        let b = d_w(&ball(&kn), &ball(&top), &spec, &cfg)?.value;
        series.push(a.max(b));
        out.rows.push(vec![n as f64, a.max(b), a, b, gap_hat(&kn, &top)?]);
    }
    out.check("dhat_w_nonincreasing", *series.last().unwrap_or(&f64::NAN), series[0], nonincreasing(&series, 1e-3));
    let mid = series.get(n_max / 2 - 1).copied().unwrap_or(f64::NAN);
    out.check("dhat_w_at_half_depth", mid, 0.05, mid < 0.05);
    Ok(out)
}

pub(crate) fn lem73(ctx: &mut Ctx) -> Result<Outcome> {
    let d = ctx.u("D");
    let s = AmbientSpace::unilateral(d);
    // four distinct eigenvalues: every Krylov space has dimension 4
    let vals: Vec<f64> = (0..d).map(|k| 1.0 + (k % 4) as f64).collect();
    let a = LinearOperatorSpec::diagonal_real(&s, &vals)?;
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = ctx.weak_cfg();
    let (g, h) = random_pair(&s, ctx.seed)?;
    let k = krylov_space(&a, &g, d)?;
    let mut out = Outcome::new(vec![
        N_COL,
        Col("datum_dist", "||g_n - g||", false),
        Col("d_w_K_Kn", "d_w(K, K_n)", false),
        Col("d_w_Kn_K", "d_w(K_n, K)", false),
        Col("gap_hat", "classical gap between K and K_n", false),
        Col("dim_Kn", "dimension of K_n", true),
    ]);
    let mut series = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let gn = g.add(&h.scale_re(1.0 / n as f64))?;
        let kn = krylov_space(&a, &gn, d)?;
        let fwd = d_w(&ball(&k), &ball(&kn), &spec, &cfg)?.value;
        let bwd = d_w(&ball(&kn), &ball(&k), &spec, &cfg)?.value;
        series.push(fwd);
        out.rows.push(vec![n as f64, gn.sub(&g)?.norm(), fwd, bwd, gap_hat(&k, &kn)?, kn.dim() as f64]);
    }
    let first = series.first().copied().unwrap_or(f64::NAN);
    let last = series.last().copied().unwrap_or(f64::NAN);
    out.check("d_w_K_Kn_nonincreasing", last, first, nonincreasing(&series, 1e-3));
    out.check_ge("d_w_K_Kn_trend", trailing_decreases(&series) as f64, ctx.tol.trend_steps as f64);
    out.check_le("d_w_K_Kn_shrinks", last, 0.25 * first);
    Ok(out)
}

/// `e_2` is not cyclic for the shift, `e_2 + t e_1` is (for `t != 0`): its
/// Krylov space is all of the section by exact algebra.
struct ShiftPair {
    non_cyclic: SubspaceBasis,
    e1: CoeffVector,
    e2: CoeffVector,
    shift: LinearOperatorSpec,
    /// `d_w(B_K, B_H)`, zero because `K` is a subspace of `H`.
    inclusion: f64,
    /// Certified lower bound for the weak distance of `e_1` to `B_K`.
    witness: f64,
}

fn shift_pair(ctx: &Ctx) -> Result<ShiftPair> {
    let d = ctx.u("D");
    let s = AmbientSpace::unilateral(d);
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = ctx.weak_cfg();
    let shift = LinearOperatorSpec::right_shift(&s)?;
    let (e1, e2) = (CoeffVector::basis(&s, 1), CoeffVector::basis(&s, 2));
    let non_cyclic = krylov_space(&shift, &e2, d)?;
    let full = SubspaceBasis::full(&s);
    let inclusion = d_w(&ball(&non_cyclic), &ball(&full), &spec, &cfg)?.value;
    let witness = lower(&weak_dist_point_to_ball(&e1, &ball(&non_cyclic), &spec, &cfg)?);
    Ok(ShiftPair { non_cyclic, e1, e2, shift, inclusion, witness })
}

pub(crate) fn ex74(ctx: &mut Ctx) -> Result<Outcome> {
    let p = shift_pair(ctx)?;
    let d = ctx.u("D");
    let mut out = Outcome::new(vec![
        N_COL,
        Col("datum_dist", "||g_n - g||", false),
        Col("arnoldi_dim", "numerical Krylov dimension of g_n (diagnostic; exact value D)", true),
        Col("d_w_Kn_K_lower", "certified lower bound for d_w(K_n, K) via e_1 in B_{K_n}", false),
        Col("d_w_K_Kn", "d_w(K, K_n)", false),
    ]);
    out.notes.push(format!(
        "K = K(S, e_2) has dimension {}; K_n = H exactly since e_1 = n (g_n - e_2)",
        p.non_cyclic.dim()
    ));
    let mut min_w = f64::INFINITY;
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let gn = p.e2.add(&p.e1.scale_re(1.0 / n as f64))?;
        let dim = build_krylov_basis(&p.shift, &gn, d, DEFAULT_BREAKDOWN_TOL)?.effective_dim();
        min_w = min_w.min(p.witness);
        out.rows.push(vec![n as f64, gn.sub(&p.e2)?.norm(), dim as f64, p.witness, p.inclusion]);
    }
    out.check_ge("witness_min", min_w, 0.5 - 1e-3);
    out.check_le("d_w_K_Kn", p.inclusion, 1e-6);
    Ok(out)
}

pub(crate) fn ex75(ctx: &mut Ctx) -> Result<Outcome> {
    let p = shift_pair(ctx)?;
    let mut out = Outcome::new(vec![
        N_COL,
        Col("cyclic", "1 when g_n = e_2 + e_1/n (K_n = H), 0 when g_n = e_2", true),
        Col("datum_dist", "||g_n - e_2||", false),
        Col("d_w_Kn_Kn1", "d_w(K_n, K_{n+1}): certified lower bound for even n, computed for odd n", false),
    ]);
    let (mut min_even, mut last_dist) = (f64::INFINITY, f64::NAN);
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let even = n % 2 == 0;
        let gn = if even { p.e2.add(&p.e1.scale_re(1.0 / n as f64))? } else { p.e2.clone() };
        let dist = gn.sub(&p.e2)?.norm();
        let gap = if even {
            min_even = min_even.min(p.witness);
            p.witness
        } else {
            p.inclusion
        };
        last_dist = dist;
        out.rows.push(vec![n as f64, even as u8 as f64, dist, gap]);
    }
    out.check_ge("even_witness_min", min_even, 0.5 - 1e-3);
    out.check_le("datum_dist_last", last_dist, 1.0 / ctx.u("n_hi") as f64 + 1e-15);
    Ok(out)
}

pub(crate) fn prop76(ctx: &mut Ctx) -> Result<Outcome> {
    let (d, depth) = (ctx.u("D"), ctx.u("N_max"));
    check_n_hi(ctx, d)?;
    let a = spread_diagonal(d)?;
    let s = a.space().clone();
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = ctx.weak_cfg();
    let (g, _) = random_pair(&s, ctx.seed)?;
    let kg = krylov_space(&a, &g, depth)?;
    let mut out = Outcome::new(vec![
        N_COL,
        Col("datum_dist", "||g_n - g||", false),
        Col("bound", "||g|| / n", false),
        Col("member_residual", "dist(g_n, K_n(A, g)) / ||g_n||", false),
        Col("dhat_w", "weak gap between K_N(A, g_n) and K_N(A, g), N = N_max", false),
    ]);
    let mut series = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let gn = inner_approximants(&a, &g, n)?;
        let dd = gn.sub(&g)?.norm();
        let bound = g.norm() / n as f64;
        out.check_le(&format!("datum_dist_n{n}"), dd, bound);
        let member = dist_to_subspace(&gn, &krylov_space(&a, &g, n)?)? / gn.norm();
        out.check_le(&format!("member_n{n}"), member, 1e-12);
        let gap = dhat_w(&ball(&krylov_space(&a, &gn, depth)?), &ball(&kg), &spec, &cfg)?.value;
        series.push(gap);
        out.rows.push(vec![n as f64, dd, bound, member, gap]);
    }
    out.check("dhat_w_nonincreasing", *series.last().unwrap_or(&f64::NAN), series[0], nonincreasing(&series, 1e-3));
    out.notes.push(format!("finite-depth surrogate: both Krylov spaces are taken at depth N = {depth}"));
    Ok(out)
}

pub(crate) fn prop77(ctx: &mut Ctx) -> Result<Outcome> {
    let (d, n_max) = (ctx.u("D"), ctx.u("N_max"));
    let a = spread_diagonal(d)?;
    let s = a.space().clone();
    let cert = check_kclass(&a, &SpectralEnclosure::interval(1.0, 2.0), 64);
    let (g, h) = random_pair(&s, ctx.seed)?;
    let vals: Vec<f64> = (0..d).map(|k| 1.0 + k as f64 / (d - 1) as f64).collect();
    let solve = |x: &CoeffVector| -> Result<CoeffVector> {
        let c: Vec<_> = x.coords().iter().zip(&vals).map(|(z, l)| z / *l).collect();
        CoeffVector::new(&s, nalgebra::DVector::from_vec(c))
    };
    let cfg = SolvabilityConfig { n_max, ..SolvabilityConfig::default() };
    let f = solve(&g)?;
    let limit = solvability_verdict(&a, &g, &f, &cfg)?;
    let limit_profile: Vec<f64> = limit.rel_dist_profile.iter().map(|p| p.1).collect();
    let mut out = Outcome::new(vec![
        N_COL,
        Col("N", "Krylov depth", true),
        Col("err_perturbed", "dist(f_n, K_N(A, g_n)) / ||f_n||", false),
        Col("err_limit", "dist(f, K_N(A, g)) / ||f||", false),
        Col("datum_dist", "||g_n - g||", false),
        Col("sol_dist", "||f_n - f||", false),
    ]);
    out.check("kclass_certified", (cert.verdict == KVerdict::Certified) as u8 as f64, 1.0, cert.verdict == KVerdict::Certified);
    out.check("limit_verdict", (limit.verdict == Verdict::KrylovSolvable) as u8 as f64, 1.0, limit.verdict == Verdict::KrylovSolvable);
    let mut statuses = Vec::new();
    let mut sol = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let gn = g.add(&h.scale_re(1.0 / n as f64))?;
        let fn_ = solve(&gn)?;
        let rep = solvability_verdict(&a, &gn, &fn_, &cfg)?;
        let pert: Vec<f64> = rep.rel_dist_profile.iter().map(|p| p.1).collect();
        statuses.push(if rep.verdict == Verdict::KrylovSolvable { Status::Solvable } else { profile_status(&pert, None, &ctx.tol, false) });
        let sd = fn_.sub(&f)?.norm();
        sol.push(sd);
        for (i, (p, l)) in pert.iter().zip(&limit_profile).enumerate() {
            out.rows.push(vec![n as f64, (i + 1) as f64, *p, *l, gn.sub(&g)?.norm(), sd]);
        }
    }
    out.check("sol_dist_nonincreasing", *sol.last().unwrap_or(&f64::NAN), sol.first().copied().unwrap_or(f64::NAN), nonincreasing(&sol, 1e-12));
    let limit_status = if limit.verdict == Verdict::KrylovSolvable { Status::Solvable } else { profile_status(&limit_profile, None, &ctx.tol, false) };
    out.classification = classify(&statuses, limit_status);
    Ok(out)
}

pub(crate) fn rem78(ctx: &mut Ctx) -> Result<Outcome> {
    let d = ctx.u("D");
    check_n_hi(ctx, d)?;
    let s = AmbientSpace::unilateral(d);
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = ctx.weak_cfg();
    let id = LinearOperatorSpec::identity(&s);
    let zero = BallSet::singleton(CoeffVector::zeros(&s))?;
    let mut out = Outcome::new(vec![
        N_COL,
        Col("d_w_Kn_0", "d_w(B_{span e_n}, {0})", false),
        Col("exact", "2^-n", false),
        Col("d_w_0_Kn", "d_w({0}, B_{span e_n})", false),
        Col("datum_norm", "||g_n - 0||", false),
        Col("err_perturbed", "dist(e_n, K_1(I, e_n))", false),
    ]);
    out.notes.push("limit datum 0 with solution 0: trivially a Krylov solution".into());
    let (mut err, mut rev) = (0.0f64, 0.0f64);
    let mut statuses = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let en = CoeffVector::basis(&s, n as i64);
        let kn = BallSet::subspace(SubspaceBasis::span(&s, &[en.clone()], format!("span(e_{n})"))?);
        let fwd = d_w(&kn, &zero, &spec, &cfg)?.value;
        let back = d_w(&zero, &kn, &spec, &cfg)?.value;
        let exact = 0.5f64.powi(n as i32);
        err = err.max((fwd - exact).abs());
        rev = rev.max(back);
        let p = profile(&id, &en, &en, 1)?;
        statuses.push(profile_status(&p, None, &ctx.tol, false));
        out.rows.push(vec![n as f64, fwd, exact, back, en.norm(), p[0]]);
    }
    out.check_le("d_w_vs_2^-n", err, 1e-6);
    out.check_le("d_w_0_Kn", rev, 1e-12);
    out.classification = classify(&statuses, Status::Solvable);
    Ok(out)
}
