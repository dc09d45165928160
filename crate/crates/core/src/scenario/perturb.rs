//! Scenarios in which a perturbed family of problems converges to a limit
//! problem and solvability (or K-class membership) is tracked.

use std::sync::Arc;

use nalgebra::DVector;

use super::{cell, classify, truncation_edges, profile, profile_status, support_witness, trailing_decreases, Col, Ctx, Outcome, Status};
use crate::error::{Error, Result};
use crate::kclass::{check_kclass, ArcPiece, KVerdict, SpectralEnclosure};
use crate::krylov::{build_krylov_basis, DEFAULT_BREAKDOWN_TOL};
use crate::operator::{adjoint_apply, apply, finite_section, op_norm_dense, LinearOperatorSpec};
use crate::scenario::Classification;
use crate::space::{AmbientSpace, CoeffVector, C64};
use crate::zoo::{build_example_operator, cyclic_candidate, lid_enclosure, OpParams};

const N_COL: Col = Col("n", "perturbation index", true);
const DEPTH_COL: Col = Col("N", "Krylov depth", true);

fn op(id: &str, params: &[(&str, usize)]) -> Result<LinearOperatorSpec> {
    let p = params.iter().fold(OpParams::new(), |p, (k, v)| p.with(k, *v as f64));
    build_example_operator(id, &p)
}

fn need_depth(ctx: &Ctx, at_least: usize) -> Result<()> {
    if ctx.u("N_max") < at_least {
        return Err(Error::BadParams(format!("N_max = {} must be at least {at_least} here", ctx.u("N_max"))));
    }
    Ok(())
}

/// Appends one row per depth.
fn push_profile_rows(out: &mut Outcome, n: usize, columns: &[&[f64]], extra: &[f64]) {
    for (i, _) in columns[0].iter().enumerate() {
        let mut row = vec![n as f64, (i + 1) as f64];
        row.extend(columns.iter().map(|c| c[i]));
        row.extend_from_slice(extra);
        out.rows.push(row);
    }
}

fn certificate_code(v: KVerdict) -> f64 {
    match v {
        KVerdict::Certified => 1.0,
        KVerdict::Refuted => -1.0,
        KVerdict::Unknown => 0.0,
    }
}

/// `sum_{k>=n} k^-2 + n^-2`, the bound on `||R - R_n||` for the untruncated shift.
pub fn ex31_norm_bound(n: usize) -> f64 {
    let head: f64 = (1..n).map(|k| (k as f64).powi(-2)).sum();
    std::f64::consts::PI.powi(2) / 6.0 - head + (n as f64).powi(-2)
}

pub(crate) fn ex31(ctx: &mut Ctx) -> Result<Outcome> {
    let (d, n_max) = (ctx.u("D"), ctx.u("N_max"));
    // R_n closes its cycle after n - 1 steps
    need_depth(ctx, ctx.u("n_hi"))?;
    if ctx.u("n_hi") >= d {
        return Err(Error::BadParams(format!("n_hi must stay below D = {d}")));
    }
    let r = op("EX31_R", &[("D", d)])?;
    let s = r.space().clone();
    let edges = truncation_edges(&s);
    let (g, f) = (CoeffVector::basis(&s, 2), CoeffVector::basis(&s, 1));
    let witness = support_witness(&r, &g, &f, &edges);
    let limit = profile(&r, &g, &f, n_max)?;
    let mut out = Outcome::new(vec![
        N_COL,
        DEPTH_COL,
        Col("err_Rn", "dist(e_1, K_N(R_n, e_2))", false),
        Col("err_R", "dist(e_1, K_N(R, e_2))", false),
        Col("op_dist", "||R - R_n|| (dense SVD)", false),
        Col("op_bound", "sum_{k>=n} k^-2 + n^-2", false),
        Col("witness_R", "mass of e_1 outside the invariant support of e_2 under R", false),
    ]);
    let mut statuses = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let rn = op("EX31_Rn", &[("D", d), ("n", n)])?;
        let pert = profile(&rn, &g, &f, n_max)?;
        statuses.push(profile_status(&pert, support_witness(&rn, &g, &f, &edges), &ctx.tol, false));
        let op_dist = op_norm_dense(&r.minus(&rn)?);
        let bound = ex31_norm_bound(n);
        out.check_le(&format!("op_dist_n{n}"), op_dist, bound);
        push_profile_rows(&mut out, n, &[&pert, &limit], &[op_dist, bound, cell(witness)]);
    }
    out.check_ge("limit_witness", witness.unwrap_or(0.0), 1.0);
    out.classification = classify(&statuses, profile_status(&limit, witness, &ctx.tol, false));
    Ok(out)
}

pub(crate) fn ex32(ctx: &mut Ctx) -> Result<Outcome> {
    let (d, n_max) = (ctx.u("D"), ctx.u("N_max"));
    let a = op("EX32_A", &[("D", d)])?;
    let s = a.space().clone();
    let edges = truncation_edges(&s);
    let (e1, e2) = (CoeffVector::basis(&s, 1), CoeffVector::basis(&s, 2));
    let limit = profile(&a, &e2, &e2, n_max)?;
    let limit_status = profile_status(&limit, support_witness(&a, &e2, &e2, &edges), &ctx.tol, false);
    let mut out = Outcome::new(vec![
        N_COL,
        DEPTH_COL,
        Col("err_An", "dist(f_n, K_N(A_n, e_2)) / ||f_n||, f_n = n e_1", false),
        Col("err_A", "dist(e_2, K_N(A, e_2)) / ||e_2||", false),
        Col("op_dist", "||A - A_n|| (dense SVD)", false),
        Col("sol_dist", "||f_n - f||, f = e_2", false),
        Col("witness_An", "mass of f_n outside the invariant support of e_2 under A_n", false),
    ]);
    let mut statuses = Vec::new();
    let mut sol = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let an = op("EX32_An", &[("D", d), ("n", n)])?;
        let fn_ = e1.scale_re(n as f64);
        let residual = apply(&an, &fn_)?.sub(&e2)?.norm();
        out.check_le(&format!("residual_n{n}"), residual, 1e-12);
        let w = support_witness(&an, &e2, &fn_, &edges);
        let pert = profile(&an, &e2, &fn_, n_max)?;
        statuses.push(profile_status(&pert, w, &ctx.tol, false));
        let op_dist = op_norm_dense(&a.minus(&an)?);
        out.check_le(&format!("op_dist_n{n}"), (op_dist - 1.0 / n as f64).abs(), 1e-12);
        let sd = fn_.sub(&e2)?.norm();
        sol.push(sd);
        push_profile_rows(&mut out, n, &[&pert, &limit], &[op_dist, sd, cell(w)]);
    }
    let grows = sol.windows(2).all(|w| w[1] > w[0]);
    out.check("sol_dist_grows", *sol.last().unwrap_or(&0.0), sol.first().copied().unwrap_or(0.0), grows);
    out.classification = classify(&statuses, limit_status);
    Ok(out)
}

/// `R R^* g`: the datum with its leftmost window coefficient removed, so that
/// `f = R^* g` solves `R f = g` exactly on the window.
fn solvable_pair(r: &LinearOperatorSpec, g: &CoeffVector) -> Result<(CoeffVector, CoeffVector)> {
    let f = adjoint_apply(r, g)?;
    Ok((apply(r, &f)?, f))
}

fn truncate(g: &CoeffVector, m: i64) -> Result<CoeffVector> {
    let s = g.space().clone();
    let coords = s.labels().iter().zip(g.coords().iter()).map(|(&k, &z)| if k.abs() <= m { z } else { C64::new(0.0, 0.0) });
    CoeffVector::new(&s, DVector::from_iterator(s.dim(), coords))
}

pub(crate) fn ex33(ctx: &mut Ctx) -> Result<Outcome> {
    let (k, n_max, part) = (ctx.u("K"), ctx.u("N_max"), ctx.u("part"));
    if part == 2 && 4 * ctx.u("n_hi") >= k {
        return Err(Error::BadParams(format!("part 2 needs 4 n_hi < K = {k}")));
    }
    let s = AmbientSpace::bilateral(k);
    let edges = truncation_edges(&s);
    let r = LinearOperatorSpec::right_shift(&s)?;
    let g_raw = if part == 1 { CoeffVector::basis(&s, 0) } else { cyclic_candidate(&s, 1.0)? };
    let (g, f) = solvable_pair(&r, &g_raw)?;
    let limit_w = support_witness(&r, &g, &f, &edges);
    let limit = profile(&r, &g, &f, n_max)?;
    let limit_status = profile_status(&limit, limit_w, &ctx.tol, true);
    let mut out = Outcome::new(vec![
        N_COL,
        DEPTH_COL,
        Col("err_perturbed", "dist(f_n, K_N(R, g_n)) / ||f_n||, f_n = R^* g_n", false),
        Col("err_limit", "dist(f, K_N(R, g)) / ||f||", false),
        Col("datum_dist", "||g_n - g||", false),
        Col("witness_perturbed", "invariant-support lower bound for the perturbed error", false),
        Col("witness_limit", "invariant-support lower bound for the limit error", false),
    ]);
    out.notes.push(format!(
        "part {part}: {}",
        if part == 1 {
            "g_n has symbol exp(-1/(n(x - 1/2))) on (1/2, 1) and 1 elsewhere (cyclic), g = e_0"
        } else {
            "g has symbol exp(-1/(x - 1/2)) on (1/2, 1) and 1 elsewhere (cyclic), g_n keeps |k| <= 4n"
        }
    ));
    let mut statuses = Vec::new();
    let mut dists = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let gn_raw = if part == 1 { cyclic_candidate(&s, 1.0 / n as f64)? } else { truncate(&g_raw, 4 * n as i64)? };
        let (gn, fn_) = solvable_pair(&r, &gn_raw)?;
        let w = support_witness(&r, &gn, &fn_, &edges);
        let pert = profile(&r, &gn, &fn_, n_max)?;
        statuses.push(profile_status(&pert, w, &ctx.tol, true));
        let dd = gn.sub(&g)?.norm();
        dists.push(dd);
        push_profile_rows(&mut out, n, &[&pert, &limit], &[dd, cell(w), cell(limit_w)]);
    }
    let shrinking = dists.windows(2).all(|w| w[1] < w[0]);
    out.check("datum_dist_decreasing", *dists.last().unwrap_or(&f64::NAN), dists.first().copied().unwrap_or(f64::NAN), shrinking);
    out.classification = classify(&statuses, limit_status);
    Ok(out)
}

/// Concatenates coordinates into `first ⊕ second`.
fn concat(space: &Arc<AmbientSpace>, a: &CoeffVector, b: &CoeffVector) -> Result<CoeffVector> {
    let coords: Vec<C64> = a.coords().iter().chain(b.coords().iter()).copied().collect();
    CoeffVector::new(space, DVector::from_vec(coords))
}

/// Largest mass, over an orthonormal Krylov basis, outside the block that
/// holds the datum.
fn off_block_mass(op: &LinearOperatorSpec, g: &CoeffVector, n: usize, split: usize, datum_in_first: bool) -> Result<f64> {
    let k = build_krylov_basis(op, g, n, DEFAULT_BREAKDOWN_TOL)?;
    Ok(k.base()
        .columns()
        .iter()
        .map(|c| {
            let iso = c.iso();
            let range = if datum_in_first { split..iso.len() } else { 0..split };
            range.map(|i| iso[i].norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max))
}

/// EX34(i), EX34(ii), EX35(i), EX35(ii): Volterra on a grid summed with the
/// right shift on sequences.
pub(crate) fn block_sum(ctx: &mut Ctx, id: &str) -> Result<Outcome> {
    let (grid, d, n_max) = (ctx.u("grid"), ctx.u("D"), ctx.u("N_max"));
    let h1 = AmbientSpace::grid_l2(grid);
    let h2 = AmbientSpace::unilateral(d);
    let v = LinearOperatorSpec::volterra(&h1)?;
    let r = LinearOperatorSpec::right_shift(&h2)?;
    let one = CoeffVector::from_fn(&h1, |_| C64::new(1.0, 0.0))?;
    let g1 = apply(&v, &one)?;
    let (e1, e2) = (CoeffVector::basis(&h2, 1), CoeffVector::basis(&h2, 2));
    let (z1, z2) = (CoeffVector::zeros(&h1), CoeffVector::zeros(&h2));
    let vr = LinearOperatorSpec::direct_sum(&v, &r)?;
    let s = vr.space().clone();
    let split = h1.dim();
    let edges: Vec<usize> = truncation_edges(&h1).into_iter().chain(truncation_edges(&h2).into_iter().map(|i| split + i)).collect();
    // limit problem and whether its datum sits in the Volterra block
    let (a, g, f, first_block) = match id {
        "EX34i" => (vr.clone(), concat(&s, &z1, &e2)?, concat(&s, &z1, &e1)?, false),
        "EX35i" => (LinearOperatorSpec::direct_sum(&LinearOperatorSpec::zero(&h1), &r)?, concat(&s, &z1, &e2)?, concat(&s, &z1, &e1)?, false),
        "EX34ii" => (vr.clone(), concat(&s, &g1, &z2)?, concat(&s, &one, &z2)?, true),
        "EX35ii" => (LinearOperatorSpec::direct_sum(&v, &LinearOperatorSpec::zero(&h2))?, concat(&s, &g1, &z2)?, concat(&s, &one, &z2)?, true),
        _ => unreachable!(),
    };
    let limit_w = support_witness(&a, &g, &f, &edges);
    let limit = profile(&a, &g, &f, n_max)?;
    let limit_status = profile_status(&limit, limit_w, &ctx.tol, true);
    let leak = off_block_mass(&a, &g, n_max, split, first_block)?;
    let mut out = block_outcome(ctx, id, leak, limit_w, &limit);
    let mut statuses = Vec::new();
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let t = 1.0 / n as f64;
        let (an, gn, fn_) = match id {
            "EX34i" => (vr.clone(), concat(&s, &g1.scale_re(t), &e2)?, concat(&s, &one.scale_re(t), &e1)?),
            "EX34ii" => (vr.clone(), concat(&s, &g1, &e2.scale_re(t))?, concat(&s, &one, &e1.scale_re(t))?),
            "EX35i" => (LinearOperatorSpec::direct_sum(&v.scaled_re(t), &r)?, concat(&s, &g1.scale_re(t), &e2)?, concat(&s, &one, &e1)?),
            "EX35ii" => (LinearOperatorSpec::direct_sum(&v, &r.scaled_re(t))?, concat(&s, &g1, &e2.scale_re(t))?, concat(&s, &one, &e1)?),
            _ => unreachable!(),
        };
        let residual = apply(&an, &fn_)?.sub(&gn)?.norm() / gn.norm();
        out.check_le(&format!("residual_n{n}"), residual, 1e-12);
        let w = support_witness(&an, &gn, &fn_, &edges);
        let pert = profile(&an, &gn, &fn_, n_max)?;
        statuses.push(profile_status(&pert, w, &ctx.tol, true));
        let extra = [op_norm_dense(&a.minus(&an)?), gn.sub(&g)?.norm(), fn_.sub(&f)?.norm(), cell(w)];
        push_profile_rows(&mut out, n, &[&pert, &limit], &extra);
    }
    out.classification = classify(&statuses, limit_status);
    Ok(out)
}

fn block_outcome(ctx: &Ctx, id: &str, leak: f64, limit_w: Option<f64>, limit: &[f64]) -> Outcome {
    let mut out = Outcome::new(vec![
        N_COL,
        DEPTH_COL,
        Col("err_perturbed", "dist(f_n, K_N(A_n, g_n)) / ||f_n||", false),
        Col("err_limit", "dist(f, K_N(A, g)) / ||f||", false),
        Col("op_dist", "||A_n - A|| (dense SVD)", false),
        Col("datum_dist", "||g_n - g||", false),
        Col("sol_dist", "||f_n - f||", false),
        Col("witness_perturbed", "mass of f_n outside the invariant support of g_n", false),
    ]);
    out.check_le("limit_off_block_mass", leak, 1e-12);
    if let Some(w) = limit_w {
        out.notes.push(format!("limit witness {w:.6}"));
    } else {
        out.notes.push(format!(
            "{id}: limit error is a Volterra trend, {} trailing strict decreases (needs {})",
            trailing_decreases(limit),
            ctx.tol.trend_steps
        ));
    }
    out
}

pub(crate) fn lem43(ctx: &mut Ctx) -> Result<Outcome> {
    let d = ctx.u("D");
    let steps = ctx.tol.trend_steps;
    if d >> steps < 2 {
        return Err(Error::BadParams(format!("D = {d} is too small for a sweep of {steps} halvings")));
    }
    if 2 * ctx.u("n_hi") >= d {
        return Err(Error::BadParams(format!("the limit is only separable from [1/(2n), 1 + 2/n] when 2 n_hi < D = {d}")));
    }
    let a = op("LEM43_A", &[("D", d)])?;
    let lam_min = |o: &LinearOperatorSpec| finite_section(o).diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let mut out = Outcome::new(vec![
        N_COL,
        Col("D", "section dimension", true),
        Col("op_dist", "||A_n - A|| (dense SVD); NaN on sweep rows", false),
        Col("lam_min_An", "smallest eigenvalue of A_n", false),
        Col("cert_An", "A_n in [1/(2n), 1 + 2/n]: 1 certified, -1 refuted, 0 unknown", false),
        Col("lam_min_A", "smallest eigenvalue of A at this D", false),
        Col("cert_A", "A in the same enclosure: 1 certified, -1 refuted, 0 unknown", false),
    ]);
    let mut statuses = Vec::new();
    let mut limit_refuted = true;
    for n in ctx.n_values() {
        if ctx.over_budget() {
            break;
        }
        let an = op("LEM43_An", &[("D", d), ("n", n)])?;
        let t = 1.0 / n as f64;
        let enc = SpectralEnclosure::interval(0.5 * t, 1.0 + 2.0 * t);
        let cn = check_kclass(&an, &enc, 64).verdict;
        let ca = check_kclass(&a, &enc, 64).verdict;
        statuses.push(if cn == KVerdict::Certified { Status::Solvable } else { Status::Undetermined });
        limit_refuted &= ca == KVerdict::Refuted;
        let od = op_norm_dense(&an.minus(&a)?);
        out.check_le(&format!("op_dist_n{n}"), (od - t).abs(), 1e-12);
        out.rows.push(vec![n as f64, d as f64, od, lam_min(&an), certificate_code(cn), lam_min(&a), certificate_code(ca)]);
    }
    // the limit's spectrum creeps to 0 as the section grows
    let mut sweep = Vec::new();
    for j in 0..=steps {
        let dj = d >> (steps - j);
        let lm = lam_min(&op("LEM43_A", &[("D", dj)])?);
        sweep.push(lm);
        out.rows.push(vec![0.0, dj as f64, f64::NAN, f64::NAN, f64::NAN, lm, f64::NAN]);
    }
    let trend = trailing_decreases(&sweep);
    out.check_ge("limit_lam_min_trend", trend as f64, steps as f64);
    out.notes.push("tracked property: K-class membership; rows with n = 0 are the D-sweep of the limit".into());
    let limit_status = if limit_refuted && trend >= steps { Status::NotSolvable } else { Status::Undetermined };
    out.classification = classify(&statuses, limit_status);
    Ok(out)
}

pub(crate) fn ex44(ctx: &mut Ctx) -> Result<Outcome> {
    let (k, n_max) = (ctx.u("K"), ctx.u("N_max"));
    let ns: Vec<usize> = ctx.n_values().filter(|n| n.is_power_of_two()).collect();
    if ns.is_empty() {
        return Err(Error::BadParams("EX44 needs a power of two in [n_lo, n_hi]".into()));
    }
    let ks = [k / 4, k / 2, k];
    let full = SpectralEnclosure::arc_tube(vec![ArcPiece { radius: 1.0, start: 0.0, end: 2.0 * std::f64::consts::PI }], 0.05);
    let mut out = Outcome::new(vec![
        N_COL,
        Col("K", "window half-width", true),
        Col("op_dist", "||A - A_n|| (dense SVD)", false),
        Col("bound", "1/n", false),
        Col("cert_An", "A_n in its lid tube: 1 certified, -1 refuted, 0 unknown", false),
        Col("cert_A", "A in the same lid tube: 1 certified, -1 refuted, 0 unknown", false),
        Col("err_limit", "dist(e_-1, K_N_max(A, e_0))", false),
        Col("witness_limit", "mass of e_-1 outside the invariant support of e_0 under A", false),
    ]);
    let mut statuses = Vec::new();
    let mut limit_ok = true;
    let mut limit_status = Status::Undetermined;
    for &n in &ns {
        let mut dists = Vec::new();
        for &kj in &ks {
            if ctx.over_budget() {
                break;
            }
            let a = op("EX44_A", &[("K", kj)])?;
            let an = op("EX44_An", &[("K", kj), ("n", n)])?;
            let od = op_norm_dense(&a.minus(&an)?);
            dists.push(od);
            let enc = lid_enclosure(n);
            let cn = check_kclass(&an, &enc, 64).verdict;
            let ca = check_kclass(&a, &enc, 64).verdict;
            limit_ok &= ca == KVerdict::Refuted && check_kclass(&a, &full, 64).verdict == KVerdict::Refuted;
            statuses.push(if cn == KVerdict::Certified { Status::Solvable } else { Status::Undetermined });
            let s = a.space().clone();
            let edges = truncation_edges(&s);
            let (g, f) = (CoeffVector::basis(&s, 0), CoeffVector::basis(&s, -1));
            let w = support_witness(&a, &g, &f, &edges);
            let err = profile(&a, &g, &f, n_max)?;
            limit_status = profile_status(&err, w, &ctx.tol, false);
            limit_ok &= limit_status == Status::NotSolvable;
            out.check_le(&format!("op_dist_n{n}_K{kj}"), od, 1.0 / n as f64 + 1e-9);
            out.rows.push(vec![n as f64, kj as f64, od, 1.0 / n as f64, certificate_code(cn), certificate_code(ca), err[err.len() - 1], cell(w)]);
        }
        let monotone = dists.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        out.check(&format!("op_dist_nondecreasing_in_K_n{n}"), *dists.last().unwrap_or(&f64::NAN), dists[0], monotone);
    }
    if !limit_ok {
        limit_status = Status::Undetermined;
    }
    out.classification = classify(&statuses, limit_status);
    if out.classification != Classification::Loss {
        out.notes.push("limit not refuted in every lid tube or not witnessed".into());
    }
    Ok(out)
}
