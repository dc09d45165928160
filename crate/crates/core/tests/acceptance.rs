// Runs the twelve acceptance criteria at their stated tolerances and runtime
// budgets. One PASS/FAIL line per criterion; the process fails if any does.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use krylov_lab::gap::{d_metric, delta, dhat_metric, gap_hat, principal_angles};
use krylov_lab::kclass::{check_kclass, perturbation_bound_check, poly_inverse_approx, BoundVerdict, KVerdict, SpectralEnclosure};
use krylov_lab::krylov::{build_krylov_basis, krylov_error};
use krylov_lab::operator::{op_norm_dense, LinearOperatorSpec};
use krylov_lab::scenario::{ex31_norm_bound, run_scenario, run_suite, ScenarioReport, ScenarioSpec, SuiteConfig};
use krylov_lab::space::{dist_to_subspace, AmbientSpace, CoeffVector, SubspaceBasis, WeakNormSpec};
use krylov_lab::weak::{brute_force_d_w, d_w, BallSet, WeakGapConfig};
use krylov_lab::zoo::{build_example_operator, OpParams, EX44_CALIBRATION_C};
use krylov_lab::C64;

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn op(id: &str, params: &[(&str, f64)]) -> LinearOperatorSpec {
    let p = params.iter().fold(OpParams::new(), |p, (k, v)| p.with(k, *v));
    build_example_operator(id, &p).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn complex_gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn scenario(id: &str, params: &[(&str, f64)]) -> ScenarioReport {
    let spec = params.iter().fold(ScenarioSpec::new(id), |s, (k, v)| s.with(k, *v));
    run_scenario(&spec).unwrap()
}

fn column(r: &ScenarioReport, name: &str) -> Vec<f64> {
    r.column(name).unwrap_or_else(|| panic!("{} has no column {name}", r.id))
}

fn c1_ex31() -> Verdict {
    let r = op("EX31_R", &[("D", 100.0)]);
    let rn = op("EX31_Rn", &[("D", 100.0), ("n", 6.0)]);
    let s = r.space().clone();
    let (g, f) = (CoeffVector::basis(&s, 2), CoeffVector::basis(&s, 1));
    let (mut worst_r, mut worst_rn) = (0.0f64, 0.0f64);
    for n in 1..=12 {
        worst_r = worst_r.max((krylov_error(&r, &g, &f, n).unwrap() - 1.0).abs());
        if n >= 6 {
            worst_rn = worst_rn.max(krylov_error(&rn, &g, &f, n).unwrap());
        }
    }
    ensure(
        worst_r <= 1e-12 && worst_rn <= 1e-10,
        format!("max |err_R - 1| = {worst_r:.1e}, max err_Rn (N>=6) = {worst_rn:.1e}"),
    )
}

fn c2_norm_oracle() -> Verdict {
    let r = op("EX31_R", &[("D", 100.0)]);
    let (mut worst, mut slack) = (0.0f64, f64::INFINITY);
    for n in 2..=20 {
        let rn = op("EX31_Rn", &[("D", 100.0), ("n", n as f64)]);
        let v = op_norm_dense(&r.minus(&rn).unwrap());
        worst = worst.max((v - 2f64.sqrt() / (n * n) as f64).abs());
        slack = slack.min(ex31_norm_bound(n) - v);
    }
    ensure(worst <= 1e-8 && slack >= 0.0, format!("max |norm - sqrt2/n^2| = {worst:.1e}, min bound slack = {slack:.3e}"))
}

fn c3_perturbation_bound() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 50;
    let s = AmbientSpace::unilateral(d);
    let (mut violations, mut not_certified, mut max_ratio) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let vals: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..=2.0)).collect();
        let a = LinearOperatorSpec::diagonal_real(&s, &vals).unwrap();
        if check_kclass(&a, &SpectralEnclosure::interval(1.0, 2.0), 16).verdict != KVerdict::Certified {
            not_certified += 1;
        }
        let inv_norm = 1.0 / vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let e = complex_gaussian(&mut rng, d, d);
        let size = rng.random_range(0.0..1.0) * 0.5 / inv_norm;
        let e = e.scale(size / e.singular_values().max());
        let pert = LinearOperatorSpec::dense(&s, DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| C64::new(vals[i], 0.0))) + e).unwrap();
        let g = CoeffVector::from_real(&s, &gaussian(&mut rng, d)).unwrap();
        let rep = perturbation_bound_check(&a, &pert, &g).unwrap();
        if rep.verdict != BoundVerdict::Holds {
            violations += 1;
        }
        max_ratio = max_ratio.max(rep.ratio.unwrap_or(f64::NAN));
    }
    ensure(
        violations == 0 && not_certified == 0,
        format!("100 instances: {violations} violations, {not_certified} uncertified, max lhs/rhs = {max_ratio:.3}"),
    )
}

fn c4_poly_inverse() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 50;
    let s = AmbientSpace::unilateral(d);
    let vals: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..=2.0)).collect();
    let a = LinearOperatorSpec::diagonal_real(&s, &vals).unwrap();
    let enc = SpectralEnclosure::interval(1.0, 2.0);
    let p = poly_inverse_approx(&a, &enc, 20).unwrap();
    let residual = vals.iter().map(|&x| (p.eval(C64::new(x, 0.0)) - 1.0 / x).norm()).fold(0.0, f64::max);
    let (mut member, mut solve) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let g = CoeffVector::from_real(&s, &gaussian(&mut rng, d)).unwrap();
        let pg = p.apply(&a, &g).unwrap();
        // no early breakdown: K_21 is numerically thin but still 21-dimensional
        let k = build_krylov_basis(&a, &g, 21, 0.0).unwrap();
        member = member.max(dist_to_subspace(&pg, k.base()).unwrap());
        let exact = CoeffVector::from_real(&s, &g.coords().iter().zip(&vals).map(|(x, v)| x.re / v).collect::<Vec<_>>()).unwrap();
        solve = solve.max(pg.sub(&exact).unwrap().norm() / g.norm());
    }
    ensure(
        residual < 1e-10 && member < 1e-10 && solve <= 1e-10,
        format!("operator residual {residual:.1e}, max dist(p(A)g, K_21) {member:.1e}, max |p(A)g - A^-1 g|/|g| {solve:.1e}"),
    )
}

fn random_subspace(rng: &mut ChaCha8Rng, s: &std::sync::Arc<AmbientSpace>, dim: usize) -> SubspaceBasis {
    let vs: Vec<CoeffVector> = (0..dim)
        .map(|_| CoeffVector::new(s, complex_gaussian(rng, s.dim(), 1).column(0).into_owned()).unwrap())
        .collect();
    SubspaceBasis::span(s, &vs, "random").unwrap()
}

fn c5_gap_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sine_err, mut sandwich_err) = (0.0f64, 0.0f64);
    let mut conventions = true;
    for _ in 0..200 {
        let d = rng.random_range(1..=8);
        let s = AmbientSpace::unilateral(d);
        let (p, q) = (rng.random_range(0..=d), rng.random_range(0..=d));
        let u = random_subspace(&mut rng, &s, p);
        let v = random_subspace(&mut rng, &s, q);
        let del = delta(&u, &v).unwrap();
        let sin_max = principal_angles(&u, &v).unwrap().last().map_or(0.0, |t| t.sin());
        sine_err = sine_err.max((del - sin_max).abs());
        let (gh, dh) = (gap_hat(&u, &v).unwrap(), dhat_metric(&u, &v).unwrap());
        sandwich_err = sandwich_err.max(gh - dh).max(dh - 2.0 * gh);
        let zero = SubspaceBasis::zero(&s);
        conventions &= delta(&zero, &v).unwrap() == 0.0;
        if !u.is_zero() {
            conventions &= d_metric(&u, &zero).unwrap() == 2.0;
        }
    }
    ensure(
        sine_err <= 1e-10 && sandwich_err <= 1e-10 && conventions,
        format!("max |delta - sin theta_max| = {sine_err:.1e}, worst sandwich excess = {sandwich_err:.1e}, zero conventions {conventions}"),
    )
}

fn c6_weak_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = AmbientSpace::unilateral(3);
    let spec = WeakNormSpec::canonical(&s).unwrap();
    let cfg = WeakGapConfig { exhaustive_max_dim: 0, ..WeakGapConfig::default() };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u = BallSet::subspace(random_subspace(&mut rng, &s, 1));
        let v = BallSet::subspace(random_subspace(&mut rng, &s, 1));
        let h = d_w(&u, &v, &spec, &cfg).unwrap().value;
        let b = brute_force_d_w(&u, &v, &spec, 1e-2).unwrap();
        worst = worst.max((h - b).abs());
    }
    ensure(worst <= 5e-3, format!("max |heuristic - brute force| = {worst:.2e} over 50 pairs"))
}

fn c7_rem78() -> Verdict {
    let r = scenario("REM78", &[("n_lo", 1.0), ("n_hi", 10.0)]);
    let (got, exact) = (column(&r, "d_w_Kn_0"), column(&r, "exact"));
    let worst = got.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(got.len() == 10 && worst <= 1e-6, format!("n = 1..10, max |d_w - 2^-n| = {worst:.1e}"))
}

fn c8_ex74() -> Verdict {
    let d = 20;
    let s = AmbientSpace::unilateral(d);
    let spec = WeakNormSpec::canonical(&s).unwrap();
    let rest: Vec<CoeffVector> = (2..=d as i64).map(|k| CoeffVector::basis(&s, k)).collect();
    let perp = BallSet::subspace(SubspaceBasis::span(&s, &rest, "e_1 perp").unwrap());
    let full = BallSet::subspace(SubspaceBasis::full(&s));
    let cfg = WeakGapConfig::default();
    // e_1 lies in the full ball, so its distance to the other ball bounds d_w below
    let witness = krylov_lab::weak::weak_dist_point_to_ball(&CoeffVector::basis(&s, 1), &perp, &spec, &cfg).unwrap();
    let lower = witness.lower().unwrap_or(witness.value);
    let search = d_w(&full, &perp, &spec, &cfg).unwrap().value;
    ensure(lower >= 0.5 - 1e-3, format!("e_1 witness {lower:.6}, ascent value {search:.6}"))
}

fn c9_lem62() -> Verdict {
    let r = scenario("LEM62", &[("n_lo", 3.0), ("n_hi", 12.0)]);
    let (got, exact, half) = (column(&r, "dist_e1"), column(&r, "dist_e1_exact"), column(&r, "dist_half"));
    let worst = got.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let floor = got.iter().cloned().fold(f64::INFINITY, f64::min);
    let last_half = *half.last().unwrap();
    ensure(
        got.len() == 10 && worst <= 1e-4 && floor >= 0.14 && last_half <= 2e-3,
        format!("max |dist - closed form| = {worst:.1e}, min dist {floor:.4}, half-vector distance at n=12 {last_half:.1e}"),
    )
}

fn c10_ex44() -> Verdict {
    let mut rows = Vec::new();
    let mut ok = true;
    for n in [2usize, 4, 8] {
        let dists: Vec<f64> = [64.0, 128.0, 256.0]
            .iter()
            .map(|&k| {
                let a = op("EX44_A", &[("K", k)]);
                let an = op("EX44_An", &[("K", k), ("n", n as f64)]);
                op_norm_dense(&a.minus(&an).unwrap())
            })
            .collect();
        let inv = 1.0 / n as f64;
        ok &= dists.iter().all(|&x| x <= inv + 1e-9);
        ok &= dists.windows(2).all(|w| w[1] >= w[0]);
        ok &= dists[2] >= EX44_CALIBRATION_C * inv;
        rows.push(format!("n={n}: {:.6}/{:.6}/{:.6}", dists[0], dists[1], dists[2]));
    }
    ensure(ok, format!("K=64/128/256 {}", rows.join(", ")))
}

fn c11_lem71() -> Verdict {
    let r = scenario("LEM71", &[("grid", 128.0), ("N_max", 16.0)]);
    let (ns, dh) = (column(&r, "N"), column(&r, "dhat_w"));
    let monotone = dh.windows(2).all(|w| w[1] <= w[0] + 1e-3);
    let mid = ns.iter().position(|&n| n == 8.0).map(|i| dh[i]).unwrap_or(f64::NAN);
    ensure(monotone && mid < 0.05, format!("dhat_w nonincreasing {monotone}, dhat_w at N=8 {mid:.4}"))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn c12_determinism() -> Verdict {
    let cfg = SuiteConfig::from_json(
        r#"{"scenarios": ["EX31", "EX32", "EX33", "EX34i", "LEM43", "LEM62", "LEM73", "PROP77", "REM78"], "seed": 11}"#,
    )
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_suite(&cfg, Some(a.path()), 1).unwrap();
    run_suite(&cfg, Some(b.path()), 4).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    ensure(fa == fb && fa.len() == 10, format!("{} CSV files, byte-identical across 1 and 4 jobs: {}", fa.len(), fa == fb))
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Verdict); 12] = [
        ("EX31 exactness", 5.0, c1_ex31),
        ("operator-norm oracle", 2.0, c2_norm_oracle),
        ("perturbation bound", 10.0, c3_perturbation_bound),
        ("polynomial inverse", 5.0, c4_poly_inverse),
        ("classical gap identities", 5.0, c5_gap_identities),
        ("weak-gap oracle agreement", 60.0, c6_weak_oracle),
        ("REM78 series", 10.0, c7_rem78),
        ("EX74 lower bound", 5.0, c8_ex74),
        ("LEM62 witness", 10.0, c9_lem62),
        ("EX44 lid convergence", 60.0, c10_ex44),
        ("LEM71 trend", 120.0, c11_lem71),
        ("suite determinism", f64::INFINITY, c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = run();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < *budget;
        let (pass, detail) = match verdict {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        let limit = if budget.is_finite() { format!(" (limit {budget} s)") } else { String::new() };
        println!("{:>2} {} {name}: {detail}; {secs:.2} s{limit}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
