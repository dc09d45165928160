//! Krylov solvability on three finite sections: the weighted shift of
//! Example 3.1 (never solvable), its wrapped truncation (solvable once the
//! cycle closes) and a diagonal operator with spectrum in [1, 2].

use krylov_lab::krylov::{solvability_verdict, SolvabilityConfig};
use krylov_lab::operator::apply;
use krylov_lab::space::CoeffVector;
use krylov_lab::zoo::{build_example_operator, OpParams};
use krylov_lab::Result;

fn main() -> Result<()> {
    let cfg = SolvabilityConfig { n_max: 12, ..SolvabilityConfig::default() };
    let p = OpParams::new().with("D", 100.0);
    for (id, params) in [("EX31_R", p.clone()), ("EX31_Rn", p.clone().with("n", 6.0))] {
        let a = build_example_operator(id, &params)?;
        let s = a.space().clone();
        let r = solvability_verdict(&a, &CoeffVector::basis(&s, 2), &CoeffVector::basis(&s, 1), &cfg)?;
        let profile: Vec<String> = r.rel_dist_profile.iter().map(|(n, v)| format!("{n}:{v:.0e}")).collect();
        println!("{id:<8} {:?}, effective dim {}, profile {}", r.verdict, r.effective_dim, profile.join(" "));
    }

    // 1/k + 1 on the diagonal: bounded away from 0, so every solution is a Krylov solution
    let a = build_example_operator("LEM43_An", &OpParams::new().with("D", 40.0).with("n", 1.0))?;
    let f = CoeffVector::from_real(a.space(), &(1..=40).map(|k| 1.0 / k as f64).collect::<Vec<_>>())?;
    let g = apply(&a, &f)?;
    let r = solvability_verdict(&a, &g, &f, &SolvabilityConfig { n_max: 20, ..cfg })?;
    println!("LEM43_An {:?}, last error {:.2e}", r.verdict, r.rel_dist_profile.last().unwrap().1);
    Ok(())
}
