//! Weak distances in l2(1..16): the lines span{e_1 + e_n} approach each other
//! in the weak gap, but e_1 stays away from all of their unit balls.

use krylov_lab::space::{AmbientSpace, CoeffVector, SubspaceBasis, WeakNormSpec};
use krylov_lab::weak::{dhat_w, weak_dist_point_to_ball, BallSet, WeakGapConfig};
use krylov_lab::Result;

fn main() -> Result<()> {
    let s = AmbientSpace::unilateral(16);
    let spec = WeakNormSpec::canonical(&s)?;
    let cfg = WeakGapConfig::default();
    let e1 = CoeffVector::basis(&s, 1);
    let ball = |n: i64| -> Result<BallSet> {
        let u = SubspaceBasis::span(&s, &[e1.add(&CoeffVector::basis(&s, n))?], format!("U_{n}"))?;
        Ok(BallSet::subspace(u))
    };
    println!("{:>3} {:>12} {:>12} {:>12} {:>8}", "n", "dist(e1)", "dist(e1/2)", "gap(n,n+1)", "method");
    for n in 3..=12 {
        let b = ball(n)?;
        let far = weak_dist_point_to_ball(&e1, &b, &spec, &cfg)?;
        let near = weak_dist_point_to_ball(&e1.scale_re(0.5), &b, &spec, &cfg)?;
        let gap = dhat_w(&b, &ball(n + 1)?, &spec, &cfg)?;
        println!("{n:>3} {:>12.6} {:>12.2e} {:>12.2e} {:>8?}", far.value, near.value, gap.value, gap.method);
    }
    Ok(())
}
