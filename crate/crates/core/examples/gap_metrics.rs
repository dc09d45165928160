//! Classical gaps between two planes of C^4 and their principal angles.

use krylov_lab::gap::{d_metric, delta, dhat_metric, gap_hat, principal_cosines};
use krylov_lab::space::{AmbientSpace, CoeffVector, SubspaceBasis};
use krylov_lab::Result;

fn main() -> Result<()> {
    let s = AmbientSpace::unilateral(4);
    let v = |xs: [f64; 4]| CoeffVector::from_real(&s, &xs);
    let t = 0.3f64;
    let u = SubspaceBasis::span(&s, &[v([1.0, 0.0, 0.0, 0.0])?, v([0.0, 1.0, 0.0, 0.0])?], "U")?;
    let w = SubspaceBasis::span(&s, &[v([t.cos(), 0.0, t.sin(), 0.0])?, v([0.0, 1.0, 0.0, 0.0])?], "W")?;
    let angles: Vec<f64> = principal_cosines(&u, &w)?.iter().map(|c| c.acos()).collect();
    println!("principal angles   {angles:.6?}");
    println!("delta(U, W)        {:.6}  (sin 0.3 = {:.6})", delta(&u, &w)?, t.sin());
    println!("gap_hat            {:.6}", gap_hat(&u, &w)?);
    println!("d(U, W)            {:.6}  (2 sin 0.15 = {:.6})", d_metric(&u, &w)?, 2.0 * (t / 2.0).sin());
    println!("dhat               {:.6}", dhat_metric(&u, &w)?);
    let line = SubspaceBasis::span(&s, &[v([1.0, 0.0, 0.0, 0.0])?], "L")?;
    println!("delta(L, U) = {:.1}, delta(U, L) = {:.1}", delta(&line, &u)?, delta(&u, &line)?);
    Ok(())
}
