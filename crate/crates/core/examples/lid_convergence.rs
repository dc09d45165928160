//! Convergence of the lifted-lid Laurent operators: `||A - A_n||` on growing
//! finite sections, by dense SVD and by power iteration.
//!
//! The smallest `n * ||A - A_n||` at `K = 256` is the calibration constant
//! stored in the operator registry.

use krylov_lab::operator::{op_norm_dense, op_norm_est};
use krylov_lab::zoo::{build_example_operator, OpParams, EX44_CALIBRATION_C};
use krylov_lab::Error;

fn main() -> Result<(), Error> {
    println!("{:>5} {:>3} {:>16} {:>16} {:>10}", "K", "n", "dense", "power", "n*dense");
    let mut c = f64::INFINITY;
    for k in [64usize, 128, 256] {
        for n in [2usize, 4, 8] {
            let p = OpParams::new().with("K", k as f64);
            let a = build_example_operator("EX44_A", &p)?;
            let an = build_example_operator("EX44_An", &p.clone().with("n", n as f64))?;
            let diff = a.minus(&an)?;
            let dense = op_norm_dense(&diff);
            let power = match op_norm_est(&diff, 20_000, 1e-13) {
                Ok(v) => v,
                Err(Error::NoConvergence { estimate, .. }) => estimate,
                Err(e) => return Err(e),
            };
            println!("{k:>5} {n:>3} {dense:>16.12} {power:>16.12} {:>10.6}", n as f64 * dense);
            if k == 256 {
                c = c.min(n as f64 * dense);
            }
        }
    }
    println!("min n*||A - A_n|| at K = 256: {c:.6} (registry constant {EX44_CALIBRATION_C})");
    Ok(())
}
