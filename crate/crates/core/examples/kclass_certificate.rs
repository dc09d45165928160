//! K-class certificates: diag(1/k) + 1/n is certified in [1/(2n), 1 + 2/n],
//! its limit diag(1/k) is not, and a Chebyshev inverse reproduces A^-1 g
//! inside the Krylov space.

use krylov_lab::kclass::{check_kclass, chebyshev_inverse, krylov_via_polynomial, SpectralEnclosure};
use krylov_lab::operator::apply;
use krylov_lab::space::CoeffVector;
use krylov_lab::zoo::{build_example_operator, lid_enclosure, OpParams};
use krylov_lab::Result;

fn main() -> Result<()> {
    let p = OpParams::new().with("D", 64.0);
    for n in [1usize, 4, 16] {
        let t = 1.0 / n as f64;
        let enc = SpectralEnclosure::interval(0.5 * t, 1.0 + 2.0 * t);
        let an = build_example_operator("LEM43_An", &p.clone().with("n", n as f64))?;
        let a = build_example_operator("LEM43_A", &p)?;
        println!("n = {n:>2}: A_n {:?}, A {:?}", check_kclass(&an, &enc, 64).verdict, check_kclass(&a, &enc, 64).verdict);
    }

    let lid = OpParams::new().with("K", 32.0);
    let an = build_example_operator("EX44_An", &lid.clone().with("n", 4.0))?;
    let a = build_example_operator("EX44_A", &lid)?;
    println!("lid n = 4: A_n {:?}, A {:?}", check_kclass(&an, &lid_enclosure(4), 64).verdict, check_kclass(&a, &lid_enclosure(4), 64).verdict);

    let a = build_example_operator("LEM43_An", &p.clone().with("n", 1.0))?;
    let enc = SpectralEnclosure::interval(1.0, 2.0);
    let f = CoeffVector::from_real(a.space(), &vec![1.0; 64])?;
    let g = apply(&a, &f)?;
    let approx = krylov_via_polynomial(&a, &g, &enc, 20)?;
    println!("Chebyshev degree 20: ||p(A) g - f|| / ||f|| = {:.2e}", approx.sub(&f)?.norm() / f.norm());
    println!("scalar sup error on [1, 2]: {:.2e}", chebyshev_inverse(1.0, 2.0, 20).sup_bound);
    Ok(())
}
