//! Hecke eigenvalues from Satake parameters, the Hecke relation, the
//! amplifier and the conductor benchmark.
//!
//!     cargo run --release --example lfunction

use gl3kuz::lfunction::*;
use gl3kuz::{SpectralPoint, C64};

fn main() -> gl3kuz::Result<()> {
    let sp = SatakeParams::unitary(0.4, -1.3);
    for (a, b) in [(1, 2), (4, 6), (12, 18)] {
        println!("A(1, {a}) conj A(1, {b}) = {:.10}", hecke_multiplicativity_check(&sp, a, b)?.lhs);
    }
    let g = SatakeParams::from_pair(C64::new(1.3, 0.2), C64::new(-0.4, 0.9));
    println!("Hecke relation residual (non-unitary) = {:.2e}", hecke_relation_residual(&g).norm());

    let eig = |_p: u64, j: u32| hecke_eigenvalue(&sp, 0, j);
    let amp = AmplifierSpec::aligned(30, &eig);
    println!("aligned amplifier over {} primes = {:.4}", amp.primes.len(), amplifier_value(&amp, &eig)?);

    for (d, rho) in [(10, 10.0), (40, 40.0), (160, 160.0)] {
        let pt = SpectralPoint::new(d, rho)?;
        let c = convexity_benchmark(&pt, 0.0);
        println!("d = {d:3}: conductor {:.4e}, convexity {:.4e}, growth exponent {:.3}", analytic_conductor(&pt), c.conductor_based, c.exponent);
    }
    Ok(())
}
