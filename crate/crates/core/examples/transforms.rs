//! Spectral transforms of the test function and the dual-variable transform
//! of the bump-weighted kernel.
//!
//!     cargo run --release --example transforms

use gl3kuz::quad::BumpSpec;
use gl3kuz::transforms::*;
use gl3kuz::{QuadratureSettings, SpectralPoint};

fn main() -> gl3kuz::Result<()> {
    let st = QuadratureSettings::default();
    let d = 40;
    let f = TestFunctionSpec::new(d as f64, 4.0)?;
    // the w4 transform is negligible until y passes a wall near d^3
    for e in [0, 2, 4, 5, 6] {
        let y = 10f64.powi(e);
        let v = phi_w4(y, d, &f, &st)?;
        println!("Phi_w4(1e{e}) = {:.3e}", v.value.norm());
    }
    let v = phi_w6(-2000.0, 3000.0, d, &f, &st)?;
    println!("Phi_w6(-2000, 3000) = {:.6e}", v.value);

    let pt = SpectralPoint::new(20, 20.0)?;
    let w = BumpSpec::default();
    for xi in [-40.0, -8000.0, 8000.0] {
        let k = ktilde(xi, 0.0, 0.0, &pt, &w, &st)?;
        println!("K~({xi}, 0, 0) = {:.6e} (err {:.1e})", k.value, k.err_est);
    }
    Ok(())
}
