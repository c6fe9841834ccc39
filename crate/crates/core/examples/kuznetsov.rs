//! Assembles the arithmetic side at the diagonal calibration point and shows
//! how the pieces compare.
//!
//!     cargo run --release --example kuznetsov

use gl3kuz::kuznetsov::*;
use gl3kuz::transforms::TestFunctionSpec;
use gl3kuz::{QuadratureSettings, SpectralPoint};

fn main() -> gl3kuz::Result<()> {
    let pt = SpectralPoint::new(40, 40.0)?;
    let req = KuznetsovRequest::new((1, 1), (1, 1), pt, TestFunctionSpec::new(40.0, 4.0)?)?;
    println!("caps: {:?}", req.caps);
    let side = arithmetic_side(&req, &QuadratureSettings::default())?;
    println!("delta  = {:.10e}", side.delta.value.re);
    for (name, b) in [("sigma4", &side.sigma4), ("sigma5", &side.sigma5), ("sigma6", &side.sigma6)] {
        println!("{name} = {:.4e} over {} terms (largest {:.3e})", b.partial_sum.value, b.terms.len(), b.max_term());
    }
    println!("total  = {:.10e}", side.total.value);
    Ok(())
}
