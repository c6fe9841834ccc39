//! The archimedean kernels in both integral representations, the sign-pair
//! table and a Whittaker component.
//!
//!     cargo run --release --example kernels

use gl3kuz::kernels::*;
use gl3kuz::{QuadratureSettings, SpectralPoint, C64};

fn main() -> gl3kuz::Result<()> {
    let st = QuadratureSettings::default();
    let pt = SpectralPoint::new(6, 0.3)?;
    for y in [1.0, -5.0, 20.0] {
        let a = k_w4_mb(y, &pt, &st);
        let b = k_w4_bessel(y, &pt, &st);
        println!("K_w4({y:5}) MB {:.10}  Bessel {:.10}  |diff| {:.1e}", a.value, b.value, (a.value - b.value).norm());
    }

    let pt = SpectralPoint::new(5, 0.2)?;
    let a = k_w6_mb(-3.0, 4.0, &pt, &st);
    let b = k_w6_bessel(-3.0, 4.0, &pt, &st);
    println!("K_w6(-3, 4) MB {:.10}  Bessel {:.10}", a.value, b.value);
    println!("K_w6(2, 3) = {} (vanishing quadrant)", k_w6(2.0, 3.0, &pt, &KernelSettings::default())?.value);

    let s = C64::new(0.3, 7.0);
    let total: C64 = SignPair::ALL.iter().map(|&e| g_epsilon(e, s, -s, &pt)).sum::<gl3kuz::Result<C64>>()?;
    for e in SignPair::ALL {
        println!("G^{}(s, -s) = {:.6e}", e.label(), g_epsilon(e, s, -s, &pt)?);
    }
    println!("sum over sign pairs = {total:.2e}");

    let w = whittaker_w(0, 1, 1.0, 1.0, &SpectralPoint::new(4, 0.1)?, &st)?;
    println!("W_(+,0)(1, 1; d = 4) = {:.10}", w.value);
    Ok(())
}
