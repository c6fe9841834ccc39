//! The stationary-phase surface: a stationary point, derivatives near it and
//! the sampled region measure against the measure bounds.
//!
//!     cargo run --release --example phase

use gl3kuz::phase::*;

fn main() -> gl3kuz::Result<()> {
    let (p, pp) = stationary_point(50, 50.0, -150.0)?;
    println!("stationary point ({:.4}, {:.4}) with ups = ({:.4e}, {:.4e})", p.t1, p.t2, pp.ups1, pp.ups2);
    println!("g = {:.6}, gradient ({:.1e}, {:.1e}, {:.1e})", phase_g(&p, &pp)?, phase_g1(&p, &pp)?, phase_g2(&p, &pp)?, phase_h(&p, &pp)?);
    println!("g11 = {:.4e}, g22 = {:.4e}, g12 = {:.4e}", phase_g1_t1(&p, &pp)?, phase_g2_t2(&p, &pp)?, phase_g1_t2(&p, &pp)?);

    for (i, (rs, pp)) in calibration_regions(50)?.iter().enumerate() {
        let rep = sublemma_check(rs, pp, 128, 10.0)?;
        let ratios: Vec<String> = rep.bounds.iter().map(|b| format!("{}: {:.3}", b.name, b.ratio)).collect();
        println!("region {i}: measure {:.4e}, {}", rep.sample.measure, ratios.join(", "));
    }

    let e = CaseExponents::chosen(2.0 / 595.0);
    println!("exponent constraints at b = 2/595: {:?}", e.violations());
    Ok(())
}
