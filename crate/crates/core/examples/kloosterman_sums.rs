//! Exact Kloosterman sums and the finite Fourier transform of the long-element
//! sum, with the counting path checked against the literal average.
//!
//!     cargo run --release --example kloosterman_sums

use gl3kuz::kloosterman::*;

fn main() -> gl3kuz::Result<()> {
    let t = s_tilde(&W4Params { n1: 1, n2: 2, m1: 3, d1: 2, d2: 6 })?;
    println!("S~(1, 2, 3; 2, 6)      = {t:.12}");
    let l = s_long(&W6Params { n1: 1, m2: 1, m1: 1, n2: 1, d1: 3, d2: 3 })?;
    println!("S(1, 1, 1, 1; 3, 3)    = {l:.12}");

    for d in [6, 10, 12] {
        let p = HatParams { r1: 1, s1: 1, r2: 1, s2: 1, x1: 0, y1: 0, x2: 0, y2: 0, d1: d, d2: d };
        println!("hat S at zero, D1 = D2 = {d:2}: {} (phi = {})", hat_s_count(&p)?, euler_phi(d as u64));
    }

    let p = HatParams { r1: 2, s1: -1, r2: 1, s2: 3, x1: 0, y1: 0, x2: 0, y2: 0, d1: 5, d2: 5 };
    println!("counting {} vs literal average {:.3e}", hat_s(&p)?, hat_s_literal(&p)?);

    let s = sweep_lemma1(8, &[1, 2, -1], &[1, 3], &[1, 2, 6]);
    println!("character-sum sweep, moduli <= 8: {} instances, {} violations", s.checked, s.violations);

    let mut rep = Lemma2Report::default();
    for d1 in 1..=6 {
        for d2 in 1..=6 {
            rep.merge(lemma2_ab(1, 2, -1, 1, d1, d2)?);
        }
    }
    println!("transform bounds, moduli <= 6: {} instances, {} violations", rep.part_a.checked, rep.violations());
    Ok(())
}
