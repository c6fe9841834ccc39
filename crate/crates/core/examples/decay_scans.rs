//! Runs the desk-scale decay scans and prints one summary line each.
//!
//!     cargo run --release --example decay_scans -- 3 4 5c      # selected lemmas at T = 40
//!     cargo run --release --example decay_scans -- --t 20 6e
//!     cargo run --release --example decay_scans -- --cancellation

use gl3kuz::decay::{cancellation_scan, decay_scan, LemmaId, ScanGrid};
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut t = 40u32;
    let mut lemmas = Vec::new();
    let mut cancellation = false;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--t" => t = args.next().ok_or("--t needs a value")?.parse()?,
            "--cancellation" => cancellation = true,
            id => lemmas.push(id.parse::<LemmaId>()?),
        }
    }
    if lemmas.is_empty() && !cancellation {
        lemmas = LemmaId::ALL.to_vec();
    }
    let grid = ScanGrid::default();
    for l in lemmas {
        let now = Instant::now();
        let rep = decay_scan(l, t, &grid)?;
        println!("{}  ({:.1?})", rep.summary(), now.elapsed());
    }
    if cancellation {
        let now = Instant::now();
        let c = cancellation_scan(30, 27000.0)?;
        println!(
            "cancellation T=30 |Ξ|=T³: |Σ|/max term = {:.3e} (D ≤ 50 cut: {:.3e}), {} terms, {}  ({:.1?})",
            c.ratio,
            c.ratio_d50,
            c.terms_summed,
            if c.pass { "PASS" } else { "FAIL" },
            now.elapsed()
        );
    }
    Ok(())
}
