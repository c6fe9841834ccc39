//! Runs the invariant suites and prints one line per check.
//!
//! `cargo run --release --example verify_suites -- [quick] [suite...]`

use gl3kuz::verify::{run_suite_with, Check, Suite, VerifyOptions};

fn main() {
    let mut opts = VerifyOptions::default();
    let mut suites = Vec::new();
    for a in std::env::args().skip(1) {
        if a == "quick" {
            opts.quick = true;
        } else {
            suites.push(a.parse::<Suite>().expect("suite name"));
        }
    }
    if suites.is_empty() {
        suites = Suite::ALL.to_vec();
    }
    let mut print = |c: &Check| {
        let tag = c.criterion.map(|k| format!("#{k}")).unwrap_or_else(|| "extra".into());
        println!("{:5} {:<5} {}/{} ({:.1}s): {}", if c.pass { "PASS" } else { "FAIL" }, tag, c.suite, c.name, c.wall_time, c.detail);
    };
    for s in suites {
        run_suite_with(s, &opts, &mut print);
    }
}
