//! Invariant suites behind `gl3kuz verify`. Every check carries the
//! acceptance criterion it feeds (or none for supplementary checks), a pass
//! flag and the measured quantities that decided it.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decay::{cancellation_scan, decay_scan, LemmaId, ScanGrid};
use crate::kernels::*;
use crate::kloosterman::*;
use crate::kuznetsov::*;
use crate::lfunction::*;
use crate::phase::*;
use crate::quad::{integrate_contour, Contour};
use crate::special::*;
use crate::transforms::TestFunctionSpec;
use crate::{Error, QuadratureSettings, Result, C64};

pub const SCHEMA_VERSION: u32 = 1;

/// Short names of the acceptance criteria, indexed from 1.
pub const CRITERIA: [&str; 11] = [
    "Kloosterman transform: counting path equals literal average",
    "Kloosterman lemma suites",
    "dual-representation kernel agreement",
    "cancellation identities",
    "special-function pairs",
    "Hecke algebra",
    "decay-wall scans",
    "phase suite",
    "region measure envelope",
    "Kuznetsov assembly stability",
    "CLI contract",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub criterion: Option<u8>,
    pub pass: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Kloosterman,
    Special,
    Kernels,
    Cancellation,
    Hecke,
    Decay,
    Phase,
    Region,
    Kuznetsov,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Kloosterman,
        Suite::Special,
        Suite::Kernels,
        Suite::Cancellation,
        Suite::Hecke,
        Suite::Decay,
        Suite::Phase,
        Suite::Region,
        Suite::Kuznetsov,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Kloosterman => "kloosterman",
            Suite::Special => "special",
            Suite::Kernels => "kernels",
            Suite::Cancellation => "cancellation",
            Suite::Hecke => "hecke",
            Suite::Decay => "decay",
            Suite::Phase => "phase",
            Suite::Region => "region",
            Suite::Kuznetsov => "kuznetsov",
        }
    }

    /// Per-suite stream so a suite run alone draws the same points as in `all`.
    fn rng(&self, seed: u64) -> ChaCha8Rng {
        let tag = Suite::ALL.iter().position(|s| s == self).unwrap() as u64;
        ChaCha8Rng::seed_from_u64(seed ^ (tag + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.as_str()).collect();
            Error::Invalid(format!("unknown suite {s:?}; expected all or one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Reduced grids; the whole set finishes in well under a minute.
    pub quick: bool,
    /// Largest modulus of the exhaustive first-lemma sweep.
    pub max_modulus: i64,
    /// `T` of the decay scans.
    pub t: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, quick: false, max_modulus: 12, t: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub options: VerifyOptions,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn new(options: VerifyOptions, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { schema_version: SCHEMA_VERSION, options, pass, checks }
    }

    /// `None` when no check feeds criterion `c`.
    pub fn criterion_pass(&self, c: u8) -> Option<bool> {
        let mut it = self.checks.iter().filter(|k| k.criterion == Some(c)).peekable();
        it.peek()?;
        Some(it.all(|k| k.pass))
    }

    /// Zeroes the wall times, leaving only seed-determined content.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.checks.iter_mut().for_each(|c| c.wall_time = 0.0);
        r
    }
}

type Outcome = (bool, String, Vec<(&'static str, f64)>);

struct Runner<'a> {
    suite: Suite,
    out: Vec<Check>,
    progress: &'a mut dyn FnMut(&Check),
}

impl Runner<'_> {
    fn run(&mut self, name: &str, criterion: Option<u8>, f: impl FnOnce() -> Result<Outcome>) {
        let t0 = Instant::now();
        let (pass, detail, metrics) = match f() {
            Ok(o) => o,
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        let check = Check {
            suite: self.suite.to_string(),
            name: name.into(),
            criterion,
            pass,
            detail,
            metrics: metrics.into_iter().map(|(k, v)| (k.to_string(), if v.is_finite() { v } else { f64::MAX })).collect(),
            wall_time: t0.elapsed().as_secs_f64(),
        };
        (self.progress)(&check);
        self.out.push(check);
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<Check> {
    run_suite_with(suite, opts, &mut |_| {})
}

/// As [`run_suite`], calling `progress` after every check.
pub fn run_suite_with(suite: Suite, opts: &VerifyOptions, progress: &mut dyn FnMut(&Check)) -> Vec<Check> {
    let mut r = Runner { suite, out: Vec::new(), progress };
    let mut rng = suite.rng(opts.seed);
    match suite {
        Suite::Kloosterman => kloosterman_suite(&mut r, &mut rng, opts),
        Suite::Special => special_suite(&mut r, opts),
        Suite::Kernels => kernels_suite(&mut r, opts),
        Suite::Cancellation => cancellation_suite(&mut r, &mut rng, opts),
        Suite::Hecke => hecke_suite(&mut r, &mut rng, opts),
        Suite::Decay => decay_suite(&mut r, opts),
        Suite::Phase => phase_suite(&mut r, &mut rng, opts),
        Suite::Region => region_suite(&mut r, opts),
        Suite::Kuznetsov => kuznetsov_suite(&mut r, opts),
    }
    r.out
}

pub fn verify_all(opts: &VerifyOptions) -> VerifyReport {
    verify_all_with(opts, &mut |_| {})
}

pub fn verify_all_with(opts: &VerifyOptions, progress: &mut dyn FnMut(&Check)) -> VerifyReport {
    let checks = Suite::ALL.iter().flat_map(|&s| run_suite_with(s, opts, progress)).collect();
    VerifyReport::new(*opts, checks)
}

trait NanMax {
    fn nmax(self, other: f64) -> f64;
}

impl NanMax for f64 {
    /// `max` that lets a NaN through instead of discarding it.
    fn nmax(self, other: f64) -> f64 {
        if self.is_nan() || other.is_nan() {
            f64::NAN
        } else {
            self.max(other)
        }
    }
}

fn nonzero(rng: &mut ChaCha8Rng, k: i64) -> i64 {
    let v = rng.gen_range(1..=k);
    if rng.gen() {
        v
    } else {
        -v
    }
}

fn sweep_outcome(s: &SweepSummary) -> Outcome {
    let detail = match &s.first_violation {
        Some(v) => format!("{} of {} failed; first: {v}", s.violations, s.checked),
        None => format!("{} instances, no violations", s.checked),
    };
    (s.violations == 0 && s.checked > 0, detail, vec![("checked", s.checked as f64), ("violations", s.violations as f64)])
}

fn kloosterman_suite(r: &mut Runner, rng: &mut ChaCha8Rng, o: &VerifyOptions) {
    let (dmax, per_pair) = if o.quick { (6, 2) } else { (10, 5) };
    let tuples: Vec<HatParams> = (1..=dmax)
        .flat_map(|d1| (1..=dmax).map(move |d2| (d1, d2)))
        .flat_map(|(d1, d2)| (0..per_pair).map(move |_| (d1, d2)))
        .map(|(d1, d2)| HatParams {
            r1: nonzero(rng, 4),
            s1: nonzero(rng, 4),
            r2: nonzero(rng, 4),
            s2: nonzero(rng, 4),
            x1: rng.gen_range(0..d1),
            y1: rng.gen_range(0..d1),
            x2: rng.gen_range(0..d2),
            y2: rng.gen_range(0..d2),
            d1,
            d2,
        })
        .collect();
    r.run("hat_counting_vs_literal", Some(1), || {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        let mut first = None;
        for p in &tuples {
            let dev = (hat_s(p)? - hat_s_literal(p)?).norm();
            if dev > 1e-9 && first.is_none() {
                first = Some(format!("{p:?}"));
            }
            worst = worst.nmax(dev);
        }
        let secs = t0.elapsed().as_secs_f64();
        let ok = first.is_none() && secs < 120.0;
        // timing stays out of detail and metrics so seeded reports compare equal
        let detail = match first {
            Some(p) => format!("deviation above 1e-9 at {p}"),
            None if secs >= 120.0 => "exceeded the 120 s budget".to_string(),
            None => format!("{} tuples over D1, D2 <= {dmax}, max deviation {worst:.2e}", tuples.len()),
        };
        Ok((ok, detail, vec![("tuples", tuples.len() as f64), ("max_deviation", worst)]))
    });

    let m1 = if o.quick { o.max_modulus.min(8) } else { o.max_modulus };
    r.run("lemma1_exhaustive", Some(2), || {
        let s = sweep_lemma1(m1, &[1, 2, 3, 4, 6, -1], &[1, 2, 3, 4, 6, -1], &[1, 2, 3, 5, 6, 12, -4]);
        let (ok, detail, mut m) = sweep_outcome(&s);
        m.push(("max_modulus", m1 as f64));
        m.push(("alternative_reading_failures", s.alternative_reading_failures as f64));
        Ok((ok, format!("moduli <= {m1}: {detail}"), m))
    });

    let m2 = if o.quick { 5 } else { 8 };
    r.run("lemma2_bounds_exhaustive", Some(2), || {
        let mut rep = Lemma2Report::default();
        let rs = [1i64, -1, 2, -2];
        for d1 in 1..=m2 {
            for d2 in 1..=m2 {
                for &a in &rs {
                    for &b in &rs {
                        for &c in &rs {
                            for &d in &rs {
                                rep.merge(lemma2_ab(a, b, c, d, d1, d2)?);
                            }
                        }
                    }
                }
            }
        }
        let mut s = rep.part_a.clone();
        s.merge(rep.part_b.clone());
        let (ok, detail, m) = sweep_outcome(&s);
        Ok((ok, format!("moduli <= {m2}: {detail}"), m))
    });

    let samples = if o.quick { 10 } else { 60 };
    let draws: Vec<_> = (0..samples)
        .map(|_| {
            let d = (rng.gen_range(1..=24i64), rng.gen_range(1..=24i64));
            (nonzero(rng, 6), nonzero(rng, 6), nonzero(rng, 6), nonzero(rng, 6), d.0, d.1)
        })
        .collect();
    r.run("lemma2_bounds_sampled", Some(2), || {
        let mut s = SweepSummary::default();
        for &(a, b, c, d, d1, d2) in &draws {
            let rep = lemma2_ab(a, b, c, d, d1, d2)?;
            s.merge(rep.part_a);
            s.merge(rep.part_b);
        }
        let (ok, detail, m) = sweep_outcome(&s);
        Ok((ok, format!("{samples} sampled multiplier/modulus draws, moduli <= 24: {detail}"), m))
    });

    r.run("lemma2_phi_identity", Some(2), || {
        let mut s = SweepSummary::default();
        for d1 in 1..=20 {
            for d2 in 1..=20 {
                for (a, b, c, d) in [(1, 1, 1, 1), (1, -1, 1, 1), (2, 3, 5, 7), (-1, 5, 3, -2)] {
                    s.merge(lemma2_c(a, b, c, d, d1, d2)?);
                }
            }
        }
        let (ok, detail, m) = sweep_outcome(&s);
        Ok((ok, format!("D1, D2 <= 20: {detail}"), m))
    });

    let md = if o.quick { 8 } else { 18 };
    r.run("lemma2_prime_support", Some(2), || {
        let mut s = SweepSummary::default();
        for l in [2i64, 3] {
            let pw = [1, l, l * l, l * l * l];
            for d1 in 1..=md {
                for d2 in 1..=md {
                    for &a in &pw {
                        for &b in &pw {
                            for &c in &pw {
                                for &e in &pw {
                                    s.merge(lemma2_d(l, a, b, c, e, d1, d2)?);
                                }
                            }
                        }
                    }
                }
            }
        }
        let (ok, detail, m) = sweep_outcome(&s);
        Ok((ok, format!("l in {{2, 3}}, moduli <= {md}: {detail}"), m))
    });
}

fn special_suite(r: &mut Runner, o: &VerifyOptions) {
    r.run("bessel_bound_grid", Some(5), || {
        let mut worst = f64::NEG_INFINITY;
        let mut at = (0, 0.0);
        let mut n = 0;
        for d in 1..=60u32 {
            for k in 1..=4000 {
                let y = 0.05 * k as f64;
                let excess = bessel_j(d, y).abs() - (2.0 * y / d as f64).powi(d as i32).min(1.0);
                if excess > worst {
                    worst = excess;
                    at = (d, y);
                }
                n += 1;
            }
        }
        Ok((
            worst <= 1e-12,
            format!("{n} points d in [1, 60], y in (0, 200]; largest excess {worst:.2e} at d={}, y={}", at.0, at.1),
            vec![("points", n as f64), ("max_excess", worst)],
        ))
    });

    r.run("bessel_derivative_fd", Some(5), || {
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut n = 0;
        for d in 2..=40u32 {
            for k in 1..=100 {
                let y = 0.5 * k as f64;
                let fd = (bessel_j(d, y + h) - bessel_j(d, y - h)) / (2.0 * h);
                worst = worst.nmax((bessel_j_derivative(d, y)? - fd).abs());
                n += 1;
            }
        }
        Ok((worst <= 1e-6, format!("{n} points, max |exact - central difference| {worst:.2e}"), vec![("points", n as f64), ("max_deviation", worst)]))
    });

    let mut st = QuadratureSettings::default();
    st.max_height = 4000.0;
    let mellin: &[(f64, u32)] = if o.quick { &[(4.0, 8)] } else { &[(1.0, 4), (4.0, 4), (9.0, 4), (1.0, 8), (4.0, 8), (9.0, 8), (1.0, 16), (4.0, 16), (9.0, 16)] };
    r.run("mellin_bessel_reconstruction", Some(5), || {
        let mut worst = 0.0f64;
        for &(x, d) in mellin {
            // the vertical tail decays like |t|^{2c-1}; bending left of c speeds it up
            let far = 0.5 * (1.0 - d as f64) + 0.3;
            let path = Contour::bent(-0.3, 20.0, far, far, 3000.0);
            let v = integrate_contour(|s| q_ratio(d, s).unwrap_or_default() * (-s * x.ln()).exp(), &path, &st);
            worst = worst.nmax((v.value - bessel_j(d - 1, 2.0 * x.sqrt())).norm());
        }
        Ok((worst <= 1e-7, format!("{} (x, d) pairs, max deviation {worst:.2e}", mellin.len()), vec![("max_deviation", worst)]))
    });

    let pairs: &[(f64, f64)] = if o.quick { &[(1.0, 0.0)] } else { &[(1.0, 0.0), (2.0, 0.0), (5.0, 0.0), (1.0, 1.0), (2.0, 1.0), (5.0, 1.0)] };
    r.run("mellin_exponential_reconstruction", Some(5), || {
        let mut worst = 0.0f64;
        for &(x, rho) in pairs {
            let r3 = C64::new(0.0, 3.0 * rho);
            for sign in [1.0, -1.0] {
                // decays on one side only; bend the other half of the path
                let path = if sign > 0.0 { Contour::bent(0.25, 20.0, -3.5, 0.25, 3000.0) } else { Contour::bent(0.25, 20.0, 0.25, -3.5, 3000.0) };
                let i = C64::new(0.0, sign);
                let v = integrate_contour(
                    |s| {
                        (log_gamma(s + r3).unwrap_or_default() - (r3 + s) * 2f64.ln() + i * PI * (r3 + s) / 2.0 - s * x.ln()).exp()
                    },
                    &path,
                    &st,
                );
                let want = (i * 2.0 * x).exp() * (r3 * x.ln()).exp();
                worst = worst.nmax((v.value - want).norm());
            }
        }
        Ok((worst <= 1e-7, format!("{} (x, rho) pairs, both signs, max deviation {worst:.2e}", pairs.len()), vec![("max_deviation", worst)]))
    });
}

fn kernels_suite(r: &mut Runner, o: &VerifyOptions) {
    let st = QuadratureSettings::default();
    let (ds, rhos): (&[u32], &[f64]) = if o.quick { (&[4], &[0.5]) } else { (&[4, 9, 20], &[0.0, 0.5, 2.0]) };
    let ys: &[f64] = if o.quick { &[1.0, -5.0] } else { &[1.0, -1.0, 5.0, -5.0, 20.0, -20.0, 100.0, -100.0] };
    let agree = |a: &crate::QuadResult, b: &crate::QuadResult| {
        let dev = (a.value - b.value).norm();
        (dev / b.value.norm().max(1e-300), dev <= 1e-6 * b.value.norm() || dev <= a.err_est + b.err_est)
    };
    r.run("k_w4_representations", Some(3), || {
        let (mut worst, mut bad, mut n) = (0.0f64, Vec::new(), 0);
        for &d in ds {
            for &rho in rhos {
                let pt = SpectralPoint::new(d, rho)?;
                for &y in ys {
                    let (rel, ok) = agree(&k_w4_mb(y, &pt, &st), &k_w4_bessel(y, &pt, &st));
                    worst = worst.nmax(rel);
                    n += 1;
                    if !ok {
                        bad.push(format!("(y={y}, d={d}, rho={rho}) rel={rel:.2e}"));
                    }
                }
            }
        }
        Ok((bad.is_empty(), format!("{n} points, max relative deviation {worst:.2e}; failures: {bad:?}"), vec![("points", n as f64), ("max_relative", worst), ("failures", bad.len() as f64)]))
    });
    let vals: &[f64] = if o.quick { &[-1.0, 10.0] } else { &[-1.0, -10.0, 1.0, 10.0] };
    r.run("k_w6_representations", Some(3), || {
        let (mut worst, mut bad, mut n) = (0.0f64, Vec::new(), 0);
        for &d in ds {
            for &rho in rhos {
                let pt = SpectralPoint::new(d, rho)?;
                for &y1 in vals {
                    for &y2 in vals {
                        if y1 > 0.0 && y2 > 0.0 {
                            continue;
                        }
                        let (rel, ok) = agree(&k_w6_mb(y1, y2, &pt, &st), &k_w6_bessel(y1, y2, &pt, &st));
                        worst = worst.nmax(rel);
                        n += 1;
                        if !ok {
                            bad.push(format!("(y=({y1},{y2}), d={d}, rho={rho}) rel={rel:.2e}"));
                        }
                    }
                }
            }
        }
        Ok((bad.is_empty(), format!("{n} points, max relative deviation {worst:.2e}; failures: {bad:?}"), vec![("points", n as f64), ("max_relative", worst), ("failures", bad.len() as f64)]))
    });
    r.run("k_w6_plus_plus_vanishes", None, || {
        let pt = SpectralPoint::new(5, 0.2)?;
        let v = k_w6(2.0, 3.0, &pt, &KernelSettings::default())?;
        Ok((v.value == C64::new(0.0, 0.0) && v.nodes_used == 0, "exact zero without quadrature".into(), vec![]))
    });
    r.run("whittaker_contour_shift", None, || {
        let pt = SpectralPoint::new(4, 0.1)?;
        let a = whittaker_w_at(0, 1, 1.0, 1.0, &pt, (2.0, 2.0), &st)?;
        let b = whittaker_w_at(0, 1, 1.0, 1.0, &pt, (3.0, 3.0), &st)?;
        let rel = (a.value - b.value).norm() / a.value.norm();
        Ok((rel <= 1e-7, format!("c = (2,2) vs (3,3): relative {rel:.2e}"), vec![("relative", rel)]))
    });
}

fn cancellation_suite(r: &mut Runner, rng: &mut ChaCha8Rng, o: &VerifyOptions) {
    let draws: Vec<(C64, u32, f64)> = (0..100)
        .map(|_| (C64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-30.0..30.0)), rng.gen_range(3..=30u32), rng.gen_range(0.0..3.0)))
        .collect();
    r.run("g_epsilon_sign_sum", Some(4), || {
        let mut worst = 0.0f64;
        for &(s, d, rho) in &draws {
            let pt = SpectralPoint::new(d, rho)?;
            let terms: Vec<C64> = SignPair::ALL.iter().map(|&e| g_epsilon(e, s, -s, &pt)).collect::<Result<_>>()?;
            let scale = terms.iter().map(|z| z.norm()).fold(1.0, f64::max);
            worst = worst.nmax(terms.iter().sum::<C64>().norm() / scale);
        }
        Ok((worst <= 1e-12, format!("100 random s, max |sum| / max(1, largest term) = {worst:.2e}"), vec![("max_relative", worst)]))
    });
    r.run("beta_table_pairwise_cancellation", Some(4), || {
        let mut worst = 0.0f64;
        let (pm, mp, mm) = (SignPair::new(1, -1)?, SignPair::new(-1, 1)?, SignPair::new(-1, -1)?);
        for &(s, _, rho) in &draws {
            let rr = C64::new(0.0, rho);
            let x = b_w6(pm, s - rr, -s + rr, rho)?;
            let y = b_w6(mp, s - rr, -s + rr, rho)?;
            let z = b_w6(mm, s - rr, -s + rr, rho)?;
            worst = worst.nmax((x + y).norm() / x.norm().max(1.0)).nmax(z.norm());
        }
        Ok((worst <= 1e-12, format!("100 random s, max residual {worst:.2e}"), vec![("max_relative", worst)]))
    });
    if o.quick {
        return;
    }
    r.run("divisor_weighted_sum_t30", Some(4), || {
        let rep = cancellation_scan(30, 27_000.0)?;
        Ok((
            rep.pass,
            format!(
                "|sum| / largest term = {:.3e} over {} terms (largest at D = {}); D <= 50 truncation ratio {:.3e}",
                rep.ratio, rep.terms_summed, rep.largest_term_d, rep.ratio_d50
            ),
            vec![("ratio", rep.ratio), ("ratio_d50", rep.ratio_d50), ("terms", rep.terms_summed as f64)],
        ))
    });
}

fn hecke_suite(r: &mut Runner, rng: &mut ChaCha8Rng, o: &VerifyOptions) {
    let n = if o.quick { 100 } else { 1000 };
    let triples: Vec<(SatakeParams, SatakeParams, u64, u64)> = (0..n)
        .map(|_| {
            let z = |rng: &mut ChaCha8Rng| C64::from_polar(rng.gen_range(-1.0f64..1.0).exp(), rng.gen_range(-PI..PI));
            let general = SatakeParams::from_pair(z(rng), z(rng));
            let unitary = SatakeParams::unitary(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            (general, unitary, rng.gen_range(1..=500), rng.gen_range(1..=500))
        })
        .collect();
    r.run("hecke_relation", Some(6), || {
        let mut worst = 0.0f64;
        for (sp, ..) in &triples {
            let a = |k1, k2| hecke_eigenvalue(sp, k1, k2);
            let scale = (a(0, 1) * a(0, 2)).norm() + a(0, 3).norm() + (a(0, 1) * a(1, 0)).norm() + 1.0;
            worst = worst.nmax(hecke_relation_residual(sp).norm() / scale);
        }
        Ok((worst <= 1e-10, format!("{n} triples, max relative residual {worst:.2e}"), vec![("max_relative", worst)]))
    });
    r.run("hecke_multiplicativity", Some(6), || {
        let mut worst = 0.0f64;
        let mut fails = 0;
        for (_, sp, a, b) in &triples {
            let rep = hecke_multiplicativity_check(sp, *a, *b)?;
            worst = worst.nmax(rep.residual / rep.rhs.norm().max(1.0));
            fails += !rep.pass as usize;
        }
        Ok((fails == 0, format!("{n} unitary triples with n, m <= 500, max relative residual {worst:.2e}"), vec![("max_relative", worst), ("failures", fails as f64)]))
    });
    r.run("amplifier_self_alignment", None, || {
        let mut worst = f64::INFINITY;
        for (_, sp, ..) in triples.iter().take(100) {
            let eig = |_p: u64, j: u32| hecke_eigenvalue(sp, 0, j);
            let spec = AmplifierSpec::aligned(20, &eig);
            let k = spec.primes.len() as f64;
            worst = worst.min(amplifier_value(&spec, &eig)? / (k * k));
        }
        Ok((worst >= 0.05, format!("min amplifier / L^2 proxy = {worst:.3}"), vec![("min_ratio", worst)]))
    });
}

fn decay_suite(r: &mut Runner, o: &VerifyOptions) {
    let grid = ScanGrid::default();
    let mut plan: Vec<(LemmaId, u32, Option<u8>)> = vec![(LemmaId::L3, o.t, Some(7)), (LemmaId::L4, o.t, Some(7))];
    if !o.quick {
        plan.extend([
            (LemmaId::L5a, o.t, Some(7)),
            (LemmaId::L6a, o.t, Some(7)),
            (LemmaId::L5c, o.t, Some(7)),
            (LemmaId::L6c, o.t, Some(7)),
            (LemmaId::L5b, o.t, None),
            (LemmaId::L6b, 20, None),
            (LemmaId::L6e, 20, None),
        ]);
    }
    for (lemma, t, crit) in plan {
        r.run(&format!("lemma{lemma}_t{t}"), crit, || {
            let rep = decay_scan(lemma, t, &grid)?;
            let mut m: Vec<(&'static str, f64)> = vec![("nonconverged", rep.nonconverged as f64)];
            for key in ["ratio", "max_ratio_below_wall", "slope", "ratio_with_error"] {
                if let Some(&v) = rep.stats.get(key) {
                    m.push((key, v));
                }
            }
            Ok((rep.pass, rep.summary(), m))
        });
    }
}

fn phase_points(rng: &mut ChaCha8Rng, n: usize, pp: &PhaseParams) -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = PhasePoint::new(rng.gen_range(-400.0..400.0), rng.gen_range(-400.0..400.0));
        let rr = pp.rho;
        if [p.t1, p.t1 + 2.0 * rr, p.t2, p.t2 - 2.0 * rr, p.t1 + p.t2].iter().all(|x| x.abs() > 1.0) {
            out.push(p);
        }
    }
    out
}

fn phase_suite(r: &mut Runner, rng: &mut ChaCha8Rng, o: &VerifyOptions) {
    let pp = match PhaseParams::new(50, 50.0, 1.3, 0.7) {
        Ok(p) => p,
        Err(_) => unreachable!("fixed parameters are valid"),
    };
    let n = if o.quick { 100 } else { 1000 };
    let pts = phase_points(rng, n, &pp);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    r.run("gradient_central_differences", Some(8), || {
        let mut worst = 0.0f64;
        let g = |q: PhasePoint, p: &PhaseParams| phase_g(&q, p);
        for p in &pts {
            let h = 1e-5 * p.t1.abs().min(p.t2.abs()).min((p.t1 + p.t2).abs()).max(1e-3);
            let fd1 = (g(PhasePoint::new(p.t1 + h, p.t2), &pp)? - g(PhasePoint::new(p.t1 - h, p.t2), &pp)?) / (2.0 * h);
            let fd2 = (g(PhasePoint::new(p.t1, p.t2 + h), &pp)? - g(PhasePoint::new(p.t1, p.t2 - h), &pp)?) / (2.0 * h);
            let (mut up, mut dn) = (pp, pp);
            up.rho += h;
            dn.rho -= h;
            let fdr = (g(*p, &up)? - g(*p, &dn)?) / (2.0 * h);
            worst = worst.nmax(rel(fd1, phase_g1(p, &pp)?)).nmax(rel(fd2, phase_g2(p, &pp)?)).nmax(rel(fdr, phase_h(p, &pp)?));
        }
        Ok((worst <= 1e-6, format!("{n} points, max relative deviation {worst:.2e}"), vec![("max_relative", worst)]))
    });
    r.run("exp_g_cubic_quotient", Some(8), || {
        let (c1, c2) = (pp.c1(), pp.c2());
        let mut worst = 0.0f64;
        for p in &pts {
            let (t1, t2) = (p.t1, p.t2);
            let q1 = ((t1.powi(3) - c1 * t1 - c2) / ((t1 + t2) * t1 * t1 * pp.ups1)).abs();
            let q2 = ((t2.powi(3) - c1 * t2 + c2) / ((t1 + t2) * t2 * t2 * pp.ups2)).abs();
            worst = worst.nmax((phase_g1(p, &pp)?.exp() / q1 - 1.0).abs()).nmax((phase_g2(p, &pp)?.exp() / q2 - 1.0).abs());
        }
        Ok((worst <= 1e-10, format!("{n} points, max relative deviation {worst:.2e}"), vec![("max_relative", worst)]))
    });
    r.run("mixed_derivative_formula", Some(8), || {
        let mut worst = 0.0f64;
        for p in &pts {
            let mixed = -1.0 / (p.t1 + p.t2);
            if phase_g1_t2(p, &pp)? != mixed {
                return Ok((false, format!("closed form differs at {p:?}"), vec![]));
            }
            let g1 = |a: f64, b: f64| phase_g1(&PhasePoint::new(a, b), &pp);
            let hm = 1e-5 * (p.t1 + p.t2).abs();
            let fd = (g1(p.t1, p.t2 + hm)? - g1(p.t1, p.t2 - hm)?) / (2.0 * hm);
            worst = worst.nmax((fd - mixed).abs() / mixed.abs().max(1e-3));
        }
        Ok((worst <= 1e-8, format!("{n} points, max relative deviation of differences {worst:.2e}"), vec![("max_relative", worst)]))
    });
    let shells: Vec<(f64, f64)> = (0..n / 2)
        .map(|_| {
            let s = |rng: &mut ChaCha8Rng| if rng.gen() { 1.0 } else { -1.0 };
            (rng.gen_range(2000.0..20000.0) * s(rng), rng.gen_range(0.5..10.0) * s(rng))
        })
        .collect();
    r.run("small_shift_leading_terms", Some(8), || {
        let rr = pp.rho;
        let mut worst = 0.0f64;
        for &(b1, b2) in &shells {
            let env = b2.abs() / (b1 * b1);
            let p = PhasePoint::new(b1 - 2.0 * rr, b2 + 2.0 * rr);
            worst = worst.nmax((phase_g1_t1(&p, &pp)? - g1_t1_leading(&p, &pp)).abs() / env);
            let q = PhasePoint::new(b2 - 2.0 * rr, b1 + 2.0 * rr);
            worst = worst.nmax((phase_g2_t2(&q, &pp)? - g2_t2_leading(&q, &pp)).abs() / env);
        }
        Ok((
            worst <= 10.0,
            format!("{} shells with |B_big| / |B_small| >= 200, max error / envelope {worst:.3}", shells.len()),
            vec![("max_over_envelope", worst)],
        ))
    });
    r.run("stationary_points", None, || {
        let mut worst = 0.0f64;
        for t1 in [-150.0, -60.0, -250.0, -400.0] {
            let (p, pp) = stationary_point(50, 50.0, t1)?;
            worst = worst.nmax(phase_g1(&p, &pp)?.abs()).nmax(phase_g2(&p, &pp)?.abs()).nmax(phase_h(&p, &pp)?.abs());
        }
        Ok((worst <= 1e-12, format!("max |gradient| {worst:.2e}"), vec![("max_abs", worst)]))
    });
    r.run("case_exponents", None, || {
        let small = CaseExponents::chosen(1e-4);
        let fin = CaseExponents::chosen(2.0 / 595.0);
        let v = fin.violations();
        Ok((
            small.satisfies_constraints(),
            format!("constraints hold at b = 1e-4; at b = 2/595: {v:?}"),
            vec![("violations_at_final_b", v.len() as f64)],
        ))
    });
}

fn region_suite(r: &mut Runner, o: &VerifyOptions) {
    let grid = if o.quick { 64 } else { 128 };
    let specs = match calibration_regions(50) {
        Ok(s) => s,
        Err(e) => {
            r.run("calibration_regions", Some(9), || Err(e));
            return;
        }
    };
    let take = if o.quick { 1 } else { specs.len() };
    for (i, (rs, pp)) in specs.iter().take(take).enumerate() {
        r.run(&format!("sublemma_envelope_{i}"), Some(9), || {
            let s = sublemma_check(rs, pp, grid, 10.0)?;
            let worst = s.bounds.iter().map(|b| b.ratio).fold(0.0, f64::max);
            let parts: Vec<String> = s.bounds.iter().map(|b| format!("{}={:.3}", b.name, b.ratio)).collect();
            Ok((
                s.pass,
                format!("measure {:.4e} on {}^2 grid; ratios {}", s.sample.measure, grid, parts.join(" ")),
                vec![("measure", s.sample.measure), ("max_ratio", worst), ("bounds", s.bounds.len() as f64)],
            ))
        });
        if !o.quick {
            r.run(&format!("consistency_{i}"), None, || {
                let c = consistency_check(rs, pp, 20.0)?;
                Ok((c.pass, format!("relations {:.3} {:.3} {:.3}", c.consist1, c.consist2, c.rho_relation), vec![]))
            });
        }
    }
}

fn kuznetsov_suite(r: &mut Runner, o: &VerifyOptions) {
    let st = QuadratureSettings::default();
    r.run("mirror_symmetry", Some(10), || {
        let pt = SpectralPoint::new(40, 40.0)?;
        let req = KuznetsovRequest::new((100, 1), (1, 10), pt, TestFunctionSpec::new(40.0, 4.0)?)?;
        let s5 = sigma5_term(&req, &st)?;
        let mut sw = req.swapped();
        sw.f.rho_center = -sw.f.rho_center;
        let s4 = sigma4_term(&sw, &st)?;
        let dev = (s5.partial_sum.value - s4.partial_sum.value).norm() / s5.max_term();
        Ok((
            dev <= 1e-8 && s5.terms.len() == s4.terms.len(),
            format!("{} terms, |difference| / largest term = {dev:.2e}", s5.terms.len()),
            vec![("relative", dev)],
        ))
    });
    if o.quick {
        return;
    }
    r.run("cap_doubling", Some(10), || {
        let pt = SpectralPoint::new(40, 40.0)?;
        let req = KuznetsovRequest::new((1, 1), (1, 1), pt, TestFunctionSpec::new(40.0, 4.0)?)?;
        let a = arithmetic_side(&req, &st)?;
        let b = arithmetic_side(&req.with_caps(Caps { cap45: 2 * req.caps.cap45, cap6: 2 * req.caps.cap6 }), &st)?;
        let change = (b.total.value - a.total.value).norm() / a.total.value.norm();
        let off = (a.total.value - a.delta.value).norm();
        Ok((
            change < 1e-2,
            format!("total {:.10e}, relative change under doubling {change:.2e}, |delta| / |off-diagonal| = {:.3e}", a.total.value.re, a.delta.value.norm() / off.max(1e-300)),
            vec![("relative_change", change), ("delta", a.delta.value.re)],
        ))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let o = VerifyOptions { quick: true, seed: 5, ..Default::default() };
        let a = VerifyReport::new(o, run_suite(Suite::Hecke, &o)).without_timings();
        let b = VerifyReport::new(o, run_suite(Suite::Hecke, &o)).without_timings();
        assert_eq!(a, b);
        assert!(a.pass);
    }
}
