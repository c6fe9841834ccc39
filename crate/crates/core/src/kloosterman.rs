//! GL(3) Kloosterman sums for the w4/w5 and long Weyl elements, the finite
//! Fourier transform `Ŝ` as an exact tuple count, and brute-force checks of
//! the two classical Kloosterman lemmas.

use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `gcd` with the convention `(0, n) = |n|`.
pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(g, u, v)` with `u·a + v·b = g = gcd(a, b)`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut u0, mut u1) = (1, 0);
    let (mut v0, mut v1) = (0, 1);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (u0, u1) = (u1, u0 - q * u1);
        (v0, v1) = (v1, v0 - q * v1);
    }
    if r0 < 0 {
        (-r0, -u0, -v0)
    } else {
        (r0, u0, v0)
    }
}

pub fn mod_inv(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let (g, u, _) = ext_gcd(a.rem_euclid(m), m);
    (g == 1).then(|| u.rem_euclid(m))
}

pub fn euler_phi(n: u64) -> u64 {
    let mut n = n;
    let mut out = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            out -= out / p;
        }
        p += 1;
    }
    if n > 1 {
        out -= out / n;
    }
    out
}

/// `e(k/n) = exp(2πik/n)` with the numerator reduced first.
pub fn root_of_unity(k: i64, n: i64) -> C64 {
    let k = k.rem_euclid(n);
    C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

/// `Y, Z` with `Y·B + Z·C ≡ 1 (mod D)`, assuming `(B, C, D) = 1`.
pub fn yz(b: i64, c: i64, d: i64) -> Option<(i64, i64)> {
    if d == 1 {
        return Some((0, 0));
    }
    let (g, u, v) = ext_gcd(b, c);
    let gi = mod_inv(g, d)?;
    Some(((u * gi).rem_euclid(d), (v * gi).rem_euclid(d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct W4Params {
    pub n1: i64,
    pub n2: i64,
    pub m1: i64,
    pub d1: i64,
    pub d2: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct W6Params {
    pub n1: i64,
    pub m2: i64,
    pub m1: i64,
    pub n2: i64,
    pub d1: i64,
    pub d2: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HatParams {
    pub r1: i64,
    pub s1: i64,
    pub r2: i64,
    pub s2: i64,
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
    pub d1: i64,
    pub d2: i64,
}

fn check_moduli(d1: i64, d2: i64) -> Result<()> {
    if d1 <= 0 || d2 <= 0 {
        return Err(Error::Invalid(format!("moduli must be positive, got ({d1}, {d2})")));
    }
    Ok(())
}

/// `S̃(n1, n2, m1; D1, D2)`, defined when `D1 | D2`.
pub fn s_tilde(p: &W4Params) -> Result<C64> {
    check_moduli(p.d1, p.d2)?;
    if p.d2 % p.d1 != 0 {
        return Err(Error::Divisibility(format!("D1 = {} does not divide D2 = {}", p.d1, p.d2)));
    }
    let (d1, d2) = (p.d1, p.d2);
    let q = d2 / d1;
    let mut sum = C64::new(0.0, 0.0);
    for c1 in 0..d1 {
        let Some(c1i) = mod_inv(c1, d1) else { continue };
        for c2 in 0..d2 {
            let Some(c2i) = mod_inv(c2, q) else { continue };
            // common denominator D2
            let num = (p.n2 * c1i % d2 * c2 % d2) * q + p.m1 * c2i % d2 * d1 + p.n1 * c1 % d2 * q;
            sum += root_of_unity(num % d2, d2);
        }
    }
    Ok(sum)
}

/// Admissible `(B, C, Y, Z)` residues modulo `D`.
fn admissible(d: i64) -> Vec<(i64, i64, i64, i64)> {
    let mut out = Vec::new();
    for b in 0..d {
        for c in 0..d {
            if gcd(gcd(b, c), d) != 1 {
                continue;
            }
            let (y, z) = yz(b, c, d).expect("unit gcd");
            out.push((b, c, y, z));
        }
    }
    out
}

/// Long-element sum `S(n1, m2, m1, n2; D1, D2)`.
pub fn s_long(p: &W6Params) -> Result<C64> {
    check_moduli(p.d1, p.d2)?;
    let (d1, d2) = (p.d1, p.d2);
    let m = d1 * d2;
    let a1 = admissible(d1);
    let a2 = admissible(d2);
    let mut sum = C64::new(0.0, 0.0);
    for &(b1, c1, y1, z1) in &a1 {
        for &(b2, c2, y2, z2) in &a2 {
            if (d1 * c2 + b1 * b2 + d2 * c1) % m != 0 {
                continue;
            }
            let k1 = (p.n1 * b1 + p.m1 * (y1 * d2 - z1 * b2)).rem_euclid(d1);
            let k2 = (p.m2 * b2 + p.n2 * (y2 * d1 - z2 * b1)).rem_euclid(d2);
            sum += root_of_unity(k1 * d2 + k2 * d1, m);
        }
    }
    Ok(sum)
}

/// Counts of admissible tuples by their residue signature
/// `(x1, y1, x2, y2)`: `Ŝ(x1, y1, x2, y2)` equals the count at that index.
#[derive(Debug, Clone)]
pub struct HatTable {
    pub d1: i64,
    pub d2: i64,
    counts: Vec<u32>,
}

impl HatTable {
    pub fn new(r1: i64, s1: i64, r2: i64, s2: i64, d1: i64, d2: i64) -> Result<Self> {
        check_moduli(d1, d2)?;
        let (u1, u2) = (d1 as usize, d2 as usize);
        let mut counts = vec![0u32; u1 * u1 * u2 * u2];
        let a1 = admissible(d1);
        let a2 = admissible(d2);
        let m = d1 * d2;
        for &(b1, c1, y1, z1) in &a1 {
            for &(b2, c2, y2, z2) in &a2 {
                if (d1 * c2 + b1 * b2 + d2 * c1) % m != 0 {
                    continue;
                }
                let yy1 = (r1 * b1).rem_euclid(d1) as usize;
                let xx1 = (s1 * (y1 * d2 - z1 * b2)).rem_euclid(d1) as usize;
                let xx2 = (r2 * b2).rem_euclid(d2) as usize;
                let yy2 = (s2 * (y2 * d1 - z2 * b1)).rem_euclid(d2) as usize;
                counts[((xx1 * u1 + yy1) * u2 + xx2) * u2 + yy2] += 1;
            }
        }
        Ok(Self { d1, d2, counts })
    }

    pub fn get(&self, x1: i64, y1: i64, x2: i64, y2: i64) -> u32 {
        let (u1, u2) = (self.d1 as usize, self.d2 as usize);
        let (x1, y1) = (x1.rem_euclid(self.d1) as usize, y1.rem_euclid(self.d1) as usize);
        let (x2, y2) = (x2.rem_euclid(self.d2) as usize, y2.rem_euclid(self.d2) as usize);
        self.counts[((x1 * u1 + y1) * u2 + x2) * u2 + y2]
    }

    /// Iterator over `((x1, y1, x2, y2), count)` for every residue class.
    pub fn entries(&self) -> impl Iterator<Item = ((i64, i64, i64, i64), u32)> + '_ {
        let (u1, u2) = (self.d1 as usize, self.d2 as usize);
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let y2 = i % u2;
            let x2 = (i / u2) % u2;
            let y1 = (i / (u2 * u2)) % u1;
            let x1 = i / (u2 * u2 * u1);
            ((x1 as i64, y1 as i64, x2 as i64, y2 as i64), c)
        })
    }
}

/// `Ŝ` as an exact count of admissible tuples satisfying the four
/// congruences left after the character averages.
pub fn hat_s_count(p: &HatParams) -> Result<u64> {
    check_moduli(p.d1, p.d2)?;
    let (d1, d2) = (p.d1, p.d2);
    let m = d1 * d2;
    let a1: Vec<_> = admissible(d1).into_iter().filter(|&(b1, ..)| (p.r1 * b1 - p.y1).rem_euclid(d1) == 0).collect();
    let a2: Vec<_> = admissible(d2).into_iter().filter(|&(b2, ..)| (p.r2 * b2 - p.x2).rem_euclid(d2) == 0).collect();
    let mut count = 0;
    for &(b1, c1, y1, z1) in &a1 {
        for &(b2, c2, y2, z2) in &a2 {
            if (d1 * c2 + b1 * b2 + d2 * c1) % m != 0 {
                continue;
            }
            if (p.s1 * (y1 * d2 - z1 * b2) - p.x1).rem_euclid(d1) == 0
                && (p.s2 * (y2 * d1 - z2 * b1) - p.y2).rem_euclid(d2) == 0
            {
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn hat_s(p: &HatParams) -> Result<C64> {
    Ok(C64::new(hat_s_count(p)? as f64, 0.0))
}

/// The literal fourfold average of twisted long-element sums; the
/// reference path for [`hat_s`].
pub fn hat_s_literal(p: &HatParams) -> Result<C64> {
    check_moduli(p.d1, p.d2)?;
    let (d1, d2) = (p.d1, p.d2);
    let m = d1 * d2;
    let table: Vec<C64> = (0..m).map(|k| root_of_unity(k, m)).collect();
    let tuples: Vec<_> = {
        let a1 = admissible(d1);
        let a2 = admissible(d2);
        let mut v = Vec::new();
        for &(b1, c1, y1, z1) in &a1 {
            for &(b2, c2, y2, z2) in &a2 {
                if (d1 * c2 + b1 * b2 + d2 * c1) % m == 0 {
                    v.push((b1, (y1 * d2 - z1 * b2), b2, (y2 * d1 - z2 * b1)));
                }
            }
        }
        v
    };
    let mut total = C64::new(0.0, 0.0);
    for n1 in 0..d1 {
        for m1 in 0..d1 {
            for n2 in 0..d2 {
                for m2 in 0..d2 {
                    let mut s = C64::new(0.0, 0.0);
                    for &(b1, w1, b2, w2) in &tuples {
                        let k1 = (n1 * p.r1 * b1 + m1 * p.s1 * w1).rem_euclid(d1);
                        let k2 = (m2 * p.r2 * b2 + n2 * p.s2 * w2).rem_euclid(d2);
                        s += table[((k1 * d2 + k2 * d1) % m) as usize];
                    }
                    let k1 = (-(p.x1 * m1 + p.y1 * n1)).rem_euclid(d1);
                    let k2 = (-(p.x2 * m2 + p.y2 * n2)).rem_euclid(d2);
                    total += s * table[((k1 * d2 + k2 * d1) % m) as usize];
                }
            }
        }
    }
    Ok(total / (m * m) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Input {
    pub d: i64,
    pub delta: i64,
    pub r1: i64,
    pub s1: i64,
    pub n2: i64,
    pub s2: i64,
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub input: Lemma1Input,
    pub lhs: C64,
    pub bound: f64,
    pub bound_ok: bool,
    /// The support conditions `(D, x) = (D, r1)`, `(δ, y) = (δ, s1)` and
    /// `D/(D, δ) | n2 s2`.
    pub support_predicted: bool,
    /// The same conditions read as `(D, x) = (r1, x)`, `(δ, y) = (s1, y)`.
    pub alternative_reading_predicted: bool,
    pub vanishing_ok: bool,
    pub pass: bool,
}

const ZERO_TOL: f64 = 1e-8;

fn lemma1_support(i: &Lemma1Input) -> (bool, bool) {
    let third = (i.n2 * i.s2) % (i.d / gcd(i.d, i.delta)) == 0;
    let corrected = gcd(i.d, i.x) == gcd(i.d, i.r1) && gcd(i.delta, i.y) == gcd(i.delta, i.s1) && third;
    let alternative = gcd(i.d, i.x) == gcd(i.r1, i.x) && gcd(i.delta, i.y) == gcd(i.s1, i.y) && third;
    (corrected, alternative)
}

fn lemma1_report(input: Lemma1Input, lhs: C64) -> Lemma1Report {
    let bound = (input.d * gcd(input.r1, input.d) * gcd(input.s1, input.delta)) as f64;
    let bound_ok = lhs.norm() <= bound + 1e-9;
    let (support_predicted, alternative_reading_predicted) = lemma1_support(&input);
    let vanishing_ok = support_predicted || lhs.norm() < ZERO_TOL;
    Lemma1Report {
        input,
        lhs,
        bound,
        bound_ok,
        support_predicted,
        alternative_reading_predicted,
        vanishing_ok,
        pass: bound_ok && vanishing_ok,
    }
}

fn lemma1_check(i: &Lemma1Input) -> Result<()> {
    if i.d <= 0 || i.delta <= 0 {
        return Err(Error::Invalid("D and delta must be positive".into()));
    }
    if i.r1 == 0 || i.s1 == 0 || i.n2 == 0 || i.s2 == 0 {
        return Err(Error::Invalid("r1, s1, n2, s2 must be nonzero".into()));
    }
    if i.d > 40 || i.delta > 40 {
        return Err(Error::Invalid("D, delta <= 40 for brute force".into()));
    }
    Ok(())
}

/// Left side of the averaged w4 sum identity by literal averaging of
/// `S̃(n1 r1, n2 s2, m1 s1; D, Dδ)` over `n1 mod D`, `m1 mod δ`.
pub fn lemma1_lhs_literal(i: &Lemma1Input) -> Result<C64> {
    lemma1_check(i)?;
    let mut total = C64::new(0.0, 0.0);
    for n1 in 0..i.d {
        for m1 in 0..i.delta {
            let s = s_tilde(&W4Params { n1: n1 * i.r1, n2: i.n2 * i.s2, m1: m1 * i.s1, d1: i.d, d2: i.d * i.delta })?;
            total += s * root_of_unity(-i.x * n1 * i.delta - i.y * m1 * i.d, i.d * i.delta);
        }
    }
    Ok(total / (i.d * i.delta) as f64)
}

/// All `(x mod D, y mod δ)` values of the averaged sum at once: the
/// character averages reduce it to
/// `Σ_{r1 C1 ≡ x (D), s1 C̄2 ≡ y (δ)} e(n2 s2 C̄1 C2 / D)`.
pub fn lemma1_table(d: i64, delta: i64, r1: i64, s1: i64, n2s2: i64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); (d * delta) as usize];
    let big = d * delta;
    for c1 in 0..d {
        let Some(c1i) = mod_inv(c1, d) else { continue };
        let x = (r1 * c1).rem_euclid(d);
        for c2 in 0..big {
            let Some(c2i) = mod_inv(c2, delta) else { continue };
            let y = (s1 * c2i).rem_euclid(delta);
            out[(x * delta + y) as usize] += root_of_unity(n2s2 * c1i * c2, d);
        }
    }
    out
}

pub fn verify_lemma1(input: Lemma1Input) -> Result<Lemma1Report> {
    lemma1_check(&input)?;
    let lhs = if input.d.pow(3) * input.delta.pow(2) <= 300_000 {
        lemma1_lhs_literal(&input)?
    } else {
        let t = lemma1_table(input.d, input.delta, input.r1, input.s1, input.n2 * input.s2);
        t[(input.x.rem_euclid(input.d) * input.delta + input.y.rem_euclid(input.delta)) as usize]
    };
    Ok(lemma1_report(input, lhs))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub checked: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
    /// For the first lemma: instances where the alternative printed reading
    /// of the support conditions mispredicts a nonzero value as zero.
    pub alternative_reading_failures: u64,
}

impl SweepSummary {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(what());
            }
        }
    }

    pub fn merge(&mut self, o: SweepSummary) {
        self.checked += o.checked;
        self.violations += o.violations;
        self.alternative_reading_failures += o.alternative_reading_failures;
        if self.first_violation.is_none() {
            self.first_violation = o.first_violation;
        }
    }
}

/// Exhaustive first-lemma sweep: `D, δ ≤ max_modulus`, all `x mod D`,
/// `y mod δ`, and the given multiplier sets.
pub fn sweep_lemma1(max_modulus: i64, r1s: &[i64], s1s: &[i64], n2s2s: &[i64]) -> SweepSummary {
    let mut sum = SweepSummary::default();
    for d in 1..=max_modulus {
        for delta in 1..=max_modulus {
            for &r1 in r1s {
                for &s1 in s1s {
                    for &n in n2s2s {
                        let t = lemma1_table(d, delta, r1, s1, n);
                        for x in 0..d {
                            for y in 0..delta {
                                let lhs = t[(x * delta + y) as usize];
                                let input = Lemma1Input { d, delta, r1, s1, n2: n, s2: 1, x, y };
                                let rep = lemma1_report(input, lhs);
                                if rep.alternative_reading_predicted != rep.support_predicted
                                    && !rep.alternative_reading_predicted
                                    && lhs.norm() >= ZERO_TOL
                                {
                                    sum.alternative_reading_failures += 1;
                                }
                                sum.record(rep.pass, || format!("{input:?} lhs={lhs}"));
                            }
                        }
                    }
                }
            }
        }
    }
    sum
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub part_a: SweepSummary,
    pub part_b: SweepSummary,
    pub part_c: SweepSummary,
    pub part_d: SweepSummary,
}

impl Lemma2Report {
    pub fn violations(&self) -> u64 {
        self.part_a.violations + self.part_b.violations + self.part_c.violations + self.part_d.violations
    }

    pub fn merge(&mut self, o: Lemma2Report) {
        self.part_a.merge(o.part_a);
        self.part_b.merge(o.part_b);
        self.part_c.merge(o.part_c);
        self.part_d.merge(o.part_d);
    }
}

/// Parts (a) and (b) for one multiplier tuple, over every residue class.
pub fn lemma2_ab(r1: i64, s1: i64, r2: i64, s2: i64, d1: i64, d2: i64) -> Result<Lemma2Report> {
    let t = HatTable::new(r1, s1, r2, s2, d1, d2)?;
    let mut rep = Lemma2Report::default();
    let bound = (gcd(r1, d1) * gcd(r2, d2) * gcd(d1, d2)) as u32;
    for ((x1, y1, x2, y2), c) in t.entries() {
        let support =
            (x1 * y1 - r1 * s1 * d2).rem_euclid(d1) == 0 && (x2 * y2 - r2 * s2 * d1).rem_euclid(d2) == 0;
        let ok = c <= bound && (support || c == 0);
        rep.part_a.record(ok, || format!("r=({r1},{s1},{r2},{s2}) D=({d1},{d2}) x,y=({x1},{y1},{x2},{y2}) count={c}"));
        if x1 == 0 && y1 == 0 {
            let m = d1 / gcd(d1, r1 * s1);
            let ok = c == 0 || gcd(x2, y2) % m == 0;
            rep.part_b.record(ok, || format!("(b1) r=({r1},{s1},{r2},{s2}) D=({d1},{d2}) x2,y2=({x2},{y2}) count={c}"));
        }
        if x2 == 0 && y2 == 0 {
            let m = d2 / gcd(d2, r2 * s2);
            let ok = c == 0 || gcd(x1, y1) % m == 0;
            rep.part_b.record(ok, || format!("(b2) r=({r1},{s1},{r2},{s2}) D=({d1},{d2}) x1,y1=({x1},{y1}) count={c}"));
        }
    }
    Ok(rep)
}

/// Part (c): coprime multipliers give `φ(D)` on the diagonal, 0 off it.
pub fn lemma2_c(r1: i64, s1: i64, r2: i64, s2: i64, d1: i64, d2: i64) -> Result<SweepSummary> {
    let mut s = SweepSummary::default();
    if gcd(r1 * r2, s1 * s2) != 1 {
        return Ok(s);
    }
    let c = hat_s_count(&HatParams { r1, s1, r2, s2, x1: 0, y1: 0, x2: 0, y2: 0, d1, d2 })?;
    let want = if d1 == d2 { euler_phi(d1 as u64) } else { 0 };
    s.record(c == want, || format!("r=({r1},{s1},{r2},{s2}) D=({d1},{d2}) count={c} want={want}"));
    Ok(s)
}

/// Largest power of `l` dividing `n`.
pub fn l_part(l: i64, n: i64) -> i64 {
    let mut n = n.abs();
    let mut out = 1;
    while n > 0 && n % l == 0 {
        n /= l;
        out *= l;
    }
    out
}

/// Part (d): multipliers supported at one prime `l`.
pub fn lemma2_d(l: i64, r1: i64, s1: i64, r2: i64, s2: i64, d1: i64, d2: i64) -> Result<SweepSummary> {
    let mut s = SweepSummary::default();
    let prod = (r1 * r2 * s1 * s2).abs();
    if l_part(l, prod) != prod {
        return Ok(s);
    }
    let c = hat_s_count(&HatParams { r1, s1, r2, s2, x1: 0, y1: 0, x2: 0, y2: 0, d1, d2 })? as i64;
    let lcm = d1 / gcd(d1, d2) * d2;
    let bound = gcd(d1, d2) * l_part(l, lcm) * r2.abs();
    s.record(c <= bound, || format!("l={l} r=({r1},{s1},{r2},{s2}) D=({d1},{d2}) count={c} bound={bound}"));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(6), 2);
        assert_eq!(euler_phi(97), 96);
        assert_eq!(euler_phi(10), 4);
    }

    #[test]
    fn gcd_conventions() {
        assert_eq!(gcd(0, 7), 7);
        assert_eq!(gcd(0, -7), 7);
        assert_eq!(gcd(0, 0), 0);
        let (g, u, v) = ext_gcd(240, 46);
        assert_eq!(g, 2);
        assert_eq!(240 * u + 46 * v, 2);
        assert_eq!(mod_inv(3, 7), Some(5));
        assert_eq!(mod_inv(2, 4), None);
    }

    #[test]
    fn yz_solves_the_congruence() {
        for d in 1..15 {
            for b in 0..d {
                for c in 0..d {
                    if gcd(gcd(b, c), d) == 1 {
                        let (y, z) = yz(b, c, d).unwrap();
                        assert_eq!((y * b + z * c - 1).rem_euclid(d), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn s_tilde_trivial_and_ramanujan() {
        let v = s_tilde(&W4Params { n1: 3, n2: -2, m1: 5, d1: 1, d2: 1 }).unwrap();
        assert!((v - 1.0).norm() < 1e-14);
        for p in [2, 3, 5, 7, 11] {
            let v = s_tilde(&W4Params { n1: 4, n2: 9, m1: 1, d1: 1, d2: p }).unwrap();
            assert!((v + 1.0).norm() < 1e-12, "p={p}: {v}");
        }
        assert!(matches!(s_tilde(&W4Params { n1: 1, n2: 1, m1: 1, d1: 3, d2: 4 }), Err(Error::Divisibility(_))));
    }

    #[test]
    fn s_tilde_brute_force_2_4() {
        // direct double loop over C1 mod 2, C2 mod 4 with (C2, 2) = 1
        let mut want = C64::new(0.0, 0.0);
        for c1 in [1i64] {
            for c2 in [1i64, 3] {
                let c2i = 1; // inverse of an odd C2 mod 2
                let t = 1.0 * (c1 * c2) as f64 / 2.0 + c2i as f64 / 2.0 + c1 as f64 / 2.0;
                want += C64::from_polar(1.0, 2.0 * PI * t);
            }
        }
        let got = s_tilde(&W4Params { n1: 1, n2: 1, m1: 1, d1: 2, d2: 4 }).unwrap();
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn s_long_trivial_and_small() {
        let v = s_long(&W6Params { n1: 2, m2: 3, m1: -1, n2: 7, d1: 1, d2: 1 }).unwrap();
        assert!((v - 1.0).norm() < 1e-14);
        // brute force over all 16 candidate tuples for D1 = D2 = 2
        let mut want = C64::new(0.0, 0.0);
        for b1 in 0..2i64 {
            for c1 in 0..2i64 {
                for b2 in 0..2i64 {
                    for c2 in 0..2i64 {
                        if gcd(gcd(b1, c1), 2) != 1 || gcd(gcd(b2, c2), 2) != 1 {
                            continue;
                        }
                        if (2 * c2 + b1 * b2 + 2 * c1) % 4 != 0 {
                            continue;
                        }
                        // any Y, Z with YB + ZC odd
                        let (y1, z1) = if b1 == 1 { (1, 0) } else { (0, 1) };
                        let (y2, z2) = if b2 == 1 { (1, 0) } else { (0, 1) };
                        let ph = (b1 + (y1 * 2 - z1 * b2)) as f64 / 2.0 + (b2 + (y2 * 2 - z2 * b1)) as f64 / 2.0;
                        want += C64::from_polar(1.0, 2.0 * PI * ph);
                    }
                }
            }
        }
        let got = s_long(&W6Params { n1: 1, m2: 1, m1: 1, n2: 1, d1: 2, d2: 2 }).unwrap();
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn hat_s_examples() {
        let base = HatParams { r1: 1, s1: 1, r2: 1, s2: 1, x1: 0, y1: 0, x2: 0, y2: 0, d1: 6, d2: 6 };
        assert_eq!(hat_s_count(&base).unwrap(), 2);
        assert_eq!(hat_s_count(&HatParams { d1: 4, ..base }).unwrap(), 0);
        assert_eq!(hat_s_count(&HatParams { d1: 1, d2: 1, x1: 5, r2: 3, ..base }).unwrap(), 1);
        assert_eq!(hat_s_count(&HatParams { d1: 10, d2: 10, ..base }).unwrap(), 4);
    }

    #[test]
    fn hat_s_matches_literal_average_small() {
        for (d1, d2) in [(2, 3), (3, 3), (4, 2), (2, 6)] {
            let p = HatParams { r1: 1, s1: 2, r2: -1, s2: 3, x1: 1, y1: 0, x2: 1, y2: 2, d1, d2 };
            let a = hat_s(&p).unwrap();
            let b = hat_s_literal(&p).unwrap();
            assert!((a - b).norm() < 1e-9, "{d1},{d2}: {a} vs {b}");
        }
    }

    #[test]
    fn hat_table_agrees_with_count() {
        let t = HatTable::new(2, 1, 1, -1, 4, 6).unwrap();
        for &(x1, y1, x2, y2) in &[(0, 0, 0, 0), (1, 2, 3, 4), (3, 1, 5, 5), (2, 2, 0, 3)] {
            let p = HatParams { r1: 2, s1: 1, r2: 1, s2: -1, x1, y1, x2, y2, d1: 4, d2: 6 };
            assert_eq!(t.get(x1, y1, x2, y2) as u64, hat_s_count(&p).unwrap());
        }
    }

    #[test]
    fn lemma1_literal_matches_table() {
        for &(d, delta, r1, s1, n) in &[(3, 2, 1, 2, 1), (4, 3, 2, 1, 3), (2, 4, 3, 2, -2), (6, 2, 1, 1, 6)] {
            let t = lemma1_table(d, delta, r1, s1, n);
            for x in 0..d {
                for y in 0..delta {
                    let i = Lemma1Input { d, delta, r1, s1, n2: n, s2: 1, x, y };
                    let lit = lemma1_lhs_literal(&i).unwrap();
                    assert!((lit - t[(x * delta + y) as usize]).norm() < 1e-9, "{i:?}");
                }
            }
        }
    }

    #[test]
    fn lemma1_trivial_and_vanishing() {
        let one = verify_lemma1(Lemma1Input { d: 1, delta: 1, r1: 2, s1: 3, n2: 1, s2: 1, x: 0, y: 0 }).unwrap();
        assert!((one.lhs - 1.0).norm() < 1e-12 && one.pass);
        // the alternative reading (D, x) = (r1, x) would wrongly force zero here
        assert!(!one.alternative_reading_predicted);
        // (D, x) != (D, r1): D = 6, r1 = 1, x = 2
        let z = verify_lemma1(Lemma1Input { d: 6, delta: 2, r1: 1, s1: 1, n2: 1, s2: 1, x: 2, y: 1 }).unwrap();
        assert!(z.lhs.norm() < 1e-9 && z.pass);
    }

    #[test]
    fn s_tilde_conjugation_symmetry() {
        for &(n1, n2, m1, d1, d2) in &[(1, 2, 3, 2, 6), (5, -1, 2, 3, 9), (1, 1, 1, 4, 8)] {
            let a = s_tilde(&W4Params { n1, n2, m1, d1, d2 }).unwrap();
            let b = s_tilde(&W4Params { n1: -n1, n2: -n2, m1: -m1, d1, d2 }).unwrap();
            assert!((a - b.conj()).norm() < 1e-12);
        }
    }
}
