//! The arithmetic side of the Kuznetsov formula: the diagonal term and the
//! Kloosterman-weighted sums over the three non-trivial Weyl cells, with
//! explicit truncation and term-by-term breakdowns.
//!
//! Only the arithmetic side is evaluated. There is no cusp-form data here,
//! so the spectral side is out of reach and nothing checks the two sides
//! against each other. The default caps come from the kernel decay
//! thresholds; they are a heuristic, not a convergence proof.

use crate::kloosterman::{s_long, s_tilde, W4Params, W6Params};
use crate::quad::{QuadResult, QuadratureSettings};
use crate::special::SpectralPoint;
use crate::transforms::{phi_w45, phi_w6_flagged, TestFunctionSpec};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Truncation of the modulus sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest `D1·D2` in the one-parameter families.
    pub cap45: u64,
    /// Largest `D1` and `D2` in the long-element sum.
    pub cap6: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KuznetsovRequest {
    pub n1: u64,
    pub n2: u64,
    pub m1: u64,
    pub m2: u64,
    pub pt: SpectralPoint,
    pub f: TestFunctionSpec,
    pub caps: Caps,
}

impl KuznetsovRequest {
    /// A request with caps from [`default_caps`].
    pub fn new(n: (u64, u64), m: (u64, u64), pt: SpectralPoint, f: TestFunctionSpec) -> Result<Self> {
        let mut r = Self { n1: n.0, n2: n.1, m1: m.0, m2: m.1, pt, f, caps: Caps { cap45: 1, cap6: 1 } };
        r.caps = default_caps(&r);
        r.validate()?;
        Ok(r)
    }

    pub fn with_caps(self, caps: Caps) -> Self {
        Self { caps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.n1, self.n2, self.m1, self.m2].contains(&0) {
            return Err(Error::Invalid("Kuznetsov indices must be positive".into()));
        }
        if self.caps.cap45 == 0 || self.caps.cap6 == 0 {
            return Err(Error::Invalid("caps must be positive".into()));
        }
        Ok(())
    }

    /// The request with `(n1, n2, m1, m2)` replaced by `(n2, n1, m2, m1)`.
    pub fn swapped(&self) -> Self {
        Self { n1: self.n2, n2: self.n1, m1: self.m2, m2: self.m1, ..*self }
    }
}

/// Caps past which every kernel argument sits below its decay wall:
/// `|y| ≤ d/30` for the one-parameter families and `Υ ≤ d/50` for the
/// long-element sum, doubled for headroom. `cap6` is clamped to 16 since the
/// long-element sum costs `O(cap6⁶)` exponentials.
pub fn default_caps(req: &KuznetsovRequest) -> Caps {
    let d = req.pt.d as f64;
    let y45 = (req.m1 * req.m2 * req.n2.max(req.n1)) as f64;
    let cap45 = (2.0 * (30.0 * y45 / d).ceil()).max(4.0) as u64;
    let (a, b) = ((req.m1 * req.n2) as f64, (req.m2 * req.n1) as f64);
    // Υ ≤ a^{1/3} b^{1/6} D1^{−1/2} and Υ ≤ a^{1/6} b^{1/3} D2^{−1/2}
    let wall = d / 50.0;
    let edge = (a.cbrt() * b.powf(1.0 / 6.0) / wall).powi(2).max((a.powf(1.0 / 6.0) * b.cbrt() / wall).powi(2));
    let cap6 = (2.0 * edge.ceil()).clamp(4.0, 16.0) as u64;
    Caps { cap45, cap6 }
}

/// One summand: `kloosterman / (D1 D2) · phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub d1: u64,
    pub d2: u64,
    pub eps1: i8,
    /// Second sign of the long-element sum; 0 in the one-parameter families.
    pub eps2: i8,
    /// Kernel argument(s) handed to `Φ`; `y2` is 0 in the one-parameter families.
    pub y1: f64,
    pub y2: f64,
    pub kloosterman: C64,
    pub phi: QuadResult,
    pub term: QuadResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub terms: Vec<Term>,
    pub partial_sum: QuadResult,
}

impl Breakdown {
    fn from_terms(terms: Vec<Term>) -> Self {
        let partial_sum = terms.iter().fold(QuadResult::zero(), |a, t| a.add(t.term));
        Self { terms, partial_sum }
    }

    pub fn max_term(&self) -> f64 {
        self.terms.iter().map(|t| t.term.value.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArithmeticSide {
    pub delta: QuadResult,
    pub sigma4: Breakdown,
    pub sigma5: Breakdown,
    pub sigma6: Breakdown,
    pub total: QuadResult,
}

/// `Δ = δ_{n,m} ∫ F(r) spec^d(r) dr/2πi`.
pub fn delta_term(req: &KuznetsovRequest) -> Result<QuadResult> {
    req.validate()?;
    if req.n1 != req.m1 || req.n2 != req.m2 {
        return Ok(QuadResult::exact(C64::new(0.0, 0.0)));
    }
    Ok(QuadResult::exact(req.f.spectral_moment(req.pt.d, 0.0) / (2.0 * PI)))
}

/// `m2 D1 = n1 D2²` with `D2 | D1`.
pub fn in_family4(req: &KuznetsovRequest, d1: u64, d2: u64) -> bool {
    d2 > 0 && d1 % d2 == 0 && req.m2 * d1 == req.n1 * d2 * d2
}

/// `m1 D2 = n2 D1²` with `D1 | D2`.
pub fn in_family5(req: &KuznetsovRequest, d1: u64, d2: u64) -> bool {
    d1 > 0 && d2 % d1 == 0 && req.m1 * d2 == req.n2 * d1 * d1
}

/// Pairs `(D1, D2)` with `D1 D2 ≤ cap`: `D1 = n1 D2²/m2` (resp. the mirror),
/// a one-parameter family in the free modulus.
fn family(req: &KuznetsovRequest, mirror: bool) -> Vec<(u64, u64)> {
    let cap = req.caps.cap45;
    let (num, den) = if mirror { (req.n2, req.m1) } else { (req.n1, req.m2) };
    let mut out = Vec::new();
    let mut free = 1u64;
    loop {
        // the dependent modulus is ≥ free²·num/den, so the product grows like free³
        let Some(prod_floor) = free.checked_pow(3).and_then(|f3| f3.checked_mul(num)) else { break };
        if prod_floor / den > cap {
            break;
        }
        if (num * free * free) % den == 0 {
            let dep = num * free * free / den;
            let (d1, d2) = if mirror { (free, dep) } else { (dep, free) };
            let ok = if mirror { in_family5(req, d1, d2) } else { in_family4(req, d1, d2) };
            if ok && d1 * d2 <= cap {
                out.push((d1, d2));
            }
        }
        free += 1;
    }
    out
}

fn weighted(s: C64, d1: u64, d2: u64, phi: QuadResult) -> QuadResult {
    phi.scale(s / (d1 * d2) as f64)
}

/// `Σ4 = Σ_ε Σ_{D2 | D1, m2 D1 = n1 D2²} S̃(−ε n2, m2, m1; D2, D1)/(D1 D2) · Φ_w4(ε m1 m2 n2/(D1 D2))`.
pub fn sigma4_term(req: &KuznetsovRequest, st: &QuadratureSettings) -> Result<Breakdown> {
    req.validate()?;
    let mut terms = Vec::new();
    for (d1, d2) in family(req, false) {
        for eps in [1i8, -1] {
            let e = eps as i64;
            let s = s_tilde(&W4Params { n1: -e * req.n2 as i64, n2: req.m2 as i64, m1: req.m1 as i64, d1: d2 as i64, d2: d1 as i64 })?;
            let y = e as f64 * (req.m1 * req.m2 * req.n2) as f64 / (d1 * d2) as f64;
            let phi = phi_w45(y, req.pt.d, &req.f, false, st)?;
            let term = weighted(s, d1, d2, phi);
            terms.push(Term { d1, d2, eps1: eps, eps2: 0, y1: y, y2: 0.0, kloosterman: s, phi, term });
        }
    }
    Ok(Breakdown::from_terms(terms))
}

/// `Σ5 = Σ_ε Σ_{D1 | D2, m1 D2 = n2 D1²} S̃(ε n1, m1, m2; D1, D2)/(D1 D2) · Φ_w5(ε n1 m1 m2/(D1 D2))`.
pub fn sigma5_term(req: &KuznetsovRequest, st: &QuadratureSettings) -> Result<Breakdown> {
    req.validate()?;
    let mut terms = Vec::new();
    for (d1, d2) in family(req, true) {
        for eps in [1i8, -1] {
            let e = eps as i64;
            let s = s_tilde(&W4Params { n1: e * req.n1 as i64, n2: req.m1 as i64, m1: req.m2 as i64, d1: d1 as i64, d2: d2 as i64 })?;
            let y = e as f64 * (req.n1 * req.m1 * req.m2) as f64 / (d1 * d2) as f64;
            let phi = phi_w45(y, req.pt.d, &req.f, true, st)?;
            let term = weighted(s, d1, d2, phi);
            terms.push(Term { d1, d2, eps1: eps, eps2: 0, y1: y, y2: 0.0, kloosterman: s, phi, term });
        }
    }
    Ok(Breakdown::from_terms(terms))
}

/// `Σ6 = Σ_{ε1, ε2} Σ_{D1, D2 ≤ cap6} S(ε2 n2, ε1 n1, m1, m2; D1, D2)/(D1 D2) · Φ_w6(ε2 m1 n2 D2/D1², ε1 m2 n1 D1/D2²)`.
/// The all-positive sign pair contributes exactly 0 and is listed as such.
pub fn sigma6_term(req: &KuznetsovRequest, st: &QuadratureSettings) -> Result<Breakdown> {
    req.validate()?;
    let mut terms = Vec::new();
    let cap = req.caps.cap6;
    for d1 in 1..=cap {
        for d2 in 1..=cap {
            for (eps1, eps2) in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
                let y1 = eps2 as f64 * (req.m1 * req.n2 * d2) as f64 / (d1 * d1) as f64;
                let y2 = eps1 as f64 * (req.m2 * req.n1 * d1) as f64 / (d2 * d2) as f64;
                let s = s_long(&W6Params {
                    n1: eps2 as i64 * req.n2 as i64,
                    m2: eps1 as i64 * req.n1 as i64,
                    m1: req.m1 as i64,
                    n2: req.m2 as i64,
                    d1: d1 as i64,
                    d2: d2 as i64,
                })?;
                let phi = if (y1 > 0.0 && y2 > 0.0) || s.norm() < 1e-9 {
                    QuadResult::exact(C64::new(0.0, 0.0))
                } else {
                    phi_w6_flagged(y1, y2, req.pt.d, &req.f, st)?
                };
                let term = weighted(s, d1, d2, phi);
                terms.push(Term { d1, d2, eps1, eps2, y1, y2, kloosterman: s, phi, term });
            }
        }
    }
    Ok(Breakdown::from_terms(terms))
}

/// `Δ + Σ4 + Σ5 + Σ6`.
pub fn arithmetic_side(req: &KuznetsovRequest, st: &QuadratureSettings) -> Result<ArithmeticSide> {
    let delta = delta_term(req)?;
    let sigma4 = sigma4_term(req, st)?;
    let sigma5 = sigma5_term(req, st)?;
    let sigma6 = sigma6_term(req, st)?;
    let total = delta.add(sigma4.partial_sum).add(sigma5.partial_sum).add(sigma6.partial_sum);
    Ok(ArithmeticSide { delta, sigma4, sigma5, sigma6, total })
}

/// `Υ = min(|y1|^{1/3}|y2|^{1/6}, |y1|^{1/6}|y2|^{1/3})`.
pub fn upsilon(y1: f64, y2: f64) -> f64 {
    let (a, b) = (y1.abs(), y2.abs());
    (a.cbrt() * b.powf(1.0 / 6.0)).min(a.powf(1.0 / 6.0) * b.cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::spec_density;

    fn calib() -> KuznetsovRequest {
        let pt = SpectralPoint::new(40, 40.0).unwrap();
        KuznetsovRequest::new((1, 1), (1, 1), pt, TestFunctionSpec::new(40.0, 4.0).unwrap()).unwrap()
    }

    #[test]
    fn delta_vanishes_off_diagonal() {
        let mut r = calib();
        r.m2 = 2;
        assert_eq!(delta_term(&r).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn delta_narrow_width_limit() {
        let mut r = calib();
        r.f = TestFunctionSpec::new(40.0, 1e-4).unwrap();
        let got = delta_term(&r).unwrap().value;
        let want = spec_density(40, 40.0) * (PI * 1e-4).sqrt() / (2.0 * PI);
        assert!((got.re / want - 1.0).abs() < 1e-6 && got.im.abs() < 1e-12 * want);
    }

    #[test]
    fn delta_size_at_calibration() {
        let t = 40.0f64;
        let v = delta_term(&calib()).unwrap().value.norm();
        assert!(v <= 0.01 * t.powi(3) * t.ln(), "{v}");
        assert!((v - 1312.684706720884).abs() < 1e-9 * v);
    }

    #[test]
    fn families_match_brute_force() {
        for (n1, n2, m1, m2) in [(1, 1, 1, 1), (2, 3, 1, 4), (6, 1, 2, 3), (1, 5, 5, 1)] {
            let mut r = calib();
            (r.n1, r.n2, r.m1, r.m2) = (n1, n2, m1, m2);
            r.caps = Caps { cap45: 2000, cap6: 4 };
            for mirror in [false, true] {
                let mut brute = Vec::new();
                for d1 in 1..=2000u64 {
                    for d2 in 1..=2000 / d1 {
                        let ok = if mirror { in_family5(&r, d1, d2) } else { in_family4(&r, d1, d2) };
                        if ok {
                            brute.push((d1, d2));
                        }
                    }
                }
                let mut fam = family(&r, mirror);
                fam.sort();
                brute.sort();
                assert_eq!(fam, brute, "{n1} {n2} {m1} {m2} {mirror}");
            }
        }
        let mut r = calib();
        r.caps.cap45 = 1000;
        let fam = family(&r, false);
        assert_eq!(fam[..4], [(1, 1), (4, 2), (9, 3), (16, 4)]);
    }

    #[test]
    fn empty_family_sums_to_zero() {
        let mut r = calib();
        (r.n1, r.m2, r.n2, r.m1) = (1, 1000, 1000, 1);
        r.caps.cap45 = 100;
        let st = QuadratureSettings::default();
        for b in [sigma4_term(&r, &st).unwrap(), sigma5_term(&r, &st).unwrap()] {
            assert!(b.terms.is_empty());
            assert_eq!(b.partial_sum.value, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn mirror_symmetry_and_decay() {
        let pt = SpectralPoint::new(40, 40.0).unwrap();
        let r = KuznetsovRequest::new((100, 1), (1, 10), pt, TestFunctionSpec::new(40.0, 4.0).unwrap()).unwrap();
        let st = QuadratureSettings::default();
        let s5 = sigma5_term(&r, &st).unwrap();
        let mut sw = r.swapped();
        sw.f.rho_center = -sw.f.rho_center;
        let s4 = sigma4_term(&sw, &st).unwrap();
        assert_eq!(s5.terms.len(), s4.terms.len());
        let scale = s5.max_term();
        assert!((s5.partial_sum.value - s4.partial_sum.value).norm() <= 1e-8 * scale);
        assert!(s5.terms.last().unwrap().term.value.norm() <= 1e-3 * scale);
    }

    #[test]
    fn calibration_point_is_stable_and_diagonal_dominated() {
        let st = QuadratureSettings::default();
        let r = calib();
        let a = arithmetic_side(&r, &st).unwrap();
        let sum = a.delta.value + a.sigma4.partial_sum.value + a.sigma5.partial_sum.value + a.sigma6.partial_sum.value;
        assert_eq!(sum, a.total.value);
        let off = a.total.value - a.delta.value;
        assert!(a.delta.value.norm() >= 5.0 * off.norm());
        for t in &a.sigma6.terms {
            if t.y1 > 0.0 && t.y2 > 0.0 {
                assert_eq!(t.term.value, C64::new(0.0, 0.0));
            }
            if upsilon(t.y1, t.y2) <= r.pt.d as f64 / 50.0 {
                assert!(t.term.value.norm() <= 1e-6 * a.delta.value.norm());
            }
        }
        let b = arithmetic_side(&r.with_caps(Caps { cap45: 2 * r.caps.cap45, cap6: 2 * r.caps.cap6 }), &st).unwrap();
        assert!((b.total.value - a.total.value).norm() <= 1e-2 * a.total.value.norm());
        for (x, y) in [(&a.sigma4, &b.sigma4), (&a.sigma5, &b.sigma5), (&a.sigma6, &b.sigma6)] {
            let drift = (x.partial_sum.value - y.partial_sum.value).norm();
            assert!(drift <= 1e-2 * x.partial_sum.value.norm() + 1e-6 * a.delta.value.norm());
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let mut r = calib();
        r.n1 = 0;
        assert!(r.validate().is_err());
        let mut r = calib();
        r.caps.cap6 = 0;
        assert!(r.validate().is_err());
    }
}
