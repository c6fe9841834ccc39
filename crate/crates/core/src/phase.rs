//! The stationary-phase surface `g(t1, t2; d, ρ)` of the Mellin–Barnes
//! integral for the long-element kernel, its exact derivatives, the cubic
//! reformulation of the first-order conditions and grid estimates for the
//! region where both first derivatives are small.
//!
//! Conventions: the scale `T` is `|ρ|`; `A ≍ B` on a dyadic shell means
//! `A/B ∈ [1/2, 2]` (or `|A| ≤ 2` when `B ≤ 1`); `A ⋙ B` means `A ≥ 100 B`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const GGG: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub d: u32,
    pub rho: f64,
    pub ups1: f64,
    pub ups2: f64,
}

impl PhaseParams {
    pub fn new(d: u32, rho: f64, ups1: f64, ups2: f64) -> Result<Self> {
        let p = Self { d, rho, ups1, ups2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || !self.rho.is_finite() || self.rho == 0.0 {
            return Err(Error::Invalid(format!("need d ≥ 2 and ρ ≠ 0, got d={} ρ={}", self.d, self.rho)));
        }
        if !(self.ups1 > 0.0 && self.ups2 > 0.0 && self.ups1.is_finite() && self.ups2.is_finite()) {
            return Err(Error::Invalid(format!("Υ must be positive, got ({}, {})", self.ups1, self.ups2)));
        }
        Ok(())
    }

    fn half_d(&self) -> f64 {
        self.d as f64 / 2.0
    }

    /// `3ρ² − (d/2)²`.
    pub fn c1(&self) -> f64 {
        3.0 * self.rho * self.rho - self.half_d().powi(2)
    }

    /// `−2ρ((d/2)² + ρ²)`.
    pub fn c2(&self) -> f64 {
        -2.0 * self.rho * (self.half_d().powi(2) + self.rho * self.rho)
    }

    pub fn t_scale(&self) -> f64 {
        self.rho.abs()
    }

    fn q1(&self, t1: f64) -> f64 {
        (t1 - self.rho).powi(2) + self.half_d().powi(2)
    }

    fn q2(&self, t2: f64) -> f64 {
        (t2 + self.rho).powi(2) + self.half_d().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t1: f64,
    pub t2: f64,
}

impl PhasePoint {
    pub fn new(t1: f64, t2: f64) -> Self {
        Self { t1, t2 }
    }

    /// Rejects the log singularities `t1 ∈ {0, −2ρ}`, `t2 ∈ {0, 2ρ}`, `t1 + t2 = 0`.
    pub fn check(&self, pp: &PhaseParams) -> Result<()> {
        let (t1, t2, r) = (self.t1, self.t2, pp.rho);
        let tiny = 1e-12 * (1.0 + r.abs());
        let bad = [t1, t1 + 2.0 * r, t2, t2 - 2.0 * r, t1 + t2].iter().any(|x| x.abs() <= tiny);
        if bad || !t1.is_finite() || !t2.is_finite() {
            return Err(Error::Singularity(format!("phase at ({t1}, {t2}) with ρ={r}")));
        }
        Ok(())
    }
}

/// `x log(|x|/e)`.
fn xlogx(x: f64) -> f64 {
    x * (x.abs().ln() - 1.0)
}

pub fn phase_g(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    let (t1, t2, r, a) = (p.t1, p.t2, pp.rho, pp.half_d());
    let d = pp.d as f64;
    let gamma_part = |x: f64| d * (x / a).atan() + x * ((x * x + a * a).ln() - 2.0);
    Ok(gamma_part(t1 - r) + gamma_part(t2 + r) + xlogx(t1 + 2.0 * r) + xlogx(t2 - 2.0 * r)
        - xlogx(t1 + t2)
        - t1 * ((t1 * t1).ln() - 2.0 + pp.ups1.ln())
        - t2 * ((t2 * t2).ln() - 2.0 + pp.ups2.ln()))
}

/// `∂g/∂t1 = log|(t1 + 2ρ)((d/2)² + (ρ − t1)²) / ((t1 + t2) t1² Υ1)|`.
pub fn phase_g1(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    let (t1, t2) = (p.t1, p.t2);
    Ok(((t1 + 2.0 * pp.rho).abs().ln() + pp.q1(t1).ln()) - ((t1 + t2).abs().ln() + 2.0 * t1.abs().ln() + pp.ups1.ln()))
}

/// `∂g/∂t2 = log|(t2 − 2ρ)((d/2)² + (ρ + t2)²) / ((t1 + t2) t2² Υ2)|`.
pub fn phase_g2(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    let (t1, t2) = (p.t1, p.t2);
    Ok(((t2 - 2.0 * pp.rho).abs().ln() + pp.q2(t2).ln()) - ((t1 + t2).abs().ln() + 2.0 * t2.abs().ln() + pp.ups2.ln()))
}

/// `∂g/∂ρ = log|Q2 (t1 + 2ρ)² / (Q1 (t2 − 2ρ)²)|` with `Q1 = (d/2)² + (ρ − t1)²`,
/// `Q2 = (d/2)² + (ρ + t2)²`. No `Υ` enters.
pub fn phase_h(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    let (t1, t2, r) = (p.t1, p.t2, pp.rho);
    Ok(pp.q2(t2).ln() + 2.0 * (t1 + 2.0 * r).abs().ln() - pp.q1(t1).ln() - 2.0 * (t2 - 2.0 * r).abs().ln())
}

/// `n`-th derivative of `log|x|`.
fn dlog(n: u32, x: f64) -> f64 {
    let fact: f64 = (1..n).map(f64::from).product();
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    sign * fact / x.powi(n as i32)
}

/// `n`-th derivative of `log(x² + a²)`.
fn dlog_quad(n: u32, x: f64, a: f64) -> f64 {
    let fact: f64 = (1..n).map(f64::from).product();
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    2.0 * sign * fact * (num_complex::Complex64::new(x, a).powi(-(n as i32))).re
}

/// `∂ⁿ g_i / ∂t_iⁿ` for `i ∈ {1, 2}`, `n ≥ 1` (so `n = 1` is `∂g_i/∂t_i`).
pub fn phase_gi_deriv(i: u8, n: u32, p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    if n == 0 {
        return Err(Error::Invalid("derivative order must be ≥ 1".into()));
    }
    let (t1, t2, r, a) = (p.t1, p.t2, pp.rho, pp.half_d());
    match i {
        1 => Ok(dlog(n, t1 + 2.0 * r) + dlog_quad(n, t1 - r, a) - dlog(n, t1 + t2) - 2.0 * dlog(n, t1)),
        2 => Ok(dlog(n, t2 - 2.0 * r) + dlog_quad(n, t2 + r, a) - dlog(n, t1 + t2) - 2.0 * dlog(n, t2)),
        _ => Err(Error::Invalid(format!("phase index must be 1 or 2, got {i}"))),
    }
}

/// `∂g1/∂t1 = −2/t1 + 1/(t1 + 2ρ) − 1/(t1 + t2) + 2(t1 − ρ)/((d/2)² + (t1 − ρ)²)`.
pub fn phase_g1_t1(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    let (t1, t2, r) = (p.t1, p.t2, pp.rho);
    Ok(-2.0 / t1 + 1.0 / (t1 + 2.0 * r) - 1.0 / (t1 + t2) + 2.0 * (t1 - r) / pp.q1(t1))
}

pub fn phase_g2_t2(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    phase_gi_deriv(2, 1, p, pp)
}

/// `∂g1/∂t2 = ∂g2/∂t1 = −1/(t1 + t2)`.
pub fn phase_g1_t2(p: &PhasePoint, pp: &PhaseParams) -> Result<f64> {
    p.check(pp)?;
    Ok(-1.0 / (p.t1 + p.t2))
}

/// Leading term of `∂g1/∂t1` when `|t2 − 2ρ| ⋘ |t1 + 2ρ|`.
pub fn g1_t1_leading(p: &PhasePoint, pp: &PhaseParams) -> f64 {
    let (t1, r, a2) = (p.t1, pp.rho, pp.half_d().powi(2));
    -2.0 * (a2 + r * r - r * t1) / (t1 * pp.q1(t1))
}

/// Leading term of `∂g2/∂t2` when `|t1 + 2ρ| ⋘ |t2 − 2ρ|`.
pub fn g2_t2_leading(p: &PhasePoint, pp: &PhaseParams) -> f64 {
    let (t2, r, a2) = (p.t2, pp.rho, pp.half_d().powi(2));
    -2.0 * (a2 + r * r + r * t2) / (t2 * pp.q2(t2))
}

/// The two cubic left-hand sides
/// `Υ1⁻¹(t1³ − C1 t1 − C2) − α1 t1²(t1 + t2)` and
/// `Υ2⁻¹(t2³ − C1 t2 + C2) − α2 t2²(t1 + t2)`.
pub fn cubic_residuals(p: &PhasePoint, pp: &PhaseParams, alpha1: i8, alpha2: i8) -> Result<(f64, f64)> {
    if alpha1.abs() != 1 || alpha2.abs() != 1 {
        return Err(Error::Invalid(format!("signs must be ±1, got ({alpha1}, {alpha2})")));
    }
    let (t1, t2) = (p.t1, p.t2);
    let (c1, c2) = (pp.c1(), pp.c2());
    let s = t1 + t2;
    let r1 = (t1.powi(3) - c1 * t1 - c2) / pp.ups1 - alpha1 as f64 * t1 * t1 * s;
    let r2 = (t2.powi(3) - c1 * t2 + c2) / pp.ups2 - alpha2 as f64 * t2 * t2 * s;
    Ok((r1, r2))
}

/// Dyadic localization of the contour heights plus the `T^ε` surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub u1: f64,
    pub u2: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub threshold_eps: f64,
}

impl RegionSpec {
    pub fn new(u1: f64, u2: f64, b1: f64, b2: f64, b3: f64, threshold_eps: f64) -> Result<Self> {
        let rs = Self { u1, u2, b1, b2, b3, threshold_eps };
        rs.validate()?;
        Ok(rs)
    }

    /// Scales are positive and the two largest `B`'s are comparable: the
    /// triangle inequality on dyadic shells caps the ratio at 8.
    pub fn validate(&self) -> Result<()> {
        let all = [self.u1, self.u2, self.b1, self.b2, self.b3, self.threshold_eps];
        if all.iter().any(|x| !x.is_finite()) || self.u1 == 0.0 || self.u2 == 0.0 {
            return Err(Error::Invalid("region scales must be finite with U ≠ 0".into()));
        }
        if self.b1 <= 0.0 || self.b2 <= 0.0 || self.b3 <= 0.0 || self.threshold_eps <= 0.0 {
            return Err(Error::Invalid("B scales and threshold must be positive".into()));
        }
        let mut b = [self.b1, self.b2, self.b3];
        b.sort_by(f64::total_cmp);
        if b[2] > 8.0 * b[1].max(1.0) {
            return Err(Error::Invalid(format!(
                "B scales ({}, {}, {}) violate the triangle constraint",
                self.b1, self.b2, self.b3
            )));
        }
        Ok(())
    }

    /// `min(B1, B3, |U1|)`.
    pub fn e1(&self) -> f64 {
        self.b1.min(self.b3).min(self.u1.abs())
    }

    /// `min(B2, B3, |U2|)`.
    pub fn e2(&self) -> f64 {
        self.b2.min(self.b3).min(self.u2.abs())
    }

    /// `min(B1, B2, T)`.
    pub fn f_scale(&self, t: f64) -> f64 {
        self.b1.min(self.b2).min(t)
    }

    /// Shell test for `(t1, t2)`.
    pub fn in_shell(&self, p: &PhasePoint, rho: f64) -> bool {
        near(p.t1, self.u1) && near(p.t2, self.u2) && near_abs(p.t1 + 2.0 * rho, self.b1) && near_abs(p.t2 - 2.0 * rho, self.b2) && near_abs(p.t1 + p.t2, self.b3)
    }

    /// Bounding box of the shell: `(t1 range, t2 range)`, `None` when empty.
    fn bounding_box(&self, rho: f64) -> Option<((f64, f64), (f64, f64))> {
        let span = |u: f64| if u > 0.0 { (u / 2.0, 2.0 * u) } else { (2.0 * u, u / 2.0) };
        let (a1, a2) = span(self.u1);
        let (c1, c2) = span(self.u2);
        let lo1 = a1.max(-2.0 * rho - 2.0 * self.b1);
        let hi1 = a2.min(-2.0 * rho + 2.0 * self.b1);
        let lo2 = c1.max(2.0 * rho - 2.0 * self.b2);
        let hi2 = c2.min(2.0 * rho + 2.0 * self.b2);
        (lo1 < hi1 && lo2 < hi2).then_some(((lo1, hi1), (lo2, hi2)))
    }

    fn g1_stronger(&self, t: f64) -> bool {
        self.u1.abs() >= GGG * (t + self.u2.abs())
    }

    fn g2_stronger(&self, t: f64) -> bool {
        self.u2.abs() >= GGG * (t + self.u1.abs())
    }
}

/// `x ≍ u` with matching sign.
fn near(x: f64, u: f64) -> bool {
    let q = x / u;
    (0.5..=2.0).contains(&q)
}

/// `|x| ≍ b`, or `|x| ≤ 2b` for the innermost shell `b ≤ 1`.
fn near_abs(x: f64, b: f64) -> bool {
    let ax = x.abs();
    if b <= 1.0 {
        ax <= 2.0 * b
    } else {
        ax >= b / 2.0 && ax <= 2.0 * b
    }
}

/// Membership in the small-derivative region at a shell point: each `g_i`
/// passes `|g_i| ≤ thr·E_i^{−1/2}` or, where `|U_i| ⋙ T + |U_j|`, the
/// sharper `|g_i| ≤ thr·|U_j|^{1/2}/|U_i|`. The union of both tests is used.
pub fn in_region(p: &PhasePoint, rs: &RegionSpec, pp: &PhaseParams) -> Result<bool> {
    if !rs.in_shell(p, pp.rho) {
        return Ok(false);
    }
    let t = pp.t_scale();
    let thr = rs.threshold_eps;
    let g1 = phase_g1(p, pp)?.abs();
    let g2 = phase_g2(p, pp)?.abs();
    let ok1 = g1 <= thr / rs.e1().sqrt() || (rs.g1_stronger(t) && g1 <= thr * rs.u2.abs().sqrt() / rs.u1.abs());
    let ok2 = g2 <= thr / rs.e2().sqrt() || (rs.g2_stronger(t) && g2 <= thr * rs.u1.abs().sqrt() / rs.u2.abs());
    Ok(ok1 && ok2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub grid_n: usize,
    pub measure: f64,
    pub shell_measure: f64,
    pub cell_area: f64,
    pub points_in: usize,
    /// Infima of `|∂g_i/∂t_i|` over the sampled region (`None` when empty).
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    /// Sampled point with the smallest `|g1| + |g2|`.
    pub best: Option<PhasePoint>,
}

pub const MAX_GRID: usize = 4096;

/// Midpoint-grid sample of the region on the shell's bounding box.
pub fn region_sample(rs: &RegionSpec, pp: &PhaseParams, grid_n: usize) -> Result<RegionSample> {
    rs.validate()?;
    pp.validate()?;
    if grid_n == 0 || grid_n > MAX_GRID {
        return Err(Error::Invalid(format!("grid_n must be in 1..={MAX_GRID}, got {grid_n}")));
    }
    let mut out = RegionSample { grid_n, measure: 0.0, shell_measure: 0.0, cell_area: 0.0, points_in: 0, h1: None, h2: None, best: None };
    let Some(((lo1, hi1), (lo2, hi2))) = rs.bounding_box(pp.rho) else { return Ok(out) };
    let (dx, dy) = ((hi1 - lo1) / grid_n as f64, (hi2 - lo2) / grid_n as f64);
    out.cell_area = dx * dy;
    let mut shell = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..grid_n {
        let t1 = lo1 + (i as f64 + 0.5) * dx;
        for j in 0..grid_n {
            let p = PhasePoint::new(t1, lo2 + (j as f64 + 0.5) * dy);
            if !rs.in_shell(&p, pp.rho) || p.check(pp).is_err() {
                continue;
            }
            shell += 1;
            if !in_region(&p, rs, pp)? {
                continue;
            }
            out.points_in += 1;
            let d1 = phase_gi_deriv(1, 1, &p, pp)?.abs();
            let d2 = phase_gi_deriv(2, 1, &p, pp)?.abs();
            out.h1 = Some(out.h1.map_or(d1, |h: f64| h.min(d1)));
            out.h2 = Some(out.h2.map_or(d2, |h: f64| h.min(d2)));
            let score = phase_g1(&p, pp)?.abs() + phase_g2(&p, pp)?.abs();
            if score < best {
                best = score;
                out.best = Some(p);
            }
        }
    }
    out.measure = out.points_in as f64 * out.cell_area;
    out.shell_measure = shell as f64 * out.cell_area;
    Ok(out)
}

pub fn region_measure(rs: &RegionSpec, pp: &PhaseParams, grid_n: usize) -> Result<f64> {
    Ok(region_sample(rs, pp, grid_n)?.measure)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublemmaBound {
    pub name: String,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublemmaReport {
    pub sample: RegionSample,
    /// Only the bounds whose side conditions hold.
    pub bounds: Vec<SublemmaBound>,
    pub envelope: f64,
    pub pass: bool,
}

/// Compares the sampled measure with each applicable measure bound, with
/// `T^ε` replaced by the region threshold and the whole plane as the
/// restricting box. Passes when every ratio is at most `envelope`.
pub fn sublemma_check(rs: &RegionSpec, pp: &PhaseParams, grid_n: usize, envelope: f64) -> Result<SublemmaReport> {
    let sample = region_sample(rs, pp, grid_n)?;
    let thr = rs.threshold_eps;
    let t = pp.t_scale();
    let (e1, e2) = (rs.e1(), rs.e2());
    let (u1, u2) = (rs.u1.abs(), rs.u2.abs());
    let mut cands: Vec<(&str, f64)> = Vec::new();
    if let Some(h2) = sample.h2.filter(|&h| h >= thr / e2.powf(1.25)) {
        cands.push(("1a", thr * rs.b1.min(u1) / (e2.sqrt() * h2)));
    }
    cands.push(("1b", thr * rs.b1.min(u1) * rs.b3 / e1.sqrt()));
    if let Some(h1) = sample.h1.filter(|&h| h >= thr / e1.powf(1.25)) {
        cands.push(("2a", thr * rs.b2.min(u2) / (e1.sqrt() * h1)));
    }
    cands.push(("2b", thr * rs.b2.min(u2) * rs.b3 / e2.sqrt()));
    if rs.g1_stronger(t) {
        cands.push(("modif1", thr * rs.b2 * u1 / u2.sqrt()));
    }
    if rs.g2_stronger(t) {
        cands.push(("modif2", thr * rs.b1 * u2 / u1.sqrt()));
    }
    let bounds: Vec<SublemmaBound> =
        cands.into_iter().map(|(n, b)| SublemmaBound { name: n.into(), bound: b, ratio: sample.measure / b }).collect();
    let pass = bounds.iter().all(|b| b.ratio <= envelope);
    Ok(SublemmaReport { sample, bounds, envelope, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBoundReport {
    pub grid_n: usize,
    pub shell_points: usize,
    /// `sup |∂g1/∂t2|·|t1 + t2|`, identically 1.
    pub mixed_exact: f64,
    /// `sup |∂g1/∂t2|·B3` over the shell.
    pub mixed_shell: f64,
    /// `c[i][n−1] = sup |∂ⁿg_{i+1}/∂t_{i+1}ⁿ|·E_{i+1}`, `n ≤ 3`.
    pub c: [[f64; 3]; 2],
}

/// Smallest constants making the derivative bounds hold on the sampled shell.
pub fn scan_derivative_bounds(rs: &RegionSpec, pp: &PhaseParams, grid_n: usize) -> Result<DerivativeBoundReport> {
    rs.validate()?;
    pp.validate()?;
    if grid_n == 0 || grid_n > MAX_GRID {
        return Err(Error::Invalid(format!("grid_n must be in 1..={MAX_GRID}, got {grid_n}")));
    }
    let mut rep = DerivativeBoundReport { grid_n, shell_points: 0, mixed_exact: 0.0, mixed_shell: 0.0, c: [[0.0; 3]; 2] };
    let Some(((lo1, hi1), (lo2, hi2))) = rs.bounding_box(pp.rho) else { return Ok(rep) };
    let (dx, dy) = ((hi1 - lo1) / grid_n as f64, (hi2 - lo2) / grid_n as f64);
    let e = [rs.e1(), rs.e2()];
    for i in 0..grid_n {
        for j in 0..grid_n {
            let p = PhasePoint::new(lo1 + (i as f64 + 0.5) * dx, lo2 + (j as f64 + 0.5) * dy);
            if !rs.in_shell(&p, pp.rho) || p.check(pp).is_err() {
                continue;
            }
            rep.shell_points += 1;
            let m = phase_g1_t2(&p, pp)?.abs();
            rep.mixed_exact = rep.mixed_exact.max(m * (p.t1 + p.t2).abs());
            rep.mixed_shell = rep.mixed_shell.max(m * rs.b3);
            for (k, ek) in e.iter().enumerate() {
                for n in 1..=3u32 {
                    let v = phase_gi_deriv(k as u8 + 1, n, &p, pp)?.abs() * ek.powi(n as i32);
                    rep.c[k][n as usize - 1] = rep.c[k][n as usize - 1].max(v);
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Witness point of the region; `None` means the region is empty and the check is vacuous.
    pub point: Option<PhasePoint>,
    /// `B1 (T + |U1|)² / (B3 U1² Υ1)` and its `i = 2` analogue.
    pub consist1: f64,
    pub consist2: f64,
    /// `(T² + U2²) B1² / ((T² + U1²) B2²)`.
    pub rho_relation: f64,
    pub factor: f64,
    pub pass: bool,
}

fn within(x: f64, factor: f64) -> bool {
    x >= 1.0 / factor && x <= factor
}

/// The three `≍ 1` relations every nonempty region must satisfy.
pub fn consistency_relations(rs: &RegionSpec, pp: &PhaseParams) -> (f64, f64, f64) {
    let t = pp.t_scale();
    let (u1, u2) = (rs.u1.abs(), rs.u2.abs());
    let c1 = rs.b1 * (t + u1).powi(2) / (rs.b3 * u1 * u1 * pp.ups1);
    let c2 = rs.b2 * (t + u2).powi(2) / (rs.b3 * u2 * u2 * pp.ups2);
    let r = (t * t + u2 * u2) * rs.b1 * rs.b1 / ((t * t + u1 * u1) * rs.b2 * rs.b2);
    (c1, c2, r)
}

/// Samples the region (256² grid) and, when it is nonempty, checks the
/// consistency relations within `factor`.
pub fn consistency_check(rs: &RegionSpec, pp: &PhaseParams, factor: f64) -> Result<ConsistencyReport> {
    let sample = region_sample(rs, pp, 256)?;
    let (c1, c2, r) = consistency_relations(rs, pp);
    let pass = sample.best.is_none() || (within(c1, factor) && within(c2, factor) && within(r, factor));
    Ok(ConsistencyReport { point: sample.best, consist1: c1, consist2: c2, rho_relation: r, factor, pass })
}

/// Given `t1`, the point with `g1 = g2 = ∂g/∂ρ = 0`: `t2` is the root of
/// `Q2(t2)(t1 + 2ρ)² = Q1(t1)(t2 − 2ρ)²` other than the singular `t2 = −t1`,
/// and `Υ1, Υ2` are then fixed by `g1 = g2 = 0`.
pub fn stationary_point(d: u32, rho: f64, t1: f64) -> Result<(PhasePoint, PhaseParams)> {
    let probe = PhaseParams::new(d, rho, 1.0, 1.0)?;
    let k = probe.q1(t1) / (t1 + 2.0 * rho).powi(2);
    let a2 = probe.half_d().powi(2);
    let (qa, qc) = (1.0 - k, rho * rho + a2 - 4.0 * k * rho * rho);
    // product of the roots is qc/qa and one root is −t1
    let t2 = if qa.abs() < 1e-12 { -qc / (2.0 * rho + 4.0 * k * rho) } else { qc / (qa * -t1) };
    let p = PhasePoint::new(t1, t2);
    p.check(&probe)?;
    let ups1 = ((t1 + 2.0 * rho) * probe.q1(t1) / ((t1 + t2) * t1 * t1)).abs();
    let ups2 = ((t2 - 2.0 * rho) * probe.q2(t2) / ((t1 + t2) * t2 * t2)).abs();
    Ok((p, PhaseParams::new(d, rho, ups1, ups2)?))
}

/// Nearest power of two (at least 1).
pub fn dyadic(x: f64) -> f64 {
    2f64.powi(x.abs().log2().round().max(0.0) as i32)
}

/// Region specs centred on stationary points at `d = T`, `ρ = T` for a
/// spread of `t1`, with dyadic `B`'s and the `4 log T` threshold.
pub fn calibration_regions(t: u32) -> Result<Vec<(RegionSpec, PhaseParams)>> {
    let tf = t as f64;
    let thr = 4.0 * tf.ln();
    [-3.0, -5.0, -8.0, -1.2, 2.4]
        .iter()
        .map(|&f| {
            let (p, pp) = stationary_point(t, tf, f * tf)?;
            let rs = RegionSpec::new(
                p.t1,
                p.t2,
                dyadic(p.t1 + 2.0 * tf),
                dyadic(p.t2 - 2.0 * tf),
                dyadic(p.t1 + p.t2),
                thr,
            )?;
            Ok((rs, pp))
        })
        .collect()
}

/// Exponent bookkeeping for the nearly generic case. Read-only record of
/// the constraint set `u1 > b`, `u2 > u1 + 12b + d`, `c > 6b`, `d > 8b`,
/// all in `(0, 1/5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseExponents {
    pub u1: f64,
    pub u2: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CaseExponents {
    /// The final choice `d = 9b`, `u1 = 3/34 − 5b/2`, `u2 = 13/68 + 59b/4`, `c = 3/34 + 27b/2`.
    pub fn chosen(b: f64) -> Self {
        Self { u1: 3.0 / 34.0 - 2.5 * b, u2: 13.0 / 68.0 + 59.0 * b / 4.0, b, c: 3.0 / 34.0 + 13.5 * b, d: 9.0 * b }
    }

    /// Names of the violated constraints; empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [("u1", self.u1), ("u2", self.u2), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(x > 0.0 && x < 0.2) {
                v.push(format!("{name} = {x} outside (0, 1/5)"));
            }
        }
        if self.u1 <= self.b {
            v.push("u1 > b".into());
        }
        if self.u2 <= self.u1 + 12.0 * self.b + self.d {
            v.push("u2 > u1 + 12b + d".into());
        }
        if self.c <= 6.0 * self.b {
            v.push("c > 6b".into());
        }
        if self.d <= 8.0 * self.b {
            v.push("d > 8b".into());
        }
        v
    }

    pub fn satisfies_constraints(&self) -> bool {
        self.violations().is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> PhaseParams {
        PhaseParams::new(50, 50.0, 1.3, 0.7).unwrap()
    }

    /// Random points away from the log singularities.
    fn random_points(n: usize, seed: u64, pp: &PhaseParams) -> Vec<PhasePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < n {
            let p = PhasePoint::new(rng.gen_range(-400.0..400.0), rng.gen_range(-400.0..400.0));
            let r = pp.rho;
            if [p.t1, p.t1 + 2.0 * r, p.t2, p.t2 - 2.0 * r, p.t1 + p.t2].iter().all(|x| x.abs() > 1.0) {
                out.push(p);
            }
        }
        out
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let pp = params();
        for p in random_points(1000, 7, &pp) {
            let h = 1e-5 * p.t1.abs().min(p.t2.abs()).min((p.t1 + p.t2).abs()).max(1e-3);
            let g = |q: PhasePoint, r: &PhaseParams| phase_g(&q, r).unwrap();
            let fd1 = (g(PhasePoint::new(p.t1 + h, p.t2), &pp) - g(PhasePoint::new(p.t1 - h, p.t2), &pp)) / (2.0 * h);
            let fd2 = (g(PhasePoint::new(p.t1, p.t2 + h), &pp) - g(PhasePoint::new(p.t1, p.t2 - h), &pp)) / (2.0 * h);
            let (mut up, mut dn) = (pp, pp);
            up.rho += h;
            dn.rho -= h;
            let fdr = (g(p, &up) - g(p, &dn)) / (2.0 * h);
            assert!(close(fd1, phase_g1(&p, &pp).unwrap(), 1e-6), "{p:?}");
            assert!(close(fd2, phase_g2(&p, &pp).unwrap(), 1e-6), "{p:?}");
            assert!(close(fdr, phase_h(&p, &pp).unwrap(), 1e-6), "{p:?}");
        }
    }

    #[test]
    fn second_derivatives_match_differences() {
        let pp = params();
        for p in random_points(200, 8, &pp) {
            let h = 1e-5 * p.t1.abs().min(p.t2.abs()).min((p.t1 + p.t2).abs()).max(1e-3);
            let g1 = |a: f64, b: f64| phase_g1(&PhasePoint::new(a, b), &pp).unwrap();
            let g2 = |a: f64, b: f64| phase_g2(&PhasePoint::new(a, b), &pp).unwrap();
            let mixed = -1.0 / (p.t1 + p.t2);
            assert_eq!(phase_g1_t2(&p, &pp).unwrap(), mixed);
            let hm = 1e-5 * (p.t1 + p.t2).abs();
            let fd12 = (g1(p.t1, p.t2 + hm) - g1(p.t1, p.t2 - hm)) / (2.0 * hm);
            let fd21 = (g2(p.t1 + hm, p.t2) - g2(p.t1 - hm, p.t2)) / (2.0 * hm);
            assert!((fd12 - mixed).abs() <= 1e-8 * mixed.abs().max(1e-3), "{p:?}");
            assert!((fd21 - mixed).abs() <= 1e-8 * mixed.abs().max(1e-3), "{p:?}");
            let fd11 = (g1(p.t1 + h, p.t2) - g1(p.t1 - h, p.t2)) / (2.0 * h);
            let exact = phase_g1_t1(&p, &pp).unwrap();
            assert!((fd11 - exact).abs() <= 1e-7 * exact.abs().max(1e-3));
            assert!(close(exact, phase_gi_deriv(1, 1, &p, &pp).unwrap(), 1e-12));
            for n in 1..=3 {
                for i in [1u8, 2] {
                    let f = |a: f64, b: f64| phase_gi_deriv(i, n, &PhasePoint::new(a, b), &pp).unwrap();
                    let fd = if i == 1 { (f(p.t1 + h, p.t2) - f(p.t1 - h, p.t2)) / (2.0 * h) } else { (f(p.t1, p.t2 + h) - f(p.t1, p.t2 - h)) / (2.0 * h) };
                    let next = phase_gi_deriv(i, n + 1, &p, &pp).unwrap();
                    assert!((fd - next).abs() <= 1e-5 * next.abs() + 1e-12, "{i} {n} {p:?}");
                }
            }
        }
    }

    #[test]
    fn exp_g1_is_the_cubic_quotient() {
        let pp = params();
        let (c1, c2) = (pp.c1(), pp.c2());
        for p in random_points(1000, 9, &pp) {
            let (t1, t2) = (p.t1, p.t2);
            let q1 = ((t1.powi(3) - c1 * t1 - c2) / ((t1 + t2) * t1 * t1 * pp.ups1)).abs();
            let q2 = ((t2.powi(3) - c1 * t2 + c2) / ((t1 + t2) * t2 * t2 * pp.ups2)).abs();
            assert!((phase_g1(&p, &pp).unwrap().exp() / q1 - 1.0).abs() < 1e-10);
            assert!((phase_g2(&p, &pp).unwrap().exp() / q2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn upsilon_shift_moves_only_its_term() {
        let pp = params();
        let mut shifted = pp;
        shifted.ups1 *= std::f64::consts::E;
        for p in random_points(50, 10, &pp) {
            let delta = phase_g(&p, &shifted).unwrap() - phase_g(&p, &pp).unwrap();
            assert!((delta + p.t1).abs() <= 1e-9 * p.t1.abs().max(1.0));
            assert_eq!(phase_h(&p, &shifted).unwrap(), phase_h(&p, &pp).unwrap());
        }
    }

    #[test]
    fn g1_vanishes_on_its_zero_locus_and_cubic_residual_follows() {
        let pp0 = params();
        for p in random_points(200, 11, &pp0) {
            let (t1, t2, r, a2) = (p.t1, p.t2, pp0.rho, 625.0);
            let ups1 = ((t1 + 2.0 * r) * (a2 + (r - t1).powi(2)) / ((t1 + t2) * t1 * t1)).abs();
            let pp = PhaseParams { ups1, ..pp0 };
            assert!(phase_g1(&p, &pp).unwrap().abs() < 1e-12);
            let num = t1.powi(3) - pp.c1() * t1 - pp.c2();
            let alpha1 = if num / (t1 + t2) > 0.0 { 1 } else { -1 };
            let (r1, _) = cubic_residuals(&p, &pp, alpha1, 1).unwrap();
            assert!(r1.abs() <= 1e-9 * (t1 * t1 * (t1 + t2)).abs());
        }
    }

    #[test]
    fn cubic_residuals_expand_and_scale() {
        let pp = params();
        for p in random_points(200, 12, &pp) {
            for (a1, a2) in [(1i8, 1i8), (-1, 1), (1, -1), (-1, -1)] {
                let (r1, r2) = cubic_residuals(&p, &pp, a1, a2).unwrap();
                let (t1, t2, c1, c2) = (p.t1, p.t2, pp.c1(), pp.c2());
                let e1 = (1.0 / pp.ups1 - a1 as f64) * t1.powi(3) - c1 * t1 / pp.ups1 - c2 / pp.ups1 - a1 as f64 * t1 * t1 * t2;
                let e2 = (1.0 / pp.ups2 - a2 as f64) * t2.powi(3) - c1 * t2 / pp.ups2 + c2 / pp.ups2 - a2 as f64 * t2 * t2 * t1;
                let scale = (t1.abs() + t2.abs() + 100.0).powi(3);
                assert!((r1 - e1).abs() <= 1e-9 * scale && (r2 - e2).abs() <= 1e-9 * scale);
                let lam = 2.0;
                let big = PhaseParams { d: 100, rho: 100.0, ..pp };
                let (s1, s2) = cubic_residuals(&PhasePoint::new(lam * t1, lam * t2), &big, a1, a2).unwrap();
                assert!((s1 - 8.0 * r1).abs() <= 1e-9 * 8.0 * scale && (s2 - 8.0 * r2).abs() <= 1e-9 * 8.0 * scale);
            }
        }
        assert!(cubic_residuals(&PhasePoint::new(1.0, 2.0), &pp, 0, 1).is_err());
    }

    #[test]
    fn h_is_antisymmetric_under_reflection() {
        let pp = params();
        for p in random_points(100, 13, &pp) {
            let q = PhasePoint::new(-p.t2, -p.t1);
            assert!((phase_h(&p, &pp).unwrap() + phase_h(&q, &pp).unwrap()).abs() < 1e-12);
        }
        // spot value just off the antidiagonal
        let v = phase_h(&PhasePoint::new(-150.0, 151.0), &pp).unwrap();
        assert!((v + 0.02978288318231586).abs() < 1e-12, "{v}");
    }

    #[test]
    fn large_t1_derivative_follows_t2_over_t1_squared() {
        let pp = params();
        let t = pp.t_scale();
        for u2 in [50.0, -80.0, 150.0] {
            let u1 = 100.0 * (t + f64::abs(u2));
            for (a, b) in [(u1, u2), (-u1, u2), (u1 * 1.7, u2 * 0.6)] {
                let p = PhasePoint::new(a, b);
                let ratio = phase_g1_t1(&p, &pp).unwrap() / (b / (a * a));
                assert!(ratio > 1.0 / 3.0 && ratio < 3.0, "{ratio}");
            }
        }
    }

    #[test]
    fn small_b_leading_terms_within_envelope() {
        let pp = params();
        let r = pp.rho;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let b1 = rng.gen_range(2000.0..20000.0) * if rng.gen() { 1.0 } else { -1.0 };
            let b2 = rng.gen_range(0.5..10.0) * if rng.gen() { 1.0 } else { -1.0 };
            let p = PhasePoint::new(b1 - 2.0 * r, b2 + 2.0 * r);
            let err = (phase_g1_t1(&p, &pp).unwrap() - g1_t1_leading(&p, &pp)).abs();
            assert!(err <= 10.0 * b2.abs() / (b1 * b1));
            let q = PhasePoint::new(b2 - 2.0 * r, b1 + 2.0 * r);
            let err = (phase_g2_t2(&q, &pp).unwrap() - g2_t2_leading(&q, &pp)).abs();
            assert!(err <= 10.0 * b2.abs() / (b1 * b1));
        }
    }

    #[test]
    fn singular_points_rejected() {
        let pp = params();
        for (a, b) in [(0.0, 3.0), (-100.0, 3.0), (5.0, 0.0), (5.0, 100.0), (5.0, -5.0)] {
            assert!(matches!(phase_g(&PhasePoint::new(a, b), &pp), Err(Error::Singularity(_))));
        }
        assert!(PhaseParams::new(50, 50.0, 0.0, 1.0).is_err());
        assert!(RegionSpec::new(10.0, 10.0, 1.0, 64.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn stationary_point_zeroes_all_three_derivatives() {
        for t1 in [-150.0, -60.0, -250.0, -400.0] {
            let (p, pp) = stationary_point(50, 50.0, t1).unwrap();
            assert!(phase_g1(&p, &pp).unwrap().abs() < 1e-12);
            assert!(phase_g2(&p, &pp).unwrap().abs() < 1e-12);
            assert!(phase_h(&p, &pp).unwrap().abs() < 1e-12);
            let rs = RegionSpec::new(
                p.t1,
                p.t2,
                (p.t1 + 100.0).abs(),
                (p.t2 - 100.0).abs(),
                (p.t1 + p.t2).abs(),
                4.0 * 50f64.ln(),
            )
            .unwrap();
            let (c1, c2, r) = consistency_relations(&rs, &pp);
            assert!([c1, c2, r].iter().all(|&x| within(x, 5.0)), "{t1}: {c1} {c2} {r}");
        }
    }

    #[test]
    fn calibration_regions_at_t50() {
        for (rs, pp) in calibration_regions(50).unwrap() {
            let a = region_sample(&rs, &pp, 128).unwrap();
            let b = region_sample(&rs, &pp, 256).unwrap();
            assert!(a.measure > 0.0);
            assert!((a.measure - b.measure).abs() < 0.05 * b.measure);
            let s = sublemma_check(&rs, &pp, 128, 10.0).unwrap();
            assert!(s.pass, "{s:?}");
            let d = scan_derivative_bounds(&rs, &pp, 128).unwrap();
            assert!((d.mixed_exact - 1.0).abs() < 1e-12);
            assert!(d.mixed_shell <= 2.0);
            assert!(d.c[0][0] <= 8.0 && d.c[1][0] <= 8.0, "{:?}", d.c);
            assert!(d.c[0][1] <= 64.0 && d.c[1][1] <= 64.0, "{:?}", d.c);
            assert!(consistency_check(&rs, &pp, 20.0).unwrap().pass);
        }
    }

    #[test]
    fn misscaled_upsilon_empties_the_region() {
        let (rs, pp) = calibration_regions(50).unwrap()[0];
        let bad = PhaseParams { ups1: pp.ups1 * 1e6, ..pp };
        let c = consistency_check(&rs, &bad, 20.0).unwrap();
        assert!(c.point.is_none() && c.pass);
        let far = PhaseParams { ups1: pp.ups1 * 1e60, ..pp };
        assert_eq!(region_measure(&rs, &far, 64).unwrap(), 0.0);
        assert!(region_sample(&rs, &pp, MAX_GRID + 1).is_err());
    }

    #[test]
    fn chosen_exponents() {
        let e = CaseExponents::chosen(1e-4);
        assert!(e.satisfies_constraints(), "{:?}", e.violations());
        // at the final b the u2 exponent leaves (0, 1/5); the relational constraints still hold
        let e = CaseExponents::chosen(2.0 / 595.0);
        assert_eq!(e.violations().len(), 1);
        assert!(e.violations()[0].starts_with("u2"));
    }
}
