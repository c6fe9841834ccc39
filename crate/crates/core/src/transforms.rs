//! Spectrally averaged weights `Φ_w4`, `Φ_w5`, `Φ_w6`, the Fourier-transformed
//! kernels `K̃` and `𝒦` (plus the ρ-average of `𝒦`) and the decay scans.
//!
//! The spectral averages exchange the ρ-integral with the Bessel-integral
//! form of the kernel: against the Gaussian test function the ρ-integral is
//! a Gaussian moment in closed form, which localizes the remaining real
//! integral to a window in log scale.

use crate::kernels::{i_pow, k_w4, log_q_mod, KernelSettings, SignPair};
use crate::kloosterman::euler_phi;
use crate::quad::{adaptive_gk, gauss_hermite, BumpSpec, BumpTransform, QuadResult, QuadratureSettings};
use crate::special::{bessel_j, log_gamma_mod, SpectralPoint};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gaussian test function `F(iρ) = amplitude · exp(−(ρ − rho_center)²/width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub rho_center: f64,
    pub width: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl TestFunctionSpec {
    pub fn new(rho_center: f64, width: f64) -> Result<Self> {
        if !rho_center.is_finite() || !(width > 0.0 && width.is_finite()) {
            return Err(Error::Invalid("test function needs finite center and positive width".into()));
        }
        Ok(Self { rho_center, width, amplitude: 1.0 })
    }

    pub fn scaled(self, k: f64) -> Self {
        Self { amplitude: self.amplitude * k, ..self }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        self.amplitude * (-(rho - self.rho_center).powi(2) / self.width).exp()
    }

    /// `∫ F(iρ) spec^d(iρ) e^{iρL} dρ` in closed form.
    pub fn spectral_moment(&self, d: u32, l: f64) -> C64 {
        let (w, rf) = (self.width, self.rho_center);
        let dm = d as f64 - 1.0;
        let poly = C64::new(dm * dm / 4.0 + 9.0 * (rf * rf + w / 2.0 - w * w * l * l / 4.0), 9.0 * rf * l * w);
        let g = self.amplitude * dm / (8.0 * PI.powi(3)) * (PI * w).sqrt() * (-w * l * l / 4.0).exp();
        C64::from_polar(g, l * rf) * poly
    }

    /// `|L|` past which the moment is below `e^{−60}` of its peak.
    pub fn window(&self) -> f64 {
        (240.0 / self.width).sqrt()
    }

    fn check(&self) -> Result<()> {
        Self::new(self.rho_center, self.width).map(|_| ())
    }
}

/// The compactly supported `G` of the ρ-average; same shape as the bump.
pub type SmoothCutoffSpec = BumpSpec;

fn check_weight(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::Invalid(format!("weight d = {d} must be at least 2")));
    }
    Ok(())
}

fn finish(r: QuadResult, what: &str) -> Result<QuadResult> {
    if !r.converged {
        return Err(Error::NonConvergence(format!("{what}: estimate {} ± {}", r.value, r.err_est)));
    }
    Ok(r)
}

/// A cancelling integral whose error sits at the rounding floor of its mass
/// is as converged as it can get.
fn at_roundoff_floor(r: QuadResult, mass: f64) -> QuadResult {
    QuadResult { converged: r.converged || r.err_est <= 1e-14 * mass, ..r }
}

/// `Φ_w4(y) = (1/|y|) ∫ F(r) K_w4(y; d, r) spec^d(r) dr/2πi`.
pub fn phi_w4(y: f64, d: u32, f: &TestFunctionSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    finish(phi_w45(y, d, f, false, st)?, "phi_w4")
}

/// `Φ_w5(y)`: as `Φ_w4` with `K_w4(−y; d, −r)` inside.
pub fn phi_w5(y: f64, d: u32, f: &TestFunctionSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    finish(phi_w45(y, d, f, true, st)?, "phi_w5")
}

/// Unchecked variant: a non-converged result comes back flagged, not as an error.
pub(crate) fn phi_w45(y: f64, d: u32, f: &TestFunctionSpec, reflect: bool, st: &QuadratureSettings) -> Result<QuadResult> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::Invalid("phi needs a finite nonzero y".into()));
    }
    check_weight(d)?;
    f.check()?;
    st.validate()?;
    let eps = if reflect { -y.signum() } else { y.signum() };
    let lsign = if reflect { -1.0 } else { 1.0 };
    let ay = y.abs();
    let big = 4.0 * PI.powi(3) * ay;
    // K_w4 = 2(εi)^d |y|^{1−r} π^{1−3r} ∫ J(2√x) e^{2εiY/x} (Y/x)^{3r} dx/x; the
    // ρ-dependence is e^{iρL} with L below, in v = log x
    let l0 = 3.0 * big.ln() - ay.ln() - 3.0 * PI.ln();
    let vstar = (4.0 * PI * PI).ln() + 2.0 * ay.ln() / 3.0;
    let half = f.window() / 3.0;
    let (a, b) = (vstar - half, vstar + half);
    let n = d - 1;
    let g = |v: f64| {
        let x = v.exp();
        let j = bessel_j(n, 2.0 * x.sqrt());
        if j == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(j, 2.0 * eps * big / x) * f.spectral_moment(d, lsign * (l0 - 3.0 * v))
    };
    let phase = 3.0 * f.rho_center.abs() * (b - a) + 2.0 * big * ((-a).exp() - (-b).exp()) + 2.0 * ((b / 2.0).exp() - (a / 2.0).exp());
    let pieces = (phase / PI).ceil().min(1e6) as usize + 8;
    let r = adaptive_gk(g, a, b, pieces, st.abs_tol, st.rel_tol, st.max_nodes);
    let r = at_roundoff_floor(r, f.spectral_moment(d, 0.0).norm() * (b - a));
    Ok(r.scale(i_pow(d, eps)))
}

/// `Φ_w6(y1, y2) = (1/|y1 y2|) ∫ F(r) K_w6(y; d, r) spec^d(r) dr/2πi`.
pub fn phi_w6(y1: f64, y2: f64, d: u32, f: &TestFunctionSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    finish(phi_w6_flagged(y1, y2, d, f, st)?, "phi_w6")
}

pub(crate) fn phi_w6_flagged(y1: f64, y2: f64, d: u32, f: &TestFunctionSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    if y1 == 0.0 || y2 == 0.0 || !y1.is_finite() || !y2.is_finite() {
        return Err(Error::Invalid("phi_w6 needs finite nonzero arguments".into()));
    }
    check_weight(d)?;
    f.check()?;
    st.validate()?;
    let sp = SignPair::of(y1, y2);
    if sp.eps1 > 0 && sp.eps2 > 0 {
        return Ok(QuadResult::exact(C64::new(0.0, 0.0)));
    }
    let (b1, b2) = (4.0 * PI * y1.abs().sqrt(), 4.0 * PI * y2.abs().sqrt());
    let l0 = (y2.abs() / y1.abs()).ln();
    let lm = f.window();
    let n = d - 1;
    // v = logit x for (−,−), v = log x for the mixed rows; L = l0 + slope·v
    let (lo, hi, slope) = match (sp.eps1, sp.eps2) {
        (-1, -1) => ((-l0 - lm) / 3.0, (-l0 + lm) / 3.0, 3.0),
        (-1, _) => ((l0 - lm) / 3.0, ((l0 + lm) / 3.0).min(0.0), -3.0),
        _ => ((-l0 - lm) / 3.0, ((-l0 + lm) / 3.0).min(0.0), 3.0),
    };
    if lo >= hi {
        return Ok(QuadResult::exact(C64::new(0.0, 0.0)));
    }
    let args = |v: f64| -> (f64, f64) {
        match (sp.eps1, sp.eps2) {
            (-1, -1) => (b1 * (1.0 + (-v).exp()).sqrt(), b2 * (1.0 + v.exp()).sqrt()),
            (-1, _) => (b1 * (-v.exp_m1()).max(0.0).sqrt(), b2 * (-v).exp_m1().max(0.0).sqrt()),
            _ => (b1 * (-v).exp_m1().max(0.0).sqrt(), b2 * (-v.exp_m1()).max(0.0).sqrt()),
        }
    };
    let g = |v: f64| {
        let (z1, z2) = args(v);
        let jj = bessel_j(n, z1) * bessel_j(n, z2);
        if jj == 0.0 {
            return C64::new(0.0, 0.0);
        }
        f.spectral_moment(d, l0 + slope * v) * jj
    };
    let (za, zb) = (args(lo), args(hi));
    let phase = 3.0 * f.rho_center.abs() * (hi - lo) + (za.0 - zb.0).abs() + (za.1 - zb.1).abs();
    let pieces = (phase / PI).ceil().min(1e6) as usize + 8;
    let r = adaptive_gk(g, lo, hi, pieces, st.abs_tol, st.rel_tol, st.max_nodes);
    let r = at_roundoff_floor(r, f.spectral_moment(d, 0.0).norm() * (hi - lo));
    let sign = if sp.eps1 < 0 && sp.eps2 < 0 && d % 2 == 1 { -1.0 } else { 1.0 };
    Ok(r.scale(C64::new(2.0 * PI * sign, 0.0)))
}

/// `∫ F(iρ) spec^d(iρ) k(ρ) dρ/2π` on Gauss–Hermite nodes matched to `F`;
/// an independent route to the spectral averages for cross-checks.
pub fn spectral_average_hermite<K: FnMut(f64) -> Result<C64>>(
    f: &TestFunctionSpec,
    d: u32,
    nodes: usize,
    mut k: K,
) -> Result<C64> {
    let sw = f.width.sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in gauss_hermite(nodes) {
        let rho = f.rho_center + sw * x;
        acc += k(rho)? * (w * f.amplitude * sw * crate::special::spec_density(d, rho));
    }
    Ok(acc / (2.0 * PI))
}

fn log_w(z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        C64::new(f64::NEG_INFINITY, 0.0)
    } else {
        z.ln()
    }
}

/// Range of `Im s` where `ŵ(s, U)` is concentrated: stationary phase at
/// `Im s = 2πUξ`, widened by the bump's spectral tail.
fn bump_window(w: &BumpSpec, us: &[f64], tail: f64) -> (f64, f64) {
    let (lo, hi) = w.support();
    let hw = 0.5 * (hi / lo).ln();
    // tail of a single factor ~ exp(−sqrt(2·hw·τ)), so e^{−tail} per factor
    let margin = tail * tail / (2.0 * hw);
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for &u in us {
        let (p, q) = (2.0 * PI * u * lo, 2.0 * PI * u * hi);
        a = a.min(p.min(q));
        b = b.max(p.max(q));
    }
    (a - margin, b + margin)
}

fn trapezoid_step(log_scale: f64, tmax: f64, pt: &SpectralPoint, w: &BumpSpec, delta: f64) -> f64 {
    let omega = log_scale.abs() + 3.0 * (2.0 + tmax + 3.0 * pt.rho.abs() + pt.df()).ln() + 2.0 * w.support().1.ln().abs() + 2.0;
    (2.0 * PI * delta / (omega * delta + 40.0)).min(0.25)
}

/// The integrand of `K̃(Ξ, U, V) = ∫ |Ξ|^{−r−s} G(s) ŵ(s+r, U) ŵ(s+r, V) ds/2πi`
/// on `Re s = 1/2`, tabulated once per sign of `Ξ` so that many `|Ξ|` reuse it.
#[derive(Debug, Clone)]
pub struct KtildeLine {
    c: f64,
    t0: f64,
    h: f64,
    rho: f64,
    vals: Vec<C64>,
    edge: f64,
}

impl KtildeLine {
    pub fn new(sign: f64, u: f64, v: f64, pt: &SpectralPoint, w: &BumpSpec, max_abs_xi: f64) -> Result<Self> {
        let c = 0.5;
        let (tau_lo, tau_hi) = bump_window(w, &[u, v], 21.0);
        let rho = pt.rho;
        let tmax = (tau_lo - rho).abs().max((tau_hi - rho).abs());
        let l8 = (8.0 * PI.powi(3)).ln();
        let h = trapezoid_step(l8 + max_abs_xi.ln(), tmax, pt, w, 0.45);
        let n = ((tau_hi - tau_lo) / h).ceil() as usize + 1;
        let max_im = tau_lo.abs().max(tau_hi.abs()) + 10.0;
        let wu = BumpTransform::new(w, u, max_im)?.eval_line(c, tau_lo, h, n);
        let wv = if v == u { wu.clone() } else { BumpTransform::new(w, v, max_im)?.eval_line(c, tau_lo, h, n) };
        let eps = if sign > 0.0 { 1.0 } else { -1.0 };
        let r = pt.r();
        let lpre = (i_pow(pt.d, eps) / (4.0 * PI * PI)).ln() + (h / (2.0 * PI)).ln();
        let t0 = tau_lo - rho;
        let mut vals = Vec::with_capacity(n);
        for k in 0..n {
            let s = C64::new(c, t0 + h * k as f64);
            let Some(lq) = log_q_mod(pt.d, s) else {
                vals.push(C64::new(0.0, 0.0));
                continue;
            };
            let lg = lpre
                + (1.0 - r - s) * l8
                + lq
                + log_gamma_mod(s + 3.0 * r)
                + C64::new(0.0, eps * PI / 2.0) * (s + 3.0 * r)
                + log_w(wu[k])
                + log_w(wv[k]);
            vals.push(lg.exp());
        }
        let edge = (vals[0].norm() + vals[n - 1].norm()) / h * 10.0;
        Ok(Self { c, t0, h, rho, vals, edge })
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn eval(&self, abs_xi: f64) -> QuadResult {
        let lx = abs_xi.ln();
        // |Ξ|^{−r−s} = exp(−(c + i(t + ρ)) log|Ξ|)
        let step = C64::from_polar(1.0, -self.h * lx);
        let scale = (-self.c * lx).exp();
        let (mut full, mut even, mut mass) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        let mut z = C64::new(0.0, 0.0);
        for (k, &v) in self.vals.iter().enumerate() {
            if k % 128 == 0 {
                z = C64::from_polar(scale, -(self.t0 + self.h * k as f64 + self.rho) * lx);
            }
            let term = v * z;
            full += term;
            mass += term.norm();
            if k % 2 == 0 {
                even += term;
            }
            z *= step;
        }
        let m = mass.max(1e-300);
        let rel = ((full - even * 2.0).norm() / m).min(1.0);
        let err = m * (10.0 * rel * rel + 1e-15 * (self.vals.len() as f64).sqrt()) + self.edge * scale;
        QuadResult { value: full, err_est: err, nodes_used: self.vals.len(), converged: err <= 1e-6 * m.max(full.norm()) }
    }
}

/// `K̃(Ξ, U, V) = (1/|Ξ|) ∫∫ K_w4(ξηΞ) e(ξU + ηV) W(ξ) W(η) dξ dη`, through
/// its one-dimensional Mellin form.
pub fn ktilde(xi: f64, u: f64, v: f64, pt: &SpectralPoint, w: &BumpSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    if xi == 0.0 || !xi.is_finite() || !u.is_finite() || !v.is_finite() {
        return Err(Error::Invalid("ktilde needs finite arguments and Ξ ≠ 0".into()));
    }
    st.validate()?;
    let line = KtildeLine::new(xi.signum(), u, v, pt, w, xi.abs())?;
    let r = line.eval(xi.abs());
    let ok = r.converged || r.err_est <= st.target(r.value);
    finish(QuadResult { converged: ok, ..r }, "ktilde")
}

/// `M(p) = ∫ W(ξ) W(p/ξ) e(ξU + pV/ξ) dξ/ξ`: the weight seen by a kernel
/// that depends on `ξη` only.
fn product_weight(p: f64, u: f64, v: f64, w: &BumpSpec, gl: &[(f64, f64)]) -> C64 {
    let (lo, hi) = w.support();
    let a = lo.max(p / hi);
    let b = hi.min(p / lo);
    if a >= b {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for &(x, wt) in gl {
        let xi = a + (b - a) * x;
        let eta = p / xi;
        let amp = w.eval(xi) * w.eval(eta);
        if amp != 0.0 {
            acc += C64::from_polar(amp * wt / xi, 2.0 * PI * (xi * u + eta * v));
        }
    }
    acc * (b - a)
}

/// Interior trapezoid nodes on `[0, 1]`; spectrally accurate for integrands
/// that vanish to all orders at both ends, as every bump product here does.
fn trapezoid01(n: usize) -> Vec<(f64, f64)> {
    (1..n).map(|k| (k as f64 / n as f64, 1.0 / n as f64)).collect()
}

/// `K̃` by real quadrature: trapezoid rules in `p = ξη` against the kernel
/// and in `ξ` for the product weight.
pub fn ktilde_direct(xi: f64, u: f64, v: f64, pt: &SpectralPoint, w: &BumpSpec, nodes: usize, ks: &KernelSettings) -> Result<C64> {
    let (lo, hi) = w.support();
    let (pa, pb) = (lo * lo, hi * hi);
    let inner = trapezoid01(nodes);
    let mut acc = C64::new(0.0, 0.0);
    for (x, wt) in trapezoid01(nodes) {
        let p = pa + (pb - pa) * x;
        let m = product_weight(p, u, v, w, &inner);
        if m.norm() < 1e-300 {
            continue;
        }
        acc += k_w4(p * xi, pt, ks)?.value * m * wt;
    }
    Ok(acc * (pb - pa) / xi.abs())
}

/// Dual variables `(U1, V1, U2, V2)` of `𝒦`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualVars {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
}

impl DualVars {
    pub fn new(u1: f64, v1: f64, u2: f64, v2: f64) -> Self {
        Self { u1, v1, u2, v2 }
    }
}

/// Tensor trapezoid for `𝒦 = 4π² ∫∫ |4π²Ξ1|^{−s1} |4π²Ξ2|^{−s2} G^ε(s1, s2) ŵŵŵŵ`,
/// split as `a(s1) b(s2) c(s1 + s2)` and summed to per-diagonal totals.
struct KfullGrid {
    c: f64,
    t0: [f64; 2],
    h: f64,
    diag: Vec<C64>,
    diag_even: Vec<C64>,
    edge: f64,
    nodes: usize,
}

const BLOCK: usize = 64;

impl KfullGrid {
    fn build(xi1: f64, xi2: f64, dv: &DualVars, pt: &SpectralPoint, w: &BumpSpec) -> Result<Option<Self>> {
        let sp = SignPair::of(xi1, xi2);
        if sp.eps1 > 0 && sp.eps2 > 0 {
            return Ok(None);
        }
        let c = 1.0 / 3.0;
        let r = pt.r();
        let d = pt.d;
        let (a0, a1) = bump_window(w, &[dv.u1, dv.v1], 14.0);
        let (b0, b1) = bump_window(w, &[dv.u2, dv.v2], 14.0);
        let tmax = [a0, a1, b0, b1].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let l1 = (4.0 * PI * PI * xi1.abs()).ln();
        let l2 = (4.0 * PI * PI * xi2.abs()).ln();
        let h = trapezoid_step(l1.abs().max(l2.abs()), tmax, pt, w, 0.3);
        let n1 = ((a1 - a0) / h).ceil() as usize + 1;
        let n2 = ((b1 - b0) / h).ceil() as usize + 1;
        let side = |u: f64, v: f64, t0: f64, n: usize| -> Result<Vec<C64>> {
            let max_im = tmax + 10.0;
            let a = BumpTransform::new(w, u, max_im)?.eval_line(c, t0, h, n);
            let b = if u == v { a.clone() } else { BumpTransform::new(w, v, max_im)?.eval_line(c, t0, h, n) };
            Ok(a.iter().zip(&b).map(|(x, y)| log_w(*x) + log_w(*y)).collect())
        };
        let lgm = log_gamma_mod;
        let lq = |s: C64| log_q_mod(d, s).unwrap_or(C64::new(f64::NEG_INFINITY, 0.0));
        let mut la = side(dv.u1, dv.v1, a0, n1)?;
        for (i, x) in la.iter_mut().enumerate() {
            let s = C64::new(c, a0 + h * i as f64);
            *x += -s * l1
                + lq(s - r)
                + match (sp.eps1, sp.eps2) {
                    (-1, -1) => lgm(s + 2.0 * r),
                    (-1, _) => -lgm(1.0 - s - 2.0 * r),
                    _ => lgm(s + 2.0 * r),
                };
        }
        let mut lb = side(dv.u2, dv.v2, b0, n2)?;
        for (j, x) in lb.iter_mut().enumerate() {
            let s = C64::new(c, b0 + h * j as f64);
            *x += -s * l2
                + lq(s + r)
                + match (sp.eps1, sp.eps2) {
                    (-1, -1) => lgm(s - 2.0 * r),
                    (-1, _) => lgm(s - 2.0 * r),
                    _ => -lgm(1.0 + 2.0 * r - s),
                };
        }
        let nk = n1 + n2 - 1;
        let lc: Vec<C64> = (0..nk)
            .map(|k| {
                let sig = C64::new(2.0 * c, a0 + b0 + h * k as f64);
                if sp.eps1 < 0 && sp.eps2 < 0 {
                    -lgm(sig)
                } else {
                    lgm(1.0 - sig)
                }
            })
            .collect();
        // (−1)^d of the (−, −) row as a phase
        let odd = sp.eps1 < 0 && sp.eps2 < 0 && d % 2 == 1;
        let lpre = C64::new((4.0 * PI * PI).ln() + 2.0 * (h / (2.0 * PI)).ln(), if odd { PI } else { 0.0 });

        let blocks = |l: &[C64]| -> Vec<(usize, usize, f64, Vec<C64>)> {
            (0..l.len())
                .step_by(BLOCK)
                .map(|s| {
                    let e = (s + BLOCK).min(l.len());
                    let m = l[s..e].iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
                    let v = l[s..e].iter().map(|z| if m.is_finite() { (z - m).exp() } else { C64::new(0.0, 0.0) }).collect();
                    (s, e, m, v)
                })
                .collect()
        };
        let ba = blocks(&la);
        let bb = blocks(&lb);
        let gmax: Vec<f64> = (0..ba.len() + bb.len())
            .map(|q| {
                let s = q * BLOCK;
                let e = ((q + 2) * BLOCK).min(nk);
                if s >= nk {
                    f64::NEG_INFINITY
                } else {
                    lc[s..e].iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
                }
            })
            .collect();
        let mut top = f64::NEG_INFINITY;
        for (p, a) in ba.iter().enumerate() {
            for (q, b) in bb.iter().enumerate() {
                top = top.max(a.2 + b.2 + gmax[p + q]);
            }
        }
        // truncation: exact integrand size along the four edges of the grid
        let mut boundary = f64::NEG_INFINITY;
        for i in [0, n1 - 1] {
            for j in 0..n2 {
                boundary = boundary.max(la[i].re + lb[j].re + lc[i + j].re);
            }
        }
        for j in [0, n2 - 1] {
            for i in 0..n1 {
                boundary = boundary.max(la[i].re + lb[j].re + lc[i + j].re);
            }
        }
        if !top.is_finite() {
            return Err(Error::NonConvergence("kfull integrand vanishes identically on the grid".into()));
        }
        let mut diag = vec![C64::new(0.0, 0.0); nk];
        let mut diag_even = vec![C64::new(0.0, 0.0); nk];
        let mut local = vec![C64::new(0.0, 0.0); 2 * BLOCK];
        let mut local_even = vec![C64::new(0.0, 0.0); 2 * BLOCK];
        for (p, a) in ba.iter().enumerate() {
            for (q, b) in bb.iter().enumerate() {
                let ub = a.2 + b.2 + gmax[p + q];
                if ub < top - 42.0 {
                    continue;
                }
                local.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                local_even.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for (ii, &x) in a.3.iter().enumerate() {
                    let row = &mut local[ii..ii + b.3.len()];
                    for (o, &y) in row.iter_mut().zip(&b.3) {
                        *o += x * y;
                    }
                    if (a.0 + ii) % 2 == 0 {
                        for (jj, &y) in b.3.iter().enumerate() {
                            if (b.0 + jj) % 2 == 0 {
                                local_even[ii + jj] += x * y;
                            }
                        }
                    }
                }
                let k0 = a.0 + b.0;
                for off in 0..(a.3.len() + b.3.len() - 1) {
                    let k = k0 + off;
                    let f = (lc[k] + lpre + (a.2 + b.2 - top)).exp();
                    diag[k] += local[off] * f;
                    diag_even[k] += local_even[off] * f;
                }
            }
        }
        let scale = top.exp();
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::NonConvergence(format!("kfull integrand scale e^{top} out of range")));
        }
        diag.iter_mut().for_each(|z| *z *= scale);
        diag_even.iter_mut().for_each(|z| *z *= scale);
        Ok(Some(Self {
            c,
            t0: [a0, b0],
            h,
            diag,
            diag_even,
            edge: 20.0 * (boundary - top).exp(),
            nodes: n1 * n2,
        }))
    }

    fn sigma(&self, k: usize) -> C64 {
        C64::new(2.0 * self.c, self.t0[0] + self.t0[1] + self.h * k as f64)
    }

    /// `Σ_k diag_k · z0 · q^k` for a multiplier geometric along the diagonal.
    fn total_geometric(&self, z0: C64, q: C64) -> QuadResult {
        let (mut full, mut even, mut mass) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        let (mut z, mut zf) = (z0, z0.norm());
        for k in 0..self.diag.len() {
            if k % 256 == 0 {
                z = z0 * q.powu(k as u32);
                zf = z.norm();
            }
            let a = self.diag[k] * z;
            full += a;
            even += self.diag_even[k] * z;
            mass += self.diag[k].norm() * zf;
            z *= q;
        }
        self.finish_total(full, even, mass)
    }

    fn finish_total(&self, full: C64, even: C64, mass: f64) -> QuadResult {
        let m = mass.max(1e-300);
        let rel = ((full - even * 4.0).norm() / m).min(1.0);
        let err = m * (10.0 * rel * rel + 1e-15 * (self.nodes as f64).sqrt() + self.edge);
        QuadResult { value: full, err_est: err, nodes_used: self.nodes, converged: err <= 1e-6 * m }
    }

    /// `Σ_k diag_k · m(s1 + s2)`.
    fn total<M: Fn(C64) -> C64>(&self, m: M) -> QuadResult {
        let (mut full, mut even, mut mass) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
        for k in 0..self.diag.len() {
            let f = m(self.sigma(k));
            full += self.diag[k] * f;
            even += self.diag_even[k] * f;
            mass += (self.diag[k] * f).norm();
        }
        self.finish_total(full, even, mass)
    }
}

/// `𝒦(Ξ1, Ξ2; U1, V1; U2, V2)` of weight `W`, through the two-variable
/// Mellin form; zero when both `Ξ` are positive.
pub fn kfull(xi1: f64, xi2: f64, dv: &DualVars, pt: &SpectralPoint, w: &BumpSpec, st: &QuadratureSettings) -> Result<QuadResult> {
    st.validate()?;
    finish(kfull_flagged(xi1, xi2, dv, pt, w)?, "kfull")
}

pub(crate) fn kfull_flagged(xi1: f64, xi2: f64, dv: &DualVars, pt: &SpectralPoint, w: &BumpSpec) -> Result<QuadResult> {
    kfull_check(xi1, xi2, dv)?;
    match KfullGrid::build(xi1, xi2, dv, pt, w)? {
        None => Ok(QuadResult::exact(C64::new(0.0, 0.0))),
        Some(g) => Ok(g.total(|_| C64::new(1.0, 0.0))),
    }
}

fn kfull_check(xi1: f64, xi2: f64, dv: &DualVars) -> Result<()> {
    let all = [xi1, xi2, dv.u1, dv.v1, dv.u2, dv.v2];
    if xi1 == 0.0 || xi2 == 0.0 || all.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("kfull needs finite arguments and nonzero Ξ".into()));
    }
    Ok(())
}

/// Terms `(φ(D)/D²) 𝒦(Ξ1/D, Ξ2/D; 0, 0; 0, 0)` for `D = 1, 2, …` until
/// `dmax`, or earlier once every term over a doubling range `[D0, 2·D0]`
/// is below `rel_stop` times the largest term so far or below its own
/// error estimate. `𝒦(Ξ/D)` differs
/// from `𝒦(Ξ)` by `D^{s1+s2}` under the integral, so one grid serves all D.
pub fn kfull_divisor_sum(
    xi1: f64,
    xi2: f64,
    pt: &SpectralPoint,
    w: &BumpSpec,
    dmax: u64,
    rel_stop: f64,
) -> Result<(QuadResult, Vec<(u64, QuadResult)>)> {
    let dv = DualVars::default();
    kfull_check(xi1, xi2, &dv)?;
    let Some(g) = KfullGrid::build(xi1, xi2, &dv, pt, w)? else {
        return Ok((QuadResult::exact(C64::new(0.0, 0.0)), vec![(1, QuadResult::exact(C64::new(0.0, 0.0)))]));
    };
    let mut terms: Vec<(u64, QuadResult)> = Vec::new();
    let mut biggest = 0.0f64;
    let mut quiet_since = None;
    for dd in 1..=dmax {
        let ld = (dd as f64).ln();
        let base = C64::new(2.0 * g.c - 2.0, g.t0[0] + g.t0[1]);
        let t = g.total_geometric((base * ld).exp() * euler_phi(dd) as f64, C64::from_polar(1.0, g.h * ld));
        let size = t.value.norm();
        biggest = biggest.max(size);
        let noise = t.err_est;
        terms.push((dd, t));
        if size > rel_stop * biggest && size > noise {
            quiet_since = None;
        } else if quiet_since.is_none() {
            quiet_since = Some(dd);
        }
        if let Some(q) = quiet_since {
            if dd >= 2 * q {
                break;
            }
        }
    }
    let total = terms.iter().fold(QuadResult::zero(), |acc, t| acc.add(t.1));
    Ok((total, terms))
}

/// `∫ G((ρ − ρ0)/scale) 𝒦_{d, iρ}(…) dρ` by the trapezoid rule on `G`'s
/// support (spectrally accurate for a smooth compactly supported `G`),
/// checked against the half-density rule.
#[allow(clippy::too_many_arguments)]
pub fn kfull_rho_avg(
    xi1: f64,
    xi2: f64,
    dv: &DualVars,
    d: u32,
    g: &SmoothCutoffSpec,
    rho0: f64,
    scale: f64,
    w: &BumpSpec,
    nodes: usize,
) -> Result<QuadResult> {
    kfull_check(xi1, xi2, dv)?;
    check_weight(d)?;
    if !(scale > 0.0) || !rho0.is_finite() || nodes < 4 {
        return Err(Error::Invalid("rho average needs positive scale, finite rho0 and at least 4 nodes".into()));
    }
    let (lo, hi) = g.support();
    let n = 2 * nodes.div_ceil(2);
    let hstep = (hi - lo) / n as f64;
    let (mut full, mut even, mut err, mut used) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0, 0);
    let mut ok = true;
    for k in 1..n {
        let u = lo + hstep * k as f64;
        let gv = g.eval(u);
        if gv == 0.0 {
            continue;
        }
        let pt = SpectralPoint::new(d, rho0 + scale * u)?;
        let Some(grid) = KfullGrid::build(xi1, xi2, dv, &pt, w)? else {
            return Ok(QuadResult::exact(C64::new(0.0, 0.0)));
        };
        let r = grid.total(|_| C64::new(1.0, 0.0));
        ok &= r.converged;
        used += r.nodes_used;
        let t = r.value * (gv * hstep * scale);
        err += r.err_est * gv * hstep * scale;
        full += t;
        if k % 2 == 0 {
            even += t;
        }
    }
    let err = err + (full - even * 2.0).norm();
    Ok(QuadResult { value: full, err_est: err, nodes_used: used, converged: ok })
}

/// `𝒦` by real quadrature: the kernel depends on `ξ1η1` and `ξ2η2` only, so
/// trapezoid rules in the two products against the product weights.
pub fn kfull_direct(
    xi1: f64,
    xi2: f64,
    dv: &DualVars,
    pt: &SpectralPoint,
    w: &BumpSpec,
    nodes: usize,
    ks: &KernelSettings,
) -> Result<C64> {
    let (lo, hi) = w.support();
    let (pa, pb) = (lo * lo, hi * hi);
    let inner = trapezoid01(nodes);
    let outer = trapezoid01(nodes);
    let m1: Vec<C64> = outer.iter().map(|&(x, _)| product_weight(pa + (pb - pa) * x, dv.u1, dv.v1, w, &inner)).collect();
    let m2: Vec<C64> = outer.iter().map(|&(x, _)| product_weight(pa + (pb - pa) * x, dv.u2, dv.v2, w, &inner)).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (i, &(x1, w1)) in outer.iter().enumerate() {
        if m1[i].norm() < 1e-300 {
            continue;
        }
        for (j, &(x2, w2)) in outer.iter().enumerate() {
            if m2[j].norm() < 1e-300 {
                continue;
            }
            let p1 = pa + (pb - pa) * x1;
            let p2 = pa + (pb - pa) * x2;
            let k = crate::kernels::k_w6(p1 * xi1, p2 * xi2, pt, ks)?.value;
            acc += k * m1[i] * m2[j] * (w1 * w2);
        }
    }
    Ok(acc * (pb - pa).powi(2) / (xi1 * xi2).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{k_w6, Representation};

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn spectral_moment_matches_hermite() {
        let f = TestFunctionSpec::new(7.0, 3.0).unwrap();
        for l in [0.0, 0.4, -1.3] {
            let m = spectral_average_hermite(&f, 5, 60, |rho| Ok(C64::from_polar(1.0, rho * l))).unwrap() * (2.0 * PI);
            assert!(rel(m, f.spectral_moment(5, l)) < 1e-12, "{l}");
        }
    }

    #[test]
    fn phi_w4_w5_match_hermite_average_of_kernel() {
        let f = TestFunctionSpec::new(6.0, 2.0).unwrap();
        let st = QuadratureSettings::default();
        let ks = KernelSettings::with(Representation::MellinBarnes);
        for y in [3.0, -40.0] {
            let p4 = phi_w4(y, 6, &f, &st).unwrap().value;
            let o4 = spectral_average_hermite(&f, 6, 48, |rho| Ok(k_w4(y, &SpectralPoint::new(6, rho)?, &ks)?.value)).unwrap() / y.abs();
            assert!(rel(p4, o4) < 1e-7, "w4 {y}: {p4} vs {o4}");
            let p5 = phi_w5(y, 6, &f, &st).unwrap().value;
            let o5 = spectral_average_hermite(&f, 6, 48, |rho| Ok(k_w4(-y, &SpectralPoint::new(6, -rho)?, &ks)?.value)).unwrap() / y.abs();
            assert!(rel(p5, o5) < 1e-7, "w5 {y}: {p5} vs {o5}");
        }
    }

    #[test]
    fn phi_w6_matches_hermite_and_vanishes_on_positive_quadrant() {
        let f = TestFunctionSpec::new(4.0, 2.0).unwrap();
        let st = QuadratureSettings::default();
        let ks = KernelSettings::with(Representation::BesselIntegral);
        for (y1, y2) in [(-3.0, -5.0), (-6.0, 2.0), (4.0, -9.0)] {
            let p = phi_w6(y1, y2, 5, &f, &st).unwrap().value;
            let o = spectral_average_hermite(&f, 5, 40, |rho| Ok(k_w6(y1, y2, &SpectralPoint::new(5, rho)?, &ks)?.value)).unwrap() / (y1 * y2).abs();
            assert!(rel(p, o) < 1e-6, "({y1},{y2}): {p} vs {o}");
        }
        assert_eq!(phi_w6(2.0, 3.0, 5, &f, &st).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn phi_linear_in_test_function() {
        let f = TestFunctionSpec::new(10.0, 4.0).unwrap();
        let st = QuadratureSettings::default();
        let a = phi_w4(50.0, 10, &f, &st).unwrap().value;
        let b = phi_w4(50.0, 10, &f.scaled(2.0), &st).unwrap().value;
        assert!((b - a * 2.0).norm() <= 1e-12 * b.norm());
        let a = phi_w6(-20.0, 7.0, 10, &f, &st).unwrap().value;
        let b = phi_w6(-20.0, 7.0, 10, &f.scaled(2.0), &st).unwrap().value;
        assert!((b - a * 2.0).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn phi_w6_swap_symmetry() {
        let f = TestFunctionSpec::new(9.0, 4.0).unwrap();
        let g = TestFunctionSpec::new(-9.0, 4.0).unwrap();
        let st = QuadratureSettings::default();
        for (y1, y2) in [(-30.0, 12.0), (-5.0, -70.0)] {
            let a = phi_w6(y1, y2, 9, &f, &st).unwrap().value;
            let b = phi_w6(y2, y1, 9, &g, &st).unwrap().value;
            assert!(rel(b, a) < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn kfull_factorization_matches_g_epsilon() {
        // the split a(s1) b(s2) c(s1+s2) must reproduce G^ε
        let pt = SpectralPoint::new(7, 3.5).unwrap();
        let r = pt.r();
        for sp in [SignPair::new(-1, -1).unwrap(), SignPair::new(-1, 1).unwrap(), SignPair::new(1, -1).unwrap()] {
            for (t1, t2) in [(0.3, -2.0), (11.0, 4.0), (-7.5, 13.0)] {
                let (s1, s2) = (C64::new(1.0 / 3.0, t1), C64::new(1.0 / 3.0, t2));
                let lq = |s: C64| log_q_mod(7, s).unwrap();
                let (a, b, c) = match (sp.eps1, sp.eps2) {
                    (-1, -1) => (log_gamma_mod(s1 + 2.0 * r), log_gamma_mod(s2 - 2.0 * r), -log_gamma_mod(s1 + s2)),
                    (-1, _) => (-log_gamma_mod(1.0 - s1 - 2.0 * r), log_gamma_mod(s2 - 2.0 * r), log_gamma_mod(1.0 - s1 - s2)),
                    _ => (log_gamma_mod(s1 + 2.0 * r), -log_gamma_mod(1.0 + 2.0 * r - s2), log_gamma_mod(1.0 - s1 - s2)),
                };
                let sign = if sp.eps1 < 0 && sp.eps2 < 0 { -1.0 } else { 1.0 };
                let v = (a + b + c + lq(s1 - r) + lq(s2 + r)).exp() * sign;
                let g = crate::kernels::g_epsilon(sp, s1, s2, &pt).unwrap();
                assert!(rel(v, g) < 1e-10, "{:?} {v} {g}", sp);
            }
        }
    }

    #[test]
    fn ktilde_factored_matches_direct() {
        let pt = SpectralPoint::new(6, 6.0).unwrap();
        let w = BumpSpec::default();
        let st = QuadratureSettings::default();
        let ks = KernelSettings::default();
        for (xi, u, v) in [(3.0, 0.0, 0.0), (-5.0, 0.7, -0.4)] {
            let a = ktilde(xi, u, v, &pt, &w, &st).unwrap().value;
            let b = ktilde_direct(xi, u, v, &pt, &w, 64, &ks).unwrap();
            assert!(rel(a, b) < 1e-5, "{xi} {u} {v}: {a} vs {b}");
        }
    }

    #[test]
    fn kfull_factored_matches_direct() {
        let pt = SpectralPoint::new(4, 3.0).unwrap();
        let w = BumpSpec::default();
        let st = QuadratureSettings::default();
        let ks = KernelSettings::with(Representation::BesselIntegral);
        let dv = DualVars::new(0.5, -0.3, 0.2, 0.4);
        for (x1, x2) in [(-2.0, -3.0)] {
            let a = kfull(x1, x2, &dv, &pt, &w, &st).unwrap().value;
            let b = kfull_direct(x1, x2, &dv, &pt, &w, 64, &ks).unwrap();
            assert!(rel(a, b) < 1e-4, "{x1} {x2}: {a} vs {b}");
        }
        assert_eq!(kfull(2.0, 3.0, &dv, &pt, &w, &st).unwrap().value, C64::new(0.0, 0.0));
    }
}
