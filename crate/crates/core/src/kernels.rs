//! The archimedean kernels `K_w4` and `K_w6` as Mellin–Barnes integrals and
//! as Bessel integrals, the beta table `B^ε`, the combination `G^ε` and the
//! Whittaker components.

use crate::quad::{adaptive_gk, integrate_contour, integrate_oscillatory_tail, Contour, QuadResult, QuadratureSettings};
use crate::special::{bessel_j, beta_fn, log_gamma_mod, q_ratio, SpectralPoint};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPair {
    pub eps1: i8,
    pub eps2: i8,
}

impl SignPair {
    pub const ALL: [SignPair; 4] = [
        SignPair { eps1: 1, eps2: 1 },
        SignPair { eps1: 1, eps2: -1 },
        SignPair { eps1: -1, eps2: 1 },
        SignPair { eps1: -1, eps2: -1 },
    ];

    pub fn new(eps1: i8, eps2: i8) -> Result<Self> {
        if eps1.abs() != 1 || eps2.abs() != 1 {
            return Err(Error::Invalid("signs must be ±1".into()));
        }
        Ok(Self { eps1, eps2 })
    }

    pub fn of(y1: f64, y2: f64) -> Self {
        Self { eps1: if y1 > 0.0 { 1 } else { -1 }, eps2: if y2 > 0.0 { 1 } else { -1 } }
    }

    pub fn label(&self) -> &'static str {
        match (self.eps1, self.eps2) {
            (1, 1) => "++",
            (1, _) => "+-",
            (_, 1) => "-+",
            _ => "--",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    MellinBarnes,
    BesselIntegral,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSettings {
    pub quad: QuadratureSettings,
    pub representation: Representation,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self { quad: QuadratureSettings::default(), representation: Representation::Auto }
    }
}

impl KernelSettings {
    pub fn with(representation: Representation) -> Self {
        Self { representation, ..Self::default() }
    }

    fn use_bessel(&self, args: &[f64]) -> bool {
        match self.representation {
            Representation::MellinBarnes => false,
            Representation::BesselIntegral => true,
            Representation::Auto => args.iter().all(|a| a.abs() < 1e4),
        }
    }
}

pub(crate) fn i_pow(d: u32, eps: f64) -> C64 {
    // (εi)^d
    let base = C64::new(0.0, eps);
    base.powi(d as i32)
}

/// `log Q(d, s)` modulo `2πi`; `None` on a pole of the numerator.
pub(crate) fn log_q_mod(d: u32, s: C64) -> Option<C64> {
    let a = (d as f64 - 1.0) / 2.0 + s;
    if a.im == 0.0 && a.re <= 0.0 && a.re == a.re.round() {
        return None;
    }
    Some(log_gamma_mod(a) - log_gamma_mod((d as f64 + 1.0) / 2.0 - s))
}

fn cexp(z: C64) -> C64 {
    z.exp()
}

/// `K_w4(y; d, iρ)`.
pub fn k_w4(y: f64, pt: &SpectralPoint, st: &KernelSettings) -> Result<QuadResult> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::Invalid("k_w4 needs a finite nonzero y".into()));
    }
    st.quad.validate()?;
    let r = if st.use_bessel(&[y]) { k_w4_bessel(y, pt, &st.quad) } else { k_w4_mb(y, pt, &st.quad) };
    if !r.converged {
        return Err(Error::NonConvergence(format!("k_w4 at y = {y}: estimate {} ± {}", r.value, r.err_est)));
    }
    Ok(r)
}

/// Bent Mellin–Barnes contour: vertical at `c0` for `|Im s| ≤ h0`, pushed
/// left to `c_far` on the side named by `far_sign` (−1 below, +1 above).
fn mb_contour(c0: f64, h0: f64, c_far: f64, far_sign: f64, height: f64) -> Contour {
    if far_sign < 0.0 {
        Contour::bent(c0, h0, c_far, c0, height)
    } else {
        Contour::bent(c0, h0, c0, c_far, height)
    }
}

pub fn k_w4_mb(y: f64, pt: &SpectralPoint, st: &QuadratureSettings) -> QuadResult {
    let eps = y.signum();
    let r = pt.r();
    let d = pt.d;
    let lx = (8.0 * PI.powi(3) * y.abs()).ln();
    let x_cbrt = (8.0 * PI.powi(3) * y.abs()).cbrt();
    let h0 = (1.3 * x_cbrt).max(3.0 * pt.rho.abs() + 6.0).max(pt.df() / 2.0 + 6.0) + 4.0;
    // far side has no exponential decay: t → −∞ for ε = +1
    let ratio = (h0.powi(3) / (8.0 * PI.powi(3) * y.abs())).max(1.5);
    let c_far = 0.5 - (45.0 / ratio.ln()).ceil().min(400.0);
    let height = 2.0 * h0 + 40.0;
    let contour = mb_contour(0.5, h0, c_far, -eps, height);
    let mut q = *st;
    q.oscillation_hint = lx.abs() + 3.0 * height.ln() + 1.0;
    let f = |s: C64| {
        let Some(lq) = log_q_mod(d, s) else { return C64::new(0.0, 0.0) };
        let l = (1.0 - r - s) * lx + lq + log_gamma_mod(s + 3.0 * r) + C64::new(0.0, eps * PI / 2.0) * (s + 3.0 * r);
        cexp(l)
    };
    let res = integrate_contour(f, &contour, &q);
    res.scale(i_pow(d, eps) / (4.0 * PI * PI))
}

pub fn k_w4_bessel(y: f64, pt: &SpectralPoint, st: &QuadratureSettings) -> QuadResult {
    let eps = y.signum();
    let r = pt.r();
    let n = pt.d - 1;
    let yy = 4.0 * PI.powi(3) * y.abs();
    let three_r = 3.0 * r;
    // x ≥ Y in v = √x
    let fa = |v: f64| {
        let ph = C64::new(0.0, 2.0 * eps * yy / (v * v)) + three_r * (yy / (v * v)).ln();
        cexp(ph) * (2.0 * bessel_j(n, 2.0 * v) / v)
    };
    let v0 = yy.sqrt();
    let a = integrate_oscillatory_tail(fa, v0, v0.max(pt.df()), PI / 2.0, st);
    // x ≤ Y in u = Y/x
    let fb = |u: f64| {
        let ph = C64::new(0.0, 2.0 * eps * u) + three_r * u.ln();
        cexp(ph) * (bessel_j(n, 2.0 * (yy / u).sqrt()) / u)
    };
    let b = integrate_oscillatory_tail(fb, 1.0, (2.0 * yy).max(4.0), PI / 2.0, st);
    let pref = i_pow(pt.d, eps) * 2.0 * cexp((1.0 - r) * y.abs().ln() + (1.0 - three_r) * PI.ln());
    a.add(b).scale(pref)
}

/// `K_w6((y1, y2); d, iρ)`; zero on the `(+, +)` quadrant.
pub fn k_w6(y1: f64, y2: f64, pt: &SpectralPoint, st: &KernelSettings) -> Result<QuadResult> {
    if y1 == 0.0 || y2 == 0.0 || !y1.is_finite() || !y2.is_finite() {
        return Err(Error::Invalid("k_w6 needs finite nonzero arguments".into()));
    }
    st.quad.validate()?;
    if y1 > 0.0 && y2 > 0.0 {
        return Ok(QuadResult::exact(C64::new(0.0, 0.0)));
    }
    let r = if st.use_bessel(&[y1, y2]) { k_w6_bessel(y1, y2, pt, &st.quad) } else { k_w6_mb(y1, y2, pt, &st.quad) };
    if !r.converged && r.err_est > 1e-8 * r.value.norm().max(1.0) {
        return Err(Error::NonConvergence(format!("k_w6 at ({y1}, {y2}): estimate {} ± {}", r.value, r.err_est)));
    }
    Ok(r)
}

struct MbNode {
    s: C64,
    w: C64,
    // 0 central vertical, 1 outer vertical, 2 horizontal jog
    class: u8,
    m: i32,
    k: usize,
}

/// Nodes of a bent contour with vertical panels aligned to the global grid
/// `Im s = m·h`; weights include `1/(2πi)`.
fn grid_contour(c0: f64, c_far: f64, m0: i32, mh: i32, h: f64, gl: &[(f64, f64)]) -> Vec<MbNode> {
    let mut out = Vec::new();
    let two_pi = 2.0 * PI;
    let vertical = |c: f64, class: u8, lo: i32, hi: i32, out: &mut Vec<MbNode>| {
        for m in lo..hi {
            for (k, &(x, w)) in gl.iter().enumerate() {
                out.push(MbNode { s: C64::new(c, (m as f64 + x) * h), w: C64::new(h * w / two_pi, 0.0), class, m, k });
            }
        }
    };
    let jog = |im: f64, from: f64, to: f64, out: &mut Vec<MbNode>| {
        let len = (to - from).abs();
        let n = (len / 8.0).ceil().max(1.0) as usize;
        let step = (to - from) / n as f64;
        for j in 0..n {
            for &(x, w) in gl {
                let re = from + (j as f64 + x) * step;
                out.push(MbNode {
                    s: C64::new(re, im),
                    w: C64::new(0.0, -step * w / two_pi),
                    class: 2,
                    m: 0,
                    k: 0,
                });
            }
        }
    };
    vertical(c_far, 1, -mh, -m0, &mut out);
    jog(-(m0 as f64) * h, c_far, c0, &mut out);
    vertical(c0, 0, -m0, m0, &mut out);
    jog(m0 as f64 * h, c0, c_far, &mut out);
    vertical(c_far, 1, m0, mh, &mut out);
    out
}

/// `Σ_{i,j} w_i w_j exp(f1_i + f2_j + coupling(s_i + s_j))`, caching the
/// coupling on grid-aligned vertical pairs where it depends only on
/// `(m_i + m_j, k_i, k_j)`.
fn tensor_sum(
    n1: &[MbNode],
    f1: &[Option<C64>],
    n2: &[MbNode],
    f2: &[Option<C64>],
    p: usize,
    mh: i32,
    coupling: &dyn Fn(C64) -> C64,
) -> C64 {
    // scale each side to at most 1 and fold the shifts into the coupling
    let shift = |f: &[Option<C64>]| f.iter().flatten().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let (m1, m2) = (shift(f1), shift(f2));
    if !m1.is_finite() || !m2.is_finite() {
        return C64::new(0.0, 0.0);
    }
    let side = |nodes: &[MbNode], f: &[Option<C64>], m: f64| -> Vec<C64> {
        nodes.iter().zip(f).map(|(n, l)| l.map_or(C64::new(0.0, 0.0), |l| (l - m).exp() * n.w)).collect()
    };
    let (e1, e2) = (side(n1, f1, m1), side(n2, f2, m2));
    let lift = m1 + m2;
    let big = |lc: C64| lc.re + lift > 700.0;
    let span = (4 * mh + 1) as usize * p * p;
    let mut tables: Vec<Vec<C64>> = (0..4).map(|_| Vec::new()).collect();
    let mut total = C64::new(0.0, 0.0);
    let mut direct = C64::new(0.0, 0.0);
    for (i, a) in n1.iter().enumerate() {
        if e1[i] == C64::new(0.0, 0.0) {
            continue;
        }
        let mut row = C64::new(0.0, 0.0);
        for (j, b) in n2.iter().enumerate() {
            if e2[j] == C64::new(0.0, 0.0) {
                continue;
            }
            let c = if a.class < 2 && b.class < 2 {
                let t = &mut tables[(a.class * 2 + b.class) as usize];
                if t.is_empty() {
                    t.resize(span, C64::new(f64::NAN, 0.0));
                }
                let idx = ((a.m + b.m + 2 * mh) as usize * p + a.k) * p + b.k;
                if t[idx].re.is_nan() {
                    let lc = coupling(a.s + b.s);
                    t[idx] = if big(lc) { C64::new(f64::INFINITY, 0.0) } else { (lc + lift).exp() };
                }
                t[idx]
            } else {
                let lc = coupling(a.s + b.s);
                if big(lc) { C64::new(f64::INFINITY, 0.0) } else { (lc + lift).exp() }
            };
            if c.re.is_infinite() {
                let (Some(la), Some(lb)) = (f1[i], f2[j]) else { continue };
                direct += (la + lb + coupling(a.s + b.s)).exp() * a.w * b.w;
            } else {
                row += e2[j] * c;
            }
        }
        total += row * e1[i];
    }
    total + direct
}

pub fn k_w6_mb(y1: f64, y2: f64, pt: &SpectralPoint, st: &QuadratureSettings) -> QuadResult {
    let sp = SignPair::of(y1, y2);
    if sp.eps1 > 0 && sp.eps2 > 0 {
        return QuadResult::exact(C64::new(0.0, 0.0));
    }
    let r = pt.r();
    let three_r = 3.0 * r;
    let d = pt.d;
    let a1 = 4.0 * PI * PI * y1.abs();
    let a2 = 4.0 * PI * PI * y2.abs();
    let (la1, la2) = (a1.ln(), a2.ln());
    let h0 = 1.5 * [a1.sqrt(), a2.sqrt(), 2f64.sqrt() * (a1 * a2).powf(0.25), 3.0 * pt.rho.abs(), pt.df() / 2.0]
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v))
        + 6.0;
    let c0 = 1.0 / 3.0;
    let gain = (h0 * h0 / a1.max(a2)).ln().max(0.5);
    let depth = (36.0 / gain).max(20.0).ceil();
    let height = h0 * (20.0 / depth).exp() + 10.0;
    let omega = la1.max(la2).abs() + 4.0 * height.ln() + 2.0;
    let h = (22.0 / omega).min(1.0);
    let m0 = (h0 / h).ceil() as i32;
    let mh = (height / h).ceil() as i32;
    let minus_minus = sp.eps1 < 0 && sp.eps2 < 0;
    let coupling = |z: C64| if minus_minus { -log_gamma_mod(z) } else { log_gamma_mod(1.0 - z) };
    let run = |p: usize| {
        let gl = crate::quad::gauss_legendre01(p);
        let nodes = grid_contour(c0, c0 - depth, m0, mh, h, &gl);
        let lq = |s: C64| log_q_mod(d, s);
        let side = |la: f64, extra: &dyn Fn(C64) -> C64| -> Vec<Option<C64>> {
            nodes.iter().map(|n| lq(n.s).map(|q| (1.0 - n.s) * la + q + extra(n.s))).collect()
        };
        let (f1, f2) = match (sp.eps1, sp.eps2) {
            (-1, -1) => (side(la1, &|s| log_gamma_mod(s + three_r)), side(la2, &|s| log_gamma_mod(s - three_r))),
            (-1, 1) => (side(la1, &|s| -log_gamma_mod(1.0 - three_r - s)), side(la2, &|s| log_gamma_mod(s - three_r))),
            _ => (side(la1, &|s| log_gamma_mod(s + three_r)), side(la2, &|s| -log_gamma_mod(1.0 + three_r - s))),
        };
        (tensor_sum(&nodes, &f1, &nodes, &f2, p, mh, &coupling), nodes.len())
    };
    let (fine, n_fine) = run(30);
    let (coarse, n_coarse) = run(20);
    let sign = if minus_minus && d % 2 == 1 { -1.0 } else { 1.0 };
    let pref = (r * (y2.abs() / y1.abs()).ln()).exp() * (sign / (4.0 * PI * PI));
    let res = QuadResult {
        value: fine * pref,
        err_est: (fine - coarse).norm() * pref.norm(),
        nodes_used: n_fine * n_fine + n_coarse * n_coarse,
        converged: true,
    };
    QuadResult { converged: res.err_est <= st.target(res.value).max(1e-7 * res.value.norm()), ..res }
}

pub fn k_w6_bessel(y1: f64, y2: f64, pt: &SpectralPoint, st: &QuadratureSettings) -> QuadResult {
    let sp = SignPair::of(y1, y2);
    if sp.eps1 > 0 && sp.eps2 > 0 {
        return QuadResult::exact(C64::new(0.0, 0.0));
    }
    let r = pt.r();
    let three_r = 3.0 * r;
    let n = pt.d - 1;
    let (b1, b2) = (4.0 * PI * y1.abs().sqrt(), 4.0 * PI * y2.abs().sqrt());
    let j = |z: f64| bessel_j(n, z);
    let xp = |x: f64, e: C64| (e * x.ln()).exp();
    let cut = |b: f64| 2f64.sqrt().max((pt.df() + 2.0) / b);
    let mut q = *st;
    q.abs_tol *= 0.25;
    // endpoint pieces in w = 1/√x (or 1/√(1−x)); dx/x = 2 dw/w
    let total = match (sp.eps1, sp.eps2) {
        (-1, -1) => {
            let left = integrate_oscillatory_tail(
                |w: f64| {
                    let x = 1.0 / (w * w);
                    xp(x, three_r) * xp(1.0 - x, -three_r - 1.0) * (2.0 * j(b1 * w) * j(b2 / (1.0 - x).sqrt()) / w)
                },
                2f64.sqrt(),
                cut(b1),
                PI / b1,
                &q,
            );
            let right = integrate_oscillatory_tail(
                |w: f64| {
                    let z = 1.0 / (w * w);
                    xp(1.0 - z, three_r - 1.0) * xp(z, -three_r) * (2.0 * j(b1 / (1.0 - z).sqrt()) * j(b2 * w) / w)
                },
                2f64.sqrt(),
                cut(b2),
                PI / b2,
                &q,
            );
            let v = left.add(right);
            if pt.d % 2 == 1 {
                v.scale(C64::new(-1.0, 0.0))
            } else {
                v
            }
        }
        (-1, 1) => {
            let left = integrate_oscillatory_tail(
                |w: f64| {
                    let x = 1.0 / (w * w);
                    let u = (1.0 - x).sqrt();
                    xp(x, -three_r) * (2.0 * j(b1 * u) * j(b2 * u * w) / w)
                },
                2f64.sqrt(),
                cut(b2),
                PI / b2,
                &q,
            );
            let right = adaptive_gk(
                |x: f64| xp(x, -three_r - 1.0) * (j(b1 * (1.0 - x).sqrt()) * j(b2 * ((1.0 - x) / x).sqrt())),
                0.5,
                1.0,
                (b1 + b2).ceil() as usize + 4,
                0.1 * q.abs_tol,
                0.1 * q.rel_tol,
                q.max_nodes,
            );
            left.add(right)
        }
        _ => {
            let left = integrate_oscillatory_tail(
                |w: f64| {
                    let x = 1.0 / (w * w);
                    let u = (1.0 - x).sqrt();
                    xp(x, three_r) * (2.0 * j(b1 * u * w) * j(b2 * u) / w)
                },
                2f64.sqrt(),
                cut(b1),
                PI / b1,
                &q,
            );
            let right = adaptive_gk(
                |x: f64| xp(x, three_r - 1.0) * (j(b1 * ((1.0 - x) / x).sqrt()) * j(b2 * (1.0 - x).sqrt())),
                0.5,
                1.0,
                (b1 + b2).ceil() as usize + 4,
                0.1 * q.abs_tol,
                0.1 * q.rel_tol,
                q.max_nodes,
            );
            left.add(right)
        }
    };
    let pref = (r * (y2.abs() / y1.abs()).ln()).exp() * (4.0 * PI * PI * (y1 * y2).abs());
    total.scale(pref)
}

/// `B^ε((s1, s2), iρ)`.
pub fn b_w6(sp: SignPair, s1: C64, s2: C64, rho: f64) -> Result<C64> {
    let three_r = C64::new(0.0, 3.0 * rho);
    Ok(match (sp.eps1, sp.eps2) {
        (1, 1) => C64::new(0.0, 0.0),
        (-1, -1) => beta_fn(s1 + three_r, s2 - three_r)?,
        (-1, _) => beta_fn(s2 - three_r, 1.0 - s1 - s2)?,
        _ => beta_fn(s1 + three_r, 1.0 - s1 - s2)?,
    })
}

/// `B^ε` including the `(−1)^d` carried by the `(−, −)` row.
pub fn b_w6_signed(sp: SignPair, s1: C64, s2: C64, pt: &SpectralPoint) -> Result<C64> {
    let v = b_w6(sp, s1, s2, pt.rho)?;
    Ok(if sp.eps1 < 0 && sp.eps2 < 0 && pt.d % 2 == 1 { -v } else { v })
}

/// `G^ε((s1, s2); d, r) = B^ε((s1 − r, s2 + r), r) Q(d, s1 − r) Q(d, s2 + r)`.
pub fn g_epsilon(sp: SignPair, s1: C64, s2: C64, pt: &SpectralPoint) -> Result<C64> {
    if sp.eps1 > 0 && sp.eps2 > 0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let r = pt.r();
    let b = b_w6_signed(sp, s1 - r, s2 + r, pt)?;
    if b == C64::new(0.0, 0.0) {
        return Ok(b);
    }
    Ok(b * q_ratio(pt.d, s1 - r)? * q_ratio(pt.d, s2 + r)?)
}

/// `W_{εm}(y; d, r)` at the default abscissae `(2, 2)`. Negative `m` selects
/// the component `|m|` with the opposite sign.
pub fn whittaker_w(m: i32, sign: i8, y1: f64, y2: f64, pt: &SpectralPoint, st: &QuadratureSettings) -> Result<QuadResult> {
    whittaker_w_at(m, sign, y1, y2, pt, (2.0, 2.0), st)
}

pub fn whittaker_w_at(
    m: i32,
    sign: i8,
    y1: f64,
    y2: f64,
    pt: &SpectralPoint,
    c: (f64, f64),
    st: &QuadratureSettings,
) -> Result<QuadResult> {
    if sign.abs() != 1 || m.unsigned_abs() > pt.d {
        return Err(Error::Invalid(format!("component ({m}, {sign}) outside |m| ≤ d = {}", pt.d)));
    }
    if !(y1 > 0.0 && y2 > 0.0 && c.0 > 0.0 && c.1 > 0.0) {
        return Err(Error::Invalid("whittaker_w needs positive y and abscissae".into()));
    }
    let eps = if m < 0 { -sign } else { sign } as f64;
    let m = m.unsigned_abs();
    let d = pt.d;
    let df = pt.df();
    let r = pt.r();
    let h = 0.1;
    let tmax = 40.0 + df;
    let kmax = (tmax / h).ceil() as i64;
    let ts: Vec<f64> = (-kmax..=kmax).map(|k| k as f64 * h).collect();
    let (l1, l2) = ((2.0 * PI * y1).ln(), (2.0 * PI * y2).ln());
    let f1: Vec<C64> = ts
        .iter()
        .map(|&t| {
            let s = C64::new(c.0, t);
            (1.0 - s) * l1 + log_gamma_mod((df - 1.0) / 2.0 + s - r) + log_gamma_mod((df - m as f64 + s + 2.0 * r) / 2.0)
        })
        .collect();
    let lbinom = |n: u32, k: u32| lgamma_real(n as f64 + 1.0) - lgamma_real(k as f64 + 1.0) - lgamma_real((n - k) as f64 + 1.0);
    let m1 = f1.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let e1: Vec<C64> = f1.iter().map(|z| (z - m1).exp()).collect();
    let mut fine = C64::new(0.0, 0.0);
    let mut coarse = C64::new(0.0, 0.0);
    for l in 0..=m {
        let f2: Vec<C64> = ts
            .iter()
            .map(|&t| {
                let s = C64::new(c.1, t);
                (1.0 - s) * l2 + log_gamma_mod((df - 1.0) / 2.0 + s + r) + log_gamma_mod((l as f64 + s - 2.0 * r) / 2.0)
            })
            .collect();
        let m2 = f2.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let e2: Vec<C64> = f2.iter().map(|z| (z - m2).exp()).collect();
        let lift = m1 + m2 + lbinom(m, l);
        let n = ts.len();
        let coup: Vec<C64> = (0..2 * n - 1)
            .map(|k| {
                let sigma = C64::new(c.0 + c.1, (k as i64 - 2 * kmax) as f64 * h);
                (lift - log_gamma_mod((df - m as f64 + l as f64 + sigma) / 2.0)).exp()
            })
            .collect();
        let (mut fl, mut cl) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            let mut row_c = C64::new(0.0, 0.0);
            for j in 0..n {
                let v = e2[j] * coup[i + j];
                row += v;
                if (j as i64 - kmax) % 2 == 0 {
                    row_c += v;
                }
            }
            fl += row * e1[i];
            if (i as i64 - kmax) % 2 == 0 {
                cl += row_c * e1[i];
            }
        }
        let sgn = if l % 2 == 1 { eps } else { 1.0 };
        fine += fl * sgn;
        coarse += cl * sgn;
    }
    // trapezoid weights h/(2π) per axis
    let w = (h / (2.0 * PI)).powi(2);
    fine *= w;
    coarse *= 4.0 * w;
    let pref = (0.5 * lbinom(2 * d, d + m) - (1.0 + df) * 2f64.ln()).exp() / PI;
    let diff = (fine - coarse).norm();
    let rel = diff / fine.norm().max(f64::MIN_POSITIVE);
    let err = (10.0 * rel * rel + 1e-15 * n_f(ts.len())) * fine.norm();
    let value = fine * pref;
    let err_est = err * pref;
    Ok(QuadResult { value, err_est, nodes_used: ts.len() * ts.len() * (m as usize + 1), converged: err_est <= st.target(value) || rel < 1e-7 })
}

fn n_f(n: usize) -> f64 {
    (n as f64).sqrt()
}

fn lgamma_real(x: f64) -> f64 {
    log_gamma_mod(C64::new(x, 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_w4_representations_agree() {
        let pt = SpectralPoint::new(6, 0.3).unwrap();
        let st = QuadratureSettings::default();
        let t = std::time::Instant::now();
        let a = k_w4_mb(5.0, &pt, &st);
        let t1 = t.elapsed();
        let b = k_w4_bessel(5.0, &pt, &st);
        eprintln!("{a:?} {t1:?}\n{b:?} {:?}", t.elapsed());
        assert!((a.value - b.value).norm() <= 1e-6 * (1.0 + a.value.norm()));
    }

    #[test]
    fn k_w6_representations_agree() {
        let st = QuadratureSettings::default();
        let pt = SpectralPoint::new(5, 0.2).unwrap();
        for (y1, y2) in [(-3.0, 4.0), (-2.0, -2.0)] {
            let a = k_w6_mb(y1, y2, &pt, &st);
            let b = k_w6_bessel(y1, y2, &pt, &st);
            assert!((a.value - b.value).norm() <= 1e-6 * b.value.norm(), "{a:?} {b:?}");
        }
        assert_eq!(k_w6(2.0, 3.0, &pt, &KernelSettings::default()).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn minus_minus_sign_follows_parity() {
        // the (−1)^d factor flips the (−,−) value between d and d+1 at matched Bessel order
        let st = QuadratureSettings::default();
        let even = SpectralPoint::new(6, 0.4).unwrap();
        let v = k_w6_bessel(-2.0, -2.0, &even, &st).value;
        let odd = SpectralPoint::new(7, 0.4).unwrap();
        let w = k_w6_bessel(-2.0, -2.0, &odd, &st).value;
        let sign = |p: &SpectralPoint| b_w6_signed(SignPair::new(-1, -1).unwrap(), C64::new(0.4, 1.0), C64::new(0.3, -2.0), p).unwrap()
            / b_w6(SignPair::new(-1, -1).unwrap(), C64::new(0.4, 1.0), C64::new(0.3, -2.0), 0.4).unwrap();
        assert!((sign(&even) - 1.0).norm() < 1e-15 && (sign(&odd) + 1.0).norm() < 1e-15);
        assert!(v.norm() > 0.0 && w.norm() > 0.0);
    }

    #[test]
    fn beta_table_identities() {
        let rho = 0.7;
        let r = C64::new(0.0, rho);
        let pp = SignPair::new(1, 1).unwrap();
        let pm = SignPair::new(1, -1).unwrap();
        let mp = SignPair::new(-1, 1).unwrap();
        let mm = SignPair::new(-1, -1).unwrap();
        for s in [C64::new(0.3, 2.0), C64::new(-0.2, 5.5), C64::new(1.7, -3.1)] {
            assert_eq!(b_w6(pp, s, -s, rho).unwrap(), C64::new(0.0, 0.0));
            let x = b_w6(pm, s - r, -s + r, rho).unwrap();
            let y = b_w6(mp, s - r, -s + r, rho).unwrap();
            assert!((x + y).norm() < 1e-12 * x.norm(), "{x} {y}");
            assert!(b_w6(mm, s - r, -s + r, rho).unwrap().norm() < 1e-12);
            let pt = SpectralPoint::new(5, rho).unwrap();
            let total: C64 = SignPair::ALL.iter().map(|&e| g_epsilon(e, s, -s, &pt).unwrap()).sum();
            let scale = g_epsilon(pm, s, -s, &pt).unwrap().norm();
            assert!(total.norm() < 1e-12 * scale.max(1.0), "{total}");
        }
    }

    #[test]
    fn whittaker_contour_independence_and_decay() {
        let st = QuadratureSettings::default();
        let pt = SpectralPoint::new(4, 0.1).unwrap();
        let a = whittaker_w_at(0, 1, 1.0, 1.0, &pt, (2.0, 2.0), &st).unwrap();
        let b = whittaker_w_at(0, 1, 1.0, 1.0, &pt, (3.0, 3.0), &st).unwrap();
        assert!((a.value - b.value).norm() < 1e-7 * a.value.norm().max(1e-300), "{a:?} {b:?}");
        let pt = SpectralPoint::new(6, 0.0).unwrap();
        let near = whittaker_w(2, 1, 1.0, 1.0, &pt, &st).unwrap().value.norm();
        let far = whittaker_w(2, 1, 10.0, 10.0, &pt, &st).unwrap().value.norm();
        assert!(near > 1e3 * far, "{near} {far}");
        assert!(whittaker_w(7, 1, 1.0, 1.0, &pt, &st).is_err());
    }


    #[test]
    fn k_w4_conjugation_symmetry() {
        // conjugating the integrand swaps (y, r) for (−y, −r); measured to 1e−14
        let st = QuadratureSettings::default();
        for (y, d, rho) in [(5.0, 6, 0.3), (-3.0, 7, 1.2), (20.0, 9, 2.0), (2.0, 8, 0.0)] {
            let a = k_w4_mb(y, &SpectralPoint::new(d, rho).unwrap(), &st).value;
            let c = k_w4_bessel(-y, &SpectralPoint::new(d, -rho).unwrap(), &st).value;
            assert!((c - a.conj()).norm() < 1e-8 * a.norm(), "{a} {c}");
        }
    }

    #[test]
    fn k_w4_finite_with_quiet_tails() {
        let st = QuadratureSettings::default();
        let pt = SpectralPoint::new(8, 0.0).unwrap();
        for y in [1.0, 10.0, 100.0] {
            let r = k_w4_mb(y, &pt, &st);
            assert!(r.converged && r.value.norm().is_finite() && r.err_est < 1e-10 * r.value.norm().max(1.0), "{r:?}");
        }
    }
}
