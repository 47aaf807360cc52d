//! Special functions: regularized incomplete gamma and chi-squared laws,
//! noncentral chi-squared / generalized Marcum Q, modified Bessel functions
//! and the variance-gamma distribution.
//!
//! Most routines come in a log-domain flavour. The bounds multiply tail
//! probabilities by factors as large as e^{1000}, so tails have to be carried
//! with relative (not absolute) accuracy.

use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::numeric::{brent, golden_max, integrate, log1mexp};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;

/// lnΓ(a+1) − [(a+½)ln a − a + ½ln 2π], the Stirling remainder.
fn stirlerr(a: f64) -> f64 {
    if a > 15.0 {
        let r = 1.0 / a;
        let r2 = r * r;
        r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
    } else {
        ln_gamma(a + 1.0) - (a + 0.5) * a.ln() + a - 0.5 * LN_2PI
    }
}

/// Deviance term x ln(x/m) + m − x, computed without cancellation.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// ln(m^a e^{−m} / Γ(a+1)) for real a ≥ 0, m ≥ 0 (a Poisson log-mass when a
/// is an integer), using the saddle-point form to avoid cancellation.
pub(crate) fn ln_pois_raw(a: f64, m: f64) -> f64 {
    if m == 0.0 {
        return if a == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if a == 0.0 {
        return -m;
    }
    if a < 10.0 {
        return a * m.ln() - m - ln_gamma(a + 1.0);
    }
    -stirlerr(a) - bd0(a, m) - 0.5 * (LN_2PI + a.ln())
}

/// (ln P(a,x), ln Q(a,x)) for the regularized incomplete gamma functions.
pub fn ln_gamma_pq(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x == f64::INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let pre = ln_pois_raw(a, x);
    if x < a + 1.0 {
        // P = pre · Σ_k x^k / ((a+1)…(a+k))
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= x / (a + k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        let lp = (pre + sum.ln()).min(0.0);
        (lp, log1mexp(-lp))
    } else {
        // Q = pre · a · (continued fraction), modified Lentz.
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let lq = (pre + a.ln() + h.ln()).min(0.0);
        (log1mexp(-lq), lq)
    }
}

fn check_dof(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("degrees of freedom must be positive, got {k}"));
    }
    Ok(())
}

/// P[χ²_k ≤ t].
pub fn chi2_cdf(k: f64, t: f64) -> Result<f64> {
    Ok(chi2_ln_cdf(k, t)?.exp())
}

/// P[χ²_k > t].
pub fn chi2_sf(k: f64, t: f64) -> Result<f64> {
    Ok(chi2_ln_sf(k, t)?.exp())
}

pub fn chi2_ln_cdf(k: f64, t: f64) -> Result<f64> {
    check_dof(k)?;
    Ok(ln_gamma_pq(0.5 * k, 0.5 * t).0)
}

pub fn chi2_ln_sf(k: f64, t: f64) -> Result<f64> {
    check_dof(k)?;
    Ok(ln_gamma_pq(0.5 * k, 0.5 * t).1)
}

fn check_ncx2(k: f64, lambda: f64) -> Result<()> {
    check_dof(k)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("noncentrality must be finite and nonnegative, got {lambda}"));
    }
    Ok(())
}

/// ln of the Poisson(λ/2) mixture of central chi-squared CDFs (or survival
/// functions when `upper`), summed outward from its largest term.
fn ncx2_ln_mixture(k: f64, lambda: f64, t: f64, upper: bool) -> f64 {
    let a0 = 0.5 * k;
    let x = 0.5 * t;
    let mu = 0.5 * lambda;
    let term = |j: f64| {
        let (lp, lq) = ln_gamma_pq(a0 + j, x);
        ln_pois_raw(j, mu) + if upper { lq } else { lp }
    };
    let span = mu.max(if upper { x } else { 0.0 });
    let j_hi = (span + 40.0 * span.sqrt() + 40.0).ceil();
    // Coarse scan, then integer golden refinement around the best point.
    let steps = 64.0;
    let h = (j_hi / steps).max(1.0).floor();
    let mut best = (0.0, term(0.0));
    let mut j = h;
    while j <= j_hi {
        let v = term(j);
        if v > best.1 {
            best = (j, v);
        }
        j += h;
    }
    let (mut lo, mut hi) = ((best.0 - h).max(0.0), (best.0 + h).min(j_hi));
    while hi - lo > 2.0 {
        let m1 = (lo + (hi - lo) / 3.0).floor();
        let m2 = (hi - (hi - lo) / 3.0).ceil();
        if term(m1) < term(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mut jm = lo;
    let mut tmax = term(lo);
    let mut jj = lo + 1.0;
    while jj <= hi {
        let v = term(jj);
        if v > tmax {
            tmax = v;
            jm = jj;
        }
        jj += 1.0;
    }
    if tmax == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 1.0;
    let mut j = jm - 1.0;
    while j >= 0.0 {
        let d = term(j) - tmax;
        sum += d.exp();
        if d < -42.0 {
            break;
        }
        j -= 1.0;
    }
    let mut j = jm + 1.0;
    loop {
        let d = term(j) - tmax;
        sum += d.exp();
        if d < -42.0 || j > jm + 1e7 {
            break;
        }
        j += 1.0;
    }
    (tmax + sum.ln()).min(0.0)
}

/// ln P[χ'²_k(λ) ≤ t].
pub fn ncx2_ln_cdf(k: f64, lambda: f64, t: f64) -> Result<f64> {
    check_ncx2(k, lambda)?;
    if t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if lambda == 0.0 {
        return chi2_ln_cdf(k, t);
    }
    Ok(ncx2_ln_mixture(k, lambda, t, false))
}

/// ln P[χ'²_k(λ) > t].
pub fn ncx2_ln_sf(k: f64, lambda: f64, t: f64) -> Result<f64> {
    check_ncx2(k, lambda)?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return chi2_ln_sf(k, t);
    }
    Ok(ncx2_ln_mixture(k, lambda, t, true))
}

pub fn ncx2_cdf(k: f64, lambda: f64, t: f64) -> Result<f64> {
    Ok(ncx2_ln_cdf(k, lambda, t)?.exp())
}

/// ln of the χ²_k(λ) density at x > 0.
pub fn ncx2_ln_pdf(k: f64, lambda: f64, x: f64) -> Result<f64> {
    check_ncx2(k, lambda)?;
    if !(x > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    if lambda == 0.0 {
        let h = 0.5 * k;
        return Ok((h - 1.0) * x.ln() - 0.5 * x - h * std::f64::consts::LN_2 - ln_gamma(h));
    }
    let nu = 0.5 * k - 1.0;
    Ok(-std::f64::consts::LN_2 - 0.5 * (x + lambda) + 0.5 * nu * (x / lambda).ln()
        + log_bessel_i(nu, (lambda * x).sqrt())?)
}

/// Generalized Marcum Q: Q_ν(a, b) = P[χ'²_{2ν}(a²) > b²].
pub fn marcum_q(nu: f64, a: f64, b: f64) -> Result<f64> {
    Ok(ln_marcum_q(nu, a, b)?.exp())
}

pub fn ln_marcum_q(nu: f64, a: f64, b: f64) -> Result<f64> {
    if !(nu > 0.0) || !(a >= 0.0) || !(b >= 0.0) {
        return domain(format!("marcum_q needs nu > 0, a ≥ 0, b ≥ 0; got ({nu}, {a}, {b})"));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    ncx2_ln_sf(2.0 * nu, a * a, b * b)
}

/// Solves Q_ν(a, b) = p for b.
pub fn inv_marcum_in_b(nu: f64, a: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("target probability must lie in (0, 1), got {p}"));
    }
    let ln_p = p.ln();
    let f = |b: f64| ln_marcum_q(nu, a, b).map(|lq| lq - ln_p);
    let mut hi = a + (2.0 * nu).sqrt() + 1.0;
    let mut expansions = 0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Convergence(format!("inv_marcum_in_b: no bracket for p={p}")));
        }
    }
    // f(0) = −ln p > 0, so [0, hi] brackets the root.
    let mut err = None;
    let b = brent(
        |b| match f(b) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-15 * hi,
        "inv_marcum_in_b",
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(b),
    }
}

/// ln I_ν(y) for ν > −1, summing the power series outward from its largest
/// term.
pub fn log_bessel_i(nu: f64, y: f64) -> Result<f64> {
    if !(nu > -1.0) || !(y >= 0.0) || !nu.is_finite() {
        return domain(format!("log_bessel_i needs nu > -1 and y ≥ 0, got ({nu}, {y})"));
    }
    if y == 0.0 {
        return Ok(match nu {
            0.0 => 0.0,
            v if v > 0.0 => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        });
    }
    let q = 0.25 * y * y;
    let l0 = (0.5 * ((nu * nu + y * y).sqrt() - nu)).round().max(0.0);
    let ln_t0 = (2.0 * l0 + nu) * (0.5 * y).ln() - ln_gamma(l0 + 1.0) - ln_gamma(nu + l0 + 1.0);
    let mut sum = 1.0;
    let mut t = 1.0;
    let mut l = l0;
    loop {
        t *= q / ((l + 1.0) * (nu + l + 1.0));
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
        l += 1.0;
    }
    let mut t = 1.0;
    let mut l = l0;
    while l >= 1.0 {
        t *= l * (nu + l) / q;
        sum += t;
        if t < 1e-17 * sum {
            break;
        }
        l -= 1.0;
    }
    Ok(ln_t0 + sum.ln())
}

fn is_half_integer(nu: f64) -> bool {
    nu >= 0.5 && (nu - 0.5).fract() == 0.0
}

/// ln K_ν(z) for z > 0. Half-integer orders use the upward recurrence from
/// K_{1/2}; other orders use ∫₀^∞ e^{−z cosh t} cosh(νt) dt.
pub fn log_bessel_k(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !nu.is_finite() {
        return domain(format!("log_bessel_k needs z > 0, got ({nu}, {z})"));
    }
    let nu = nu.abs();
    if is_half_integer(nu) {
        Ok(log_bessel_k_half(nu, z))
    } else {
        log_bessel_k_integral(nu, z)
    }
}

fn log_bessel_k_half(nu: f64, z: f64) -> f64 {
    let mut acc = 0.5 * (std::f64::consts::PI / (2.0 * z)).ln() - z;
    // r_μ = K_{μ+1}/K_μ with r_{1/2} = 1 + 1/z and r_{μ+1} = 1/r_μ + 2(μ+1)/z.
    let steps = (nu - 0.5).round() as usize;
    let mut r = 1.0 + 1.0 / z;
    let mut mu = 0.5;
    let mut prod = 1.0;
    for _ in 0..steps {
        prod *= r;
        if prod > 1e280 {
            acc += prod.ln();
            prod = 1.0;
        }
        r = 1.0 / r + 2.0 * (mu + 1.0) / z;
        mu += 1.0;
    }
    acc + prod.ln()
}

pub(crate) fn log_bessel_k_integral(nu: f64, z: f64) -> Result<f64> {
    let ln_cosh = |u: f64| {
        let u = u.abs();
        u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2
    };
    let h = |t: f64| -z * t.cosh() + ln_cosh(nu * t);
    log_integrate(h, 0.0, f64::INFINITY, 1.0 / (1.0 + z.sqrt()), "log_bessel_k")
}

/// ln ∫_lo^hi e^{h(x)} dx for an integrand that is unimodal (or nearly so)
/// on the interval; `hi` may be infinite. `scale` is a rough width.
pub(crate) fn log_integrate<H: Fn(f64) -> f64>(h: H, lo: f64, hi: f64, scale: f64, what: &str) -> Result<f64> {
    const DROP: f64 = 60.0;
    let scale = scale.max(1e-300);
    let start = lo + (lo.abs() * 1e-15).max(1e-300);
    let mut hmax = h(start);
    let mut xmax = start;
    let mut upper = hi;
    if hi == f64::INFINITY {
        let mut step = scale;
        let mut prev = hmax;
        loop {
            let x = lo + step;
            let v = h(x);
            if v.is_nan() {
                return Err(Error::Convergence(format!("{what}: integrand is NaN at {x}")));
            }
            if v > hmax {
                hmax = v;
                xmax = x;
            }
            if v < prev && v < hmax - DROP {
                upper = x;
                break;
            }
            prev = v;
            step *= 2.0;
            if !step.is_finite() || step > 1e300 {
                return Err(Error::Convergence(format!("{what}: integrand does not decay")));
            }
        }
    }
    if !(upper > lo) {
        return Ok(f64::NEG_INFINITY);
    }
    // Coarse scan for the peak.
    const GRID: usize = 96;
    let dx = (upper - lo) / GRID as f64;
    for i in 0..=GRID {
        let x = if i == 0 { start } else if i == GRID { upper } else { lo + dx * i as f64 };
        let v = h(x);
        if v.is_nan() {
            return Err(Error::Convergence(format!("{what}: integrand is NaN at {x}")));
        }
        if v > hmax {
            hmax = v;
            xmax = x;
        }
    }
    if hmax == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let (a, b) = ((xmax - dx).max(lo), (xmax + dx).min(upper));
    let (xr, hr) = golden_max(&h, a, b, 1e-12 * (b - a).max(1e-300));
    if hr > hmax {
        hmax = hr;
        xmax = xr;
    }
    let g = |x: f64| h(x) - (hmax - DROP);
    let left = if g(start) >= 0.0 || xmax <= start {
        lo
    } else {
        brent(&g, start, xmax, 1e-10 * scale, what)?
    };
    let right = if g(upper) >= 0.0 || xmax >= upper {
        upper
    } else {
        brent(&g, xmax, upper, 1e-10 * scale, what)?
    };
    let f = |x: f64| (h(x) - hmax).exp();
    let q1 = integrate(f, left, xmax, 0.0, 1e-13);
    let q2 = integrate(f, xmax, right, 0.0, 1e-13);
    let total = q1.value + q2.value;
    let err = q1.error + q2.error;
    if !(total > 0.0) || !(err <= 1e-9 * total) {
        return Err(Error::Convergence(format!("{what}: quadrature error {err} on {total}")));
    }
    Ok(hmax + total.ln())
}

/// Variance-gamma parameters: density
/// θ^{2λ}|t−m|^{λ−½} K_{λ−½}(δ|t−m|) e^{b(t−m)} / (√π Γ(λ) (2δ)^{λ−½}), θ² = δ² − b².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgParams {
    pub lambda_shape: f64,
    pub m: f64,
    pub b_asym: f64,
    pub delta: f64,
}

impl VgParams {
    pub fn new(lambda_shape: f64, m: f64, b_asym: f64, delta: f64) -> Result<Self> {
        let p = Self { lambda_shape, m, b_asym, delta };
        p.check()?;
        Ok(p)
    }

    /// VG law of G1 − G2 with G1, G2 iid Gamma(shape λ, rate δ), shifted by m.
    pub fn symmetric(lambda_shape: f64, delta: f64, m: f64) -> Result<Self> {
        Self::new(lambda_shape, m, 0.0, delta)
    }

    pub fn theta(&self) -> f64 {
        (self.delta * self.delta - self.b_asym * self.b_asym).sqrt()
    }

    fn check(&self) -> Result<()> {
        if !(self.lambda_shape > 0.0 && self.lambda_shape.is_finite()) {
            return domain(format!("VG shape must be positive, got {}", self.lambda_shape));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) || !(self.delta.abs() > self.b_asym.abs()) {
            return domain(format!("VG needs δ > |b|, got δ={}, b={}", self.delta, self.b_asym));
        }
        if !self.m.is_finite() {
            return domain("VG location must be finite");
        }
        Ok(())
    }

    fn ln_norm(&self) -> f64 {
        let lam = self.lambda_shape;
        2.0 * lam * self.theta().ln() - LN_SQRT_PI - ln_gamma(lam) - (lam - 0.5) * (2.0 * self.delta).ln()
    }

    /// Log density at offset x = t − m from the location (x ≠ 0).
    fn ln_pdf_offset(&self, x: f64, ln_norm: f64) -> f64 {
        let ax = x.abs();
        let nu = self.lambda_shape - 0.5;
        let lk = if is_half_integer(nu.abs()) {
            log_bessel_k_half(nu.abs(), self.delta * ax)
        } else {
            log_bessel_k_integral(nu.abs(), self.delta * ax).unwrap_or(f64::NAN)
        };
        ln_norm + nu * ax.ln() + lk + self.b_asym * x
    }

    pub fn variance(&self) -> f64 {
        let lam = self.lambda_shape;
        let th2 = self.theta().powi(2);
        2.0 * lam / th2 * (1.0 + 2.0 * self.b_asym * self.b_asym / th2)
    }
}

pub fn vg_pdf(p: &VgParams, t: f64) -> Result<f64> {
    p.check()?;
    let x = t - p.m;
    if x == 0.0 {
        let lam = p.lambda_shape;
        if lam <= 0.5 {
            return Ok(f64::INFINITY);
        }
        let nu = lam - 0.5;
        // |x|^ν K_ν(δ|x|) → ½Γ(ν)(2/δ)^ν as x → 0.
        return Ok((p.ln_norm() + ln_gamma(nu) + (nu - 1.0) * std::f64::consts::LN_2 - nu * p.delta.ln()).exp());
    }
    Ok(p.ln_pdf_offset(x, p.ln_norm()).exp())
}

/// ln ∫_{s0}^∞ f(m + side·s) ds.
fn vg_ln_tail(p: &VgParams, s0: f64, side: f64) -> Result<f64> {
    let ln_norm = p.ln_norm();
    let scale = p.variance().sqrt();
    log_integrate(|s| p.ln_pdf_offset(side * s, ln_norm), s0, f64::INFINITY, scale, "vg tail")
}

/// ln F(t) for the variance-gamma law.
pub fn vg_ln_cdf(p: &VgParams, t: f64) -> Result<f64> {
    p.check()?;
    let x = t - p.m;
    if x == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x == 0.0 && p.b_asym == 0.0 {
        return Ok(-std::f64::consts::LN_2);
    }
    if x <= 0.0 {
        vg_ln_tail(p, -x, -1.0)
    } else {
        Ok(log1mexp(-vg_ln_tail(p, x, 1.0)?))
    }
}

/// ln(1 − F(t)) for the variance-gamma law.
pub fn vg_ln_sf(p: &VgParams, t: f64) -> Result<f64> {
    p.check()?;
    let x = t - p.m;
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if x == 0.0 && p.b_asym == 0.0 {
        return Ok(-std::f64::consts::LN_2);
    }
    if x >= 0.0 {
        vg_ln_tail(p, x, 1.0)
    } else {
        Ok(log1mexp(-vg_ln_tail(p, -x, -1.0)?))
    }
}

pub fn vg_cdf(p: &VgParams, t: f64) -> Result<f64> {
    Ok(vg_ln_cdf(p, t)?.exp())
}
