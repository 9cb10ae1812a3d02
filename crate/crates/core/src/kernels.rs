//! Riesz and heat kernels, the constant `c_{d,s}`, and incomplete gamma
//! functions.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Interaction parameters: dimension `d` and Riesz exponent `s`.
///
/// `s = 0` in `d = 2` selects the logarithmic kernel `-ln r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RieszParams {
    d: usize,
    s: f64,
    alpha: f64,
    c: f64,
    log: bool,
}

impl RieszParams {
    /// Requires `0 < s < d`, or `s = 0` with `d = 2`.
    pub fn new(d: usize, s: f64) -> Result<Self> {
        let c = riesz_constant(d, s)?;
        Ok(Self {
            d,
            s,
            alpha: 0.5 * (d as f64 - s),
            c,
            log: s == 0.0,
        })
    }

    /// Coulomb interaction: `s = d - 2`, logarithmic in `d = 2`.
    pub fn coulomb(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::OutOfRange(format!("no Coulomb kernel in d = {d}")));
        }
        Self::new(d, (d - 2) as f64)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    /// Order of the fractional Laplacian, `(d - s)/2`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// `c_{d,s}` with `(-Δ)^α g = c_{d,s} δ₀`.
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn is_log(&self) -> bool {
        self.log
    }
}

/// `g(r) = r^{-s}`, or `-ln r` for the logarithmic case.
pub fn riesz_kernel(params: &RieszParams, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    Ok(riesz_unchecked(params, r))
}

#[inline]
pub(crate) fn riesz_unchecked(params: &RieszParams, r: f64) -> f64 {
    if params.log {
        -r.ln()
    } else {
        r.powf(-params.s)
    }
}

/// Standard heat kernel `(4πt)^{-d/2} exp(-r²/(4t))`.
pub fn heat_kernel(d: usize, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    Ok((4.0 * PI * t).powf(-0.5 * d as f64) * (-r * r / (4.0 * t)).exp())
}

/// `c_{d,s} = 2^{d-s} π^{d/2} Γ((d-s)/2) / Γ(s/2)`, and `2π` for the 2D log
/// kernel.
pub fn riesz_constant(d: usize, s: f64) -> Result<f64> {
    if d == 0 || !(s >= 0.0) || s >= d as f64 {
        return Err(Error::OutOfRange(format!(
            "need 0 <= s < d, got d = {d}, s = {s}"
        )));
    }
    if s == 0.0 {
        return if d == 2 {
            Ok(2.0 * PI)
        } else {
            Err(Error::OutOfRange(format!(
                "s = 0 is only defined for d = 2, got d = {d}"
            )))
        };
    }
    let df = d as f64;
    let alpha = 0.5 * (df - s);
    Ok((2.0f64).powf(df - s) * PI.powf(0.5 * df) * gamma(alpha) / gamma(0.5 * s))
}

/// Evaluates `(1/Γ(s/2)) ∫₀^∞ exp(-t r²) t^{s/2-1} dt` by adaptive
/// quadrature; the result reproduces `r^{-s}`.
pub fn gaussian_superposition(r: f64, s: f64, quad_tol: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    if !(s > 0.0) {
        return Err(Error::OutOfRange(format!("need s > 0, got {s}")));
    }
    let a = 0.5 * s;
    // u = t r², then u = e^y: ∫ exp(-e^y) e^{a y} dy.
    let lo = -(45.0f64).max(42.0 / a);
    let hi = (800.0f64).ln();
    let scale = r.powf(-s) / gamma(a);
    let q = quad::integrate(
        |y| (-y.exp() + a * y).exp(),
        lo,
        hi,
        quad_tol / scale.max(1e-300) * 0.5,
        0.0,
    )?;
    Ok(q.value * scale)
}

/// `(1/Γ(α)) ∫₀^∞ Ψ_t(r) t^{α−1} dt` by quadrature; equals `g(r)/c_{d,s}`.
///
/// In the logarithmic case the integral diverges and the difference
/// `∫₀^∞ (Ψ_t(r) − Ψ_t(1)) dt` is returned instead, which equals
/// `(g(r) − g(1))/c = −ln r/(2π)`.
pub fn mellin_kernel(params: &RieszParams, r: f64, quad_tol: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    let d = params.d() as f64;
    let pre = (4.0 * PI).powf(-0.5 * d);
    // t = e^y: Ψ_t t^α dt/t = (4π)^{−d/2} exp(−r² e^{−y}/4 − s y/2) dy.
    let q = if params.is_log() {
        let lo = (0.25 * r * r).ln().min(-(4.0f64).ln()) - 6.0;
        quad::integrate(
            |y| {
                let e = (-y).exp();
                (-0.25 * r * r * e).exp() - (-0.25 * e).exp()
            },
            lo,
            lo + 60.0,
            quad_tol / pre,
            0.0,
        )?
    } else {
        let s = params.s();
        let lo = (0.25 * r * r).ln() - 6.0;
        let hi = (0.25 * r * r).ln() + 80.0 / s;
        quad::integrate(
            |y| (-0.25 * r * r * (-y).exp() - 0.5 * s * y).exp(),
            lo,
            hi,
            quad_tol / pre,
            0.0,
        )?
    };
    Ok(pre * q.value / gamma(params.alpha()))
}

/// Upper incomplete gamma function `Γ(a, x) = ∫ₓ^∞ e^{-u} u^{a-1} du`.
///
/// Any finite real `a` and `x > 0`; `a = 0` is the exponential integral
/// `E₁(x)`. Negative orders use the downward recurrence.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !a.is_finite() {
        return Err(Error::GammaDomain { a, x });
    }
    if a == 0.0 {
        return Ok(exp_integral_e1(x));
    }
    if x >= 1.0 && x >= a + 1.0 {
        return Ok(upper_gamma_cf(a, x));
    }
    if a.abs() < 0.01 {
        return Ok(upper_gamma_small_a(a, x));
    }
    if a > 0.0 {
        let lower = lower_gamma_series(a, x);
        return Ok(gamma(a) - lower);
    }
    // a < 0: Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a
    let upper1 = upper_incomplete_gamma(a + 1.0, x)?;
    Ok((upper1 - x.powf(a) * (-x).exp()) / a)
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x)/Γ(a)` for `a > 0`,
/// `x >= 0`, computed without overflow for large arguments.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x >= 1.0 && x >= a + 1.0 {
        let log_pref = -x + a * x.ln() - ln_gamma(a);
        return log_pref.exp() * cf_tail(a, x);
    }
    if a < 1.0 {
        let up = upper_incomplete_gamma(a, x).unwrap_or(f64::NAN);
        return up / gamma(a);
    }
    let log_pref = -x + a * x.ln() - ln_gamma(a + 1.0);
    1.0 - log_pref.exp() * series_sum(a, x)
}

/// Regularized lower incomplete gamma `P(a, x) = 1 - Q(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        let log_pref = -x + a * x.ln() - ln_gamma(a + 1.0);
        return log_pref.exp() * series_sum(a, x);
    }
    1.0 - gamma_q(a, x)
}

/// Exponential integral `E₁(x)`, `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        (-x).exp() * cf_tail(0.0, x)
    }
}

// Σ_{k≥0} x^k / ((a+1)(a+2)…(a+k)), so that γ(a,x) = e^{-x} x^a Σ / a.
fn series_sum(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    (-x + a * x.ln()).exp() * series_sum(a, x) / a
}

// Modified Lentz evaluation of the continued fraction
// Γ(a,x) = e^{-x} x^a · 1/(x+1-a- 1(1-a)/(x+3-a- 2(2-a)/(x+5-a- …))).
fn cf_tail(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
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
    h
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    (-x + a * x.ln()).exp() * cf_tail(a, x)
}

// Small |a|, x < 1: Γ(a,x) = [Γ(a) - x^a/a] - Σ_{k≥1} (-1)^k x^{a+k} / (k!(a+k)),
// with Γ(a) - x^a/a = (Γ(1+a) - 1)/a - (x^a - 1)/a evaluated without
// cancellation.
fn upper_gamma_small_a(a: f64, x: f64) -> f64 {
    // ln Γ(1+a) / a = -γ + Σ_{k≥2} (-1)^k ζ(k) a^{k-1} / k
    const ZETA: [f64; 9] = [
        1.644_934_066_848_226_4,
        1.202_056_903_159_594_3,
        1.082_323_233_711_138_2,
        1.036_927_755_143_37,
        1.017_343_061_984_449,
        1.008_349_277_381_922_8,
        1.004_077_356_197_944_3,
        1.002_008_392_826_082_2,
        1.000_994_575_127_818_1,
    ];
    let mut lg_over_a = -EULER_GAMMA;
    let mut apow = 1.0;
    for (i, z) in ZETA.iter().enumerate() {
        let k = (i + 2) as f64;
        apow *= a;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        lg_over_a += sign * z * apow / k;
    }
    let lg = lg_over_a * a;
    let gamma_part = lg_over_a * expm1_over(lg);
    let lx = x.ln();
    let pow_part = lx * expm1_over(a * lx);
    let mut tail = 0.0;
    let mut fact = 1.0;
    let xa = x.powf(a);
    let mut xk = 1.0;
    for k in 1..60 {
        fact *= k as f64;
        xk *= -x;
        let term = xk * xa / (fact * (a + k as f64));
        tail += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    gamma_part - pow_part - tail
}

// expm1(z)/z, continuous at 0.
fn expm1_over(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn kernel_values() {
        let p = RieszParams::new(3, 1.0).unwrap();
        assert_eq!(riesz_kernel(&p, 2.0).unwrap(), 0.5);
        let l = RieszParams::new(2, 0.0).unwrap();
        assert!(l.is_log());
        assert_eq!(riesz_kernel(&l, 1.0).unwrap(), 0.0);
        let p = RieszParams::new(8, 6.0).unwrap();
        assert!((riesz_kernel(&p, 0.5).unwrap() - 64.0).abs() < 1e-12);
        assert!(matches!(
            riesz_kernel(&p, 0.0),
            Err(Error::NonPositiveDistance(_))
        ));
    }

    #[test]
    fn heat_kernel_values() {
        assert!((heat_kernel(2, 1.0 / (4.0 * PI), 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((heat_kernel(1, 1.0, 0.0).unwrap() - 0.282_094_791_773_878_14).abs() < 1e-15);
        let v = heat_kernel(3, 0.25, 1.0).unwrap();
        assert!((v - PI.powf(-1.5) * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.066_066_410_128_993_84).abs() < 1e-15);
        assert!(heat_kernel(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn riesz_constant_values() {
        assert!(rel(riesz_constant(3, 1.0).unwrap(), 4.0 * PI) < 1e-14);
        assert!(rel(riesz_constant(2, 0.0).unwrap(), 2.0 * PI) < 1e-15);
        assert!(rel(riesz_constant(8, 6.0).unwrap(), 2.0 * PI.powi(4)) < 1e-14);
        assert!(riesz_constant(3, 3.0).is_err());
        assert!(riesz_constant(3, 0.0).is_err());
        let p = RieszParams::coulomb(3).unwrap();
        assert_eq!(p.alpha(), 1.0);
    }

    #[test]
    fn superposition_identity() {
        assert!((gaussian_superposition(1.0, 2.0, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!((gaussian_superposition(2.0, 1.0, 1e-12).unwrap() - 0.5).abs() < 1e-10);
        let v = gaussian_superposition(0.7, 3.5, 1e-11).unwrap();
        assert!((v - 0.7f64.powf(-3.5)).abs() < 1e-9);
        assert!((v - 3.484_631_514_094_443).abs() < 1e-9);
    }

    #[test]
    fn mellin_kernel_reproduces_riesz_over_c() {
        for (d, s) in [
            (2, 0.0),
            (2, 0.5),
            (2, 1.0),
            (3, 0.5),
            (3, 1.0),
            (4, 2.0),
            (8, 6.0),
        ] {
            let p = RieszParams::new(d, s).unwrap();
            for r in [0.3, 1.1, 3.0] {
                let v = mellin_kernel(&p, r, 1e-13).unwrap();
                let want = riesz_kernel(&p, r).unwrap() / p.c();
                assert!((v - want).abs() < 1e-9, "d={d} s={s} r={r}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        assert!(rel(upper_incomplete_gamma(1.0, 1.0).unwrap(), (-1.0f64).exp()) < 1e-14);
        // √π erfc(1)
        assert!(
            rel(
                upper_incomplete_gamma(0.5, 1.0).unwrap(),
                0.278_805_585_280_661_4
            ) < 1e-13
        );
        assert!(
            rel(
                upper_incomplete_gamma(0.0, 1.0).unwrap(),
                0.219_383_934_395_520_3
            ) < 1e-13
        );
        let x = 0.5f64;
        let closed = (-x).exp() / x - exp_integral_e1(x);
        assert!(rel(upper_incomplete_gamma(-1.0, x).unwrap(), closed) < 1e-13);
        assert!(upper_incomplete_gamma(f64::NAN, 1.0).is_err());
        assert!(upper_incomplete_gamma(1.0, 0.0).is_err());
    }

    #[test]
    fn incomplete_gamma_matches_quadrature_oracle() {
        // Independent oracle: ∫ₓ^∞ e^{-u} u^{a-1} du with u = x + y.
        for &(a, x) in &[
            (0.5, 0.3),
            (2.5, 1.7),
            (-0.5, 0.2),
            (-0.3, 2.0),
            (0.005, 0.4),
            (11.0, 4.0),
            (1e-5, 0.7),
            (-1.5, 0.4),
            (-2.5, 3.0),
        ] {
            let q = quad::integrate(
                |y: f64| {
                    let u = x + y / (1.0 - y);
                    (-u).exp() * u.powf(a - 1.0) / ((1.0 - y) * (1.0 - y))
                },
                0.0,
                1.0,
                1e-15,
                1e-14,
            )
            .unwrap();
            let v = upper_incomplete_gamma(a, x).unwrap();
            assert!(rel(v, q.value) < 1e-11, "a={a} x={x}: {v} vs {}", q.value);
        }
    }

    #[test]
    fn regularized_pair_sums_to_one() {
        for &(a, x) in &[(0.5, 0.2), (3.0, 2.0), (11.0, 30.0), (1.0, 5.0)] {
            assert!((gamma_p(a, x) + gamma_q(a, x) - 1.0).abs() < 1e-14);
        }
        assert!(rel(gamma_q(1.0, 3.0), (-3.0f64).exp()) < 1e-14);
    }

    #[test]
    fn e1_branches_agree_near_one() {
        let left = exp_integral_e1(1.0);
        let right = (-1.0f64).exp() * cf_tail(0.0, 1.0);
        assert!(rel(left, right) < 1e-13);
    }
}
