//! Ewald splitting of `G`, the Ewald function `F` behind the Epstein zeta
//! continuation, and Madelung constants.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use super::{cutoff_radius, GreenEvaluation, Route, Torus};
use crate::error::{Error, Result};
use crate::kernels::{exp_integral_e1, gamma_q, upper_incomplete_gamma, RieszParams, EULER_GAMMA};
use crate::lattice::{ball_volume, for_each_vector_near, vectors_within, Lattice, DEFAULT_BUDGET};
use crate::quad;
use crate::sum::NeumaierSum;
use crate::theta::{self, GrowthBound};

/// Heat time at which `F` splits its sums; `G = κ_mult F + κ_add` refers to
/// this split.
pub const DEFAULT_SPLIT: f64 = 0.25;

const TAIL_TARGET: f64 = 1e-15;

/// Direct-space Ewald term at heat time `tau`.
#[inline]
fn direct_term(p: &RieszParams, tau: f64, r: f64) -> f64 {
    let z = r * r / (4.0 * tau);
    if p.is_log() {
        exp_integral_e1(z) / (4.0 * PI)
    } else {
        gamma_q(0.5 * p.s(), z) * r.powf(-p.s()) / p.c()
    }
}

/// `d/dr` of [`direct_term`].
#[inline]
fn direct_term_deriv(p: &RieszParams, tau: f64, r: f64) -> f64 {
    let z = r * r / (4.0 * tau);
    if p.is_log() {
        -2.0 * (-z).exp() / (4.0 * PI * r)
    } else {
        let a = 0.5 * p.s();
        let dens = (-z + a * z.ln()).exp() / gamma(a);
        -r.powf(-p.s() - 1.0) / p.c() * (p.s() * gamma_q(a, z) + 2.0 * dens)
    }
}

/// Fourier coefficient `(4π²k²)^{-α} Q(α, 4π²k²τ)` of the smooth part.
#[inline]
fn dual_coefficient(p: &RieszParams, tau: f64, k2: f64) -> f64 {
    let y = 4.0 * PI * PI * k2;
    y.powf(-p.alpha()) * gamma_q(p.alpha(), y * tau)
}

/// Limit of `D(r) - g(r)/c` as `r → 0`.
fn self_term(p: &RieszParams, tau: f64) -> f64 {
    if p.is_log() {
        (-EULER_GAMMA + (4.0 * tau).ln()) / (4.0 * PI)
    } else {
        -(4.0 * tau).powf(-0.5 * p.s()) / (p.c() * gamma(0.5 * p.s() + 1.0))
    }
}

/// Contribution of the constant mode removed from the heat trace.
fn mean_correction(p: &RieszParams, tau: f64, volume: f64) -> f64 {
    -tau.powf(p.alpha()) / (volume * gamma(p.alpha() + 1.0))
}

/// `(κ_mult, κ_add)` with `G_{nΛ}(x) = κ_mult F_{nΛ}(x) + κ_add`, where `F`
/// is [`ewald_f`] on the period lattice of volume `volume`.
pub fn ewald_constants(params: &RieszParams, volume: f64) -> Result<(f64, f64)> {
    if params.is_log() {
        return Err(Error::LogUnsupported);
    }
    Ok((
        1.0 / params.c(),
        mean_correction(params, DEFAULT_SPLIT, volume),
    ))
}

/// Ewald evaluator for `G_{nΛ}` with precomputed Fourier terms.
#[derive(Debug, Clone)]
pub struct EwaldGreen {
    torus: Torus,
    params: RieszParams,
    tau: f64,
    direct_radius: f64,
    direct_tail: f64,
    // Half of (nΛ)* \ 0 with weight 2C(|k|)/N.
    dual: Vec<(Vec<f64>, f64)>,
    dual_tail: f64,
    constant: f64,
}

impl EwaldGreen {
    pub fn new(torus: &Torus, params: &RieszParams) -> Result<Self> {
        Self::with_split(torus, params, DEFAULT_SPLIT)
    }

    /// Uses heat time `tau` to split direct and Fourier sums.
    pub fn with_split(torus: &Torus, params: &RieszParams, tau: f64) -> Result<Self> {
        if params.d() != torus.dim() {
            return Err(Error::DimensionMismatch {
                expected: torus.dim(),
                got: params.d(),
            });
        }
        if !(tau > 0.0) {
            return Err(Error::NonPositiveTime(tau));
        }
        let lat = torus.lattice();
        let (direct_radius, direct_tail) =
            cutoff_radius(lat, (4.0 * tau).sqrt(), TAIL_TARGET, |r| {
                direct_term(params, tau, r).abs()
            });
        let dual_lat = torus.dual();
        let volume = torus.volume();
        let (kmax, dual_tail) =
            cutoff_radius(dual_lat, (0.25 / tau).sqrt() / PI, TAIL_TARGET, |k| {
                dual_coefficient(params, tau, k * k) / volume
            });
        let dual = vectors_within(dual_lat, kmax * kmax)
            .into_iter()
            .filter(|(k, q)| *q > 0.0 && first_nonzero_positive(k))
            .map(|(k, q)| {
                let w = 2.0 * dual_coefficient(params, tau, q) / volume;
                (k, w)
            })
            .collect();
        Ok(Self {
            torus: torus.clone(),
            params: *params,
            tau,
            direct_radius,
            direct_tail,
            dual,
            dual_tail,
            constant: mean_correction(params, tau, volume),
        })
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    pub fn params(&self) -> &RieszParams {
        &self.params
    }
    pub fn split(&self) -> f64 {
        self.tau
    }

    fn terms(&self, x: &[f64], punctured: bool) -> Result<(f64, usize)> {
        let y = self.torus.reduce(x);
        let lat = self.torus.lattice();
        let guard = 1e-10 * lat.covolume().powf(1.0 / lat.dim() as f64);
        let mut acc = NeumaierSum::new();
        let mut count = 0usize;
        let mut near = None;
        let r2 = self.direct_radius * self.direct_radius;
        for_each_vector_near(lat, &y, r2, |c, _| {
            let v = lat.lattice_point(c);
            let r = dist(&y, &v);
            if r <= guard {
                near = Some(r);
                return;
            }
            if r * r <= r2 {
                acc.add(direct_term(&self.params, self.tau, r));
                count += 1;
            }
        });
        if let Some(r) = near {
            if !punctured {
                return Err(Error::OnLattice(r));
            }
            acc.add(self_term(&self.params, self.tau));
        }
        for (k, w) in &self.dual {
            acc.add(w * (2.0 * PI * dot(k, &y)).cos());
        }
        acc.add(self.constant);
        Ok((acc.value(), count + self.dual.len()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<GreenEvaluation> {
        let (value, terms_used) = self.terms(x, false)?;
        Ok(self.report(value, terms_used))
    }

    /// `G(x)`, or the Madelung limit `lim (G − g/c)` when `x ∈ nΛ`.
    pub fn eval_punctured(&self, x: &[f64]) -> Result<GreenEvaluation> {
        let (value, terms_used) = self.terms(x, true)?;
        Ok(self.report(value, terms_used))
    }

    fn report(&self, value: f64, terms_used: usize) -> GreenEvaluation {
        GreenEvaluation {
            value,
            route: Route::Ewald,
            abs_error_estimate: self.direct_tail
                + 2.0 * self.dual_tail
                + 1e-15 * terms_used as f64 * value.abs().max(1.0),
            terms_used,
        }
    }

    /// `∇G(x)`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.torus.dim();
        let y = self.torus.reduce(x);
        let lat = self.torus.lattice();
        let guard = 1e-10 * lat.covolume().powf(1.0 / d as f64);
        let mut acc: Vec<NeumaierSum> = vec![NeumaierSum::new(); d];
        let r2 = self.direct_radius * self.direct_radius;
        let mut hit = None;
        for_each_vector_near(lat, &y, r2, |c, _| {
            let v = lat.lattice_point(c);
            let r = dist(&y, &v);
            if r <= guard {
                hit = Some(r);
                return;
            }
            if r * r <= r2 {
                let f = direct_term_deriv(&self.params, self.tau, r) / r;
                for j in 0..d {
                    acc[j].add(f * (y[j] - v[j]));
                }
            }
        });
        if let Some(r) = hit {
            return Err(Error::OnLattice(r));
        }
        for (k, w) in &self.dual {
            let sn = (2.0 * PI * dot(k, &y)).sin();
            for j in 0..d {
                acc[j].add(-2.0 * PI * k[j] * w * sn);
            }
        }
        Ok(acc.iter().map(NeumaierSum::value).collect())
    }
}

/// `G_{nΛ}(x)` by Ewald splitting.
pub fn green_ewald(
    base: &Lattice,
    n: u32,
    params: &RieszParams,
    x: &[f64],
) -> Result<GreenEvaluation> {
    let torus = Torus::new(base, n)?;
    EwaldGreen::new(&torus, params)?.eval(x)
}

fn first_nonzero_positive(k: &[f64]) -> bool {
    for &c in k {
        if c.abs() > 1e-12 {
            return c > 0.0;
        }
    }
    false
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Madelung constant `M = lim_{x→0} (G_{nΛ}(x) − g(x)/c)`.
///
/// `energy_scale` is `c²M`, the lattice energy per point in the
/// normalization of [`crate::energy::periodic_energy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Madelung {
    pub value: f64,
    pub energy_scale: f64,
    pub abs_error_estimate: f64,
    pub shells_used: usize,
}

/// Madelung constant of the torus ℝᵈ/(nΛ) from shell data.
pub fn madelung(base: &Lattice, n: u32, params: &RieszParams) -> Result<Madelung> {
    let torus = Torus::new(base, n)?;
    madelung_with(&torus, params, DEFAULT_SPLIT, DEFAULT_BUDGET)
}

/// [`madelung`] with an explicit split time and enumeration budget.
pub fn madelung_with(
    torus: &Torus,
    params: &RieszParams,
    tau: f64,
    budget: f64,
) -> Result<Madelung> {
    if params.d() != torus.dim() {
        return Err(Error::DimensionMismatch {
            expected: torus.dim(),
            got: params.d(),
        });
    }
    let volume = torus.volume();
    let direct = |q: f64| direct_term(params, tau, q.sqrt()).abs();
    let (direct_sum, direct_tail, direct_shells) =
        shell_sum(torus.lattice(), 8.0 * tau, budget, direct)?;
    let dual = |q: f64| dual_coefficient(params, tau, q) / volume;
    let (dual_sum, dual_tail, dual_shells) =
        shell_sum(torus.dual(), 2.0 / (PI * PI * tau), budget, dual)?;
    let value =
        direct_sum + self_term(params, tau) + dual_sum + mean_correction(params, tau, volume);
    Ok(Madelung {
        value,
        energy_scale: params.c() * params.c() * value,
        abs_error_estimate: direct_tail + dual_tail + 1e-14 * value.abs().max(1.0),
        shells_used: direct_shells + dual_shells,
    })
}

// Σ_{v≠0} f(|v|²) over shells, growing the shell range until the certified
// tail is below target.
fn shell_sum<F: Fn(f64) -> f64>(
    lat: &Lattice,
    start: f64,
    budget: f64,
    f: F,
) -> Result<(f64, f64, usize)> {
    let mut m = start.max(lat.minimal_norm() * 1.01);
    for _ in 0..40 {
        let shells = theta::shells(lat, m, budget)?;
        let growth = GrowthBound::fit(&shells);
        let tail = growth.tail(shells.max_norm, &f);
        if tail <= TAIL_TARGET {
            let mut acc = NeumaierSum::new();
            for s in shells.entries.iter().rev().filter(|s| s.norm > 0.0) {
                acc.add(s.count as f64 * f(s.norm));
            }
            return Ok((acc.value(), tail, shells.entries.len()));
        }
        m *= 1.3;
    }
    Err(Error::Nonconvergence(
        "shell sum tail did not fall below target".into(),
    ))
}

/// Ewald function
///
/// ```text
/// F(x) = Σ_{v∈Λ} Q(s/2, |x+v|²)|x+v|^{-s}
///      + (1/|Λ|) Σ_{w∈Λ*\0} π^{d/2} (π|w|)^{s-d} Γ((d-s)/2, π²|w|²)/Γ(s/2) cos(2πw·x),
/// ```
///
/// entire in `s > 0` apart from the constant it differs from the Epstein zeta
/// function by.
pub fn ewald_f(lat: &Lattice, s: f64, x: &[f64]) -> Result<GreenEvaluation> {
    ewald_f_inner(lat, s, x, false)
}

fn ewald_f_inner(lat: &Lattice, s: f64, x: &[f64], punctured: bool) -> Result<GreenEvaluation> {
    let d = lat.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::OutOfRange(format!("need s > 0, got {s}")));
    }
    let a = 0.5 * s;
    let alpha = 0.5 * (d as f64 - s);
    let direct = |r: f64| gamma_q(a, r * r) * r.powf(-s);
    let (rmax, direct_tail) = cutoff_radius(lat, 1.0, TAIL_TARGET, direct);
    let dual_lat = lat.dual();
    let gs = gamma(a);
    let vol = lat.covolume();
    let dual_coef = |w: f64| -> f64 {
        let y = PI * PI * w * w;
        let g = upper_incomplete_gamma(alpha, y).unwrap_or(0.0);
        PI.powf(0.5 * d as f64) * (PI * w).powf(s - d as f64) * g / (gs * vol)
    };
    let (kmax, dual_tail) = cutoff_radius(&dual_lat, 0.5, TAIL_TARGET, |w| dual_coef(w).abs());

    let y = lat.reduce_to_cell(x, 1);
    let guard = 1e-10 * vol.powf(1.0 / d as f64);
    let mut acc = NeumaierSum::new();
    let mut terms = 0usize;
    let mut hit = None;
    for_each_vector_near(lat, &y, rmax * rmax, |c, _| {
        let v = lat.lattice_point(c);
        let r = dist(&y, &v);
        if r <= guard {
            hit = Some(r);
        } else if r <= rmax {
            acc.add(direct(r));
            terms += 1;
        }
    });
    if let Some(r) = hit {
        if !punctured {
            return Err(Error::OnLattice(r));
        }
    }
    for (w, q) in vectors_within(&dual_lat, kmax * kmax) {
        if q > 0.0 && first_nonzero_positive(&w) {
            acc.add(2.0 * dual_coef(q.sqrt()) * (2.0 * PI * dot(&w, &y)).cos());
            terms += 1;
        }
    }
    let value = acc.value();
    Ok(GreenEvaluation {
        value,
        route: Route::Ewald,
        abs_error_estimate: direct_tail + dual_tail + 1e-15 * terms as f64 * value.abs().max(1.0),
        terms_used: terms,
    })
}

fn zeta_pole_constant(lat: &Lattice, s: f64) -> f64 {
    let d = lat.dim() as f64;
    2.0 * PI.powf(0.5 * d) / (lat.covolume() * gamma(0.5 * s) * (d - s))
}

fn check_pole(lat: &Lattice, s: f64) -> Result<()> {
    if (s - lat.dim() as f64).abs() < 1e-12 {
        Err(Error::Pole(lat.dim()))
    } else {
        Ok(())
    }
}

/// Epstein zeta `ζ_Λ(s; x) = Σ_{v∈Λ} |x+v|^{-s}` by Ewald continuation, valid
/// for every `s > 0` except the pole at `s = d`.
pub fn epstein_zeta_ewald(lat: &Lattice, s: f64, x: &[f64]) -> Result<GreenEvaluation> {
    check_pole(lat, s)?;
    let mut f = ewald_f(lat, s, x)?;
    f.value -= zeta_pole_constant(lat, s);
    Ok(f)
}

/// Epstein zeta over `Λ \ 0` at `x = 0` by Ewald continuation.
pub fn epstein_zeta_punctured(lat: &Lattice, s: f64) -> Result<GreenEvaluation> {
    check_pole(lat, s)?;
    let zero = vec![0.0; lat.dim()];
    let mut f = ewald_f_inner(lat, s, &zero, true)?;
    f.value -= zeta_pole_constant(lat, s) + 1.0 / gamma(0.5 * s + 1.0);
    Ok(f)
}

/// Epstein zeta: direct summation for `s > d`, Ewald continuation for
/// `0 < s < d`.
pub fn epstein_zeta(lat: &Lattice, s: f64, x: &[f64]) -> Result<GreenEvaluation> {
    check_pole(lat, s)?;
    if s > lat.dim() as f64 {
        epstein_zeta_direct(lat, s, x, None)
    } else {
        epstein_zeta_ewald(lat, s, x)
    }
}

/// Direct summation of `Σ |x+v|^{-s}` for `s > d`, with a smooth radial
/// cutoff at `radius` and the cut-off part replaced by its integral.
///
/// The error estimate is the change when the radius shrinks by 20%.
pub fn epstein_zeta_direct(
    lat: &Lattice,
    s: f64,
    x: &[f64],
    radius: Option<f64>,
) -> Result<GreenEvaluation> {
    direct_zeta(lat, s, x, radius, false)
}

/// [`epstein_zeta_direct`] over `Λ \ 0` at `x = 0`.
pub fn epstein_zeta_punctured_direct(
    lat: &Lattice,
    s: f64,
    radius: Option<f64>,
) -> Result<GreenEvaluation> {
    direct_zeta(lat, s, &vec![0.0; lat.dim()], radius, true)
}

fn direct_zeta(
    lat: &Lattice,
    s: f64,
    x: &[f64],
    radius: Option<f64>,
    punctured: bool,
) -> Result<GreenEvaluation> {
    let d = lat.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if !(s > d as f64) {
        return Err(Error::OutOfRange(format!(
            "direct summation needs s > d, got s = {s}"
        )));
    }
    let unit = ball_volume(d, 1.0);
    let r = match radius {
        Some(r) if r > 0.0 => r,
        Some(r) => {
            return Err(Error::OutOfRange(format!(
                "radius must be positive, got {r}"
            )))
        }
        None => (2e5 * lat.covolume() / unit).powf(1.0 / d as f64),
    }
    .max(8.0 * lat.cell_radius());
    let y = if punctured {
        x.to_vec()
    } else {
        lat.reduce_to_cell(x, 1)
    };
    let (value, terms) = smooth_cutoff_sum(lat, s, &y, r, punctured)?;
    let (coarse, _) = smooth_cutoff_sum(lat, s, &y, 0.8 * r, punctured)?;
    Ok(GreenEvaluation {
        value,
        route: Route::Direct,
        abs_error_estimate: (value - coarse).abs() + 1e-15 * terms as f64,
        terms_used: terms,
    })
}

// C^∞ step: 1 on [0, 1/2], 0 on [1, ∞).
fn cutoff(u: f64) -> f64 {
    if u <= 0.5 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let t = 2.0 * (1.0 - u);
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

fn smooth_cutoff_sum(
    lat: &Lattice,
    s: f64,
    y: &[f64],
    r: f64,
    punctured: bool,
) -> Result<(f64, usize)> {
    let d = lat.dim();
    let df = d as f64;
    let guard = 1e-10 * lat.covolume().powf(1.0 / df);
    let mut acc = NeumaierSum::new();
    let mut terms = 0usize;
    let mut hit = None;
    for_each_vector_near(lat, y, r * r, |c, _| {
        let v = lat.lattice_point(c);
        let q = dist(y, &v);
        if q <= guard {
            hit = Some(q);
        } else if q < r {
            acc.add(q.powf(-s) * cutoff(q / r));
            terms += 1;
        }
    });
    if let (Some(q), false) = (hit, punctured) {
        return Err(Error::OnLattice(q));
    }
    // (1/|Λ|) ∫_{ℝᵈ} |y|^{-s}(1 − χ(|y|/r)) dy
    let sphere = df * ball_volume(d, 1.0);
    let shell = quad::integrate(
        |t| t.powf(df - 1.0 - s) * (1.0 - cutoff(t / r)),
        0.5 * r,
        r,
        0.0,
        1e-15,
    )?;
    let tail = r.powf(df - s) / (s - df);
    acc.add(sphere * (shell.value + tail) / lat.covolume());
    Ok((acc.value(), terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::ball_tail;
    use crate::lattice::LatticeName;

    fn z(d: usize) -> Lattice {
        Lattice::named(LatticeName::Z(d)).unwrap()
    }

    #[test]
    fn zeta_z2_at_four_matches_closed_form() {
        // 4 ζ(2) β(2)
        let exact = 4.0 * PI * PI / 6.0 * 0.915_965_594_177_219;
        let e = epstein_zeta_punctured(&z(2), 4.0).unwrap();
        assert!((e.value - exact).abs() < 1e-12, "{} vs {exact}", e.value);
        let d = epstein_zeta_punctured_direct(&z(2), 4.0, Some(200.0)).unwrap();
        assert!((d.value - exact).abs() < 1e-9, "{} vs {exact}", d.value);
    }

    #[test]
    fn zeta_direct_and_continuation_agree_above_d() {
        let x = [0.3, 0.4];
        let direct = epstein_zeta_direct(&z(2), 3.0, &x, Some(50.0)).unwrap();
        let ew = epstein_zeta_ewald(&z(2), 3.0, &x).unwrap();
        assert!(
            (direct.value - ew.value).abs() < 1e-9,
            "{} vs {}",
            direct.value,
            ew.value
        );
    }

    #[test]
    fn zeta_pole_is_reported() {
        assert!(matches!(
            epstein_zeta(&z(2), 2.0, &[0.1, 0.2]),
            Err(Error::Pole(2))
        ));
    }

    #[test]
    fn ewald_green_direct_and_dual_split_independent() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let torus = Torus::new(&a2, 2).unwrap();
        let p = RieszParams::new(2, 1.0).unwrap();
        let x = [0.37, 0.81];
        let a = EwaldGreen::with_split(&torus, &p, 0.1)
            .unwrap()
            .eval(&x)
            .unwrap()
            .value;
        let b = EwaldGreen::with_split(&torus, &p, 0.6)
            .unwrap()
            .eval(&x)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        let log = RieszParams::new(2, 0.0).unwrap();
        let a = EwaldGreen::with_split(&torus, &log, 0.1)
            .unwrap()
            .eval(&x)
            .unwrap()
            .value;
        let b = EwaldGreen::with_split(&torus, &log, 0.6)
            .unwrap()
            .eval(&x)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn green_is_kappa_affine_in_f() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let torus = Torus::new(&a2, 2).unwrap();
        let p = RieszParams::new(2, 0.7).unwrap();
        let (km, ka) = ewald_constants(&p, torus.volume()).unwrap();
        let x = [0.2, 0.55];
        let g = EwaldGreen::new(&torus, &p).unwrap().eval(&x).unwrap().value;
        let f = ewald_f(torus.lattice(), 0.7, &x).unwrap().value;
        assert!((g - (km * f + ka)).abs() < 1e-12);
    }

    #[test]
    fn green_gradient_matches_differences() {
        let z3 = z(3);
        let torus = Torus::new(&z3, 2).unwrap();
        let p = RieszParams::coulomb(3).unwrap();
        let ew = EwaldGreen::new(&torus, &p).unwrap();
        let x = [0.3, 0.7, 1.1];
        let g = ew.grad(&x).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (ew.eval(&xp).unwrap().value - ew.eval(&xm).unwrap().value) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8, "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn madelung_matches_punctured_limit_and_scales() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        for s in [0.0, 0.5, 1.0] {
            let p = RieszParams::new(2, s).unwrap();
            let m1 = madelung(&a2, 1, &p).unwrap().value;
            let m2 = madelung(&a2, 2, &p).unwrap().value;
            let torus = Torus::new(&a2, 2).unwrap();
            let lim = EwaldGreen::new(&torus, &p)
                .unwrap()
                .eval_punctured(&[0.0, 0.0])
                .unwrap()
                .value;
            assert!((lim - m2).abs() < 1e-12, "{lim} vs {m2}");
            let expected = if s == 0.0 {
                m1 + 2f64.ln() / (2.0 * PI)
            } else {
                m1 * 2f64.powf(-s)
            };
            assert!((m2 - expected).abs() < 1e-12, "s={s}: {m2} vs {expected}");
        }
    }

    #[test]
    fn ball_tail_is_used_for_direct_cutoff() {
        let z2 = z(2);
        let p = RieszParams::new(2, 1.0).unwrap();
        let tail = ball_tail(&z2, 6.0, |r| direct_term(&p, 0.25, r));
        assert!(tail < 1e-10);
    }
}
