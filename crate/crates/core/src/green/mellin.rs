//! Torus heat kernel and the Mellin-transform route to `G`.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use super::ewald::dot;
use super::{cutoff_radius, GreenEvaluation, Route, Torus};
use crate::error::{Error, Result};
use crate::kernels::RieszParams;
use crate::lattice::{squared_distances_near, vectors_within, Lattice};
use crate::quad;
use crate::sum::NeumaierSum;

const TAIL_TARGET: f64 = 1e-16;

/// Value of `Φ_t(x) = Σ_{v∈nΛ} Ψ_t(x − v) − 1/N` with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelValue {
    pub value: f64,
    pub route: Route,
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// Mean-zero heat kernel of the torus ℝᵈ/(nΛ).
///
/// Small times use the image sum, large times the Fourier series; the switch
/// is at `t* = N^{2/d}/(4π)` where both converge equally fast.
#[derive(Debug, Clone)]
pub struct TorusHeatKernel {
    torus: Torus,
    t_star: f64,
}

impl TorusHeatKernel {
    pub fn new(torus: &Torus) -> Self {
        let t_star = torus.volume().powf(2.0 / torus.dim() as f64) / (4.0 * PI);
        Self {
            torus: torus.clone(),
            t_star,
        }
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<HeatKernelValue> {
        if t <= self.t_star {
            self.direct(x, t)
        } else {
            self.dual(x, t)
        }
    }

    /// Image-sum evaluation, valid for every `t > 0`.
    pub fn direct(&self, x: &[f64], t: f64) -> Result<HeatKernelValue> {
        self.check(x, t)?;
        let lat = self.torus.lattice();
        let d = self.torus.dim() as f64;
        let pref = (4.0 * PI * t).powf(-0.5 * d);
        let y = self.torus.reduce(x);
        let (r, tail) = cutoff_radius(lat, (4.0 * t).sqrt(), TAIL_TARGET, |r| {
            pref * (-r * r / (4.0 * t)).exp()
        });
        let dists = squared_distances_near(lat, &y, r * r);
        let mut acc = NeumaierSum::new();
        for q in dists.iter().rev() {
            acc.add(pref * (-q / (4.0 * t)).exp());
        }
        acc.add(-1.0 / self.torus.volume());
        Ok(HeatKernelValue {
            value: acc.value(),
            route: Route::Direct,
            tail_bound: tail,
            terms_used: dists.len(),
        })
    }

    /// Fourier-series evaluation, valid for every `t > 0`.
    pub fn dual(&self, x: &[f64], t: f64) -> Result<HeatKernelValue> {
        self.check(x, t)?;
        let dual = self.torus.dual();
        let v = self.torus.volume();
        let (k, tail) = cutoff_radius(dual, 0.0, TAIL_TARGET, |k| {
            (-4.0 * PI * PI * k * k * t).exp() / v
        });
        let y = self.torus.reduce(x);
        let terms = vectors_within(dual, k * k);
        let mut acc = NeumaierSum::new();
        for (w, q) in terms.iter().rev() {
            if *q > 0.0 {
                acc.add((-4.0 * PI * PI * q * t).exp() * (2.0 * PI * dot(w, &y)).cos() / v);
            }
        }
        Ok(HeatKernelValue {
            value: acc.value(),
            route: Route::Fourier,
            tail_bound: tail,
            terms_used: terms.len(),
        })
    }

    /// `Σ_{v∈nΛ\0} Ψ_t(v)`, the images of a point acting on itself.
    pub fn self_images(&self, t: f64) -> Result<HeatKernelValue> {
        let d = self.torus.dim();
        let origin = vec![0.0; d];
        let own = (4.0 * PI * t).powf(-0.5 * d as f64);
        if t > self.t_star {
            let mut v = self.dual(&origin, t)?;
            v.value += 1.0 / self.torus.volume() - own;
            return Ok(v);
        }
        self.check(&origin, t)?;
        let lat = self.torus.lattice();
        let (r, tail) = cutoff_radius(lat, (4.0 * t).sqrt(), TAIL_TARGET, |r| {
            own * (-r * r / (4.0 * t)).exp()
        });
        let dists = squared_distances_near(lat, &origin, r * r);
        let mut acc = NeumaierSum::new();
        for q in dists.iter().rev().filter(|&&q| q > 0.0) {
            acc.add(own * (-q / (4.0 * t)).exp());
        }
        Ok(HeatKernelValue {
            value: acc.value(),
            route: Route::Direct,
            tail_bound: tail,
            terms_used: dists.len(),
        })
    }

    fn check(&self, x: &[f64], t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        if x.len() != self.torus.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.torus.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `Φ_t(x)` on ℝᵈ/(nΛ).
pub fn torus_heat_kernel(base: &Lattice, n: u32, x: &[f64], t: f64) -> Result<HeatKernelValue> {
    let torus = Torus::new(base, n)?;
    TorusHeatKernel::new(&torus).eval(x, t)
}

/// Fixed-point sampler of `t ↦ Φ_t(x)` with image lists sized for `t ≤ t*`
/// and Fourier lists sized for `t ≥ t*`.
pub(crate) struct HeatSampler {
    dim: f64,
    volume: f64,
    t_star: f64,
    dists: Vec<f64>,
    // (|k|², cos 2πk·x), zero mode excluded
    modes: Vec<(f64, f64)>,
    pub(crate) tail: f64,
}

impl HeatSampler {
    pub(crate) fn new(torus: &Torus, x: &[f64]) -> Self {
        let t_star = torus.volume().powf(2.0 / torus.dim() as f64) / (4.0 * PI);
        Self::with_switch(torus, x, t_star)
    }

    pub(crate) fn with_switch(torus: &Torus, x: &[f64], t_star: f64) -> Self {
        let lat = torus.lattice();
        let d = torus.dim() as f64;
        let pref = (4.0 * PI * t_star).powf(-0.5 * d);
        let (r, direct_tail) = cutoff_radius(lat, (4.0 * t_star).sqrt(), TAIL_TARGET, |r| {
            pref * (-r * r / (4.0 * t_star)).exp()
        });
        let y = torus.reduce(x);
        let mut dists = squared_distances_near(lat, &y, r * r);
        dists.reverse();
        let v = torus.volume();
        let (k, dual_tail) = cutoff_radius(torus.dual(), 0.0, TAIL_TARGET, |k| {
            (-4.0 * PI * PI * k * k * t_star).exp() / v
        });
        let mut modes: Vec<(f64, f64)> = vectors_within(torus.dual(), k * k)
            .into_iter()
            .filter(|(_, q)| *q > 0.0)
            .map(|(w, q)| (q, (2.0 * PI * dot(&w, &y)).cos()))
            .collect();
        modes.reverse();
        Self {
            dim: d,
            volume: v,
            t_star,
            dists,
            modes,
            tail: direct_tail.max(dual_tail),
        }
    }

    pub(crate) fn t_star(&self) -> f64 {
        self.t_star
    }

    /// `H_t(x) = Σ_v Ψ_t(x − v)` for `t ≤ t*`.
    pub(crate) fn images(&self, t: f64) -> f64 {
        let pref = (4.0 * PI * t).powf(-0.5 * self.dim);
        let mut acc = NeumaierSum::new();
        for q in &self.dists {
            acc.add((-q / (4.0 * t)).exp());
        }
        pref * acc.value()
    }

    /// `Φ_t(x)` for `t ≥ t*`.
    pub(crate) fn modes(&self, t: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for (q, c) in &self.modes {
            acc.add((-4.0 * PI * PI * q * t).exp() * c);
        }
        acc.value() / self.volume
    }

    pub(crate) fn min_mode(&self) -> f64 {
        self.modes.last().map_or(1.0, |m| m.0)
    }

    pub(crate) fn mean(&self) -> f64 {
        1.0 / self.volume
    }

    pub(crate) fn nearest_sq(&self) -> f64 {
        self.dists.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// `G_{nΛ}(x)` from the Mellin transform of the heat kernel,
///
/// ```text
/// G = (1/Γ(α)) [∫₀^{t*} H_t t^{α−1} dt − t*^α/(Nα) + ∫_{t*}^∞ Φ_t t^{α−1} dt].
/// ```
pub fn green_mellin(
    base: &Lattice,
    n: u32,
    params: &RieszParams,
    x: &[f64],
    tol: f64,
) -> Result<GreenEvaluation> {
    let torus = Torus::new(base, n)?;
    if params.d() != torus.dim() || x.len() != torus.dim() {
        return Err(Error::DimensionMismatch {
            expected: torus.dim(),
            got: params.d().min(x.len()),
        });
    }
    let sampler = HeatSampler::new(&torus, x);
    let r2 = sampler.nearest_sq();
    let scale = torus.volume().powf(2.0 / torus.dim() as f64);
    if r2 <= 1e-20 * scale {
        return Err(Error::OnLattice(r2.sqrt()));
    }
    let alpha = params.alpha();
    let ga = gamma(alpha);
    let ts = sampler.t_star();
    let abs_tol = (tol * ga / 3.0).max(1e-300);

    // Below t_lo every image term is below e^{-60} relative to its peak.
    let t_lo = (r2 / 240.0).min(0.5 * ts);
    let small = quad::integrate(
        |u| {
            let t = u.exp();
            sampler.images(t) * (alpha * u).exp()
        },
        t_lo.ln(),
        ts.ln(),
        abs_tol,
        1e-15,
    )?;
    let t_hi = ts + 50.0 / (4.0 * PI * PI * sampler.min_mode());
    let large = quad::integrate(
        |t| sampler.modes(t) * t.powf(alpha - 1.0),
        ts,
        t_hi,
        abs_tol,
        1e-15,
    )?;
    let mean = sampler.mean() * ts.powf(alpha) / alpha;

    let mut acc = NeumaierSum::new();
    acc.add(small.value);
    acc.add(-mean);
    acc.add(large.value);
    let value = acc.value() / ga;
    Ok(GreenEvaluation {
        value,
        route: Route::Mellin,
        abs_error_estimate: (small.error + large.error) / ga
            + sampler.tail * t_hi.powf(alpha.max(1.0)),
        terms_used: small.evaluations + large.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::EwaldGreen;
    use crate::lattice::LatticeName;

    #[test]
    fn heat_routes_agree_at_switch() {
        for name in [LatticeName::Z(2), LatticeName::A2, LatticeName::Z(3)] {
            let lat = Lattice::named(name).unwrap();
            let torus = Torus::new(&lat, 2).unwrap();
            let hk = TorusHeatKernel::new(&torus);
            let x: Vec<f64> = (0..lat.dim()).map(|i| 0.3 + 0.17 * i as f64).collect();
            let t = hk.t_star();
            let a = hk.direct(&x, t).unwrap();
            let b = hk.dual(&x, t).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-12,
                "{name}: {} vs {}",
                a.value,
                b.value
            );
            assert!(a.tail_bound <= 1e-14 && b.tail_bound <= 1e-14);
        }
    }

    #[test]
    fn self_images_on_z1() {
        // Σ_{k≠0} π^{-1/2} e^{-k²}
        let z1 = Lattice::named(LatticeName::Z(1)).unwrap();
        let hk = TorusHeatKernel::new(&Torus::new(&z1, 1).unwrap());
        let exact: f64 = (1..20).map(|k| 2.0 * (-(k * k) as f64).exp()).sum::<f64>() / PI.sqrt();
        let v = hk.self_images(0.25).unwrap().value;
        assert!((v - exact).abs() < 1e-15, "{v} vs {exact}");
        let t = 3.0 * hk.t_star();
        let direct = hk.direct(&[0.0], t).unwrap().value + 1.0 - (4.0 * PI * t).powf(-0.5);
        assert!((hk.self_images(t).unwrap().value - direct).abs() < 1e-13);
    }

    #[test]
    fn theta3_value_on_z1() {
        let z1 = Lattice::named(LatticeName::Z(1)).unwrap();
        let v = torus_heat_kernel(&z1, 1, &[0.0], 1.0 / (4.0 * PI))
            .unwrap()
            .value;
        assert!((v - 0.086_434_8).abs() < 1e-7, "{v}");
    }

    #[test]
    fn heat_kernel_integrates_to_zero() {
        // Mean zero over the cell: quadrature over ℤ² torus of side 2.
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let torus = Torus::new(&z2, 2).unwrap();
        let hk = TorusHeatKernel::new(&torus);
        let m = 24;
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = [
                    2.0 * (i as f64 + 0.5) / m as f64,
                    2.0 * (j as f64 + 0.5) / m as f64,
                ];
                total += hk.eval(&x, 0.2).unwrap().value;
            }
        }
        assert!((total * 4.0 / (m * m) as f64).abs() < 1e-10);
    }

    #[test]
    fn mellin_matches_ewald() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let torus = Torus::new(&a2, 2).unwrap();
        for s in [0.0, 0.5, 1.0, 1.5] {
            let p = RieszParams::new(2, s).unwrap();
            let ew = EwaldGreen::new(&torus, &p).unwrap();
            for x in [[0.3, 0.2], [1.0, 0.9], [0.001, 0.002]] {
                let m = green_mellin(&a2, 2, &p, &x, 1e-12).unwrap();
                let e = ew.eval(&x).unwrap();
                let tol = 1e-10 * e.value.abs().max(1.0);
                assert!(
                    (m.value - e.value).abs() < tol,
                    "s={s} x={x:?}: {} vs {}",
                    m.value,
                    e.value
                );
            }
        }
    }

    #[test]
    fn mellin_rejects_lattice_points() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let p = RieszParams::new(2, 1.0).unwrap();
        assert!(matches!(
            green_mellin(&z2, 2, &p, &[2.0, 0.0], 1e-10),
            Err(Error::OnLattice(_))
        ));
    }
}
