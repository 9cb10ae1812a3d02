//! The periodic Green function `G_{nΛ}` of `(-Δ)^α` on the torus ℝᵈ/(nΛ),
//! evaluated by three independent routes, plus the Ewald function of the
//! Epstein zeta continuation and Madelung constants.
//!
//! Conventions: `Λ` has covolume 1, the torus has volume `N = nᵈ`, and
//!
//! ```text
//! G(x) = (1/N) Σ_{k ∈ (nΛ)* \ 0} e^{2πi k·x} / (2π|k|)^{2α}
//!      = (1/Γ(α)) ∫₀^∞ (Σ_{v ∈ nΛ} Ψ_t(x − v) − 1/N) t^{α−1} dt,
//! ```
//!
//! so that `G(x) = g(x)/c_{d,s} + M + o(1)` as `x → 0`.

mod ewald;
mod fourier;
mod mellin;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ball_volume, squared_distances_near, Lattice};

pub use ewald::{
    epstein_zeta, epstein_zeta_direct, epstein_zeta_ewald, epstein_zeta_punctured,
    epstein_zeta_punctured_direct, ewald_constants, ewald_f, green_ewald, madelung, madelung_with,
    EwaldGreen, Madelung, DEFAULT_SPLIT,
};
pub use fourier::{green_fourier, FourierOptions};
pub use mellin::{green_mellin, torus_heat_kernel, HeatKernelValue, TorusHeatKernel};

/// How a Green-function value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Fourier,
    Mellin,
    Ewald,
    Direct,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::Fourier => "fourier",
            Route::Mellin => "mellin",
            Route::Ewald => "ewald",
            Route::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenEvaluation {
    pub value: f64,
    pub route: Route,
    pub abs_error_estimate: f64,
    pub terms_used: usize,
}

/// The flat torus ℝᵈ/(nΛ) for a covolume-1 lattice Λ.
#[derive(Debug, Clone)]
pub struct Torus {
    base: Lattice,
    n: u32,
    lattice: Lattice,
    dual: Lattice,
}

impl Torus {
    pub fn new(base: &Lattice, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("torus multiplier n must be >= 1".into()));
        }
        let lattice = base.scaled(n as f64);
        let dual = lattice.dual();
        Ok(Self {
            base: base.clone(),
            n,
            lattice,
            dual,
        })
    }

    pub fn base(&self) -> &Lattice {
        &self.base
    }
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn dim(&self) -> usize {
        self.base.dim()
    }
    /// The period lattice nΛ.
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    /// The Fourier lattice (nΛ)*.
    pub fn dual(&self) -> &Lattice {
        &self.dual
    }
    /// Volume of the torus, `N = nᵈ · covolume(Λ)`.
    pub fn volume(&self) -> f64 {
        self.lattice.covolume()
    }
    /// Number of points of a density-1 configuration, `nᵈ`.
    pub fn points(&self) -> usize {
        (self.n as usize).pow(self.dim() as u32)
    }

    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        self.base.reduce_to_cell(x, self.n)
    }

    /// Distance from `x` to the nearest point of nΛ.
    pub fn distance_to_lattice(&self, x: &[f64]) -> f64 {
        let y = self.reduce(x);
        let r = self.lattice.cell_radius();
        squared_distances_near(&self.lattice, &y, r * r)
            .first()
            .copied()
            .unwrap_or(r * r)
            .sqrt()
    }
}

/// Bound on `Σ f(|y − v|)` over lattice points `v` with `|y − v| > r0`, for a
/// nonincreasing `f ≥ 0`, valid for every center `y`.
///
/// A ball of radius `R` holds at most `V_d(R + ρ)/covolume` lattice points,
/// `ρ` being the cell circumradius.
pub(crate) fn ball_tail<F: Fn(f64) -> f64>(lat: &Lattice, r0: f64, f: F) -> f64 {
    let d = lat.dim();
    let rho = lat.cell_radius();
    let h = 0.25 * lat.covolume().powf(1.0 / d as f64);
    let mut total = 0.0;
    let mut k = 0.0;
    loop {
        let inner = r0 + k * h;
        let count = ball_volume(d, inner + h + rho) / lat.covolume();
        let term = count * f(inner);
        total += term;
        if term == 0.0 || term <= 1e-17 * total || k > 1e6 {
            return total;
        }
        k += 1.0;
    }
}

/// Smallest radius (on a grid of step `h`) with `ball_tail <= target`.
pub(crate) fn cutoff_radius<F: Fn(f64) -> f64>(
    lat: &Lattice,
    start: f64,
    target: f64,
    f: F,
) -> (f64, f64) {
    let h = 0.25 * lat.covolume().powf(1.0 / lat.dim() as f64);
    let mut r = start.max(h);
    loop {
        let tail = ball_tail(lat, r, &f);
        if tail <= target || r > 1e6 {
            return (r, tail);
        }
        r += h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeName;

    #[test]
    fn torus_basics() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let t = Torus::new(&a2, 2).unwrap();
        assert!((t.volume() - 4.0).abs() < 1e-12);
        assert_eq!(t.points(), 4);
        assert!((t.dual().covolume() - 0.25).abs() < 1e-12);
        let v = t.lattice().lattice_point(&[1, -1]);
        assert!(t.distance_to_lattice(&v) < 1e-12);
        assert!(Torus::new(&a2, 0).is_err());
    }

    #[test]
    fn ball_tail_dominates_actual_tail() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let f = |r: f64| (-r * r).exp();
        let bound = ball_tail(&z2, 3.0, f);
        let all = squared_distances_near(&z2, &[0.3, 0.1], 100.0);
        let actual: f64 = all.iter().filter(|&&q| q > 9.0).map(|&q| (-q).exp()).sum();
        assert!(bound >= actual && bound < 1e-1, "{bound} vs {actual}");
    }
}
