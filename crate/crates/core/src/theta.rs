//! Theta series: exact power-series coefficients for ℤᵈ, E₈ and Leech,
//! enumeration for everything else, and Gaussian lattice sums with certified
//! tails.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{enumerate_shells, Lattice, ModularFamily, Shell, ShellSeries};
use crate::sum::NeumaierSum;

/// Default truncation order for modular theta series.
pub const DEFAULT_MAX_INDEX: usize = 256;

/// A power series in q with exact integer coefficients, truncated after
/// `len()` terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSeries {
    coeffs: Vec<i128>,
}

impl PowerSeries {
    pub fn from_coeffs(coeffs: Vec<i128>) -> Self {
        Self { coeffs }
    }

    pub fn one(len: usize) -> Self {
        let mut coeffs = vec![0; len];
        if len > 0 {
            coeffs[0] = 1;
        }
        Self { coeffs }
    }

    /// Number of known coefficients (the truncation order).
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> i128 {
        self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        Self {
            coeffs: (0..len)
                .map(|k| {
                    self.coeffs[k]
                        .checked_add(other.coeffs[k])
                        .expect("theta coefficient overflow")
                })
                .collect(),
        }
    }

    pub fn scale(&self, factor: i128) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.checked_mul(factor).expect("theta coefficient overflow"))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        let mut out = vec![0i128; len];
        for (i, &a) in self.coeffs.iter().take(len).enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().take(len - i).enumerate() {
                let prod = a.checked_mul(b).expect("theta coefficient overflow");
                out[i + j] = out[i + j]
                    .checked_add(prod)
                    .expect("theta coefficient overflow");
            }
        }
        Self { coeffs: out }
    }

    pub fn pow(&self, mut exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.len());
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Multiplies by qᵏ, keeping the truncation order.
    pub fn shift(&self, k: usize) -> Self {
        let len = self.len();
        let mut coeffs = vec![0; len];
        if k < len {
            coeffs[k..].copy_from_slice(&self.coeffs[..len - k]);
        }
        Self { coeffs }
    }
}

/// σ₃(n), the sum of cubes of the divisors of n.
pub fn sigma3(n: u64) -> u64 {
    (1..=n)
        .filter(|k| n.is_multiple_of(*k))
        .map(|k| k * k * k)
        .sum()
}

/// θ₃(q) = Σ_k q^{k²}.
pub fn jacobi_theta3(len: usize) -> PowerSeries {
    let mut c = vec![0i128; len];
    let mut k = 0usize;
    while k * k < len {
        c[k * k] += if k == 0 { 1 } else { 2 };
        k += 1;
    }
    PowerSeries::from_coeffs(c)
}

/// Eisenstein series E₄ = 1 + 240 Σ σ₃(n) qⁿ.
pub fn eisenstein_e4(len: usize) -> PowerSeries {
    let c = (0..len)
        .map(|n| {
            if n == 0 {
                1
            } else {
                240 * sigma3(n as u64) as i128
            }
        })
        .collect();
    PowerSeries::from_coeffs(c)
}

/// Δ = q ∏_{n≥1} (1 − qⁿ)²⁴.
pub fn discriminant(len: usize) -> PowerSeries {
    let mut euler = PowerSeries::one(len);
    for n in 1..len {
        let mut factor = vec![0i128; len];
        factor[0] = 1;
        factor[n] = -1;
        euler = euler.mul(&PowerSeries::from_coeffs(factor));
    }
    euler.pow(24).shift(1)
}

/// Theta series of the Leech lattice, E₄³ − 720Δ.
pub fn leech_theta(len: usize) -> PowerSeries {
    eisenstein_e4(len)
        .pow(3)
        .add(&discriminant(len).scale(-720))
}

/// Shell counts from the closed-form theta series, up to exponent
/// `max_index`. Norms are `exponent` for ℤᵈ and `2·exponent` for E₈, Leech.
pub fn theta_modular(family: ModularFamily, max_index: usize) -> ShellSeries {
    let len = max_index + 1;
    let (series, step, dim) = match family {
        ModularFamily::Z(d) => (jacobi_theta3(len).pow(d as u32), 1.0, d),
        ModularFamily::E8 => (eisenstein_e4(len), 2.0, 8),
        ModularFamily::Leech => (leech_theta(len), 2.0, 24),
    };
    let entries = series
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(k, &c)| Shell {
            norm: k as f64 * step,
            count: c as u128,
        })
        .collect();
    ShellSeries {
        dim,
        entries,
        max_norm: max_index as f64 * step,
    }
}

/// Shells by Fincke–Pohst enumeration; same return type as
/// [`theta_modular`].
pub fn theta_enumerated(lat: &Lattice, max_norm: f64, budget: f64) -> Result<ShellSeries> {
    enumerate_shells(lat, max_norm, budget)
}

/// Shells of `lat` up to `max_norm`, from the closed-form theta series when
/// the lattice carries one and by enumeration otherwise.
pub fn shells(lat: &Lattice, max_norm: f64, budget: f64) -> Result<ShellSeries> {
    match lat.modular() {
        Some((family, scale)) => {
            let step = match family {
                ModularFamily::Z(_) => 1.0,
                _ => 2.0,
            };
            let max_index = ((max_norm / (step * scale)) * (1.0 + 1e-12)).floor() as usize;
            let mut s = theta_modular(family, max_index);
            for e in &mut s.entries {
                e.norm *= scale;
            }
            s.max_norm = max_norm;
            Ok(s)
        }
        None => enumerate_shells(lat, max_norm, budget),
    }
}

/// Polynomial bound on the cumulative vector count, `N(m) <= C (1+m)^{d/2}`,
/// fitted to the known shells with a safety factor of 10.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthBound {
    pub coefficient: f64,
    pub exponent: f64,
}

impl GrowthBound {
    pub fn fit(shells: &ShellSeries) -> Self {
        let exponent = 0.5 * shells.dim as f64;
        let mut cumulative = 0u128;
        let mut c: f64 = 0.0;
        for s in &shells.entries {
            cumulative += s.count;
            c = c.max(cumulative as f64 / (1.0 + s.norm).powf(exponent));
        }
        c = c.max(cumulative as f64 / (1.0 + shells.max_norm).powf(exponent));
        GrowthBound {
            coefficient: 10.0 * c,
            exponent,
        }
    }

    pub fn count_bound(&self, norm: f64) -> f64 {
        self.coefficient * (1.0 + norm).powf(self.exponent)
    }

    /// Upper bound on `Σ_{|v|² > from} f(|v|²)` for nonincreasing `f ≥ 0`.
    pub fn tail<F: Fn(f64) -> f64>(&self, from: f64, f: F) -> f64 {
        let mut total = 0.0;
        let mut k = 0.0;
        loop {
            let term = self.count_bound(from + k + 1.0) * f(from + k);
            total += term;
            if term <= 1e-18 * total.max(1e-300) || k > 1e6 || term == 0.0 {
                return total;
            }
            k += 1.0;
        }
    }
}

/// A lattice sum with a certified bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedSum {
    pub value: f64,
    pub tail: f64,
}

/// `Σ_{v∈Λ} exp(-β|v|²)` over the given shells plus a tail bound from the
/// fitted growth of shell counts.
pub fn gaussian_lattice_sum(
    shells: &ShellSeries,
    beta: f64,
    tail_bound: f64,
) -> Result<CertifiedSum> {
    if !(beta > 0.0) {
        return Err(Error::OutOfRange(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let mut acc = NeumaierSum::new();
    for s in shells.entries.iter().rev() {
        acc.add(s.count as f64 * (-beta * s.norm).exp());
    }
    let growth = GrowthBound::fit(shells);
    let gauss = |q: f64| (-beta * q).exp();
    let tail = growth.tail(shells.max_norm, gauss);
    if tail > tail_bound {
        let mut m = shells.max_norm.max(1.0);
        while growth.tail(m, gauss) > tail_bound {
            m *= 1.25;
        }
        return Err(Error::InsufficientShells {
            required_max_norm: m,
        });
    }
    Ok(CertifiedSum {
        value: acc.value(),
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeName, DEFAULT_BUDGET};

    fn pairs(s: &ShellSeries) -> Vec<(f64, u128)> {
        s.entries.iter().map(|e| (e.norm, e.count)).collect()
    }

    #[test]
    fn series_arithmetic_truncates_to_shorter_operand() {
        let a = PowerSeries::from_coeffs(vec![1, 1, 0, 0]);
        let b = PowerSeries::from_coeffs(vec![1, -1, 0]);
        let p = a.mul(&b);
        assert_eq!(p.coeffs(), &[1, 0, -1]);
        assert_eq!(a.pow(3).coeffs(), &[1, 3, 3, 1]);
    }

    #[test]
    fn discriminant_is_ramanujan_tau() {
        let d = discriminant(8);
        assert_eq!(d.coeffs(), &[0, 1, -24, 252, -1472, 4830, -6048, -16744]);
    }

    #[test]
    fn modular_small_cases() {
        assert_eq!(
            pairs(&theta_modular(ModularFamily::Z(1), 4)),
            vec![(0.0, 1), (1.0, 2), (4.0, 2)]
        );
        let e8 = theta_modular(ModularFamily::E8, 1);
        assert_eq!(pairs(&e8), vec![(0.0, 1), (2.0, 240)]);
        let leech = leech_theta(3);
        assert_eq!(leech.coeff(1), 0);
        assert_eq!(leech.coeff(2), 196_560);
        let s = theta_modular(ModularFamily::Leech, 2);
        assert_eq!(pairs(&s), vec![(0.0, 1), (4.0, 196_560)]);
    }

    #[test]
    fn e8_counts_follow_sigma3() {
        let s = theta_modular(ModularFamily::E8, 20);
        for n in 1..=20u64 {
            let shell = s.entries.iter().find(|e| e.norm == 2.0 * n as f64).unwrap();
            assert_eq!(shell.count, 240 * sigma3(n) as u128);
        }
    }

    #[test]
    fn enumerated_small_cases() {
        let d4 = Lattice::named(LatticeName::D4).unwrap();
        let s = theta_enumerated(&d4, 2.0, DEFAULT_BUDGET).unwrap();
        let counts: Vec<u128> = s.entries.iter().map(|e| e.count).collect();
        assert_eq!(counts, vec![1, 24]);
        assert!((s.entries[1].norm - 2f64.sqrt()).abs() < 1e-12);

        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let s = theta_enumerated(&a2, 5.0, DEFAULT_BUDGET).unwrap();
        let counts: Vec<u128> = s.entries.iter().take(4).map(|e| e.count).collect();
        assert_eq!(counts, vec![1, 6, 6, 6]);
    }

    #[test]
    fn modular_route_matches_enumeration_small_z() {
        for d in 1..=4 {
            let lat = Lattice::named(LatticeName::Z(d)).unwrap();
            let m = theta_modular(ModularFamily::Z(d), 50);
            let e = enumerate_shells(&lat, 50.0, DEFAULT_BUDGET).unwrap();
            assert_eq!(pairs(&m), pairs(&e), "d = {d}");
        }
    }

    #[test]
    fn gaussian_sums() {
        let only_origin = ShellSeries {
            dim: 2,
            entries: vec![Shell {
                norm: 0.0,
                count: 1,
            }],
            max_norm: 100.0,
        };
        let s = gaussian_lattice_sum(&only_origin, 1.0, 1e-12).unwrap();
        assert_eq!(s.value, 1.0);

        let z1 = theta_modular(ModularFamily::Z(1), 100);
        let s = gaussian_lattice_sum(&z1, 1.0, 1e-13).unwrap();
        let direct: f64 = (-10i32..=10).map(|k| (-(k * k) as f64).exp()).sum();
        assert!((s.value - direct).abs() < 1e-14);
        assert!((s.value - 1.772_637_204_8).abs() < 1e-10);

        let z2 = theta_modular(ModularFamily::Z(2), 100);
        let s = gaussian_lattice_sum(&z2, std::f64::consts::PI, 1e-13).unwrap();
        let t3: f64 = (-10i32..=10)
            .map(|k| (-std::f64::consts::PI * (k * k) as f64).exp())
            .sum();
        assert!((s.value - t3 * t3).abs() < 1e-14);
        assert!((s.value - 1.180_34).abs() < 1e-5);
    }

    #[test]
    fn insufficient_shells_reports_required_norm() {
        let z2 = theta_modular(ModularFamily::Z(2), 2);
        match gaussian_lattice_sum(&z2, 0.5, 1e-12) {
            Err(Error::InsufficientShells { required_max_norm }) => {
                assert!(required_max_norm > 2.0)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
