//! Fourier-series route to `G` with Gaussian damping and Richardson
//! extrapolation in the damping width.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::ewald::dot;
use super::{GreenEvaluation, Route, Torus};
use crate::error::{Error, Result};
use crate::kernels::RieszParams;
use crate::lattice::{for_each_row_near, top_coefficient_range, Lattice};
use crate::sum::NeumaierSum;

/// Controls for [`green_fourier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierOptions {
    /// Number of damping widths `ε₀, ε₀/2, …` fed to the extrapolation.
    pub levels: usize,
    /// Modes with `ε_min |k|² > tail_exponent` are dropped.
    pub tail_exponent: f64,
    /// Widest damping `ε₀ = π²r²/separation`, `r` the distance to nΛ; the
    /// smoothing leaks `e^{-separation}` of the singularity.
    pub separation: f64,
    /// Extrapolations whose error estimate exceeds this are rejected.
    pub tol: f64,
}

impl FourierOptions {
    /// Six damping levels in `d <= 2`, five above, where each extra level
    /// costs a factor `2^{d/2}` in modes.
    pub fn for_dim(d: usize) -> Self {
        Self {
            levels: if d <= 2 { 6 } else { 5 },
            tail_exponent: 36.0,
            separation: 30.0,
            tol: 1e-7,
        }
    }
}

/// `G_{nΛ}(x)` from
/// `G_ε(x) = (1/N) Σ_{k≠0} e^{-ε|k|²} e^{2πik·x}/(2π|k|)^{2α}`, extrapolated
/// to `ε = 0`.
///
/// The widest damping is tied to the distance `r` from `x` to nΛ so that the
/// smoothing radius stays well inside the regular region.
pub fn green_fourier(
    base: &Lattice,
    n: u32,
    params: &RieszParams,
    x: &[f64],
    opts: &FourierOptions,
) -> Result<GreenEvaluation> {
    let torus = Torus::new(base, n)?;
    let d = torus.dim();
    if params.d() != d || x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: params.d().min(x.len()),
        });
    }
    if opts.levels < 2 {
        return Err(Error::OutOfRange(
            "at least two damping levels are required".into(),
        ));
    }
    let r = torus.distance_to_lattice(x);
    let scale = torus.volume().powf(1.0 / d as f64);
    if r <= 1e-10 * scale {
        return Err(Error::OnLattice(r));
    }
    let m = opts.levels;
    let eps0 = (PI * PI * r * r / opts.separation).min(scale * scale);
    let eps_min = eps0 / (1u64 << (m - 1)) as f64;
    let k2max = opts.tail_exponent / eps_min;
    let y = torus.reduce(x);
    let dual = torus.dual();
    let alpha = params.alpha();
    let volume = torus.volume();

    let origin = vec![0.0; d];
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|i| dual.basis().row(i).iter().copied().collect())
        .collect();
    let power = Power::new(alpha);
    let row_sums = |top: Option<i64>| -> (Vec<f64>, usize) {
        let mut sums = vec![NeumaierSum::new(); m];
        let mut count = 0usize;
        let b0 = &basis[0];
        let b0b0 = dot(b0, b0);
        let step = 2.0 * PI * dot(b0, &y);
        let (sd, cd) = step.sin_cos();
        let mut base = vec![0.0; d];
        for_each_row_near(dual, &origin, k2max, top, |c, lo, hi| {
            // Each ±k pair once: keep rows whose last nonzero coefficient is
            // positive, and c[0] > 0 on the axis row.
            let sign = c[1..]
                .iter()
                .rev()
                .find(|&&v| v != 0)
                .map_or(0, |v| v.signum());
            if sign < 0 {
                return;
            }
            let lo = if sign == 0 { lo.max(1) } else { lo };
            if lo > hi {
                return;
            }
            base.iter_mut().for_each(|v| *v = 0.0);
            for (i, &ci) in c.iter().enumerate().skip(1) {
                for (bj, v) in base.iter_mut().zip(&basis[i]) {
                    *bj += ci as f64 * v;
                }
            }
            let qb = dot(&base, &base);
            let cross = 2.0 * dot(&base, b0);
            let phase0 = 2.0 * PI * dot(&base, &y) + lo as f64 * step;
            let (mut sn, mut cs) = phase0.sin_cos();
            for c0 in lo..=hi {
                let t = c0 as f64;
                let q = qb + t * (cross + t * b0b0);
                if q > 0.0 && q <= k2max {
                    let coef = 2.0 * cs * power.eval(4.0 * PI * PI * q);
                    let mut damp = (-eps_min * q).exp();
                    for acc in sums.iter_mut().rev() {
                        acc.add(coef * damp);
                        damp *= damp;
                    }
                    count += 1;
                }
                let next = sn * cd + cs * sd;
                cs = cs * cd - sn * sd;
                sn = next;
            }
        });
        (sums.iter().map(NeumaierSum::value).collect(), count)
    };
    let partials: Vec<(Vec<f64>, usize)> = if d == 1 {
        vec![row_sums(None)]
    } else {
        let (lo, hi) = top_coefficient_range(dual, &origin, k2max);
        (lo.max(0)..=hi)
            .into_par_iter()
            .map(|top| row_sums(Some(top)))
            .collect()
    };
    let mut levels = vec![NeumaierSum::new(); m];
    let mut terms = 0usize;
    for (sums, count) in &partials {
        for (acc, v) in levels.iter_mut().zip(sums) {
            acc.add(*v);
        }
        terms += count;
    }
    let samples: Vec<f64> = levels.iter().map(|s| s.value() / volume).collect();
    let (value, err) = richardson(&samples);
    if !(err <= opts.tol.max(1e-15 * value.abs())) {
        return Err(Error::Nonconvergence(format!(
            "Fourier extrapolation did not stabilize: estimate {value}, error {err}"
        )));
    }
    Ok(GreenEvaluation {
        value,
        route: Route::Fourier,
        abs_error_estimate: err,
        terms_used: terms,
    })
}

/// `y ↦ y^{-α}` with fast paths for half-integer orders.
#[derive(Clone, Copy)]
enum Power {
    Half(i32),
    General(f64),
}

impl Power {
    fn new(alpha: f64) -> Self {
        let twice = 2.0 * alpha;
        if (twice - twice.round()).abs() < 1e-14 && twice.round() <= 16.0 {
            Power::Half(twice.round() as i32)
        } else {
            Power::General(alpha)
        }
    }

    #[inline]
    fn eval(self, y: f64) -> f64 {
        match self {
            Power::Half(h) if h % 2 == 0 => y.powi(-h / 2),
            Power::Half(h) => y.powi(-(h / 2)) / y.sqrt(),
            Power::General(a) => y.powf(-a),
        }
    }
}

/// Neville extrapolation to zero of samples at `ε₀ 2^{-j}`, assuming an
/// expansion in integer powers of `ε`. Returns the estimate and the size of
/// the last correction.
fn richardson(samples: &[f64]) -> (f64, f64) {
    let m = samples.len();
    let mut table = samples.to_vec();
    let mut prev_best = table[m - 1];
    let mut err = f64::INFINITY;
    for k in 1..m {
        let factor = (1u64 << k) as f64 - 1.0;
        for j in (k..m).rev() {
            table[j] += (table[j] - table[j - 1]) / factor;
        }
        err = (table[m - 1] - prev_best).abs();
        prev_best = table[m - 1];
    }
    (table[m - 1], err)
}
