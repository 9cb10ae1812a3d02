//! Periodic Riesz energy of torus configurations, Gaussian p-energies, the
//! analytic gradient, local minimization and the Cohn–Kumar probe.
//!
//! ```text
//! 𝒲_{nΛ}(a₁,…,a_N) = c² ((1/N) Σ_{i≠j} G_{nΛ}(a_i − a_j) + M_{nΛ})
//! ```

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::green::{madelung, EwaldGreen, Madelung, Route, Torus, TorusHeatKernel};
use crate::kernels::RieszParams;
use crate::lattice::{ball_volume, squared_distances_near, Lattice};
use crate::sum::NeumaierSum;

/// Pairs closer than this fraction of the cell scale count as coincident.
pub const COINCIDENCE_GUARD: f64 = 1e-7;

/// `N` labeled points on the torus ℝᵈ/(nΛ), stored reduced to the cell.
#[derive(Debug, Clone, Serialize)]
pub struct TorusConfiguration {
    #[serde(skip)]
    torus: Torus,
    points: Vec<Vec<f64>>,
}

impl TorusConfiguration {
    pub fn new(base: &Lattice, n: u32, points: Vec<Vec<f64>>) -> Result<Self> {
        let torus = Torus::new(base, n)?;
        Self::on(&torus, points)
    }

    pub fn on(torus: &Torus, points: Vec<Vec<f64>>) -> Result<Self> {
        let d = torus.dim();
        if points.is_empty() {
            return Err(Error::OutOfRange(
                "a configuration needs at least one point".into(),
            ));
        }
        let mut reduced = Vec::with_capacity(points.len());
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::OutOfRange("point coordinates must be finite".into()));
            }
            reduced.push(torus.reduce(p));
        }
        Ok(Self {
            torus: torus.clone(),
            points: reduced,
        })
    }

    /// `count` points uniform on the torus: basis coefficients uniform in
    /// `[0, n)ᵈ`.
    pub fn random<R: Rng>(torus: &Torus, count: usize, rng: &mut R) -> Result<Self> {
        let d = torus.dim();
        let n = torus.n() as f64;
        let base = torus.base();
        let points = (0..count)
            .map(|_| {
                let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * n).collect();
                base.point(&c)
            })
            .collect();
        Self::on(torus, points)
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.torus.dim()
    }

    /// Whether `N = nᵈ`, the density-1 case.
    pub fn is_density_one(&self) -> bool {
        self.len() == self.torus.points()
    }

    /// The configuration translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        let pts = self
            .points
            .iter()
            .map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect())
            .collect();
        Self::on(&self.torus, pts)
    }

    /// Each point moved by the corresponding displacement.
    pub fn displaced(&self, moves: &[Vec<f64>]) -> Result<Self> {
        if moves.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: moves.len(),
            });
        }
        let pts = self
            .points
            .iter()
            .zip(moves)
            .map(|(p, m)| p.iter().zip(m).map(|(a, b)| a + b).collect())
            .collect();
        Self::on(&self.torus, pts)
    }

    /// Smallest torus distance between two distinct labels, with the pair.
    pub fn min_pair_distance(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let r = self
                    .torus
                    .distance_to_lattice(&diff(&self.points[i], &self.points[j]));
                if best.is_none_or(|b| r < b.2) {
                    best = Some((i, j, r));
                }
            }
        }
        best
    }

    fn check_separated(&self) -> Result<()> {
        let scale = self.torus.base().covolume().powf(1.0 / self.dim() as f64);
        match self.min_pair_distance() {
            Some((i, j, r)) if r < COINCIDENCE_GUARD * scale => {
                Err(Error::CoincidentPoints { i, j, distance: r })
            }
            _ => Ok(()),
        }
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The `nᵈ` points of Λ₀ in ℝᵈ/(nΛ₀): basis coefficients in `{0,…,n−1}ᵈ`.
pub fn lattice_config(base: &Lattice, n: u32) -> Result<TorusConfiguration> {
    let torus = Torus::new(base, n)?;
    let d = base.dim();
    let count = torus.points();
    let mut points = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rest = idx;
        let c: Vec<f64> = (0..d)
            .map(|_| {
                let k = rest % n as usize;
                rest /= n as usize;
                k as f64
            })
            .collect();
        points.push(base.point(&c));
    }
    TorusConfiguration::on(&torus, points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<Vec<f64>>>,
    /// Bound on the error of each Green-function evaluation.
    pub per_pair_error: f64,
    /// Error bound on `value`.
    pub abs_error_estimate: f64,
    pub route: Route,
    pub madelung: Madelung,
}

/// Ewald evaluator and Madelung constant for one torus and interaction.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    green: EwaldGreen,
    madelung: Madelung,
    params: RieszParams,
}

impl EnergyModel {
    pub fn new(torus: &Torus, params: &RieszParams) -> Result<Self> {
        let green = EwaldGreen::new(torus, params)?;
        let madelung = madelung(torus.base(), torus.n(), params)?;
        Ok(Self {
            green,
            madelung,
            params: *params,
        })
    }

    pub fn torus(&self) -> &Torus {
        self.green.torus()
    }
    pub fn params(&self) -> &RieszParams {
        &self.params
    }
    pub fn madelung(&self) -> &Madelung {
        &self.madelung
    }

    fn check(&self, config: &TorusConfiguration) -> Result<()> {
        let t = self.torus();
        let c = config.torus();
        if t.n() != c.n() || t.dim() != c.dim() || t.base().basis() != c.base().basis() {
            return Err(Error::OutOfRange(
                "configuration lives on a different torus".into(),
            ));
        }
        config.check_separated()
    }

    pub fn energy(&self, config: &TorusConfiguration) -> Result<EnergyReport> {
        self.evaluate(config, false)
    }

    pub fn energy_and_gradient(&self, config: &TorusConfiguration) -> Result<EnergyReport> {
        self.evaluate(config, true)
    }

    fn evaluate(&self, config: &TorusConfiguration, with_gradient: bool) -> Result<EnergyReport> {
        self.check(config)?;
        let pts = config.points();
        let n = pts.len();
        let d = config.dim();
        // Row i holds Σ_{j>i} G(a_i − a_j) and ∇G(a_i − a_j) for every j > i.
        type Row = (f64, f64, Vec<(usize, Vec<f64>)>);
        let rows: Vec<Result<Row>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = NeumaierSum::new();
                let mut err: f64 = 0.0;
                let mut grads = Vec::new();
                for j in i + 1..n {
                    let x = diff(&pts[i], &pts[j]);
                    let g = self.green.eval(&x)?;
                    acc.add(g.value);
                    err = err.max(g.abs_error_estimate);
                    if with_gradient {
                        grads.push((j, self.green.grad(&x)?));
                    }
                }
                Ok((acc.value(), err, grads))
            })
            .collect();
        let mut total = NeumaierSum::new();
        let mut per_pair: f64 = 0.0;
        let mut gradient = vec![vec![NeumaierSum::new(); d]; if with_gradient { n } else { 0 }];
        for (i, row) in rows.into_iter().enumerate() {
            let (sum, err, grads) = row?;
            total.add(sum);
            per_pair = per_pair.max(err);
            for (j, g) in grads {
                for k in 0..d {
                    gradient[i][k].add(g[k]);
                    gradient[j][k].add(-g[k]);
                }
            }
        }
        let c2 = self.params.c() * self.params.c();
        let nf = n as f64;
        let value = c2 * (2.0 * total.value() / nf + self.madelung.value);
        let pairs = nf * (nf - 1.0);
        let abs_error_estimate = c2 * (pairs / nf * per_pair + self.madelung.abs_error_estimate);
        let gradient = with_gradient.then(|| {
            gradient
                .iter()
                .map(|g| g.iter().map(|s| 2.0 * c2 / nf * s.value()).collect())
                .collect()
        });
        Ok(EnergyReport {
            value,
            gradient,
            per_pair_error: per_pair,
            abs_error_estimate,
            route: Route::Ewald,
            madelung: self.madelung,
        })
    }
}

/// `𝒲_{nΛ}` of a configuration.
pub fn periodic_energy(config: &TorusConfiguration, params: &RieszParams) -> Result<EnergyReport> {
    EnergyModel::new(config.torus(), params)?.energy(config)
}

/// `∂𝒲/∂a_i` for every point.
pub fn energy_gradient(config: &TorusConfiguration, params: &RieszParams) -> Result<Vec<Vec<f64>>> {
    let report = EnergyModel::new(config.torus(), params)?.energy_and_gradient(config)?;
    Ok(report.gradient.unwrap_or_default())
}

/// A p-energy value with its certified truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianEnergy {
    pub value: f64,
    pub tail_bound: f64,
}

/// Gaussian p-energy with `p = Ψ_t`:
///
/// ```text
/// (1/N) Σ_{j,k} Σ_{v ∈ nΛ, v ≠ a_k − a_j} Ψ_t(v + a_j − a_k)
///   = (1/N) Σ_{j≠k} H_t(a_j − a_k) + Σ_{v ∈ nΛ\0} Ψ_t(v),
/// ```
///
/// where `H_t = Φ_t + 1/N` is the full image sum.
pub fn gaussian_p_energy(config: &TorusConfiguration, t: f64) -> Result<GaussianEnergy> {
    gaussian_p_energy_with(&TorusHeatKernel::new(config.torus()), config, t)
}

pub(crate) fn gaussian_p_energy_with(
    hk: &TorusHeatKernel,
    config: &TorusConfiguration,
    t: f64,
) -> Result<GaussianEnergy> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    config.check_separated()?;
    let pts = config.points();
    let n = pts.len();
    let mean = 1.0 / config.torus().volume();
    let mut acc = NeumaierSum::new();
    let mut tail: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let h = hk.eval(&diff(&pts[i], &pts[j]), t)?;
            acc.add(2.0 * (h.value + mean));
            tail += 2.0 * h.tail_bound;
        }
    }
    let own = hk.self_images(t)?;
    let value = acc.value() / n as f64 + own.value;
    Ok(GaussianEnergy {
        value,
        tail_bound: tail / n as f64 + own.tail_bound,
    })
}

/// Controls for [`local_minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Stop when the largest gradient component is at most this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Seed of the random initial configurations used by [`multi_start`].
    pub seed: u64,
    /// First trial step of the line search.
    pub initial_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 2000,
            seed: 0,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Minimization {
    pub config: TorusConfiguration,
    pub report: EnergyReport,
    /// Energy after each accepted step, starting with the initial energy.
    pub trace: Vec<f64>,
    pub status: MinimizeStatus,
}

fn max_abs(g: &[Vec<f64>]) -> f64 {
    g.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Gradient descent on the torus with halving backtracking and the Armijo
/// condition `𝒲(a − ηg) ≤ 𝒲(a) − 10⁻⁴ η |g|²`.
pub fn local_minimize(
    init: &TorusConfiguration,
    params: &RieszParams,
    opts: &MinimizeOptions,
) -> Result<Minimization> {
    let model = EnergyModel::new(init.torus(), params)?;
    minimize_with(&model, init, opts)
}

pub(crate) fn minimize_with(
    model: &EnergyModel,
    init: &TorusConfiguration,
    opts: &MinimizeOptions,
) -> Result<Minimization> {
    const ARMIJO: f64 = 1e-4;
    let mut config = init.clone();
    let mut report = model.energy_and_gradient(&config)?;
    let mut trace = vec![report.value];
    let mut step = opts.initial_step;
    for _ in 0..opts.max_iters {
        let grad = report.gradient.clone().unwrap_or_default();
        if max_abs(&grad) <= opts.grad_tol {
            return Ok(Minimization {
                config,
                report,
                trace,
                status: MinimizeStatus::Converged,
            });
        }
        let g2: f64 = grad.iter().flatten().map(|v| v * v).sum();
        let mut accepted = None;
        let mut eta = step;
        while eta > 1e-18 {
            let moves: Vec<Vec<f64>> = grad
                .iter()
                .map(|g| g.iter().map(|v| -eta * v).collect())
                .collect();
            let trial = config.displaced(&moves)?;
            match model.energy_and_gradient(&trial) {
                Ok(r) if r.value <= report.value - ARMIJO * eta * g2 => {
                    accepted = Some((trial, r));
                    break;
                }
                Ok(_) | Err(Error::CoincidentPoints { .. }) => eta *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((trial, r)) => {
                config = trial;
                report = r;
                trace.push(report.value);
                step = (2.0 * eta).min(1e3 * opts.initial_step);
            }
            None => {
                return Ok(Minimization {
                    config,
                    report,
                    trace,
                    status: MinimizeStatus::LineSearchFailed,
                });
            }
        }
    }
    let status = if max_abs(report.gradient.as_deref().unwrap_or_default()) <= opts.grad_tol {
        MinimizeStatus::Converged
    } else {
        MinimizeStatus::MaxIterations
    };
    Ok(Minimization {
        config,
        report,
        trace,
        status,
    })
}

/// Independent minimizations from `restarts` uniform random starts with
/// `N = nᵈ` points; restart `i` uses seed `opts.seed + i`. Results are in
/// restart order regardless of scheduling.
pub fn multi_start(
    torus: &Torus,
    params: &RieszParams,
    restarts: usize,
    opts: &MinimizeOptions,
) -> Result<Vec<Minimization>> {
    let model = EnergyModel::new(torus, params)?;
    let count = torus.points();
    (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let init = TorusConfiguration::random(torus, count, &mut rng)?;
            minimize_with(&model, &init, opts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CkEntry {
    pub t: f64,
    /// p-energy of the lattice configuration.
    pub baseline: f64,
    pub trials: usize,
    /// Random configurations whose p-energy fell below the baseline by more
    /// than the certified error.
    pub violations: usize,
    /// Smallest observed `energy − baseline`.
    pub min_gap: Option<f64>,
}

/// What the probe compares the lattice against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CkComparison {
    /// Uniform random `nᵈ`-point configurations on ℝᵈ/(nΛ₀).
    Configurations,
    /// Random covolume-one deformations of Λ₀, one point per cell.
    Lattices,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CkReport {
    pub dim: usize,
    pub n: u32,
    pub seed: u64,
    pub comparison: CkComparison,
    pub entries: Vec<CkEntry>,
    pub violations: usize,
}

/// Compares Gaussian p-energies of uniform random `nᵈ`-point configurations
/// with the lattice configuration of Λ₀, for each `t`.
pub fn ck_probe(
    base: &Lattice,
    n: u32,
    t_list: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CkReport> {
    let lattice = lattice_config(base, n)?;
    let torus = lattice.torus().clone();
    let hk = TorusHeatKernel::new(&torus);
    let count = torus.points();
    let mut entries = Vec::with_capacity(t_list.len());
    for (ti, &t) in t_list.iter().enumerate() {
        let baseline = gaussian_p_energy_with(&hk, &lattice, t)?;
        let gaps: Vec<Result<(f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let stream = seed.wrapping_add((ti as u64) << 32).wrapping_add(k as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let cfg = TorusConfiguration::random(&torus, count, &mut rng)?;
                let e = gaussian_p_energy_with(&hk, &cfg, t)?;
                Ok((e.value - baseline.value, e.tail_bound + baseline.tail_bound))
            })
            .collect();
        let mut violations = 0;
        let mut min_gap: Option<f64> = None;
        for g in gaps {
            let (gap, bound) = match g {
                Ok(v) => v,
                // Coincident random points have infinite energy: no violation.
                Err(Error::CoincidentPoints { .. }) => continue,
                Err(e) => return Err(e),
            };
            if gap < -(bound + 1e-12 * baseline.value.abs()) {
                violations += 1;
            }
            min_gap = Some(min_gap.map_or(gap, |m| m.min(gap)));
        }
        entries.push(CkEntry {
            t,
            baseline: baseline.value,
            trials,
            violations,
            min_gap,
        });
    }
    let violations = entries.iter().map(|e| e.violations).sum();
    Ok(CkReport {
        dim: base.dim(),
        n,
        seed,
        comparison: CkComparison::Configurations,
        entries,
        violations,
    })
}

/// Largest relative deformation `ε` of [`random_deformation`].
pub const DEFORMATION_SPREAD: f64 = 0.25;

/// `Λ₀·(I + εA)` rescaled to the covolume of Λ₀, with `ε` uniform in
/// `(0, DEFORMATION_SPREAD]` and `A` uniform in `[−1, 1]^{d×d}/√d`.
pub fn random_deformation<R: Rng>(base: &Lattice, rng: &mut R) -> Result<Lattice> {
    let d = base.dim();
    let eps = DEFORMATION_SPREAD * (1.0 - rng.gen::<f64>());
    let scale = eps / (d as f64).sqrt();
    let a = DMatrix::from_fn(
        d,
        d,
        |i, j| if i == j { 1.0 } else { 0.0 } + scale * rng.gen_range(-1.0..=1.0),
    );
    let basis = base.basis() * a;
    let lat = Lattice::new(basis)?;
    let factor = (base.covolume() / lat.covolume()).powf(1.0 / d as f64);
    Ok(lat.scaled(factor))
}

/// Terms of a Gaussian lattice sum below `e^{−GAUSSIAN_RANGE}` times the
/// leading term are dropped.
const GAUSSIAN_RANGE: f64 = 40.0;

/// `Σ_{v∈Λ\0} e^{−a|v|²}` to relative accuracy `e^{−GAUSSIAN_RANGE}`.
fn gaussian_lattice_sum(lat: &Lattice, a: f64) -> f64 {
    let r2 = lat.minimal_norm() + GAUSSIAN_RANGE / a;
    let dists = squared_distances_near(lat, &vec![0.0; lat.dim()], r2);
    let mut acc = NeumaierSum::new();
    for q in dists.iter().rev().filter(|&&q| q > 0.0) {
        acc.add((-a * q).exp());
    }
    acc.value()
}

/// One-point Gaussian p-energy split for comparisons between lattices of
/// equal covolume: `Σ_{v∈Λ\0} Ψ_t(v) = factor · Σ_{u∈L\0} e^{−a|u|²} + shift`
/// with `L` either Λ (image side) or Λ* (Fourier side), whichever is cheaper.
#[derive(Debug, Clone, Copy)]
struct GaussianSide {
    dual: bool,
    a: f64,
    factor: f64,
    shift: f64,
}

impl GaussianSide {
    fn choose(base: &Lattice, t: f64) -> Self {
        let d = base.dim() as f64;
        let v = base.covolume();
        let direct = Self {
            dual: false,
            a: 1.0 / (4.0 * t),
            factor: (4.0 * PI * t).powf(-0.5 * d),
            shift: 0.0,
        };
        let dual = Self {
            dual: true,
            a: 4.0 * PI * PI * t,
            factor: 1.0 / v,
            shift: 1.0 / v - direct.factor,
        };
        if dual.cost(base) < direct.cost(base) {
            dual
        } else {
            direct
        }
    }

    fn lattice(&self, lat: &Lattice) -> Lattice {
        if self.dual {
            lat.dual()
        } else {
            lat.clone()
        }
    }

    fn cost(&self, base: &Lattice) -> f64 {
        let l = self.lattice(base);
        ball_volume(l.dim(), (l.minimal_norm() + GAUSSIAN_RANGE / self.a).sqrt()) / l.covolume()
    }

    fn sum(&self, lat: &Lattice) -> f64 {
        gaussian_lattice_sum(&self.lattice(lat), self.a)
    }
}

/// Estimated lattice vectors enumerated by [`ck_probe`] (`n > 1`) or
/// [`ck_probe_lattices`] (`n = 1`).
pub fn ck_probe_cost(base: &Lattice, n: u32, t_list: &[f64], trials: usize) -> f64 {
    let period = base.scaled(n.max(1) as f64);
    let per_eval: f64 = t_list
        .iter()
        .map(|&t| GaussianSide::choose(&period, t).cost(&period))
        .sum();
    let count = (n as f64).powi(base.dim() as i32);
    let evals = if n <= 1 {
        1.0
    } else {
        0.5 * count * (count - 1.0) + 1.0
    };
    per_eval * evals * (trials + 1) as f64
}

/// Compares the one-point Gaussian p-energy `Σ_{v∈Λ\0} Ψ_t(v)` of Λ₀ with
/// that of random covolume-preserving deformations, for each `t`. Gaps are
/// resolved relative to the leading term, not to the total.
pub fn ck_probe_lattices(
    base: &Lattice,
    t_list: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CkReport> {
    let mut entries = Vec::with_capacity(t_list.len());
    for (ti, &t) in t_list.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let side = GaussianSide::choose(base, t);
        let reference = side.sum(base);
        let baseline = side.factor * reference + side.shift;
        let gaps: Vec<Result<f64>> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let stream = seed.wrapping_add((ti as u64) << 32).wrapping_add(k as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let lat = random_deformation(base, &mut rng)?;
                Ok(side.factor * (side.sum(&lat) - reference))
            })
            .collect();
        let mut violations = 0;
        let mut min_gap: Option<f64> = None;
        for g in gaps {
            let gap = g?;
            if gap < -1e-12 * side.factor * reference {
                violations += 1;
            }
            min_gap = Some(min_gap.map_or(gap, |m| m.min(gap)));
        }
        entries.push(CkEntry {
            t,
            baseline,
            trials,
            violations,
            min_gap,
        });
    }
    let violations = entries.iter().map(|e| e.violations).sum();
    Ok(CkReport {
        dim: base.dim(),
        n: 1,
        seed,
        comparison: CkComparison::Lattices,
        entries,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeName;

    fn a2() -> Lattice {
        Lattice::named(LatticeName::A2).unwrap()
    }

    #[test]
    fn lattice_config_points() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let c = lattice_config(&z2, 2).unwrap();
        let mut pts: Vec<Vec<f64>> = c.points().to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            pts,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
        assert_eq!(lattice_config(&z2, 1).unwrap().points(), &[vec![0.0, 0.0]]);
    }

    #[test]
    fn single_point_energy_is_madelung() {
        let p = RieszParams::new(2, 1.0).unwrap();
        let c = lattice_config(&a2(), 1).unwrap();
        let e = periodic_energy(&c, &p).unwrap();
        assert!((e.value - p.c() * p.c() * e.madelung.value).abs() < 1e-15);
    }

    #[test]
    fn lattice_energy_is_independent_of_n() {
        for s in [0.0, 1.0] {
            let p = RieszParams::new(2, s).unwrap();
            let e1 = periodic_energy(&lattice_config(&a2(), 1).unwrap(), &p)
                .unwrap()
                .value;
            let e3 = periodic_energy(&lattice_config(&a2(), 3).unwrap(), &p)
                .unwrap()
                .value;
            assert!((e1 - e3).abs() < 1e-10, "s={s}: {e1} vs {e3}");
        }
    }

    #[test]
    fn coincident_points_are_refused() {
        let p = RieszParams::new(2, 1.0).unwrap();
        let c =
            TorusConfiguration::new(&a2(), 2, vec![vec![0.1, 0.1], vec![0.1, 0.1 + 1e-9]]).unwrap();
        assert!(matches!(
            periodic_energy(&c, &p),
            Err(Error::CoincidentPoints { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_lattice_and_is_antisymmetric() {
        let p = RieszParams::new(2, 1.0).unwrap();
        let g = energy_gradient(&lattice_config(&a2(), 2).unwrap(), &p).unwrap();
        assert!(max_abs(&g) < 1e-9);
        let c = TorusConfiguration::new(&a2(), 2, vec![vec![0.1, 0.3], vec![0.9, 1.2]]).unwrap();
        let g = energy_gradient(&c, &p).unwrap();
        for k in 0..2 {
            assert!((g[0][k] + g[1][k]).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_energy_single_point_z1() {
        let z1 = Lattice::named(LatticeName::Z(1)).unwrap();
        let c = lattice_config(&z1, 1).unwrap();
        let e = gaussian_p_energy(&c, 0.25).unwrap();
        let exact: f64 = (1..20).map(|k| 2.0 * (-(k * k) as f64).exp()).sum::<f64>()
            / std::f64::consts::PI.sqrt();
        assert!((e.value - exact).abs() < 1e-14);
        assert!((e.value - 0.435_914).abs() < 1e-6);
    }

    #[test]
    fn minimizer_stops_at_lattice() {
        let p = RieszParams::new(2, 1.0).unwrap();
        let c = lattice_config(&a2(), 2).unwrap();
        let m = local_minimize(&c, &p, &MinimizeOptions::default()).unwrap();
        assert_eq!(m.status, MinimizeStatus::Converged);
        assert_eq!(m.trace.len(), 1);
    }

    #[test]
    fn ck_probe_with_no_trials_is_empty() {
        let r = ck_probe(&a2(), 2, &[0.25], 0, 0).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.entries[0].min_gap, None);
    }

    #[test]
    fn deformations_keep_covolume() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e8 = Lattice::named(LatticeName::E8).unwrap();
        for _ in 0..5 {
            let l = random_deformation(&e8, &mut rng).unwrap();
            assert!((l.covolume() - 1.0).abs() < 1e-12);
            assert!(l.minimal_norm() < e8.minimal_norm());
        }
    }

    #[test]
    fn lattice_probe_finds_no_better_lattice() {
        for (name, t) in [
            (LatticeName::A2, 0.25),
            (LatticeName::E8, 0.25),
            (LatticeName::E8, 1.0),
        ] {
            let lat = Lattice::named(name).unwrap();
            let r = ck_probe_lattices(&lat, &[t], 8, 1).unwrap();
            assert_eq!(r.violations, 0);
            assert!(r.entries[0].min_gap.unwrap() > 0.0);
            assert_eq!(r, ck_probe_lattices(&lat, &[t], 8, 1).unwrap());
            let own = TorusHeatKernel::new(&Torus::new(&lat, 1).unwrap())
                .self_images(t)
                .unwrap();
            assert!(
                (r.entries[0].baseline - own.value).abs() < 1e-12,
                "{name:?} {t}"
            );
        }
    }
}
