//! Finite-volume jellium: `N = Rᵈ` charges in the cube `K_R = [−R/2, R/2]ᵈ`
//! against a uniform neutralizing background,
//!
//! ```text
//! Σ_{i≠j} g(a_i − a_j) − 2 Σ_i ∫_{K_R} g(a_i − y) dy + ∬_{K_R²} g(x − y) dx dy.
//! ```
//!
//! Box integrals of a radial kernel are reduced to smooth face integrals by
//! splitting boxes into cones from the singular corner, where the radial
//! integral is done in closed form.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{lattice_config, multi_start, EnergyModel, MinimizeOptions};
use crate::error::{Error, Result};
use crate::green::Torus;
use crate::kernels::RieszParams;
use crate::lattice::Lattice;
use crate::quad::graded_box;
use crate::sum::NeumaierSum;

/// Environment variable naming the directory for cached double integrals.
pub const CACHE_DIR_ENV: &str = "TORUS_ENERGY_CACHE_DIR";

/// Points of a jellium configuration in `K_R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JelliumInstance {
    pub params: RieszParams,
    pub r: f64,
    pub points: Vec<Vec<f64>>,
}

impl JelliumInstance {
    /// Coulomb or logarithmic interaction, `d ∈ {2, 3}`, `N = round(Rᵈ)`.
    pub fn new(params: &RieszParams, r: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        let d = params.d() as f64;
        if (params.s() - (d - 2.0)).abs() > 1e-12 {
            return Err(Error::OutOfRange(format!(
                "jellium defaults to the Coulomb kernel s = d − 2; got s = {} (use new_general)",
                params.s()
            )));
        }
        Self::new_general(params, r, points)
    }

    /// Any Riesz exponent `0 ≤ s < d`.
    pub fn new_general(params: &RieszParams, r: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        let d = params.d();
        if !(2..=3).contains(&d) {
            return Err(Error::OutOfRange(format!(
                "jellium supports d = 2, 3; got {d}"
            )));
        }
        let n = particle_count(d, r)?;
        if points.len() != n {
            return Err(Error::OutOfRange(format!(
                "expected N = round(R^d) = {n} points, got {}",
                points.len()
            )));
        }
        check_inside(d, r, &points)?;
        Ok(Self {
            params: *params,
            r,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `round(Rᵈ)`, which must be at least 1.
pub fn particle_count(d: usize, r: f64) -> Result<usize> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::OutOfRange(format!("R must be positive, got {r}")));
    }
    let n = r.powi(d as i32).round();
    if n < 1.0 {
        return Err(Error::OutOfRange(format!(
            "R^d = {} rounds to no particles",
            r.powi(d as i32)
        )));
    }
    Ok(n as usize)
}

fn check_inside(d: usize, r: f64, points: &[Vec<f64>]) -> Result<()> {
    let h = 0.5 * r * (1.0 + 1e-12);
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !(v.abs() <= h)) {
            return Err(Error::OutOfRange(format!("point {p:?} lies outside K_R")));
        }
    }
    Ok(())
}

#[inline]
fn kernel(p: &RieszParams, r: f64) -> f64 {
    if p.is_log() {
        -r.ln()
    } else {
        r.powf(-p.s())
    }
}

/// `∫₀¹ g(τρ) τ^{k−1} dτ` for the cone of exponent `k`.
#[inline]
fn radial_moment(p: &RieszParams, k: f64, rho: f64) -> f64 {
    if p.is_log() {
        1.0 / (k * k) - rho.ln() / k
    } else {
        rho.powf(-p.s()) / (k - p.s())
    }
}

/// `∫_{[0,L₁]×…×[0,L_d]} g(|p|) dp` with the singularity at the origin corner.
fn corner_box(p: &RieszParams, lens: &[f64], tol: f64) -> Result<f64> {
    let d = lens.len();
    if lens.iter().any(|&l| l <= 0.0) {
        return Ok(0.0);
    }
    let mut acc = NeumaierSum::new();
    for i in 0..d {
        let li = lens[i];
        let others: Vec<f64> = (0..d).filter(|&j| j != i).map(|j| lens[j]).collect();
        let q = graded_box(
            |u: &[f64]| {
                let rho2 = li * li + u.iter().map(|v| v * v).sum::<f64>();
                radial_moment(p, d as f64, rho2.sqrt())
            },
            &others,
            li,
            tol / (4.0 * d as f64 * li.max(1.0)),
        )?;
        acc.add(li * q.value);
    }
    Ok(acc.value())
}

/// Background potential `∫_{K_R} g(x − y) dy`.
pub fn background_potential(params: &RieszParams, r: f64, x: &[f64], tol: f64) -> Result<f64> {
    let d = params.d();
    check_inside(d, r, std::slice::from_ref(&x.to_vec()))?;
    let mut acc = NeumaierSum::new();
    for corner in 0..(1usize << d) {
        let lens: Vec<f64> = (0..d)
            .map(|i| {
                if corner >> i & 1 == 0 {
                    0.5 * r + x[i]
                } else {
                    0.5 * r - x[i]
                }
            })
            .collect();
        acc.add(corner_box(params, &lens, tol / (1usize << d) as f64)?);
    }
    Ok(acc.value())
}

/// `∫` of `g` over the face `{y_axis = c}` of `K_R`, seen from `x`.
fn face_integral(
    params: &RieszParams,
    r: f64,
    x: &[f64],
    axis: usize,
    c: f64,
    tol: f64,
) -> Result<f64> {
    let d = x.len();
    let h = (x[axis] - c).abs();
    let free: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
    let mut acc = NeumaierSum::new();
    for corner in 0..(1usize << free.len()) {
        let lens: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                if corner >> k & 1 == 0 {
                    0.5 * r + x[j]
                } else {
                    0.5 * r - x[j]
                }
            })
            .collect();
        let q = graded_box(
            |u: &[f64]| {
                kernel(
                    params,
                    (h * h + u.iter().map(|v| v * v).sum::<f64>()).sqrt(),
                )
            },
            &lens,
            h.max(1e-12 * r),
            tol,
        )?;
        acc.add(q.value);
    }
    Ok(acc.value())
}

/// `∇_x ∫_{K_R} g(x − y) dy` by the divergence theorem: the flux of `g`
/// through the two faces normal to each axis.
pub fn background_gradient(params: &RieszParams, r: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let d = params.d();
    check_inside(d, r, std::slice::from_ref(&x.to_vec()))?;
    (0..d)
        .map(|i| {
            let lower = face_integral(params, r, x, i, -0.5 * r, tol)?;
            let upper = face_integral(params, r, x, i, 0.5 * r, tol)?;
            Ok(lower - upper)
        })
        .collect()
}

/// `∬_{K_1²} g(x − y) dx dy = 2ᵈ d ∫_F Σ_m a_m(q) ∫₀¹ g(τ|q|) τ^{d−1+m} dτ dq`,
/// where `Π_j (1 − τ q_j) = Σ_m a_m τ^m` and `F` is a face of the unit cube.
fn unit_double_integral(params: &RieszParams) -> Result<f64> {
    let d = params.d();
    let q = graded_box(
        |u: &[f64]| {
            let mut poly = vec![1.0, -1.0];
            for &qj in u {
                let mut next = vec![0.0; poly.len() + 1];
                for (m, a) in poly.iter().enumerate() {
                    next[m] += a;
                    next[m + 1] -= a * qj;
                }
                poly = next;
            }
            let rho = (1.0 + u.iter().map(|v| v * v).sum::<f64>()).sqrt();
            poly.iter()
                .enumerate()
                .map(|(m, a)| a * radial_moment(params, (d + m) as f64, rho))
                .sum()
        },
        &vec![1.0; d - 1],
        1.0,
        1e-15,
    )?;
    Ok((1usize << d) as f64 * d as f64 * q.value)
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    d: usize,
    s: f64,
    r: f64,
    value: f64,
}

type MemoryCache = Mutex<HashMap<(usize, u64, u64), f64>>;

fn memory_cache() -> &'static MemoryCache {
    static CACHE: OnceLock<MemoryCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cache_path(d: usize, s: f64, r: f64) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_DIR_ENV)?;
    Some(PathBuf::from(dir).join(format!("jellium-d{d}-s{s}-R{r}.json")))
}

fn write_atomic(path: &std::path::Path, entry: &CacheEntry) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(
        &tmp,
        serde_json::to_vec(entry).map_err(std::io::Error::other)?,
    )?;
    std::fs::rename(&tmp, path)
}

/// `∬_{K_R²} g(x − y) dx dy`, cached in memory and, when
/// `TORUS_ENERGY_CACHE_DIR` is set, on disk.
pub fn double_integral(params: &RieszParams, r: f64) -> Result<f64> {
    let d = params.d();
    let key = (d, params.s().to_bits(), r.to_bits());
    if let Some(v) = memory_cache()
        .lock()
        .ok()
        .and_then(|m| m.get(&key).copied())
    {
        return Ok(v);
    }
    let path = cache_path(d, params.s(), r);
    if let Some(p) = &path {
        if let Ok(bytes) = std::fs::read(p) {
            if let Ok(e) = serde_json::from_slice::<CacheEntry>(&bytes) {
                if e.d == d && e.s == params.s() && e.r == r {
                    if let Ok(mut m) = memory_cache().lock() {
                        m.insert(key, e.value);
                    }
                    return Ok(e.value);
                }
            }
        }
    }
    let unit = unit_double_integral(params)?;
    let df = d as f64;
    let value = if params.is_log() {
        r.powf(2.0 * df) * (unit - r.ln())
    } else {
        r.powf(2.0 * df - params.s()) * unit
    };
    if let Some(p) = &path {
        // A failed cache write only costs a recomputation later.
        let _ = write_atomic(
            p,
            &CacheEntry {
                d,
                s: params.s(),
                r,
                value,
            },
        );
    }
    if let Ok(mut m) = memory_cache().lock() {
        m.insert(key, value);
    }
    Ok(value)
}

/// The three terms of the jellium bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JelliumParts {
    /// `Σ_{i≠j} g(a_i − a_j)`
    pub pair: f64,
    /// `Σ_i ∫_{K_R} g(a_i − y) dy`
    pub background: f64,
    /// `∬_{K_R²} g(x − y) dx dy`
    pub self_energy: f64,
    /// `pair − 2·background + self_energy`
    pub bracket: f64,
}

/// Bracket terms for arbitrary points in `K_R` (no constraint on `N`).
pub fn jellium_parts(
    params: &RieszParams,
    r: f64,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<JelliumParts> {
    let d = params.d();
    check_inside(d, r, points)?;
    let pair = pair_sum(params, r, points)?;
    let bg: Vec<Result<f64>> = points
        .par_iter()
        .map(|p| background_potential(params, r, p, tol))
        .collect();
    let mut background = NeumaierSum::new();
    for v in bg {
        background.add(v?);
    }
    let background = background.value();
    let self_energy = double_integral(params, r)?;
    let mut b = NeumaierSum::new();
    b.add(pair);
    b.add(-2.0 * background);
    b.add(self_energy);
    Ok(JelliumParts {
        pair,
        background,
        self_energy,
        bracket: b.value(),
    })
}

fn pair_sum(params: &RieszParams, r: f64, points: &[Vec<f64>]) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dist = dist(&points[i], &points[j]);
            if dist < 1e-7 * r {
                return Err(Error::CoincidentPoints {
                    i,
                    j,
                    distance: dist,
                });
            }
            acc.add(2.0 * kernel(params, dist));
        }
    }
    Ok(acc.value())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The jellium bracket, not divided by `Rᵈ`.
pub fn jellium_energy(inst: &JelliumInstance, tol: f64) -> Result<f64> {
    Ok(jellium_parts(&inst.params, inst.r, &inst.points, tol)?.bracket)
}

/// Gradient of the bracket with respect to every point.
pub fn jellium_gradient(
    params: &RieszParams,
    r: f64,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let d = params.d();
    let s = params.s();
    let grads: Vec<Result<Vec<f64>>> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut g = vec![NeumaierSum::new(); d];
            for (j, q) in points.iter().enumerate() {
                if j == i {
                    continue;
                }
                let diff: Vec<f64> = points[i].iter().zip(q).map(|(a, b)| a - b).collect();
                let r2: f64 = diff.iter().map(|v| v * v).sum();
                if r2.sqrt() < 1e-7 * r {
                    return Err(Error::CoincidentPoints {
                        i,
                        j,
                        distance: r2.sqrt(),
                    });
                }
                // ∇g(z) = −s|z|^{−s−2} z, or −z/|z|² for −ln|z|.
                let f = if params.is_log() {
                    -1.0 / r2
                } else {
                    -s * r2.powf(-0.5 * s - 1.0)
                };
                for k in 0..d {
                    g[k].add(2.0 * f * diff[k]);
                }
            }
            let bg = background_gradient(params, r, &points[i], tol)?;
            Ok(g.iter().zip(bg).map(|(a, b)| a.value() - 2.0 * b).collect())
        })
        .collect();
    grads.into_iter().collect()
}

/// Controls for [`jellium_minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JelliumOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when no coordinate of the projected step `x − P(x − ∇)` exceeds this.
    pub grad_tol: f64,
    /// Quadrature tolerance for background terms.
    pub tol: f64,
}

impl Default for JelliumOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iters: 400,
            grad_tol: 1e-7,
            tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JelliumMinimum {
    pub r: f64,
    pub points: Vec<Vec<f64>>,
    pub value: f64,
    /// `value / Rᵈ`
    pub per_volume: f64,
    /// Best value after each restart.
    pub best_by_restart: Vec<f64>,
}

fn clamp_into(r: f64, p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| v.clamp(-0.5 * r, 0.5 * r)).collect()
}

fn projected_descent(
    params: &RieszParams,
    r: f64,
    init: Vec<Vec<f64>>,
    opts: &JelliumOptions,
) -> Result<(Vec<Vec<f64>>, f64)> {
    const ARMIJO: f64 = 1e-4;
    let mut x = init;
    let mut f = jellium_parts(params, r, &x, opts.tol)?.bracket;
    let mut step = 0.05 * r;
    for _ in 0..opts.max_iters {
        let g = jellium_gradient(params, r, &x, opts.tol)?;
        let projected: f64 = x
            .iter()
            .zip(&g)
            .flat_map(|(p, gi)| {
                let moved: Vec<f64> = p.iter().zip(gi).map(|(a, b)| a - b).collect();
                clamp_into(r, &moved)
                    .into_iter()
                    .zip(p.clone())
                    .map(|(m, a)| (a - m).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        if projected <= opts.grad_tol {
            break;
        }
        let mut eta = step;
        let mut accepted = false;
        while eta > 1e-14 * r {
            let trial: Vec<Vec<f64>> = x
                .iter()
                .zip(&g)
                .map(|(p, gi)| {
                    clamp_into(
                        r,
                        &p.iter()
                            .zip(gi)
                            .map(|(a, b)| a - eta * b)
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            let decrease: f64 = x
                .iter()
                .zip(&trial)
                .zip(&g)
                .map(|((p, t), gi)| {
                    p.iter()
                        .zip(t)
                        .zip(gi)
                        .map(|((a, b), c)| c * (a - b))
                        .sum::<f64>()
                })
                .sum();
            match jellium_parts(params, r, &trial, opts.tol) {
                Ok(parts) if parts.bracket <= f - ARMIJO * decrease => {
                    x = trial;
                    f = parts.bracket;
                    accepted = true;
                    break;
                }
                Ok(_) | Err(Error::CoincidentPoints { .. }) => eta *= 0.5,
                Err(e) => return Err(e),
            }
        }
        if !accepted {
            break;
        }
        step = (2.0 * eta).min(0.5 * r);
    }
    Ok((x, f))
}

/// Multi-restart projected gradient descent for the jellium bracket with
/// `N = round(Rᵈ)` points; restart `i` starts from uniform points drawn with
/// seed `opts.seed + i`.
pub fn jellium_minimize(
    params: &RieszParams,
    r: f64,
    opts: &JelliumOptions,
) -> Result<JelliumMinimum> {
    let d = params.d();
    if !(2..=3).contains(&d) {
        return Err(Error::OutOfRange(format!(
            "jellium supports d = 2, 3; got {d}"
        )));
    }
    let n = particle_count(d, r)?;
    let runs: Vec<Result<(Vec<Vec<f64>>, f64)>> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let init: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| (rng.gen::<f64>() - 0.5) * r).collect())
                .collect();
            projected_descent(params, r, init, opts)
        })
        .collect();
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    let mut best_by_restart = Vec::with_capacity(runs.len());
    let mut last_err = None;
    for run in runs {
        match run {
            Ok((pts, v)) => {
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((pts, v));
                }
            }
            Err(e) => last_err = Some(e),
        }
        best_by_restart.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));
    }
    let (points, value) = match best {
        Some(b) => b,
        None => {
            return Err(last_err
                .unwrap_or_else(|| Error::Nonconvergence("no jellium restart succeeded".into())))
        }
    };
    Ok(JelliumMinimum {
        r,
        points,
        value,
        per_volume: value / r.powi(d as i32),
        best_by_restart,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JelliumComparison {
    /// `(R, min bracket / Rᵈ)`
    pub jellium: Vec<(f64, f64)>,
    /// `(n, min 𝒲_{nΛ₀})`
    pub periodic: Vec<(u32, f64)>,
    /// Affine fit `jellium ≈ slope · periodic + intercept` on the first half
    /// of the paired entries.
    pub slope: f64,
    pub intercept: f64,
    /// Residuals of the fit on the second half.
    pub residuals: Vec<f64>,
    /// `max − min` of the jellium values.
    pub spread: f64,
    /// Largest residual relative to the spread (0 when both vanish).
    pub residual_ratio: f64,
}

/// Minimal periodic energy `min 𝒲_{nΛ₀}` over the lattice configuration and
/// `restarts` random starts.
pub fn periodic_minimum(
    base: &Lattice,
    n: u32,
    params: &RieszParams,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    let torus = Torus::new(base, n)?;
    let model = EnergyModel::new(&torus, params)?;
    let mut best = model.energy(&lattice_config(base, n)?)?.value;
    if torus.points() > 1 {
        let opts = MinimizeOptions {
            seed,
            ..MinimizeOptions::default()
        };
        for m in multi_start(&torus, params, restarts, &opts)? {
            best = best.min(m.report.value);
        }
    }
    Ok(best)
}

/// Tabulates minimized jellium energies per volume along `r_list` and
/// `min 𝒲_{nΛ₀}` along `n_list`, pairs them in order and fits an affine map.
pub fn jellium_vs_periodic(
    params: &RieszParams,
    r_list: &[f64],
    base: &Lattice,
    n_list: &[u32],
    opts: &JelliumOptions,
) -> Result<JelliumComparison> {
    if r_list.is_empty() || n_list.is_empty() {
        return Err(Error::OutOfRange("R and n lists must be nonempty".into()));
    }
    let mut jellium = Vec::with_capacity(r_list.len());
    for &r in r_list {
        jellium.push((r, jellium_minimize(params, r, opts)?.per_volume));
    }
    let mut periodic = Vec::with_capacity(n_list.len());
    for &n in n_list {
        periodic.push((
            n,
            periodic_minimum(base, n, params, opts.restarts, opts.seed)?,
        ));
    }
    let m = jellium.len().min(periodic.len());
    let xs: Vec<f64> = periodic[..m].iter().map(|p| p.1).collect();
    let ys: Vec<f64> = jellium[..m].iter().map(|p| p.1).collect();
    let k = m.div_ceil(2);
    let (slope, intercept) = affine_fit(&xs[..k], &ys[..k]);
    let residuals: Vec<f64> = xs[k..]
        .iter()
        .zip(&ys[k..])
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    let lo = jellium.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = jellium
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let worst = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let residual_ratio = if worst == 0.0 { 0.0 } else { worst / spread };
    Ok(JelliumComparison {
        jellium,
        periodic,
        slope,
        intercept,
        residuals,
        spread,
        residual_ratio,
    })
}

/// Least-squares line through the points; a constant when the abscissae do
/// not vary.
fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use std::f64::consts::PI;

    fn log2d() -> RieszParams {
        RieszParams::new(2, 0.0).unwrap()
    }

    #[test]
    fn log_background_at_center_matches_polar_oracle() {
        // 8 ∫₀^{π/4} ∫₀^{1/(2cos θ)} −r ln r dr dθ
        let inner = |rmax: f64| rmax * rmax * (0.25 - 0.5 * rmax.ln());
        let oracle = 8.0
            * quad::integrate(|th| inner(0.5 / th.cos()), 0.0, 0.25 * PI, 1e-14, 1e-14)
                .unwrap()
                .value;
        let v = background_potential(&log2d(), 1.0, &[0.0, 0.0], 1e-12).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn background_scaling_and_reflection() {
        let p = RieszParams::coulomb(3).unwrap();
        let x = [0.1, -0.2, 0.05];
        let v1 = background_potential(&p, 1.0, &x, 1e-12).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let v2 = background_potential(&p, 2.0, &x2, 1e-12).unwrap();
        assert!((v2 - 4.0 * v1).abs() < 1e-8, "{v2} vs {}", 4.0 * v1);
        let xr = [-0.1, -0.2, -0.05];
        assert!((background_potential(&p, 1.0, &xr, 1e-12).unwrap() - v1).abs() < 1e-10);
    }

    #[test]
    fn background_gradient_matches_differences() {
        for p in [log2d(), RieszParams::new(2, 0.5).unwrap()] {
            let x = [0.3, -0.45];
            let g = background_gradient(&p, 1.2, &x, 1e-12).unwrap();
            let h = 1e-5;
            for k in 0..2 {
                let mut a = x;
                let mut b = x;
                a[k] += h;
                b[k] -= h;
                let fd = (background_potential(&p, 1.2, &a, 1e-13).unwrap()
                    - background_potential(&p, 1.2, &b, 1e-13).unwrap())
                    / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7, "{k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn double_integral_matches_integrated_potential() {
        let p = log2d();
        let direct = double_integral(&p, 1.0).unwrap();
        // ∫ V over K₁ by symmetry: 4 ∫_{[0,1/2]²} V
        let q = graded_box(
            |u: &[f64]| background_potential(&p, 1.0, u, 1e-13).unwrap(),
            &[0.5, 0.5],
            0.5,
            1e-11,
        )
        .unwrap();
        assert!(
            (direct - 4.0 * q.value).abs() < 1e-9,
            "{direct} vs {}",
            4.0 * q.value
        );
    }

    #[test]
    fn single_center_point_bracket() {
        let p = log2d();
        let inst = JelliumInstance::new(&p, 1.0, vec![vec![0.0, 0.0]]).unwrap();
        let e = jellium_energy(&inst, 1e-12).unwrap();
        let expected = -2.0 * background_potential(&p, 1.0, &[0.0, 0.0], 1e-12).unwrap()
            + double_integral(&p, 1.0).unwrap();
        assert!((e - expected).abs() < 1e-12);
    }

    #[test]
    fn log_bracket_scaling() {
        // bracket_R(R a) = pair₁ − 2N B₁ + N² I₁ + N ln R for N = Rᵈ points.
        let p = log2d();
        let pts = vec![
            vec![-0.3, -0.2],
            vec![0.25, -0.25],
            vec![-0.2, 0.3],
            vec![0.2, 0.15],
        ];
        let unit = jellium_parts(&p, 1.0, &pts, 1e-13).unwrap();
        let scaled: Vec<Vec<f64>> = pts
            .iter()
            .map(|q| q.iter().map(|v| 2.0 * v).collect())
            .collect();
        let big = jellium_parts(&p, 2.0, &scaled, 1e-13).unwrap();
        let n = 4.0;
        let expected =
            unit.pair - 2.0 * n * unit.background + n * n * unit.self_energy + n * 2f64.ln();
        assert!(
            (big.bracket - expected).abs() < 1e-9,
            "{} vs {expected}",
            big.bracket
        );
    }

    #[test]
    fn instance_validation() {
        let p = log2d();
        assert!(JelliumInstance::new(&p, 2.0, vec![vec![0.0, 0.0]]).is_err());
        assert!(JelliumInstance::new(&p, 1.0, vec![vec![0.6, 0.0]]).is_err());
        assert!(JelliumInstance::new(
            &RieszParams::new(2, 1.0).unwrap(),
            1.0,
            vec![vec![0.0, 0.0]]
        )
        .is_err());
    }

    #[test]
    fn one_particle_minimizer_is_center() {
        let m = jellium_minimize(
            &log2d(),
            1.0,
            &JelliumOptions {
                restarts: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.points[0].iter().all(|v| v.abs() < 1e-5), "{:?}", m.points);
        assert!(m.best_by_restart.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn affine_fit_of_constant_design() {
        assert_eq!(affine_fit(&[1.0, 1.0], &[2.0, 2.0]), (0.0, 2.0));
        let (a, b) = affine_fit(&[0.0, 1.0], &[1.0, 3.0]);
        assert!((a - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }
}
