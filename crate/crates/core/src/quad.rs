//! Numerical quadrature: globally adaptive Gauss–Kronrod (7/15) and
//! Gauss–Legendre rules, plain and graded toward an endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value, error });
    let mut evaluations = 15;
    loop {
        let total: f64 = heap.iter().map(|iv| iv.value).sum();
        let err: f64 = heap.iter().map(|iv| iv.error).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            let mut acc = NeumaierSum::new();
            let mut parts: Vec<_> = heap.into_vec();
            parts.sort_by(|x, y| x.a.total_cmp(&y.a));
            for p in &parts {
                acc.add(p.value);
            }
            return Ok(Quadrature {
                value: acc.value(),
                error: err,
                evaluations,
            });
        }
        if heap.len() >= MAX_INTERVALS || !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached 16-point Gauss–Legendre rule on `[0, 1]`.
pub fn gl16_unit() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(16);
        (
            x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            w.iter().map(|v| 0.5 * v).collect(),
        )
    })
}

/// Panel breakpoints on `[0, len]` graded geometrically toward 0.
///
/// The first panel is `[0, scale]` (clamped to `len`), following panels
/// double in width; each panel is then split into `subdivisions` equal parts.
pub fn graded_breakpoints(len: f64, scale: f64, subdivisions: usize) -> Vec<f64> {
    let mut coarse = vec![0.0];
    if len <= 0.0 {
        return coarse;
    }
    let mut h = scale.clamp(len * 1e-14, len);
    let mut edge = 0.0;
    while edge < len {
        let next = (edge + h).min(len);
        // Avoid a sliver at the end.
        let next = if len - next < 0.25 * h { len } else { next };
        coarse.push(next);
        edge = next;
        if edge > 0.0 {
            h = edge;
        }
    }
    let mut out = Vec::with_capacity((coarse.len() - 1) * subdivisions + 1);
    out.push(0.0);
    for pair in coarse.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for k in 1..=subdivisions {
            out.push(a + (b - a) * k as f64 / subdivisions as f64);
        }
    }
    out
}

/// Tensor-product composite Gauss–Legendre quadrature over the box
/// `[0, len_0] × … × [0, len_{m-1}]`, graded toward the origin corner at
/// `scale`. Subdivisions double until successive values differ by `tol`.
pub fn graded_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    lens: &[f64],
    scale: f64,
    tol: f64,
) -> Result<Quadrature> {
    if lens.is_empty() {
        return Ok(Quadrature {
            value: f(&[]),
            error: 0.0,
            evaluations: 1,
        });
    }
    if lens.iter().any(|&l| l <= 0.0) {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut prev: Option<f64> = None;
    let mut evaluations = 0;
    for level in 0..7 {
        let sub = 1usize << level;
        let (value, evals) = tensor_rule(&mut f, lens, scale, sub);
        evaluations += evals;
        if let Some(p) = prev {
            let diff = (value - p).abs();
            if diff <= tol {
                return Ok(Quadrature {
                    value,
                    error: diff,
                    evaluations,
                });
            }
        }
        prev = Some(value);
    }
    let v = prev.unwrap_or(0.0);
    Err(Error::Quadrature {
        estimate: v,
        error: f64::NAN,
    })
}

fn tensor_rule<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    lens: &[f64],
    scale: f64,
    sub: usize,
) -> (f64, usize) {
    let (ux, uw) = gl16_unit();
    // 1D node/weight lists per axis.
    let axes: Vec<(Vec<f64>, Vec<f64>)> = lens
        .iter()
        .map(|&len| {
            let br = graded_breakpoints(len, scale, sub);
            let mut xs = Vec::with_capacity((br.len() - 1) * ux.len());
            let mut ws = Vec::with_capacity(xs.capacity());
            for p in br.windows(2) {
                let w = p[1] - p[0];
                for (x, wt) in ux.iter().zip(uw) {
                    xs.push(p[0] + w * x);
                    ws.push(w * wt);
                }
            }
            (xs, ws)
        })
        .collect();
    let m = lens.len();
    let mut idx = vec![0usize; m];
    let mut point = vec![0.0; m];
    let mut acc = NeumaierSum::new();
    let mut count = 0;
    loop {
        let mut w = 1.0;
        for k in 0..m {
            point[k] = axes[k].0[idx[k]];
            w *= axes[k].1[idx[k]];
        }
        acc.add(w * f(&point));
        count += 1;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < axes[k].0.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == m {
                return (acc.value(), count);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        // ∫_{-1}^{1} t^18 dt = 2/19
        let v: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫_0^1 t^{-1/2} dt = 2
        let q = integrate(|t| t.powf(-0.5), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "{q:?}");
    }

    #[test]
    fn adaptive_gaussian() {
        let q = integrate(|t: f64| (-t * t).exp(), -10.0, 10.0, 1e-13, 0.0).unwrap();
        assert!((q.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn graded_box_log_corner() {
        // ∫_0^1 -ln(u) du = 1
        let q = graded_box(|p| -p[0].ln(), &[1.0], 1e-10, 1e-11).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9, "{q:?}");
    }
}
