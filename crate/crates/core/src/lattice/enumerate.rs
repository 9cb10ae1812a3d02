//! Fincke–Pohst enumeration of lattice vectors in a ball.

use rayon::prelude::*;

use super::{Lattice, ShellSeries};
use crate::error::{Error, Result};

/// Default cap on the number of vectors an enumeration may visit.
pub const DEFAULT_BUDGET: f64 = 1e8;

/// Volume of the d-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let df = d as f64;
    std::f64::consts::PI.powf(0.5 * df) * r.powf(df)
        / statrs::function::gamma::gamma(0.5 * df + 1.0)
}

struct Tree<'a> {
    d: usize,
    chol: &'a nalgebra::DMatrix<f64>,
    center: Vec<f64>,
    radius_sq: f64,
}

impl<'a> Tree<'a> {
    fn new(lat: &'a Lattice, center: &[f64], radius_sq: f64) -> Self {
        Tree {
            d: lat.dim(),
            chol: lat.cholesky(),
            center: lat.coordinates(center),
            radius_sq,
        }
    }

    // Admissible integer range of coordinate `level` given the higher ones.
    fn range(&self, c: &[i64], level: usize, acc: f64) -> (i64, i64, f64) {
        let uii = self.chol[(level, level)];
        let mut shift = 0.0;
        for j in level + 1..self.d {
            shift += self.chol[(j, level)] * (c[j] as f64 - self.center[j]);
        }
        let mid = self.center[level] - shift / uii;
        let rem = (self.radius_sq - acc).max(0.0);
        let w = rem.sqrt() / uii;
        let slack = 1e-9 * (1.0 + w);
        (
            (mid - w - slack).ceil() as i64,
            (mid + w + slack).floor() as i64,
            mid,
        )
    }

    fn walk<F: FnMut(&[i64], f64)>(&self, c: &mut [i64], level: usize, acc: f64, f: &mut F) {
        let (lo, hi, mid) = self.range(c, level, acc);
        let uii = self.chol[(level, level)];
        let limit = self.radius_sq * (1.0 + 1e-12) + 1e-12;
        for k in lo..=hi {
            let comp = uii * (k as f64 - mid);
            let next = acc + comp * comp;
            if next > limit {
                continue;
            }
            c[level] = k;
            if level == 0 {
                f(c, next);
            } else {
                self.walk(c, level - 1, next, f);
            }
        }
    }
}

impl Tree<'_> {
    fn walk_rows<F: FnMut(&[i64], i64, i64)>(
        &self,
        c: &mut [i64],
        level: usize,
        acc: f64,
        f: &mut F,
    ) {
        let (lo, hi, mid) = self.range(c, level, acc);
        if level == 0 {
            if lo <= hi {
                f(c, lo, hi);
            }
            return;
        }
        let uii = self.chol[(level, level)];
        let limit = self.radius_sq * (1.0 + 1e-12) + 1e-12;
        for k in lo..=hi {
            let comp = uii * (k as f64 - mid);
            let next = acc + comp * comp;
            if next > limit {
                continue;
            }
            c[level] = k;
            self.walk_rows(c, level - 1, next, f);
        }
    }
}

/// Calls `f(coefficients, |v - center|²)` for every lattice vector `v` with
/// `|v - center|² <= radius_sq` (up to rounding at the boundary).
pub fn for_each_vector_near<F: FnMut(&[i64], f64)>(
    lat: &Lattice,
    center: &[f64],
    radius_sq: f64,
    mut f: F,
) {
    if radius_sq < 0.0 {
        return;
    }
    let tree = Tree::new(lat, center, radius_sq);
    let mut c = vec![0i64; tree.d];
    tree.walk(&mut c, tree.d - 1, 0.0, &mut f);
}

/// Inclusive range of the last coefficient over vectors within `radius_sq` of
/// `center`; pairs with [`for_each_row_near`] to split work.
pub fn top_coefficient_range(lat: &Lattice, center: &[f64], radius_sq: f64) -> (i64, i64) {
    let tree = Tree::new(lat, center, radius_sq.max(0.0));
    let c = vec![0i64; tree.d];
    let (lo, hi, _) = tree.range(&c, tree.d - 1, 0.0);
    (lo, hi)
}

/// Visits the lattice vectors within `radius_sq` of `center` row by row:
/// `f(c, lo, hi)` receives the coefficients `c[1..]` (with `c[0]` unset) and
/// the admissible range of `c[0]`. With `top = Some(k)` only rows whose last
/// coefficient is `k` are visited (`d >= 2`).
pub fn for_each_row_near<F: FnMut(&[i64], i64, i64)>(
    lat: &Lattice,
    center: &[f64],
    radius_sq: f64,
    top: Option<i64>,
    mut f: F,
) {
    if radius_sq < 0.0 {
        return;
    }
    let tree = Tree::new(lat, center, radius_sq);
    let mut c = vec![0i64; tree.d];
    let last = tree.d - 1;
    match top {
        Some(k) if last > 0 => {
            let uii = tree.chol[(last, last)];
            let comp = uii * (k as f64 - tree.center[last]);
            let acc = comp * comp;
            if acc > radius_sq * (1.0 + 1e-12) + 1e-12 {
                return;
            }
            c[last] = k;
            tree.walk_rows(&mut c, last - 1, acc, &mut f);
        }
        _ => tree.walk_rows(&mut c, last, 0.0, &mut f),
    }
}

/// Squared distances `|x - v|²` (computed from Cartesian differences) for all
/// `v ∈ Λ` with `|x - v|² <= radius_sq`, sorted ascending.
pub fn squared_distances_near(lat: &Lattice, x: &[f64], radius_sq: f64) -> Vec<f64> {
    let d = lat.dim();
    let b = lat.basis();
    let mut out = Vec::new();
    for_each_vector_near(lat, x, radius_sq, |c, _| {
        let mut q = 0.0;
        for j in 0..d {
            let mut v = 0.0;
            for i in 0..d {
                v += c[i] as f64 * b[(i, j)];
            }
            let diff = x[j] - v;
            q += diff * diff;
        }
        if q <= radius_sq {
            out.push(q);
        }
    });
    out.sort_by(f64::total_cmp);
    out
}

/// Cartesian lattice vectors with `|v|² <= radius_sq`, paired with `|v|²`.
pub fn vectors_within(lat: &Lattice, radius_sq: f64) -> Vec<(Vec<f64>, f64)> {
    let d = lat.dim();
    let mut out = Vec::new();
    for_each_vector_near(lat, &vec![0.0; d], radius_sq, |c, _| {
        let v = lat.lattice_point(c);
        let q: f64 = v.iter().map(|t| t * t).sum();
        if q <= radius_sq * (1.0 + 1e-12) {
            out.push((v, q));
        }
    });
    out.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| a.0.partial_cmp(&b.0).unwrap())
    });
    out
}

/// All shells of `lat` with squared norm at most `max_norm`.
///
/// Parallelizes over the outermost coordinate; the result is independent of
/// the thread count.
pub fn enumerate_shells(lat: &Lattice, max_norm: f64, budget: f64) -> Result<ShellSeries> {
    if !(max_norm >= 0.0) {
        return Err(Error::OutOfRange(format!(
            "max_norm must be >= 0, got {max_norm}"
        )));
    }
    let d = lat.dim();
    let estimated = ball_volume(d, max_norm.sqrt()) / lat.covolume();
    if estimated > budget {
        return Err(Error::BudgetExceeded { estimated, budget });
    }
    let origin = vec![0.0; d];
    let tree = Tree::new(lat, &origin, max_norm);
    let top = d - 1;
    let c0 = vec![0i64; d];
    let (lo, hi, _) = tree.range(&c0, top, 0.0);
    let chunks: Vec<Vec<f64>> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let mut c = vec![0i64; d];
            let uii = tree.chol[(top, top)];
            let comp = uii * (k as f64 - tree.center[top]);
            let acc = comp * comp;
            let mut norms = Vec::new();
            if acc > max_norm * (1.0 + 1e-12) + 1e-12 {
                return norms;
            }
            c[top] = k;
            if top == 0 {
                norms.push(acc);
            } else {
                tree.walk(&mut c, top - 1, acc, &mut |_, q| norms.push(q));
            }
            norms
        })
        .collect();
    let norms: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(ShellSeries::from_norms(d, norms, max_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeName;

    fn counts(s: &ShellSeries) -> Vec<(f64, u128)> {
        s.entries.iter().map(|e| (e.norm, e.count)).collect()
    }

    #[test]
    fn z2_small_shells() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let s = enumerate_shells(&z2, 2.0, DEFAULT_BUDGET).unwrap();
        assert_eq!(counts(&s), vec![(0.0, 1), (1.0, 4), (2.0, 4)]);
        // Brute force over |x|,|y| <= 2.
        let mut brute = vec![];
        for x in -2i32..=2 {
            for y in -2i32..=2 {
                let q = (x * x + y * y) as f64;
                if q <= 2.0 {
                    brute.push(q);
                }
            }
        }
        assert_eq!(ShellSeries::from_norms(2, brute, 2.0), s);
    }

    #[test]
    fn a2_kissing_number() {
        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let m = 2.0 / 3f64.sqrt();
        let s = enumerate_shells(&a2, m, DEFAULT_BUDGET).unwrap();
        assert_eq!(s.entries.len(), 2);
        assert!((s.entries[1].norm - m).abs() < 1e-12);
        assert_eq!(s.entries[1].count, 6);
    }

    #[test]
    fn zero_radius_gives_origin() {
        for name in [LatticeName::A2, LatticeName::D4, LatticeName::E8] {
            let lat = Lattice::named(name).unwrap();
            let s = enumerate_shells(&lat, 0.0, DEFAULT_BUDGET).unwrap();
            assert_eq!(counts(&s), vec![(0.0, 1)]);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let z3 = Lattice::named(LatticeName::Z(3)).unwrap();
        let err = enumerate_shells(&z3, 1e4, 1e3).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn centered_distances() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let q = squared_distances_near(&z2, &[0.5, 0.5], 0.5 + 1e-12);
        assert_eq!(q.len(), 4);
        assert!(q.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }
}
