//! Lattices, named lattices at covolume 1, duals, and torus reduction.

mod enumerate;
mod named;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

pub use enumerate::{
    ball_volume, enumerate_shells, for_each_row_near, for_each_vector_near, squared_distances_near,
    top_coefficient_range, vectors_within, DEFAULT_BUDGET,
};
pub use named::golay_generator;

/// Lattices whose theta series is available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModularFamily {
    /// ℤᵈ: theta series θ₃(q)ᵈ, norms are the exponents.
    Z(usize),
    /// E₈: theta series E₄, norm 2n at exponent n.
    E8,
    /// Leech: theta series E₄³ − 720Δ, norm 2n at exponent n.
    Leech,
}

/// A lattice Λ ⊂ ℝᵈ given by a basis whose rows are the generators.
#[derive(Debug, Clone)]
pub struct Lattice {
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    inverse: DMatrix<f64>,
    dual_basis: DMatrix<f64>,
    cholesky: DMatrix<f64>,
    covolume: f64,
    modular: Option<(ModularFamily, f64)>,
    name: Option<String>,
}

impl Lattice {
    /// Builds a lattice from a square basis (rows are generators).
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = basis.shape();
        if rows != cols || rows == 0 {
            return Err(Error::BadShape { rows, cols });
        }
        let det = basis.clone().lu().determinant();
        let sv = basis.clone().singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if !det.is_finite() || !(smin > 1e-12 * smax) {
            return Err(Error::SingularBasis { det });
        }
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or(Error::SingularBasis { det })?;
        let dual_basis = inverse.transpose();
        let gram = &basis * basis.transpose();
        let cholesky = gram
            .clone()
            .cholesky()
            .ok_or(Error::SingularBasis { det })?
            .l();
        Ok(Self {
            basis,
            gram,
            inverse,
            dual_basis,
            cholesky,
            covolume: det.abs(),
            modular: None,
            name: None,
        })
    }

    /// Builds a lattice from basis rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::BadShape { rows: 0, cols: 0 });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::BadShape {
                rows: d,
                cols: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(d, d, &flat))
    }

    /// One of the named lattices, scaled to covolume 1.
    pub fn named(name: LatticeName) -> Result<Self> {
        named::build(name)
    }

    pub(crate) fn with_tags(
        mut self,
        modular: Option<(ModularFamily, f64)>,
        name: Option<String>,
    ) -> Self {
        self.modular = modular;
        self.name = name;
        self
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
    pub fn covolume(&self) -> f64 {
        self.covolume
    }
    pub fn dual_basis(&self) -> &DMatrix<f64> {
        &self.dual_basis
    }
    /// Lower-triangular Cholesky factor of the Gram matrix.
    pub(crate) fn cholesky(&self) -> &DMatrix<f64> {
        &self.cholesky
    }
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    /// Closed-form theta family and the factor applied to its norms.
    pub fn modular(&self) -> Option<(ModularFamily, f64)> {
        self.modular
    }

    /// The dual lattice Λ* = {w : w·v ∈ ℤ for all v ∈ Λ}.
    pub fn dual(&self) -> Lattice {
        let dual = Lattice::new(self.dual_basis.clone()).expect("dual of a valid lattice is valid");
        // ℤᵈ, E₈ and Leech are unimodular and self-dual; scaling inverts.
        let modular = self.modular.map(|(f, scale)| (f, 1.0 / scale));
        let name = self.name.as_ref().map(|n| format!("{n}*"));
        dual.with_tags(modular, name)
    }

    /// The lattice `factor · Λ`.
    pub fn scaled(&self, factor: f64) -> Lattice {
        let lat =
            Lattice::new(&self.basis * factor).expect("nonzero scaling keeps the basis regular");
        let modular = self.modular.map(|(f, scale)| (f, scale * factor * factor));
        let name = self.name.as_ref().map(|n| {
            if factor == 1.0 {
                n.clone()
            } else {
                format!("{factor}·{n}")
            }
        });
        lat.with_tags(modular, name)
    }

    /// Coefficients `c` with `x = Σ cᵢ bᵢ`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(x.len(), d, "point dimension");
        (0..d)
            .map(|j| (0..d).map(|i| x[i] * self.inverse[(i, j)]).sum())
            .collect()
    }

    /// The point `Σ cᵢ bᵢ`.
    pub fn point(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(coeffs.len(), d, "coefficient dimension");
        (0..d)
            .map(|j| (0..d).map(|i| coeffs[i] * self.basis[(i, j)]).sum())
            .collect()
    }

    /// Integer combination of the basis rows.
    pub fn lattice_point(&self, coeffs: &[i64]) -> Vec<f64> {
        let c: Vec<f64> = coeffs.iter().map(|&k| k as f64).collect();
        self.point(&c)
    }

    /// Representative of `x` modulo `nΛ` in the half-open parallelepiped
    /// spanned by the rows of `n · basis`.
    pub fn reduce_to_cell(&self, x: &[f64], n: u32) -> Vec<f64> {
        let nf = n as f64;
        let coeffs: Vec<f64> = self
            .coordinates(x)
            .into_iter()
            .map(|c| {
                let u = c / nf;
                let mut f = u - u.floor();
                if f >= 1.0 {
                    f = 0.0;
                }
                if f.abs() < 1e-15 {
                    f = 0.0;
                }
                f * nf
            })
            .collect();
        self.point(&coeffs)
    }

    /// Upper bound on the distance from any point of ℝᵈ to the nearest lattice
    /// point, `½ Σ |bᵢ|` (the circumradius of the centered parallelepiped).
    pub fn cell_radius(&self) -> f64 {
        0.5 * self.basis.row_iter().map(|r| r.norm()).sum::<f64>()
    }

    /// Squared length of the shortest nonzero vector.
    pub fn minimal_norm(&self) -> f64 {
        let mut r2 = self
            .basis
            .row_iter()
            .map(|r| r.norm_squared())
            .fold(f64::INFINITY, f64::min);
        let mut best = r2;
        for_each_vector_near(self, &vec![0.0; self.dim()], r2 * (1.0 + 1e-12), |_, q| {
            if q > 1e-12 && q < best {
                best = q;
            }
        });
        r2 = best;
        r2
    }

    /// Parses the plain-text lattice format: first line `d`, then `d` lines of
    /// `d` numbers (basis rows).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let d: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty lattice file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("dimension: {e}")))?;
        let mut rows = Vec::with_capacity(d);
        for i in 0..d {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing basis row {i}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != d {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after basis rows".into()));
        }
        Self::from_rows(&rows)
    }

    /// Serializes in the plain-text lattice format.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut out = format!("{d}\n");
        for i in 0..d {
            let row: Vec<String> = (0..d)
                .map(|j| format!("{:.17e}", self.basis[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// The named lattices, normalized to covolume 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LatticeName {
    Z(usize),
    A2,
    D4,
    E8,
    Leech,
}

impl LatticeName {
    pub fn dim(&self) -> usize {
        match self {
            LatticeName::Z(d) => *d,
            LatticeName::A2 => 2,
            LatticeName::D4 => 4,
            LatticeName::E8 => 8,
            LatticeName::Leech => 24,
        }
    }
}

impl fmt::Display for LatticeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeName::Z(d) => write!(f, "Z{d}"),
            LatticeName::A2 => f.write_str("A2"),
            LatticeName::D4 => f.write_str("D4"),
            LatticeName::E8 => f.write_str("E8"),
            LatticeName::Leech => f.write_str("Leech"),
        }
    }
}

impl FromStr for LatticeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        let lower = key.to_ascii_lowercase();
        match lower.as_str() {
            "a2" | "triangular" | "hexagonal" => return Ok(LatticeName::A2),
            "d4" => return Ok(LatticeName::D4),
            "e8" => return Ok(LatticeName::E8),
            "leech" | "lambda24" => return Ok(LatticeName::Leech),
            _ => {}
        }
        let digits = lower
            .strip_prefix("zd(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix('z'));
        if let Some(d) = digits.and_then(|t| t.parse::<usize>().ok()) {
            if (1..=24).contains(&d) {
                return Ok(LatticeName::Z(d));
            }
        }
        Err(Error::UnknownLattice(key.to_string()))
    }
}

/// A theta-series prefix: `(norm, count)` for every norm up to `max_norm`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellSeries {
    pub dim: usize,
    pub entries: Vec<Shell>,
    /// All vectors with squared norm up to this bound are counted.
    pub max_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shell {
    pub norm: f64,
    pub count: u128,
}

impl ShellSeries {
    pub fn total_count(&self) -> u128 {
        self.entries.iter().map(|s| s.count).sum()
    }

    /// Shells with `norm <= max_norm`.
    pub fn truncated(&self, max_norm: f64) -> ShellSeries {
        let tol = 1e-9 * max_norm.max(1.0);
        ShellSeries {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|s| s.norm <= max_norm + tol)
                .collect(),
            max_norm: max_norm.min(self.max_norm),
        }
    }

    /// Whether two series agree shell by shell (norms within `tol`, exact
    /// counts).
    pub fn same_shells(&self, other: &ShellSeries, tol: f64) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.count == b.count && (a.norm - b.norm).abs() <= tol * a.norm.max(1.0)
            })
    }

    /// Groups squared norms (any order) into shells.
    pub fn from_norms(dim: usize, mut norms: Vec<f64>, max_norm: f64) -> ShellSeries {
        norms.sort_by(f64::total_cmp);
        let mut entries: Vec<Shell> = Vec::new();
        for q in norms {
            let q = if q.abs() < 1e-12 { 0.0 } else { q };
            match entries.last_mut() {
                Some(last) if (q - last.norm).abs() <= 1e-9 * last.norm.max(1.0) => last.count += 1,
                _ => entries.push(Shell { norm: q, count: 1 }),
            }
        }
        ShellSeries {
            dim,
            entries,
            max_norm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewed_bases_are_not_singular() {
        let lat = Lattice::from_rows(&[vec![1.0, 0.0], vec![1e6, 1.0]]).unwrap();
        assert!((lat.covolume() - 1.0).abs() < 1e-9);
        let leech = Lattice::named(LatticeName::Leech).unwrap();
        assert!((leech.dual().covolume() - 1.0).abs() < 1e-9);
        assert!(Lattice::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }

    #[test]
    fn identity_lattice() {
        let lat = Lattice::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(lat.covolume(), 1.0);
        assert_eq!(lat.gram(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn triangular_basis_has_unit_covolume() {
        let a = (2.0 / 3f64.sqrt()).sqrt();
        let lat =
            Lattice::from_rows(&[vec![a, 0.0], vec![a / 2.0, a * 3f64.sqrt() / 2.0]]).unwrap();
        assert!((lat.covolume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_basis_rejected() {
        let err = Lattice::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::SingularBasis { .. }));
        let err = Lattice::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, Error::SingularBasis { .. }));
    }

    #[test]
    fn dual_is_inverse_transpose() {
        let lat = Lattice::named(LatticeName::A2).unwrap();
        let prod = lat.basis() * lat.dual_basis().transpose();
        assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        let dd = lat.dual().dual();
        assert!((dd.basis() - lat.basis()).amax() < 1e-12);
        assert!((lat.dual().covolume() * lat.covolume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn names_parse() {
        assert_eq!("Z3".parse::<LatticeName>().unwrap(), LatticeName::Z(3));
        assert_eq!("Zd(24)".parse::<LatticeName>().unwrap(), LatticeName::Z(24));
        assert_eq!("leech".parse::<LatticeName>().unwrap(), LatticeName::Leech);
        assert!("Z25".parse::<LatticeName>().is_err());
        assert!("B7".parse::<LatticeName>().is_err());
    }

    #[test]
    fn reduce_examples() {
        let z2 = Lattice::named(LatticeName::Z(2)).unwrap();
        let r = z2.reduce_to_cell(&[1.25, -0.5], 1);
        assert!((r[0] - 0.25).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);

        let a2 = Lattice::named(LatticeName::A2).unwrap();
        let v = a2.lattice_point(&[4, -6]);
        let r = a2.reduce_to_cell(&v, 2);
        assert!(r.iter().all(|c| c.abs() < 1e-10), "{r:?}");

        // coefficients (2.3, -0.7) in the basis → (0.3, 1.3) modulo 2
        let x = a2.point(&[2.3, -0.7]);
        let r = a2.reduce_to_cell(&x, 2);
        let c = a2.coordinates(&r);
        assert!(
            (c[0] - 0.3).abs() < 1e-12 && (c[1] - 1.3).abs() < 1e-12,
            "{c:?}"
        );
    }

    #[test]
    fn text_format_round_trip() {
        let lat = Lattice::named(LatticeName::A2).unwrap();
        let back = Lattice::parse(&lat.to_text()).unwrap();
        assert!((back.basis() - lat.basis()).amax() < 1e-15);
        assert!(Lattice::parse("2\n1 0\n").is_err());
        assert!(Lattice::parse("2\n1 0 0\n0 1\n").is_err());
    }
}
