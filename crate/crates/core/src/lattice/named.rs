//! Generator matrices of ℤᵈ, A₂, D₄, E₈ and the Leech lattice.

use nalgebra::DMatrix;

use super::{Lattice, LatticeName, ModularFamily};
use crate::error::{Error, Result};

/// Generator polynomial x¹¹+x¹⁰+x⁶+x⁵+x⁴+x²+1 of the cyclic binary Golay
/// code of length 23; bit i is the coefficient of xⁱ.
const GOLAY_POLY: u32 = 0xC75;

/// The 12×24 generator matrix of the extended binary Golay code: cyclic shifts
/// of the generator polynomial, extended by an overall parity bit. Bit `j` of
/// row `i` is entry `(i, j)`.
pub fn golay_generator() -> [u32; 12] {
    let mut rows = [0u32; 12];
    for (i, row) in rows.iter_mut().enumerate() {
        let word = GOLAY_POLY << i;
        let parity = word.count_ones() & 1;
        *row = word | (parity << 23);
    }
    rows
}

pub(super) fn build(name: LatticeName) -> Result<Lattice> {
    let label = Some(name.to_string());
    match name {
        LatticeName::Z(d) => {
            if !(1..=24).contains(&d) {
                return Err(Error::UnknownLattice(format!("Z{d}")));
            }
            Ok(Lattice::new(DMatrix::identity(d, d))?
                .with_tags(Some((ModularFamily::Z(d), 1.0)), label))
        }
        LatticeName::A2 => {
            let a = (2.0 / 3f64.sqrt()).sqrt();
            let b = DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.5 * a, 0.5 * a * 3f64.sqrt()]);
            Ok(Lattice::new(b)?.with_tags(None, label))
        }
        LatticeName::D4 => {
            #[rustfmt::skip]
            let rows = [
                1.0, -1.0, 0.0, 0.0,
                0.0, 1.0, -1.0, 0.0,
                0.0, 0.0, 1.0, -1.0,
                0.0, 0.0, 1.0, 1.0,
            ];
            // covolume 2 → scale by 2^{-1/4}
            let b = DMatrix::from_row_slice(4, 4, &rows) * 2f64.powf(-0.25);
            Ok(Lattice::new(b)?.with_tags(None, label))
        }
        LatticeName::E8 => {
            // D₈ together with the glue vector (½,…,½).
            let mut b = DMatrix::zeros(8, 8);
            b[(0, 0)] = 2.0;
            for i in 1..7 {
                b[(i, i - 1)] = -1.0;
                b[(i, i)] = 1.0;
            }
            for j in 0..8 {
                b[(7, j)] = 0.5;
            }
            Ok(Lattice::new(b)?.with_tags(Some((ModularFamily::E8, 1.0)), label))
        }
        LatticeName::Leech => {
            let int_basis = leech_integer_basis();
            let scale = 1.0 / 8f64.sqrt();
            let flat: Vec<f64> = int_basis
                .iter()
                .flatten()
                .map(|&v| v as f64 * scale)
                .collect();
            let b = DMatrix::from_row_slice(24, 24, &flat);
            Ok(Lattice::new(b)?.with_tags(Some((ModularFamily::Leech, 1.0)), label))
        }
    }
}

/// Basis of √8·Λ₂₄ ⊂ ℤ²⁴ obtained by echelon reduction of the generating set
/// {2c : c Golay generator} ∪ {4(eᵢ ∓ eᵢ₊₁)} ∪ {(-3, 1²³)}.
fn leech_integer_basis() -> Vec<Vec<i128>> {
    let mut gens: Vec<Vec<i128>> = Vec::new();
    for row in golay_generator() {
        gens.push((0..24).map(|j| 2 * ((row >> j) & 1) as i128).collect());
    }
    for i in 0..23 {
        let mut v = vec![0i128; 24];
        v[i] = 4;
        v[i + 1] = -4;
        gens.push(v);
    }
    let mut v = vec![0i128; 24];
    v[22] = 4;
    v[23] = 4;
    gens.push(v);
    let mut odd = vec![1i128; 24];
    odd[0] = -3;
    gens.push(odd);
    hermite_rows(gens, 24)
}

/// Row-style Hermite normal form of an integer generating set of full rank.
fn hermite_rows(mut rows: Vec<Vec<i128>>, d: usize) -> Vec<Vec<i128>> {
    for col in 0..d {
        loop {
            let best = (col..rows.len())
                .filter(|&r| rows[r][col] != 0)
                .min_by_key(|&r| rows[r][col].abs());
            let Some(best) = best else { break };
            rows.swap(col, best);
            let p = rows[col][col];
            let mut done = true;
            for r in col + 1..rows.len() {
                let q = rows[r][col].div_euclid(p);
                if q != 0 {
                    for k in col..d {
                        rows[r][k] -= q * rows[col][k];
                    }
                }
                if rows[r][col] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows[col][col] < 0 {
            for k in col..d {
                rows[col][k] = -rows[col][k];
            }
        }
    }
    rows.truncate(d);
    // Reduce entries above each pivot.
    for p in 0..d {
        let piv = rows[p][p];
        for r in 0..p {
            let q = rows[r][p].div_euclid(piv);
            if q != 0 {
                for k in p..d {
                    rows[r][k] -= q * rows[p][k];
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golay_weight_distribution() {
        let g = golay_generator();
        let mut dist = [0u32; 25];
        for m in 0u32..4096 {
            let mut w = 0u32;
            for (i, row) in g.iter().enumerate() {
                if m >> i & 1 == 1 {
                    w ^= row;
                }
            }
            dist[w.count_ones() as usize] += 1;
        }
        assert_eq!(dist[0], 1);
        assert_eq!(dist[8], 759);
        assert_eq!(dist[12], 2576);
        assert_eq!(dist[16], 759);
        assert_eq!(dist[24], 1);
        assert_eq!(dist.iter().sum::<u32>(), 4096);
    }

    #[test]
    fn leech_integer_determinant() {
        let b = leech_integer_basis();
        let det: i128 = (0..24).map(|i| b[i][i]).product();
        assert_eq!(det, 1i128 << 36);
        for i in 0..24 {
            for j in 0..i {
                assert_eq!(b[i][j], 0);
            }
        }
    }

    #[test]
    fn named_covolumes() {
        for name in [
            LatticeName::Z(3),
            LatticeName::A2,
            LatticeName::D4,
            LatticeName::E8,
            LatticeName::Leech,
        ] {
            let lat = Lattice::named(name).unwrap();
            assert!(
                (lat.covolume() - 1.0).abs() < 1e-12,
                "{name}: {}",
                lat.covolume()
            );
            assert_eq!(lat.dim(), name.dim());
        }
    }

    #[test]
    fn a2_generators_equal_length_at_sixty_degrees() {
        let lat = Lattice::named(LatticeName::A2).unwrap();
        let g = lat.gram();
        assert!((g[(0, 0)] - g[(1, 1)]).abs() < 1e-15);
        let cos = g[(0, 1)] / g[(0, 0)];
        assert!((cos - 0.5).abs() < 1e-15);
        assert!((lat.minimal_norm() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    }
}
