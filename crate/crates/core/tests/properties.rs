use proptest::prelude::*;

use torus_energy::energy::{periodic_energy, TorusConfiguration};
use torus_energy::green::{EwaldGreen, Torus};
use torus_energy::jellium::background_potential;
use torus_energy::kernels::upper_incomplete_gamma;
use torus_energy::{Lattice, LatticeName, RieszParams};

fn a2() -> Lattice {
    Lattice::named(LatticeName::A2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_is_idempotent_and_stays_in_cell(c0 in -9.0f64..9.0, c1 in -9.0f64..9.0, n in 1u32..4) {
        let lat = a2();
        let x = lat.point(&[c0, c1]);
        let y = lat.reduce_to_cell(&x, n);
        let coeffs = lat.coordinates(&y);
        prop_assert!(coeffs.iter().all(|&c| (-1e-12..n as f64 + 1e-12).contains(&c)));
        let z = lat.reduce_to_cell(&y, n);
        prop_assert!(y.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn green_is_even_and_periodic(c0 in 0.05f64..0.95, c1 in 0.05f64..0.95, s in prop::sample::select(vec![0.0, 0.5, 1.0, 1.5])) {
        let lat = a2();
        let torus = Torus::new(&lat, 1).unwrap();
        let x = lat.point(&[c0, c1]);
        prop_assume!(torus.distance_to_lattice(&x) > 0.05);
        let g = EwaldGreen::new(&torus, &RieszParams::new(2, s).unwrap()).unwrap();
        let v = g.eval(&x).unwrap().value;
        let minus: Vec<f64> = x.iter().map(|t| -t).collect();
        let shifted = lat.point(&[c0 + 3.0, c1 - 2.0]);
        prop_assert!((g.eval(&minus).unwrap().value - v).abs() < 1e-11 * v.abs().max(1.0));
        prop_assert!((g.eval(&shifted).unwrap().value - v).abs() < 1e-11 * v.abs().max(1.0));
    }

    #[test]
    fn energy_is_translation_invariant(seed in 0u64..1000, t0 in -2.0f64..2.0, t1 in -2.0f64..2.0) {
        use rand::SeedableRng;
        let lat = a2();
        let torus = Torus::new(&lat, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let config = TorusConfiguration::random(&torus, 4, &mut rng).unwrap();
        prop_assume!(config.min_pair_distance().unwrap().2 > 1e-3);
        let p = RieszParams::new(2, 1.0).unwrap();
        let e = periodic_energy(&config, &p).unwrap().value;
        let moved = periodic_energy(&config.translated(&[t0, t1]).unwrap(), &p).unwrap().value;
        prop_assert!((e - moved).abs() < 1e-10 * e.abs().max(1.0));
    }

    #[test]
    fn incomplete_gamma_recurrence(a in -2.5f64..5.0, x in 0.05f64..20.0) {
        let lhs = upper_incomplete_gamma(a + 1.0, x).unwrap();
        let rhs = a * upper_incomplete_gamma(a, x).unwrap() + x.powf(a) * (-x).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn background_potential_has_cube_symmetry(x0 in -0.5f64..0.5, x1 in -0.5f64..0.5) {
        let p = RieszParams::new(2, 0.0).unwrap();
        let v = background_potential(&p, 1.0, &[x0, x1], 1e-12).unwrap();
        for y in [[-x0, x1], [x0, -x1], [x1, x0]] {
            prop_assert!((background_potential(&p, 1.0, &y, 1e-12).unwrap() - v).abs() < 1e-10);
        }
    }
}
