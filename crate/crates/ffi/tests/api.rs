use std::ffi::{CStr, CString};
use std::ptr;

use torus_energy_ffi::*;

fn named(name: &str) -> *mut TeLattice {
    let c = CString::new(name).unwrap();
    let mut lat = ptr::null_mut();
    assert_eq!(
        unsafe { te_lattice_named(c.as_ptr(), &mut lat) },
        TeStatus::Ok
    );
    assert!(!lat.is_null());
    lat
}

fn last_error() -> String {
    let p = te_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn e8_info() {
    let lat = named("E8");
    let (mut cov, mut min) = (0.0, 0.0);
    unsafe {
        assert_eq!(te_lattice_dim(lat), 8);
        assert_eq!(te_lattice_info(lat, &mut cov, &mut min), TeStatus::Ok);
        te_lattice_free(lat);
    }
    assert!((cov - 1.0).abs() < 1e-12);
    assert!((min - 2.0).abs() < 1e-12);
}

#[test]
fn madelung_orders_a2_below_z2() {
    let (a2, z2) = (named("A2"), named("Z2"));
    let (mut ma, mut mz, mut err) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(te_madelung(a2, 1, 1.0, &mut ma, &mut err), TeStatus::Ok);
        assert!(err < 1e-10);
        assert_eq!(
            te_madelung(z2, 1, 1.0, &mut mz, ptr::null_mut()),
            TeStatus::Ok
        );
        te_lattice_free(a2);
        te_lattice_free(z2);
    }
    assert!(ma < mz);
}

#[test]
fn zeta_of_z2_at_four() {
    let lat = named("Z2");
    let mut v = 0.0;
    unsafe {
        assert_eq!(
            te_epstein_zeta(lat, 4.0, ptr::null(), 0, &mut v, ptr::null_mut()),
            TeStatus::Ok
        );
        te_lattice_free(lat);
    }
    assert!((v - 6.026_812_032_2).abs() < 1e-7, "{v}");
}

#[test]
fn basis_constructor_and_green() {
    let basis = [1.0, 0.0, 0.0, 1.0];
    let mut lat = ptr::null_mut();
    let mut g = 0.0;
    let mut sym = 0.0;
    unsafe {
        assert_eq!(
            te_lattice_from_basis(2, basis.as_ptr(), &mut lat),
            TeStatus::Ok
        );
        let x = [0.3, 0.1];
        assert_eq!(
            te_green(lat, 2, 1.0, x.as_ptr(), 2, &mut g, ptr::null_mut()),
            TeStatus::Ok
        );
        let y = [-0.3, -0.1];
        assert_eq!(
            te_green(lat, 2, 1.0, y.as_ptr(), 2, &mut sym, ptr::null_mut()),
            TeStatus::Ok
        );
        te_lattice_free(lat);
    }
    assert!((g - sym).abs() < 1e-13);
}

#[test]
fn energy_with_gradient() {
    let lat = named("A2");
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(te_energy_model_new(lat, 2, 1.0, &mut model), TeStatus::Ok);
        assert_eq!(te_energy_model_points(model), 4);
        let pts = [0.1, 0.2, 1.1, 0.3, 0.4, 1.2, 1.3, 1.4];
        let mut e = 0.0;
        let mut grad = [f64::NAN; 8];
        assert_eq!(
            te_energy(model, pts.as_ptr(), 4, &mut e, grad.as_mut_ptr()),
            TeStatus::Ok
        );
        assert!(e.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
        // The gradient sums to zero by translation invariance.
        let sx: f64 = grad.iter().step_by(2).sum();
        assert!(sx.abs() < 1e-10);
        te_energy_model_free(model);
        te_lattice_free(lat);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("Q7").unwrap();
    let mut lat = ptr::null_mut();
    assert_eq!(
        unsafe { te_lattice_named(bad.as_ptr(), &mut lat) },
        TeStatus::InvalidArgument
    );
    assert!(last_error().contains("Q7"));
    assert_eq!(
        unsafe { te_lattice_named(ptr::null(), &mut lat) },
        TeStatus::NullPointer
    );
    let mut c = 0.0;
    assert_eq!(
        unsafe { te_riesz_constant(3, 3.0, &mut c) },
        TeStatus::InvalidArgument
    );
    let z2 = named("Z2");
    let mut v = 0.0;
    assert_eq!(
        unsafe { te_epstein_zeta(z2, 2.0, ptr::null(), 0, &mut v, ptr::null_mut()) },
        TeStatus::InvalidArgument
    );
    assert!(!te_last_error().is_null());
    assert_eq!(unsafe { te_riesz_constant(3, 1.0, &mut c) }, TeStatus::Ok);
    assert!(te_last_error().is_null());
    unsafe {
        te_lattice_free(z2);
        te_lattice_free(ptr::null_mut());
    }
}

#[test]
fn jellium_single_point() {
    let pts = [0.0, 0.0];
    let mut v = 0.0;
    assert_eq!(
        unsafe { te_jellium_energy(2, 0.0, 1.0, pts.as_ptr(), 1, &mut v) },
        TeStatus::Ok
    );
    assert!(v.is_finite() && v < 0.0);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(te_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
