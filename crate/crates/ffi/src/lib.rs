//! C ABI for `torus-energy`.
//!
//! Objects are opaque handles created by `*_new`/constructor functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`TeStatus`]; on failure [`te_last_error`] describes the cause.
//!
//! Arrays of points are row-major: `count × d` doubles.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use torus_energy::energy::{EnergyModel, TorusConfiguration};
use torus_energy::green::{epstein_zeta, epstein_zeta_punctured, madelung, EwaldGreen, Torus};
use torus_energy::jellium::jellium_parts;
use torus_energy::kernels::riesz_constant;
use torus_energy::{Error, Lattice, LatticeName, RieszParams};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    BudgetExceeded = 4,
    Panic = 5,
}

/// A lattice of covolume 1 (or as given by its basis).
pub struct TeLattice(Lattice);

/// A torus ℝᵈ/(nΛ) with a Riesz exponent, prepared for energy evaluation.
pub struct TeEnergyModel {
    torus: Torus,
    model: EnergyModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TeStatus {
    match e {
        Error::BudgetExceeded { .. } => TeStatus::BudgetExceeded,
        Error::SingularBasis { .. }
        | Error::BadShape { .. }
        | Error::UnknownLattice(_)
        | Error::DimensionMismatch { .. }
        | Error::NonPositiveDistance(_)
        | Error::NonPositiveTime(_)
        | Error::OutOfRange(_)
        | Error::OnLattice(_)
        | Error::Pole(_)
        | Error::LogUnsupported
        | Error::Parse(_)
        | Error::CoincidentPoints { .. } => TeStatus::InvalidArgument,
        _ => TeStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> TeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TeStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            TeStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TeStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(p: *mut T, v: T) {
    if !p.is_null() {
        *p = v;
    }
}

fn rows(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    flat.chunks(d).map(<[f64]>::to_vec).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn te_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn te_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Named lattice (`"Z3"`, `"A2"`, `"D4"`, `"E8"`, `"Leech"`) at covolume 1.
#[no_mangle]
pub unsafe extern "C" fn te_lattice_named(
    name: *const c_char,
    out: *mut *mut TeLattice,
) -> TeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|e| Error::Parse(e.to_string()))?;
        let lat = Lattice::named(name.parse::<LatticeName>()?)?;
        *out = Box::into_raw(Box::new(TeLattice(lat)));
        Ok(())
    })
}

/// Lattice from `d` row-major basis rows (`d × d` doubles).
#[no_mangle]
pub unsafe extern "C" fn te_lattice_from_basis(
    d: usize,
    basis: *const f64,
    out: *mut *mut TeLattice,
) -> TeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let flat = slice(basis, d * d, "basis")?;
        if d == 0 {
            return Err(Error::BadShape { rows: 0, cols: 0 }.into());
        }
        *out = Box::into_raw(Box::new(TeLattice(Lattice::from_rows(&rows(flat, d))?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn te_lattice_free(lat: *mut TeLattice) {
    if !lat.is_null() {
        drop(Box::from_raw(lat));
    }
}

/// Dimension, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn te_lattice_dim(lat: *const TeLattice) -> usize {
    lat.as_ref().map_or(0, |l| l.0.dim())
}

/// Covolume and minimal squared norm; either output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn te_lattice_info(
    lat: *const TeLattice,
    covolume: *mut f64,
    minimal_norm: *mut f64,
) -> TeStatus {
    guard(|| {
        let l = &deref(lat, "lattice")?.0;
        write(covolume, l.covolume());
        write(minimal_norm, l.minimal_norm());
        Ok(())
    })
}

/// `c_{d,s}` with `(−Δ)^α g = c_{d,s} δ₀`.
#[no_mangle]
pub unsafe extern "C" fn te_riesz_constant(d: usize, s: f64, out: *mut f64) -> TeStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = riesz_constant(d, s)?;
        Ok(())
    })
}

/// Madelung constant of ℝᵈ/(nΛ) for exponent `s` (0 in d = 2 is the log
/// kernel).
#[no_mangle]
pub unsafe extern "C" fn te_madelung(
    lat: *const TeLattice,
    n: u32,
    s: f64,
    value: *mut f64,
    error: *mut f64,
) -> TeStatus {
    guard(|| {
        let l = &deref(lat, "lattice")?.0;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let m = madelung(l, n, &RieszParams::new(l.dim(), s)?)?;
        write(value, m.value);
        write(error, m.abs_error_estimate);
        Ok(())
    })
}

/// Periodic Green function of ℝᵈ/(nΛ) at `x` (length `d`), Ewald route.
#[no_mangle]
pub unsafe extern "C" fn te_green(
    lat: *const TeLattice,
    n: u32,
    s: f64,
    x: *const f64,
    len: usize,
    value: *mut f64,
    error: *mut f64,
) -> TeStatus {
    guard(|| {
        let l = &deref(lat, "lattice")?.0;
        let x = slice(x, len, "x")?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let torus = Torus::new(l, n)?;
        let g = EwaldGreen::new(&torus, &RieszParams::new(l.dim(), s)?)?.eval(x)?;
        write(value, g.value);
        write(error, g.abs_error_estimate);
        Ok(())
    })
}

/// Epstein zeta `Σ_v |x+v|^{−s}`; with `x = NULL` the sum over `Λ \ 0`.
#[no_mangle]
pub unsafe extern "C" fn te_epstein_zeta(
    lat: *const TeLattice,
    s: f64,
    x: *const f64,
    len: usize,
    value: *mut f64,
    error: *mut f64,
) -> TeStatus {
    guard(|| {
        let l = &deref(lat, "lattice")?.0;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let z = if x.is_null() {
            epstein_zeta_punctured(l, s)?
        } else {
            epstein_zeta(l, s, slice(x, len, "x")?)?
        };
        write(value, z.value);
        write(error, z.abs_error_estimate);
        Ok(())
    })
}

/// Energy model on ℝᵈ/(nΛ) for exponent `s`.
#[no_mangle]
pub unsafe extern "C" fn te_energy_model_new(
    lat: *const TeLattice,
    n: u32,
    s: f64,
    out: *mut *mut TeEnergyModel,
) -> TeStatus {
    guard(|| {
        let l = &deref(lat, "lattice")?.0;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let torus = Torus::new(l, n)?;
        let model = EnergyModel::new(&torus, &RieszParams::new(l.dim(), s)?)?;
        *out = Box::into_raw(Box::new(TeEnergyModel { torus, model }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn te_energy_model_free(model: *mut TeEnergyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of points `nᵈ` of a density-one configuration, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn te_energy_model_points(model: *const TeEnergyModel) -> usize {
    model.as_ref().map_or(0, |m| m.torus.points())
}

/// Periodic energy of `count` points (`count × d` doubles). When `gradient`
/// is not NULL it receives `count × d` partial derivatives.
#[no_mangle]
pub unsafe extern "C" fn te_energy(
    model: *const TeEnergyModel,
    points: *const f64,
    count: usize,
    value: *mut f64,
    gradient: *mut f64,
) -> TeStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let d = m.torus.dim();
        let flat = slice(points, count * d, "points")?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let config = TorusConfiguration::on(&m.torus, rows(flat, d))?;
        let report = if gradient.is_null() {
            m.model.energy(&config)?
        } else {
            m.model.energy_and_gradient(&config)?
        };
        *value = report.value;
        if let Some(g) = report.gradient {
            let out = std::slice::from_raw_parts_mut(gradient, count * d);
            for (dst, src) in out.iter_mut().zip(g.iter().flatten()) {
                *dst = *src;
            }
        }
        Ok(())
    })
}

/// Jellium bracket for `count` points in `[−R/2, R/2]ᵈ`.
#[no_mangle]
pub unsafe extern "C" fn te_jellium_energy(
    d: usize,
    s: f64,
    r: f64,
    points: *const f64,
    count: usize,
    value: *mut f64,
) -> TeStatus {
    guard(|| {
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        let params = RieszParams::new(d, s)?;
        let flat = slice(points, count * d, "points")?;
        *value = jellium_parts(&params, r, &rows(flat, d), 1e-11)?.bracket;
        Ok(())
    })
}
