//! C ABI for `casimir-sphere`.
//!
//! Materials and geometries are opaque handles created and freed here. Every
//! fallible function returns a status code (`CS_OK` or a negative `CS_ERR_*`)
//! and writes results through out-pointers. After a failure,
//! `cs_last_error()` returns a message for the calling thread.
//!
//! ```c
//! CsMaterial *m = NULL;
//! CsGeometry *g = NULL;
//! CsStressSummary s;
//! cs_material_new(1.0, 1.0, &m);
//! cs_material_add_eps_pole(m, 1.0, 1.0, 0.1);
//! cs_geometry_new(&g);
//! cs_geometry_add_layer(g, 1.0, m);
//! CsStressOptions o = { 1e-6, 0.2, 512, 100000 };
//! if (cs_stress_finite_t(g, 0.1, &o, &s) != CS_OK)
//!     fprintf(stderr, "%s\n", cs_last_error());
//! cs_geometry_free(g);
//! cs_material_free(m);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use casimir_sphere::cli;
use casimir_sphere::materials::{eval_eps, eval_mu, LorentzPole, MaterialModel};
use casimir_sphere::mie::{layered_reflection, Layer, Polarization, SphereGeometry};
use casimir_sphere::stress::{stress_finite_t, stress_zero_t, StressOptions, StressResult};
use casimir_sphere::Error;
use num_complex::Complex64;

pub const CS_OK: i32 = 0;
pub const CS_ERR_NULL: i32 = -1;
pub const CS_ERR_DOMAIN: i32 = -2;
pub const CS_ERR_OVERFLOW: i32 = -3;
pub const CS_ERR_ORDER_CAP: i32 = -4;
pub const CS_ERR_INVALID_MATERIAL: i32 = -5;
pub const CS_ERR_GEOMETRY: i32 = -6;
pub const CS_ERR_DEGENERATE: i32 = -7;
pub const CS_ERR_SINGULAR: i32 = -8;
pub const CS_ERR_TAIL: i32 = -9;
pub const CS_ERR_QUADRATURE: i32 = -10;
pub const CS_ERR_ROOT: i32 = -11;
pub const CS_ERR_NON_CONVERGENCE: i32 = -12;
pub const CS_ERR_CONFIG: i32 = -13;
pub const CS_ERR_UTF8: i32 = -14;
pub const CS_ERR_PANIC: i32 = -99;

pub const CS_TE: i32 = 0;
pub const CS_TM: i32 = 1;

/// Material handle.
pub struct CsMaterial(MaterialModel);

/// Geometry handle: layers from the core outwards, vacuum outside.
pub struct CsGeometry(SphereGeometry);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for CsComplex {
    fn from(z: Complex64) -> Self {
        CsComplex { re: z.re, im: z.im }
    }
}

impl From<CsComplex> for Complex64 {
    fn from(z: CsComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsStressOptions {
    pub tol: f64,
    pub standoff: f64,
    pub l_cap: u64,
    pub n_cap: u64,
}

/// Summary of a stress evaluation. On `CS_ERR_NON_CONVERGENCE` it holds the
/// partial result with `converged = false`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsStressSummary {
    /// `T_RR` in `hbar c / R^4`.
    pub t_rr: f64,
    pub temperature: f64,
    pub tail_estimate: f64,
    pub l_max_used: u64,
    pub n_max_used: u64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => CS_ERR_DOMAIN,
        Error::Overflow { .. } => CS_ERR_OVERFLOW,
        Error::OrderCap { .. } => CS_ERR_ORDER_CAP,
        Error::InvalidMaterial(_) => CS_ERR_INVALID_MATERIAL,
        Error::Geometry(_) => CS_ERR_GEOMETRY,
        Error::DegenerateDenominator { .. } => CS_ERR_DEGENERATE,
        Error::SingularSystem { .. } => CS_ERR_SINGULAR,
        Error::TailTooLarge { .. } => CS_ERR_TAIL,
        Error::QuadratureFailure { .. } => CS_ERR_QUADRATURE,
        Error::RootNonConvergence { .. } => CS_ERR_ROOT,
        Error::NonConvergence { .. } => CS_ERR_NON_CONVERGENCE,
    }
}

fn fail(code: i32, msg: impl Into<String>) -> i32 {
    set_error(msg.into());
    code
}

fn fail_with(e: &Error) -> i32 {
    fail(code_of(e), e.to_string())
}

/// Runs `f`, turning a panic into `CS_ERR_PANIC`.
fn guard(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CS_ERR_PANIC, format!("internal panic: {msg}"))
        }
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cs_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New material with the given high-frequency limits and no poles.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cs_material_new(eps_infinity: f64, mu_infinity: f64, out: *mut *mut CsMaterial) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(CS_ERR_NULL, "out is NULL");
        }
        let m = MaterialModel {
            eps_infinity,
            mu_infinity,
            ..MaterialModel::vacuum()
        };
        if let Err(e) = m.validate() {
            return fail_with(&e);
        }
        *out = Box::into_raw(Box::new(CsMaterial(m)));
        CS_OK
    })
}

unsafe fn add_pole(m: *mut CsMaterial, pole: LorentzPole, magnetic: bool) -> i32 {
    guard(|| {
        let Some(m) = m.as_mut() else {
            return fail(CS_ERR_NULL, "material is NULL");
        };
        let mut next = m.0.clone();
        if magnetic {
            next.mu_poles.push(pole);
        } else {
            next.eps_poles.push(pole);
        }
        if let Err(e) = next.validate() {
            return fail_with(&e);
        }
        m.0 = next;
        CS_OK
    })
}

/// Adds `strength / (resonance^2 - w^2 - i damping w)` to the permittivity.
///
/// # Safety
/// `m` must be a live handle from `cs_material_new`.
#[no_mangle]
pub unsafe extern "C" fn cs_material_add_eps_pole(m: *mut CsMaterial, strength: f64, resonance: f64, damping: f64) -> i32 {
    add_pole(m, LorentzPole::new(strength, resonance, damping), false)
}

/// Adds a pole to the permeability.
///
/// # Safety
/// `m` must be a live handle from `cs_material_new`.
#[no_mangle]
pub unsafe extern "C" fn cs_material_add_mu_pole(m: *mut CsMaterial, strength: f64, resonance: f64, damping: f64) -> i32 {
    add_pole(m, LorentzPole::new(strength, resonance, damping), true)
}

unsafe fn eval_response(
    m: *const CsMaterial,
    omega: CsComplex,
    out: *mut CsComplex,
    f: fn(&MaterialModel, Complex64) -> casimir_sphere::Result<Complex64>,
) -> i32 {
    guard(|| {
        let (Some(m), false) = (m.as_ref(), out.is_null()) else {
            return fail(CS_ERR_NULL, "material or out is NULL");
        };
        match f(&m.0, omega.into()) {
            Ok(v) => {
                *out = v.into();
                CS_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Permittivity at complex frequency `omega` (upper half plane).
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_material_eps(m: *const CsMaterial, omega: CsComplex, out: *mut CsComplex) -> i32 {
    eval_response(m, omega, out, eval_eps)
}

/// Permeability at complex frequency `omega` (upper half plane).
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_material_mu(m: *const CsMaterial, omega: CsComplex, out: *mut CsComplex) -> i32 {
    eval_response(m, omega, out, eval_mu)
}

/// # Safety
/// `m` must be NULL or a handle from `cs_material_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_material_free(m: *mut CsMaterial) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Empty geometry in vacuum.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_geometry_new(out: *mut *mut CsGeometry) -> i32 {
    guard(|| {
        if out.is_null() {
            return fail(CS_ERR_NULL, "out is NULL");
        }
        *out = Box::into_raw(Box::new(CsGeometry(SphereGeometry {
            layers: Vec::new(),
            exterior: MaterialModel::vacuum(),
        })));
        CS_OK
    })
}

/// Appends a layer of outer radius `radius`; the material is copied.
///
/// # Safety
/// `g` and `m` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn cs_geometry_add_layer(g: *mut CsGeometry, radius: f64, m: *const CsMaterial) -> i32 {
    guard(|| {
        let (Some(g), Some(m)) = (g.as_mut(), m.as_ref()) else {
            return fail(CS_ERR_NULL, "geometry or material is NULL");
        };
        let mut next = g.0.clone();
        next.layers.push(Layer {
            radius,
            material: m.0.clone(),
        });
        if let Err(e) = next.validate() {
            return fail_with(&e);
        }
        g.0 = next;
        CS_OK
    })
}

/// # Safety
/// `g` must be NULL or a handle from `cs_geometry_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_geometry_free(g: *mut CsGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Reflection coefficient of partial wave `l` (`CS_TE` or `CS_TM`) seen from
/// outside.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_reflection(
    g: *const CsGeometry,
    l: u32,
    polarization: i32,
    omega: CsComplex,
    out: *mut CsComplex,
) -> i32 {
    guard(|| {
        let (Some(g), false) = (g.as_ref(), out.is_null()) else {
            return fail(CS_ERR_NULL, "geometry or out is NULL");
        };
        let pol = match polarization {
            CS_TE => Polarization::TE,
            CS_TM => Polarization::TM,
            p => return fail(CS_ERR_DOMAIN, format!("polarization {p} is neither CS_TE nor CS_TM")),
        };
        match layered_reflection(&g.0, l as usize, pol, omega.into()) {
            Ok(r) => {
                *out = r.value.into();
                CS_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

fn options(o: Option<&CsStressOptions>) -> StressOptions {
    match o {
        None => StressOptions::default(),
        Some(o) => StressOptions {
            tol: o.tol,
            standoff: o.standoff,
            l_cap: usize::try_from(o.l_cap).unwrap_or(usize::MAX),
            n_cap: usize::try_from(o.n_cap).unwrap_or(usize::MAX),
        },
    }
}

fn summary(r: &StressResult) -> CsStressSummary {
    CsStressSummary {
        t_rr: r.t_rr,
        temperature: r.temperature,
        tail_estimate: r.tail_estimate,
        l_max_used: r.l_max_used as u64,
        n_max_used: r.n_max_used as u64,
        converged: r.converged,
    }
}

unsafe fn stress_common(
    g: *const CsGeometry,
    out: *mut CsStressSummary,
    run: impl FnOnce(&SphereGeometry) -> casimir_sphere::Result<StressResult>,
) -> i32 {
    guard(|| {
        let (Some(g), false) = (g.as_ref(), out.is_null()) else {
            return fail(CS_ERR_NULL, "geometry or out is NULL");
        };
        match run(&g.0) {
            Ok(r) => {
                *out = summary(&r);
                CS_OK
            }
            Err(e) => {
                if let Error::NonConvergence { partial, .. } = &e {
                    *out = summary(partial);
                }
                fail_with(&e)
            }
        }
    })
}

/// Matsubara-sum stress at reduced temperature `t`. `opts` may be NULL for
/// defaults (standoff 0, which does not converge on the surface).
///
/// # Safety
/// `g` must be a live handle, `opts` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_stress_finite_t(
    g: *const CsGeometry,
    t: f64,
    opts: *const CsStressOptions,
    out: *mut CsStressSummary,
) -> i32 {
    let o = options(opts.as_ref());
    stress_common(g, out, |geom| stress_finite_t(geom, t, &o))
}

/// Zero-temperature stress from the imaginary-frequency integral.
///
/// # Safety
/// As for `cs_stress_finite_t`.
#[no_mangle]
pub unsafe extern "C" fn cs_stress_zero_t(
    g: *const CsGeometry,
    opts: *const CsStressOptions,
    out: *mut CsStressSummary,
) -> i32 {
    let o = options(opts.as_ref());
    stress_common(g, out, |geom| stress_zero_t(geom, &o))
}

/// Runs a JSON job (the CLI config format) in memory and returns its CSV in
/// `*csv_out`, to be released with `cs_string_free`. Output paths in the
/// config are ignored. Returns `CS_ERR_CONFIG` for an invalid config (no CSV)
/// and `CS_ERR_NON_CONVERGENCE` when some point failed (CSV of the rest).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `csv_out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_job_json(config_json: *const c_char, csv_out: *mut *mut c_char) -> i32 {
    guard(|| {
        if config_json.is_null() || csv_out.is_null() {
            return fail(CS_ERR_NULL, "config_json or csv_out is NULL");
        }
        *csv_out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(config_json).to_str() else {
            return fail(CS_ERR_UTF8, "config is not valid UTF-8");
        };
        let cfg = match cli::parse_config(text) {
            Ok(c) => c,
            Err(d) => return fail(CS_ERR_CONFIG, d.to_string()),
        };
        let diags = cli::validate_config(&cfg);
        if !diags.is_empty() {
            let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return fail(CS_ERR_CONFIG, msg.join("; "));
        }
        let run = cli::execute(&cfg);
        let csv = CString::new(run.csv(&cfg)).unwrap_or_default();
        *csv_out = csv.into_raw();
        let failures = run.failures();
        if failures.is_empty() {
            CS_OK
        } else {
            fail(CS_ERR_NON_CONVERGENCE, failures.join("; "))
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
