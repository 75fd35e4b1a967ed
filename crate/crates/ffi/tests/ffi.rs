use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use casimir_sphere::materials::{eval_eps, LorentzPole, MaterialModel};
use casimir_sphere::mie::{layered_reflection, Polarization, SphereGeometry};
use casimir_sphere::stress::{stress_finite_t, StressOptions};
use casimir_sphere_ffi::*;
use num_complex::Complex64;

fn last_error() -> String {
    let p = cs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Sphere {
    m: *mut CsMaterial,
    g: *mut CsGeometry,
}

impl Sphere {
    fn reference() -> Self {
        let mut m = ptr::null_mut();
        let mut g = ptr::null_mut();
        unsafe {
            assert_eq!(cs_material_new(1.0, 1.0, &mut m), CS_OK);
            assert_eq!(cs_material_add_eps_pole(m, 1.0, 1.0, 0.1), CS_OK);
            assert_eq!(cs_geometry_new(&mut g), CS_OK);
            assert_eq!(cs_geometry_add_layer(g, 1.0, m), CS_OK);
        }
        Sphere { m, g }
    }
}

impl Drop for Sphere {
    fn drop(&mut self) {
        unsafe {
            cs_geometry_free(self.g);
            cs_material_free(self.m);
        }
    }
}

fn library_sphere() -> SphereGeometry {
    SphereGeometry::homogeneous(1.0, MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, 0.1)))
}

#[test]
fn responses_match_the_library() {
    let s = Sphere::reference();
    let w = CsComplex { re: 0.7, im: 0.2 };
    let mut out = CsComplex { re: 0.0, im: 0.0 };
    assert_eq!(unsafe { cs_material_eps(s.m, w, &mut out) }, CS_OK);
    let want = eval_eps(&library_sphere().layers[0].material, Complex64::new(0.7, 0.2)).unwrap();
    assert_eq!(Complex64::from(out), want);
    assert_eq!(unsafe { cs_material_mu(s.m, w, &mut out) }, CS_OK);
    assert_eq!(out, CsComplex { re: 1.0, im: 0.0 });
}

#[test]
fn reflection_matches_the_library() {
    let s = Sphere::reference();
    let w = CsComplex { re: 0.0, im: 1.3 };
    for (code, pol) in [(CS_TE, Polarization::TE), (CS_TM, Polarization::TM)] {
        let mut out = CsComplex { re: 0.0, im: 0.0 };
        assert_eq!(unsafe { cs_reflection(s.g, 3, code, w, &mut out) }, CS_OK);
        let want = layered_reflection(&library_sphere(), 3, pol, w.into()).unwrap().value;
        assert_eq!(Complex64::from(out), want);
    }
    let mut out = CsComplex { re: 0.0, im: 0.0 };
    assert_eq!(unsafe { cs_reflection(s.g, 3, 7, w, &mut out) }, CS_ERR_DOMAIN);
}

#[test]
fn stress_matches_the_library_bit_for_bit() {
    let s = Sphere::reference();
    let o = CsStressOptions { tol: 1e-6, standoff: 0.2, l_cap: 512, n_cap: 100_000 };
    let mut sum = std::mem::MaybeUninit::<CsStressSummary>::zeroed();
    assert_eq!(unsafe { cs_stress_finite_t(s.g, 0.1, &o, sum.as_mut_ptr()) }, CS_OK);
    let sum = unsafe { sum.assume_init() };
    let want = stress_finite_t(&library_sphere(), 0.1, &StressOptions::with_standoff(0.2)).unwrap();
    assert_eq!(sum.t_rr.to_bits(), want.t_rr.to_bits());
    assert_eq!(sum.n_max_used, want.n_max_used as u64);
    assert!(sum.converged);
}

#[test]
fn non_convergence_reports_the_partial_sum() {
    let s = Sphere::reference();
    let o = CsStressOptions { tol: 1e-6, standoff: 0.0, l_cap: 40, n_cap: 100 };
    let mut sum = CsStressSummary {
        t_rr: f64::NAN,
        temperature: 0.0,
        tail_estimate: 0.0,
        l_max_used: 0,
        n_max_used: 0,
        converged: true,
    };
    assert_eq!(unsafe { cs_stress_zero_t(s.g, &o, &mut sum) }, CS_ERR_NON_CONVERGENCE);
    assert!(!sum.converged);
    assert!(last_error().contains("converge"));
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(cs_material_new(1.0, 1.0, ptr::null_mut()), CS_ERR_NULL);
        assert!(last_error().contains("NULL"));
        let mut m = ptr::null_mut();
        assert_eq!(cs_material_new(0.5, 1.0, &mut m), CS_ERR_INVALID_MATERIAL);
        assert!(m.is_null());
        assert_eq!(cs_material_new(1.0, 1.0, &mut m), CS_OK);
        assert_eq!(cs_material_add_eps_pole(m, 1.0, 1.0, -0.1), CS_ERR_INVALID_MATERIAL);
        assert!(last_error().contains("damping"));
        let mut g = ptr::null_mut();
        assert_eq!(cs_geometry_new(&mut g), CS_OK);
        assert_eq!(cs_geometry_add_layer(g, 1.0, m), CS_OK);
        assert_eq!(cs_geometry_add_layer(g, 0.5, m), CS_ERR_GEOMETRY);
        assert_eq!(cs_geometry_add_layer(g, 2.0, ptr::null()), CS_ERR_NULL);
        let mut out = CsComplex { re: 0.0, im: 0.0 };
        assert_eq!(cs_material_eps(m, CsComplex { re: 1.0, im: -1.0 }, &mut out), CS_ERR_DOMAIN);
        cs_geometry_free(g);
        cs_material_free(m);
        cs_material_free(ptr::null_mut());
        cs_geometry_free(ptr::null_mut());
    }
}

#[test]
fn last_error_is_per_thread() {
    unsafe {
        assert_eq!(cs_material_new(1.0, 1.0, ptr::null_mut()), CS_ERR_NULL);
    }
    assert!(!cs_last_error().is_null());
    std::thread::spawn(|| assert!(cs_last_error().is_null())).join().unwrap();
    cs_clear_error();
    assert!(cs_last_error().is_null());
}

#[test]
fn json_jobs_run_in_memory() {
    let cfg = r#"{
        "materials": {},
        "geometry": { "layers": [{ "radius": 1.0, "material": "vacuum" }] },
        "temperature": 0.1,
        "sweep": { "axis": "radius_scale", "values": [1.0, 2.0] },
        "numerics": { "standoff": 0.2 }
    }"#;
    let c = CString::new(cfg).unwrap();
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { cs_run_job_json(c.as_ptr(), &mut csv) }, CS_OK);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    unsafe { cs_string_free(csv) };
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("sweep_value,T_RR,l_max,n_max,tail,seconds\n"));

    let bad = CString::new(cfg.replace("\"vacuum\"", "\"glass\"")).unwrap();
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { cs_run_job_json(bad.as_ptr(), &mut csv) }, CS_ERR_CONFIG);
    assert!(csv.is_null());
    assert!(last_error().contains("geometry.layers[0].material"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(cs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// `<target>/<profile>/deps`, where `cargo test` leaves the freshly built
/// static library next to the test binary.
fn deps_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("casimir_sphere.h")).unwrap();
    for name in ["cs_last_error", "cs_stress_finite_t", "CsGeometry", "CS_ERR_NON_CONVERGENCE"] {
        assert!(header.contains(name), "{name}");
    }
    let lib = deps_dir().join("libcasimir_sphere_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = dir.join("smoke.c");
    let exe = dir.join("smoke");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "casimir_sphere.h"
int main(void) {
    CsMaterial *m = NULL;
    CsGeometry *g = NULL;
    CsStressSummary s;
    CsStressOptions o = { 1e-6, 0.2, 512, 100000 };
    if (cs_material_new(1.0, 1.0, &m) != CS_OK) return 1;
    if (cs_material_add_eps_pole(m, 1.0, 1.0, 0.1) != CS_OK) return 1;
    if (cs_geometry_new(&g) != CS_OK) return 1;
    if (cs_geometry_add_layer(g, 1.0, m) != CS_OK) return 1;
    if (cs_stress_finite_t(g, 0.1, &o, &s) != CS_OK) return 1;
    if (cs_material_new(1.0, 1.0, NULL) != CS_ERR_NULL || cs_last_error() == NULL) return 2;
    printf("%.12e\n", s.t_rr);
    cs_geometry_free(g);
    cs_material_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    let v: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    let want = stress_finite_t(&library_sphere(), 0.1, &StressOptions::with_standoff(0.2)).unwrap().t_rr;
    assert!(((v - want) / want).abs() < 1e-11);
}
