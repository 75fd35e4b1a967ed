use casimir_sphere::materials::{LorentzPole, MaterialModel};
use casimir_sphere::mie::SphereGeometry;
use casimir_sphere::stress::*;
use casimir_sphere::Error;
use num_complex::Complex64;

fn dielectric() -> MaterialModel {
    MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, 0.1))
}

fn reference() -> SphereGeometry {
    SphereGeometry::homogeneous(1.0, dielectric())
}

fn opts() -> StressOptions {
    StressOptions::with_standoff(0.2)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn xi_s(geom: &SphereGeometry, xi: f64) -> f64 {
    let mut total = 0.0;
    for l in 1..400 {
        let t = stress_kernel_at(geom, l, Complex64::new(0.0, xi), 0.2).unwrap();
        let c = t.contribution().re * xi;
        total += c;
        if l > 5 && c.abs() < 1e-17 * total.abs() {
            break;
        }
    }
    total
}

#[test]
fn vacuum_sphere_gives_exact_zero_on_every_path() {
    let g = SphereGeometry::homogeneous(1.0, MaterialModel::vacuum());
    assert_eq!(stress_finite_t(&g, 0.1, &opts()).unwrap().t_rr, 0.0);
    assert_eq!(stress_zero_t(&g, &opts()).unwrap().t_rr, 0.0);
    let r = stress_real_axis_diagnostic(&g, 0.1, RealAxisGrid::default(), &opts()).unwrap();
    assert_eq!(r.t_rr, 0.0);
}

#[test]
fn dual_sphere_has_the_same_stress() {
    let g = SphereGeometry::homogeneous(0.4, dielectric().with_mu_pole(LorentzPole::new(0.3, 2.0, 0.4)))
        .with_layer(1.0, MaterialModel::lorentz_dielectric(LorentzPole::new(2.0, 1.5, 0.2)));
    let a = stress_finite_t(&g, 0.2, &opts()).unwrap().t_rr;
    let b = stress_finite_t(&g.dual(), 0.2, &opts()).unwrap().t_rr;
    assert!(rel(a, b) < 1e-12, "{a} {b}");
}

#[test]
fn rescaling_radius_and_frequencies_leaves_reduced_stress_unchanged() {
    let base = stress_finite_t(&reference(), 0.1, &opts()).unwrap().t_rr;
    for s in [0.25, 3.0, 1e4] {
        let g = SphereGeometry::homogeneous(s, dielectric().scaled(1.0 / s));
        let v = stress_finite_t(&g, 0.1, &opts()).unwrap().t_rr;
        assert!(rel(v, base) < 1e-10, "s={s}: {v} vs {base}");
    }
}

#[test]
fn matsubara_summands_are_real() {
    let r = stress_finite_t(&reference(), 0.1, &opts()).unwrap();
    assert!(r.imaginary_residue < 1e-12 * r.t_rr.abs(), "{}", r.imaginary_residue);
}

#[test]
fn two_paths_agree_and_match_the_anchor() {
    let m = stress_finite_t(&reference(), 0.1, &opts()).unwrap();
    let d = stress_real_axis_diagnostic(&reference(), 0.1, RealAxisGrid::default(), &opts()).unwrap();
    assert!(rel(d.t_rr, m.t_rr) < 1e-3);
    assert!(rel(m.t_rr, 2.022315695865e-2) < 1e-9, "{}", m.t_rr);
}

#[test]
fn zero_temperature_is_the_low_temperature_limit() {
    let z = stress_zero_t(&reference(), &opts()).unwrap();
    let t = stress_finite_t(&reference(), 1e-3, &opts()).unwrap();
    assert!(z.converged && t.converged);
    assert!(rel(t.t_rr, z.t_rr) < 1e-2);
}

#[test]
fn static_term_dominates_at_high_temperature() {
    let a = stress_finite_t(&reference(), 10.0, &opts()).unwrap();
    let b = stress_finite_t(&reference(), 100.0, &opts()).unwrap();
    let n0 = a.frequencies.iter().find(|f| f.n == Some(0)).unwrap();
    let static_part = -10.0 / (4.0 * std::f64::consts::PI) * 0.5 * n0.value;
    assert!(static_part / a.t_rr > 0.99);
    assert!(rel(b.t_rr / a.t_rr, 10.0) < 0.02);
}

#[test]
fn static_term_matches_closed_form() {
    let eps0 = 2.0;
    let r = stress_finite_t(&reference(), 0.3, &opts()).unwrap();
    let n0 = r.frequencies.iter().find(|f| f.n == Some(0)).unwrap();
    let want = static_limit_homogeneous(eps0, 1.0, 0.2, 400);
    assert!(rel(n0.value, want) < 1e-6, "{} {want}", n0.value);
}

#[test]
fn tail_estimate_covers_the_truncation_change() {
    let loose = StressOptions { tol: 1e-4, ..opts() };
    let tight = StressOptions { tol: 1e-10, ..opts() };
    for t in [0.1, 1.0] {
        let a = stress_finite_t(&reference(), t, &loose).unwrap();
        let b = stress_finite_t(&reference(), t, &tight).unwrap();
        assert!(b.l_max_used >= a.l_max_used && b.n_max_used >= a.n_max_used);
        assert!((a.t_rr - b.t_rr).abs() <= a.tail_estimate, "t={t}: {} > {}", (a.t_rr - b.t_rr).abs(), a.tail_estimate);
        assert!(a.tail_estimate < loose.tol * a.t_rr.abs());
    }
}

#[test]
fn integrand_decays_by_eight_decades_at_xi_50() {
    let z = stress_zero_t(&reference(), &opts()).unwrap();
    let peak = z.frequencies.iter().map(|f| f.value.abs()).fold(0.0, f64::max);
    assert!(xi_s(&reference(), 50.0).abs() < 1e-8 * peak);
}

#[test]
fn unresolved_real_axis_grid_fails_the_quadrature() {
    let grid = RealAxisGrid {
        max_panels: 3,
        ..RealAxisGrid::default()
    };
    let e = stress_real_axis_diagnostic(&reference(), 0.1, grid, &opts()).unwrap_err();
    assert!(matches!(e, Error::QuadratureFailure { .. }), "{e:?}");
}

#[test]
fn surface_evaluation_reports_non_convergence() {
    let o = StressOptions {
        l_cap: 80,
        ..StressOptions::default()
    };
    match stress_finite_t(&reference(), 0.1, &o).unwrap_err() {
        Error::NonConvergence { partial, .. } => {
            assert!(!partial.converged);
            assert!(partial.tail_estimate > 0.0);
        }
        e => panic!("{e:?}"),
    }
}

#[test]
fn left_handed_sphere_converges() {
    let m = MaterialModel::lorentz_dielectric(LorentzPole::new(4.0, 1.0, 0.05)).with_mu_pole(LorentzPole::new(2.0, 1.1, 0.05));
    let g = SphereGeometry::homogeneous(1.0, m);
    let o = StressOptions { tol: 1e-4, ..opts() };
    let r = stress_finite_t(&g, 0.1, &o).unwrap();
    assert!(r.converged && r.t_rr.is_finite());
    let d = stress_real_axis_diagnostic(&g, 0.1, RealAxisGrid::default(), &o).unwrap();
    assert!(rel(d.t_rr, r.t_rr) < 1e-3);
}

#[test]
fn invalid_arguments_are_domain_errors() {
    assert!(matches!(stress_finite_t(&reference(), 0.0, &opts()), Err(Error::Domain(_))));
    let bad = StressOptions { tol: -1.0, ..opts() };
    assert!(matches!(stress_zero_t(&reference(), &bad), Err(Error::Domain(_))));
}
