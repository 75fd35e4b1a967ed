//! Drude–Lorentz permittivity and permeability.
//!
//! Each response is `inf + sum_p wp2 / (wt^2 - w^2 - i g w)`. Frequencies are
//! in whatever inverse-time unit the caller uses for `omega`; the stress code
//! works in units of `c/R` and rescales models with [`MaterialModel::scaled`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// One oscillator term. `resonance = 0` gives a Drude term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzPole {
    pub plasma_strength: f64,
    pub resonance: f64,
    pub damping: f64,
}

impl LorentzPole {
    pub fn new(plasma_strength: f64, resonance: f64, damping: f64) -> Self {
        LorentzPole {
            plasma_strength,
            resonance,
            damping,
        }
    }

    fn term(&self, w: Complex64) -> Complex64 {
        let den = self.resonance * self.resonance - w * w - Complex64::i() * self.damping * w;
        self.plasma_strength / den
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.plasma_strength.is_finite()
            && self.resonance.is_finite()
            && self.damping.is_finite();
        if !ok {
            return Err(Error::InvalidMaterial(format!("{what}: non-finite parameter")));
        }
        if self.plasma_strength < 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "{what}: plasma strength {} is negative",
                self.plasma_strength
            )));
        }
        if self.resonance < 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "{what}: resonance {} is negative",
                self.resonance
            )));
        }
        if !(self.damping > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "{what}: damping {} must be > 0",
                self.damping
            )));
        }
        Ok(())
    }
}

fn default_infinity() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialModel {
    #[serde(default)]
    pub eps_poles: Vec<LorentzPole>,
    #[serde(default)]
    pub mu_poles: Vec<LorentzPole>,
    #[serde(default = "default_infinity")]
    pub eps_infinity: f64,
    #[serde(default = "default_infinity")]
    pub mu_infinity: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self::vacuum()
    }
}

impl MaterialModel {
    pub fn vacuum() -> Self {
        MaterialModel {
            eps_poles: Vec::new(),
            mu_poles: Vec::new(),
            eps_infinity: 1.0,
            mu_infinity: 1.0,
        }
    }

    /// Dielectric with a single permittivity pole.
    pub fn lorentz_dielectric(pole: LorentzPole) -> Self {
        MaterialModel {
            eps_poles: vec![pole],
            ..Self::vacuum()
        }
    }

    pub fn with_eps_pole(mut self, pole: LorentzPole) -> Self {
        self.eps_poles.push(pole);
        self
    }

    pub fn with_mu_pole(mut self, pole: LorentzPole) -> Self {
        self.mu_poles.push(pole);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.eps_poles.iter().enumerate() {
            p.validate(&format!("eps_poles[{i}]"))?;
        }
        for (i, p) in self.mu_poles.iter().enumerate() {
            p.validate(&format!("mu_poles[{i}]"))?;
        }
        for (name, v) in [("eps_infinity", self.eps_infinity), ("mu_infinity", self.mu_infinity)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::InvalidMaterial(format!("{name} = {v} must be finite and >= 1")));
            }
        }
        Ok(())
    }

    pub fn is_vacuum(&self) -> bool {
        self.eps_infinity == 1.0
            && self.mu_infinity == 1.0
            && self.eps_poles.iter().all(|p| p.plasma_strength == 0.0)
            && self.mu_poles.iter().all(|p| p.plasma_strength == 0.0)
    }

    /// Same material with every frequency multiplied by `s`
    /// (so `plasma_strength` goes with `s^2`).
    pub fn scaled(&self, s: f64) -> Self {
        let f = |p: &LorentzPole| LorentzPole {
            plasma_strength: p.plasma_strength * s * s,
            resonance: p.resonance * s,
            damping: p.damping * s,
        };
        MaterialModel {
            eps_poles: self.eps_poles.iter().map(f).collect(),
            mu_poles: self.mu_poles.iter().map(f).collect(),
            eps_infinity: self.eps_infinity,
            mu_infinity: self.mu_infinity,
        }
    }

    /// Exchanges the electric and magnetic response.
    pub fn dual(&self) -> Self {
        MaterialModel {
            eps_poles: self.mu_poles.clone(),
            mu_poles: self.eps_poles.clone(),
            eps_infinity: self.mu_infinity,
            mu_infinity: self.eps_infinity,
        }
    }

    /// Permittivity at any frequency off the poles, including the
    /// continuation into the lower half-plane.
    pub(crate) fn eps_continued(&self, w: Complex64) -> Complex64 {
        sum_poles(self.eps_infinity, &self.eps_poles, w)
    }

    pub(crate) fn mu_continued(&self, w: Complex64) -> Complex64 {
        sum_poles(self.mu_infinity, &self.mu_poles, w)
    }

    /// Complex frequencies where some pole term is singular
    /// (all in the closed lower half-plane).
    pub(crate) fn singular_frequencies(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for p in self.eps_poles.iter().chain(&self.mu_poles) {
            if p.plasma_strength == 0.0 {
                continue;
            }
            // roots of w^2 + i g w - wt^2
            let disc = Complex64::new(p.resonance * p.resonance - 0.25 * p.damping * p.damping, 0.0).sqrt();
            let base = Complex64::new(0.0, -0.5 * p.damping);
            out.push(base + disc);
            out.push(base - disc);
        }
        out
    }
}

fn sum_poles(inf: f64, poles: &[LorentzPole], w: Complex64) -> Complex64 {
    poles
        .iter()
        .fold(Complex64::new(inf, 0.0), |acc, p| acc + p.term(w))
}

fn check_upper(omega: Complex64) -> Result<()> {
    if !(omega.re.is_finite() && omega.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite frequency {omega}")));
    }
    if omega.im < 0.0 {
        return Err(Error::Domain(format!(
            "response functions are defined for Im omega >= 0, got {omega}"
        )));
    }
    Ok(())
}

fn check_finite(v: Complex64, omega: Complex64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("Drude pole is singular at omega = {omega}")))
    }
}

pub fn eval_eps(model: &MaterialModel, omega: Complex64) -> Result<Complex64> {
    check_upper(omega)?;
    check_finite(model.eps_continued(omega), omega)
}

pub fn eval_mu(model: &MaterialModel, omega: Complex64) -> Result<Complex64> {
    check_upper(omega)?;
    check_finite(model.mu_continued(omega), omega)
}

/// `k = omega sqrt(eps mu) / c` on the branch `Im k >= 0`, with `Re k > 0`
/// when `k` is real.
pub fn wavenumber_from(omega: Complex64, eps: Complex64, mu: Complex64, c: f64) -> Complex64 {
    let k = omega * (eps * mu).sqrt() / c;
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        -k
    } else {
        k
    }
}

pub fn eval_wavenumber(model: &MaterialModel, omega: Complex64, c: f64) -> Result<Complex64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("speed of light must be positive, got {c}")));
    }
    let eps = eval_eps(model, omega)?;
    let mu = eval_mu(model, omega)?;
    Ok(wavenumber_from(omega, eps, mu, c))
}

/// Integration grid for [`kramers_kronig_residual`]: `panels` equal GK15
/// panels on `[0, upper]`, accepted when the panel error is below `tol`
/// relative to `|Re eps|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KkGrid {
    pub upper: f64,
    pub panels: usize,
    pub tol: f64,
}

impl Default for KkGrid {
    fn default() -> Self {
        KkGrid {
            upper: 200.0,
            panels: 4000,
            tol: 1e-4,
        }
    }
}

/// Relative deviation between `Re eps(omega)` and its reconstruction from
/// `Im eps` on the positive real axis through the dispersion relation.
pub fn kramers_kronig_residual(model: &MaterialModel, omega_real: f64, grid: KkGrid) -> Result<f64> {
    model.validate()?;
    if !(omega_real > 0.0 && omega_real.is_finite()) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega_real}")));
    }
    if model.eps_poles.iter().all(|p| p.plasma_strength == 0.0) {
        return Ok(0.0);
    }
    if !(grid.upper > 2.0 * omega_real) || grid.panels == 0 || !(grid.tol > 0.0) {
        return Err(Error::Domain(
            "grid must extend past twice the test frequency with at least one panel".into(),
        ));
    }
    let w0 = omega_real;
    let im_eps = |w: f64| model.eps_continued(Complex64::new(w, 0.0)).im;
    // w Im eps(w) / (w^2 - w0^2) = f(w) / (w - w0) with f smooth
    let f = |w: f64| w * im_eps(w) / (w + w0);
    let f0 = f(w0);
    let mut subtracted = |w: f64| -> Result<Complex64> {
        let d = w - w0;
        let v = if d.abs() < 1e-9 * w0 {
            let h = 1e-5 * w0;
            (f(w0 + h) - f(w0 - h)) / (2.0 * h)
        } else {
            (f(w) - f0) / d
        };
        Ok(Complex64::new(v, 0.0))
    };
    let est = quad::composite(&mut subtracted, 0.0, grid.upper, grid.panels)?;
    let pv = est.value.re + f0 * ((grid.upper - w0) / w0).ln();
    // beyond the grid Im eps ~ A / w^3
    let a: f64 = model
        .eps_poles
        .iter()
        .map(|p| p.plasma_strength * p.damping)
        .sum();
    let tail = a / (3.0 * grid.upper.powi(3));
    let rebuilt = model.eps_infinity + 2.0 / std::f64::consts::PI * (pv + tail);
    let direct = model.eps_continued(Complex64::new(w0, 0.0));
    let scale = direct.re.abs().max(f64::MIN_POSITIVE);
    let quad_err = 2.0 / std::f64::consts::PI * est.error / scale;
    if quad_err > grid.tol {
        return Err(Error::QuadratureFailure {
            estimate: quad_err,
            tol: grid.tol,
        });
    }
    Ok((rebuilt - direct.re).abs() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> MaterialModel {
        MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, 0.1))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn static_limit() {
        assert_eq!(eval_eps(&reference(), c(0.0, 0.0)).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn imaginary_axis_value() {
        let e = eval_eps(&reference(), c(0.0, 1.0)).unwrap();
        assert!((e.re - (1.0 + 1.0 / 2.1)).abs() < 1e-15);
        assert!((e.re - 1.476190476190476).abs() < 1e-14);
        assert_eq!(e.im, 0.0);
    }

    #[test]
    fn vacuum_is_constant() {
        let v = MaterialModel::vacuum();
        for w in [c(0.3, 0.0), c(2.0, 5.0), c(-1.0, 0.1)] {
            assert_eq!(eval_eps(&v, w).unwrap(), c(1.0, 0.0));
            assert_eq!(eval_mu(&v, w).unwrap(), c(1.0, 0.0));
        }
    }

    #[test]
    fn lower_half_plane_is_rejected() {
        assert!(matches!(eval_eps(&reference(), c(1.0, -1e-3)), Err(Error::Domain(_))));
    }

    #[test]
    fn drude_static_point_is_an_error() {
        let m = MaterialModel::lorentz_dielectric(LorentzPole::new(4.0, 0.0, 0.1));
        assert!(eval_eps(&m, c(0.0, 0.0)).is_err());
        assert!(eval_eps(&m, c(0.0, 1e-3)).unwrap().re > 1e4);
    }

    #[test]
    fn validation_rejects_gain_and_bad_background() {
        let mut m = MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, -0.1));
        assert!(m.validate().is_err());
        m.eps_poles[0].damping = 0.1;
        m.mu_infinity = 0.5;
        assert!(m.validate().is_err());
        m.mu_infinity = 1.0;
        assert!(m.validate().is_ok());
    }

    #[test]
    fn vacuum_wavenumber_on_real_axis() {
        let k = eval_wavenumber(&MaterialModel::vacuum(), c(2.5, 0.0), 1.0).unwrap();
        assert_eq!(k, c(2.5, 0.0));
    }

    #[test]
    fn left_handed_branch() {
        // oracle: sqrt((-1+0.01i)^2) on the Im >= 0 branch is -1 + 0.01i
        let e = c(-1.0, 0.01);
        let k = wavenumber_from(c(1.0, 0.0), e, e, 1.0);
        assert!(k.re < 0.0 && k.im > 0.0);
        assert!((k - c(-1.0, 0.01)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_axis_wavenumber_is_imaginary() {
        let m = reference().with_mu_pole(LorentzPole::new(0.5, 2.0, 0.3));
        for xi in [1e-4, 0.1, 1.0, 30.0] {
            let k = eval_wavenumber(&m, c(0.0, xi), 1.0).unwrap();
            let e = eval_eps(&m, c(0.0, xi)).unwrap().re;
            let u = eval_mu(&m, c(0.0, xi)).unwrap().re;
            assert_eq!(k.re, 0.0);
            assert!((k.im - xi * (e * u).sqrt()).abs() < 1e-14 * k.im);
        }
    }

    #[test]
    fn scaling_preserves_dimensionless_response() {
        let m = reference().with_mu_pole(LorentzPole::new(0.3, 0.0, 0.2));
        let s = 3.7;
        let w = c(0.8, 0.4);
        let a = m.eps_continued(w);
        let b = m.scaled(s).eps_continued(w * s);
        assert!((a - b).norm() < 1e-14);
        assert!((m.mu_continued(w) - m.scaled(s).mu_continued(w * s)).norm() < 1e-14);
    }

    #[test]
    fn singular_frequencies_are_poles() {
        let m = reference();
        for w in m.singular_frequencies() {
            assert!(w.im < 0.0);
            assert!(m.eps_continued(w).norm() > 1e12);
        }
    }

    #[test]
    fn kk_vacuum_is_zero() {
        assert_eq!(
            kramers_kronig_residual(&MaterialModel::vacuum(), 1.0, KkGrid::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn kk_single_pole_in_band() {
        for w in [0.9, 1.0, 1.05] {
            let r = kramers_kronig_residual(&reference(), w, KkGrid::default()).unwrap();
            assert!(r < 1e-3, "w = {w}: {r}");
        }
    }

    #[test]
    fn kk_coarse_grid_fails() {
        let m = reference().with_eps_pole(LorentzPole::new(2.0, 3.0, 0.05));
        let grid = KkGrid {
            upper: 50.0,
            panels: 5,
            tol: 1e-4,
        };
        assert!(matches!(
            kramers_kronig_residual(&m, 1.0, grid),
            Err(Error::QuadratureFailure { .. })
        ));
    }

    fn pole() -> impl Strategy<Value = LorentzPole> {
        (0.0..5.0f64, 0.0..5.0f64, 1e-3..2.0f64).prop_map(|(a, b, g)| LorentzPole::new(a, b, g))
    }

    fn model() -> impl Strategy<Value = MaterialModel> {
        (
            prop::collection::vec(pole(), 0..3),
            prop::collection::vec(pole(), 0..3),
            1.0..3.0f64,
            1.0..3.0f64,
        )
            .prop_map(|(e, m, ei, mi)| MaterialModel {
                eps_poles: e,
                mu_poles: m,
                eps_infinity: ei,
                mu_infinity: mi,
            })
    }

    proptest! {
        #[test]
        fn crossing_symmetry(m in model(), re in -10.0..10.0f64, im in 1e-6..10.0f64) {
            let w = c(re, im);
            let a = eval_eps(&m, -w.conj()).unwrap();
            let b = eval_eps(&m, w).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-14 * b.norm());
            let a = eval_mu(&m, -w.conj()).unwrap();
            let b = eval_mu(&m, w).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-14 * b.norm());
        }

        #[test]
        fn imaginary_axis_real_and_monotone(m in model()) {
            let mut prev = f64::INFINITY;
            for i in 0..=60 {
                let xi = 1e-3 * 10f64.powf(i as f64 / 10.0);
                let e = eval_eps(&m, c(0.0, xi)).unwrap();
                prop_assert_eq!(e.im, 0.0);
                prop_assert!(e.re.is_finite() && e.re >= m.eps_infinity);
                prop_assert!(e.re <= prev * (1.0 + 1e-15));
                prev = e.re;
            }
        }

        #[test]
        fn lossy_on_positive_real_axis(m in model(), w in 1e-3..50.0f64) {
            let e = eval_eps(&m, c(w, 0.0)).unwrap();
            let u = eval_mu(&m, c(w, 0.0)).unwrap();
            if m.eps_poles.iter().any(|p| p.plasma_strength > 0.0) {
                prop_assert!(e.im > 0.0);
            }
            if m.mu_poles.iter().any(|p| p.plasma_strength > 0.0) {
                prop_assert!(u.im > 0.0);
            }
        }

        #[test]
        fn wavenumber_branch(m in model(), re in -10.0..10.0f64, im in 0.0..10.0f64) {
            let k = eval_wavenumber(&m, c(re, im), 1.0).unwrap();
            prop_assert!(k.im >= 0.0);
        }
    }
}
