//! TE/TM reflection coefficients of homogeneous and layered spheres, and
//! Mie resonance search in the complex frequency plane.
//!
//! Frequencies are in units of `c / length`, with lengths in the unit used for
//! the layer radii. Inside each layer the radial amplitude is `j_l + b h~_l`;
//! the chain starts with `b = 0` in the core and is carried outwards one
//! interface at a time, so the exterior value of `b` is the generalized
//! reflection coefficient.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::materials::{eval_eps, eval_mu, eval_wavenumber, MaterialModel};
use crate::scaled::Scaled;
use crate::specfun::{radial_sequence, tilde_kind, RadialEval, RadialFunctionKind, ScaledRadial};

const DEGENERATE_RATIO: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Outer radius of the layer.
    pub radius: f64,
    pub material: MaterialModel,
}

/// Concentric layers listed from the core outwards, in a uniform exterior.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGeometry {
    pub layers: Vec<Layer>,
    pub exterior: MaterialModel,
}

impl SphereGeometry {
    pub fn homogeneous(radius: f64, material: MaterialModel) -> Self {
        SphereGeometry {
            layers: vec![Layer { radius, material }],
            exterior: MaterialModel::vacuum(),
        }
    }

    pub fn with_layer(mut self, radius: f64, material: MaterialModel) -> Self {
        self.layers.push(Layer { radius, material });
        self
    }

    /// Outermost radius.
    pub fn radius(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Geometry("at least one layer is required".into()));
        }
        let mut prev = 0.0;
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.radius.is_finite() && layer.radius > 0.0) {
                return Err(Error::Geometry(format!(
                    "layer {i}: radius {} must be finite and positive",
                    layer.radius
                )));
            }
            if !(layer.radius > prev) {
                return Err(Error::Geometry(format!(
                    "layer {i}: radius {} does not exceed the previous radius {prev}",
                    layer.radius
                )));
            }
            prev = layer.radius;
            layer
                .material
                .validate()
                .map_err(|e| Error::Geometry(format!("layer {i}: {e}")))?;
        }
        self.exterior
            .validate()
            .map_err(|e| Error::Geometry(format!("exterior: {e}")))
    }

    /// The same sphere in units of its outer radius: radii divided by `R`,
    /// material frequencies multiplied by `R`.
    pub fn reduced(&self) -> Self {
        let r = self.radius();
        SphereGeometry {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    radius: l.radius / r,
                    material: l.material.scaled(r),
                })
                .collect(),
            exterior: self.exterior.scaled(r),
        }
    }

    pub fn dual(&self) -> Self {
        SphereGeometry {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    radius: l.radius,
                    material: l.material.dual(),
                })
                .collect(),
            exterior: self.exterior.dual(),
        }
    }

    /// True when no layer differs from the exterior, so nothing scatters.
    pub fn is_transparent(&self) -> bool {
        self.layers.iter().all(|l| l.material == self.exterior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    TE,
    TM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionCoefficient {
    pub l: usize,
    pub polarization: Polarization,
    pub omega: Complex64,
    pub value: Complex64,
}

/// TE and TM coefficients of one order, kept in scaled form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPair {
    pub te: Scaled,
    pub tm: Scaled,
}

/// `f.value * g.riccati / alpha2 - g.value * f.riccati / alpha1`.
///
/// The `value` fields must already be in Riccati form, `R S_l(kR)`.
pub fn interface_determinant(
    f_inner: &RadialEval,
    f_outer: &RadialEval,
    alpha1: Complex64,
    alpha2: Complex64,
) -> Result<Complex64> {
    if alpha1.norm() == 0.0 || alpha2.norm() == 0.0 {
        return Err(Error::Domain("interface determinant needs nonzero alpha".into()));
    }
    Ok(f_inner.value * f_outer.riccati_derivative / alpha2
        - f_outer.value * f_inner.riccati_derivative / alpha1)
}

/// Converts an evaluation at `z = kR` to Riccati form (`value` times `R`).
pub fn riccati_form(eval: RadialEval, radius: f64) -> RadialEval {
    RadialEval {
        value: eval.value * radius,
        ..eval
    }
}

/// `r S(kr)` and `d/dr [r S(kr)]` at one radius.
#[derive(Debug, Clone, Copy)]
struct Rf {
    v: Scaled,
    d: Scaled,
}

impl Rf {
    fn new(s: &ScaledRadial, a: f64) -> Rf {
        Rf {
            v: Scaled::new(s.value * a, s.log_scale),
            d: Scaled::new(s.riccati, s.log_scale),
        }
    }

    fn plus(self, b: Scaled, other: Rf) -> Rf {
        Rf {
            v: self.v.add(b * other.v),
            d: self.d.add(b * other.d),
        }
    }
}

/// Determinant and the log-magnitude of its larger term.
fn det(f: Rf, g: Rf, a1: Complex64, a2: Complex64) -> (Scaled, f64) {
    let t1 = (f.v * g.d).scale_by(a2.inv());
    let t2 = (g.v * f.d).scale_by(a1.inv());
    let scale = t1.ln_abs().max(t2.ln_abs());
    (t1.sub(t2), scale)
}

fn is_degenerate(d: Scaled, scale: f64) -> bool {
    !d.is_finite() || d.is_zero() || d.ln_abs() - scale < DEGENERATE_RATIO.ln()
}

/// Per-medium data at one frequency.
#[derive(Debug, Clone, Copy)]
struct Medium {
    k: Complex64,
    eps: Complex64,
    mu: Complex64,
}

impl Medium {
    fn checked(m: &MaterialModel, omega: Complex64) -> Result<Medium> {
        Ok(Medium {
            k: eval_wavenumber(m, omega, 1.0)?,
            eps: eval_eps(m, omega)?,
            mu: eval_mu(m, omega)?,
        })
    }

    fn alpha(&self, pol: Polarization) -> Complex64 {
        match pol {
            Polarization::TE => self.mu,
            Polarization::TM => self.eps,
        }
    }
}

/// Radial sequences on both sides of every interface.
struct Chain {
    media: Vec<Medium>,
    /// `(j, h)` of layer `i` at its own outer radius; `h` is empty for the core.
    inner: Vec<(Vec<ScaledRadial>, Vec<ScaledRadial>)>,
    /// `(j, h)` of medium `i + 1` at radius `i`.
    outer: Vec<(Vec<ScaledRadial>, Vec<ScaledRadial>)>,
    radii: Vec<f64>,
}

fn hankel_kind(k: Complex64) -> Result<RadialFunctionKind> {
    tilde_kind(k)
}

fn sequences(
    k: Complex64,
    a: f64,
    l_max: usize,
    l_cap: usize,
    with_h: bool,
) -> Result<(Vec<ScaledRadial>, Vec<ScaledRadial>)> {
    let z = k * a;
    let j = radial_sequence(RadialFunctionKind::BesselJ, l_max, z, l_cap)?;
    let h = if with_h {
        radial_sequence(hankel_kind(k)?, l_max, z, l_cap)?
    } else {
        Vec::new()
    };
    Ok((j, h))
}

impl Chain {
    fn build(geom: &SphereGeometry, media: Vec<Medium>, l_max: usize, l_cap: usize) -> Result<Chain> {
        let n = geom.layers.len();
        let radii: Vec<f64> = geom.layers.iter().map(|l| l.radius).collect();
        let mut inner = Vec::with_capacity(n);
        let mut outer = Vec::with_capacity(n);
        for i in 0..n {
            inner.push(sequences(media[i].k, radii[i], l_max, l_cap, i > 0)?);
            outer.push(sequences(media[i + 1].k, radii[i], l_max, l_cap, true)?);
        }
        Ok(Chain {
            media,
            inner,
            outer,
            radii,
        })
    }

    fn reflect(&self, l: usize, pol: Polarization) -> Result<Scaled> {
        let n = self.radii.len();
        let mut beta = Scaled::ZERO;
        for i in 0..n {
            let a = self.radii[i];
            let (ji, hi) = &self.inner[i];
            let (jo, ho) = &self.outer[i];
            let mut combo = Rf::new(&ji[l], a);
            if !beta.is_zero() {
                combo = combo.plus(beta, Rf::new(&hi[l], a));
            }
            let a1 = self.media[i].alpha(pol);
            let a2 = self.media[i + 1].alpha(pol);
            let (num, _) = det(combo, Rf::new(&jo[l], a), a1, a2);
            if num.is_zero() {
                beta = Scaled::ZERO;
                continue;
            }
            let (den, scale) = det(combo, Rf::new(&ho[l], a), a1, a2);
            if is_degenerate(den, scale) {
                return Err(if i + 1 == n {
                    Error::DegenerateDenominator {
                        l,
                        omega: Complex64::new(f64::NAN, f64::NAN),
                    }
                } else {
                    Error::SingularSystem { l, interface: i }
                });
            }
            beta = -num.div(den);
        }
        Ok(beta)
    }
}

fn media(geom: &SphereGeometry, omega: Complex64) -> Result<Vec<Medium>> {
    geom.layers
        .iter()
        .map(|l| &l.material)
        .chain(std::iter::once(&geom.exterior))
        .map(|m| Medium::checked(m, omega))
        .collect()
}

fn check_order(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Domain("reflection coefficients need l >= 1".into()));
    }
    Ok(())
}

fn finish(l: usize, pol: Polarization, omega: Complex64, r: Result<Scaled>) -> Result<ReflectionCoefficient> {
    let r = r.map_err(|e| match e {
        Error::DegenerateDenominator { l, .. } => Error::DegenerateDenominator { l, omega },
        other => other,
    })?;
    let value = r.to_complex();
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Overflow { l, z: omega });
    }
    Ok(ReflectionCoefficient {
        l,
        polarization: pol,
        omega,
        value,
    })
}

/// Reflection coefficient of a single interface at `radius` between an inner
/// and an outer medium.
pub fn single_interface_reflection(
    inner: &MaterialModel,
    outer: &MaterialModel,
    radius: f64,
    l: usize,
    pol: Polarization,
    omega: Complex64,
) -> Result<ReflectionCoefficient> {
    let geom = SphereGeometry {
        layers: vec![Layer {
            radius,
            material: inner.clone(),
        }],
        exterior: outer.clone(),
    };
    layered_reflection(&geom, l, pol, omega)
}

/// Generalized exterior reflection coefficient of a layered sphere.
pub fn layered_reflection(
    geom: &SphereGeometry,
    l: usize,
    pol: Polarization,
    omega: Complex64,
) -> Result<ReflectionCoefficient> {
    check_order(l)?;
    geom.validate()?;
    let chain = Chain::build(geom, media(geom, omega)?, l, crate::specfun::DEFAULT_L_CAP)?;
    finish(l, pol, omega, chain.reflect(l, pol))
}

/// TE and TM coefficients for `l = 1..=l_max` (index `l - 1`), sharing one set
/// of radial sequences.
pub fn reflection_series(
    geom: &SphereGeometry,
    omega: Complex64,
    l_max: usize,
    l_cap: usize,
) -> Result<Vec<ReflectionPair>> {
    let chain = Chain::build(geom, media(geom, omega)?, l_max, l_cap)?;
    let fix = |e: Error| match e {
        Error::DegenerateDenominator { l, .. } => Error::DegenerateDenominator { l, omega },
        other => other,
    };
    (1..=l_max)
        .map(|l| {
            Ok(ReflectionPair {
                te: chain.reflect(l, Polarization::TE).map_err(fix)?,
                tm: chain.reflect(l, Polarization::TM).map_err(fix)?,
            })
        })
        .collect()
}

/// Rectangle `[re_min, re_max] x [im_min, im_max]` in the complex frequency plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchBox {
    fn contains(&self, w: Complex64) -> bool {
        w.re >= self.re_min && w.re <= self.re_max && w.im >= self.im_min && w.im <= self.im_max
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn quarters(&self) -> [SearchBox; 4] {
        let c = self.center();
        [
            SearchBox { re_max: c.re, im_max: c.im, ..*self },
            SearchBox { re_min: c.re, im_max: c.im, ..*self },
            SearchBox { re_max: c.re, im_min: c.im, ..*self },
            SearchBox { re_min: c.re, im_min: c.im, ..*self },
        ]
    }

    fn size(&self) -> f64 {
        (self.re_max - self.re_min).max(self.im_max - self.im_min)
    }
}

/// Analytic resonance function: zero exactly where the reflection
/// denominator vanishes, free of the branch points of `k` inside layers.
///
/// The interior field is carried as `(u, u'/alpha)` with `u = r S(kr)` and
/// the core solution normalized by `k^l`; every interior layer propagates it
/// with the `j`/`h` fundamental pair, which depends on `k^2` only. Exterior
/// and interior responses are continued below the real axis.
struct ResonanceFunction<'a> {
    geom: &'a SphereGeometry,
    l: usize,
    pol: Polarization,
}

impl ResonanceFunction<'_> {
    fn continued_alpha(&self, m: &MaterialModel, w: Complex64) -> Complex64 {
        match self.pol {
            Polarization::TE => m.mu_continued(w),
            Polarization::TM => m.eps_continued(w),
        }
    }

    /// Returns the value and the log-magnitude of its larger term.
    fn eval(&self, w: Complex64) -> Result<(Scaled, f64)> {
        let l = self.l;
        let cap = l.max(crate::specfun::DEFAULT_L_CAP);
        let seq = |kind, z| radial_sequence(kind, l, z, cap).map(|s| s[l]);
        let mut alpha_prod = Complex64::new(1.0, 0.0);

        let core = &self.geom.layers[0];
        let n2 = (core.material.eps_continued(w) * core.material.mu_continued(w)).sqrt();
        let k = w * n2;
        let a = core.radius;
        let alpha = self.continued_alpha(&core.material, w);
        alpha_prod *= alpha;
        let jl = seq(RadialFunctionKind::BesselJ, k * a)?;
        let norm = Scaled::from_complex(k).ln_abs() * l as f64;
        let phase = Complex64::from_polar(1.0, -(l as f64) * k.arg());
        let mut u = Scaled::new(jl.value * a * phase, jl.log_scale - norm);
        let mut p = Scaled::new(jl.riccati * phase / alpha, jl.log_scale - norm);

        for idx in 1..self.geom.layers.len() {
            let layer = &self.geom.layers[idx];
            let inner_r = self.geom.layers[idx - 1].radius;
            let m = &layer.material;
            let k = w * (m.eps_continued(w) * m.mu_continued(w)).sqrt();
            let alpha = self.continued_alpha(m, w);
            alpha_prod *= alpha;
            let at = |r: f64| -> Result<(Rf, Rf)> {
                let j = seq(RadialFunctionKind::BesselJ, k * r)?;
                let h = seq(RadialFunctionKind::HankelOut, k * r)?;
                Ok((Rf::new(&j, r), Rf::new(&h, r)))
            };
            let (f1, f2) = at(inner_r)?;
            let (g1, g2) = at(layer.radius)?;
            // Wronskian of (r j, r h) in Riccati form is i / k
            let winv = Scaled::from_complex(-Complex64::i() * k);
            let ap = p.scale_by(alpha);
            let c1 = (u * f2.d).sub(f2.v * ap) * winv;
            let c2 = (f1.v * ap).sub(u * f1.d) * winv;
            u = (c1 * g1.v).add(c2 * g2.v);
            p = (c1 * g1.d).add(c2 * g2.d).scale_by(alpha.inv());
        }

        let ext = &self.geom.exterior;
        let k2 = w * (ext.eps_continued(w) * ext.mu_continued(w)).sqrt();
        let alpha2 = self.continued_alpha(ext, w);
        let r = self.geom.radius();
        let h = Rf::new(&seq(RadialFunctionKind::HankelOut, k2 * r)?, r);
        let t1 = (u * h.d).scale_by(alpha_prod / alpha2);
        let t2 = (h.v * p).scale_by(alpha_prod);
        let scale = t1.ln_abs().max(t2.ln_abs());
        Ok((t1.sub(t2), scale))
    }

    /// Newton step `-f / f'` with `f'` from central differences.
    fn newton_step(&self, w: Complex64, h: f64) -> Result<Complex64> {
        let (f0, _) = self.eval(w)?;
        let (fp, _) = self.eval(w + h)?;
        let (fm, _) = self.eval(w - h)?;
        let slope = fp.sub(fm).scale_by(Complex64::new(0.5 / h, 0.0));
        Ok(-f0.div(slope).to_complex())
    }
}

const MAX_DEPTH: usize = 12;
const MAX_BOUNDARY_SAMPLES: usize = 20_000;

fn check_search_box(geom: &SphereGeometry, b: SearchBox) -> Result<()> {
    let finite = [b.re_min, b.re_max, b.im_min, b.im_max].iter().all(|v| v.is_finite());
    if !finite || !(b.re_max > b.re_min) || !(b.im_max > b.im_min) {
        return Err(Error::Domain("search box must be a finite, non-empty rectangle".into()));
    }
    if b.im_max > 0.0 {
        return Err(Error::Domain(
            "resonances of passive spheres lie in Im omega <= 0; box extends above the axis".into(),
        ));
    }
    if b.contains(Complex64::new(0.0, 0.0)) {
        return Err(Error::Domain("search box contains omega = 0".into()));
    }
    let mut singular: Vec<Complex64> = geom
        .layers
        .iter()
        .flat_map(|l| l.material.singular_frequencies())
        .collect();
    singular.extend(geom.exterior.singular_frequencies());
    if let Some(w) = singular.iter().find(|w| b.contains(**w)) {
        return Err(Error::Domain(format!("search box contains the material pole {w}")));
    }
    Ok(())
}

/// Number of resonances inside `search_box` by the argument principle.
pub fn resonance_count(geom: &SphereGeometry, l: usize, pol: Polarization, search_box: SearchBox) -> Result<usize> {
    check_order(l)?;
    geom.validate()?;
    check_search_box(geom, search_box)?;
    let n = winding_number(&ResonanceFunction { geom, l, pol }, &search_box)?;
    usize::try_from(n).map_err(|_| Error::RootNonConvergence {
        residual: n as f64,
        near: search_box.center(),
    })
}

/// Complex frequencies in `search_box` where the reflection denominator of
/// order `l` vanishes, each refined to `|D| < 1e-8` of its term scale.
///
/// The box must lie in the closed lower half-plane and must not contain
/// `omega = 0` or a material pole. Roots on the real axis itself are only
/// reached by the box edge and may be missed.
pub fn find_mie_resonances(
    geom: &SphereGeometry,
    l: usize,
    pol: Polarization,
    search_box: SearchBox,
) -> Result<Vec<Complex64>> {
    check_order(l)?;
    geom.validate()?;
    check_search_box(geom, search_box)?;
    let b = search_box;
    let f = ResonanceFunction { geom, l, pol };
    let mut roots = search(&f, b, &b, 0)?;
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots.dedup_by(|a, b| (*a - *b).norm() < 1e-9 * (1.0 + b.norm()));
    Ok(roots)
}

fn search(f: &ResonanceFunction, b: SearchBox, whole: &SearchBox, depth: usize) -> Result<Vec<Complex64>> {
    let count = winding_number(f, &b)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    if count == 1 {
        // a root on a shared edge may be claimed by either neighbour
        let pad = 0.01 * b.size();
        let near = SearchBox {
            re_min: b.re_min - pad,
            re_max: b.re_max + pad,
            im_min: b.im_min - pad,
            im_max: b.im_max + pad,
        };
        if let Ok(root) = newton(f, b.center(), whole) {
            if near.contains(root) {
                return Ok(vec![root]);
            }
        }
    }
    if depth >= MAX_DEPTH {
        let c = b.center();
        let (v, scale) = f.eval(c)?;
        return Err(Error::RootNonConvergence {
            residual: (v.ln_abs() - scale).exp(),
            near: c,
        });
    }
    let parts: Vec<Result<Vec<Complex64>>> = b
        .quarters()
        .par_iter()
        .map(|q| search(f, *q, whole, depth + 1))
        .collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Number of zeros inside `b` from the phase accumulated along its boundary.
fn winding_number(f: &ResonanceFunction, b: &SearchBox) -> Result<i64> {
    let corners = [
        Complex64::new(b.re_min, b.im_min),
        Complex64::new(b.re_max, b.im_min),
        Complex64::new(b.re_max, b.im_max),
        Complex64::new(b.re_min, b.im_max),
    ];
    let mut total = 0.0;
    let mut samples = 0usize;
    for i in 0..4 {
        let (a, c) = (corners[i], corners[(i + 1) % 4]);
        total += edge_phase(f, a, c, &mut samples)?;
    }
    let turns = total / std::f64::consts::TAU;
    let n = turns.round();
    if (turns - n).abs() > 0.1 {
        return Err(Error::RootNonConvergence {
            residual: (turns - n).abs(),
            near: b.center(),
        });
    }
    Ok(n as i64)
}

fn edge_phase(f: &ResonanceFunction, a: Complex64, b: Complex64, samples: &mut usize) -> Result<f64> {
    let (mut f0, _) = f.eval(a)?;
    let mut t = 0.0f64;
    let mut dt = 1.0 / 16.0;
    let mut phase = 0.0;
    while t < 1.0 {
        let t1 = (t + dt).min(1.0);
        let w1 = a + (b - a) * t1;
        let (f1, _) = f.eval(w1)?;
        *samples += 1;
        let step = f1.div(f0).to_complex();
        let d = step.arg();
        let small = d.abs() < std::f64::consts::FRAC_PI_4 && step.norm().ln().abs() < 1.0;
        if small {
            phase += d;
            t = t1;
            f0 = f1;
            dt *= 1.5;
        } else {
            dt *= 0.5;
            if dt < 1e-12 || *samples > MAX_BOUNDARY_SAMPLES {
                return Err(Error::RootNonConvergence {
                    residual: d.abs(),
                    near: w1,
                });
            }
        }
    }
    Ok(phase)
}

fn newton(f: &ResonanceFunction, start: Complex64, b: &SearchBox) -> Result<Complex64> {
    let mut w = start;
    let mut h = 1e-4 * b.size();
    let accept = |w: Complex64| -> Result<bool> {
        let (v, scale) = f.eval(w)?;
        Ok(v.is_zero() || v.ln_abs() - scale < (1e-8f64).ln())
    };
    for _ in 0..60 {
        let step = f.newton_step(w, h)?;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        w += step;
        if !b.contains(w) {
            break;
        }
        h = (step.norm() * 1e-2).clamp(1e-9 * (1.0 + w.norm()), 1e-4 * b.size());
        if step.norm() < 1e-12 * (1.0 + w.norm()) && accept(w)? {
            return Ok(w);
        }
    }
    if b.contains(w) && accept(w)? {
        return Ok(w);
    }
    let (v, scale) = f.eval(w)?;
    Err(Error::RootNonConvergence {
        residual: (v.ln_abs() - scale).exp(),
        near: w,
    })
}
