//! Vector spherical wave functions and the dyadic Green tensors of a bulk
//! medium and of the sphere scattering problem.
//!
//! Waves follow `M = -sqrt(2/(pi l(l+1))) k z(kr) r x grad Y`,
//! `N = curl M / k`, `L = grad(sqrt(2/pi) k z Y) / k`, with `z` either `j_l`
//! or the branch-selected Hankel function. Dyadics are returned in the local
//! spherical frames: row index on `(r^, theta^, phi^)` at `r`, column index on
//! the same triad at `r'`.
//!
//! Partial-wave sums over `m` are done in closed form through
//! `sum_m Y_lm(a) Y*_lm(b) = (2l+1)/(4 pi) P_l(a.b)` and its surface
//! derivatives; [`eval_vector_wave`] exists for tests and for callers who want
//! single modes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::materials::{eval_mu, eval_wavenumber, MaterialModel};
use crate::mie::{reflection_series, SphereGeometry};
use crate::scaled::Scaled;
use crate::specfun::{radial_sequence, tilde_kind, RadialFunctionKind, ScaledRadial, DEFAULT_L_CAP};

type C = Complex64;
type Vec3 = [C; 3];
type Mat3 = [[C; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        let p = SphericalPoint { r, theta, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Domain(format!("radius {} must be positive", self.r)));
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::Domain(format!("theta {} outside [0, pi]", self.theta)));
        }
        if !(0.0..2.0 * PI).contains(&self.phi) {
            return Err(Error::Domain(format!("phi {} outside [0, 2 pi)", self.phi)));
        }
        Ok(())
    }

    pub fn from_cartesian(x: [f64; 3]) -> Result<Self> {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return Err(Error::Domain("origin has no spherical angles".into()));
        }
        let theta = (x[2] / r).clamp(-1.0, 1.0).acos();
        let mut phi = x[1].atan2(x[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Ok(SphericalPoint { r, theta, phi })
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let u = self.unit();
        [self.r * u[0], self.r * u[1], self.r * u[2]]
    }

    fn unit(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Rows are `r^`, `theta^`, `phi^` in Cartesian components.
    pub fn frame(&self) -> [[f64; 3]; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveFamily {
    M,
    N,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveVariant {
    /// Built on `j_l`.
    Regular,
    /// Built on the Hankel function selected by the sign of `Im k`.
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorWave {
    pub family: WaveFamily,
    pub variant: WaveVariant,
    pub l: usize,
    pub m: i64,
    pub k: C,
}

/// Normalized `Y_lm(theta, phi)` (Condon–Shortley phase).
pub fn spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> C {
    angular(l, m, theta, phi).y
}

/// `Y`, `dY/dtheta` and `i m Y / sin(theta)` at one direction; all finite at
/// the poles.
#[derive(Debug, Clone, Copy)]
struct Angular {
    y: C,
    dtheta: C,
    im_over_sin: C,
}

/// `Q_l^m` with `Pbar_l^m = sin^m(theta) Q_l^m`, for `l = m..=l_max`.
fn q_column(m: usize, l_max: usize, ct: f64) -> Vec<f64> {
    let mut qmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        qmm *= -((2 * k + 1) as f64 / (2 * k) as f64).sqrt();
    }
    let mut out = vec![0.0; l_max + 1];
    if m > l_max {
        return out;
    }
    out[m] = qmm;
    if m < l_max {
        out[m + 1] = ((2 * m + 3) as f64).sqrt() * ct * qmm;
    }
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        out[l] = a * (ct * out[l - 1] - b * out[l - 2]);
    }
    out
}

fn angular_nonneg(l: usize, m: usize, theta: f64, phi: f64) -> Angular {
    let (st, ct) = theta.sin_cos();
    let phase = C::from_polar(1.0, m as f64 * phi);
    let q = q_column(m, l, ct)[l];
    let p = st.powi(m as i32) * q;
    // m Pbar / sin = m sin^(m-1) Q, finite at the poles
    let m_over_sin = if m == 0 { 0.0 } else { m as f64 * st.powi(m as i32 - 1) * q };
    let up = if m < l {
        let q1 = q_column(m + 1, l, ct)[l];
        (((l - m) * (l + m + 1)) as f64).sqrt() * st.powi(m as i32 + 1) * q1
    } else {
        0.0
    };
    let dp = m_over_sin * ct + up;
    Angular {
        y: phase * p,
        dtheta: phase * dp,
        im_over_sin: phase * C::new(0.0, m_over_sin),
    }
}

fn angular(l: usize, m: i64, theta: f64, phi: f64) -> Angular {
    let am = m.unsigned_abs() as usize;
    if am > l {
        let z = C::new(0.0, 0.0);
        return Angular { y: z, dtheta: z, im_over_sin: z };
    }
    let a = angular_nonneg(l, am, theta, phi);
    if m >= 0 {
        a
    } else {
        let s = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
        Angular {
            y: a.y.conj() * s,
            dtheta: a.dtheta.conj() * s,
            im_over_sin: a.im_over_sin.conj() * s,
        }
    }
}

fn radial_kind(variant: WaveVariant, k: C) -> Result<RadialFunctionKind> {
    match variant {
        WaveVariant::Regular => Ok(RadialFunctionKind::BesselJ),
        WaveVariant::Tilde => tilde_kind(k),
    }
}

fn radial_plain(kind: RadialFunctionKind, l: usize, z: C) -> Result<ScaledRadial> {
    Ok(radial_sequence(kind, l, z, DEFAULT_L_CAP.max(l))?[l])
}

/// Mode value in spherical components at `point`.
pub fn eval_vector_wave(spec: &VectorWave, point: &SphericalPoint) -> Result<Vec3> {
    wave(spec, point, false)
}

/// As [`eval_vector_wave`] with the angular factors conjugated and the radial
/// ones left alone.
pub fn eval_vector_wave_bullet(spec: &VectorWave, point: &SphericalPoint) -> Result<Vec3> {
    wave(spec, point, true)
}

fn wave(spec: &VectorWave, point: &SphericalPoint, bullet: bool) -> Result<Vec3> {
    point.validate()?;
    let l = spec.l;
    if spec.m.unsigned_abs() as usize > l {
        return Err(Error::Domain(format!("|m| = {} exceeds l = {l}", spec.m.abs())));
    }
    if spec.family != WaveFamily::L && l == 0 {
        return Err(Error::Domain("M and N waves need l >= 1".into()));
    }
    let k = spec.k;
    let r = point.r;
    let z = k * r;
    if spec.variant == WaveVariant::Tilde && z.norm() == 0.0 {
        return Err(Error::Domain("Hankel-based waves are singular at k r = 0".into()));
    }
    let s = radial_plain(radial_kind(spec.variant, k)?, l, z)?;
    let e = s.to_eval(l, z)?;
    let mut a = angular(l, spec.m, point.theta, point.phi);
    if bullet {
        a = Angular {
            y: a.y.conj(),
            dtheta: a.dtheta.conj(),
            im_over_sin: a.im_over_sin.conj(),
        };
    }
    let zero = C::new(0.0, 0.0);
    let ll = (l * (l + 1)) as f64;
    Ok(match spec.family {
        WaveFamily::M => {
            let c = (2.0 / (PI * ll)).sqrt() * k * e.value;
            [zero, c * a.im_over_sin, -c * a.dtheta]
        }
        WaveFamily::N => {
            let c = (2.0 / (PI * ll)).sqrt();
            let t = c * e.riccati_derivative / r;
            [c * ll * e.value / r * a.y, t * a.dtheta, t * a.im_over_sin]
        }
        WaveFamily::L => {
            let c = (2.0 / PI).sqrt();
            let t = c * e.value / r;
            [c * k * e.derivative * a.y, t * a.dtheta, t * a.im_over_sin]
        }
    })
}

/// Closed-form `m`-sums at one point: the left sides of
/// `sum_m |Y|^2`, `sum_m (r^.N~)(N~.r^)^bullet`, `sum_m M~.M~^bullet` and
/// `sum_m N~.N~^bullet`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSums {
    pub y_abs2: f64,
    pub n_radial: C,
    pub m_dot_m: C,
    pub n_dot_n: C,
}

/// Right-hand sides of the m-sum identities for tilde waves of order `l`.
pub fn msum_closed_forms(l: usize, k: C, r: f64) -> Result<MSums> {
    if l == 0 {
        return Err(Error::Domain("m-sums are defined for l >= 1".into()));
    }
    let z = k * r;
    let e = radial_plain(tilde_kind(k)?, l, z)?.to_eval(l, z)?;
    let h2 = e.value * e.value;
    let lf = l as f64;
    let w = (2.0 * lf + 1.0) / (2.0 * PI * PI);
    Ok(MSums {
        y_abs2: (2.0 * lf + 1.0) / (4.0 * PI),
        n_radial: w * h2 * lf * (lf + 1.0) / (r * r),
        m_dot_m: w * h2 * k * k,
        n_dot_n: w / (r * r) * (lf * (lf + 1.0) * h2 + e.riccati_derivative * e.riccati_derivative),
    })
}

/// The same sums by explicit loops over `m`.
pub fn msum_loops(l: usize, k: C, point: &SphericalPoint) -> Result<MSums> {
    let mut out = MSums {
        y_abs2: 0.0,
        n_radial: C::new(0.0, 0.0),
        m_dot_m: C::new(0.0, 0.0),
        n_dot_n: C::new(0.0, 0.0),
    };
    for m in -(l as i64)..=(l as i64) {
        let y = spherical_harmonic(l, m, point.theta, point.phi);
        out.y_abs2 += y.norm_sqr();
        let spec = |family| VectorWave {
            family,
            variant: WaveVariant::Tilde,
            l,
            m,
            k,
        };
        let mm = eval_vector_wave(&spec(WaveFamily::M), point)?;
        let mb = eval_vector_wave_bullet(&spec(WaveFamily::M), point)?;
        let nn = eval_vector_wave(&spec(WaveFamily::N), point)?;
        let nb = eval_vector_wave_bullet(&spec(WaveFamily::N), point)?;
        out.n_radial += nn[0] * nb[0];
        out.m_dot_m += (0..3).map(|i| mm[i] * mb[i]).sum::<C>();
        out.n_dot_n += (0..3).map(|i| nn[i] * nb[i]).sum::<C>();
    }
    Ok(out)
}

/// 3x3 complex dyadic in the spherical frames of its two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicValue {
    pub components: Mat3,
    /// Estimated size of the omitted partial waves (Frobenius norm).
    pub tail_estimate: f64,
    pub l_max: usize,
}

impl DyadicValue {
    pub fn norm(&self) -> f64 {
        frobenius(&self.components)
    }

    pub fn transpose(&self) -> DyadicValue {
        DyadicValue {
            components: transpose(&self.components),
            ..*self
        }
    }

    /// Cartesian components, given the two points the frames belong to.
    pub fn to_cartesian(&self, r: &SphericalPoint, rprime: &SphericalPoint) -> Mat3 {
        let a = r.frame();
        let b = rprime.frame();
        let mut out = [[C::new(0.0, 0.0); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                for (ap, gp) in a.iter().zip(&self.components) {
                    for (bq, g) in b.iter().zip(gp) {
                        *v += ap[i] * g * bq[j];
                    }
                }
            }
        }
        out
    }

    pub fn from_cartesian(g: &Mat3, r: &SphericalPoint, rprime: &SphericalPoint, tail: f64, l_max: usize) -> Self {
        let a = r.frame();
        let b = rprime.frame();
        let mut out = [[C::new(0.0, 0.0); 3]; 3];
        for (p, row) in out.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                for i in 0..3 {
                    for j in 0..3 {
                        *v += a[p][i] * g[i][j] * b[q][j];
                    }
                }
            }
        }
        DyadicValue {
            components: out,
            tail_estimate: tail,
            l_max,
        }
    }
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut t = *m;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

fn outer(a: [f64; 3], b: [f64; 3]) -> [[f64; 3]; 3] {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = a[i] * b[j];
        }
    }
    o
}

fn cross_matrix(n: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]]
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|p| a[i][p] * b[p][j]).sum();
        }
    }
    o
}

/// Angular dyadics of order `l` for directions `a`, `b` (Cartesian):
/// `sum_m Y Y*'`, `sum_m grad Y (x) Y*'`, `sum_m Y grad' Y*'`,
/// `sum_m grad Y (x) grad' Y*'`, surface gradients without the `1/r`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AngularSums {
    pub(crate) scalar: f64,
    pub(crate) grad_left: [f64; 3],
    pub(crate) grad_right: [f64; 3],
    pub(crate) grad_grad: [[f64; 3]; 3],
}

/// `P_l(u)`, `P_l'(u)`, `P_l''(u)` for `l = 0..=l_max`.
fn legendre_with_derivatives(l_max: usize, u: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push((1.0, 0.0, 0.0));
    if l_max >= 1 {
        out.push((u, 1.0, 0.0));
    }
    for l in 2..=l_max {
        let lf = l as f64;
        let (p1, d1, _) = out[l - 1];
        let (p2, d2, s2) = out[l - 2];
        let p = ((2.0 * lf - 1.0) * u * p1 - (lf - 1.0) * p2) / lf;
        let d = d2 + (2.0 * lf - 1.0) * p1;
        let s = s2 + (2.0 * lf - 1.0) * d1;
        out.push((p, d, s));
    }
    out
}

pub(crate) fn angular_sums(l_max: usize, a: [f64; 3], b: [f64; 3]) -> Vec<AngularSums> {
    let u = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let t: [f64; 3] = std::array::from_fn(|i| b[i] - u * a[i]);
    let tp: [f64; 3] = std::array::from_fn(|i| a[i] - u * b[i]);
    let mut proj = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { 1.0 } else { 0.0 };
            proj[i][j] = d - a[i] * a[j] - b[i] * b[j] + u * a[i] * b[j];
        }
    }
    let tt = outer(t, tp);
    legendre_with_derivatives(l_max, u)
        .into_iter()
        .enumerate()
        .map(|(l, (p, d, s))| {
            let c = (2 * l + 1) as f64 / (4.0 * PI);
            let mut gg = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    gg[i][j] = c * (s * tt[i][j] + d * proj[i][j]);
                }
            }
            AngularSums {
                scalar: c * p,
                grad_left: t.map(|v| c * d * v),
                grad_right: tp.map(|v| c * d * v),
                grad_grad: gg,
            }
        })
        .collect()
}

/// Radial factors of one wave at one point.
#[derive(Debug, Clone, Copy)]
struct Radial {
    /// `z(kr)`
    z: Scaled,
    /// `d/dz [z z(z)]` at `kr`
    psi: Scaled,
}

fn radial_factors(kind: RadialFunctionKind, l_max: usize, k: C, r: f64) -> Result<Vec<Radial>> {
    let seq = radial_sequence(kind, l_max, k * r, DEFAULT_L_CAP.max(l_max))?;
    Ok(seq
        .iter()
        .map(|s| Radial {
            z: Scaled::new(s.value, s.log_scale),
            psi: Scaled::new(s.riccati, s.log_scale),
        })
        .collect())
}

/// `sum_m [w_M M(r) (x) M'^bullet(r') + w_N N(r) (x) N'^bullet(r')]` for one
/// `l` in Cartesian components; the two waves carry independent radial
/// factors.
#[allow(clippy::too_many_arguments)]
fn mode_pair(
    l: usize,
    k: C,
    a: &SphericalPoint,
    b: &SphericalPoint,
    left: Radial,
    right: Radial,
    ang: &AngularSums,
    weights: (C, C),
) -> Mat3 {
    let ll = (l * (l + 1)) as f64;
    let norm = 2.0 / (PI * ll);
    let (ra, rb) = (a.r, b.r);
    let (na, nb) = (a.unit(), b.unit());
    let mut out = [[C::new(0.0, 0.0); 3]; 3];
    let c = |s: Scaled| s.to_complex();

    // M (x) M^bullet: k^2 z z' [r^ x] G [r^' x]^T
    let rm = cross_matrix(na);
    let rmp = cross_matrix(nb);
    let rgr = matmul(&matmul(&rm, &ang.grad_grad), &transpose_real(&rmp));
    let mm = c(left.z * right.z) * k * k * norm * weights.0;

    // N (x) N^bullet
    let zz = c(left.z * right.z) * (ll * ll / (ra * rb));
    let zp = c(left.z * right.psi) * (ll / (ra * rb));
    let pz = c(left.psi * right.z) * (ll / (ra * rb));
    let pp = c(left.psi * right.psi) / (ra * rb);
    let nn_w = norm * weights.1;
    let rr = outer(na, nb);
    let r_g = outer(na, ang.grad_right);
    let g_r = outer(ang.grad_left, nb);
    for i in 0..3 {
        for j in 0..3 {
            let n = zz * (ang.scalar * rr[i][j]) + zp * r_g[i][j] + pz * g_r[i][j] + pp * ang.grad_grad[i][j];
            out[i][j] = mm * rgr[i][j] + nn_w * n;
        }
    }
    out
}

fn transpose_real(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut t = *m;
    for i in 0..3 {
        for j in 0..3 {
            t[j][i] = m[i][j];
        }
    }
    t
}

fn add_into(acc: &mut Mat3, term: &Mat3, s: C) {
    for i in 0..3 {
        for j in 0..3 {
            acc[i][j] += s * term[i][j];
        }
    }
}

/// Geometric estimate of the omitted tail from the last two term norms.
fn tail_of(norms: &[f64]) -> f64 {
    match norms {
        [.., a, b] if *a > 0.0 && b < a => {
            let q = b / a;
            b * q / (1.0 - q)
        }
        [.., b] => *b,
        [] => 0.0,
    }
}

/// Transverse bulk Green tensor `G(r, r')` of a homogeneous medium for
/// `r != r'`, summed to `l_max`. Fails with [`Error::TailTooLarge`] when
/// the estimated remainder exceeds `tol` relative to the result.
pub fn bulk_green(
    material: &MaterialModel,
    omega: C,
    r: &SphericalPoint,
    rprime: &SphericalPoint,
    l_max: usize,
    tol: f64,
) -> Result<DyadicValue> {
    r.validate()?;
    rprime.validate()?;
    material.validate()?;
    if r.to_cartesian() == rprime.to_cartesian() {
        return Err(Error::Domain("bulk Green tensor is singular at r = r'".into()));
    }
    if l_max == 0 {
        return Err(Error::Domain("l_max must be >= 1".into()));
    }
    let k = eval_wavenumber(material, omega, 1.0)?;
    let mu = eval_mu(material, omega)?;
    // regular wave at the smaller radius, outgoing at the larger
    let (inner, outer_pt, swapped) = if r.r <= rprime.r { (r, rprime, false) } else { (rprime, r, true) };
    let reg = radial_factors(RadialFunctionKind::BesselJ, l_max, k, inner.r)?;
    let out = radial_factors(tilde_kind(k)?, l_max, k, outer_pt.r)?;
    let ang = angular_sums(l_max, r.unit(), rprime.unit());
    let pre = C::new(0.0, PI / 2.0) / k * mu;
    let mut g = [[C::new(0.0, 0.0); 3]; 3];
    let mut norms = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let (left, right) = if swapped { (out[l], reg[l]) } else { (reg[l], out[l]) };
        let one = C::new(1.0, 0.0);
        let term = mode_pair(l, k, r, rprime, left, right, &ang[l], (one, one));
        norms.push(frobenius(&term) * pre.norm());
        add_into(&mut g, &term, pre);
    }
    finish_green(g, r, rprime, &norms, l_max, tol)
}

fn finish_green(g: Mat3, r: &SphericalPoint, rp: &SphericalPoint, norms: &[f64], l_max: usize, tol: f64) -> Result<DyadicValue> {
    let tail = tail_of(norms);
    let v = DyadicValue::from_cartesian(&g, r, rp, tail, l_max);
    if !(tail <= tol * v.norm()) {
        return Err(Error::TailTooLarge { tail, tol, l_max });
    }
    Ok(v)
}

/// Scattering part of the Green tensor for two points outside a (layered)
/// sphere, summed to `l_max`.
pub fn scattering_green_exterior(
    geom: &SphereGeometry,
    omega: C,
    r: &SphericalPoint,
    rprime: &SphericalPoint,
    l_max: usize,
    tol: f64,
) -> Result<DyadicValue> {
    r.validate()?;
    rprime.validate()?;
    geom.validate()?;
    let big_r = geom.radius();
    if r.r <= big_r || rprime.r <= big_r {
        return Err(Error::Geometry(format!(
            "both points must lie outside the sphere (R = {big_r}), got r = {}, r' = {}",
            r.r, rprime.r
        )));
    }
    if l_max == 0 {
        return Err(Error::Domain("l_max must be >= 1".into()));
    }
    let k = eval_wavenumber(&geom.exterior, omega, 1.0)?;
    let mu = eval_mu(&geom.exterior, omega)?;
    let refl = reflection_series(geom, omega, l_max, DEFAULT_L_CAP.max(l_max))?;
    let kind = tilde_kind(k)?;
    let ha = radial_factors(kind, l_max, k, r.r)?;
    let hb = radial_factors(kind, l_max, k, rprime.r)?;
    let ang = angular_sums(l_max, r.unit(), rprime.unit());
    let pre = C::new(0.0, PI / 2.0) / k * mu;
    let mut g = [[C::new(0.0, 0.0); 3]; 3];
    let mut norms = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let p = refl[l - 1];
        // fold the reflection scale into the left radial factor so that
        // r_l h h' stays representable
        let shift = p.te.log_scale.max(p.tm.log_scale);
        let left = Radial {
            z: Scaled::new(ha[l].z.mant, ha[l].z.log_scale + shift),
            psi: Scaled::new(ha[l].psi.mant, ha[l].psi.log_scale + shift),
        };
        let w = (
            Scaled::new(p.te.mant, p.te.log_scale - shift).to_complex(),
            Scaled::new(p.tm.mant, p.tm.log_scale - shift).to_complex(),
        );
        let term = mode_pair(l, k, r, rprime, left, hb[l], &ang[l], w);
        norms.push(frobenius(&term) * pre.norm());
        add_into(&mut g, &term, pre);
    }
    finish_green(g, r, rprime, &norms, l_max, tol)
}

/// Static multipole part of the longitudinal delta dyadic for one `l`:
/// `grad grad' [r_<^l / ((2l+1) r_>^(l+1)) sum_m Y Y*']`, Cartesian, `r != r'`.
pub(crate) fn longitudinal_static(l: usize, a: &SphericalPoint, b: &SphericalPoint) -> Mat3 {
    let ang = angular_sums(l, a.unit(), b.unit())[l];
    let (na, nb) = (a.unit(), b.unit());
    let lf = l as f64;
    // f(r) g(r') with f, g powers; grad = r^ d/dr + (1/r) surface grad
    let (f, fp, g, gp) = if a.r < b.r {
        (a.r.powi(l as i32), lf * a.r.powi(l as i32 - 1), b.r.powi(-(l as i32) - 1), -(lf + 1.0) * b.r.powi(-(l as i32) - 2))
    } else {
        (a.r.powi(-(l as i32) - 1), -(lf + 1.0) * a.r.powi(-(l as i32) - 2), b.r.powi(l as i32), lf * b.r.powi(l as i32 - 1))
    };
    let s = 1.0 / (2.0 * lf + 1.0);
    let mut out = [[C::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let v = fp * gp * ang.scalar * na[i] * nb[j]
                + fp * g / b.r * na[i] * ang.grad_right[j]
                + f / a.r * gp * ang.grad_left[i] * nb[j]
                + f / a.r * g / b.r * ang.grad_grad[i][j];
            out[i][j] = C::new(s * v, 0.0);
        }
    }
    out
}

/// Mode-integral form of one bulk partial wave: the `k'` integrand
/// `[M M* + N N*]_l / (k'^2 - k^2)` in Cartesian components.
pub(crate) fn mode_integrand(l: usize, kp: f64, k: C, a: &SphericalPoint, b: &SphericalPoint) -> Result<Mat3> {
    let kr = C::new(kp, 0.0);
    let ra = radial_factors(RadialFunctionKind::BesselJ, l, kr, a.r)?[l];
    let rb = radial_factors(RadialFunctionKind::BesselJ, l, kr, b.r)?[l];
    let ang = angular_sums(l, a.unit(), b.unit());
    let one = C::new(1.0, 0.0);
    let t = mode_pair(l, kr, a, b, ra, rb, &ang[l], (one, one));
    let d = (kr * kr - k * k).inv();
    Ok(t.map(|row| row.map(|v| v * d)))
}

/// Transverse bulk Green tensor summed to `l_max` from the mode integral over
/// real `k'` minus the static longitudinal term, in the spherical frames.
///
/// The `k'` integrand only oscillates beyond `K = k_max_factor |k|`, so it is
/// tapered linearly to zero over `[K, 2K]`, which averages the truncation
/// error away. Slow; meant as an independent check of [`bulk_green`].
pub fn bulk_green_mode_integral(
    material: &MaterialModel,
    omega: C,
    r: &SphericalPoint,
    rprime: &SphericalPoint,
    l_max: usize,
    k_max_factor: f64,
    rel_tol: f64,
) -> Result<DyadicValue> {
    let k = eval_wavenumber(material, omega, 1.0)?;
    let mu = eval_mu(material, omega)?;
    let k_max = k_max_factor * k.norm();
    let scale = k.re.abs().max(k.norm() * 0.5);
    let mut breaks = vec![0.0];
    breaks.extend(
        [0.5, 0.9, 1.0, 1.1, 1.5, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|f| f * scale)
            .filter(|&x| x < k_max),
    );
    breaks.push(k_max);
    breaks.dedup();
    let mut near = [[C::new(0.0, 0.0); 3]; 3];
    let mut far = [[C::new(0.0, 0.0); 3]; 3];
    for l in 1..=l_max {
        for i in 0..3 {
            for j in 0..3 {
                let mut f = |kp: f64| -> Result<C> { Ok(mode_integrand(l, kp, k, r, rprime)?[i][j]) };
                near[i][j] += crate::quad::adaptive(&mut f, &breaks, 1e-14, rel_tol, 20_000)?.value * mu;
                let mut w = |kp: f64| -> Result<C> { Ok(f(kp)? * ((2.0 * k_max - kp) / k_max)) };
                far[i][j] += crate::quad::adaptive(&mut w, &[k_max, 2.0 * k_max], 1e-14, rel_tol, 20_000)?.value * mu;
            }
        }
        add_into(&mut near, &longitudinal_static(l, r, rprime), -mu / (k * k));
    }
    let mut g = near;
    add_into(&mut g, &far, C::new(1.0, 0.0));
    Ok(DyadicValue::from_cartesian(&g, r, rprime, 0.0, l_max))
}
