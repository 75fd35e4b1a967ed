//! Spherical Bessel and Hankel functions of complex argument.
//!
//! `j_l` comes from Miller's downward recurrence normalized against the
//! closed forms of `j_0`/`j_1`; `h_l^(1)` and `h_l^(2)` come from upward
//! recurrence seeded with their closed forms. Derivatives always use
//! `S_l' = S_{l-1} - (l+1)/z S_l` and the Riccati form
//! `d/dz[z S_l] = z S_{l-1} - l S_l`.
//!
//! All sequence routines work internally with [`Scaled`] numbers so that
//! orders in the hundreds at arguments near zero (or deep on the imaginary
//! axis) never overflow. The unscaled [`sph_bessel`] reports
//! [`Error::Overflow`] when the plain value is not representable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scaled::Scaled;

pub const DEFAULT_L_CAP: usize = 512;

const RESCALE_AT: f64 = 1e100;
const SERIES_RADIUS: f64 = 1.0;
const TINY_ARGUMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RadialFunctionKind {
    /// Regular spherical Bessel function `j_l`.
    BesselJ,
    /// Outgoing spherical Hankel function `h_l^(1)`.
    HankelOut,
    /// Incoming spherical Hankel function `h_l^(2)`.
    HankelIn,
}

/// A radial function with its derivative and Riccati derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEval {
    pub value: Complex64,
    pub derivative: Complex64,
    /// `d/dz [z S_l(z)]`
    pub riccati_derivative: Complex64,
}

/// Same content as [`RadialEval`] with a shared exponent:
/// the true values are the mantissas times `exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRadial {
    pub value: Complex64,
    pub derivative: Complex64,
    pub riccati: Complex64,
    pub log_scale: f64,
}

impl ScaledRadial {
    pub fn value_scaled(&self) -> Scaled {
        Scaled::new(self.value, self.log_scale)
    }

    pub fn riccati_scaled(&self) -> Scaled {
        Scaled::new(self.riccati, self.log_scale)
    }

    pub fn to_eval(&self, l: usize, z: Complex64) -> Result<RadialEval> {
        let peak = self
            .value
            .norm()
            .max(self.derivative.norm())
            .max(self.riccati.norm());
        if peak > 0.0 && peak.ln() + self.log_scale > 709.0 {
            return Err(Error::Overflow { l, z });
        }
        let f = |m: Complex64| Scaled::new(m, self.log_scale).to_complex();
        Ok(RadialEval {
            value: f(self.value),
            derivative: f(self.derivative),
            riccati_derivative: f(self.riccati),
        })
    }

    fn renormalized(mut self) -> Self {
        let peak = self
            .value
            .norm()
            .max(self.derivative.norm())
            .max(self.riccati.norm());
        if peak > 0.0 && peak.is_finite() {
            self.value /= peak;
            self.derivative /= peak;
            self.riccati /= peak;
            self.log_scale += peak.ln();
        }
        self
    }
}

/// Evaluates `S_l(z)` of the given kind with the default order cap.
pub fn sph_bessel(kind: RadialFunctionKind, l: usize, z: Complex64) -> Result<RadialEval> {
    sph_bessel_capped(kind, l, z, DEFAULT_L_CAP)
}

pub fn sph_bessel_capped(
    kind: RadialFunctionKind,
    l: usize,
    z: Complex64,
    l_cap: usize,
) -> Result<RadialEval> {
    let seq = radial_sequence(kind, l, z, l_cap)?;
    seq[l].to_eval(l, z)
}

/// Hankel function selection for wavenumber `k`: outgoing for `Im k > 0`,
/// incoming for `Im k < 0`. On the real axis the `omega + i0` rule applies,
/// which always lands on the outgoing function.
pub fn tilde_kind(k: Complex64) -> Result<RadialFunctionKind> {
    if k.re == 0.0 && k.im == 0.0 {
        return Err(Error::Domain("tilde Hankel requires k != 0".into()));
    }
    Ok(if k.im < 0.0 {
        RadialFunctionKind::HankelIn
    } else {
        RadialFunctionKind::HankelOut
    })
}

/// `h~_l(k r)` with the branch chosen by [`tilde_kind`].
pub fn tilde_hankel(l: usize, k: Complex64, r: f64) -> Result<RadialEval> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let kind = tilde_kind(k)?;
    sph_bessel(kind, l, k * r)
}

/// `|j_l h_l^(1)' - j_l' h_l^(1) - i/z^2|`, a self-check of the recurrences.
pub fn wronskian_residual(l: usize, z: Complex64) -> Result<f64> {
    let (w, _) = wronskian_parts(l, z)?;
    Ok((w - Complex64::i() / (z * z)).norm())
}

/// Same deviation divided by the magnitude of the two products it is formed
/// from. Where `j_l` and `h_l^(1)` are both exponentially large
/// (`Im z << 0`) the absolute residual is dominated by their rounding.
pub fn wronskian_residual_relative(l: usize, z: Complex64) -> Result<f64> {
    let (w, scale) = wronskian_parts(l, z)?;
    let target = Complex64::i() / (z * z);
    Ok((w - target).norm() / scale.max(target.norm()))
}

fn wronskian_parts(l: usize, z: Complex64) -> Result<(Complex64, f64)> {
    if z.norm() == 0.0 {
        return Err(Error::Domain("Wronskian undefined at z = 0".into()));
    }
    let j = radial_sequence(RadialFunctionKind::BesselJ, l, z, DEFAULT_L_CAP)?[l];
    let h = radial_sequence(RadialFunctionKind::HankelOut, l, z, DEFAULT_L_CAP)?[l];
    let log = j.log_scale + h.log_scale;
    let a = Scaled::new(j.value * h.derivative, log);
    let b = Scaled::new(j.derivative * h.value, log);
    let w = a.sub(b).to_complex();
    let scale = a.to_complex().norm() + b.to_complex().norm();
    Ok((w, scale))
}

/// Values, derivatives and Riccati derivatives for `l = 0..=l_max`.
pub fn radial_sequence(
    kind: RadialFunctionKind,
    l_max: usize,
    z: Complex64,
    l_cap: usize,
) -> Result<Vec<ScaledRadial>> {
    if l_max > l_cap {
        return Err(Error::OrderCap { l: l_max, cap: l_cap });
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    let zero = z.re == 0.0 && z.im == 0.0;
    match kind {
        RadialFunctionKind::BesselJ if zero => Ok(bessel_j_at_origin(l_max)),
        RadialFunctionKind::BesselJ => Ok(with_derivatives(&bessel_j_values(l_max + 1, z), z, l_max)),
        _ if zero => Err(Error::Domain(
            "spherical Hankel functions are singular at z = 0".into(),
        )),
        RadialFunctionKind::HankelOut => {
            Ok(with_derivatives(&hankel_values(l_max + 1, z, true), z, l_max))
        }
        RadialFunctionKind::HankelIn => {
            Ok(with_derivatives(&hankel_values(l_max + 1, z, false), z, l_max))
        }
    }
}

fn bessel_j_at_origin(l_max: usize) -> Vec<ScaledRadial> {
    (0..=l_max)
        .map(|l| {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            ScaledRadial {
                value: if l == 0 { one } else { zero },
                derivative: if l == 1 { one / 3.0 } else { zero },
                riccati: if l == 0 { one } else { zero },
                log_scale: 0.0,
            }
        })
        .collect()
}

fn with_derivatives(values: &[Scaled], z: Complex64, l_max: usize) -> Vec<ScaledRadial> {
    (0..=l_max)
        .map(|l| {
            let s = values[l];
            let (prev, prev_coef) = if l == 0 {
                // S_0' = -S_1, riccati = S_0 - z S_1
                (values[1], -1.0)
            } else {
                (values[l - 1], 1.0)
            };
            let shift = prev.log_scale - s.log_scale;
            let p = if shift < -745.0 {
                Complex64::new(0.0, 0.0)
            } else {
                prev.mant * shift.exp() * prev_coef
            };
            let lf = l as f64;
            let (derivative, riccati) = if l == 0 {
                (p, s.mant + z * p)
            } else {
                (p - s.mant * (lf + 1.0) / z, z * p - s.mant * lf)
            };
            ScaledRadial {
                value: s.mant,
                derivative,
                riccati,
                log_scale: s.log_scale,
            }
            .renormalized()
        })
        .collect()
}

/// `sin z` and `cos z` divided by `exp(|Im z|)`.
fn scaled_trig(z: Complex64) -> (Complex64, Complex64, f64) {
    let (x, y) = (z.re, z.im);
    let e = (-2.0 * y.abs()).exp();
    let ch = 0.5 * (1.0 + e);
    let sh = 0.5 * (1.0 - e) * y.signum();
    let (sx, cx) = x.sin_cos();
    let sin = Complex64::new(sx * ch, cx * sh);
    let cos = Complex64::new(cx * ch, -sx * sh);
    (sin, cos, y.abs())
}

/// Power series of `j_l` around the origin; used for `|z| < 1`.
fn j_series(l: usize, z: Complex64) -> Scaled {
    let mut dfact = 0.0;
    for k in 1..=l {
        dfact += ((2 * k + 1) as f64).ln();
    }
    let w = -0.5 * z * z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..60 {
        term = term * w / ((k as f64) * ((2 * l + 2 * k + 1) as f64));
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let lead = if l == 0 {
        Scaled::from_complex(Complex64::new(1.0, 0.0))
    } else {
        let unit = z / z.norm();
        Scaled::new(unit.powu(l as u32), l as f64 * z.norm().ln())
    };
    Scaled::new(lead.mant * sum, lead.log_scale - dfact)
}

fn j_closed(l: usize, z: Complex64) -> Scaled {
    debug_assert!(l <= 1);
    if z.norm() < SERIES_RADIUS {
        return j_series(l, z);
    }
    let (s, c, log) = scaled_trig(z);
    let m = if l == 0 { s / z } else { (s / z - c) / z };
    Scaled::new(m, log)
}

/// `j_0 ..= j_top`, Miller's algorithm.
fn bessel_j_values(top: usize, z: Complex64) -> Vec<Scaled> {
    let az = z.norm();
    if az < TINY_ARGUMENT {
        return (0..=top).map(|l| j_series(l, z)).collect();
    }
    let start = top + az.ceil() as usize + 40 + (4.0 * az.cbrt()).ceil() as usize;
    let mut stored = vec![Scaled::ZERO; top + 1];
    let mut upper = Complex64::new(0.0, 0.0);
    let mut cur = Complex64::new(1.0, 0.0);
    let mut log = 0.0f64;
    let step = RESCALE_AT.ln();
    for l in (1..=start).rev() {
        if l <= top {
            stored[l] = Scaled { mant: cur, log_scale: log };
        }
        let next = cur * ((2 * l + 1) as f64) / z - upper;
        upper = cur;
        cur = next;
        if cur.norm() > RESCALE_AT {
            cur /= RESCALE_AT;
            upper /= RESCALE_AT;
            log += step;
        }
    }
    stored[0] = Scaled { mant: cur, log_scale: log };

    // Normalize against whichever of j_0, j_1 is larger so that a zero of
    // j_0 on the real axis does not poison the sequence.
    let t0 = j_closed(0, z);
    let t1 = j_closed(1, z);
    let (truth, raw) = if top >= 1 && t1.ln_abs() > t0.ln_abs() {
        (t1, stored[1])
    } else {
        (t0, stored[0])
    };
    let factor = truth.div(raw);
    stored.into_iter().map(|s| (s * factor).normalized()).collect()
}

/// `h_0 ..= h_top`; `outgoing` selects `h^(1)`.
///
/// Upward recurrence is stable for `h^(1)` when `Im z >= 0` and for `h^(2)`
/// when `Im z <= 0`. In the other half-plane the requested function is the
/// recessive one across `l ~ |z|`, so it is formed as `2 j - h^(other)`.
fn hankel_values(top: usize, z: Complex64, outgoing: bool) -> Vec<Scaled> {
    let unstable = if outgoing { z.im < 0.0 } else { z.im > 0.0 };
    if unstable {
        let other = hankel_upward(top, z, !outgoing);
        let j = bessel_j_values(top, z);
        return j
            .into_iter()
            .zip(other)
            .map(|(j, o)| j.scale_by(Complex64::new(2.0, 0.0)).sub(o))
            .collect();
    }
    hankel_upward(top, z, outgoing)
}

fn hankel_upward(top: usize, z: Complex64, outgoing: bool) -> Vec<Scaled> {
    let i = Complex64::i();
    // h^(1) = e^{iz} * (...) and h^(2) = e^{-iz} * (...); the modulus of the
    // exponential goes into the log scale, the phase stays in the mantissa.
    let (phase, log, h0, h1) = if outgoing {
        let ph = Complex64::from_polar(1.0, z.re);
        (ph, -z.im, -i / z, -(z + i) / (z * z))
    } else {
        let ph = Complex64::from_polar(1.0, -z.re);
        (ph, z.im, i / z, -(z - i) / (z * z))
    };
    let mut out = Vec::with_capacity(top + 1);
    let mut prev = h0 * phase;
    let mut cur = h1 * phase;
    let mut log = log;
    out.push(Scaled { mant: prev, log_scale: log });
    if top >= 1 {
        out.push(Scaled { mant: cur, log_scale: log });
    }
    let step = RESCALE_AT.ln();
    for l in 1..top {
        let next = cur * ((2 * l + 1) as f64) / z - prev;
        prev = cur;
        cur = next;
        if cur.norm() > RESCALE_AT {
            cur /= RESCALE_AT;
            prev /= RESCALE_AT;
            log += step;
        }
        out.push(Scaled { mant: cur, log_scale: log });
    }
    out.into_iter().map(Scaled::normalized).collect()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use RadialFunctionKind::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // (l, Re z, Im z, kind, Re S_l, Im S_l) from a 40-digit mpmath evaluation
    // of sqrt(pi/2z) J_{l+1/2}(z) and the matching Hankel combinations.
    const ORACLE: &[(usize, f64, f64, &str, f64, f64)] = &[
        (0, 1.0, 0.0, "J", 0.84147098480789651, 0.0),
        (0, 1.0, 0.0, "O", 0.84147098480789651, -0.54030230586813972),
        (1, 0.5, 0.0, "J", 0.16253703063606657, 0.0),
        (1, 0.5, 0.0, "O", 0.16253703063606657, -4.4691813247698969),
        (5, 3.0, 4.0, "J", -0.337370080989929, -0.23551620129289757),
        (5, 3.0, 4.0, "O", 0.034566615777332697, 0.011377983870115441),
        (5, 3.0, 4.0, "I", -0.7093067777571907, -0.48241038645591058),
        (10, 0.001, 0.0, "J", 7.2730917874467316e-41, 0.0),
        (10, 0.001, 0.0, "O", 7.2730917874467316e-41, -6.547290922297126e+41),
        (50, 10.0, 0.0, "J", 2.2306960232186469e-31, 0.0),
        (50, 10.0, 0.0, "I", 2.2306960232186469e-31, 4.5282272723512588e+27),
        (3, -2.0, 0.5, "J", -0.055009877540441958, 0.039218702131599189),
        (3, -2.0, 0.5, "O", 0.7919168688245723, -0.91259392820040555),
        (3, -2.0, 0.5, "I", -0.90193662390545621, 0.99103133246360393),
        (20, 0.0, 7.0, "J", 1.0682361152060769e-8, 0.0),
        (20, 0.0, 7.0, "O", -308645.92633811197, 0.0),
        (100, 30.0, -5.0, "J", -1.7162456150127123e-42, 8.8979375968742248e-44),
        (100, 30.0, -5.0, "O", -1.9849255903576385e+37, 9.757307485228229e+37),
        (200, 150.0, 0.1, "J", 5.497943325010826e-15, 4.8937879465928832e-16),
        (200, 150.0, 0.1, "O", -401661593.24365667, -4521768914.0745001),
        (7, 500.0, 2.0, "J", -0.0064268837278854965, 0.0037716564002275043),
        (7, 500.0, 2.0, "O", -0.00023239101274937423, -0.00013891306642307733),
        (7, 500.0, 2.0, "I", -0.012621376443021619, 0.0076822258668780859),
        (2, 1000.0, 0.0, "J", -0.00082856419712225307, 0.0),
        (2, 1000.0, 0.0, "O", -0.00082856419712225307, 0.00055989675053187811),
        (40, 0.3, -0.2, "J", -1.251054361484418e-80, 2.9374796945998696e-79),
        (40, 0.3, -0.2, "O", -9.956491416131743e+76, -6.0415695635492628e+76),
        (1, 0.0, 0.1, "J", 0.0, 0.033366678573633409),
        (1, 0.0, 0.1, "O", 0.0, 99.532115983955542),
        (1, 0.0, 0.1, "I", 0.0, -99.465382626808275),
        (150, 5.0, 5.0, "J", -1.9310240056326077e-183, -2.335088290663344e-182),
        (150, 5.0, 5.0, "O", 1.5313766120052229e+178, -1.2945435567107884e+178),
        (0, 0.0, -30.0, "J", 178107909692.07437, 0.0),
        (0, 0.0, -30.0, "O", 356215819384.14874, 0.0),
        (0, 0.0, -30.0, "I", -3.1192076562800579e-15, 0.0),
        (12, 0.0, 25.0, "J", 63775041.769127576, 0.0),
        (12, 0.0, 25.0, "O", -1.1219773853173443e-11, 0.0),
        (12, 0.0, 25.0, "I", 127550083.53825515, 0.0),
    ];

    #[test]
    fn matches_high_precision_oracle() {
        for &(l, re, im, k, vr, vi) in ORACLE {
            let kind = match k {
                "J" => BesselJ,
                "O" => HankelOut,
                _ => HankelIn,
            };
            let got = sph_bessel(kind, l, c(re, im)).unwrap().value;
            let want = c(vr, vi);
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-10, "{kind:?} l={l} z={re}+{im}i: {got} vs {want} (rel {rel:e})");
        }
    }

    #[test]
    fn worked_examples() {
        assert_eq!(sph_bessel(BesselJ, 1, c(0.0, 0.0)).unwrap().value, c(0.0, 0.0));
        let j0 = sph_bessel(BesselJ, 0, c(1.0, 0.0)).unwrap().value;
        assert!((j0.re - 0.8414709848078965).abs() < 1e-14 && j0.im == 0.0);
        // h_0^(1)(i) = -i e^{-1} / i = -e^{-1}
        let h = sph_bessel(HankelOut, 0, c(0.0, 1.0)).unwrap().value;
        assert!((h - c(-0.36787944117144233, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hankel_at_origin_is_a_domain_error() {
        assert!(matches!(sph_bessel(HankelOut, 0, c(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(sph_bessel(HankelIn, 3, c(0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(matches!(
            sph_bessel(BesselJ, 513, c(1.0, 0.0)),
            Err(Error::OrderCap { l: 513, cap: 512 })
        ));
        assert!(sph_bessel_capped(BesselJ, 600, c(1.0, 0.0), 1000).is_ok());
    }

    #[test]
    fn overflow_is_reported_for_unscaled_values() {
        assert!(matches!(
            sph_bessel(HankelOut, 300, c(0.01, 0.0)),
            Err(Error::Overflow { l: 300, .. })
        ));
        // the scaled sequence is fine there
        let seq = radial_sequence(HankelOut, 300, c(0.01, 0.0), DEFAULT_L_CAP).unwrap();
        assert!(seq[300].log_scale > 1000.0);
    }

    #[test]
    fn tilde_dispatch() {
        let k = c(1.0, 0.1);
        assert_eq!(tilde_hankel(0, k, 1.0).unwrap(), sph_bessel(HankelOut, 0, k).unwrap());
        let k = c(1.0, -0.1);
        assert_eq!(tilde_hankel(0, k, 1.0).unwrap(), sph_bessel(HankelIn, 0, k).unwrap());
        let k = c(1.0, 0.0);
        assert_eq!(tilde_hankel(0, k, 1.0).unwrap(), sph_bessel(HankelOut, 0, k).unwrap());
        assert!(tilde_hankel(0, c(0.0, 0.0), 1.0).is_err());
        assert!(tilde_hankel(0, k, 0.0).is_err());
    }

    #[test]
    fn wronskian_examples() {
        assert!(wronskian_residual(0, c(1.0, 0.0)).unwrap() < 1e-12);
        assert!(wronskian_residual(5, c(3.0, 4.0)).unwrap() < 1e-10);
        assert!(wronskian_residual(50, c(10.0, 0.0)).unwrap() < 1e-8);
    }

    #[test]
    fn riccati_identity_is_exact() {
        for &(l, z) in &[(0, c(2.0, 1.0)), (4, c(0.3, -0.2)), (17, c(0.0, 9.0))] {
            for kind in [BesselJ, HankelOut, HankelIn] {
                let e = sph_bessel(kind, l, z).unwrap();
                let resid = e.riccati_derivative - e.value - z * e.derivative;
                let scale = e.riccati_derivative.norm() + e.value.norm();
                assert!(resid.norm() <= 1e-14 * scale, "{kind:?} l={l}");
            }
        }
    }

    #[test]
    fn small_argument_law() {
        let z = c(6e-4, 8e-4);
        let mut dfact = 1.0f64;
        for l in 0..30usize {
            if l > 0 {
                dfact *= (2 * l + 1) as f64;
            }
            let seq = radial_sequence(BesselJ, l, z, DEFAULT_L_CAP).unwrap();
            let ln_ratio = seq[l].value_scaled().ln_abs() - (l as f64 * z.norm().ln() - dfact.ln());
            assert!(ln_ratio.abs() < 1e-6, "l={l}: {ln_ratio:e}");
        }
    }

    #[test]
    fn bessel_j_crosses_zero_of_j0() {
        // j_0(pi) = 0; normalization must switch to j_1
        let z = c(std::f64::consts::PI, 0.0);
        let j0 = sph_bessel(BesselJ, 0, z).unwrap().value;
        assert!(j0.norm() < 1e-15);
        let j1 = sph_bessel(BesselJ, 1, z).unwrap().value;
        assert!((j1.re - 1.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn tiny_arguments_use_the_series() {
        let z = c(0.0, 1e-10);
        let h = radial_sequence(HankelOut, 40, z, DEFAULT_L_CAP).unwrap();
        let j = radial_sequence(BesselJ, 40, z, DEFAULT_L_CAP).unwrap();
        // j_l h_l = -i / ((2l+1) z) at leading order
        for l in [1usize, 10, 40] {
            let p = (j[l].value_scaled() * h[l].value_scaled()).to_complex();
            let want = -Complex64::i() / (((2 * l + 1) as f64) * z);
            assert!((p - want).norm() / want.norm() < 1e-12, "l={l}");
        }
    }
}
