//! Radial Casimir stress `T_RR` on the outer surface of a sphere in vacuum.
//!
//! With `S(w) = sum_l (2l+1)(r_TE + r_TM) F_l(w)` and reduced units
//! (`R = c = hbar = k_B = 1`, stress in `hbar c / R^4`):
//!
//! ```text
//! T_RR = 1/(8 pi^2) int_0^inf dx coth(x / 2t) Re[x S(x)]        real axis
//!      = -(t / 4 pi) sum'_n xi_n S(i xi_n),   xi_n = 2 pi n t    Matsubara
//!      = -1/(8 pi^2) int_0^inf dxi xi S(i xi)                    t = 0
//! ```
//!
//! The primed sum gives `n = 0` half weight; its `xi S(i xi)` is the finite
//! static limit. `F_l` is evaluated at `r = R(1 + standoff)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mie::{reflection_series, SphereGeometry};
use crate::quad;
use crate::scaled::Scaled;
use crate::specfun::{radial_sequence, tilde_kind, DEFAULT_L_CAP};

const BLOCK: usize = 4;
const N_BLOCK: usize = 16;
/// Stand-in for `xi -> 0` in the static Matsubara term.
const STATIC_XI: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressOptions {
    /// Relative tolerance for every truncated sum and integral.
    pub tol: f64,
    pub l_cap: usize,
    pub n_cap: usize,
    /// Evaluate at `r = R(1 + standoff)`.
    pub standoff: f64,
}

impl Default for StressOptions {
    fn default() -> Self {
        StressOptions {
            tol: 1e-6,
            l_cap: DEFAULT_L_CAP,
            n_cap: 100_000,
            standoff: 0.0,
        }
    }
}

impl StressOptions {
    pub fn with_standoff(standoff: f64) -> Self {
        StressOptions {
            standoff,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Domain(format!("tol = {} must lie in (0, 1)", self.tol)));
        }
        if !(self.standoff >= 0.0 && self.standoff.is_finite()) {
            return Err(Error::Domain(format!("standoff = {} must be >= 0", self.standoff)));
        }
        if self.l_cap == 0 || self.n_cap == 0 {
            return Err(Error::Domain("l_cap and n_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StressMode {
    Matsubara,
    ImagAxisT0,
    RealAxisDiagnostic,
}

/// One partial wave of the stress integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressKernelTerm {
    pub l: usize,
    pub f_l: Complex64,
    pub r_te: Complex64,
    pub r_tm: Complex64,
    pub weight: f64,
}

impl StressKernelTerm {
    pub fn contribution(&self) -> Complex64 {
        (self.r_te + self.r_tm) * self.f_l * self.weight
    }
}

/// Convergence record of the l-sum at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyDiagnostic {
    /// Matsubara index, when the frequency is one.
    pub n: Option<usize>,
    pub omega: Complex64,
    pub l_max: usize,
    pub tail: f64,
    /// `xi S(i xi)` on the imaginary axis, `x Re S(x)` elsewhere.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressResult {
    /// `T_RR` in units of `hbar c / R^4`.
    pub t_rr: f64,
    /// `k_B T R / (hbar c)`.
    pub temperature: f64,
    pub l_max_used: usize,
    pub n_max_used: usize,
    /// Estimated absolute truncation error of `t_rr`.
    pub tail_estimate: f64,
    pub tol: f64,
    pub mode: StressMode,
    pub standoff: f64,
    pub converged: bool,
    /// Accumulated `|Im|` of summands that should be real.
    pub imaginary_residue: f64,
    pub frequencies: Vec<FrequencyDiagnostic>,
}

impl StressResult {
    fn empty(mode: StressMode, temperature: f64, opts: &StressOptions) -> Self {
        StressResult {
            t_rr: 0.0,
            temperature,
            l_max_used: 0,
            n_max_used: 0,
            tail_estimate: 0.0,
            tol: opts.tol,
            mode,
            standoff: opts.standoff,
            converged: true,
            imaginary_residue: 0.0,
            frequencies: Vec::new(),
        }
    }
}

fn check_geometry(geom: &SphereGeometry) -> Result<SphereGeometry> {
    geom.validate()?;
    if !geom.exterior.is_vacuum() {
        return Err(Error::Geometry("the stress formula assumes a vacuum exterior".into()));
    }
    Ok(geom.reduced())
}

/// `F_l` and reflection coefficients at the outer radius (no standoff).
/// Units follow the geometry: `omega` in `c / length`, `F_l` in `1 / length^2`.
pub fn stress_kernel(geom: &SphereGeometry, l: usize, omega: Complex64) -> Result<StressKernelTerm> {
    stress_kernel_at(geom, l, omega, 0.0)
}

/// As [`stress_kernel`] with `F_l` taken at `r = R(1 + standoff)`.
pub fn stress_kernel_at(
    geom: &SphereGeometry,
    l: usize,
    omega: Complex64,
    standoff: f64,
) -> Result<StressKernelTerm> {
    if l == 0 {
        return Err(Error::Domain("stress kernel needs l >= 1".into()));
    }
    geom.validate()?;
    if !geom.exterior.is_vacuum() {
        return Err(Error::Geometry("the stress formula assumes a vacuum exterior".into()));
    }
    let r = geom.radius() * (1.0 + standoff);
    let refl = reflection_series(geom, omega, l, DEFAULT_L_CAP.max(l))?;
    let f = f_sequence(omega, r, l, DEFAULT_L_CAP.max(l))?;
    let plain = |s: Scaled| -> Result<Complex64> {
        let v = s.to_complex();
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { l, z: omega * r })
        }
    };
    Ok(StressKernelTerm {
        l,
        f_l: plain(f[l - 1])?,
        r_te: plain(refl[l - 1].te)?,
        r_tm: plain(refl[l - 1].tm)?,
        weight: (2 * l + 1) as f64,
    })
}

/// `F_l(r)` for `l = 1..=l_max` (index `l - 1`) with vacuum outside.
fn f_sequence(omega: Complex64, r: f64, l_max: usize, l_cap: usize) -> Result<Vec<Scaled>> {
    let z = omega * r;
    let h = radial_sequence(tilde_kind(omega)?, l_max, z, l_cap)?;
    let z2 = z * z;
    Ok((1..=l_max)
        .map(|l| {
            let s = &h[l];
            let ll = (l * (l + 1)) as f64;
            let m = ((ll - z2) * s.value * s.value - s.riccati * s.riccati) / (r * r);
            Scaled::new(m, 2.0 * s.log_scale)
        })
        .collect())
}

/// Converged l-sum at one frequency.
#[derive(Debug, Clone, Copy)]
struct LSum {
    value: Complex64,
    l_max: usize,
    tail: f64,
}

struct Evaluator {
    geom: SphereGeometry,
    r: f64,
    tol: f64,
    l_cap: usize,
}

impl Evaluator {
    fn new(reduced: SphereGeometry, opts: &StressOptions, tol: f64) -> Self {
        Evaluator {
            geom: reduced,
            r: 1.0 + opts.standoff,
            tol,
            l_cap: opts.l_cap,
        }
    }

    fn terms(&self, omega: Complex64, l_max: usize) -> Result<Vec<Complex64>> {
        let refl = reflection_series(&self.geom, omega, l_max, self.l_cap)?;
        let f = f_sequence(omega, self.r, l_max, self.l_cap)?;
        refl.iter()
            .zip(&f)
            .enumerate()
            .map(|(i, (p, f))| {
                let l = i + 1;
                let v = (p.te.add(p.tm) * *f).scale_by(Complex64::new((2 * l + 1) as f64, 0.0));
                let c = v.to_complex();
                if c.re.is_finite() && c.im.is_finite() {
                    Ok(c)
                } else {
                    Err(Error::Overflow { l, z: omega * self.r })
                }
            })
            .collect()
    }

    /// `S(omega)` with the l-sum extended until its blocks have died off,
    /// either relative to the sum itself or below the absolute `floor`.
    /// Once they have, the sum is redone at twice the order; the change is
    /// the reported tail and the longer sum is returned.
    fn s(&self, omega: Complex64, floor: f64) -> Result<LSum> {
        let mut l_max = ((omega.norm() * self.r).ceil() as usize + 16).min(self.l_cap);
        loop {
            let terms = self.terms(omega, l_max)?;
            match block_tail(&terms, self.tol, floor) {
                Some(tail) if l_max >= self.l_cap => {
                    return Ok(LSum {
                        value: compensated(terms.iter().copied()),
                        l_max,
                        tail,
                    })
                }
                Some(_) => {
                    let value = compensated(terms.iter().copied());
                    let long = (2 * l_max).min(self.l_cap);
                    let more = self.terms(omega, long)?;
                    let longer = compensated(more.iter().copied());
                    let tail = (longer - value).norm();
                    let scale: f64 = more.iter().map(|t| t.norm()).sum();
                    if tail <= (0.1 * self.tol * scale).max(floor) {
                        return Ok(LSum {
                            value: longer,
                            l_max: long,
                            tail,
                        });
                    }
                    l_max = long;
                }
                None if l_max >= self.l_cap => {
                    let tail = last_blocks(&terms).iter().sum::<f64>();
                    return Err(Error::TailTooLarge {
                        tail,
                        tol: self.tol,
                        l_max,
                    });
                }
                None => l_max = (2 * l_max).min(self.l_cap),
            }
        }
    }
}

fn block_sums(terms: &[Complex64], block: usize) -> Vec<f64> {
    terms
        .chunks(block)
        .map(|c| compensated(c.iter().copied()).norm())
        .collect()
}

fn last_blocks(terms: &[Complex64]) -> Vec<f64> {
    let b = block_sums(terms, BLOCK);
    b[b.len().saturating_sub(3)..].to_vec()
}

/// Tail estimate when the last three blocks are each below `tol / 10` of the
/// absolute sum (or below `floor`) and decay geometrically; `None` otherwise.
fn block_tail(terms: &[Complex64], tol: f64, floor: f64) -> Option<f64> {
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    if scale == 0.0 {
        return Some(0.0);
    }
    let blocks = block_sums(terms, BLOCK);
    let limit = (0.1 * tol * scale).max(floor);
    if terms.len() < 4 * BLOCK && blocks.iter().all(|b| *b < floor) {
        return Some(blocks.iter().sum());
    }
    tail_from_blocks(&blocks, limit)
}

fn tail_from_blocks(blocks: &[f64], limit: f64) -> Option<f64> {
    if blocks.len() < 4 {
        return None;
    }
    let last = &blocks[blocks.len() - 3..];
    if last.iter().any(|b| *b >= limit) {
        return None;
    }
    let (prev, b) = (last[1], last[2]);
    let tail = if b == 0.0 {
        0.0
    } else if prev > 0.0 && b < prev {
        let q = b / prev;
        b * q / (1.0 - q)
    } else {
        return None;
    };
    (tail < limit).then_some(tail)
}

/// Neumaier-compensated sum in iteration order.
fn compensated(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for v in values {
        re.add(v.re);
        im.add(v.im);
    }
    Complex64::new(re.total(), im.total())
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.c
    }
}

fn non_convergence(reason: String, partial: StressResult) -> Error {
    Error::NonConvergence {
        reason,
        partial: Box::new(partial),
    }
}

/// Matsubara sum at reduced temperature `temperature`.
pub fn stress_finite_t(geom: &SphereGeometry, temperature: f64, opts: &StressOptions) -> Result<StressResult> {
    opts.validate()?;
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Domain(format!("temperature = {temperature} must be positive")));
    }
    let reduced = check_geometry(geom)?;
    let mut result = StressResult::empty(StressMode::Matsubara, temperature, opts);
    if reduced.is_transparent() {
        return Ok(result);
    }
    let ev = Evaluator::new(reduced, opts, 0.1 * opts.tol);
    let pre = -temperature / (4.0 * std::f64::consts::PI);
    let step = 2.0 * std::f64::consts::PI * temperature;

    // l-sums may stop once they are negligible against the running total
    let eval_n = |n: usize, floor: f64| -> Result<(FrequencyDiagnostic, f64)> {
        let xi = if n == 0 { STATIC_XI } else { step * n as f64 };
        let weight = if n == 0 { 0.5 } else { 1.0 };
        let s = ev.s(Complex64::new(0.0, xi), floor / (xi * weight * pre.abs()))?;
        let v = s.value * xi;
        Ok((
            FrequencyDiagnostic {
                n: Some(n),
                omega: Complex64::new(0.0, if n == 0 { 0.0 } else { xi }),
                l_max: s.l_max,
                tail: s.tail * xi * weight * pre.abs(),
                value: v.re,
            },
            v.im.abs() * weight * pre.abs(),
        ))
    };

    let mut contributions: Vec<f64> = Vec::new();
    let mut next = 0usize;
    // (n_max, partial sum) once the blocks have died off; the sum is then
    // extended to 2 n_max and the change is the n-tail
    let mut checkpoint: Option<(usize, f64)> = None;
    loop {
        let end = match checkpoint {
            Some((n, _)) => (2 * n + 1).min(opts.n_cap + 1),
            None if next == 0 => 1,
            None => (next + N_BLOCK).min(opts.n_cap + 1),
        };
        let scale: f64 = contributions.iter().map(|c| c.abs()).sum();
        let floor = 1e-3 * opts.tol * scale;
        let batch: Vec<Result<(FrequencyDiagnostic, f64)>> =
            (next..end).into_par_iter().map(|n| eval_n(n, floor)).collect();
        for item in batch {
            match item {
                Ok((d, im)) => {
                    let weight = if d.n == Some(0) { 0.5 } else { 1.0 };
                    contributions.push(pre * weight * d.value);
                    result.imaginary_residue += im;
                    result.l_max_used = result.l_max_used.max(d.l_max);
                    result.tail_estimate += d.tail;
                    result.frequencies.push(d);
                }
                Err(e) => {
                    let n = contributions.len();
                    if let Error::TailTooLarge { tail, .. } = e {
                        let (xi, weight) = if n == 0 { (STATIC_XI, 0.5) } else { (step * n as f64, 1.0) };
                        result.tail_estimate += tail * xi * weight * pre.abs();
                    }
                    finish_sum(&mut result, &contributions);
                    result.converged = false;
                    return Err(non_convergence(
                        format!("l-sum failed at Matsubara index {n}: {e}"),
                        result,
                    ));
                }
            }
        }
        next = end;
        result.n_max_used = next - 1;
        let scale: f64 = contributions.iter().map(|c| c.abs()).sum();
        let limit = 0.1 * opts.tol * scale;
        finish_sum(&mut result, &contributions);
        if let Some((_, before)) = checkpoint {
            let change = (result.t_rr - before).abs();
            if change <= limit {
                result.tail_estimate += change;
                return Ok(result);
            }
            checkpoint = Some((next - 1, result.t_rr));
        } else {
            let as_complex: Vec<Complex64> = contributions.iter().map(|c| Complex64::new(*c, 0.0)).collect();
            let blocks = block_sums(&as_complex, BLOCK);
            let done = if scale == 0.0 { Some(0.0) } else { tail_from_blocks(&blocks, limit) };
            match done {
                Some(tail) if next > opts.n_cap || scale == 0.0 => {
                    result.tail_estimate += tail;
                    return Ok(result);
                }
                Some(_) => checkpoint = Some((next - 1, result.t_rr)),
                None => {}
            }
        }
        if next > opts.n_cap && checkpoint.is_none_or(|(n, _)| n >= opts.n_cap) {
            result.converged = false;
            let as_complex: Vec<Complex64> = contributions.iter().map(|c| Complex64::new(*c, 0.0)).collect();
            result.tail_estimate += block_sums(&as_complex, BLOCK).last().copied().unwrap_or(0.0);
            return Err(non_convergence(
                format!("Matsubara sum not converged at n_cap = {}", opts.n_cap),
                result,
            ));
        }
    }
}

fn finish_sum(result: &mut StressResult, contributions: &[f64]) {
    let mut acc = Neumaier::default();
    for c in contributions {
        acc.add(*c);
    }
    result.t_rr = acc.total();
}

/// Integrates `g` over `[0, inf)` in doubling chunks until three chunks in a
/// row are negligible.
fn semi_infinite<F>(g: &mut F, first: f64, tol: f64, max_panels: usize) -> Result<(quad::Estimate, f64)>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut small = 0;
    let (mut a, mut b) = (0.0, first);
    let mut last_abs: f64;
    loop {
        let e = quad::adaptive(g, &[a, b], 0.0, 0.1 * tol, max_panels)?;
        total += e.value;
        err += e.error;
        last_abs = e.value.norm();
        if last_abs <= 0.1 * tol * total.norm() {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 || total.norm() == 0.0 && b > 1e3 {
            return Ok((quad::Estimate { value: total, error: err }, b));
        }
        if b > 1e6 {
            return Err(Error::QuadratureFailure {
                estimate: last_abs,
                tol: tol * total.norm(),
            });
        }
        a = b;
        b *= 2.0;
    }
}

/// Imaginary-axis integral at zero temperature.
pub fn stress_zero_t(geom: &SphereGeometry, opts: &StressOptions) -> Result<StressResult> {
    opts.validate()?;
    let reduced = check_geometry(geom)?;
    let mut result = StressResult::empty(StressMode::ImagAxisT0, 0.0, opts);
    if reduced.is_transparent() {
        return Ok(result);
    }
    let ev = Evaluator::new(reduced, opts, 0.1 * opts.tol);
    let mut diag = Vec::new();
    let mut g = |xi: f64| -> Result<Complex64> {
        let s = ev.s(Complex64::new(0.0, xi), 0.0)?;
        let v = s.value * xi;
        diag.push(FrequencyDiagnostic {
            n: None,
            omega: Complex64::new(0.0, xi),
            l_max: s.l_max,
            tail: s.tail * xi,
            value: v.re,
        });
        Ok(v)
    };
    let pre = -1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    let outcome = semi_infinite(&mut g, 1.0, opts.tol, 4000);
    diag.sort_by(|a, b| a.omega.im.total_cmp(&b.omega.im));
    result.l_max_used = diag.iter().map(|d| d.l_max).max().unwrap_or(0);
    result.imaginary_residue = 0.0;
    let tail_l: f64 = diag.iter().map(|d| d.tail).fold(0.0, f64::max);
    result.frequencies = diag;
    match outcome {
        Ok((est, cutoff)) => {
            result.t_rr = pre * est.value.re;
            result.imaginary_residue = (pre * est.value.im).abs();
            result.tail_estimate = (pre * est.error).abs() + pre.abs() * tail_l * cutoff;
            Ok(result)
        }
        Err(e) => {
            result.converged = false;
            Err(non_convergence(format!("imaginary-axis integral failed: {e}"), result))
        }
    }
}

/// Real-frequency integration grid for [`stress_real_axis_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealAxisGrid {
    /// Lower cutoff; the integrand vanishes linearly below it.
    pub x_min: f64,
    /// End of the real segment; beyond it the integral continues along
    /// `x_cut + i y`.
    pub x_cut: f64,
    pub rel_tol: f64,
    /// Panel budget for each adaptive piece.
    pub max_panels: usize,
}

impl Default for RealAxisGrid {
    fn default() -> Self {
        RealAxisGrid {
            x_min: 1e-6,
            x_cut: 12.0,
            rel_tol: 1e-6,
            max_panels: 4000,
        }
    }
}

fn coth(z: Complex64) -> Complex64 {
    // stable for large |Re z|
    let e = (-2.0 * z).exp();
    (Complex64::new(1.0, 0.0) + e) / (Complex64::new(1.0, 0.0) - e)
}

/// Direct evaluation of the real-frequency integral, used to cross-check
/// the Matsubara sum. `temperature = 0` drops the thermal factor.
///
/// The real axis is integrated on `[x_min, x_cut]`; the remainder, which
/// oscillates without decaying in amplitude on the axis, is taken along the
/// vertical line `Re x = x_cut`, where the integrand decays exponentially.
pub fn stress_real_axis_diagnostic(
    geom: &SphereGeometry,
    temperature: f64,
    grid: RealAxisGrid,
    opts: &StressOptions,
) -> Result<StressResult> {
    opts.validate()?;
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::Domain(format!("temperature = {temperature} must be >= 0")));
    }
    if !(grid.x_min > 0.0 && grid.x_cut > grid.x_min && grid.rel_tol > 0.0 && grid.max_panels > 0) {
        return Err(Error::Domain("real-axis grid needs 0 < x_min < x_cut and positive tolerances".into()));
    }
    let reduced = check_geometry(geom)?;
    let mut result = StressResult::empty(StressMode::RealAxisDiagnostic, temperature, opts);
    if reduced.is_transparent() {
        return Ok(result);
    }
    let ev = Evaluator::new(reduced, opts, 0.1 * grid.rel_tol);
    let thermal = |x: Complex64| {
        if temperature == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            coth(x / (2.0 * temperature))
        }
    };
    let mut diag = Vec::new();
    let mut on_axis = |x: f64| -> Result<Complex64> {
        let w = Complex64::new(x, 0.0);
        let s = ev.s(w, 0.0)?;
        let v = (thermal(w) * w * s.value).re;
        diag.push(FrequencyDiagnostic {
            n: None,
            omega: w,
            l_max: s.l_max,
            tail: s.tail * x,
            value: v,
        });
        Ok(Complex64::new(v, 0.0))
    };
    let real_part = quad::adaptive(&mut on_axis, &[grid.x_min, grid.x_cut], 0.0, grid.rel_tol, grid.max_panels);
    let real_part = match real_part {
        Ok(e) => e,
        Err(e) => {
            result.converged = false;
            return Err(e);
        }
    };
    // [0, x_min]: the integrand is linear there
    let first = on_axis(grid.x_min)?.re;
    let head = 0.5 * first * grid.x_min;

    let mut vertical = |y: f64| -> Result<Complex64> {
        let w = Complex64::new(grid.x_cut, y);
        let s = ev.s(w, 0.0)?;
        Ok(Complex64::i() * thermal(w) * w * s.value)
    };
    let scale_hint = real_part.value.norm().max(f64::MIN_POSITIVE);
    let (tail, _) = semi_infinite(&mut vertical, 1.0, grid.rel_tol, grid.max_panels).map_err(|e| match e {
        Error::QuadratureFailure { estimate, .. } => Error::QuadratureFailure {
            estimate,
            tol: grid.rel_tol * scale_hint,
        },
        other => other,
    })?;
    let pre = 1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI);
    let total = real_part.value.re + head + tail.value.re;
    diag.sort_by(|a, b| a.omega.re.total_cmp(&b.omega.re));
    result.l_max_used = diag.iter().map(|d| d.l_max).max().unwrap_or(0);
    result.frequencies = diag;
    result.t_rr = pre * total;
    result.tail_estimate = pre * (real_part.error + tail.error + head.abs());
    Ok(result)
}

/// The static (`n = 0`) Matsubara term `lim xi S(i xi)` for a homogeneous
/// sphere, in closed form; used by tests of the small-`xi` evaluation.
pub fn static_limit_homogeneous(eps0: f64, mu0: f64, standoff: f64, l_max: usize) -> f64 {
    let r = 1.0 + standoff;
    (1..=l_max)
        .map(|l| {
            let lf = l as f64;
            let a = (eps0 - 1.0) / (lf * eps0 + lf + 1.0) + (mu0 - 1.0) / (lf * mu0 + lf + 1.0);
            -lf * (lf + 1.0) * a / r.powi(2 * l as i32 + 4)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{LorentzPole, MaterialModel};

    fn reference() -> SphereGeometry {
        SphereGeometry::homogeneous(1.0, MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, 0.1)))
    }

    #[test]
    fn f1_at_unit_imaginary_argument() {
        // sympy: F_1 = 2 h^2 - z^2 h^2 - ((z h)')^2 at z = i with h_1 = -e^{iz}(z+i)/z^2
        let want = -3.0 * (-2.0f64).exp();
        let t = stress_kernel(&reference(), 1, Complex64::new(0.0, 1.0)).unwrap();
        assert!((t.f_l.re - want).abs() < 1e-10 * want.abs());
        assert!(t.f_l.im.abs() < 1e-15);
    }

    #[test]
    fn kernel_is_real_on_imaginary_axis() {
        for l in [1, 4, 12] {
            let t = stress_kernel_at(&reference(), l, Complex64::new(0.0, 0.7), 0.2).unwrap();
            for v in [t.f_l, t.r_te, t.r_tm] {
                assert!(v.im.abs() <= 1e-13 * v.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn vacuum_sphere_terms_vanish() {
        let g = SphereGeometry::homogeneous(1.0, MaterialModel::vacuum());
        let t = stress_kernel(&g, 3, Complex64::new(0.0, 2.0)).unwrap();
        assert_eq!(t.contribution(), Complex64::new(0.0, 0.0));
        let r = stress_finite_t(&g, 0.3, &StressOptions::default()).unwrap();
        assert_eq!(r.t_rr, 0.0);
    }

    #[test]
    fn neumaier_recovers_cancelled_bits() {
        let v = [1e16, 1.0, -1e16, 1.0].map(|x| Complex64::new(x, 0.0));
        assert_eq!(compensated(v.into_iter()).re, 2.0);
    }

    #[test]
    fn non_vacuum_exterior_is_rejected() {
        let mut g = reference();
        g.exterior = MaterialModel::lorentz_dielectric(LorentzPole::new(1.0, 1.0, 0.1));
        assert!(matches!(stress_finite_t(&g, 0.1, &StressOptions::default()), Err(Error::Geometry(_))));
    }
}
