//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Integral estimate with an error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

/// One 15-point Kronrod panel; the error is `|K15 - G7|`.
pub fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx)? + f(c + dx)?;
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    Ok(Estimate {
        value: k * h,
        error: ((k - g) * h).norm(),
    })
}

/// Sum of fixed panels with no refinement; used when the caller owns the grid.
pub fn composite<F>(f: &mut F, a: f64, b: f64, panels: usize) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let n = panels.max(1);
    let w = (b - a) / n as f64;
    let mut total = Estimate {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
    };
    for i in 0..n {
        let lo = a + w * i as f64;
        let hi = if i + 1 == n { b } else { lo + w };
        let e = gk15(f, lo, hi)?;
        total.value += e.value;
        total.error += e.error;
    }
    Ok(total)
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est
            .error
            .total_cmp(&other.est.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive bisection over `breakpoints` (sorted, at least two).
///
/// Stops once the summed error is below `max(abs_tol, rel_tol * |I|)`;
/// reports [`Error::QuadratureFailure`] when `max_panels` is exhausted first.
pub fn adaptive<F>(
    f: &mut F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            let est = gk15(f, w[0], w[1])?;
            heap.push(Panel { a: w[0], b: w[1], est });
        }
    }
    loop {
        let (value, error) = totals(&heap);
        let target = abs_tol.max(rel_tol * value.norm());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if heap.len() >= max_panels {
            return Err(Error::QuadratureFailure {
                estimate: error,
                tol: target,
            });
        }
        let Some(worst) = heap.pop() else {
            return Ok(Estimate { value, error });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureFailure {
                estimate: error,
                tol: target,
            });
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        heap.push(Panel { a: worst.a, b: mid, est: left });
        heap.push(Panel { a: mid, b: worst.b, est: right });
    }
}

fn totals(heap: &BinaryHeap<Panel>) -> (Complex64, f64) {
    // ordered by position so the sum does not depend on heap layout
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut v = Complex64::new(0.0, 0.0);
    let mut e = 0.0;
    for p in panels {
        v += p.est.value;
        e += p.est.error;
    }
    (v, e)
}
