//! Complex numbers carried as `mantissa * exp(log_scale)`.
//!
//! Radial functions at large order or extreme argument leave the range of
//! `f64` long before the physical combinations built from them do (a
//! reflection coefficient times two outgoing Hankel functions is O(1) even
//! when each factor is 1e±400). Everything upstream of those combinations is
//! kept in this form.

use std::ops::{Mul, Neg};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: Complex64,
    pub log_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mant: Complex64::new(0.0, 0.0),
        log_scale: 0.0,
    };

    pub fn new(mant: Complex64, log_scale: f64) -> Self {
        Scaled { mant, log_scale }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Scaled::new(z, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mant.is_finite() && self.log_scale.is_finite()
    }

    /// Natural log of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mant.norm().ln() + self.log_scale
    }

    /// Converts to a plain complex number. Underflow goes to zero, overflow to
    /// infinity.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let e = self.log_scale;
        if !(-700.0..=700.0).contains(&e) {
            // split the exponent so the partial product stays representable
            let half = (e * 0.5).exp();
            self.mant * half * half
        } else {
            self.mant * e.exp()
        }
    }

    /// Keeps |mant| near one so repeated products do not drift out of range.
    pub fn normalized(self) -> Self {
        let n = self.mant.norm();
        if n == 0.0 || !n.is_finite() {
            return self;
        }
        let shift = n.ln();
        Scaled {
            mant: self.mant / n,
            log_scale: self.log_scale + shift,
        }
    }

    pub fn recip(self) -> Self {
        Scaled::new(self.mant.inv(), -self.log_scale)
    }

    pub fn scale_by(self, c: Complex64) -> Self {
        Scaled::new(self.mant * c, self.log_scale)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Scaled) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_scale >= other.log_scale {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.log_scale - big.log_scale;
        let m = if d < -745.0 {
            big.mant
        } else {
            big.mant + small.mant * d.exp()
        };
        Scaled::new(m, big.log_scale)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Scaled) -> Self {
        self.add(-other)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, other: Scaled) -> Self {
        Scaled::new(self.mant / other.mant, self.log_scale - other.log_scale)
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        Scaled::new(self.mant * rhs.mant, self.log_scale + rhs.log_scale)
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled {
            mant: -self.mant,
            log_scale: self.log_scale,
        }
    }
}
