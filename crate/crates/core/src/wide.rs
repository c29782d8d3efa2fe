//! Complex numbers with an extended binary exponent.
//!
//! Trajectories of dissipative maps leave the double range quickly: `0.9^k`
//! underflows near `k = 7000`, and inverse iterates overflow even sooner.
//! [`Wide`] keeps a double-precision complex mantissa and a separate `i64`
//! exponent, so every value along a trajectory (and every Laplace weight)
//! stays representable with ordinary double rounding.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

const LN_2: f64 = core::f64::consts::LN_2;

/// `mant * 2^exp`, with `max(|mant.re|, |mant.im|)` in `[1, 2)` or the value zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Wide {
    mant: Complex64,
    exp: i64,
}

impl fmt::Debug for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Wide({} * 2^{})", self.mant, self.exp)
    }
}

impl Default for Wide {
    fn default() -> Self {
        Wide::ZERO
    }
}

fn scale2(z: Complex64, by: i64) -> Complex64 {
    let by = by.clamp(-4000, 4000) as i32;
    Complex64::new(libm::scalbn(z.re, by), libm::scalbn(z.im, by))
}

impl Wide {
    pub const ZERO: Wide = Wide {
        mant: Complex64::new(0.0, 0.0),
        exp: 0,
    };
    pub const ONE: Wide = Wide {
        mant: Complex64::new(1.0, 0.0),
        exp: 0,
    };

    fn normalized(mant: Complex64, exp: i64) -> Wide {
        let a = mant.re.abs().max(mant.im.abs());
        if a == 0.0 {
            return Wide::ZERO;
        }
        debug_assert!(a.is_finite(), "non-finite mantissa");
        let (_, e) = libm::frexp(a);
        let shift = i64::from(e) - 1;
        Wide {
            mant: scale2(mant, -shift),
            exp: exp + shift,
        }
    }

    /// Returns `None` for NaN or infinite input.
    pub fn try_from_complex(z: Complex64) -> Option<Wide> {
        if z.re.is_finite() && z.im.is_finite() {
            Some(Wide::normalized(z, 0))
        } else {
            None
        }
    }

    /// Panics on non-finite input; use [`Wide::try_from_complex`] for untrusted values.
    pub fn from_complex(z: Complex64) -> Wide {
        Wide::try_from_complex(z).expect("non-finite complex value")
    }

    pub fn from_real(x: f64) -> Wide {
        Wide::from_complex(Complex64::new(x, 0.0))
    }

    /// `e^z` without intermediate overflow or underflow.
    pub fn exp(z: Complex64) -> Wide {
        Wide::from_log_polar(z.re, z.im)
    }

    /// The value with natural-log modulus `log_modulus` and argument `arg`.
    pub fn from_log_polar(log_modulus: f64, arg: f64) -> Wide {
        let log2 = log_modulus / LN_2;
        let e = libm::floor(log2);
        let frac = libm::exp((log2 - e) * LN_2);
        let (s, c) = libm::sincos(arg);
        Wide::normalized(Complex64::new(frac * c, frac * s), e as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    /// Nearest double-precision value; saturates to infinity or flushes to zero.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        if self.exp > 1100 {
            let inf = f64::INFINITY;
            return Complex64::new(
                if self.mant.re == 0.0 { 0.0 } else { inf.copysign(self.mant.re) },
                if self.mant.im == 0.0 { 0.0 } else { inf.copysign(self.mant.im) },
            );
        }
        scale2(self.mant, self.exp)
    }

    /// Like [`Wide::to_complex`] but `None` when the value overflows a double.
    pub fn to_finite_complex(&self) -> Option<Complex64> {
        let z = self.to_complex();
        (z.re.is_finite() && z.im.is_finite()).then_some(z)
    }

    pub fn re(&self) -> f64 {
        self.to_complex().re
    }

    pub fn im(&self) -> f64 {
        self.to_complex().im
    }

    /// Modulus as a double (may be infinite or zero when out of range).
    pub fn abs(&self) -> f64 {
        let m = self.mant.norm();
        if m == 0.0 {
            0.0
        } else if self.exp > 1100 {
            f64::INFINITY
        } else {
            libm::scalbn(m, self.exp.clamp(-4000, 4000) as i32)
        }
    }

    /// Natural logarithm of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        libm::log(self.mant.norm()) + self.exp as f64 * LN_2
    }

    pub fn log10_abs(&self) -> f64 {
        self.ln_abs() / core::f64::consts::LN_10
    }

    pub fn arg(&self) -> f64 {
        libm::atan2(self.mant.im, self.mant.re)
    }

    pub fn conj(&self) -> Wide {
        Wide {
            mant: self.mant.conj(),
            exp: self.exp,
        }
    }

    pub fn checked_div(self, rhs: Wide) -> Option<Wide> {
        if rhs.is_zero() {
            return None;
        }
        Some(Wide::normalized(self.mant / rhs.mant, self.exp - rhs.exp))
    }

    pub fn recip(self) -> Option<Wide> {
        Wide::ONE.checked_div(self)
    }

    /// Integer power by repeated squaring in double-double arithmetic.
    ///
    /// Each squaring doubles the relative error already in the base, so plain
    /// doubles would give `O(k eps)`; the extra mantissa keeps the result within
    /// about one rounding of the exact power for any practical `k`.
    pub fn powu(self, mut k: u64) -> Wide {
        if self.is_zero() {
            return if k == 0 { Wide::ONE } else { Wide::ZERO };
        }
        let mut base = DdWide::from(self);
        let mut acc = DdWide::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(base);
            }
        }
        acc.round()
    }
}

type Dd = (f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    (s, b - (s - a))
}

fn dd_add(a: Dd, b: Dd) -> Dd {
    let (s, e) = two_sum(a.0, b.0);
    quick_two_sum(s, e + a.1 + b.1)
}

fn dd_mul(a: Dd, b: Dd) -> Dd {
    let p = a.0 * b.0;
    let e = libm::fma(a.0, b.0, -p);
    quick_two_sum(p, e + (a.0 * b.1 + a.1 * b.0))
}

/// A [`Wide`] with double-double real and imaginary mantissas.
#[derive(Clone, Copy)]
struct DdWide {
    re: Dd,
    im: Dd,
    exp: i64,
}

impl DdWide {
    const ONE: DdWide = DdWide {
        re: (1.0, 0.0),
        im: (0.0, 0.0),
        exp: 0,
    };

    fn mul(self, rhs: DdWide) -> DdWide {
        let neg = |(hi, lo): Dd| (-hi, -lo);
        let re = dd_add(dd_mul(self.re, rhs.re), neg(dd_mul(self.im, rhs.im)));
        let im = dd_add(dd_mul(self.re, rhs.im), dd_mul(self.im, rhs.re));
        let a = re.0.abs().max(im.0.abs());
        if a == 0.0 {
            return DdWide {
                re: (0.0, 0.0),
                im: (0.0, 0.0),
                exp: 0,
            };
        }
        let shift = libm::frexp(a).1 - 1;
        let s = |(hi, lo): Dd| (libm::scalbn(hi, -shift), libm::scalbn(lo, -shift));
        DdWide {
            re: s(re),
            im: s(im),
            exp: self.exp + rhs.exp + i64::from(shift),
        }
    }

    fn round(self) -> Wide {
        Wide::normalized(Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1), self.exp)
    }
}

impl From<Wide> for DdWide {
    fn from(w: Wide) -> DdWide {
        DdWide {
            re: (w.mant.re, 0.0),
            im: (w.mant.im, 0.0),
            exp: w.exp,
        }
    }
}

impl From<Complex64> for Wide {
    fn from(z: Complex64) -> Self {
        Wide::from_complex(z)
    }
}

impl From<f64> for Wide {
    fn from(x: f64) -> Self {
        Wide::from_real(x)
    }
}

impl Add for Wide {
    type Output = Wide;
    fn add(self, rhs: Wide) -> Wide {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.exp >= rhs.exp {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = big.exp - small.exp;
        if d > 1100 {
            return big;
        }
        Wide::normalized(big.mant + scale2(small.mant, -d), big.exp)
    }
}

impl Neg for Wide {
    type Output = Wide;
    fn neg(self) -> Wide {
        Wide {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl Sub for Wide {
    type Output = Wide;
    fn sub(self, rhs: Wide) -> Wide {
        self + (-rhs)
    }
}

impl Mul for Wide {
    type Output = Wide;
    fn mul(self, rhs: Wide) -> Wide {
        if self.is_zero() || rhs.is_zero() {
            return Wide::ZERO;
        }
        Wide::normalized(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl Mul<Complex64> for Wide {
    type Output = Wide;
    fn mul(self, rhs: Complex64) -> Wide {
        self * Wide::from_complex(rhs)
    }
}

impl Mul<f64> for Wide {
    type Output = Wide;
    fn mul(self, rhs: f64) -> Wide {
        self * Wide::from_real(rhs)
    }
}

/// Panics on division by zero; see [`Wide::checked_div`].
impl Div for Wide {
    type Output = Wide;
    fn div(self, rhs: Wide) -> Wide {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl AddAssign for Wide {
    fn add_assign(&mut self, rhs: Wide) {
        *self = *self + rhs;
    }
}

impl SubAssign for Wide {
    fn sub_assign(&mut self, rhs: Wide) {
        *self = *self - rhs;
    }
}

impl MulAssign for Wide {
    fn mul_assign(&mut self, rhs: Wide) {
        *self = *self * rhs;
    }
}
