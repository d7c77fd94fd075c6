//! Fixed-point real and complex arithmetic on big integers.
//!
//! A [`Real`] stores `mantissa * 2^(-scale)` with an arbitrary-precision
//! mantissa; all values in one computation share a scale, additions are
//! exact, and every multiplication or division rounds to nearest, so each
//! operation contributes at most `2^(-scale-1)` of absolute error. The
//! transcendental kernels (`pi`, complex `exp`) run at an internally extended
//! scale and round back down.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

/// Right shift with round-to-nearest (half away from negative infinity).
fn shr_round(x: &BigInt, k: u32) -> BigInt {
    if k == 0 {
        return x.clone();
    }
    (x + (BigInt::from(1) << (k as usize - 1))) >> (k as usize)
}

/// Rounded division `n / d` (half away from zero).
fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    assert!(!d.is_zero(), "division by zero");
    let (q, r) = n.div_rem(d);
    if &r.abs() * 2 >= d.abs() {
        if n.is_negative() == d.is_negative() {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

/// A fixed-point real number `mant * 2^(-scale)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Real {
    mant: BigInt,
    scale: u32,
}

impl Real {
    pub fn zero(scale: u32) -> Self {
        Real { mant: BigInt::zero(), scale }
    }

    pub fn from_i64(v: i64, scale: u32) -> Self {
        Real { mant: BigInt::from(v) << scale as usize, scale }
    }

    pub fn from_bigint(v: &BigInt, scale: u32) -> Self {
        Real { mant: v << scale as usize, scale }
    }

    /// `num / den` as a fixed-point value.
    pub fn from_ratio(num: i64, den: i64, scale: u32) -> Self {
        assert!(den != 0);
        Real { mant: div_round(&(BigInt::from(num) << scale as usize), &BigInt::from(den)), scale }
    }

    pub fn from_mantissa(mant: BigInt, scale: u32) -> Self {
        Real { mant, scale }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    fn check(&self, rhs: &Real) {
        assert_eq!(self.scale, rhs.scale, "mixed fixed-point scales");
    }

    pub fn add(&self, rhs: &Real) -> Real {
        self.check(rhs);
        Real { mant: &self.mant + &rhs.mant, scale: self.scale }
    }

    pub fn sub(&self, rhs: &Real) -> Real {
        self.check(rhs);
        Real { mant: &self.mant - &rhs.mant, scale: self.scale }
    }

    pub fn neg(&self) -> Real {
        Real { mant: -&self.mant, scale: self.scale }
    }

    pub fn abs(&self) -> Real {
        Real { mant: self.mant.abs(), scale: self.scale }
    }

    pub fn mul(&self, rhs: &Real) -> Real {
        self.check(rhs);
        Real { mant: shr_round(&(&self.mant * &rhs.mant), self.scale), scale: self.scale }
    }

    /// Exact multiplication by a machine integer.
    pub fn mul_small(&self, k: i64) -> Real {
        Real { mant: &self.mant * k, scale: self.scale }
    }

    /// Exact multiplication by a big integer.
    pub fn mul_bigint(&self, k: &BigInt) -> Real {
        Real { mant: &self.mant * k, scale: self.scale }
    }

    pub fn div(&self, rhs: &Real) -> Real {
        self.check(rhs);
        Real { mant: div_round(&(&self.mant << self.scale as usize), &rhs.mant), scale: self.scale }
    }

    pub fn div_small(&self, k: i64) -> Real {
        Real { mant: div_round(&self.mant, &BigInt::from(k)), scale: self.scale }
    }

    /// Multiplication by `2^k` (negative `k` rounds).
    pub fn shift(&self, k: i32) -> Real {
        if k >= 0 {
            Real { mant: &self.mant << k as usize, scale: self.scale }
        } else {
            Real { mant: shr_round(&self.mant, (-k) as u32), scale: self.scale }
        }
    }

    /// Re-rounds to a different scale.
    pub fn to_scale(&self, scale: u32) -> Real {
        if scale >= self.scale {
            Real { mant: &self.mant << (scale - self.scale) as usize, scale }
        } else {
            Real { mant: shr_round(&self.mant, self.scale - scale), scale }
        }
    }

    /// Strict upper bound exponent: `|x| < 2^log2_bound()`. `None` when zero.
    pub fn log2_bound(&self) -> Option<i64> {
        if self.mant.is_zero() {
            None
        } else {
            Some(self.mant.bits() as i64 - self.scale as i64)
        }
    }

    /// Nearest integer together with the log2 of the distance to it
    /// (`None` when the value is exactly an integer).
    pub fn round_nearest(&self) -> (BigInt, Option<i64>) {
        let n = shr_round(&self.mant, self.scale);
        let r = &self.mant - (&n << self.scale as usize);
        if r.is_zero() {
            (n, None)
        } else {
            (n, Some(r.bits() as i64 - self.scale as i64))
        }
    }

    /// `sqrt(v)` for a machine-integer radicand, correct to the last place.
    pub fn sqrt_u64(v: u64, scale: u32) -> Real {
        let shifted = BigInt::from(v) << (2 * scale as usize);
        Real { mant: shifted.sqrt(), scale }
    }

    pub fn to_f64(&self) -> f64 {
        // split off the scale to stay inside f64 range for large mantissas
        let bits = self.mant.bits() as i64;
        if bits <= 900 {
            self.mant.to_f64().unwrap_or(0.0) / 2f64.powi(self.scale as i32)
        } else {
            let excess = (bits - 900) as u32;
            let reduced = shr_round(&self.mant, excess);
            reduced.to_f64().unwrap_or(0.0) * 2f64.powi(excess as i32 - self.scale as i32)
        }
    }
}

impl std::fmt::Display for Real {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

/// A fixed-point complex number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        assert_eq!(re.scale(), im.scale());
        Complex { re, im }
    }

    pub fn zero(scale: u32) -> Self {
        Complex { re: Real::zero(scale), im: Real::zero(scale) }
    }

    pub fn from_real(re: Real) -> Self {
        let scale = re.scale();
        Complex { re, im: Real::zero(scale) }
    }

    pub fn from_i64(v: i64, scale: u32) -> Self {
        Complex::from_real(Real::from_i64(v, scale))
    }

    pub fn scale(&self) -> u32 {
        self.re.scale()
    }

    pub fn add(&self, rhs: &Complex) -> Complex {
        Complex { re: self.re.add(&rhs.re), im: self.im.add(&rhs.im) }
    }

    pub fn sub(&self, rhs: &Complex) -> Complex {
        Complex { re: self.re.sub(&rhs.re), im: self.im.sub(&rhs.im) }
    }

    pub fn neg(&self) -> Complex {
        Complex { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn conj(&self) -> Complex {
        Complex { re: self.re.clone(), im: self.im.neg() }
    }

    /// Karatsuba-style product using three big multiplications.
    pub fn mul(&self, rhs: &Complex) -> Complex {
        let scale = self.scale();
        assert_eq!(scale, rhs.scale());
        let t1 = &self.re.mant * &rhs.re.mant;
        let t2 = &self.im.mant * &rhs.im.mant;
        let t3 = (&self.re.mant + &self.im.mant) * (&rhs.re.mant + &rhs.im.mant);
        Complex {
            re: Real { mant: shr_round(&(&t1 - &t2), scale), scale },
            im: Real { mant: shr_round(&(t3 - t1 - t2), scale), scale },
        }
    }

    pub fn mul_real(&self, rhs: &Real) -> Complex {
        Complex { re: self.re.mul(rhs), im: self.im.mul(rhs) }
    }

    pub fn mul_small(&self, k: i64) -> Complex {
        Complex { re: self.re.mul_small(k), im: self.im.mul_small(k) }
    }

    pub fn div_small(&self, k: i64) -> Complex {
        Complex { re: self.re.div_small(k), im: self.im.div_small(k) }
    }

    pub fn norm_sqr(&self) -> Real {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    /// Multiplicative inverse `conj(z) / |z|^2`.
    pub fn recip(&self) -> Complex {
        let n = self.norm_sqr();
        Complex { re: self.re.div(&n), im: self.im.neg().div(&n) }
    }

    /// Integer power by repeated squaring.
    pub fn powu(&self, k: u32) -> Complex {
        if k == 0 {
            return Complex::from_i64(1, self.scale());
        }
        let mut result: Option<Complex> = None;
        let mut base = self.clone();
        let mut e = k;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base);
        }
        result.unwrap()
    }

    pub fn to_scale(&self, scale: u32) -> Complex {
        Complex { re: self.re.to_scale(scale), im: self.im.to_scale(scale) }
    }

    /// Strict upper bound exponent for `max(|re|, |im|)`.
    pub fn log2_bound(&self) -> Option<i64> {
        match (self.re.log2_bound(), self.im.log2_bound()) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(i64::MIN).max(b.unwrap_or(i64::MIN))),
        }
    }

    /// `e^z` by argument halving and Taylor summation. The reduction, the
    /// series and the squarings all run at an extended scale sized from the
    /// magnitude `e^{Re z}` of the result, so the value returned is accurate
    /// to a few ulps at the input scale.
    pub fn exp(&self) -> Complex {
        let scale = self.scale();
        let halvings = match self.log2_bound() {
            None => return Complex::from_i64(1, scale),
            Some(b) => (b + 1 + 48).max(0) as u32,
        };
        let mag_bits: u32 = {
            let re_bound = self.re.log2_bound().unwrap_or(i64::MIN);
            if self.re.is_negative() || re_bound <= 0 {
                1
            } else {
                // |Re z| < 2^re_bound, so log2(e^{Re z}) < 1.443 * 2^re_bound
                assert!(re_bound <= 24, "exp argument out of supported range");
                3u32 << (re_bound as u32 - 1)
            }
        };
        let work = scale + halvings + mag_bits + 64;

        let mut w = self.to_scale(work);
        w = Complex { re: w.re.shift(-(halvings as i32)), im: w.im.shift(-(halvings as i32)) };

        // Taylor series for e^w with |w| < 2^-48
        let mut sum = Complex::from_i64(1, work);
        let mut term = Complex::from_i64(1, work);
        let mut n = 1i64;
        loop {
            term = term.mul(&w).div_small(n);
            if term.re.mant.bits() <= 48 && term.im.mant.bits() <= 48 {
                break;
            }
            sum = sum.add(&term);
            n += 1;
        }

        for _ in 0..halvings {
            sum = sum.mul(&sum);
        }
        sum.to_scale(scale)
    }
}

impl std::fmt::Display for Complex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} + {}i", self.re, self.im)
    }
}

static PI_CACHE: Mutex<Option<HashMap<u32, BigInt>>> = Mutex::new(None);

/// Mantissa of `atan(1/x)` at the given scale, by the alternating series;
/// truncation of each division costs below one ulp per term, which callers
/// cover with guard bits.
fn atan_recip_mantissa(x: u64, scale: u32) -> BigInt {
    let xsq = BigInt::from(x) * BigInt::from(x);
    let mut num = (BigInt::from(1) << scale as usize) / BigInt::from(x);
    let mut acc = BigInt::zero();
    let mut k = 0u64;
    while !num.is_zero() {
        let term = &num / BigInt::from(2 * k + 1);
        if k.is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
        num /= &xsq;
        k += 1;
    }
    acc
}

/// `pi` at the requested scale (Machin's formula, cached per scale).
pub fn pi(scale: u32) -> Real {
    let mut cache = PI_CACHE.lock().unwrap();
    let map = cache.get_or_insert_with(HashMap::new);
    if let Some(mant) = map.get(&scale) {
        return Real::from_mantissa(mant.clone(), scale);
    }
    let work = scale + 48;
    let mant =
        shr_round(&(atan_recip_mantissa(5, work) * 16 - atan_recip_mantissa(239, work) * 4), 48);
    map.insert(scale, mant.clone());
    Real::from_mantissa(mant, scale)
}
