//! Binary fixed-point reals with 320 fractional bits, backed by `BigInt`.
//!
//! Only what the normal CDF needs: exact conversion from `f64`, the four
//! operations, `exp`, `sqrt` and `π`. All results are deterministic integer
//! computations, so tables built from them are identical on every platform.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const FRAC_BITS: u32 = 320;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(BigInt);

impl Fixed {
    pub fn zero() -> Self {
        Fixed(BigInt::zero())
    }

    pub fn one() -> Self {
        Fixed(BigInt::one() << FRAC_BITS)
    }

    pub fn from_int(v: i64) -> Self {
        Fixed(BigInt::from(v) << FRAC_BITS)
    }

    /// Exact conversion; every finite `f64` is a dyadic rational.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite input {v}");
        if v == 0.0 {
            return Self::zero();
        }
        let bits = v.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | 1 << 52, exp - 1075) };
        let mut m = BigInt::from(mant);
        let shift = e + FRAC_BITS as i64;
        m = if shift >= 0 { m << shift as u32 } else { m >> (-shift) as u32 };
        if v < 0.0 {
            m = -m;
        }
        Fixed(m)
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        assert!(k <= FRAC_BITS);
        Fixed(BigInt::one() << (FRAC_BITS - k))
    }

    pub fn raw(&self) -> &BigInt {
        &self.0
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn abs(&self) -> Self {
        Fixed(self.0.abs())
    }

    /// Division, truncated toward zero.
    pub fn div(&self, rhs: &Fixed) -> Fixed {
        assert!(!rhs.0.is_zero(), "division by zero");
        Fixed((&self.0 << FRAC_BITS) / &rhs.0)
    }

    pub fn div_int(&self, d: i64) -> Fixed {
        Fixed(&self.0 / BigInt::from(d))
    }

    pub fn mul_int(&self, m: i64) -> Fixed {
        Fixed(&self.0 * BigInt::from(m))
    }

    /// Nearest integer to `self · 2^k`, ties away from zero.
    pub fn round_scaled(&self, k: u32) -> BigInt {
        let shift = FRAC_BITS - k;
        let half = BigInt::one() << (shift - 1);
        let mag = (self.0.abs() + half) >> shift;
        if self.0.is_negative() {
            -mag
        } else {
            mag
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let bits = self.0.bits();
        let (top, shift) = if bits > 64 {
            let s = bits - 64;
            ((self.0.abs() >> s).to_u64().expect("fits in 64 bits"), s as i64)
        } else {
            (self.0.abs().to_u64().expect("fits in 64 bits"), 0)
        };
        let v = top as f64 * 2f64.powi((shift - FRAC_BITS as i64) as i32);
        if self.0.sign() == Sign::Minus {
            -v
        } else {
            v
        }
    }

    pub fn sqrt(&self) -> Fixed {
        assert!(!self.0.is_negative(), "sqrt of a negative number");
        Fixed((&self.0 << FRAC_BITS).sqrt())
    }

    /// `e^x` for `x >= 0` (callers take reciprocals for negative arguments).
    pub fn exp(&self) -> Fixed {
        assert!(!self.0.is_negative());
        // halve until the argument is below 1/2, sum Taylor, square back
        let mut k = 0u32;
        let mut x = self.clone();
        let half = Fixed::pow2_neg(1);
        while x > half {
            x = Fixed(x.0 >> 1u32);
            k += 1;
        }
        let guard = 64 + k;
        let wide = |v: &Fixed| v.0.clone() << guard;
        let scale = FRAC_BITS + guard;
        let xw = wide(&x);
        let mut sum = BigInt::one() << scale;
        let mut term = sum.clone();
        let mut n = 1i64;
        while !term.is_zero() {
            term = (&term * &xw >> scale) / n;
            sum += &term;
            n += 1;
        }
        for _ in 0..k {
            sum = &sum * &sum >> scale;
        }
        Fixed(sum >> guard)
    }

    pub fn pi() -> &'static Fixed {
        static PI: OnceLock<Fixed> = OnceLock::new();
        PI.get_or_init(|| {
            // Machin: π = 16·atan(1/5) − 4·atan(1/239)
            let guard = 32;
            let scale = FRAC_BITS + guard;
            let atan_inv = |m: i64| {
                let one = BigInt::one() << scale;
                let m2 = BigInt::from(m * m);
                let mut power = one / m;
                let mut sum = BigInt::zero();
                let mut k = 0i64;
                while !power.is_zero() {
                    let term = &power / (2 * k + 1);
                    if k.is_even() {
                        sum += term;
                    } else {
                        sum -= term;
                    }
                    power /= &m2;
                    k += 1;
                }
                sum
            };
            let pi = atan_inv(5) * 16 - atan_inv(239) * 4;
            Fixed(pi >> guard)
        })
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, rhs: &Fixed) -> Fixed {
        Fixed(&self.0 + &rhs.0)
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, rhs: &Fixed) -> Fixed {
        Fixed(&self.0 - &rhs.0)
    }
}

impl Mul for &Fixed {
    type Output = Fixed;
    fn mul(self, rhs: &Fixed) -> Fixed {
        Fixed((&self.0 * &rhs.0) >> FRAC_BITS)
    }
}

impl Neg for &Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(-&self.0)
    }
}

fn inv_sqrt_2pi() -> &'static Fixed {
    static V: OnceLock<Fixed> = OnceLock::new();
    V.get_or_init(|| Fixed::one().div(&Fixed::pi().mul_int(2).sqrt()))
}

/// Upper tail `1 − Φ(x)` of the standard normal distribution for `x >= 0`.
///
/// Uses `Φ(x) = ½ + φ(x)·Σ x^(2k+1)/(2k+1)!!`, whose terms are all positive.
fn upper_tail_nonneg(x: &Fixed) -> Fixed {
    debug_assert!(!x.is_negative());
    let x2 = x * x;
    let mut term = x.clone();
    let mut series = x.clone();
    let mut k = 1i64;
    while !term.0.is_zero() {
        term = (&term * &x2).div_int(2 * k + 1);
        series = &series + &term;
        k += 1;
    }
    let half_x2 = Fixed(x2.0 >> 1u32);
    let density = inv_sqrt_2pi().div(&half_x2.exp());
    let half = Fixed::pow2_neg(1);
    &half - &(&density * &series)
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: &Fixed) -> Fixed {
    match x.0.sign() {
        Sign::Minus => upper_tail_nonneg(&x.abs()),
        _ => &Fixed::one() - &upper_tail_nonneg(x),
    }
}

/// `Φ(b) − Φ(a)` for `a <= b`, evaluated on the side that avoids cancellation.
pub fn normal_interval(a: &Fixed, b: &Fixed) -> Fixed {
    debug_assert!(a <= b);
    if !a.is_negative() {
        &upper_tail_nonneg(a) - &upper_tail_nonneg(b)
    } else if b.is_negative() || b.0.is_zero() {
        &upper_tail_nonneg(&b.abs()) - &upper_tail_nonneg(&a.abs())
    } else {
        &normal_cdf(b) - &normal_cdf(a)
    }
}

/// `1 − Φ(x)`.
pub fn normal_upper_tail(x: &Fixed) -> Fixed {
    match x.0.sign() {
        Sign::Minus => &Fixed::one() - &upper_tail_nonneg(&x.abs()),
        _ => upper_tail_nonneg(x),
    }
}

impl PartialEq<f64> for Fixed {
    fn eq(&self, other: &f64) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd<f64> for Fixed {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        other.is_finite().then(|| self.cmp(&Fixed::from_f64(*other)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digits(v: &Fixed, n: u32) -> String {
        ((v.raw() * BigInt::from(10u32).pow(n)) >> FRAC_BITS).to_string()
    }

    #[test]
    fn pi_digits() {
        assert_eq!(digits(Fixed::pi(), 50), "314159265358979323846264338327950288419716939937510");
    }

    #[test]
    fn exp_matches_f64() {
        for x in [0.0, 0.25, 1.0, 2.5, 10.0, 37.5] {
            let e = Fixed::from_f64(x).exp().to_f64();
            let rel = (e - x.exp()).abs() / x.exp();
            assert!(rel < 1e-15, "exp({x}) = {e}");
        }
    }

    #[test]
    fn cdf_matches_known_values() {
        // reference digits from an independent 60-digit evaluation
        let v = normal_cdf(&Fixed::from_f64(0.5));
        assert_eq!(digits(&v, 50), "69146246127401310363770461060833773988360217555457");
        let mass = normal_interval(&Fixed::from_f64(-0.5), &Fixed::from_f64(0.5));
        assert_eq!(digits(&mass, 50), "38292492254802620727540922121667547976720435110915");
        // 1 − Φ(8) = 6.22096057427178e-16
        let t = normal_upper_tail(&Fixed::from_f64(8.0)).to_f64();
        assert!((t / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_f64_is_exact() {
        assert_eq!(Fixed::from_f64(0.5), Fixed::pow2_neg(1));
        assert_eq!(Fixed::from_f64(-3.0), Fixed::from_int(-3));
        assert_eq!(Fixed::from_f64(2.8).to_f64(), 2.8);
    }
}
