//! Nonnegative binary floating point with a 128-bit significand and directed
//! upward rounding.
//!
//! Every operation returns a value at least as large as the exact result, so
//! sums and products of upper bounds stay upper bounds. The exponent is an
//! `i64`, which keeps probabilities like `2^-1000` far from underflow.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul};

const TOP: u128 = 1 << 127;

/// `mant · 2^exp`, with `mant` either zero or in `[2^127, 2^128)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct UpFloat {
    mant: u128,
    exp: i64,
}

impl UpFloat {
    pub const ZERO: UpFloat = UpFloat { mant: 0, exp: 0 };
    pub const ONE: UpFloat = UpFloat { mant: TOP, exp: -127 };

    /// `2^k`, exact.
    pub fn pow2(k: i64) -> Self {
        UpFloat { mant: TOP, exp: k - 127 }
    }

    /// Exact conversion from an integer.
    pub fn from_u128(v: u128) -> Self {
        if v == 0 {
            return Self::ZERO;
        }
        let lz = v.leading_zeros();
        UpFloat { mant: v << lz, exp: -(lz as i64) }
    }

    /// `num · 2^-k`, exact.
    pub fn from_dyadic(num: u128, k: u32) -> Self {
        Self::from_u128(num).mul_pow2(-(k as i64))
    }

    /// Smallest representable value `>= v`; exact when `v` is finite and nonnegative.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite() && v >= 0.0, "UpFloat needs a finite nonnegative value, got {v}");
        if v == 0.0 {
            return Self::ZERO;
        }
        let bits = v.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1 << 52) - 1)) as u128;
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | 1 << 52, biased - 1075) };
        Self::from_u128(m).mul_pow2(e)
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0
    }

    /// Multiplication by `2^k`, exact.
    pub fn mul_pow2(self, k: i64) -> Self {
        if self.is_zero() {
            self
        } else {
            UpFloat { mant: self.mant, exp: self.exp + k }
        }
    }

    fn rounded(mant: u128, exp: i64, sticky: bool) -> (Self, bool) {
        if !sticky {
            return (UpFloat { mant, exp }, true);
        }
        match mant.checked_add(1) {
            Some(m) => (UpFloat { mant: m, exp }, false),
            None => (UpFloat { mant: TOP, exp: exp + 1 }, false),
        }
    }

    /// Sum rounded upward, and whether it is exact.
    pub fn add_exact(self, rhs: Self) -> (Self, bool) {
        if self.is_zero() {
            return (rhs, true);
        }
        if rhs.is_zero() {
            return (self, true);
        }
        let (hi, lo) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let shift = (hi.exp - lo.exp) as u64;
        let (addend, sticky) = match shift {
            0 => (lo.mant, false),
            1..=127 => (lo.mant >> shift, lo.mant << (128 - shift) != 0),
            _ => (0, true),
        };
        let (sum, carry) = hi.mant.overflowing_add(addend);
        if carry {
            Self::rounded(sum >> 1 | TOP, hi.exp + 1, sticky || sum & 1 == 1)
        } else {
            Self::rounded(sum, hi.exp, sticky)
        }
    }

    /// Product rounded upward, and whether it is exact.
    pub fn mul_exact(self, rhs: Self) -> (Self, bool) {
        if self.is_zero() || rhs.is_zero() {
            return (Self::ZERO, true);
        }
        let (hi, lo) = mul_wide(self.mant, rhs.mant);
        let exp = self.exp + rhs.exp;
        if hi & TOP != 0 {
            Self::rounded(hi, exp + 128, lo != 0)
        } else {
            Self::rounded(hi << 1 | lo >> 127, exp + 127, lo << 1 != 0)
        }
    }

    /// `log2` of the value (`-inf` for zero).
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        (self.mant as f64).log2() + self.exp as f64
    }

    /// Nearest `f64` (may underflow to 0 or overflow to infinity).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let e = self.exp.clamp(-2200, 2200) as i32;
        (self.mant as f64) * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

/// Full 256-bit product as `(high, low)` halves.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let mask = u64::MAX as u128;
    let (a1, a0) = (a >> 64, a & mask);
    let (b1, b0) = (b >> 64, b & mask);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
    let lo = (p00 & mask) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

impl Ord for UpFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.exp.cmp(&other.exp).then(self.mant.cmp(&other.mant)),
        }
    }
}

impl PartialOrd for UpFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for UpFloat {
    type Output = UpFloat;
    fn add(self, rhs: UpFloat) -> UpFloat {
        self.add_exact(rhs).0
    }
}

impl AddAssign for UpFloat {
    fn add_assign(&mut self, rhs: UpFloat) {
        *self = *self + rhs;
    }
}

impl Mul for UpFloat {
    type Output = UpFloat;
    fn mul(self, rhs: UpFloat) -> UpFloat {
        self.mul_exact(rhs).0
    }
}

impl std::iter::Sum for UpFloat {
    fn sum<I: Iterator<Item = UpFloat>>(iter: I) -> UpFloat {
        iter.fold(UpFloat::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for UpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "0")
        } else {
            write!(f, "2^{:.2}", self.log2())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn exact(v: UpFloat) -> (BigUint, i64) {
        (BigUint::from(v.mant), v.exp)
    }

    /// `a · 2^ea` compared with `b · 2^eb`.
    fn cmp_scaled(a: &BigUint, ea: i64, b: &BigUint, eb: i64) -> Ordering {
        let e = ea.min(eb);
        (a << (ea - e) as usize).cmp(&(b << (eb - e) as usize))
    }

    #[test]
    fn small_integers_are_exact() {
        let (s, ok) = UpFloat::from_u128(3).add_exact(UpFloat::from_u128(5));
        assert!(ok);
        assert_eq!(s, UpFloat::from_u128(8));
        let (p, ok) = UpFloat::from_u128(12).mul_exact(UpFloat::from_u128(11));
        assert!(ok);
        assert_eq!(p, UpFloat::from_u128(132));
        assert_eq!(UpFloat::from_dyadic(1, 2).to_f64(), 0.25);
        assert_eq!(UpFloat::from_f64(0.75), UpFloat::from_dyadic(3, 2));
    }

    #[test]
    fn rounding_is_upward() {
        let one = UpFloat::ONE;
        let tiny = UpFloat::pow2(-300);
        let (s, ok) = one.add_exact(tiny);
        assert!(!ok);
        assert!(s > one);
        // 3 · (1/3 rounded up) >= 1
        let third = UpFloat::from_u128(u128::MAX / 3 + 1).mul_pow2(-128);
        assert!(third * UpFloat::from_u128(3) >= one);
    }

    #[test]
    fn random_operations_bracket_the_exact_value() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = UpFloat::from_u128(rng.gen::<u128>() | 1).mul_pow2(rng.gen_range(-200..200));
            let b = UpFloat::from_u128(rng.gen::<u128>() >> rng.gen_range(0..120)).mul_pow2(rng.gen_range(-200..200));
            let (ea, xa) = exact(a);
            let (eb, xb) = exact(b);

            let (p, p_ok) = a.mul_exact(b);
            let (ep, xp) = exact(p);
            let true_p = &ea * &eb;
            let ord = cmp_scaled(&ep, xp, &true_p, xa + xb);
            assert!(ord != Ordering::Less);
            assert_eq!(p_ok, ord == Ordering::Equal);

            let (s, s_ok) = a.add_exact(b);
            let (es, xs) = exact(s);
            let e = xa.min(xb);
            let true_s = (&ea << (xa - e) as usize) + (&eb << (xb - e) as usize);
            let ord = cmp_scaled(&es, xs, &true_s, e);
            assert!(ord != Ordering::Less);
            assert_eq!(s_ok, ord == Ordering::Equal);
            // at most one unit in the last place above
            let ulp_up = &es - BigUint::from(1u8);
            if !s_ok {
                assert_eq!(cmp_scaled(&ulp_up, xs, &true_s, e), Ordering::Less);
            }
        }
    }

    #[test]
    fn ordering_and_log2() {
        assert!(UpFloat::ZERO < UpFloat::pow2(-5000));
        assert!(UpFloat::pow2(-10) < UpFloat::pow2(-9));
        assert_eq!(UpFloat::pow2(-270).log2(), -270.0);
        assert_eq!(UpFloat::pow2(-1000).to_f64(), 2f64.powi(-1000));
        assert_eq!(format!("{}", UpFloat::pow2(-3)), "2^-3.00");
    }
}
