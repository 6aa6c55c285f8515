//! Exact geometry of the Gosset lattice `E8`.
//!
//! `E8 = D8 ∪ (D8 + ½·1)` where `D8` is the set of integer vectors with even
//! coordinate sum. Points are stored in half-units so every lattice point has
//! integer coordinates, and the closest-point search runs on exact rationals:
//! callers hand in `num / den` and no floating-point comparison ever decides
//! which side of a Voronoi facet an input falls on.

use std::ops::{Add, Neg, Sub};

/// A real 8-vector.
pub type Vec8 = [f64; 8];

/// Denominator used when a [`Vec8`] is converted to an exact rational.
pub const F64_DENOMINATOR: i64 = 1 << 32;

/// An 8-vector with rational coordinates `num[j] / den`, `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalVec8 {
    num: [i64; 8],
    den: i64,
}

impl RationalVec8 {
    pub fn new(num: [i64; 8], den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        Self { num, den }
    }

    pub fn from_integers(v: [i64; 8]) -> Self {
        Self { num: v, den: 1 }
    }

    pub fn numerators(&self) -> &[i64; 8] {
        &self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> Vec8 {
        self.num.map(|a| a as f64 / self.den as f64)
    }

    /// Coordinates scaled to the common even denominator `2·den`, as `i128`.
    fn doubled(&self) -> ([i128; 8], i128) {
        (self.num.map(|a| 2 * a as i128), 2 * self.den as i128)
    }
}

/// Converts by rounding every coordinate to the nearest multiple of `2^-32`.
///
/// Values in the tests and the decoder are dyadic with small denominators and
/// convert exactly. Coordinates must satisfy `|x| < 2^30`.
impl From<Vec8> for RationalVec8 {
    fn from(x: Vec8) -> Self {
        let num = x.map(|c| {
            assert!(c.is_finite() && c.abs() < (1u64 << 30) as f64, "coordinate {c} out of range");
            (c * F64_DENOMINATOR as f64).round() as i64
        });
        Self { num, den: F64_DENOMINATOR }
    }
}

impl From<&Vec8> for RationalVec8 {
    fn from(x: &Vec8) -> Self {
        Self::from(*x)
    }
}

/// A point of `E8`, stored in half-units: coordinate `j` equals `halves[j] / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct E8Point([i64; 8]);

impl E8Point {
    pub const ORIGIN: E8Point = E8Point([0; 8]);

    /// Returns `None` unless the half-unit vector describes a lattice point.
    pub fn from_halves(halves: [i64; 8]) -> Option<Self> {
        is_e8_halves(&halves).then_some(Self(halves))
    }

    pub fn from_integers(v: [i64; 8]) -> Option<Self> {
        Self::from_halves(v.map(|c| 2 * c))
    }

    pub fn halves(&self) -> &[i64; 8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec8 {
        self.0.map(|h| h as f64 / 2.0)
    }

    /// Squared Euclidean norm times four (an integer).
    pub fn norm_sq_x4(&self) -> i64 {
        self.0.iter().map(|h| h * h).sum()
    }

    /// Whether all coordinates are half-odd-integers.
    pub fn is_half_integral(&self) -> bool {
        self.0[0].rem_euclid(2) == 1
    }

    pub fn scale(&self, k: i64) -> Self {
        Self(self.0.map(|h| h * k))
    }
}

impl Add for E8Point {
    type Output = E8Point;
    fn add(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|j| self.0[j] + rhs.0[j]))
    }
}

impl Sub for E8Point {
    type Output = E8Point;
    fn sub(self, rhs: Self) -> Self {
        Self(std::array::from_fn(|j| self.0[j] - rhs.0[j]))
    }
}

impl Neg for E8Point {
    type Output = E8Point;
    fn neg(self) -> Self {
        Self(self.0.map(|h| -h))
    }
}

/// Half-unit membership test: common parity, and coordinate sum even.
pub fn is_e8_halves(h: &[i64; 8]) -> bool {
    let parity = h[0].rem_euclid(2);
    h.iter().all(|c| c.rem_euclid(2) == parity) && h.iter().sum::<i64>().rem_euclid(4) == 0
}

/// True iff `x` is a point of `E8`.
pub fn is_e8_point(x: &Vec8) -> bool {
    let mut halves = [0i64; 8];
    for (h, &c) in halves.iter_mut().zip(x) {
        let d = 2.0 * c;
        if !d.is_finite() || d.fract() != 0.0 || d.abs() > (1u64 << 52) as f64 {
            return false;
        }
        *h = d as i64;
    }
    is_e8_halves(&halves)
}

/// The rows of the generator matrix, in half-units.
pub fn generator_halves() -> [[i64; 8]; 8] {
    let mut g = [[0i64; 8]; 8];
    g[0][0] = 4;
    for (i, row) in g.iter_mut().enumerate().take(7).skip(1) {
        row[i - 1] = -2;
        row[i] = 2;
    }
    g[7] = [1; 8];
    g
}

/// Nearest integer to `a / d` (`d > 0`) with exact halves rounded toward zero.
fn round_scaled(a: i128, d: i128) -> i128 {
    let q = a.div_euclid(d);
    let r = a - q * d;
    match (2 * r).cmp(&d) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        // tie between q and q + 1: keep the one of smaller magnitude
        std::cmp::Ordering::Equal => {
            if q >= 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

fn sign(v: i128) -> i128 {
    if v >= 0 {
        1
    } else {
        -1
    }
}

fn round_vec_scaled(a: &[i128; 8], d: i128) -> [i128; 8] {
    a.map(|c| round_scaled(c, d))
}

fn worst_wrong_scaled(a: &[i128; 8], d: i128) -> [i128; 8] {
    let mut out = round_vec_scaled(a, d);
    // argmax of the rounding distance, lowest index on ties
    let mut worst = 0;
    let mut worst_dist = -1;
    for j in 0..8 {
        let dist = (a[j] - out[j] * d).abs();
        if dist > worst_dist {
            worst_dist = dist;
            worst = j;
        }
    }
    let x = a[worst];
    let mag = x.abs();
    out[worst] += sign(x) * sign(mag - round_scaled(mag, d) * d);
    out
}

/// Component-wise nearest integer; exact `±k.5` goes toward zero.
pub fn round_half_to_zero(x: impl Into<RationalVec8>) -> [i64; 8] {
    let x = x.into();
    let (a, d) = x.doubled();
    round_vec_scaled(&a, d).map(|c| c as i64)
}

/// Like [`round_half_to_zero`] but the coordinate furthest from an integer is
/// rounded the other way.
pub fn round_worst_wrong(x: impl Into<RationalVec8>) -> [i64; 8] {
    let x = x.into();
    let (a, d) = x.doubled();
    worst_wrong_scaled(&a, d).map(|c| c as i64)
}

/// Closest point of `D8` (or of a shifted copy, if `a` was shifted) to `a / d`,
/// chosen between the plain rounding and the worst-wrong rounding by parity.
fn nearest_even_sum(a: &[i128; 8], d: i128) -> [i128; 8] {
    let f = round_vec_scaled(a, d);
    if f.iter().sum::<i128>().rem_euclid(2) == 0 {
        f
    } else {
        worst_wrong_scaled(a, d)
    }
}

/// `(2D)^2 · ‖a/D − halves/2‖²`.
fn dist_sq_scaled(a: &[i128; 8], d: i128, halves: &[i128; 8]) -> i128 {
    a.iter().zip(halves).map(|(&x, &h)| (2 * x - h * d).pow(2)).sum()
}

/// A closest point of `E8` to `x`.
///
/// Ties between the integer candidate and the half-integer candidate resolve
/// to the integer candidate.
pub fn cvp_e8(x: impl Into<RationalVec8>) -> E8Point {
    let x = x.into();
    let (a, d) = x.doubled();

    let y = nearest_even_sum(&a, d).map(|c| 2 * c);

    let half = d / 2;
    let shifted = a.map(|c| c - half);
    let y_half = nearest_even_sum(&shifted, d).map(|c| 2 * c + 1);

    let best = if dist_sq_scaled(&a, d, &y_half) < dist_sq_scaled(&a, d, &y) {
        y_half
    } else {
        y
    };
    let point = E8Point(best.map(|c| c as i64));
    debug_assert!(is_e8_halves(&point.0));
    point
}

/// Squared distance from `x` to `p`, scaled by `(2·2·den)^2`; exact.
pub fn dist_sq_exact(x: &RationalVec8, p: &E8Point) -> i128 {
    let (a, d) = x.doubled();
    dist_sq_scaled(&a, d, &p.0.map(|h| h as i128))
}

/// Voronoi-relevant vectors of `E8`: the 240 minimal vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevantVectorSet {
    /// Shape `(±1², 0⁶)`.
    pub vr1: Vec<E8Point>,
    /// Shape `(±½)⁸` with an even number of minus signs.
    pub vr2: Vec<E8Point>,
}

impl RelevantVectorSet {
    pub fn iter(&self) -> impl Iterator<Item = &E8Point> {
        self.vr1.iter().chain(self.vr2.iter())
    }

    pub fn len(&self) -> usize {
        self.vr1.len() + self.vr2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn relevant_vectors() -> RelevantVectorSet {
    let mut vr1 = Vec::with_capacity(112);
    for i in 0..8 {
        for j in i + 1..8 {
            for (si, sj) in [(2, 2), (2, -2), (-2, 2), (-2, -2)] {
                let mut h = [0i64; 8];
                h[i] = si;
                h[j] = sj;
                vr1.push(E8Point(h));
            }
        }
    }
    let vr2 = (0u32..256)
        .filter(|m| m.count_ones() % 2 == 0)
        .map(|m| E8Point(std::array::from_fn(|j| if m >> j & 1 == 1 { -1 } else { 1 })))
        .collect();
    RelevantVectorSet { vr1, vr2 }
}
