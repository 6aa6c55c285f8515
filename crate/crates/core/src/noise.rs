//! The discretized error distribution χ.
//!
//! χ approximates the rounded Gaussian Ψ_σ with probabilities that are
//! integer multiples of `2^-16`. Tables are built from a 320-bit fixed-point
//! evaluation of the normal CDF, so the numerators are reproducible bit for bit.

use std::fmt::Write as _;

use rand::RngCore;
use thiserror::Error;

use crate::hiprec::{normal_interval, normal_upper_tail, Fixed};

/// Default numerator precision: probabilities are multiples of `2^-16`.
pub const CHI_BITS: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("sigma = {0} must be a positive finite number")]
    Sigma(f64),
    #[error("sigma = {0} is too small: the support would be {{0}}")]
    DegenerateSupport(f64),
    #[error("table precision of {0} bits is outside 4..=30")]
    Precision(u32),
    #[error("Renyi order must exceed 1, got {0}")]
    Order(f64),
    #[error("reference distribution vanishes at {0}, which is in the support: divergence is infinite")]
    Infinite(i64),
    #[error("malformed chi table: {0}")]
    Parse(String),
}

fn check_sigma(sigma: f64) -> Result<(), NoiseError> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(NoiseError::Sigma(sigma))
    }
}

/// `(i − ½)/σ` and `(i + ½)/σ` as fixed-point values.
fn cell_bounds(sigma: &Fixed, i: i64) -> (Fixed, Fixed) {
    let lo = Fixed::from_int(2 * i - 1).div_int(2).div(sigma);
    let hi = Fixed::from_int(2 * i + 1).div_int(2).div(sigma);
    (lo, hi)
}

fn rounded_gaussian_fixed(sigma: &Fixed, i: i64) -> Fixed {
    let (lo, hi) = cell_bounds(sigma, i);
    normal_interval(&lo, &hi)
}

/// Probability that a sample of `N(0, σ²)` rounds to `i`, i.e. the Gaussian
/// mass of `[i − ½, i + ½]`, to about 90 significant decimal digits.
pub fn rounded_gaussian_pmf(sigma: f64, i: i64) -> Result<f64, NoiseError> {
    rounded_gaussian_pmf_precise(sigma, i).map(|v| v.to_f64())
}

/// Same as [`rounded_gaussian_pmf`], at full fixed-point precision.
pub fn rounded_gaussian_pmf_precise(sigma: f64, i: i64) -> Result<Fixed, NoiseError> {
    check_sigma(sigma)?;
    Ok(rounded_gaussian_fixed(&Fixed::from_f64(sigma), i))
}

/// Smallest `s` with `P{X > s + ½} < 2^-(bits+1)` for `X ~ N(0, σ²)`: beyond
/// `s` every rounded numerator would be zero.
pub fn support_radius(sigma: f64, bits: u32) -> Result<i64, NoiseError> {
    check_sigma(sigma)?;
    let sig = Fixed::from_f64(sigma);
    let threshold = Fixed::pow2_neg(bits + 1);
    let mut s = 0i64;
    loop {
        let (_, hi) = cell_bounds(&sig, s);
        if normal_upper_tail(&hi) < threshold {
            return Ok(s);
        }
        s += 1;
    }
}

/// χ for `sigma` with 16-bit numerators.
pub fn build_chi(sigma: f64) -> Result<ChiTable, NoiseError> {
    ChiTable::build(sigma)
}

/// A finite symmetric distribution on `{-s..s}` with masses `numerator / 2^bits`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiTable {
    sigma: f64,
    bits: u32,
    /// Numerators for `i = -s ..= s`.
    pmf: Vec<u32>,
}

impl ChiTable {
    /// Builds χ for `sigma` at the default 16-bit precision.
    pub fn build(sigma: f64) -> Result<Self, NoiseError> {
        Self::build_with_precision(sigma, CHI_BITS)
    }

    pub fn build_with_precision(sigma: f64, bits: u32) -> Result<Self, NoiseError> {
        check_sigma(sigma)?;
        if !(4..=30).contains(&bits) {
            return Err(NoiseError::Precision(bits));
        }
        let s = support_radius(sigma, bits)?;
        if s < 1 {
            return Err(NoiseError::DegenerateSupport(sigma));
        }
        let sig = Fixed::from_f64(sigma);
        // exact targets 2^bits · Ψ_σ(i) for i = 0..=s
        let targets: Vec<Fixed> = (0..=s)
            .map(|i| {
                let p = rounded_gaussian_fixed(&sig, i);
                &p * &Fixed::from_int(1i64 << bits)
            })
            .collect();
        let mut half: Vec<i64> = targets
            .iter()
            .map(|t| t.round_scaled(0).try_into().expect("numerator fits in i64"))
            .collect();
        repair_total(&mut half, &targets, 1i64 << bits);

        let pmf = (-s..=s).map(|i| half[i.unsigned_abs() as usize] as u32).collect();
        let table = Self { sigma, bits, pmf };
        debug_assert!(table.is_valid());
        Ok(table)
    }

    /// The distribution concentrated on zero.
    pub fn point_mass() -> Self {
        Self { sigma: 0.0, bits: CHI_BITS, pmf: vec![1 << CHI_BITS] }
    }

    /// Builds a table from the numerators of `0, 1, .., s` (mirrored to `-s..-1`).
    pub fn from_half_numerators(sigma: f64, bits: u32, half: &[u32]) -> Result<Self, NoiseError> {
        if half.is_empty() {
            return Err(NoiseError::Parse("empty table".into()));
        }
        if !(1..=30).contains(&bits) {
            return Err(NoiseError::Precision(bits));
        }
        let s = half.len() as i64 - 1;
        let pmf = (-s..=s).map(|i| half[i.unsigned_abs() as usize]).collect();
        let table = Self { sigma, bits, pmf };
        if !table.is_valid() {
            return Err(NoiseError::Parse("numerators must sum to 2^bits and be unimodal".into()));
        }
        Ok(table)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Numerator precision: masses are multiples of `2^-bits`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Support radius `s`.
    pub fn s(&self) -> i64 {
        (self.pmf.len() as i64 - 1) / 2
    }

    pub fn numerator(&self, i: i64) -> u32 {
        let s = self.s();
        if i.abs() > s {
            0
        } else {
            self.pmf[(i + s) as usize]
        }
    }

    pub fn numerators(&self) -> &[u32] {
        &self.pmf
    }

    pub fn prob(&self, i: i64) -> f64 {
        self.numerator(i) as f64 / (1u64 << self.bits) as f64
    }

    /// Cumulative numerators `Σ_{j <= i}` for `i = -s ..= s`.
    pub fn cdf(&self) -> Vec<u64> {
        self.pmf
            .iter()
            .scan(0u64, |acc, &p| {
                *acc += p as u64;
                Some(*acc)
            })
            .collect()
    }

    pub fn variance(&self) -> f64 {
        let s = self.s();
        (-s..=s).map(|i| (i * i) as f64 * self.prob(i)).sum()
    }

    /// Sums to `2^bits`, symmetric, non-increasing away from zero.
    pub fn is_valid(&self) -> bool {
        let s = self.s();
        let total: u64 = self.pmf.iter().map(|&p| p as u64).sum();
        self.pmf.len() % 2 == 1
            && total == 1u64 << self.bits
            && (1..=s).all(|i| self.numerator(i) == self.numerator(-i))
            && (0..s).all(|i| self.numerator(i + 1) <= self.numerator(i))
    }

    /// Inversion thresholds over the non-negative half:
    /// `T(z) = pmf(0) − 1 + 2·Σ_{1<=j<=z} pmf(j)` for `z = 0 .. s-1`.
    pub fn thresholds(&self) -> Vec<i64> {
        let mut acc = self.numerator(0) as i64 - 1;
        let mut out = Vec::with_capacity(self.s() as usize);
        for z in 0..self.s() {
            if z > 0 {
                acc += 2 * self.numerator(z) as i64;
            }
            out.push(acc);
        }
        out
    }

    /// Text format: header `sigma s`, then one `i numerator` line per support point.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.sigma, self.s());
        let s = self.s();
        for i in -s..=s {
            writeln!(out, "{} {}", i, self.numerator(i)).expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NoiseError> {
        let bad = |m: &str| NoiseError::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let mut it = header.split_whitespace();
        let sigma: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad sigma"))?;
        let s: i64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad support radius"))?;
        let mut pmf = Vec::new();
        for (expected, line) in (-s..=s).zip(lines.by_ref()) {
            let mut f = line.split_whitespace();
            let i: i64 = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad index"))?;
            let num: u32 = f.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad numerator"))?;
            if i != expected {
                return Err(bad("indices out of order"));
            }
            pmf.push(num);
        }
        if pmf.len() as i64 != 2 * s + 1 || lines.next().is_some() {
            return Err(bad("wrong number of lines"));
        }
        let table = Self { sigma, bits: CHI_BITS, pmf };
        if !table.is_valid() {
            return Err(bad("numerators must sum to 2^16 and be symmetric unimodal"));
        }
        Ok(table)
    }
}

/// Makes `half[0] + 2·Σ_{i>=1} half[i]` equal `total` by ±1 steps.
///
/// Each step moves the entry whose rounding left it furthest from its exact
/// target in the needed direction; `half[0]` moves by one unit of total, the
/// pair `±i` by two. Steps that would break monotonicity are skipped.
fn repair_total(half: &mut [i64], targets: &[Fixed], total: i64) {
    let sum = |h: &[i64]| h[0] + 2 * h[1..].iter().sum::<i64>();
    loop {
        let deficit = total - sum(half);
        if deficit == 0 {
            return;
        }
        let step = deficit.signum();
        let mut best: Option<(usize, Fixed)> = None;
        for i in 0..half.len() {
            if i > 0 && deficit.abs() < 2 {
                break;
            }
            let next = half[i] + step;
            let monotone = next >= 0
                && (i == 0 || next <= half[i - 1])
                && (i + 1 == half.len() || next >= half[i + 1]);
            if !monotone {
                continue;
            }
            // distance from target after the step; smaller is better
            let err = (&Fixed::from_int(next) - &targets[i]).abs();
            if best.as_ref().is_none_or(|(_, e)| err < *e) {
                best = Some((i, err));
            }
        }
        let (i, _) = best.expect("a monotone adjustment always exists at the centre");
        half[i] += step;
    }
}

/// Draws one sample from `t` using `bits` uniform bits plus one sign bit of `r`.
///
/// Bits `0..bits` of `r` form the magnitude selector, bit `bits` is the sign.
/// Every threshold is compared regardless of the outcome.
pub fn sample(t: &ChiTable, r: u32) -> i64 {
    let mask = (1u32 << t.bits) - 1;
    let u = (r & mask) as i64;
    let sign = (r >> t.bits & 1) as i64;
    let mut e = 0i64;
    for &threshold in &t.thresholds() {
        e += (threshold - u) >> 63 & 1;
    }
    ((-sign) ^ e) + sign
}

/// Precomputed thresholds for fast repeated sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    bits: u32,
    thresholds: Vec<i64>,
}

impl Sampler {
    pub fn new(t: &ChiTable) -> Self {
        Self { bits: t.bits, thresholds: t.thresholds() }
    }

    pub fn sample_with(&self, r: u32) -> i64 {
        let u = (r & ((1u32 << self.bits) - 1)) as i64;
        let sign = (r >> self.bits & 1) as i64;
        let e: i64 = self.thresholds.iter().map(|&th| (th - u) >> 63 & 1).sum();
        ((-sign) ^ e) + sign
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> i64 {
        self.sample_with(rng.next_u32())
    }
}

/// Rényi divergence `D_α(P‖Q) = ln(Σ_{x∈supp P} P(x)^α Q(x)^{1−α}) / (α − 1)`.
///
/// `p` lists the support of P with its masses; zero masses are skipped.
pub fn renyi_divergence<Q: Fn(i64) -> f64>(p: &[(i64, f64)], q: Q, alpha: f64) -> Result<f64, NoiseError> {
    if !(alpha > 1.0) {
        return Err(NoiseError::Order(alpha));
    }
    // accumulate Σ P·((P/Q)^{α−1} − 1) to keep precision when P ≈ Q
    let mut excess = 0.0f64;
    let mut mass = 0.0f64;
    for &(x, px) in p {
        if px <= 0.0 {
            continue;
        }
        let qx = q(x);
        if !(qx > 0.0) {
            return Err(NoiseError::Infinite(x));
        }
        let log_ratio = (px / qx).ln();
        excess += px * ((alpha - 1.0) * log_ratio).exp_m1();
        mass += px;
    }
    Ok((excess + (mass - 1.0)).ln_1p() / (alpha - 1.0))
}

/// `D_α(χ‖Ψ_σ)` with the rounded Gaussian evaluated at full precision.
#[derive(Debug, Clone)]
pub struct ChiDivergence {
    points: Vec<(i64, f64)>,
    reference: Vec<f64>,
}

impl ChiDivergence {
    pub fn new(t: &ChiTable) -> Result<Self, NoiseError> {
        check_sigma(t.sigma())?;
        let s = t.s();
        let points: Vec<(i64, f64)> = (-s..=s).map(|i| (i, t.prob(i))).collect();
        let reference = (-s..=s)
            .map(|i| rounded_gaussian_pmf(t.sigma(), i))
            .collect::<Result<_, _>>()?;
        Ok(Self { points, reference })
    }

    pub fn at(&self, alpha: f64) -> Result<f64, NoiseError> {
        let s = (self.points.len() as i64 - 1) / 2;
        renyi_divergence(&self.points, |x| self.reference[(x + s) as usize], alpha)
    }
}
