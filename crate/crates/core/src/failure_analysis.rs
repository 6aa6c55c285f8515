//! Rigorous upper bounds on the decryption failure probability.
//!
//! One entry of the final error matrix is `Σ_{k<2n} X_k·Y_k + Z` with all
//! factors drawn independently from χ. Its distribution χ′ is built by
//! repeated squaring of the product distribution, with every floating-point
//! operation rounded upward and every dropped tail accounted for. A block
//! decodes correctly when it stays inside the Voronoi cell of `βE8`; the union
//! bound over the 240 relevant vectors reduces this to one-dimensional tails of
//! sums of two and of eight χ′ entries.

use thiserror::Error;

use crate::e8_lattice::relevant_vectors;
use crate::noise::{ChiTable, NoiseError};
use crate::params::{ParamSet, NBAR};
use crate::upfloat::UpFloat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("support of {support} points exceeds the limit of {limit} (enable coarsening or raise the limit)")]
    SizeLimit { support: usize, limit: usize },
    #[error("convolution count must be at least 1")]
    ZeroCount,
    #[error("Renyi order must exceed 1, got {0}")]
    Order(f64),
    #[error("grid steps {0} and {1} are incompatible")]
    Step(i64, i64),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

/// Whether a [`Pmf`] holds exact probabilities or upper bounds on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Exact,
    UpperBound,
}

/// Knobs for the bound computation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Initial number of cells for the piecewise-constant two-fold tail.
    pub grid_cells: usize,
    /// Double the grid until the bound moves by less than `grid_tolerance`.
    pub refine_grid: bool,
    /// Stop doubling the grid once the bound moves by less than this factor.
    pub grid_tolerance: f64,
    /// Point masses below `2^truncation_log2` at either end are moved into the truncated mass.
    pub truncation_log2: i64,
    /// Largest support (in grid points) a convolution may produce.
    pub max_support: usize,
    /// On hitting `max_support`, merge neighbouring points upward instead of failing.
    pub coarsen: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { grid_cells: 4096, refine_grid: true, grid_tolerance: 1.01, truncation_log2: -400, max_support: 1 << 18, coarsen: false }
    }
}

/// A probability mass function on the grid `offset + k·step`.
///
/// Under [`Semantics::UpperBound`] each mass bounds the true mass from above,
/// or (after coarsening) mass has only ever been moved toward larger values,
/// so every upper tail computed from it is an upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    offset: i64,
    step: i64,
    masses: Vec<UpFloat>,
    truncated: UpFloat,
    exact: bool,
}

impl Pmf {
    /// Exact masses on `offset, offset + 1, …`.
    pub fn from_masses(offset: i64, masses: Vec<UpFloat>) -> Self {
        assert!(!masses.is_empty(), "a pmf needs at least one point");
        Self { offset, step: 1, masses, truncated: UpFloat::ZERO, exact: true }
    }

    pub fn point(v: i64) -> Self {
        Self::from_masses(v, vec![UpFloat::ONE])
    }

    /// χ itself, exactly.
    pub fn from_chi(t: &ChiTable) -> Self {
        let masses = t.numerators().iter().map(|&n| UpFloat::from_dyadic(n as u128, t.bits())).collect();
        Self::from_masses(-t.s(), masses)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn step(&self) -> i64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[UpFloat] {
        &self.masses
    }

    /// Mass removed from the tails, added back to every tail bound.
    pub fn truncated(&self) -> UpFloat {
        self.truncated
    }

    pub fn semantics(&self) -> Semantics {
        if self.exact && self.truncated.is_zero() {
            Semantics::Exact
        } else {
            Semantics::UpperBound
        }
    }

    /// Value of grid point `k`.
    pub fn value(&self, k: usize) -> i64 {
        self.offset + k as i64 * self.step
    }

    pub fn min_value(&self) -> i64 {
        self.offset
    }

    pub fn max_value(&self) -> i64 {
        self.value(self.len() - 1)
    }

    /// Mass at `v` (zero off the grid or outside the support).
    pub fn mass_at(&self, v: i64) -> UpFloat {
        let d = v - self.offset;
        if d < 0 || d % self.step != 0 {
            return UpFloat::ZERO;
        }
        self.masses.get((d / self.step) as usize).copied().unwrap_or(UpFloat::ZERO)
    }

    /// Sum of the stored masses, rounded upward.
    pub fn mass(&self) -> UpFloat {
        self.masses.iter().copied().sum()
    }

    /// Symmetric about zero, point for point.
    pub fn is_symmetric(&self) -> bool {
        self.offset == -self.max_value() && self.masses.iter().eq(self.masses.iter().rev())
    }

    /// Non-decreasing up to some mode and non-increasing after it.
    pub fn is_unimodal(&self) -> bool {
        let m = &self.masses;
        let peak = (0..m.len()).max_by(|&a, &b| m[a].cmp(&m[b]).then(b.cmp(&a))).unwrap_or(0);
        m[..=peak].windows(2).all(|w| w[0] <= w[1]) && m[peak..].windows(2).all(|w| w[0] >= w[1])
    }

    pub fn mean(&self) -> f64 {
        (0..self.len()).map(|k| self.value(k) as f64 * self.masses[k].to_f64()).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        (0..self.len()).map(|k| (self.value(k) as f64 - mu).powi(2) * self.masses[k].to_f64()).sum()
    }

    /// Moves the mass of every point to the smallest grid point `anchor + j·step`
    /// at or above it.
    pub fn coarsen_to(&self, step: i64, anchor: i64) -> Pmf {
        assert!(step >= 1 && step % self.step == 0, "new step must be a multiple of the old one");
        if step == self.step && (self.offset - anchor).rem_euclid(step) == 0 {
            return self.clone();
        }
        let up = |v: i64| anchor + (v - anchor).div_euclid(step) * step + if (v - anchor).rem_euclid(step) == 0 { 0 } else { step };
        let lo = up(self.min_value());
        let hi = up(self.max_value());
        let mut masses = vec![UpFloat::ZERO; ((hi - lo) / step + 1) as usize];
        for (k, &m) in self.masses.iter().enumerate() {
            let j = ((up(self.value(k)) - lo) / step) as usize;
            masses[j] += m;
        }
        Pmf { offset: lo, step, masses, truncated: self.truncated, exact: false }
    }

    /// Drops end points below `2^log2` into the truncated mass.
    fn trim(&mut self, log2: i64) {
        let limit = UpFloat::pow2(log2);
        let keep_hi = self.masses.iter().rposition(|&m| m >= limit);
        let Some(keep_hi) = keep_hi else {
            // everything is negligible: keep the single largest point
            let peak = (0..self.len()).max_by(|&a, &b| self.masses[a].cmp(&self.masses[b])).unwrap_or(0);
            self.drop_range(peak + 1..self.len());
            self.drop_range(0..peak);
            return;
        };
        let keep_lo = self.masses.iter().position(|&m| m >= limit).unwrap_or(0);
        self.drop_range(keep_hi + 1..self.len());
        self.drop_range(0..keep_lo);
    }

    fn drop_range(&mut self, range: std::ops::Range<usize>) {
        if range.is_empty() {
            return;
        }
        let (start, count) = (range.start, range.len());
        let dropped: UpFloat = self.masses.drain(range).sum();
        self.truncated += dropped;
        if start == 0 {
            self.offset += count as i64 * self.step;
        }
    }
}

/// Distribution of `X·Y` for independent `X, Y ~ χ`, exactly.
pub fn product_dist(t: &ChiTable) -> Pmf {
    let s = t.s();
    let bound = s * s;
    let mut num = vec![0u128; (2 * bound + 1) as usize];
    for x in -s..=s {
        for y in -s..=s {
            num[(x * y + bound) as usize] += t.numerator(x) as u128 * t.numerator(y) as u128;
        }
    }
    let masses = num.into_iter().map(|n| UpFloat::from_dyadic(n, 2 * t.bits())).collect();
    Pmf::from_masses(-bound, masses)
}

/// Distribution of `X + Y` for independent `X ~ a`, `Y ~ b`.
pub fn convolve(a: &Pmf, b: &Pmf, opts: &AnalysisOptions) -> Result<Pmf, AnalysisError> {
    let (mut a, mut b) = align_steps(a, b)?;
    while a.len() + b.len() - 1 > opts.max_support {
        if !opts.coarsen {
            return Err(AnalysisError::SizeLimit { support: a.len() + b.len() - 1, limit: opts.max_support });
        }
        a = a.coarsen_to(2 * a.step, a.offset);
        b = b.coarsen_to(2 * b.step, b.offset);
    }
    Ok(convolve_raw(&a, &b, false, opts))
}

/// `X + X′` for two independent copies of `p`.
fn square(p: &Pmf, opts: &AnalysisOptions) -> Result<Pmf, AnalysisError> {
    let mut p = p.clone();
    while 2 * p.len() - 1 > opts.max_support {
        if !opts.coarsen {
            return Err(AnalysisError::SizeLimit { support: 2 * p.len() - 1, limit: opts.max_support });
        }
        p = p.coarsen_to(2 * p.step, p.offset);
    }
    Ok(convolve_raw(&p, &p, true, opts))
}

fn align_steps(a: &Pmf, b: &Pmf) -> Result<(Pmf, Pmf), AnalysisError> {
    if a.step == b.step {
        Ok((a.clone(), b.clone()))
    } else if a.step % b.step == 0 {
        Ok((a.clone(), b.coarsen_to(a.step, b.offset)))
    } else if b.step % a.step == 0 {
        Ok((a.coarsen_to(b.step, a.offset), b.clone()))
    } else {
        Err(AnalysisError::Step(a.step, b.step))
    }
}

fn convolve_raw(a: &Pmf, b: &Pmf, same: bool, opts: &AnalysisOptions) -> Pmf {
    let (la, lb) = (a.len(), b.len());
    let n = la + lb - 1;
    let symmetric = a.is_symmetric() && b.is_symmetric();
    // a symmetric result is computed up to its centre and mirrored
    let last = if symmetric { (n - 1) / 2 } else { n - 1 };
    let mut out = vec![UpFloat::ZERO; n];
    let mut exact = a.exact && b.exact;
    let (am, bm) = (&a.masses, &b.masses);
    for (r, slot) in out.iter_mut().enumerate().take(last + 1) {
        let i_lo = r.saturating_sub(lb - 1);
        let i_hi = r.min(la - 1);
        let mut acc = UpFloat::ZERO;
        if same {
            // pairs (i, r − i) and (r − i, i) contribute equally
            let mut i = i_lo;
            while i < r - i {
                let (p, e1) = am[i].mul_exact(am[r - i]);
                let (s, e2) = acc.add_exact(p);
                exact &= e1 && e2;
                acc = s;
                i += 1;
            }
            acc = acc.mul_pow2(1);
            if r % 2 == 0 && r / 2 <= i_hi {
                let (p, e1) = am[r / 2].mul_exact(am[r / 2]);
                let (s, e2) = acc.add_exact(p);
                exact &= e1 && e2;
                acc = s;
            }
        } else {
            for i in i_lo..=i_hi {
                let (p, e1) = am[i].mul_exact(bm[r - i]);
                let (s, e2) = acc.add_exact(p);
                exact &= e1 && e2;
                acc = s;
            }
        }
        *slot = acc;
    }
    if symmetric {
        for r in 0..(n - 1 - last) {
            out[n - 1 - r] = out[r];
        }
    }
    // P{X or Y truncated} = ta·Mb + tb·Ma + ta·tb
    let (ta, tb) = (a.truncated, b.truncated);
    let truncated = ta * b.mass() + tb * a.mass() + ta * tb;
    let mut result = Pmf { offset: a.offset + b.offset, step: a.step, masses: out, truncated, exact };
    result.trim(opts.truncation_log2);
    result
}

/// Distribution of the sum of `m` independent copies of `p`, by repeated
/// squaring over the binary expansion of `m`.
pub fn self_convolve(p: &Pmf, m: u64, opts: &AnalysisOptions) -> Result<Pmf, AnalysisError> {
    if m == 0 {
        return Err(AnalysisError::ZeroCount);
    }
    let mut result: Option<Pmf> = None;
    let mut base = p.clone();
    let mut k = m;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base, opts)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = square(&base, opts)?;
    }
    Ok(result.expect("m >= 1 sets at least one bit"))
}

/// Distribution χ′ of one entry of `S′E − E′S + E″` for dimension `n`.
pub fn chi_prime(t: &ChiTable, n: usize, opts: &AnalysisOptions) -> Result<Pmf, AnalysisError> {
    let products = self_convolve(&product_dist(t), 2 * n as u64, opts)?;
    convolve(&products, &Pmf::from_chi(t), opts)
}

/// Suffix sums `S[k] = truncated + Σ_{j>=k} masses[j]`, rounded upward, with `S[len] = truncated`.
fn survival(p: &Pmf) -> Vec<UpFloat> {
    let mut out = vec![p.truncated; p.len() + 1];
    for k in (0..p.len()).rev() {
        out[k] = out[k + 1] + p.masses[k];
    }
    out
}

/// Index of the first grid point with value `>= t`, clamped to `0..=len`.
fn first_at_or_above(p: &Pmf, t: i64) -> usize {
    let d = t - p.offset;
    if d <= 0 {
        0
    } else {
        (((d + p.step - 1) / p.step) as usize).min(p.len())
    }
}

/// Upper bound on `P{X >= t}`, capped at 1.
pub fn tail(p: &Pmf, t: i64) -> UpFloat {
    let from = first_at_or_above(p, t);
    let s: UpFloat = p.masses[from..].iter().copied().sum::<UpFloat>() + p.truncated;
    s.min(UpFloat::ONE)
}

/// Upper bound on `P{X + X′ >= t}` for independent `X, X′ ~ p`.
///
/// The support of `X` is cut into `grid_cells` runs of consecutive points;
/// on each run `P{X′ >= t − x}` is replaced by its value at the largest `x`.
pub fn tail_sum_two(p: &Pmf, t: i64, grid_cells: usize) -> UpFloat {
    tail_sum_two_with(p, &survival(p), t, grid_cells)
}

fn tail_sum_two_with(p: &Pmf, surv: &[UpFloat], t: i64, grid_cells: usize) -> UpFloat {
    let len = p.len();
    let cells = grid_cells.clamp(1, len);
    let mut bound = p.truncated;
    for c in 0..cells {
        let lo = c * len / cells;
        let hi = (c + 1) * len / cells;
        if lo == hi {
            continue;
        }
        let mass: UpFloat = p.masses[lo..hi].iter().copied().sum();
        let s = surv[first_at_or_above(p, t - p.value(hi - 1))].min(UpFloat::ONE);
        bound += mass * s;
    }
    bound.min(UpFloat::ONE)
}

/// Both union-bound terms of the block-decoding failure bound and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PeBound {
    pub beta: u32,
    /// `8·|VR1|·P{E_00 + E_11 >= β}`.
    pub term_pairs: UpFloat,
    /// `8·|VR2|·P{E_00 + … + E_77 >= 2β}`.
    pub term_octets: UpFloat,
    pub total: UpFloat,
    /// Grid used for the eight-fold tail.
    pub grid_cells: usize,
    /// Support size and grid step of χ′.
    pub support: usize,
    pub step: i64,
    pub semantics: Semantics,
}

impl PeBound {
    pub fn log2(&self) -> f64 {
        self.total.log2()
    }
}

/// Failure bound of the E8 block decoder for `p`, with χ built from `p.sigma()`.
pub fn pe_bound(p: &ParamSet, opts: &AnalysisOptions) -> Result<PeBound, AnalysisError> {
    pe_bound_with_chi(p, &ChiTable::build(p.sigma())?, opts)
}

pub fn pe_bound_with_chi(p: &ParamSet, chi: &ChiTable, opts: &AnalysisOptions) -> Result<PeBound, AnalysisError> {
    let beta = p.beta();
    let cp = chi_prime(chi, p.n(), opts)?;
    let cp2 = square(&cp, opts)?;
    let cp4 = square(&cp2, opts)?;

    let rv = relevant_vectors();
    let blocks = NBAR as u128;
    let c1 = UpFloat::from_u128(blocks * rv.vr1.len() as u128);
    let c2 = UpFloat::from_u128(blocks * rv.vr2.len() as u128);

    let t1 = tail(&cp2, beta as i64);
    let surv = survival(&cp4);
    let target = 2 * beta as i64;
    let mut cells = opts.grid_cells.clamp(1, cp4.len());
    let mut t2 = tail_sum_two_with(&cp4, &surv, target, cells);
    while opts.refine_grid && cells < cp4.len() && !t2.is_zero() {
        let finer = (2 * cells).min(cp4.len());
        let next = tail_sum_two_with(&cp4, &surv, target, finer);
        let moved = t2.log2() - next.log2();
        cells = finer;
        t2 = next;
        if moved < opts.grid_tolerance.log2() {
            break;
        }
    }
    let term_pairs = c1 * t1;
    let term_octets = c2 * t2;
    let semantics = if cp4.semantics() == Semantics::Exact { Semantics::Exact } else { Semantics::UpperBound };
    Ok(PeBound {
        beta,
        term_pairs,
        term_octets,
        total: term_pairs + term_octets,
        grid_cells: cells,
        support: cp.len(),
        step: cp.step(),
        semantics,
    })
}

/// Failure bound of the per-coordinate decoder (`B` bits per entry, threshold `q/2^{B+1}`).
pub fn cubic_pe_bound(p: &ParamSet, opts: &AnalysisOptions) -> Result<UpFloat, AnalysisError> {
    cubic_pe_bound_with_chi(p, &ChiTable::build(p.sigma())?, opts)
}

pub fn cubic_pe_bound_with_chi(p: &ParamSet, chi: &ChiTable, opts: &AnalysisOptions) -> Result<UpFloat, AnalysisError> {
    let cp = chi_prime(chi, p.n(), opts)?;
    let threshold = (p.q() >> (p.levels() + 1)) as i64;
    let entries = (NBAR * NBAR) as u128;
    // both signs of the error, by symmetry
    Ok(UpFloat::from_u128(2 * entries) * tail(&cp, threshold))
}

/// Number of χ samples drawn per encapsulation: `2n·(8 + 8) + 64`.
pub fn sample_count(n: usize) -> u64 {
    2 * n as u64 * 16 + 64
}

/// Advantage bound of the transformed scheme when χ replaces the rounded
/// Gaussian, given the Rényi divergence `div = D_α(χ‖Ψ_σ)` at order `alpha`:
///
/// `q_ro/2^ℓ + ((2·q_ro + 1)/2^ℓ + q_ro·pe + 3·adv_cpa)^{1−1/α} · e^{t·div·(1−1/α)}`.
pub fn cca_advantage_bound(
    q_ro: f64,
    ell: u32,
    pe: f64,
    adv_cpa: f64,
    n: usize,
    div: f64,
    alpha: f64,
) -> Result<f64, AnalysisError> {
    if !(alpha > 1.0) {
        return Err(AnalysisError::Order(alpha));
    }
    let scale = 2f64.powi(-(ell as i32));
    let inner = (2.0 * q_ro + 1.0) * scale + q_ro * pe + 3.0 * adv_cpa;
    let power = 1.0 - 1.0 / alpha;
    let t = sample_count(n) as f64;
    Ok(q_ro * scale + (power * (inner.ln() + t * div)).exp())
}

/// Minimizes `f` over `α > 1`: a grid over `α = 1 + 10^u`, `u ∈ [−3, 4]`, then
/// golden-section refinement around the best grid point. Returns `(α*, f(α*))`.
pub fn optimize_alpha<F: Fn(f64) -> f64>(f: F) -> (f64, f64) {
    let alpha = |u: f64| 1.0 + 10f64.powf(u);
    let g = |u: f64| {
        let v = f(alpha(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (lo, hi, points) = (-3.0, 4.0, 141);
    let grid: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&u| g(u)).collect();
    let best = (0..points).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("grid is non-empty");

    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(points - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let (u_ref, v_ref) = if fc <= fd { (c, fc) } else { (d, fd) };
    if v_ref <= values[best] {
        (alpha(u_ref), v_ref)
    } else {
        (alpha(grid[best]), values[best])
    }
}
