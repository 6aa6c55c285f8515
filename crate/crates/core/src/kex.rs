//! The LWE key encapsulation flow over `Z_q` matrices.
//!
//! ```text
//! keygen:  A = gen_a(seed), S, E <- χ^{n×8},     B = A·S + E
//! encaps:  S′, E′ <- χ^{8×n}, E″ <- χ^{8×8},     U = S′·A + E′
//!          V = S′·B + E″,  k uniform,            C = V + e8_encode(k)
//! decaps:  k′ = e8_decode(C − U·S)
//! ```
//!
//! `q` divides `2^16`, so all arithmetic is done with wrapping `u16`
//! operations followed by a final reduction mod `q`.

use rand::RngCore;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake128;
use thiserror::Error;

use crate::codec::{e8_decode, e8_encode, BlockMatrix, CodecError, KeyBits};
use crate::noise::{ChiTable, NoiseError, Sampler};
use crate::params::{ParamSet, NBAR};

pub const SEED_BYTES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KexError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("nonzero padding bits")]
    Padding,
    #[error("matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
}

/// A dense row-major matrix over `Z_q`, `q` a power of two at most `2^16`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModMatrix {
    rows: usize,
    cols: usize,
    q: u32,
    data: Vec<u16>,
}

impl ModMatrix {
    pub fn zeros(rows: usize, cols: usize, q: u32) -> Self {
        assert!(q.is_power_of_two() && q <= 1 << 16, "modulus must be a power of two <= 2^16");
        Self { rows, cols, q, data: vec![0; rows * cols] }
    }

    /// Builds a matrix from signed or unsigned entries, reducing each mod `q`.
    pub fn from_fn(rows: usize, cols: usize, q: u32, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut m = Self::zeros(rows, cols, q);
        let mask = m.mask();
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = (f(i, j) as u16) & mask;
            }
        }
        m
    }

    fn mask(&self) -> u16 {
        (self.q - 1) as u16
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.data[i * self.cols + j]
    }

    /// Entry `(i, j)` as the representative in `[−q/2, q/2)`.
    pub fn centered(&self, i: usize, j: usize) -> i64 {
        let v = self.get(i, j) as i64;
        if v >= (self.q / 2) as i64 {
            v - self.q as i64
        } else {
            v
        }
    }

    pub fn entries(&self) -> &[u16] {
        &self.data
    }

    fn reduce(mut self) -> Self {
        let mask = self.mask();
        self.data.iter_mut().for_each(|v| *v &= mask);
        self
    }

    pub fn add(&self, rhs: &ModMatrix) -> ModMatrix {
        self.zip(rhs, u16::wrapping_add)
    }

    pub fn sub(&self, rhs: &ModMatrix) -> ModMatrix {
        self.zip(rhs, u16::wrapping_sub)
    }

    fn zip(&self, rhs: &ModMatrix, op: fn(u16, u16) -> u16) -> ModMatrix {
        assert_eq!((self.rows, self.cols, self.q), (rhs.rows, rhs.cols, rhs.q), "shape or modulus mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| op(a, b)).collect();
        ModMatrix { rows: self.rows, cols: self.cols, q: self.q, data }.reduce()
    }

    pub fn mul(&self, rhs: &ModMatrix) -> ModMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        assert_eq!(self.q, rhs.q, "modulus mismatch");
        let mut out = ModMatrix::zeros(self.rows, rhs.cols, self.q);
        for i in 0..self.rows {
            let row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0 {
                    continue;
                }
                let b = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &v) in row.iter_mut().zip(b) {
                    *o = o.wrapping_add(a.wrapping_mul(v));
                }
            }
        }
        out.reduce()
    }

    fn to_block(&self) -> BlockMatrix {
        assert_eq!((self.rows, self.cols), (NBAR, NBAR));
        BlockMatrix(std::array::from_fn(|i| std::array::from_fn(|j| self.get(i, j))))
    }

    fn from_block(b: &BlockMatrix, q: u32) -> Self {
        Self::from_fn(NBAR, NBAR, q, |i, j| b.0[i][j] as i64)
    }
}

/// Expands a 16-byte seed into the `n×n` public matrix: row `i` is read from
/// SHAKE128(`i` as 2 little-endian bytes ‖ seed) as `n` little-endian `u16`s mod `q`.
pub fn gen_a(seed: &[u8; SEED_BYTES], p: &ParamSet) -> ModMatrix {
    let n = p.n();
    let mut a = ModMatrix::zeros(n, n, p.q());
    let mask = a.mask();
    let mut buf = vec![0u8; 2 * n];
    for i in 0..n {
        let mut xof = Shake128::default();
        xof.update(&(i as u16).to_le_bytes());
        xof.update(seed);
        xof.finalize_xof().read(&mut buf);
        for (j, pair) in buf.chunks_exact(2).enumerate() {
            a.data[i * n + j] = u16::from_le_bytes([pair[0], pair[1]]) & mask;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub seed_a: [u8; SEED_BYTES],
    /// `n×8`.
    pub b: ModMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    /// `n×8`, entries drawn from χ.
    pub s: ModMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    /// `8×n`.
    pub u: ModMatrix,
    /// `8×8`.
    pub c: ModMatrix,
}

impl Ciphertext {
    /// `pack(U) ‖ pack(C)`; its length is [`bandwidth_bytes`].
    pub fn to_bytes(&self, p: &ParamSet) -> Vec<u8> {
        let mut out = pack(&self.u, p);
        out.extend(pack(&self.c, p));
        out
    }

    pub fn from_bytes(bytes: &[u8], p: &ParamSet) -> Result<Self, KexError> {
        let split = packed_len(NBAR, p.n(), p);
        let expected = bandwidth_bytes(p);
        if bytes.len() != expected {
            return Err(KexError::Length { expected, actual: bytes.len() });
        }
        Ok(Self { u: unpack(&bytes[..split], NBAR, p.n(), p)?, c: unpack(&bytes[split..], NBAR, NBAR, p)? })
    }
}

impl PublicKey {
    /// `seed ‖ pack(B)`.
    pub fn to_bytes(&self, p: &ParamSet) -> Vec<u8> {
        let mut out = self.seed_a.to_vec();
        out.extend(pack(&self.b, p));
        out
    }
}

/// Protocol operations for one parameter set and error distribution.
#[derive(Debug, Clone)]
pub struct Kem {
    params: ParamSet,
    chi: ChiTable,
    sampler: Sampler,
}

impl Kem {
    /// Uses χ built from the parameter set's σ.
    pub fn new(params: ParamSet) -> Result<Self, KexError> {
        let chi = ChiTable::build(params.sigma())?;
        Ok(Self::with_chi(params, chi))
    }

    /// Uses a caller-supplied distribution (for instance [`ChiTable::point_mass`]).
    pub fn with_chi(params: ParamSet, chi: ChiTable) -> Self {
        let sampler = Sampler::new(&chi);
        Self { params, chi, sampler }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn chi(&self) -> &ChiTable {
        &self.chi
    }

    /// A `rows×cols` matrix with entries drawn independently from χ.
    pub fn sample_matrix<R: RngCore + ?Sized>(&self, rows: usize, cols: usize, rng: &mut R) -> ModMatrix {
        ModMatrix::from_fn(rows, cols, self.params.q(), |_, _| self.sampler.sample(rng))
    }

    pub fn keygen<R: RngCore + ?Sized>(&self, rng: &mut R) -> KeyPair {
        let mut seed_a = [0u8; SEED_BYTES];
        rng.fill_bytes(&mut seed_a);
        let a = gen_a(&seed_a, &self.params);
        let n = self.params.n();
        let s = self.sample_matrix(n, NBAR, rng);
        let e = self.sample_matrix(n, NBAR, rng);
        let b = public_matrix(&a, &s, &e);
        KeyPair { public: PublicKey { seed_a, b }, secret: SecretKey { s } }
    }

    pub fn encaps<R: RngCore + ?Sized>(&self, pk: &PublicKey, rng: &mut R) -> Result<(Ciphertext, KeyBits), KexError> {
        let a = gen_a(&pk.seed_a, &self.params);
        self.encaps_with_a(&a, pk, rng)
    }

    /// As [`Kem::encaps`], with `A` already expanded from `pk.seed_a`.
    pub fn encaps_with_a<R: RngCore + ?Sized>(
        &self,
        a: &ModMatrix,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<(Ciphertext, KeyBits), KexError> {
        let n = self.params.n();
        let s1 = self.sample_matrix(NBAR, n, rng);
        let e1 = self.sample_matrix(NBAR, n, rng);
        let e2 = self.sample_matrix(NBAR, NBAR, rng);
        let key = KeyBits::random(self.params.ell(), rng);
        let ct = self.encaps_with(a, pk, &s1, &e1, &e2, &key)?;
        Ok((ct, key))
    }

    /// Deterministic core of encapsulation with every random input given.
    pub fn encaps_with(
        &self,
        a: &ModMatrix,
        pk: &PublicKey,
        s1: &ModMatrix,
        e1: &ModMatrix,
        e2: &ModMatrix,
        key: &KeyBits,
    ) -> Result<Ciphertext, KexError> {
        let n = self.params.n();
        check_shape(s1, NBAR, n)?;
        check_shape(e1, NBAR, n)?;
        check_shape(e2, NBAR, NBAR)?;
        check_shape(&pk.b, n, NBAR)?;
        let u = s1.mul(a).add(e1);
        let v = s1.mul(&pk.b).add(e2);
        let encoded = ModMatrix::from_block(&e8_encode(key, &self.params)?, self.params.q());
        Ok(Ciphertext { u, c: v.add(&encoded) })
    }

    pub fn decaps(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<KeyBits, KexError> {
        let n = self.params.n();
        check_shape(&ct.u, NBAR, n)?;
        check_shape(&ct.c, NBAR, NBAR)?;
        check_shape(&sk.s, n, NBAR)?;
        let v_prime = ct.c.sub(&ct.u.mul(&sk.s));
        Ok(e8_decode(&v_prime.to_block(), &self.params)?)
    }
}

/// `B = A·S + E`.
pub fn public_matrix(a: &ModMatrix, s: &ModMatrix, e: &ModMatrix) -> ModMatrix {
    a.mul(s).add(e)
}

fn check_shape(m: &ModMatrix, rows: usize, cols: usize) -> Result<(), KexError> {
    if (m.rows, m.cols) == (rows, cols) {
        Ok(())
    } else {
        Err(KexError::Shape { rows: m.rows, cols: m.cols, expected_rows: rows, expected_cols: cols })
    }
}

fn packed_len(rows: usize, cols: usize, p: &ParamSet) -> usize {
    (rows * cols * p.log_q() as usize).div_ceil(8)
}

/// Each entry as a `log2(q)`-bit big-endian field, row-major, zero-padded to whole bytes.
pub fn pack(m: &ModMatrix, p: &ParamSet) -> Vec<u8> {
    let d = p.log_q();
    let mut out = Vec::with_capacity(packed_len(m.rows, m.cols, p));
    let (mut acc, mut bits) = (0u32, 0u32);
    for &v in &m.data {
        acc = acc << d | v as u32;
        bits += d;
        while bits >= 8 {
            bits -= 8;
            out.push((acc >> bits) as u8);
        }
        acc &= (1 << bits) - 1;
    }
    if bits > 0 {
        out.push((acc << (8 - bits)) as u8);
    }
    out
}

/// Inverse of [`pack`].
pub fn unpack(bytes: &[u8], rows: usize, cols: usize, p: &ParamSet) -> Result<ModMatrix, KexError> {
    let expected = packed_len(rows, cols, p);
    if bytes.len() != expected {
        return Err(KexError::Length { expected, actual: bytes.len() });
    }
    let d = p.log_q();
    let mut m = ModMatrix::zeros(rows, cols, p.q());
    let mask = m.mask();
    let (mut acc, mut bits) = (0u32, 0u32);
    let mut it = bytes.iter();
    for slot in m.data.iter_mut() {
        while bits < d {
            acc = acc << 8 | *it.next().expect("length checked above") as u32;
            bits += 8;
        }
        bits -= d;
        *slot = (acc >> bits) as u16 & mask;
        acc &= (1 << bits) - 1;
    }
    if acc != 0 {
        return Err(KexError::Padding);
    }
    Ok(m)
}

/// Bytes of the `(U, C)` flow: `log2(q)·8·(n + 8)` bits.
pub fn bandwidth_bytes(p: &ParamSet) -> usize {
    p.log_q() as usize * (p.n() + NBAR)
}

/// Bytes of the `(seed, B)` flow.
pub fn public_key_bytes(p: &ParamSet) -> usize {
    SEED_BYTES + p.log_q() as usize * p.n()
}
