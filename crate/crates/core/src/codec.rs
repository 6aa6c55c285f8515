//! Key encoding into `(βE8)^8 / qZ^64` and decoding by per-block closest point.
//!
//! A key of `ell` bits is cut into eight substrings of `ell/8` bits. The first
//! eight bits of a substring pick a coset of `E8 / 2Z^8` (via [`f_map`]), the
//! remaining `8(B-1)` bits pick a coset of `2Z^8 / 2^B Z^8` (via [`g_map`]).
//! The eight resulting lattice rows are scaled by `β = q / 2^B` and spread
//! over the diagonals of an 8x8 matrix so that every block holds entries from
//! distinct rows and columns.

use std::sync::OnceLock;

use rand::RngCore;
use thiserror::Error;

use crate::e8_lattice::{cvp_e8, generator_halves, RationalVec8, Vec8};
use crate::params::{ParamSet, NBAR};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("expected {expected} bits, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("vector is not a coset leader of E8/2Z^8 in the encoder's image")]
    NotInImage,
    #[error("coordinate {value} at index {index} is odd or outside [0, 2^B)")]
    BadCoordinate { index: usize, value: i64 },
    #[error("unsupported level count B = {0}")]
    Levels(u32),
    #[error("block {0} decoded to a point outside the encoder's image")]
    DecodeReject(usize),
}

/// A shared key as a sequence of bits `k_0 .. k_{ell-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyBits(Vec<bool>);

impl KeyBits {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(ell: usize) -> Self {
        Self(vec![false; ell])
    }

    pub fn random<R: RngCore + ?Sized>(ell: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; ell.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        Self::from_bytes(&bytes, ell)
    }

    /// Bit `i` is bit `i % 8` (least significant first) of byte `i / 8`.
    pub fn from_bytes(bytes: &[u8], ell: usize) -> Self {
        Self((0..ell).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.0.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            out[i / 8] |= (b as u8) << (i % 8);
        }
        out
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Representative of a coset of `E8 / 2Z^8`, in half-units: each entry in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CosetLeader([u8; 8]);

impl CosetLeader {
    /// Reduces any vector of half-units into `[0, 2)^8`.
    pub fn reduce(halves: &[i64; 8]) -> Self {
        Self(halves.map(|h| h.rem_euclid(4) as u8))
    }

    pub fn halves(&self) -> [i64; 8] {
        self.0.map(i64::from)
    }

    pub fn to_f64(&self) -> Vec8 {
        self.0.map(|h| h as f64 / 2.0)
    }

    fn key(&self) -> usize {
        self.0.iter().rev().fold(0, |acc, &h| acc << 2 | h as usize)
    }
}

impl TryFrom<Vec8> for CosetLeader {
    type Error = CodecError;

    /// Accepts only multiples of `1/2` in `[0, 2)`.
    fn try_from(v: Vec8) -> Result<Self, CodecError> {
        let mut out = [0u8; 8];
        for (o, &c) in out.iter_mut().zip(&v) {
            let h = 2.0 * c;
            if h.fract() != 0.0 || !(0.0..4.0).contains(&h) {
                return Err(CodecError::NotInImage);
            }
            *o = h as u8;
        }
        Ok(Self(out))
    }
}

/// Multiplier applied to the last generator row, chosen by `(b_1, b_8)`.
fn last_multiplier(first: bool, last: bool) -> i64 {
    match (first, last) {
        (false, false) => -1,
        (false, true) => 0,
        (true, false) => 1,
        (true, true) => 2,
    }
}

/// Maps eight bits to a coset of `E8 / 2Z^8`.
pub fn f_map(b: &[bool; 8]) -> CosetLeader {
    let g = generator_halves();
    let mut coeffs = [0i64; 8];
    for (c, &bit) in coeffs.iter_mut().zip(&b[..7]) {
        *c = bit as i64;
    }
    coeffs[7] = last_multiplier(b[0], b[7]);
    let mut halves = [0i64; 8];
    for (row, &c) in g.iter().zip(&coeffs) {
        for (h, &r) in halves.iter_mut().zip(row) {
            *h += c * r;
        }
    }
    CosetLeader::reduce(&halves)
}

fn inverse_table() -> &'static [i16] {
    static TABLE: OnceLock<Vec<i16>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = vec![-1i16; 1 << 16];
        for byte in 0u16..256 {
            let bits = std::array::from_fn(|j| byte >> j & 1 == 1);
            let slot = &mut table[f_map(&bits).key()];
            assert_eq!(*slot, -1, "f_map is not injective");
            *slot = byte as i16;
        }
        table
    })
}

/// Inverse of [`f_map`].
pub fn f_inv(c: &CosetLeader) -> Result<[bool; 8], CodecError> {
    match inverse_table()[c.key()] {
        -1 => Err(CodecError::NotInImage),
        byte => Ok(std::array::from_fn(|j| byte >> j & 1 == 1)),
    }
}

fn check_levels(levels: u32) -> Result<(), CodecError> {
    if (2..=4).contains(&levels) {
        Ok(())
    } else {
        Err(CodecError::Levels(levels))
    }
}

/// Maps `8(B-1)` bits into `2Z^8 / 2^B Z^8`.
///
/// Coordinate `j` reads bits `j(B-1) .. (j+1)(B-1)` little-endian and receives
/// twice that value.
pub fn g_map(bits: &[bool], levels: u32) -> Result<[i64; 8], CodecError> {
    check_levels(levels)?;
    let width = levels as usize - 1;
    if bits.len() != 8 * width {
        return Err(CodecError::Length { expected: 8 * width, actual: bits.len() });
    }
    Ok(std::array::from_fn(|j| {
        let m = bits[j * width..(j + 1) * width]
            .iter()
            .enumerate()
            .fold(0i64, |acc, (k, &b)| acc | (b as i64) << k);
        2 * m
    }))
}

/// Inverse of [`g_map`].
pub fn g_inv(v: &[i64; 8], levels: u32) -> Result<Vec<bool>, CodecError> {
    check_levels(levels)?;
    let width = levels as usize - 1;
    let mut bits = Vec::with_capacity(8 * width);
    for (index, &value) in v.iter().enumerate() {
        if value % 2 != 0 || !(0..1i64 << levels).contains(&value) {
            return Err(CodecError::BadCoordinate { index, value });
        }
        let m = value / 2;
        bits.extend((0..width).map(|k| m >> k & 1 == 1));
    }
    Ok(bits)
}

/// An 8x8 matrix of residues mod q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BlockMatrix(pub [[u16; NBAR]; NBAR]);

impl BlockMatrix {
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.0[i][j]
    }
}

/// Places row `r` on the wrapped diagonal: `O[i][j] = R[(8 - i + j) mod 8][j]`.
pub fn interleave(rows: &[[u16; 8]; 8]) -> BlockMatrix {
    let mut out = [[0u16; 8]; 8];
    for (i, out_row) in out.iter_mut().enumerate() {
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = rows[(8 - i + j) % 8][j];
        }
    }
    BlockMatrix(out)
}

/// `Block_k(M) = (M[k][0], M[k+1][1], …, M[k+7][7])`, indices mod 8.
pub fn block_extract(m: &BlockMatrix, k: usize) -> [u16; 8] {
    std::array::from_fn(|j| m.0[(k + j) % 8][j])
}

/// Encodes `ell` key bits into `(βE8)^8 / qZ^64`.
pub fn e8_encode(key: &KeyBits, p: &ParamSet) -> Result<BlockMatrix, CodecError> {
    let ell = p.ell();
    if key.len() != ell {
        return Err(CodecError::Length { expected: ell, actual: key.len() });
    }
    let levels = p.levels();
    let chunk = ell / 8;
    let beta = p.beta() as i64;
    let mask = p.q() as i64 - 1;

    let mut rows = [[0u16; 8]; 8];
    for (row, sub) in rows.iter_mut().zip(key.bits().chunks_exact(chunk)) {
        let head: [bool; 8] = sub[..8].try_into().expect("chunk has at least 8 bits");
        let leader = f_map(&head).halves();
        let tail = g_map(&sub[8..], levels)?;
        for j in 0..8 {
            // leader is in half-units; beta is even so beta * h / 2 is integral
            let coord_halves = leader[j] + 2 * tail[j];
            row[j] = ((beta / 2 * coord_halves) & mask) as u16;
        }
    }
    Ok(interleave(&rows))
}

/// Recovers the key from a noisy codeword.
pub fn e8_decode(n: &BlockMatrix, p: &ParamSet) -> Result<KeyBits, CodecError> {
    let levels = p.levels();
    let beta = p.beta() as i64;
    let period_halves = 2i64 << levels;

    let mut rows: [Option<Vec<bool>>; 8] = Default::default();
    for k in 0..8 {
        let block = block_extract(n, k).map(i64::from);
        let point = cvp_e8(RationalVec8::new(block, beta));
        let halves = point.halves().map(|h| h.rem_euclid(period_halves));

        let leader = CosetLeader::reduce(&halves);
        let head = f_inv(&leader).map_err(|_| CodecError::DecodeReject(k))?;
        let lh = leader.halves();
        let rest: [i64; 8] = std::array::from_fn(|j| (halves[j] - lh[j]).rem_euclid(period_halves) / 2);
        let tail = g_inv(&rest, levels).map_err(|_| CodecError::DecodeReject(k))?;

        let mut bits = head.to_vec();
        bits.extend(tail);
        rows[(8 - k) % 8] = Some(bits);
    }
    Ok(KeyBits::new(rows.into_iter().flat_map(|r| r.expect("every row decoded")).collect()))
}
