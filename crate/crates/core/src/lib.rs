//! Key encapsulation from learning with errors, with key bits carried in
//! cosets of the Gosset lattice E8 instead of per-coordinate rounding.
//!
//! Modules, bottom up:
//! - [`e8_lattice`]: E8 membership and exact closest-vector decoding.
//! - [`codec`]: bit strings to E8 cosets and back, plus the block interleave.
//! - [`noise`]: the discretized error distribution, its sampler and Rényi divergence.
//! - [`kex`]: key generation, encapsulation and decapsulation.
//! - [`failure_analysis`]: rigorous decryption-failure bounds.

pub mod codec;
pub mod e8_lattice;
pub mod failure_analysis;
pub mod kex;
mod hiprec;
pub mod noise;
pub mod params;
pub mod upfloat;

pub use hiprec::Fixed;
