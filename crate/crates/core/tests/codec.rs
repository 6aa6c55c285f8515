use std::collections::HashSet;

use e8kem::codec::{block_extract, e8_decode, e8_encode, f_inv, f_map, BlockMatrix, KeyBits};
use e8kem::e8_lattice::is_e8_halves;
use e8kem::params::ParamSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn params_for(ell: usize) -> ParamSet {
    match ell {
        128 => ParamSet::by_name("modified-bw-640").unwrap(),
        192 => ParamSet::by_name("modified-bw-976").unwrap(),
        _ => ParamSet::by_name("modified-bw-1344").unwrap(),
    }
}

#[test]
fn f_map_is_a_bijection_onto_coset_leaders() {
    let mut seen = HashSet::new();
    for v in 0u16..256 {
        let b: [bool; 8] = std::array::from_fn(|i| v >> i & 1 == 1);
        let c = f_map(&b);
        assert!(is_e8_halves(&c.halves()));
        assert_eq!(f_inv(&c).unwrap(), b);
        assert!(seen.insert(c));
    }
    assert_eq!(seen.len(), 256);
}

#[test]
fn random_keys_round_trip() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for ell in [128, 192, 256] {
        let p = params_for(ell);
        for _ in 0..10_000 {
            let key = KeyBits::random(ell, &mut rng);
            let enc = e8_encode(&key, &p).unwrap();
            assert_eq!(e8_decode(&enc, &p).unwrap(), key);
        }
    }
}

#[test]
fn first_substring_is_encoded_injectively() {
    let p = params_for(128);
    let mut seen = HashSet::new();
    for v in 0u32..1 << 16 {
        let mut bits = vec![false; 128];
        for (i, b) in bits.iter_mut().take(16).enumerate() {
            *b = v >> i & 1 == 1;
        }
        let key = KeyBits::new(bits);
        let enc = e8_encode(&key, &p).unwrap();
        assert!(seen.insert(enc));
        assert_eq!(e8_decode(&enc, &p).unwrap(), key);
    }
}

#[test]
fn blocks_are_scaled_lattice_points() {
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    for ell in [128, 192, 256] {
        let p = params_for(ell);
        let beta = p.beta() as i64;
        let key = KeyBits::random(ell, &mut rng);
        let enc = e8_encode(&key, &p).unwrap();
        for k in 0..8 {
            let block = block_extract(&enc, k);
            // β·x with x ∈ ½Z^8; in half units, 2·entry/β
            let halves: [i64; 8] = std::array::from_fn(|j| 2 * block[j] as i64 / beta);
            assert!(block.iter().all(|&v| (2 * v as i64) % beta == 0));
            assert!(is_e8_halves(&halves));
        }
    }
}

#[test]
fn zero_key_block_value() {
    let p = ParamSet::by_name("frodo-640").unwrap();
    let enc = e8_encode(&KeyBits::zeros(128), &p).unwrap();
    assert!(enc.0.iter().flatten().all(|&v| v == 12288));
}

proptest! {
    #[test]
    fn small_noise_is_corrected(seed in any::<u64>(), ell_idx in 0usize..3) {
        let ell = [128, 192, 256][ell_idx];
        let p = params_for(ell);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = KeyBits::random(ell, &mut rng);
        let enc = e8_encode(&key, &p).unwrap();
        // every entry off by less than β/5 keeps each block inside its Voronoi cell
        let r = (p.beta() / 5) as i64;
        let mask = p.q() as i64 - 1;
        let noisy = BlockMatrix(enc.0.map(|row| row.map(|v| ((v as i64 + rng.gen_range(-r..r)) & mask) as u16)));
        prop_assert_eq!(e8_decode(&noisy, &p).unwrap(), key);
    }
}
