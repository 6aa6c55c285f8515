//! Protocol parameter sets.

use std::fmt;

use thiserror::Error;

/// Number of rows/columns of the square key-carrying matrix.
pub const NBAR: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("dimension n = {0} must be a positive multiple of 8")]
    Dimension(usize),
    #[error("modulus q = {0} must be a power of two between 2^2 and 2^16")]
    Modulus(u32),
    #[error("key length {0} must be one of 128, 192, 256")]
    KeyLength(usize),
    #[error("sigma = {0} must be a positive finite number")]
    Sigma(f64),
    #[error("modulus q = {q} too small for {ell}-bit keys (beta/2 must be an integer)")]
    Scale { q: u32, ell: usize },
    #[error("unknown parameter set {0:?}")]
    UnknownName(String),
}

/// Which error-correcting encoder a parameter set was published for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoder {
    /// The per-coordinate (cubic `Z^64`) encoder of the original scheme.
    Cubic,
    /// Block-wise encoding into the Gosset lattice.
    Gosset,
}

/// One protocol instance: `(n, nbar = 8, q, sigma, ell)` plus derived scale values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    name: String,
    n: usize,
    q: u32,
    sigma: f64,
    ell: usize,
    encoder: Encoder,
}

impl ParamSet {
    /// Builds a custom parameter set, checking every structural invariant.
    pub fn new(name: impl Into<String>, n: usize, q: u32, sigma: f64, ell: usize) -> Result<Self, ParamError> {
        if n == 0 || n % NBAR != 0 {
            return Err(ParamError::Dimension(n));
        }
        if !q.is_power_of_two() || !(4..=1 << 16).contains(&q) {
            return Err(ParamError::Modulus(q));
        }
        if !matches!(ell, 128 | 192 | 256) {
            return Err(ParamError::KeyLength(ell));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ParamError::Sigma(sigma));
        }
        let levels = ell / 64;
        // beta = q / 2^levels must be even so that beta * (1/2) Z stays integral.
        if q.trailing_zeros() as usize <= levels {
            return Err(ParamError::Scale { q, ell });
        }
        Ok(Self { name: name.into(), n, q, sigma, ell, encoder: Encoder::Gosset })
    }

    fn named(name: &str, n: usize, log_q: u32, sigma: f64, encoder: Encoder) -> Self {
        let ell = match n {
            640 => 128,
            976 => 192,
            _ => 256,
        };
        let mut p = Self::new(name, n, 1 << log_q, sigma, ell).expect("built-in parameter set is valid");
        p.encoder = encoder;
        p
    }

    /// All nine built-in sets: the three original ones, then the
    /// security-oriented set, then the bandwidth-oriented set.
    pub fn all_named() -> Vec<ParamSet> {
        use Encoder::*;
        vec![
            Self::named("frodo-640", 640, 15, 2.80, Cubic),
            Self::named("frodo-976", 976, 16, 2.30, Cubic),
            Self::named("frodo-1344", 1344, 16, 1.40, Cubic),
            Self::named("modified-sec-640", 640, 15, 3.90, Gosset),
            Self::named("modified-sec-976", 976, 16, 2.75, Gosset),
            Self::named("modified-sec-1344", 1344, 16, 1.68, Gosset),
            Self::named("modified-bw-640", 640, 14, 2.30, Gosset),
            Self::named("modified-bw-976", 976, 15, 1.80, Gosset),
            Self::named("modified-bw-1344", 1344, 15, 1.14, Gosset),
        ]
    }

    pub fn by_name(name: &str) -> Result<ParamSet, ParamError> {
        Self::all_named()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ParamError::UnknownName(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// LWE dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nbar(&self) -> usize {
        NBAR
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `log2(q)`, the bit width of one packed entry.
    pub fn log_q(&self) -> u32 {
        self.q.trailing_zeros()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Shared key length in bits.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of coset levels `B = ell / 64`, i.e. key bits carried per matrix entry.
    pub fn levels(&self) -> u32 {
        (self.ell / 64) as u32
    }

    /// Lattice scale `beta = q / 2^B`.
    pub fn beta(&self) -> u32 {
        self.q >> self.levels()
    }

    /// Encoder the published figures for this set refer to.
    pub fn encoder(&self) -> Encoder {
        self.encoder
    }

    pub fn with_encoder(mut self, encoder: Encoder) -> Self {
        self.encoder = encoder;
        self
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n={}, q=2^{}, sigma={}, ell={}, beta={})",
            self.name,
            self.n,
            self.log_q(),
            self.sigma,
            self.ell,
            self.beta()
        )
    }
}

/// Reference figures published alongside each built-in parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub name: &'static str,
    /// Concrete security from an external lattice-reduction estimator. Reported, never computed.
    pub security_bits: u32,
    pub bandwidth_bytes: usize,
    pub pe_log2: i32,
}

pub const PUBLISHED: [PublishedRow; 9] = [
    PublishedRow { name: "frodo-640", security_bits: 145, bandwidth_bytes: 9720, pe_log2: -138 },
    PublishedRow { name: "frodo-976", security_bits: 210, bandwidth_bytes: 15744, pe_log2: -199 },
    PublishedRow { name: "frodo-1344", security_bits: 275, bandwidth_bytes: 21632, pe_log2: -252 },
    PublishedRow { name: "modified-sec-640", security_bits: 158, bandwidth_bytes: 9720, pe_log2: -149 },
    PublishedRow { name: "modified-sec-976", security_bits: 220, bandwidth_bytes: 15744, pe_log2: -204 },
    PublishedRow { name: "modified-sec-1344", security_bits: 287, bandwidth_bytes: 21632, pe_log2: -255 },
    PublishedRow { name: "modified-bw-640", security_bits: 152, bandwidth_bytes: 9072, pe_log2: -152 },
    PublishedRow { name: "modified-bw-976", security_bits: 215, bandwidth_bytes: 14760, pe_log2: -203 },
    PublishedRow { name: "modified-bw-1344", security_bits: 283, bandwidth_bytes: 20280, pe_log2: -271 },
];

pub fn published(name: &str) -> Option<&'static PublishedRow> {
    PUBLISHED.iter().find(|r| r.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_values() {
        let p = ParamSet::by_name("modified-bw-640").unwrap();
        assert_eq!(p.beta(), 4096);
        assert_eq!(p.levels(), 2);
        let p = ParamSet::by_name("frodo-1344").unwrap();
        assert_eq!(p.beta(), 4096);
        assert_eq!(p.levels(), 4);
        let p = ParamSet::by_name("modified-bw-976").unwrap();
        assert_eq!(p.beta(), 4096);
    }

    #[test]
    fn every_named_set_has_a_published_row() {
        for p in ParamSet::all_named() {
            assert!(published(p.name()).is_some(), "{}", p.name());
            assert_eq!(p.beta() * (1 << p.levels()), p.q());
            assert_eq!(p.beta() % 2, 0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(ParamSet::new("x", 100, 1 << 15, 2.0, 128), Err(ParamError::Dimension(100)));
        assert_eq!(ParamSet::new("x", 64, 3000, 2.0, 128), Err(ParamError::Modulus(3000)));
        assert_eq!(ParamSet::new("x", 64, 1 << 15, 2.0, 100), Err(ParamError::KeyLength(100)));
        assert!(matches!(ParamSet::new("x", 64, 1 << 15, -1.0, 128), Err(ParamError::Sigma(_))));
        assert!(matches!(ParamSet::new("x", 64, 16, 1.0, 256), Err(ParamError::Scale { .. })));
        assert!(ParamSet::new("x", 64, 32, 1.0, 256).is_ok());
        assert!(matches!(ParamSet::by_name("frodo-512"), Err(ParamError::UnknownName(_))));
    }
}
