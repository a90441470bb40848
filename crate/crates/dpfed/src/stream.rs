//! Named, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 generator whose key
//! is SHA-256 over a master seed plus an ordered list of `(tag, index)`
//! labels. Two keys with the same seed and labels replay the same stream;
//! changing any label yields an independent stream. Consumers therefore
//! never share generator state: the noise stream for `(round k, client i)`
//! is the same no matter which algorithm variant runs, which thread draws
//! it, or what happened in other rounds.
//!
//! The uniform and Gaussian transforms below are part of the reproducibility
//! contract. Changing them would silently re-randomize every experiment, so
//! they are written out explicitly rather than delegated to distribution
//! crates whose internals may change between releases.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

/// Domain separator; bump only on a deliberate break of stream compatibility.
const DOMAIN: &[u8] = b"dpfed.stream.v1";

const TWO_NEG_53: f64 = 1.0 / 9007199254740992.0; // 2^-53

/// Hierarchical name for a random stream.
///
/// Keys are cheap to clone and child derivation is pure, so a key can be
/// handed to worker threads without coordination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamKey {
    master_seed: u64,
    labels: Vec<(String, u64)>,
}

impl StreamKey {
    /// Root key for a run.
    pub fn new(master_seed: u64) -> Self {
        StreamKey {
            master_seed,
            labels: Vec::new(),
        }
    }

    /// Derive a child key by appending one `(tag, index)` label.
    pub fn child(&self, tag: &str, index: u64) -> Self {
        let mut labels = self.labels.clone();
        labels.push((tag.to_owned(), index));
        StreamKey {
            master_seed: self.master_seed,
            labels,
        }
    }

    /// The master seed this key was rooted at.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Open the stream this key names.
    pub fn stream(&self) -> Stream {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(self.master_seed.to_le_bytes());
        for (tag, index) in &self.labels {
            hasher.update((tag.len() as u64).to_le_bytes());
            hasher.update(tag.as_bytes());
            hasher.update(index.to_le_bytes());
        }
        let digest: [u8; 32] = hasher.finalize().into();
        Stream {
            rng: ChaCha20Rng::from_seed(digest),
        }
    }
}

/// A deterministic random stream opened from a [`StreamKey`].
pub struct Stream {
    rng: ChaCha20Rng,
}

impl Stream {
    /// Next raw 64-bit word.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_NEG_53
    }

    /// Uniform draw in `(0, 1]`; safe as a logarithm argument.
    #[inline]
    fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_NEG_53
    }

    /// One standard normal pair via the Box-Muller transform.
    #[inline]
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (radius * theta.cos(), radius * theta.sin())
    }

    /// One standard normal draw (the second half of the pair is discarded).
    pub fn standard_normal(&mut self) -> f64 {
        self.standard_normal_pair().0
    }

    /// Fill `out` with independent `N(0, std^2)` draws.
    ///
    /// Pairs are consumed in order; an odd length discards the final
    /// pair's second component so the fill order is length-independent
    /// only in full pairs.
    pub fn fill_gaussian(&mut self, out: &mut [f64], std: f64) {
        let mut i = 0;
        while i + 1 < out.len() {
            let (z0, z1) = self.standard_normal_pair();
            out[i] = std * z0;
            out[i + 1] = std * z1;
            i += 2;
        }
        if i < out.len() {
            let (z0, _) = self.standard_normal_pair();
            out[i] = std * z0;
        }
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..bound`. `bound` must be positive.
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "uniform_index needs a positive bound");
        let idx = (self.uniform() * bound as f64) as usize;
        idx.min(bound - 1)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.uniform_index(i + 1);
            xs.swap(i, j);
        }
    }
}
