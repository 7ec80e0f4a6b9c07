//! Seeded, labelled random streams.
//!
//! A stream is identified by a 64-bit seed and a list of labels (instance id,
//! trial, purpose, step). Its generator is ChaCha20 keyed with
//! `SHA-256(seed_le || for each label: len_le_u64 || utf8 bytes)`. Pool
//! permutations use rand 0.8's Fisher-Yates `shuffle`; bootstrap indices use
//! `gen_range` over `u32`. None of these depend on pointer width, so draws
//! are identical across platforms, and because every unit of work derives its
//! own stream, parallel execution order cannot change results.

use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    labels: Vec<String>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            labels: Vec::new(),
        }
    }

    /// Stream for trial `trial` of a run seeded with `base_seed`. Trial k uses
    /// seed `base_seed + k`, so `--seed 1 --trials 10` covers seeds 1..=10.
    pub fn for_trial(base_seed: u64, trial: usize) -> Self {
        RngStream::new(base_seed.wrapping_add(trial as u64))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Child stream with one more label appended.
    pub fn derive(&self, label: impl Display) -> Self {
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        RngStream {
            seed: self.seed,
            labels,
        }
    }

    pub fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for l in &self.labels {
            h.update((l.len() as u64).to_le_bytes());
            h.update(l.as_bytes());
        }
        h.finalize().into()
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.key())
    }
}

/// Uniform random permutation of `0..len`. Prefixes of the permutation are the
/// nested without-replacement samples R_1 ⊆ R_2 ⊆ ...
pub fn permute_pool(len: usize, stream: &RngStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut stream.rng());
    perm
}

/// `n_boot` with-replacement resamples of `0..len`, each of size `len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resamples {
    len: usize,
    indices: Vec<u32>,
}

impl Resamples {
    pub fn draw(len: usize, n_boot: usize, stream: &RngStream) -> Self {
        assert!(len > 0 && len <= u32::MAX as usize);
        let mut rng = stream.rng();
        let bound = len as u32;
        let indices = (0..len * n_boot).map(|_| rng.gen_range(0..bound)).collect();
        Resamples { len, indices }
    }

    pub fn from_indices(len: usize, rows: &[Vec<usize>]) -> Self {
        let mut indices = Vec::with_capacity(len * rows.len());
        for r in rows {
            assert_eq!(r.len(), len, "resample must have the list's size");
            indices.extend(r.iter().map(|&i| {
                assert!(i < len);
                i as u32
            }));
        }
        Resamples { len, indices }
    }

    /// Size of the resampled list (and of every resample).
    pub fn list_len(&self) -> usize {
        self.len
    }

    pub fn count(&self) -> usize {
        self.indices.len().checked_div(self.len).unwrap_or(0)
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.indices[i * self.len..(i + 1) * self.len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.chunks_exact(self.len)
    }
}
