//! Counter-based keyed sign stream.
//!
//! Every Rademacher sign is a pure function of its [`StreamKey`], so the
//! sign used by agent `i`, coordinate `d`, sample `k` at logical step `t` of
//! trial `r` never depends on draw order, thread count, or which law consumes
//! it. The BC law reads the `k = 0` slice at logical step `t` for its
//! physical perturbation at time `2t`; PBC with `K` samples reads slices
//! `k = 0..K`. Paired runs therefore share randomness by key equality.
//!
//! Generator: the SplitMix64 finalizer applied as a keyed chain over
//! `(master_seed, trial, t, k, agent, dim)`; the sign is the top bit of the
//! final word.

/// Identifies the generator in run manifests.
pub const GENERATOR_ID: &str = "splitmix64-keyed-chain/v1";
/// Field order hashed by [`draw_sign`], recorded in run manifests.
pub const KEY_LAYOUT: &str = "master_seed,trial,t,k,agent,dim";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, field: u64, lane: u64) -> u64 {
    mix64(state ^ mix64(field.wrapping_add(lane.wrapping_mul(GOLDEN_GAMMA))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub trial: u64,
    pub t: u64,
    pub agent: u64,
    pub dim: u64,
    /// Sample index; `0` is the slice the BC law uses.
    pub k: u64,
}

#[inline]
fn prefix(master_seed: u64, trial: u64, t: u64, k: u64) -> u64 {
    let h = mix64(master_seed.wrapping_add(GOLDEN_GAMMA));
    let h = absorb(h, trial, 1);
    let h = absorb(h, t, 2);
    absorb(h, k, 3)
}

#[inline]
fn finish(prefix: u64, agent: u64, dim: u64) -> i8 {
    let h = absorb(prefix, agent, 4);
    let h = absorb(h, dim, 5);
    if h >> 63 == 1 {
        1
    } else {
        -1
    }
}

/// Deterministic Rademacher sign for `key`.
pub fn draw_sign(key: StreamKey) -> i8 {
    finish(
        prefix(key.master_seed, key.trial, key.t, key.k),
        key.agent,
        key.dim,
    )
}

/// `K` sign vectors of length `n * N`, sample-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationBlock {
    samples: usize,
    len: usize,
    signs: Vec<i8>,
}

impl PerturbationBlock {
    /// Builds a block from explicit sign vectors. Returns `None` if the
    /// vectors are empty, ragged, or contain anything but `±1`.
    pub fn from_samples(samples: Vec<Vec<i8>>) -> Option<Self> {
        let len = samples.first()?.len();
        if len == 0 || samples.iter().any(|s| s.len() != len) {
            return None;
        }
        let count = samples.len();
        let signs: Vec<i8> = samples.into_iter().flatten().collect();
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return None;
        }
        Some(Self {
            samples: count,
            len,
            signs,
        })
    }

    /// Number of samples `K`.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Length `n * N` of each sign vector.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sign vector `k` (0-based).
    pub fn sample(&self, k: usize) -> &[i8] {
        &self.signs[k * self.len..(k + 1) * self.len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i8]> {
        self.signs.chunks_exact(self.len)
    }

    /// Element-wise inverse; identical to `self` since every entry is `±1`.
    pub fn elementwise_inverse(&self) -> Self {
        Self {
            samples: self.samples,
            len: self.len,
            signs: self.signs.iter().map(|&s| 1 / s).collect(),
        }
    }
}

/// Fills a `K`-sample block for `(master_seed, trial, t)`.
///
/// # Panics
/// If `dim`, `agents` or `samples` is zero.
pub fn draw_block(
    master_seed: u64,
    trial: u64,
    t: u64,
    dim: usize,
    agents: usize,
    samples: usize,
) -> PerturbationBlock {
    assert!(
        dim > 0 && agents > 0 && samples > 0,
        "block dimensions must be positive"
    );
    let len = dim * agents;
    let mut signs = Vec::with_capacity(len * samples);
    for k in 0..samples {
        let p = prefix(master_seed, trial, t, k as u64);
        for agent in 0..agents {
            for d in 0..dim {
                signs.push(finish(p, agent as u64, d as u64));
            }
        }
    }
    PerturbationBlock {
        samples,
        len,
        signs,
    }
}

/// Where a simulation takes its signs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignSource {
    Keyed { master_seed: u64 },
    /// Every sign equals the given value in every trial; a test hook for
    /// degenerate Monte Carlo checks.
    Fixed(i8),
}

impl SignSource {
    pub fn block(
        &self,
        trial: u64,
        t: u64,
        dim: usize,
        agents: usize,
        samples: usize,
    ) -> PerturbationBlock {
        match *self {
            SignSource::Keyed { master_seed } => {
                draw_block(master_seed, trial, t, dim, agents, samples)
            }
            SignSource::Fixed(s) => {
                let s = if s < 0 { -1 } else { 1 };
                PerturbationBlock {
                    samples,
                    len: dim * agents,
                    signs: vec![s; dim * agents * samples],
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(dim: u64, k: u64) -> StreamKey {
        StreamKey {
            master_seed: 0x5eed,
            trial: 3,
            t: 17,
            agent: 2,
            dim,
            k,
        }
    }

    #[test]
    fn same_key_same_sign() {
        let kk = key(1, 0);
        let first = draw_sign(kk);
        for _ in 0..1000 {
            assert_eq!(draw_sign(kk), first);
        }
    }

    #[test]
    fn mean_of_signs_is_near_zero() {
        let sum: i64 = (0..1_000_000u64).map(|d| draw_sign(key(d, 0)) as i64).sum();
        let mean = sum as f64 / 1e6;
        assert!(mean.abs() <= 0.004, "mean {mean}");
    }

    #[test]
    fn signs_along_k_pass_runs_test() {
        let seq: Vec<i8> = (0..20_000u64).map(|k| draw_sign(key(0, k))).collect();
        let n1 = seq.iter().filter(|&&s| s > 0).count() as f64;
        let n2 = seq.len() as f64 - n1;
        let n = n1 + n2;
        let runs = 1.0 + seq.windows(2).filter(|w| w[0] != w[1]).count() as f64;
        let mu = 2.0 * n1 * n2 / n + 1.0;
        let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
        let z = (runs - mu) / var.sqrt();
        // two-sided alpha = 0.01
        assert!(z.abs() < 2.5758, "runs z = {z}");
    }

    #[test]
    fn single_entry_block_is_reproducible() {
        let a = draw_block(11, 0, 0, 1, 1, 1);
        let b = draw_block(11, 0, 0, 1, 1, 1);
        assert_eq!(a, b);
        assert!(a.sample(0)[0] == 1 || a.sample(0)[0] == -1);
    }

    #[test]
    fn samples_of_a_block_differ() {
        for seed in 0..100 {
            let b = draw_block(seed, 0, 0, 2, 15, 3);
            assert!(
                !(b.sample(0) == b.sample(1) && b.sample(1) == b.sample(2)),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn k0_slice_matches_single_sample_block() {
        for t in 0..20 {
            let big = draw_block(99, 4, t, 2, 15, 10);
            let one = draw_block(99, 4, t, 2, 15, 1);
            assert_eq!(big.sample(0), one.sample(0));
        }
    }

    #[test]
    fn block_entries_follow_key_layout() {
        let b = draw_block(7, 1, 5, 3, 4, 2);
        for k in 0..2 {
            for agent in 0..4 {
                for d in 0..3 {
                    let s = draw_sign(StreamKey {
                        master_seed: 7,
                        trial: 1,
                        t: 5,
                        agent,
                        dim: d,
                        k,
                    });
                    assert_eq!(b.sample(k as usize)[(agent * 3 + d) as usize], s);
                }
            }
        }
    }

    #[test]
    fn blocks_are_self_inverse() {
        for seed in 0..50 {
            let b = draw_block(seed, seed, seed, 2, 7, 4);
            assert_eq!(b.elementwise_inverse(), b);
        }
    }

    #[test]
    fn fixed_source_ignores_trial() {
        let s = SignSource::Fixed(-1);
        assert_eq!(s.block(0, 3, 2, 2, 2), s.block(9, 3, 2, 2, 2));
        assert!(s.block(0, 0, 2, 2, 1).sample(0).iter().all(|&v| v == -1));
    }

    #[test]
    fn from_samples_validates() {
        assert!(PerturbationBlock::from_samples(vec![vec![1, -1], vec![-1, 1]]).is_some());
        assert!(PerturbationBlock::from_samples(vec![vec![1, 0]]).is_none());
        assert!(PerturbationBlock::from_samples(vec![vec![1], vec![1, 1]]).is_none());
        assert!(PerturbationBlock::from_samples(vec![]).is_none());
    }
}
