//! Seeded generators for label matrices and worker populations.
//!
//! Streams are xoshiro256++ seeded through SplitMix64 (the reference seeding
//! procedure). Every Bernoulli draw consumes exactly one 64-bit word: the top
//! 53 bits form a uniform `u ∈ [0, 1)` and the draw succeeds iff `u < p`.
//! Matrices are filled row-major (worker-major), so a given `(inputs, seed)`
//! yields the same matrix on every platform.

use crate::error::{Error, Result};
use crate::model::{Abilities, GroundTruth, LabelMatrix};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// Worker and item groups of the two-type misspecified model.
///
/// Workers `0..n1` and items `0..m1` form the first group of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTypeSpec {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub accuracy_expert: f64,
    pub accuracy_naive: f64,
}

impl TwoTypeSpec {
    /// Expert accuracy 4/5 on the own item type, coin flips on the other.
    pub fn standard(n1: usize, n2: usize, m1: usize, m2: usize) -> Self {
        Self {
            n1,
            n2,
            m1,
            m2,
            accuracy_expert: 0.8,
            accuracy_naive: 0.5,
        }
    }

    pub fn workers(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn items(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers() == 0 || self.items() == 0 {
            return Err(Error::InvalidInput(
                "two-type model needs n >= 1 and m >= 1".into(),
            ));
        }
        for acc in [self.accuracy_expert, self.accuracy_naive] {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::InvalidInput(format!(
                    "accuracy {acc} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Probability that worker `i` answers item `j` correctly.
    pub fn accuracy(&self, i: usize, j: usize) -> f64 {
        if (i < self.n1) == (j < self.m1) {
            self.accuracy_expert
        } else {
            self.accuracy_naive
        }
    }
}

/// Deterministic stream used by every generator in this module.
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn new(seed: Seed) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed.0))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..bound` (multiply-shift, one word per call).
    pub fn below(&mut self, bound: usize) -> usize {
        ((u128::from(self.next_u64()) * bound as u128) >> 64) as usize
    }
}

/// SplitMix64 output mix applied to `master ^ trial`.
pub fn derive_trial_seed(master: Seed, trial: u64) -> Seed {
    let mut z = master.0 ^ trial;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    Seed(z ^ (z >> 31))
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

/// One-coin model: worker `i` is correct with probability `p*_i`, independently per item.
pub fn sample_one_coin(
    p_star: &Abilities,
    y_star: &GroundTruth,
    seed: Seed,
) -> Result<LabelMatrix> {
    let (n, m) = (p_star.len(), y_star.len());
    let mut stream = Stream::new(seed);
    let mut entries = Vec::with_capacity(n * m);
    for &p in p_star.as_slice() {
        for &y in y_star.as_slice() {
            let correct = stream.bernoulli(p);
            entries.push(if correct { y } else { 1 - y });
        }
    }
    LabelMatrix::new(n, m, entries)
}

/// Two-type model: accuracy depends on whether the worker group matches the item type.
pub fn sample_two_type(
    spec: &TwoTypeSpec,
    y_star: &GroundTruth,
    seed: Seed,
) -> Result<LabelMatrix> {
    spec.validate()?;
    check_len("ground truth", spec.items(), y_star.len())?;
    let (n, m) = (spec.workers(), spec.items());
    let mut stream = Stream::new(seed);
    let mut entries = Vec::with_capacity(n * m);
    for i in 0..n {
        for (j, &y) in y_star.as_slice().iter().enumerate() {
            let correct = stream.bernoulli(spec.accuracy(i, j));
            entries.push(if correct { y } else { 1 - y });
        }
    }
    LabelMatrix::new(n, m, entries)
}

// n·ν̄ and n^δ land on integers in the common cases; keep rounding noise from bumping the ceiling.
fn ceil_count(x: f64, n: usize) -> usize {
    ((x - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn expert_block(n: usize, experts: usize) -> Abilities {
    let mut v = vec![1.0; experts];
    v.resize(n, 0.5);
    Abilities::from_raw(v)
}

/// `⌈n·ν̄⌉` perfect workers followed by spammers.
pub fn make_spammer_expert(n: usize, nu_bar: f64) -> Result<Abilities> {
    if n == 0 || !(0.0..=1.0).contains(&nu_bar) {
        return Err(Error::InvalidInput(format!(
            "spammer/expert population needs n >= 1 and nu_bar in [0, 1], got n = {n}, nu_bar = {nu_bar}"
        )));
    }
    Ok(expert_block(n, ceil_count(n as f64 * nu_bar, n)))
}

/// `⌈n^δ⌉` perfect workers followed by spammers.
pub fn make_experts_power(n: usize, delta: f64) -> Result<Abilities> {
    if n == 0 || !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!(
            "expert exponent needs n >= 1 and delta in [0, 1], got n = {n}, delta = {delta}"
        )));
    }
    Ok(expert_block(n, ceil_count((n as f64).powf(delta), n)))
}

/// Every worker at ability `μ̄`.
pub fn make_homogeneous(n: usize, mu_bar: f64) -> Result<Abilities> {
    if n == 0 || !(0.5..=1.0).contains(&mu_bar) {
        return Err(Error::InvalidInput(format!(
            "homogeneous population needs n >= 1 and mu_bar in [1/2, 1], got n = {n}, mu_bar = {mu_bar}"
        )));
    }
    Ok(Abilities::from_raw(vec![mu_bar; n]))
}

/// `n` abilities drawn uniformly from `[lo, hi]`.
pub fn sample_uniform_abilities(n: usize, lo: f64, hi: f64, seed: Seed) -> Result<Abilities> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::InvalidInput(format!(
            "bad ability range [{lo}, {hi}]"
        )));
    }
    let mut stream = Stream::new(seed);
    Ok(Abilities::from_raw(
        (0..n)
            .map(|_| (lo + (hi - lo) * stream.uniform()).min(hi))
            .collect(),
    ))
}

/// Ground truth with prevalence `pi`: i.i.d. Bernoulli, or exactly `⌊π·m⌋` ones
/// at uniformly shuffled positions when `exact_count` is set.
pub fn sample_truth(m: usize, pi: f64, exact_count: bool, seed: Seed) -> Result<GroundTruth> {
    if m == 0 || !(0.0..=1.0).contains(&pi) {
        return Err(Error::InvalidInput(format!(
            "truth needs m >= 1 and pi in [0, 1], got m = {m}, pi = {pi}"
        )));
    }
    let mut stream = Stream::new(seed);
    if !exact_count {
        return Ok(GroundTruth::from_raw(
            (0..m).map(|_| u8::from(stream.bernoulli(pi))).collect(),
        ));
    }
    let ones = ((pi * m as f64 + 1e-9).floor() as usize).min(m);
    let mut labels = vec![0u8; m];
    labels[..ones].fill(1);
    for k in (1..m).rev() {
        let r = stream.below(k + 1);
        labels.swap(k, r);
    }
    Ok(GroundTruth::from_raw(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::crowd_stats;

    fn truth(v: &[u8]) -> GroundTruth {
        GroundTruth::new(v.to_vec()).unwrap()
    }

    // Golden values below come from a standalone reimplementation of SplitMix64
    // seeding and xoshiro256++, not from this crate.
    #[test]
    fn trial_seed_golden() {
        assert_eq!(derive_trial_seed(Seed(42), 0), Seed(12058926934050108962));
        assert_eq!(derive_trial_seed(Seed(42), 1), Seed(5695472266747893962));
    }

    #[test]
    fn stream_golden() {
        let mut s = Stream::new(Seed(42));
        let words: Vec<u64> = (0..4).map(|_| s.next_u64()).collect();
        assert_eq!(
            words,
            [
                15021278609987233951,
                5881210131331364753,
                18149643915985481100,
                12933668939759105464
            ]
        );
    }

    #[test]
    fn one_coin_matrix_golden() {
        let p = Abilities::new(vec![0.9, 0.6, 0.3]).unwrap();
        let x = sample_one_coin(&p, &truth(&[1, 0, 1, 1, 0]), Seed(7)).unwrap();
        assert_eq!(x.row(0), &[1, 0, 1, 1, 1]);
        assert_eq!(x.row(1), &[1, 1, 1, 0, 0]);
        assert_eq!(x.row(2), &[1, 0, 0, 1, 1]);
    }

    #[test]
    fn deterministic_workers() {
        let y = truth(&[1, 0, 0, 1, 1]);
        let x = sample_one_coin(&Abilities::new(vec![1.0; 3]).unwrap(), &y, Seed(7)).unwrap();
        for i in 0..3 {
            assert_eq!(x.row(i), y.as_slice());
        }
        let x = sample_one_coin(&Abilities::new(vec![0.0; 3]).unwrap(), &y, Seed(7)).unwrap();
        for i in 0..3 {
            assert!(x.row(i).iter().zip(y.as_slice()).all(|(a, b)| a + b == 1));
        }
    }

    #[test]
    fn empirical_agreement_near_nominal() {
        let m = 10_000;
        let y = sample_truth(m, 0.5, false, Seed(3)).unwrap();
        let p = Abilities::new(vec![0.7; 4]).unwrap();
        let x = sample_one_coin(&p, &y, Seed(11)).unwrap();
        for i in 0..4 {
            let agree = x
                .row(i)
                .iter()
                .zip(y.as_slice())
                .filter(|(a, b)| a == b)
                .count();
            let rate = agree as f64 / m as f64;
            assert!((rate - 0.7).abs() < 0.02, "worker {i}: {rate}");
        }
    }

    #[test]
    fn spammer_expert_counts() {
        let p = make_spammer_expert(100, 0.2).unwrap();
        assert_eq!(p.as_slice().iter().filter(|&&v| v == 1.0).count(), 20);
        let s = crowd_stats(&p, 0.0).unwrap();
        assert!((s.nu_bar - 0.2).abs() < 1e-12);
        assert_eq!(
            make_spammer_expert(4, 0.5).unwrap().as_slice(),
            &[1.0, 1.0, 0.5, 0.5]
        );
        let p = make_spammer_expert(10, 0.01).unwrap();
        assert!((crowd_stats(&p, 0.0).unwrap().nu_bar - 0.1).abs() < 1e-12);
        assert_eq!(
            make_experts_power(2000, 0.5)
                .unwrap()
                .as_slice()
                .iter()
                .filter(|&&v| v == 1.0)
                .count(),
            45
        );
        assert_eq!(
            make_experts_power(2000, 0.3)
                .unwrap()
                .as_slice()
                .iter()
                .filter(|&&v| v == 1.0)
                .count(),
            10
        );
    }

    #[test]
    fn homogeneous_population() {
        let p = make_homogeneous(3, 0.75).unwrap();
        assert_eq!(p.as_slice(), &[0.75; 3]);
        assert!((crowd_stats(&p, 0.0).unwrap().nu_bar - 0.25).abs() < 1e-15);
        assert_eq!(
            crowd_stats(&make_homogeneous(5, 0.5).unwrap(), 0.0)
                .unwrap()
                .nu_bar,
            0.0
        );
        assert_eq!(
            crowd_stats(&make_homogeneous(5, 1.0).unwrap(), 0.0)
                .unwrap()
                .nu_bar,
            1.0
        );
        assert!(make_homogeneous(3, 0.4).is_err());
    }

    #[test]
    fn two_type_blocks() {
        let spec = TwoTypeSpec {
            accuracy_expert: 1.0,
            accuracy_naive: 1.0,
            ..TwoTypeSpec::standard(2, 2, 3, 2)
        };
        let y = truth(&[1, 0, 1, 1, 0]);
        let x = sample_two_type(&spec, &y, Seed(5)).unwrap();
        for i in 0..4 {
            assert_eq!(x.row(i), y.as_slice());
        }
        let spec = TwoTypeSpec {
            accuracy_naive: 0.0,
            ..spec
        };
        let x = sample_two_type(&spec, &y, Seed(5)).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let off_block = (i < 2) != (j < 3);
                let v = x.get(i, j).unwrap();
                assert_eq!(v == y.as_slice()[j], !off_block);
            }
        }
    }

    #[test]
    fn two_type_block_rates() {
        let spec = TwoTypeSpec::standard(1, 1, 20_000, 20_000);
        let y = sample_truth(40_000, 0.5, false, Seed(1)).unwrap();
        let x = sample_two_type(&spec, &y, Seed(2)).unwrap();
        let rate = |i: usize, js: std::ops::Range<usize>| {
            let len = js.len() as f64;
            js.filter(|&j| x.get(i, j) == Some(y.as_slice()[j])).count() as f64 / len
        };
        assert!((rate(0, 0..20_000) - 0.8).abs() < 0.02);
        assert!((rate(0, 20_000..40_000) - 0.5).abs() < 0.02);
        assert!((rate(1, 20_000..40_000) - 0.8).abs() < 0.02);
    }

    #[test]
    fn trial_seeds() {
        let s = Seed(42);
        assert_eq!(derive_trial_seed(s, 3), derive_trial_seed(s, 3));
        assert_ne!(derive_trial_seed(s, 0), derive_trial_seed(s, 1));
    }

    #[test]
    fn exact_count_truth() {
        let y = sample_truth(1000, 0.3, true, Seed(9)).unwrap();
        assert_eq!(y.as_slice().iter().filter(|&&v| v == 1).count(), 300);
        assert_ne!(&y.as_slice()[..300], &[1u8; 300][..]);
    }

    #[test]
    fn uniform_abilities_in_range() {
        let p = sample_uniform_abilities(500, 0.3, 0.7, Seed(4)).unwrap();
        assert!(p.as_slice().iter().all(|&v| (0.3..=0.7).contains(&v)));
    }
}
