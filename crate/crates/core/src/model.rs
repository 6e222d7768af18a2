//! Domain types for the one-coin model plus the quantities every estimator shares:
//! collective-wisdom statistics, binary KL divergence, hardening, the joint
//! objective `F(p, y)` and the marginal log-likelihood.
//!
//! Conventions: `0 · ln 0 = 0` everywhere, and boundary cases that charge a
//! zero-probability cell evaluate to `-inf` rather than failing.

use crate::error::{Error, Result};

/// Observed `n × m` binary answer matrix, row-major (worker `i`, item `j`).
///
/// Unobserved cells (when a mask is present) hold `0` and are skipped by every sum.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    n: usize,
    m: usize,
    entries: Vec<u8>,
    mask: Option<Vec<bool>>,
}

impl LabelMatrix {
    /// Fully observed matrix from row-major entries.
    pub fn new(n: usize, m: usize, entries: Vec<u8>) -> Result<Self> {
        Self::build(n, m, entries, None)
    }

    /// Partially observed matrix; `mask[i * m + j]` is true when the cell was observed.
    pub fn with_mask(n: usize, m: usize, entries: Vec<u8>, mask: Vec<bool>) -> Result<Self> {
        Self::build(n, m, entries, Some(mask))
    }

    /// Build from one `Vec` per worker.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::new(n, m, entries)
    }

    fn build(n: usize, m: usize, mut entries: Vec<u8>, mask: Option<Vec<bool>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "label matrix needs n >= 1 and m >= 1, got {n} x {m}"
            )));
        }
        if entries.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: n * m,
                actual: entries.len(),
            });
        }
        if let Some(mask) = &mask {
            if mask.len() != n * m {
                return Err(Error::DimensionMismatch {
                    what: "mask entries",
                    expected: n * m,
                    actual: mask.len(),
                });
            }
            let mut item_seen = vec![false; m];
            for i in 0..n {
                let row = &mask[i * m..(i + 1) * m];
                if !row.iter().any(|&b| b) {
                    return Err(Error::InvalidInput(format!(
                        "worker {i} has no observed label"
                    )));
                }
                for (seen, &b) in item_seen.iter_mut().zip(row) {
                    *seen |= b;
                }
            }
            if let Some(j) = item_seen.iter().position(|&s| !s) {
                return Err(Error::InvalidInput(format!(
                    "item {j} has no observed label"
                )));
            }
            for (e, &b) in entries.iter_mut().zip(mask) {
                if !b {
                    *e = 0;
                }
            }
        }
        if let Some(pos) = entries.iter().position(|&x| x > 1) {
            return Err(Error::InvalidInput(format!(
                "entry ({}, {}) = {} is not binary",
                pos / m,
                pos % m,
                entries[pos]
            )));
        }
        Ok(Self {
            n,
            m,
            entries,
            mask,
        })
    }

    pub fn workers(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn mask_row(&self, i: usize) -> Option<&[bool]> {
        self.mask
            .as_ref()
            .map(|mk| &mk[i * self.m..(i + 1) * self.m])
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask.as_ref().is_none_or(|mk| mk[i * self.m + j])
    }

    /// Entry `X_ij`, or `None` when unobserved.
    pub fn get(&self, i: usize, j: usize) -> Option<u8> {
        self.is_observed(i, j).then(|| self.entries[i * self.m + j])
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    /// Observed cell count per worker.
    pub fn worker_counts(&self) -> Vec<usize> {
        match &self.mask {
            None => vec![self.m; self.n],
            Some(_) => (0..self.n)
                .map(|i| self.mask_row(i).unwrap().iter().filter(|&&b| b).count())
                .collect(),
        }
    }

    /// Observed cell count per item.
    pub fn item_counts(&self) -> Vec<usize> {
        match &self.mask {
            None => vec![self.n; self.m],
            Some(mk) => {
                let mut counts = vec![0usize; self.m];
                for row in mk.chunks(self.m) {
                    for (c, &b) in counts.iter_mut().zip(row) {
                        *c += usize::from(b);
                    }
                }
                counts
            }
        }
    }

    /// Same matrix with workers and items permuted: new row `r` is old row
    /// `worker_order[r]`, new column `c` is old column `item_order[c]`.
    pub fn permuted(&self, worker_order: &[usize], item_order: &[usize]) -> Result<Self> {
        if worker_order.len() != self.n || item_order.len() != self.m {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let mut entries = Vec::with_capacity(self.n * self.m);
        let mut mask = self
            .mask
            .as_ref()
            .map(|_| Vec::with_capacity(self.n * self.m));
        for &i in worker_order {
            for &j in item_order {
                entries.push(self.entries[i * self.m + j]);
                if let (Some(dst), Some(src)) = (mask.as_mut(), self.mask.as_ref()) {
                    dst.push(src[i * self.m + j]);
                }
            }
        }
        Self::build(self.n, self.m, entries, mask)
    }
}

fn check_unit(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(k) => Err(Error::InvalidInput(format!(
            "{what}[{k}] = {} outside [0, 1]",
            values[k]
        ))),
        None => Ok(()),
    }
}

fn check_binary(values: &[u8], what: &str) -> Result<()> {
    match values.iter().position(|&v| v > 1) {
        Some(k) => Err(Error::InvalidInput(format!(
            "{what}[{k}] = {} is not binary",
            values[k]
        ))),
        None => Ok(()),
    }
}

macro_rules! unit_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                check_unit(&values, stringify!($name))?;
                Ok(Self(values))
            }

            /// Caller guarantees every value lies in `[0, 1]`.
            pub(crate) fn from_raw(values: Vec<f64>) -> Self {
                debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
                Self(values)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            /// Componentwise `1 − v`.
            pub fn complement(&self) -> Self {
                Self(self.0.iter().map(|v| 1.0 - v).collect())
            }

            pub fn mean(&self) -> f64 {
                self.0.iter().sum::<f64>() / self.0.len() as f64
            }
        }
    };
}

unit_vector!(
    /// Worker success probabilities, one per worker.
    Abilities
);
unit_vector!(
    /// Soft label estimates, one per item.
    SoftLabels
);

macro_rules! binary_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<u8>);

        impl $name {
            pub fn new(labels: Vec<u8>) -> Result<Self> {
                check_binary(&labels, stringify!($name))?;
                Ok(Self(labels))
            }

            pub(crate) fn from_raw(labels: Vec<u8>) -> Self {
                debug_assert!(labels.iter().all(|&v| v <= 1));
                Self(labels)
            }

            pub fn as_slice(&self) -> &[u8] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            /// Embed as 0/1 soft labels.
            pub fn to_soft(&self) -> SoftLabels {
                SoftLabels(self.0.iter().map(|&v| f64::from(v)).collect())
            }
        }
    };
}

binary_vector!(
    /// True binary labels `y*`.
    GroundTruth
);
binary_vector!(
    /// Hard label estimates.
    HardLabels
);

/// Collective-wisdom summary of a worker population.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrowdStats {
    /// Effective abilities `μ_i = max(p_i, 1 − p_i)`.
    pub mu: Vec<f64>,
    /// `ν_i = (2μ_i − 1)²`.
    pub nu: Vec<f64>,
    pub nu_bar: f64,
    pub mu_bar: f64,
    /// Mean of `min(μ_i, 1 − λ)`.
    pub mu_bar_lambda: f64,
    pub lambda: f64,
    /// Plain mean of the source abilities (needed by the average-ability condition).
    pub p_bar: f64,
}

/// Effective abilities and crowd averages for `p` with projection parameter `lambda`.
pub fn crowd_stats(p: &Abilities, lambda: f64) -> Result<CrowdStats> {
    if !(0.0..0.5).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} outside [0, 1/2)"
        )));
    }
    let n = p.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty abilities".into()));
    }
    let mu: Vec<f64> = p.as_slice().iter().map(|&v| v.max(1.0 - v)).collect();
    let nu: Vec<f64> = mu.iter().map(|&u| (2.0 * u - 1.0).powi(2)).collect();
    let nf = n as f64;
    let cap = 1.0 - lambda;
    Ok(CrowdStats {
        nu_bar: nu.iter().sum::<f64>() / nf,
        mu_bar: mu.iter().sum::<f64>() / nf,
        mu_bar_lambda: mu.iter().map(|&u| u.min(cap)).sum::<f64>() / nf,
        lambda,
        p_bar: p.mean(),
        mu,
        nu,
    })
}

/// `x · ln y` with `0 · ln 0 = 0`.
pub(crate) fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Binary entropy in nats.
pub fn entropy(y: f64) -> f64 {
    -xlogy(y, y) - xlogy(1.0 - y, 1.0 - y)
}

/// KL divergence between Bernoulli(a) and Bernoulli(b), in nats.
///
/// Returns `+inf` when `b` puts zero mass where `a` does not.
pub fn kl_binary(a: f64, b: f64) -> f64 {
    let d = xlogy(a, a) - xlogy(a, b) + xlogy(1.0 - a, 1.0 - a) - xlogy(1.0 - a, 1.0 - b);
    // rounding can leave a tiny negative value when a ≈ b
    d.max(0.0)
}

/// `1{y_j ≥ 1/2}` per item.
pub fn harden(y: &SoftLabels) -> HardLabels {
    HardLabels::from_raw(y.as_slice().iter().map(|&v| u8::from(v >= 0.5)).collect())
}

pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn check_dims(x: &LabelMatrix, p: Option<&Abilities>, y: Option<&SoftLabels>) -> Result<()> {
    if let Some(p) = p {
        if p.len() != x.workers() {
            return Err(Error::DimensionMismatch {
                what: "abilities",
                expected: x.workers(),
                actual: p.len(),
            });
        }
    }
    if let Some(y) = y {
        if y.len() != x.items() {
            return Err(Error::DimensionMismatch {
                what: "soft labels",
                expected: x.items(),
                actual: y.len(),
            });
        }
    }
    Ok(())
}

/// The joint objective `F(p, y)`: expected complete-data log-likelihood under `y`
/// plus the entropy of `y`.
pub fn objective_f(x: &LabelMatrix, p: &Abilities, y: &SoftLabels) -> Result<f64> {
    check_dims(x, Some(p), Some(y))?;
    let ys = y.as_slice();
    let mut total = 0.0;
    for (i, &pi) in p.as_slice().iter().enumerate() {
        let row = x.row(i);
        let mask = x.mask_row(i);
        let (lp, lq) = (pi.ln(), (1.0 - pi).ln());
        // accumulate weights first so each log term is charged once per worker
        let mut w_p = 0.0;
        let mut w_q = 0.0;
        for (j, (&xij, &yj)) in row.iter().zip(ys).enumerate() {
            if mask.is_some_and(|mk| !mk[j]) {
                continue;
            }
            if xij == 1 {
                w_p += yj;
                w_q += 1.0 - yj;
            } else {
                w_q += yj;
                w_p += 1.0 - yj;
            }
        }
        total += if w_p == 0.0 { 0.0 } else { w_p * lp };
        total += if w_q == 0.0 { 0.0 } else { w_q * lq };
    }
    total += ys.iter().map(|&v| entropy(v)).sum::<f64>();
    Ok(total)
}

/// Per-item log weights of the two mixture components:
/// `a_j = Σ_i ln P(X_ij | y_j = 1)` and `b_j = Σ_i ln P(X_ij | y_j = 0)`.
pub(crate) fn component_logs(x: &LabelMatrix, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = x.items();
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    for (i, &pi) in p.iter().enumerate() {
        let (lp, lq) = (pi.ln(), (1.0 - pi).ln());
        let row = x.row(i);
        match x.mask_row(i) {
            None => {
                for ((aj, bj), &xij) in a.iter_mut().zip(b.iter_mut()).zip(row) {
                    if xij == 1 {
                        *aj += lp;
                        *bj += lq;
                    } else {
                        *aj += lq;
                        *bj += lp;
                    }
                }
            }
            Some(mk) => {
                for (j, &xij) in row.iter().enumerate() {
                    if !mk[j] {
                        continue;
                    }
                    if xij == 1 {
                        a[j] += lp;
                        b[j] += lq;
                    } else {
                        a[j] += lq;
                        b[j] += lp;
                    }
                }
            }
        }
    }
    (a, b)
}

/// `ln P(X | p)` under a uniform prior on each label, summed over items.
pub fn marginal_loglik(x: &LabelMatrix, p: &Abilities) -> Result<f64> {
    check_dims(x, Some(p), None)?;
    let (a, b) = component_logs(x, p.as_slice());
    let half = 0.5f64.ln();
    Ok(a.iter()
        .zip(&b)
        .map(|(&aj, &bj)| half + log_sum_exp(aj, bj))
        .sum())
}
