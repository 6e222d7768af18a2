//! Exhaustive grid maximization of the marginal likelihood for tiny instances,
//! used to check EM against the global optimizer.

use crate::error::{Error, Result};
use crate::estimators::{e_step, EmResult};
use crate::metrics::clustering_error;
use crate::model::{harden, log_sum_exp, Abilities, GroundTruth, LabelMatrix, SoftLabels};
use serde::{Deserialize, Serialize};

/// Relative gap below which two grid log-likelihoods count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    pub max_workers: usize,
    pub max_items: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_workers: 4,
            max_items: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub p: Abilities,
    pub y: SoftLabels,
    pub loglik: f64,
    /// Largest finite log-likelihood change between the argmax and an axis
    /// neighbour on the grid.
    pub grid_slack: f64,
}

struct Grid {
    values: Vec<f64>,
    ln_p: Vec<f64>,
    ln_q: Vec<f64>,
}

impl Grid {
    fn new(step: f64) -> Self {
        let k = (1.0 / step).round() as usize;
        let values: Vec<f64> = (0..=k).map(|t| (t as f64 * step).min(1.0)).collect();
        let ln_p = values.iter().map(|v| v.ln()).collect();
        let ln_q = values.iter().map(|v| (1.0 - v).ln()).collect();
        Self { values, ln_p, ln_q }
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

/// Per-item column patterns and the log-likelihood at grid index tuple `idx`.
fn loglik_at(columns: &[Vec<Option<u8>>], grid: &Grid, idx: &[usize]) -> f64 {
    let half = 0.5f64.ln();
    columns
        .iter()
        .map(|col| {
            let (mut a, mut b) = (0.0, 0.0);
            for (&g, &x) in idx.iter().zip(col) {
                match x {
                    Some(1) => {
                        a += grid.ln_p[g];
                        b += grid.ln_q[g];
                    }
                    Some(_) => {
                        a += grid.ln_q[g];
                        b += grid.ln_p[g];
                    }
                    None => {}
                }
            }
            half + log_sum_exp(a, b)
        })
        .sum()
}

/// Grid argmax of `ln P(X | p)` over `{0, step, …, 1}ⁿ`, then the Bayes plug-in labels.
///
/// Points are visited in lexicographic order and only a strictly better value
/// (beyond a 1e-12 relative tie tolerance) replaces the incumbent, so ties go to
/// the lexicographically smallest point.
pub fn grid_mle(x: &LabelMatrix, spec: &GridSpec) -> Result<GridOptimum> {
    let (n, m) = (x.workers(), x.items());
    if n > spec.max_workers || m > spec.max_items {
        return Err(Error::TooLarge(format!(
            "{n} workers x {m} items exceeds limits {} x {}",
            spec.max_workers, spec.max_items
        )));
    }
    if !(spec.step > 0.0 && spec.step <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "grid step {} outside (0, 1/2]",
            spec.step
        )));
    }
    let grid = Grid::new(spec.step);
    let columns: Vec<Vec<Option<u8>>> = (0..m)
        .map(|j| (0..n).map(|i| x.get(i, j)).collect())
        .collect();

    let k = grid.len();
    let mut idx = vec![0usize; n];
    let mut best_idx = idx.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        let ll = loglik_at(&columns, &grid, &idx);
        let margin = TIE_TOLERANCE * best.abs().max(1.0);
        if best == f64::NEG_INFINITY && ll > best || ll > best + margin {
            best = ll;
            best_idx.copy_from_slice(&idx);
        }
        // odometer increment, last coordinate fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }

    let mut slack = 0.0f64;
    let mut probe = best_idx.clone();
    for w in 0..n {
        for delta in [-1i64, 1] {
            let t = best_idx[w] as i64 + delta;
            if t < 0 || t >= k as i64 {
                continue;
            }
            probe[w] = t as usize;
            let ll = loglik_at(&columns, &grid, &probe);
            if ll.is_finite() && best.is_finite() {
                slack = slack.max((best - ll).abs());
            }
            probe[w] = best_idx[w];
        }
    }

    let p = Abilities::new(best_idx.iter().map(|&g| grid.values[g]).collect())?;
    let y = e_step(x, &p)?;
    Ok(GridOptimum {
        p,
        y,
        loglik: best,
        grid_slack: slack,
    })
}

/// Flip-aligned disagreement rate between hardened EM labels and hardened oracle labels.
pub fn oracle_agreement(em: &EmResult, oracle_y: &SoftLabels) -> Result<f64> {
    let reference = GroundTruth::new(harden(oracle_y).as_slice().to_vec())?;
    clustering_error(&harden(&em.y_final).to_soft(), &reference)
}
