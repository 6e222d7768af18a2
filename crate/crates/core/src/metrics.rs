//! Error metrics, closed-form rate bounds, majority-voting limits and the
//! standardized-residual diagnostic for ability estimates.

use crate::error::{Error, Result};
use crate::model::{harden, kl_binary, Abilities, CrowdStats, GroundTruth, SoftLabels};
use serde::{Deserialize, Serialize};

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

/// `(1/m) Σ_j |ŷ_j − y*_j|`.
pub fn labeling_error(y_hat: &SoftLabels, y_star: &GroundTruth) -> Result<f64> {
    check_len("soft labels", y_star.len(), y_hat.len())?;
    let total: f64 = y_hat
        .as_slice()
        .iter()
        .zip(y_star.as_slice())
        .map(|(&a, &b)| (a - f64::from(b)).abs())
        .sum();
    Ok(total / y_star.len() as f64)
}

/// Labeling error minimized over a global flip of the estimate.
pub fn clustering_error(y_hat: &SoftLabels, y_star: &GroundTruth) -> Result<f64> {
    let r = labeling_error(y_hat, y_star)?;
    Ok(r.min(1.0 - r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub labeling_error: f64,
    pub clustering_error: f64,
    pub hard_labeling_error: f64,
}

impl ErrorReport {
    pub fn score(y_hat: &SoftLabels, y_star: &GroundTruth) -> Result<Self> {
        Ok(Self {
            labeling_error: labeling_error(y_hat, y_star)?,
            clustering_error: clustering_error(y_hat, y_star)?,
            hard_labeling_error: labeling_error(&harden(y_hat).to_soft(), y_star)?,
        })
    }
}

/// `(‖p̂ − p*‖_∞, (1/n)‖p̂ − p*‖²)`, index-aligned.
pub fn ability_errors(p_hat: &Abilities, p_star: &Abilities) -> Result<(f64, f64)> {
    check_len("abilities", p_star.len(), p_hat.len())?;
    let (mut linf, mut sq) = (0.0f64, 0.0);
    for (&a, &b) in p_hat.as_slice().iter().zip(p_star.as_slice()) {
        let d = (a - b).abs();
        linf = linf.max(d);
        sq += d * d;
    }
    Ok((linf, sq / p_star.len() as f64))
}

/// Hypothesis checks of the upper-bound theorems. Reported, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundConditions {
    /// `ν̄ ≥ 12 ln n / n`.
    pub crowd_informative: bool,
    /// `ν̄ > (1/n) ln(4/(1−μ̄))`; enables the improved exponent.
    pub improved_exponent: bool,
    /// `mean(p*) > 1/2 + 2√(ln m/(nm))`.
    pub average_above_half: bool,
    /// `ν̄ ≥ max(4(ln m + ln n), 12 ln n)/n`.
    pub labeling_informative: bool,
    /// `16 ν̄⁻¹ √(ln m/m) ≤ λ ≤ 1/8 − ½√(ln m/m)`.
    pub tuning_in_range: bool,
}

/// Upper bounds on the global optimizer's clustering/labeling error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalUpperBound {
    /// `exp(−nν̄/8)`.
    pub upper_nu: f64,
    /// `exp(−(n/8) max(ν̄, D(μ̄‖1−μ̄)/3))` when the improved-exponent condition holds,
    /// otherwise equal to `upper_nu`.
    pub upper_combined: f64,
    pub conditions: BoundConditions,
}

fn conditions(n: usize, m: usize, stats: &CrowdStats) -> BoundConditions {
    let (nf, mf) = (n as f64, m as f64);
    let root = ((mf.ln()) / mf).sqrt();
    let lambda = stats.lambda;
    BoundConditions {
        crowd_informative: stats.nu_bar >= 12.0 * nf.ln() / nf,
        improved_exponent: stats.nu_bar > (4.0 / (1.0 - stats.mu_bar)).ln() / nf,
        average_above_half: stats.p_bar > 0.5 + 2.0 * (mf.ln() / (nf * mf)).sqrt(),
        labeling_informative: stats.nu_bar >= (4.0 * (mf.ln() + nf.ln())).max(12.0 * nf.ln()) / nf,
        tuning_in_range: stats.nu_bar > 0.0
            && 16.0 / stats.nu_bar * root <= lambda
            && lambda <= 0.125 - 0.5 * root,
    }
}

pub fn upper_bound_global(n: usize, stats: &CrowdStats, m: usize) -> Result<GlobalUpperBound> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidInput(format!(
            "upper bound needs n >= 2, m >= 1; got n = {n}, m = {m}"
        )));
    }
    let nf = n as f64;
    let upper_nu = (-nf * stats.nu_bar / 8.0).exp();
    let conditions = conditions(n, m, stats);
    let upper_combined = if conditions.improved_exponent {
        let d = kl_binary(stats.mu_bar, 1.0 - stats.mu_bar);
        (-nf / 8.0 * stats.nu_bar.max(d / 3.0)).exp()
    } else {
        upper_nu
    };
    Ok(GlobalUpperBound {
        upper_nu,
        upper_combined,
        conditions,
    })
}

/// `exp(−(n/2) max(ν̄, D(μ̄_λ‖1−μ̄_λ)))` for projected EM with the λ stored in `stats`.
pub fn upper_bound_pem(n: usize, stats: &CrowdStats) -> f64 {
    let d = kl_binary(stats.mu_bar_lambda, 1.0 - stats.mu_bar_lambda);
    (-(n as f64) / 2.0 * stats.nu_bar.max(d)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerRegime {
    /// `ν̄ < 1/2`: spammer/expert least-favorable family.
    LowWisdom,
    /// `ν̄ ≥ 1/2` (hence `μ̄ ≥ 3/4`): homogeneous least-favorable instance.
    HighWisdom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub regime: LowerRegime,
}

/// Minimax lower bound on the expected labeling error.
pub fn lower_bound_minimax(n: usize, stats: &CrowdStats) -> Result<LowerBound> {
    let nf = n as f64;
    if stats.nu_bar < 0.5 {
        if n < 4 {
            return Err(Error::RegimeTooSmall { n, required: 4 });
        }
        let six_e = 6.0 * std::f64::consts::E;
        Ok(LowerBound {
            value: (-6.0 * nf * stats.nu_bar).exp() / (8.0 * six_e * six_e),
            regime: LowerRegime::LowWisdom,
        })
    } else {
        if n < 6 {
            return Err(Error::RegimeTooSmall { n, required: 6 });
        }
        let d = kl_binary(stats.mu_bar, 1.0 - stats.mu_bar);
        Ok(LowerBound {
            value: (-8.0 * nf * d).exp() / 8.0,
            regime: LowerRegime::HighWisdom,
        })
    }
}

/// All bound formulas for one population, as carried by experiment reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub upper_nu: f64,
    pub upper_combined: f64,
    pub upper_pem: f64,
    /// `None` when `n` is below the applicable theorem's floor.
    pub lower: Option<LowerBound>,
    pub conditions: BoundConditions,
}

impl TheoryBounds {
    pub fn compute(n: usize, m: usize, stats: &CrowdStats) -> Result<Self> {
        let global = upper_bound_global(n, stats, m)?;
        let lower = match lower_bound_minimax(n, stats) {
            Ok(l) => Some(l),
            Err(Error::RegimeTooSmall { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            upper_nu: global.upper_nu,
            upper_combined: global.upper_combined,
            upper_pem: upper_bound_pem(n, stats),
            lower,
            conditions: global.conditions,
        })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Limiting majority-vote error with `⌈n^δ⌉` perfect experts among spammers.
pub fn mv_asymptotic_error(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta = {delta} outside (0, 1)"
        )));
    }
    Ok(if delta > 0.5 {
        0.0
    } else if delta == 0.5 {
        normal_cdf(-1.0)
    } else {
        0.5
    })
}

/// `√m (p̂_i − p*_i) / √(p*_i (1 − p*_i))` per worker.
pub fn clt_residuals(p_hat: &Abilities, p_star: &Abilities, m: usize) -> Result<Vec<f64>> {
    check_len("abilities", p_star.len(), p_hat.len())?;
    if let Some((worker, &value)) = p_star
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, &v)| v <= 0.0 || v >= 1.0)
    {
        return Err(Error::BoundaryAbility { worker, value });
    }
    let scale = (m as f64).sqrt();
    Ok(p_hat
        .as_slice()
        .iter()
        .zip(p_star.as_slice())
        .map(|(&a, &b)| scale * (a - b) / (b * (1.0 - b)).sqrt())
        .collect())
}

/// One-sample Kolmogorov–Smirnov distance between the sample and `N(0, 1)`.
pub fn ks_statistic_normal(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (k, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        sup = sup.max(cdf - k as f64 / n).max((k + 1) as f64 / n - cdf);
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::crowd_stats;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn truth(v: &[u8]) -> GroundTruth {
        GroundTruth::new(v.to_vec()).unwrap()
    }

    fn soft(v: &[f64]) -> SoftLabels {
        SoftLabels::new(v.to_vec()).unwrap()
    }

    fn ab(v: &[f64]) -> Abilities {
        Abilities::new(v.to_vec()).unwrap()
    }

    /// Stats with prescribed (ν̄, μ̄): only those two fields feed the bound formulas.
    fn stats_with(nu_bar: f64, mu_bar: f64) -> CrowdStats {
        CrowdStats {
            mu: vec![],
            nu: vec![],
            nu_bar,
            mu_bar,
            mu_bar_lambda: mu_bar,
            lambda: 0.0,
            p_bar: mu_bar,
        }
    }

    #[test]
    fn labeling_and_clustering_examples() {
        let y = truth(&[1, 0]);
        assert_eq!(labeling_error(&soft(&[1.0, 0.0]), &y).unwrap(), 0.0);
        assert_eq!(labeling_error(&soft(&[0.0, 1.0]), &y).unwrap(), 1.0);
        assert_abs_diff_eq!(
            labeling_error(&soft(&[0.9, 0.3]), &y).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        assert_eq!(clustering_error(&soft(&[0.0, 1.0]), &y).unwrap(), 0.0);
        assert_eq!(clustering_error(&soft(&[0.5, 0.5]), &y).unwrap(), 0.5);
        assert_abs_diff_eq!(
            clustering_error(&soft(&[0.9, 0.3]), &y).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        let r = ErrorReport::score(&soft(&[0.9, 0.6]), &y).unwrap();
        assert_eq!(r.hard_labeling_error, 0.5);
    }

    #[test]
    fn ability_error_examples() {
        assert_eq!(
            ability_errors(&ab(&[0.3, 0.8]), &ab(&[0.3, 0.8])).unwrap(),
            (0.0, 0.0)
        );
        let (linf, mse) = ability_errors(&ab(&[0.6, 0.5]), &ab(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(linf, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(mse, 0.005, epsilon = 1e-15);
        // index-aligned: a permutation of the truth is not matched back
        let (linf, _) = ability_errors(&ab(&[0.8, 0.3]), &ab(&[0.3, 0.8])).unwrap();
        assert_abs_diff_eq!(linf, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn global_bound_examples() {
        let b = upper_bound_global(100, &stats_with(0.25, 0.75), 1000).unwrap();
        assert_relative_eq!(b.upper_nu, (-3.125f64).exp(), max_relative = 1e-14);
        assert_abs_diff_eq!(b.upper_nu, 0.043937, epsilon = 1e-6);
        // D(0.75‖0.25)/3 = 0.183102 < ν̄, so the improvement changes nothing
        assert!(b.conditions.improved_exponent);
        assert_relative_eq!(b.upper_combined, b.upper_nu, max_relative = 1e-14);
        let b = upper_bound_global(100, &stats_with(0.0, 0.5), 1000).unwrap();
        assert_eq!(b.upper_nu, 1.0);
    }

    #[test]
    fn pem_bound_examples() {
        let s = crowd_stats(&ab(&[0.7; 100]), 0.0).unwrap();
        assert_abs_diff_eq!(s.nu_bar, 0.16, epsilon = 1e-12);
        let d = kl_binary(0.7, 0.3);
        assert_abs_diff_eq!(d, 0.4 * (7.0f64 / 3.0).ln(), epsilon = 1e-12);
        let b = upper_bound_pem(100, &s);
        assert_relative_eq!(b, (-50.0 * d).exp(), max_relative = 1e-12);
        assert_abs_diff_eq!(b, 4.36e-8, epsilon = 0.01e-8);
        assert_eq!(s.mu_bar_lambda, s.mu_bar);
        assert_eq!(upper_bound_pem(10, &stats_with(0.0, 0.5)), 1.0);
    }

    #[test]
    fn lower_bound_examples() {
        let l = lower_bound_minimax(4, &stats_with(0.25, 0.6)).unwrap();
        assert_eq!(l.regime, LowerRegime::LowWisdom);
        assert_relative_eq!(
            l.value,
            (-6.0f64).exp() / (8.0 * (6.0 * std::f64::consts::E).powi(2)),
            max_relative = 1e-12
        );
        assert_abs_diff_eq!(l.value, 1.165e-6, epsilon = 0.001e-6);
        let l = lower_bound_minimax(6, &stats_with(0.6, 0.8)).unwrap();
        assert_eq!(l.regime, LowerRegime::HighWisdom);
        let d = 0.6 * 4f64.ln();
        assert_relative_eq!(l.value, (-48.0 * d).exp() / 8.0, max_relative = 1e-12);
        assert!(matches!(
            lower_bound_minimax(3, &stats_with(0.25, 0.6)),
            Err(Error::RegimeTooSmall { required: 4, .. })
        ));
        assert!(matches!(
            lower_bound_minimax(5, &stats_with(0.6, 0.8)),
            Err(Error::RegimeTooSmall { required: 6, .. })
        ));
    }

    #[test]
    fn majority_limits() {
        assert_abs_diff_eq!(mv_asymptotic_error(0.5).unwrap(), 0.158655, epsilon = 1e-6);
        assert_abs_diff_eq!(normal_cdf(-1.0), 0.15865525393145707, epsilon = 1e-15);
        assert_eq!(mv_asymptotic_error(0.75).unwrap(), 0.0);
        assert_eq!(mv_asymptotic_error(0.25).unwrap(), 0.5);
        assert!(mv_asymptotic_error(1.0).is_err());
    }

    #[test]
    fn residual_examples() {
        let r = clt_residuals(&ab(&[0.51]), &ab(&[0.5]), 2500).unwrap();
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-10);
        let zeros = clt_residuals(&ab(&[0.3, 0.6]), &ab(&[0.3, 0.6]), 100).unwrap();
        assert_eq!(zeros, vec![0.0, 0.0]);
        assert_abs_diff_eq!(ks_statistic_normal(&zeros), 0.5, epsilon = 1e-15);
        assert!(matches!(
            clt_residuals(&ab(&[0.5, 0.6]), &ab(&[0.5, 1.0]), 10),
            Err(Error::BoundaryAbility { worker: 1, .. })
        ));
    }

    #[test]
    fn ks_single_point() {
        // one observation at 0: sup distance is max(Φ(0), 1 − Φ(0))
        assert_abs_diff_eq!(ks_statistic_normal(&[0.0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_statistic_normal(&[10.0]), 1.0, epsilon = 1e-12);
    }
}
