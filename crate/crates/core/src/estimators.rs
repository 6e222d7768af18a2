//! Majority voting, the method-of-moments initializer, E/M steps and the
//! projected / classical EM drivers with final sign disambiguation.

use crate::error::{Error, Result};
use crate::model::{component_logs, objective_f, Abilities, HardLabels, LabelMatrix, SoftLabels};
use serde::{Deserialize, Serialize};

/// Floor applied by classical EM so log-odds stay finite. `1 − 2^-53` is the
/// largest double below one, so the interval is symmetric.
pub const CLASSICAL_EPS: f64 = f64::EPSILON / 2.0;

/// Denominators below this make the prevalence quadratic meaningless.
pub const MOMENT_DENOMINATOR_FLOOR: f64 = 1e-12;

/// `1{Σ_i X_ij ≥ n/2}`; with a mask the threshold is half the observed count.
pub fn majority_vote(x: &LabelMatrix) -> HardLabels {
    let m = x.items();
    let mut ones = vec![0usize; m];
    for i in 0..x.workers() {
        let row = x.row(i);
        for (c, &v) in ones.iter_mut().zip(row) {
            *c += usize::from(v);
        }
    }
    let counts = x.item_counts();
    HardLabels::from_raw(
        ones.iter()
            .zip(&counts)
            .map(|(&k, &c)| u8::from(2 * k >= c))
            .collect(),
    )
}

/// Both roots of the prevalence quadratic and the moments behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub root_high: f64,
    pub root_low: f64,
    /// `(1/2m²) Σ_jk (Q_j − Q_k)²`.
    pub n_hat: f64,
    /// `(4/m) Σ_j (Q_j − 1/2)²`.
    pub d_hat: f64,
    /// Per-item vote shares `Q_j`.
    pub item_votes: Vec<f64>,
    /// True when sampling noise pushed the discriminant below zero and it was clamped.
    pub discriminant_clamped: bool,
}

impl PiEstimate {
    pub fn gap(&self) -> f64 {
        2.0 * self.root_high - 1.0
    }
}

/// Prevalence estimate from the item vote-share moments.
///
/// The numerator uses the variance identity `(1/2m²)Σ_jk(Q_j−Q_k)² = mean(Q²) − mean(Q)²`.
pub fn estimate_pi(x: &LabelMatrix) -> Result<PiEstimate> {
    let m = x.items();
    let mut ones = vec![0usize; m];
    for i in 0..x.workers() {
        for (c, &v) in ones.iter_mut().zip(x.row(i)) {
            *c += usize::from(v);
        }
    }
    let q: Vec<f64> = ones
        .iter()
        .zip(x.item_counts())
        .map(|(&k, c)| k as f64 / c as f64)
        .collect();
    let mf = m as f64;
    let mean = q.iter().sum::<f64>() / mf;
    let mean_sq = q.iter().map(|v| v * v).sum::<f64>() / mf;
    let n_hat = (mean_sq - mean * mean).max(0.0);
    let d_hat = 4.0 * q.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>() / mf;
    let (root_high, root_low, discriminant_clamped) = prevalence_roots(n_hat, d_hat)?;
    Ok(PiEstimate {
        root_high,
        root_low,
        n_hat,
        d_hat,
        item_votes: q,
        discriminant_clamped,
    })
}

/// Roots `(high, low, clamped)` of `π² − π + N/D = 0`; a negative discriminant is clamped to zero.
pub fn prevalence_roots(n: f64, d: f64) -> Result<(f64, f64, bool)> {
    if !(d >= MOMENT_DENOMINATOR_FLOOR) {
        return Err(Error::DegenerateMoments { denominator: d });
    }
    let disc = 1.0 - 4.0 * n / d;
    let root_high = 0.5 * (1.0 + disc.max(0.0).sqrt());
    Ok((root_high, 1.0 - root_high, disc < 0.0))
}

/// Invert `M_i = π p_i + (1−π)(1−p_i)` on the row means, then clamp to `[λ̄, 1−λ̄]`.
pub fn init_abilities(
    x: &LabelMatrix,
    pi: f64,
    lambda_bar: f64,
    pi_floor: f64,
) -> Result<Abilities> {
    if !(lambda_bar > 0.0 && lambda_bar < 0.5) {
        return Err(Error::InvalidInput(format!(
            "lambda_bar = {lambda_bar} outside (0, 1/2)"
        )));
    }
    let gap = 2.0 * pi - 1.0;
    if gap.abs() < pi_floor || gap == 0.0 {
        return Err(Error::DegeneratePi {
            gap: gap.abs(),
            floor: pi_floor,
        });
    }
    let counts = x.worker_counts();
    let p = (0..x.workers())
        .map(|i| {
            let row_mean = x.row(i).iter().map(|&v| f64::from(v)).sum::<f64>() / counts[i] as f64;
            let raw = (row_mean - (1.0 - pi)) / gap;
            raw.clamp(lambda_bar, 1.0 - lambda_bar)
        })
        .collect();
    Ok(Abilities::from_raw(p))
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Posterior label probabilities under abilities `p` and a uniform prior.
///
/// Interior abilities go through the log-odds sum `Σ_i (2X_ij − 1) ln(p_i/(1−p_i))`.
/// Boundary abilities fall back to per-component log weights; an item that both
/// components rule out gets 1/2.
pub fn e_step(x: &LabelMatrix, p: &Abilities) -> Result<SoftLabels> {
    if p.len() != x.workers() {
        return Err(Error::DimensionMismatch {
            what: "abilities",
            expected: x.workers(),
            actual: p.len(),
        });
    }
    let ps = p.as_slice();
    let m = x.items();
    if ps.iter().any(|&v| v <= 0.0 || v >= 1.0) {
        let (a, b) = component_logs(x, ps);
        let y = a
            .iter()
            .zip(&b)
            .map(|(&aj, &bj)| {
                if aj == f64::NEG_INFINITY && bj == f64::NEG_INFINITY {
                    0.5
                } else {
                    sigmoid(aj - bj)
                }
            })
            .collect();
        return Ok(SoftLabels::from_raw(y));
    }
    let mut score = vec![0.0; m];
    for (i, &pi) in ps.iter().enumerate() {
        let w = pi.ln() - (1.0 - pi).ln();
        let row = x.row(i);
        match x.mask_row(i) {
            None => {
                for (s, &v) in score.iter_mut().zip(row) {
                    *s += if v == 1 { w } else { -w };
                }
            }
            Some(mk) => {
                for ((s, &v), &obs) in score.iter_mut().zip(row).zip(mk) {
                    if obs {
                        *s += if v == 1 { w } else { -w };
                    }
                }
            }
        }
    }
    Ok(SoftLabels::from_raw(
        score.into_iter().map(sigmoid).collect(),
    ))
}

/// Closed-form ability update: each worker's expected agreement with `y`.
pub fn m_step(x: &LabelMatrix, y: &SoftLabels) -> Result<Abilities> {
    if y.len() != x.items() {
        return Err(Error::DimensionMismatch {
            what: "soft labels",
            expected: x.items(),
            actual: y.len(),
        });
    }
    let ys = y.as_slice();
    let counts = x.worker_counts();
    let p = (0..x.workers())
        .map(|i| {
            let row = x.row(i);
            let agree: f64 = match x.mask_row(i) {
                None => row
                    .iter()
                    .zip(ys)
                    .map(|(&v, &yj)| if v == 1 { yj } else { 1.0 - yj })
                    .sum(),
                Some(mk) => row
                    .iter()
                    .zip(ys)
                    .zip(mk)
                    .filter(|(_, &obs)| obs)
                    .map(|((&v, &yj), _)| if v == 1 { yj } else { 1.0 - yj })
                    .sum(),
            };
            (agree / counts[i] as f64).clamp(0.0, 1.0)
        })
        .collect();
    Ok(Abilities::from_raw(p))
}

/// `m_step` followed by projection onto `[λ, 1−λ]`.
pub fn projected_m_step(x: &LabelMatrix, y: &SoftLabels, lambda: f64) -> Result<Abilities> {
    check_lambda(lambda)?;
    Ok(clamp_abilities(m_step(x, y)?, lambda).0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..0.5).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} outside [0, 1/2)"
        )));
    }
    Ok(())
}

fn clamp_abilities(p: Abilities, lo: f64) -> (Abilities, bool) {
    let hi = 1.0 - lo;
    let mut fired = false;
    let v = p
        .into_vec()
        .into_iter()
        .map(|v| {
            let c = v.clamp(lo, hi);
            fired |= c != v;
            c
        })
        .collect();
    (Abilities::from_raw(v), fired)
}

/// Pick between `(y, p̌)` and `(1−y, 1−p̌)` so the average ability exceeds 1/2,
/// where `p̌` is the un-projected M-step on `y`. A mean of exactly 1/2 flips.
pub fn disambiguate(x: &LabelMatrix, y: &SoftLabels) -> Result<(SoftLabels, Abilities, bool)> {
    let p_check = m_step(x, y)?;
    if p_check.mean() > 0.5 {
        Ok((y.clone(), p_check, false))
    } else {
        Ok((y.complement(), p_check.complement(), true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmMode {
    /// M-step projected onto `[λ, 1−λ]`.
    Projected,
    /// Plain M-step, floored at [`CLASSICAL_EPS`] only to keep log-odds finite.
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub lambda: f64,
    pub lambda_bar: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub mode: EmMode,
    pub pi_floor: f64,
    /// Start from majority-vote labels when the moment initializer is degenerate.
    pub fallback_majority: bool,
    pub record_trace: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            lambda_bar: 1.0 / 6.0,
            max_iters: 20,
            tol: 1e-10,
            mode: EmMode::Projected,
            pi_floor: 0.05,
            fallback_majority: false,
            record_trace: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.lambda_bar > 0.0 && self.lambda_bar < 0.5) {
            return Err(Error::InvalidInput(format!(
                "lambda_bar = {} outside (0, 1/2)",
                self.lambda_bar
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.tol >= 0.0) || !(self.pi_floor >= 0.0) {
            return Err(Error::InvalidInput(
                "tol and pi_floor must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// How `y⁽⁰⁾` was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Initialization {
    Moments { pi: f64 },
    MajorityFallback { reason: String },
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub p: Abilities,
    pub y: SoftLabels,
    pub objective: f64,
    /// The M-step clamp changed at least one ability.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmResult {
    pub y_final: SoftLabels,
    pub p_final: Abilities,
    pub y_raw: SoftLabels,
    pub flipped: bool,
    pub iterations_run: usize,
    pub init: Initialization,
    /// Any M-step clamp fired during the run.
    pub clamp_fired: bool,
    pub trace: Option<Vec<TraceStep>>,
}

/// Moment-initialized EM. Runs with the larger prevalence root; the smaller root
/// gives the mirrored trajectory, which disambiguation maps back.
pub fn run_em(x: &LabelMatrix, cfg: &EmConfig) -> Result<EmResult> {
    cfg.validate()?;
    if x.workers() < 2 || x.items() < 2 {
        return Err(Error::InvalidInput(format!(
            "EM needs n >= 2 and m >= 2, got {} x {}",
            x.workers(),
            x.items()
        )));
    }
    let moment_init = estimate_pi(x).and_then(|est| {
        let p0 = init_abilities(x, est.root_high, cfg.lambda_bar, cfg.pi_floor)?;
        Ok((est.root_high, e_step(x, &p0)?))
    });
    let (y0, init) = match moment_init {
        Ok((pi, y0)) => (y0, Initialization::Moments { pi }),
        Err(e @ (Error::DegenerateMoments { .. } | Error::DegeneratePi { .. }))
            if cfg.fallback_majority =>
        {
            (
                majority_vote(x).to_soft(),
                Initialization::MajorityFallback {
                    reason: e.to_string(),
                },
            )
        }
        Err(e) => return Err(e),
    };
    iterate(x, y0, init, cfg)
}

/// EM from a caller-supplied `y⁽⁰⁾`.
pub fn run_em_from(x: &LabelMatrix, y0: SoftLabels, cfg: &EmConfig) -> Result<EmResult> {
    cfg.validate()?;
    if y0.len() != x.items() {
        return Err(Error::DimensionMismatch {
            what: "initial labels",
            expected: x.items(),
            actual: y0.len(),
        });
    }
    iterate(x, y0, Initialization::Provided, cfg)
}

fn iterate(
    x: &LabelMatrix,
    y0: SoftLabels,
    init: Initialization,
    cfg: &EmConfig,
) -> Result<EmResult> {
    let floor = match cfg.mode {
        EmMode::Projected => cfg.lambda,
        EmMode::Classical => CLASSICAL_EPS,
    };
    let mut y = y0;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut clamp_fired = false;
    let mut iterations_run = 0;
    for _ in 0..cfg.max_iters {
        let (p, clamped) = clamp_abilities(m_step(x, &y)?, floor);
        clamp_fired |= clamped;
        let y_next = e_step(x, &p)?;
        iterations_run += 1;
        let change = y
            .as_slice()
            .iter()
            .zip(y_next.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(t) = trace.as_mut() {
            t.push(TraceStep {
                objective: objective_f(x, &p, &y_next)?,
                p,
                y: y_next.clone(),
                clamped,
            });
        }
        y = y_next;
        if change < cfg.tol {
            break;
        }
    }
    let (y_final, p_final, flipped) = disambiguate(x, &y)?;
    Ok(EmResult {
        y_final,
        p_final,
        y_raw: y,
        flipped,
        iterations_run,
        init,
        clamp_fired,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[u8]]) -> LabelMatrix {
        LabelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ab(v: &[f64]) -> Abilities {
        Abilities::new(v.to_vec()).unwrap()
    }

    fn soft(v: &[f64]) -> SoftLabels {
        SoftLabels::new(v.to_vec()).unwrap()
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&mat(&[&[1], &[1], &[0]])).as_slice(), &[1]);
        assert_eq!(majority_vote(&mat(&[&[1], &[0]])).as_slice(), &[1]);
        assert_eq!(majority_vote(&mat(&[&[0], &[0], &[0]])).as_slice(), &[0]);
    }

    #[test]
    fn majority_with_mask_uses_observed_count() {
        // item 0 has votes 1, 0 and a missing cell; a tie over observed votes goes to 1
        let x = LabelMatrix::with_mask(
            3,
            2,
            vec![1, 1, 0, 1, 0, 0],
            vec![true, true, true, true, false, true],
        )
        .unwrap();
        assert_eq!(majority_vote(&x).as_slice(), &[1, 1]);
    }

    #[test]
    fn pi_from_perfect_workers() {
        let y = [1u8, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let x = mat(&[&y, &y, &y]);
        let est = estimate_pi(&x).unwrap();
        assert_abs_diff_eq!(est.n_hat, 0.21, epsilon = 1e-12);
        assert_abs_diff_eq!(est.d_hat, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.root_high, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(est.root_low, 0.3, epsilon = 1e-12);
        assert_eq!(est.root_high + est.root_low, 1.0);
    }

    #[test]
    fn pi_degenerate_when_votes_split() {
        let x = mat(&[&[0, 0, 0], &[1, 1, 1]]);
        assert!(matches!(
            estimate_pi(&x),
            Err(Error::DegenerateMoments { .. })
        ));
    }

    #[test]
    fn initializer_inverts_row_means() {
        // five items, all labelled 1 by a worker right 4/5 of the time
        let x = mat(&[&[1, 1, 1, 1, 0]]);
        let p = init_abilities(&x, 1.0, 0.01, 0.05).unwrap();
        assert_abs_diff_eq!(p.as_slice()[0], 0.8, epsilon = 1e-12);
        // M = 0.7·0.9 + 0.3·0.1 = 0.66 over 50 items
        let mut row = vec![1u8; 33];
        row.resize(50, 0);
        let p = init_abilities(&mat(&[&row]), 0.7, 0.01, 0.05).unwrap();
        assert_abs_diff_eq!(p.as_slice()[0], 0.9, epsilon = 1e-12);
        let p = init_abilities(&mat(&[&[1, 1, 1, 1, 1]]), 0.99, 1.0 / 6.0, 0.05).unwrap();
        assert_abs_diff_eq!(p.as_slice()[0], 5.0 / 6.0, epsilon = 1e-15);
        assert!(matches!(
            init_abilities(&x, 0.51, 1.0 / 6.0, 0.05),
            Err(Error::DegeneratePi { .. })
        ));
    }

    #[test]
    fn e_step_examples() {
        let x = mat(&[&[1, 0, 1], &[0, 0, 1]]);
        assert_eq!(e_step(&x, &ab(&[0.5, 0.5])).unwrap().as_slice(), &[0.5; 3]);
        let y = e_step(&mat(&[&[1, 1]]), &ab(&[0.8])).unwrap();
        assert_abs_diff_eq!(y.as_slice()[0], 0.8, epsilon = 1e-12);
        let y = e_step(&mat(&[&[1], &[0]]), &ab(&[0.9, 0.9])).unwrap();
        assert_abs_diff_eq!(y.as_slice()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn e_step_boundary_abilities() {
        let x = mat(&[&[1, 0], &[1, 1]]);
        let y = e_step(&x, &ab(&[1.0, 0.6])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.0]);
        // contradictory certainties leave the item undecided
        let y = e_step(&mat(&[&[1], &[0]]), &ab(&[1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[0.5]);
    }

    #[test]
    fn m_step_examples() {
        let x = mat(&[&[1, 0, 1, 1]]);
        assert_eq!(m_step(&x, &soft(&[0.5; 4])).unwrap().as_slice(), &[0.5]);
        assert_abs_diff_eq!(
            m_step(&x, &soft(&[1.0, 0.0, 0.0, 1.0])).unwrap().as_slice()[0],
            0.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn projection_examples() {
        let row: Vec<u8> = (0..50).map(|k| u8::from(k != 0)).collect();
        let x = mat(&[&row]);
        let y = SoftLabels::new(vec![1.0; 50]).unwrap();
        assert_abs_diff_eq!(m_step(&x, &y).unwrap().as_slice()[0], 0.98, epsilon = 1e-12);
        assert_abs_diff_eq!(
            projected_m_step(&x, &y, 0.05).unwrap().as_slice()[0],
            0.95,
            epsilon = 1e-12
        );
        let half = SoftLabels::new(vec![0.5; 50]).unwrap();
        assert_eq!(projected_m_step(&x, &half, 0.3).unwrap().as_slice(), &[0.5]);
        assert_eq!(
            projected_m_step(&x, &y, 0.0).unwrap(),
            m_step(&x, &y).unwrap()
        );
    }

    #[test]
    fn disambiguation_branches() {
        // one worker agreeing on 3 of 5 items under y
        let x = mat(&[&[1, 1, 1, 0, 0]]);
        let y = soft(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let (y1, p1, flipped) = disambiguate(&x, &y).unwrap();
        assert!(!flipped);
        assert_eq!(y1, y);
        assert_abs_diff_eq!(p1.as_slice()[0], 0.6, epsilon = 1e-15);
        let (y2, p2, flipped) = disambiguate(&x, &y.complement()).unwrap();
        assert!(flipped);
        assert_eq!(y2, y);
        assert_abs_diff_eq!(p2.as_slice()[0], 0.6, epsilon = 1e-15);
        // exactly 1/2 takes the flip branch
        let x = mat(&[&[1, 0]]);
        let (_, _, flipped) = disambiguate(&x, &soft(&[1.0, 1.0])).unwrap();
        assert!(flipped);
    }

    #[test]
    fn unanimous_matrix_converges_to_labels() {
        let y = [1u8, 0, 0, 1, 1, 0, 1, 1];
        let x = mat(&[&y, &y, &y, &y]);
        let res = run_em(&x, &EmConfig::default()).unwrap();
        for (a, &b) in res.y_final.as_slice().iter().zip(&y) {
            assert!((a - f64::from(b)).abs() < 1e-6);
        }
        assert!(res.p_final.as_slice().iter().all(|&v| v > 0.99));
        assert!(res.p_final.mean() >= 0.5);
    }

    #[test]
    fn degenerate_init_needs_fallback() {
        let x = mat(&[&[0, 1, 0, 1], &[1, 0, 1, 0]]);
        assert!(matches!(
            run_em(&x, &EmConfig::default()),
            Err(Error::DegenerateMoments { .. })
        ));
        let cfg = EmConfig {
            fallback_majority: true,
            ..EmConfig::default()
        };
        let res = run_em(&x, &cfg).unwrap();
        assert!(matches!(res.init, Initialization::MajorityFallback { .. }));
    }

    #[test]
    fn classical_mode_floors_boundaries() {
        let y = [1u8, 0, 0, 1];
        let x = mat(&[&y, &y, &[1, 1, 0, 0]]);
        let cfg = EmConfig {
            mode: EmMode::Classical,
            fallback_majority: true,
            record_trace: true,
            ..EmConfig::default()
        };
        let res = run_em(&x, &cfg).unwrap();
        assert!(res.clamp_fired);
        for step in res.trace.unwrap() {
            assert!(step.objective.is_finite());
            assert!(step.p.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn config_validation() {
        let bad = EmConfig {
            lambda: 0.5,
            ..EmConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EmConfig {
            max_iters: 0,
            ..EmConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
