//! Flat scenario files.
//!
//! A scenario file is TOML restricted to top-level `key = value` pairs (no
//! tables). Values are integers, floats, booleans, strings or arrays of those.
//!
//! | key | meaning |
//! |-----|---------|
//! | `kind` | `one_coin`, `spammer_expert`, `homogeneous`, `two_type`, `custom_csv` |
//! | `n`, `m` | workers, items |
//! | `prevalence`, `exact_count` | truth prevalence and exact-count flag |
//! | `trials`, `seed`, `threads` | run size, master seed, trial parallelism |
//! | `abilities` | fixed one-coin abilities (array) |
//! | `ability_lo`, `ability_hi` | per-trial uniform one-coin abilities |
//! | `nu_bar`, `delta`, `experts` | spammer/expert sizing (one of them) |
//! | `mu_bar` | homogeneous ability |
//! | `n1`, `n2`, `m1`, `m2`, `accuracy_expert`, `accuracy_naive` | two-type groups |
//! | `labels`, `truth` | CSV paths for `custom_csv` |
//! | `estimators` | array of `mv`, `pem` (projected EM), `em` (classical EM) |
//! | `lambda`, `lambda_bar`, `max_iters`, `tol`, `pi_floor`, `fallback_majority` | EM settings |
//! | `clt_diagnostic` | pool ability residuals and report their KS distance |
//! | `format`, `out` | report format (`json`/`csv`) and output path |
//!
//! Every key is also a command-line flag; flags override the file.

use super::{AbilitySource, EstimatorSpec, ExpertSize, ExportFormat, Population, Scenario};
use crate::error::{Error, Result};
use crate::estimators::{EmConfig, EmMode};
use crate::simulate::{Seed, TwoTypeSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub prevalence: Option<f64>,
    pub exact_count: Option<bool>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub abilities: Option<Vec<f64>>,
    pub ability_lo: Option<f64>,
    pub ability_hi: Option<f64>,
    pub nu_bar: Option<f64>,
    pub delta: Option<f64>,
    pub experts: Option<usize>,
    pub mu_bar: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub accuracy_expert: Option<f64>,
    pub accuracy_naive: Option<f64>,
    pub labels: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub estimators: Option<Vec<String>>,
    pub lambda: Option<f64>,
    pub lambda_bar: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub pi_floor: Option<f64>,
    pub fallback_majority: Option<bool>,
    pub clt_diagnostic: Option<bool>,
    pub format: Option<ExportFormat>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $over:ident, $($field:ident),* $(,)?) => {
        ScenarioConfig { $($field: $over.$field.or($base.$field)),* }
    };
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ScenarioConfig) -> ScenarioConfig {
        let base = self;
        overlay!(
            base,
            over,
            kind,
            n,
            m,
            prevalence,
            exact_count,
            trials,
            seed,
            threads,
            abilities,
            ability_lo,
            ability_hi,
            nu_bar,
            delta,
            experts,
            mu_bar,
            n1,
            n2,
            m1,
            m2,
            accuracy_expert,
            accuracy_naive,
            labels,
            truth,
            estimators,
            lambda,
            lambda_bar,
            max_iters,
            tol,
            pi_floor,
            fallback_majority,
            clt_diagnostic,
            format,
            out,
        )
    }

    fn em_config(&self, mode: EmMode) -> EmConfig {
        let d = EmConfig::default();
        EmConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            lambda_bar: self.lambda_bar.unwrap_or(d.lambda_bar),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            mode,
            pi_floor: self.pi_floor.unwrap_or(d.pi_floor),
            fallback_majority: self.fallback_majority.unwrap_or(d.fallback_majority),
            record_trace: false,
        }
    }

    /// One estimator by name: `mv`, `pem` or `em`.
    pub fn estimator(&self, name: &str) -> Result<EstimatorSpec> {
        match name {
            "mv" => Ok(EstimatorSpec::majority()),
            "pem" => Ok(EstimatorSpec::em("pem", self.em_config(EmMode::Projected))),
            "em" => Ok(EstimatorSpec::em("em", self.em_config(EmMode::Classical))),
            other => Err(Error::InvalidInput(format!(
                "unknown estimator {other:?} (mv, pem, em)"
            ))),
        }
    }

    fn population(&self) -> Result<(Population, Option<usize>, Option<usize>)> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::InvalidInput(format!("missing key {key:?}")))
        };
        let kind = self.kind.as_deref().unwrap_or("one_coin");
        Ok(match kind {
            "one_coin" => {
                match (&self.abilities, self.ability_lo, self.ability_hi) {
                    (Some(a), None, None) => (
                        Population::OneCoin {
                            abilities: AbilitySource::Fixed {
                                abilities: a.clone(),
                            },
                        },
                        Some(a.len()),
                        None,
                    ),
                    (None, Some(lo), Some(hi)) => (
                        Population::OneCoin {
                            abilities: AbilitySource::Uniform { lo, hi },
                        },
                        None,
                        None,
                    ),
                    _ => return Err(Error::InvalidInput(
                        "one_coin needs either `abilities` or both `ability_lo` and `ability_hi`"
                            .into(),
                    )),
                }
            }
            "spammer_expert" => {
                let experts = match (self.nu_bar, self.delta, self.experts) {
                    (Some(nu_bar), None, None) => ExpertSize::NuBar { nu_bar },
                    (None, Some(delta), None) => ExpertSize::Power { delta },
                    (None, None, Some(experts)) => ExpertSize::Count { experts },
                    _ => {
                        return Err(Error::InvalidInput(
                            "spammer_expert needs exactly one of `nu_bar`, `delta`, `experts`"
                                .into(),
                        ))
                    }
                };
                (Population::SpammerExpert { experts }, None, None)
            }
            "homogeneous" => (
                Population::Homogeneous {
                    mu_bar: need(self.mu_bar, "mu_bar")?,
                },
                None,
                None,
            ),
            "two_type" => {
                let missing = |key: &str| Error::InvalidInput(format!("missing key {key:?}"));
                let mut spec = TwoTypeSpec::standard(
                    self.n1.ok_or_else(|| missing("n1"))?,
                    self.n2.ok_or_else(|| missing("n2"))?,
                    self.m1.ok_or_else(|| missing("m1"))?,
                    self.m2.ok_or_else(|| missing("m2"))?,
                );
                spec.accuracy_expert = self.accuracy_expert.unwrap_or(spec.accuracy_expert);
                spec.accuracy_naive = self.accuracy_naive.unwrap_or(spec.accuracy_naive);
                let (n, m) = (spec.workers(), spec.items());
                (Population::TwoType { spec }, Some(n), Some(m))
            }
            "custom_csv" => {
                let labels = self
                    .labels
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("custom_csv needs `labels`".into()))?;
                let truth = self
                    .truth
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("custom_csv needs `truth`".into()))?;
                let loaded = super::load_labels(&labels, None)?;
                let (n, m) = (loaded.matrix.workers(), loaded.matrix.items());
                (Population::CustomCsv { labels, truth }, Some(n), Some(m))
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown scenario kind {other:?}"
                )))
            }
        })
    }

    /// Resolve into a validated scenario.
    pub fn into_scenario(&self) -> Result<Scenario> {
        let (population, implied_n, implied_m) = self.population()?;
        let pick = |given: Option<usize>, implied: Option<usize>, key: &str| -> Result<usize> {
            match (given, implied) {
                (Some(g), Some(i)) if g != i => Err(Error::InvalidInput(format!(
                    "`{key}` = {g} conflicts with the population size {i}"
                ))),
                (Some(v), _) | (None, Some(v)) => Ok(v),
                (None, None) => Err(Error::InvalidInput(format!("missing key {key:?}"))),
            }
        };
        let n = pick(self.n, implied_n, "n")?;
        let m = pick(self.m, implied_m, "m")?;
        let names = self
            .estimators
            .clone()
            .unwrap_or_else(|| vec!["mv".to_string(), "pem".to_string()]);
        let estimators = names
            .iter()
            .map(|s| self.estimator(s))
            .collect::<Result<Vec<_>>>()?;
        let scenario = Scenario {
            population,
            n,
            m,
            prevalence: self.prevalence.unwrap_or(0.5),
            exact_count: self.exact_count.unwrap_or(false),
            trials: self.trials.unwrap_or(1),
            master_seed: Seed(self.seed.unwrap_or(0)),
            estimators,
            clt_diagnostic: self.clt_diagnostic.unwrap_or(false),
            threads: self.threads,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
