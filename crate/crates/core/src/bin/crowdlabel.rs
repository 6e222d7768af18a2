use clap::{Args, Parser, Subcommand};
use crowdlabel::estimators::{majority_vote, run_em, EmConfig, EmMode, Initialization};
use crowdlabel::harness::{
    export_report, load_labels, parse_id_values, parse_keyed_values, run_experiment,
    simulate_trial, to_json_bytes, write_abilities_csv, write_labels_csv, write_soft_labels_csv,
    write_truth_csv, ExportFormat, ScenarioConfig,
};
use crowdlabel::metrics::{ability_errors, ErrorReport};
use crowdlabel::model::{Abilities, GroundTruth, SoftLabels};
use crowdlabel::oracle::{grid_mle, GridSpec};
use crowdlabel::Error;
use serde::Serialize;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "crowdlabel",
    version,
    about = "One-coin Dawid-Skene label aggregation"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiment trials.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat scenario file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<ExportFormat>,
    /// Output file (a directory for `simulate`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one instance of a scenario and write labels.csv, truth.csv and abilities.csv.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Trial id whose derived seed is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run one estimator on a label file; writes item posteriors.
    Estimate {
        labels: PathBuf,
        /// mv, pem or em.
        #[arg(long, default_value = "pem")]
        estimator: String,
        #[command(flatten)]
        em: EmArgs,
        /// Also write worker abilities here (csv format).
        #[arg(long)]
        abilities_out: Option<PathBuf>,
    },
    /// Score estimated labels (and optionally abilities) against the truth.
    Eval {
        /// `item_id,label` table of estimated posteriors.
        #[arg(long)]
        estimates: PathBuf,
        /// `item_id,label` truth table.
        #[arg(long)]
        truth: PathBuf,
        /// `worker_id,ability` table of estimates.
        #[arg(long, requires = "true_abilities")]
        abilities: Option<PathBuf>,
        /// `worker_id,ability` table of true abilities.
        #[arg(long, requires = "abilities")]
        true_abilities: Option<PathBuf>,
    },
    /// Run a Monte Carlo scenario and emit the report.
    Experiment {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Grid maximum likelihood on a tiny label file.
    Oracle {
        labels: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
}

#[derive(Args, Default)]
struct EmArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_bar: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    pi_floor: Option<f64>,
    /// Start from majority vote when the moment initializer is degenerate.
    #[arg(long)]
    fallback_majority: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    /// one_coin, spammer_expert, homogeneous, two_type or custom_csv.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    prevalence: Option<f64>,
    #[arg(long)]
    exact_count: bool,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated fixed abilities.
    #[arg(long, value_delimiter = ',')]
    abilities: Option<Vec<f64>>,
    #[arg(long)]
    ability_lo: Option<f64>,
    #[arg(long)]
    ability_hi: Option<f64>,
    #[arg(long)]
    nu_bar: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    experts: Option<usize>,
    #[arg(long)]
    mu_bar: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    m2: Option<usize>,
    #[arg(long)]
    accuracy_expert: Option<f64>,
    #[arg(long)]
    accuracy_naive: Option<f64>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated: mv, pem, em.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    clt_diagnostic: bool,
}

impl ScenarioArgs {
    fn config(self) -> ScenarioConfig {
        ScenarioConfig {
            kind: self.kind,
            n: self.n,
            m: self.m,
            prevalence: self.prevalence,
            exact_count: self.exact_count.then_some(true),
            trials: self.trials,
            abilities: self.abilities,
            ability_lo: self.ability_lo,
            ability_hi: self.ability_hi,
            nu_bar: self.nu_bar,
            delta: self.delta,
            experts: self.experts,
            mu_bar: self.mu_bar,
            n1: self.n1,
            n2: self.n2,
            m1: self.m1,
            m2: self.m2,
            accuracy_expert: self.accuracy_expert,
            accuracy_naive: self.accuracy_naive,
            labels: self.labels,
            truth: self.truth,
            estimators: self.estimators,
            clt_diagnostic: self.clt_diagnostic.then_some(true),
            ..self.em.config()
        }
    }
}

impl EmArgs {
    fn config(self) -> ScenarioConfig {
        ScenarioConfig {
            lambda: self.lambda,
            lambda_bar: self.lambda_bar,
            max_iters: self.max_iters,
            tol: self.tol,
            pi_floor: self.pi_floor,
            fallback_majority: self.fallback_majority.then_some(true),
            ..Default::default()
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateMoments { .. } | Error::DegeneratePi { .. } => 3,
        Error::TooLarge(_) => 4,
        _ => 2,
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> crowdlabel::Result<()> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct ItemValue<'a> {
    item_id: &'a str,
    label: f64,
}

#[derive(Serialize)]
struct WorkerValue<'a> {
    worker_id: &'a str,
    ability: f64,
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    estimator: &'a str,
    items: Vec<ItemValue<'a>>,
    workers: Option<Vec<WorkerValue<'a>>>,
    iterations: usize,
    flipped: bool,
    init: Option<&'a Initialization>,
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    loglik: f64,
    grid_slack: f64,
    items: Vec<ItemValue<'a>>,
    workers: Vec<WorkerValue<'a>>,
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    errors: ErrorReport,
    linf_ability: Option<f64>,
    mse_ability: Option<f64>,
}

fn items<'a>(ids: &'a [String], y: &SoftLabels) -> Vec<ItemValue<'a>> {
    ids.iter()
        .zip(y.as_slice())
        .map(|(id, &label)| ItemValue { item_id: id, label })
        .collect()
}

fn workers<'a>(ids: &'a [String], p: &Abilities) -> Vec<WorkerValue<'a>> {
    ids.iter()
        .zip(p.as_slice())
        .map(|(id, &ability)| WorkerValue {
            worker_id: id,
            ability,
        })
        .collect()
}

fn run(cli: Cli) -> crowdlabel::Result<()> {
    let file = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let global = ScenarioConfig {
        seed: cli.seed,
        threads: cli.threads,
        format: cli.format,
        out: cli.out.clone(),
        ..Default::default()
    };
    match cli.command {
        Command::Simulate { scenario, trial } => {
            let cfg = file.overlay(scenario.config()).overlay(global);
            let s = cfg.into_scenario()?;
            let inst = simulate_trial(&s, trial)?;
            let dir = cfg.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            write_labels_csv(
                File::create(dir.join("labels.csv"))?,
                &inst.matrix,
                None,
                None,
            )?;
            write_truth_csv(File::create(dir.join("truth.csv"))?, &inst.truth, None)?;
            if let Some(p) = &inst.abilities {
                write_abilities_csv(File::create(dir.join("abilities.csv"))?, p, None)?;
            }
        }
        Command::Estimate {
            labels,
            estimator,
            em,
            abilities_out,
        } => {
            let cfg = file.overlay(em.config()).overlay(global);
            let loaded = load_labels(&labels, None)?;
            let x = &loaded.matrix;
            let (y, p, iterations, flipped, init) = match estimator.as_str() {
                "mv" => (majority_vote(x).to_soft(), None, 0, false, None),
                "pem" | "em" => {
                    let mode = if estimator == "pem" {
                        EmMode::Projected
                    } else {
                        EmMode::Classical
                    };
                    let d = EmConfig::default();
                    let em_cfg = EmConfig {
                        lambda: cfg.lambda.unwrap_or(d.lambda),
                        lambda_bar: cfg.lambda_bar.unwrap_or(d.lambda_bar),
                        max_iters: cfg.max_iters.unwrap_or(d.max_iters),
                        tol: cfg.tol.unwrap_or(d.tol),
                        mode,
                        pi_floor: cfg.pi_floor.unwrap_or(d.pi_floor),
                        fallback_majority: cfg.fallback_majority.unwrap_or(false),
                        record_trace: false,
                    };
                    em_cfg.validate()?;
                    let r = run_em(x, &em_cfg)?;
                    (
                        r.y_final,
                        Some(r.p_final),
                        r.iterations_run,
                        r.flipped,
                        Some(r.init),
                    )
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown estimator {other:?} (mv, pem, em)"
                    )))
                }
            };
            if let (Some(path), Some(p)) = (&abilities_out, &p) {
                write_abilities_csv(File::create(path)?, p, Some(&loaded.worker_ids))?;
            }
            let bytes = match cfg.format.unwrap_or(ExportFormat::Csv) {
                ExportFormat::Csv => {
                    let mut buf = Vec::new();
                    write_soft_labels_csv(&mut buf, &y, Some(&loaded.item_ids))?;
                    buf
                }
                ExportFormat::Json => to_json_bytes(&EstimateOutput {
                    estimator: &estimator,
                    items: items(&loaded.item_ids, &y),
                    workers: p.as_ref().map(|p| workers(&loaded.worker_ids, p)),
                    iterations,
                    flipped,
                    init: init.as_ref(),
                }),
            };
            emit(cfg.out.as_deref(), &bytes)?;
        }
        Command::Eval {
            estimates,
            truth,
            abilities,
            true_abilities,
        } => {
            let cfg = file.overlay(global);
            let truth_rows = parse_id_values(File::open(&truth)?, ["item_id", "label"])?;
            let ids: Vec<String> = truth_rows.iter().map(|(id, _)| id.clone()).collect();
            let y_star = GroundTruth::new(
                truth_rows
                    .iter()
                    .map(|&(_, v)| match v {
                        0.0 => Ok(0),
                        1.0 => Ok(1),
                        v => Err(Error::InvalidInput(format!(
                            "truth label {v} is not 0 or 1"
                        ))),
                    })
                    .collect::<crowdlabel::Result<Vec<u8>>>()?,
            )?;
            let y_hat = SoftLabels::new(parse_keyed_values(
                File::open(&estimates)?,
                ["item_id", "label"],
                &ids,
            )?)?;
            let errors = ErrorReport::score(&y_hat, &y_star)?;
            let (linf_ability, mse_ability) = match (abilities, true_abilities) {
                (Some(est), Some(truth)) => {
                    let rows = parse_id_values(File::open(&truth)?, ["worker_id", "ability"])?;
                    let wids: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
                    let p_star = Abilities::new(rows.into_iter().map(|(_, v)| v).collect())?;
                    let p_hat = Abilities::new(parse_keyed_values(
                        File::open(&est)?,
                        ["worker_id", "ability"],
                        &wids,
                    )?)?;
                    let (a, b) = ability_errors(&p_hat, &p_star)?;
                    (Some(a), Some(b))
                }
                _ => (None, None),
            };
            let out = EvalOutput {
                errors,
                linf_ability,
                mse_ability,
            };
            let bytes = match cfg.format.unwrap_or(ExportFormat::Json) {
                ExportFormat::Json => to_json_bytes(&out),
                ExportFormat::Csv => {
                    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.16e}"));
                    format!(
                        "labeling_error,clustering_error,hard_labeling_error,linf_ability,mse_ability\n{:.16e},{:.16e},{:.16e},{},{}\n",
                        errors.labeling_error,
                        errors.clustering_error,
                        errors.hard_labeling_error,
                        cell(linf_ability),
                        cell(mse_ability)
                    )
                    .into_bytes()
                }
            };
            emit(cfg.out.as_deref(), &bytes)?;
        }
        Command::Experiment { scenario } => {
            let cfg = file.overlay(scenario.config()).overlay(global);
            let s = cfg.into_scenario()?;
            let report = run_experiment(&s)?;
            emit(
                cfg.out.as_deref(),
                &export_report(&report, cfg.format.unwrap_or(ExportFormat::Json)),
            )?;
        }
        Command::Oracle { labels, step } => {
            let cfg = file.overlay(global);
            let loaded = load_labels(&labels, None)?;
            let opt = grid_mle(
                &loaded.matrix,
                &GridSpec {
                    step,
                    ..GridSpec::default()
                },
            )?;
            let bytes = match cfg.format.unwrap_or(ExportFormat::Json) {
                ExportFormat::Json => to_json_bytes(&OracleOutput {
                    loglik: opt.loglik,
                    grid_slack: opt.grid_slack,
                    items: items(&loaded.item_ids, &opt.y),
                    workers: workers(&loaded.worker_ids, &opt.p),
                }),
                ExportFormat::Csv => {
                    let mut buf = Vec::new();
                    write_soft_labels_csv(&mut buf, &opt.y, Some(&loaded.item_ids))?;
                    buf
                }
            };
            emit(cfg.out.as_deref(), &bytes)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
