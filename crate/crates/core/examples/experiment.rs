//! A Monte Carlo experiment: several estimators over seeded trials, summarized
//! and exported as JSON and CSV.

use crowdlabel::estimators::{EmConfig, EmMode};
use crowdlabel::harness::{
    export_report, run_experiment, AbilitySource, EstimatorSpec, ExportFormat, Population, Scenario,
};
use crowdlabel::simulate::Seed;

fn main() -> crowdlabel::Result<()> {
    let scenario = Scenario {
        population: Population::OneCoin {
            abilities: AbilitySource::Uniform { lo: 0.4, hi: 0.85 },
        },
        n: 20,
        m: 1500,
        prevalence: 0.3,
        exact_count: false,
        trials: 12,
        master_seed: Seed(2024),
        estimators: vec![
            EstimatorSpec::majority(),
            EstimatorSpec::em("pem", EmConfig::default()),
            EstimatorSpec::em(
                "em",
                EmConfig {
                    mode: EmMode::Classical,
                    ..EmConfig::default()
                },
            ),
        ],
        clt_diagnostic: false,
        threads: None,
    };
    let report = run_experiment(&scenario)?;

    for a in &report.aggregates {
        let mean =
            |s: &Option<crowdlabel::harness::Summary>| s.as_ref().map_or(f64::NAN, |s| s.mean);
        println!(
            "{:<4} error {:.4}  clustering {:.4}  ability mse {:.2e}  exact {}/{}  failures {}",
            a.estimator,
            mean(&a.labeling_error),
            mean(&a.clustering_error),
            mean(&a.mse_ability),
            a.exact_trials,
            a.trials,
            a.failures
        );
    }

    let csv = export_report(&report, ExportFormat::Csv);
    let json = export_report(&report, ExportFormat::Json);
    println!(
        "csv: {} lines, json: {} bytes",
        csv.iter().filter(|&&b| b == b'\n').count(),
        json.len()
    );
    print!(
        "{}",
        String::from_utf8_lossy(&csv)
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!();
    Ok(())
}
