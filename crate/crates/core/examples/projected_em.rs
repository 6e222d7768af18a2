//! Projected EM on workers of mixed quality, with the per-iteration trace.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let (n, m) = (30, 3000);
    let p_star = sample_uniform_abilities(n, 0.35, 0.9, Seed(1))?;
    let truth = sample_truth(m, 0.3, false, Seed(2))?;
    let x = sample_one_coin(&p_star, &truth, Seed(3))?;

    let cfg = EmConfig {
        lambda: 0.02,
        record_trace: true,
        ..EmConfig::default()
    };
    let fit = run_em(&x, &cfg)?;
    println!("init: {:?}", fit.init);
    for (t, step) in fit.trace.iter().flatten().enumerate() {
        println!(
            "iter {t:>2}  F = {:.6}  clamped = {}",
            step.objective, step.clamped
        );
    }

    let errors = ErrorReport::score(&fit.y_final, &truth)?;
    let (linf, mse) = ability_errors(&fit.p_final, &p_star)?;
    println!(
        "{} iterations, flipped = {}, labeling error {:.4}, clustering error {:.4}",
        fit.iterations_run, fit.flipped, errors.labeling_error, errors.clustering_error
    );
    println!("ability error: max {linf:.4}, mse {mse:.2e}");

    // Workers below 1/2 are adversarial, not useless: EM keeps their signal.
    let worst = p_star.as_slice().iter().cloned().fold(1.0, f64::min);
    println!("weakest true ability {worst:.3}");
    Ok(())
}
