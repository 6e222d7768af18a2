//! The moment initializer: prevalence roots from vote-share moments, then
//! the starting abilities and soft labels.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let p = Abilities::new(vec![0.9, 0.8, 0.75, 0.7, 0.65, 0.6, 0.85, 0.55])?;
    for pi in [0.2, 0.35, 0.5] {
        let truth = sample_truth(5000, pi, true, Seed(5))?;
        let x = sample_one_coin(&p, &truth, Seed(6))?;
        let est = estimate_pi(&x)?;
        println!(
            "pi = {pi:.2}: roots ({:.4}, {:.4})  N = {:.5}  D = {:.5}  gap {:.4}{}",
            est.root_low,
            est.root_high,
            est.n_hat,
            est.d_hat,
            est.gap(),
            if est.discriminant_clamped {
                "  (clamped)"
            } else {
                ""
            },
        );
        match run_em(&x, &EmConfig::default()) {
            Ok(fit) => println!("  em error {:.4}", labeling_error(&fit.y_final, &truth)?),
            Err(e) => {
                println!("  refused: {e}");
                let cfg = EmConfig {
                    fallback_majority: true,
                    ..EmConfig::default()
                };
                let fit = run_em(&x, &cfg)?;
                println!(
                    "  with majority fallback: error {:.4}",
                    labeling_error(&fit.y_final, &truth)?
                );
            }
        }
    }
    Ok(())
}
