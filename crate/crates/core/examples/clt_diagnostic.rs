//! Standardized ability residuals and their Kolmogorov–Smirnov distance to N(0, 1).
//!
//! Abilities are drawn above 1/2. For a crowd centred on 1/2 the estimator
//! often returns the mirrored solution and the residuals are not centred.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let (n, m) = (20, 20_000);
    let mut pooled = Vec::new();
    for t in 0..10 {
        let seed = derive_trial_seed(Seed(77), t);
        let p_star = sample_uniform_abilities(n, 0.55, 0.85, derive_trial_seed(seed, 1))?;
        let truth = sample_truth(m, 0.3, true, derive_trial_seed(seed, 2))?;
        let x = sample_one_coin(&p_star, &truth, derive_trial_seed(seed, 3))?;
        match run_em(&x, &EmConfig::default()) {
            Ok(fit) => pooled.extend(clt_residuals(&fit.p_final, &p_star, m)?),
            Err(e) => println!("trial {t}: {e}"),
        }
    }
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let var = pooled.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / pooled.len() as f64;
    println!(
        "{} residuals, mean {mean:.3}, variance {var:.3}",
        pooled.len()
    );
    println!("KS distance {:.4}", ks_statistic_normal(&pooled));
    Ok(())
}
