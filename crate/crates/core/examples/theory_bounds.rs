//! Error bounds for a population, next to the error EM actually reaches.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let (n, m, lambda) = (25, 4000, 0.05);
    for nu_bar in [0.1, 0.2, 0.4] {
        let p = make_spammer_expert(n, nu_bar)?;
        let stats = crowd_stats(&p, lambda)?;
        let bounds = TheoryBounds::compute(n, m, &stats)?;

        let truth = sample_truth(m, 0.3, true, Seed(21))?;
        let x = sample_one_coin(&p, &truth, Seed(22))?;
        let cfg = EmConfig {
            lambda,
            ..EmConfig::default()
        };
        let fit = run_em(&x, &cfg)?;
        let err = labeling_error(&fit.y_final, &truth)?;

        println!("nu_bar {:.3}  mu_bar {:.3}", stats.nu_bar, stats.mu_bar);
        println!("  upper exp(-n nu/8)  {:.3e}", bounds.upper_nu);
        println!("  upper combined      {:.3e}", bounds.upper_combined);
        println!("  upper projected EM  {:.3e}", bounds.upper_pem);
        match bounds.lower {
            Some(l) => println!("  lower ({:?})  {:.3e}", l.regime, l.value),
            None => println!("  lower: n too small"),
        }
        println!("  observed error      {err:.3e}");
        println!("  conditions {:?}", bounds.conditions);
    }
    Ok(())
}
