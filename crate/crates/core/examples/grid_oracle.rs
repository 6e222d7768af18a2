//! Brute-force maximum likelihood on a tiny instance, compared with EM.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let p_star = Abilities::new(vec![0.9, 0.8, 0.7])?;
    let truth = sample_truth(8, 0.5, false, Seed(31))?;
    let x = sample_one_coin(&p_star, &truth, Seed(32))?;

    let opt = grid_mle(&x, &GridSpec::default())?;
    let cfg = EmConfig {
        fallback_majority: true,
        ..EmConfig::default()
    };
    let em = run_em(&x, &cfg)?;

    println!(
        "grid  p = {:?}  loglik {:.5}  slack {:.5}",
        opt.p.as_slice(),
        opt.loglik,
        opt.grid_slack
    );
    println!(
        "em    p = {:.3?}  loglik {:.5}",
        em.p_final.as_slice(),
        marginal_loglik(&x, &em.p_final)?
    );
    println!(
        "hard-label disagreement {:.3}",
        oracle_agreement(&em, &opt.y)?
    );
    println!("truth        {:?}", truth.as_slice());
    println!("grid labels  {:?}", harden(&opt.y).as_slice());
    println!("em labels    {:?}", harden(&em.y_final).as_slice());
    Ok(())
}
