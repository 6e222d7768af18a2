//! Majority vote against a few perfect experts hidden among spammers.
//!
//! With `⌈n^δ⌉` experts the vote error tends to 1/2 below δ = 1/2, to Φ(−1)
//! at δ = 1/2 and to 0 above it. The EM estimator recovers the labels in all three.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let (n, m) = (400, 2000);
    println!("delta  experts  mv_error  limit   em_error");
    for delta in [0.3, 0.5, 0.8] {
        let p = make_experts_power(n, delta)?;
        let experts = p.as_slice().iter().filter(|&&v| v == 1.0).count();
        let truth = sample_truth(m, 0.3, true, Seed(11))?;
        let x = sample_one_coin(&p, &truth, Seed(12))?;

        let mv = labeling_error(&majority_vote(&x).to_soft(), &truth)?;
        let em = run_em(&x, &EmConfig::default())?;
        let em_err = labeling_error(&em.y_final, &truth)?;
        println!(
            "{delta:.1}    {experts:>4}     {mv:.4}    {:.4}  {em_err:.2e}",
            mv_asymptotic_error(delta)?
        );
    }
    Ok(())
}
