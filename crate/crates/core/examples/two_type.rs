//! Two worker groups, each expert on its own item type and guessing on the other.
//! The one-coin model is misspecified here; its abilities are item averages.

use crowdlabel::prelude::*;

fn main() -> Result<()> {
    let spec = TwoTypeSpec::standard(20, 20, 500, 500);
    let truth = sample_truth(spec.items(), 0.4, true, Seed(41))?;
    let x = sample_two_type(&spec, &truth, Seed(42))?;

    let mv = labeling_error(&majority_vote(&x).to_soft(), &truth)?;
    let fit = run_em(&x, &EmConfig::default())?;
    let em = labeling_error(&fit.y_final, &truth)?;
    println!("majority vote error {mv:.4}");
    println!("projected EM error  {em:.4}");

    let (first, second) = fit.p_final.as_slice().split_at(spec.n1);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "fitted ability, group 1 {:.3}, group 2 {:.3} (item average {:.3})",
        mean(first),
        mean(second),
        (spec.accuracy_expert + spec.accuracy_naive) / 2.0
    );
    Ok(())
}
