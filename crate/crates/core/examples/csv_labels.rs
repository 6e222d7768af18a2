//! Sparse label triples in, soft labels and abilities out.

use crowdlabel::harness::{parse_labels, parse_truth, write_abilities_csv, write_soft_labels_csv};
use crowdlabel::prelude::*;
use std::io::stdout;

const LABELS: &str = "\
worker_id,item_id,label
alice,q1,1
alice,q2,0
alice,q3,1
alice,q4,1
bob,q1,1
bob,q2,0
bob,q4,1
carol,q1,0
carol,q2,0
carol,q3,1
dave,q2,1
dave,q3,1
dave,q4,0
";

const TRUTH: &str = "item_id,label\nq1,1\nq2,0\nq3,1\nq4,1\n";

fn main() -> Result<()> {
    let loaded = parse_labels(LABELS.as_bytes())?;
    let x = &loaded.matrix;
    println!(
        "{} workers, {} items, {} missing cells",
        x.workers(),
        x.items(),
        x.mask().map_or(0, |m| m.iter().filter(|o| !**o).count())
    );

    let cfg = EmConfig {
        fallback_majority: true,
        ..EmConfig::default()
    };
    let fit = run_em(x, &cfg)?;
    write_soft_labels_csv(stdout(), &fit.y_final, Some(&loaded.item_ids))?;
    write_abilities_csv(stdout(), &fit.p_final, Some(&loaded.worker_ids))?;

    let truth = parse_truth(TRUTH.as_bytes(), &loaded.item_ids)?;
    println!(
        "labeling error {:.4}",
        labeling_error(&fit.y_final, &truth)?
    );
    Ok(())
}
