//! F1, step-wise average precision and fold aggregation on hand-made
//! scores.
//!
//!     cargo run --example metrics

use sirentrack::metrics::{aggregate, auprc, f1, Confusion, EvalReport, ScoredSet};

fn main() -> sirentrack::Result<()> {
    let folds = [
        vec![
            (0.95, true),
            (0.80, true),
            (0.70, false),
            (0.55, true),
            (0.30, false),
            (0.10, false),
        ],
        vec![
            (0.90, true),
            (0.60, false),
            (0.60, true),
            (0.40, true),
            (0.20, false),
            (0.05, false),
        ],
        vec![
            (0.99, true),
            (0.85, true),
            (0.45, false),
            (0.35, false),
            (0.30, true),
            (0.01, false),
        ],
    ];
    let mut reports = Vec::new();
    for (i, pairs) in folds.into_iter().enumerate() {
        let set = ScoredSet::new(pairs)?;
        let c = Confusion::at(&set, 0.5);
        println!(
            "fold {i}: tp {} fp {} tn {} fn {}  F1 {:.4}  AUPRC {:.4}",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            f1(&set, 0.5),
            auprc(&set)?
        );
        reports.push(EvalReport::from_scored(&set)?);
    }
    let agg = aggregate(&reports)?;
    println!(
        "{} folds: F1 {:.4} ± {:.4}, AUPRC {:.4} ± {:.4}",
        agg.folds, agg.f1.mean, agg.f1.std, agg.auprc.mean, agg.auprc.std
    );
    println!("{}", serde_json::to_string_pretty(&reports[0])?);
    Ok(())
}
