//! Plans the nested data-efficiency folds for a training set of 838 clips
//! and shows how small the smallest subsets get.
//!
//!     cargo run --example split_plan

use std::collections::HashSet;

use sirentrack::dataset::{make_splits, Manifest, ManifestEntry};
use sirentrack::features::Label;

fn main() -> sirentrack::Result<()> {
    let entries = (0..838)
        .map(|i| ManifestEntry {
            source_id: format!("clip{i:04}"),
            path: format!("clip{i:04}.wav").into(),
            label: if i % 5 < 2 { Label::Siren } else { Label::Noise },
            duration_s: 3.0,
        })
        .collect();
    let manifest = Manifest::new("train", entries)?;
    let ratios = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 100.0];
    let plan = make_splits(&manifest, &ratios, 10, [0.0, 0.0], 0)?;

    println!("{:>7}  {:>5}  fold 0 sirens", "ratio", "size");
    for r in &plan.ratios {
        let sirens = r.folds[0]
            .iter()
            .filter(|id| id[4..].parse::<usize>().unwrap() % 5 < 2)
            .count();
        println!("{:>6}%  {:>5}  {sirens}", r.ratio, r.size);
    }
    for w in &plan.warnings {
        println!("warning: {w}");
    }

    let folds_of_smallest: HashSet<&Vec<String>> = plan.ratios[0].folds.iter().collect();
    println!(
        "{} distinct smallest subsets across {} folds",
        folds_of_smallest.len(),
        plan.n_folds
    );
    Ok(())
}
