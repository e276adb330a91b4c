//! Re-describes every instance by its per-attribute test counts and compares
//! how well original and learned values separate the categories.

use alnid::alnid::{learned_stats, separability_report, training_set, Grouping, LabelTarget};
use alnid::dtree::{build_tree, TreeParams};
use alnid::kdd::{split_zero_shot, ClassTable, FEATURE_NAMES, NUM_FEATURES};
use alnid::relearn_dataset;
use alnid::synthetic::{generate_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_dataset(&SyntheticConfig::default())?;
    let split = split_zero_shot(&data, &ClassTable::kdd99())?;
    let tree = build_tree(&training_set(&split.seen, LabelTarget::Category), TreeParams::default())?;
    let learned = relearn_dataset(&tree, &data)?;

    println!("{:<30}{:>6}{:>6}{:>10}{:>10}", "attribute", "min", "max", "mean", "stddev");
    for a in 0..NUM_FEATURES {
        let s = learned_stats(&learned, a)?;
        println!("{:<30}{:>6}{:>6}{:>10.3}{:>10.3}", FEATURE_NAMES[a], s.min, s.max, s.mean, s.stddev);
    }

    let report = separability_report(&data, &learned, Grouping::Category)?;
    println!("\nFisher ratio by category (original -> learned)");
    for a in &report.attributes {
        let mark = if a.learned_better() { "+" } else { " " };
        println!("{mark} {:<30}{:>12.4}{:>12.4}", a.attribute, a.original_ratio, a.learned_ratio);
    }
    println!("{} of {NUM_FEATURES} attributes improved", report.improved_count());
    Ok(())
}
