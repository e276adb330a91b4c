//! Loads records (a path, or synthetic ones) and prints the class census,
//! the seen/unseen split and the original attribute statistics.
//!
//! ```text
//! cargo run --example census -- [kddcup.data_10_percent.gz]
//! ```

use alnid::kdd::{
    attribute_stats, census, census_mismatches, open_dataset, split_zero_shot, ClassTable,
    FEATURE_NAMES, NUM_FEATURES,
};
use alnid::synthetic::{generate_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = match std::env::args().nth(1) {
        Some(p) => open_dataset(p.as_ref())?,
        None => generate_dataset(&SyntheticConfig::default())?,
    };
    let table = ClassTable::kdd99();
    let rows = census(&data, &table);
    println!("{:<18}{:<8}{:>10}", "class", "category", "count");
    for r in &rows {
        println!("{:<18}{:<8}{:>10}", r.class, r.category.as_str(), r.count);
    }
    let off = census_mismatches(&rows, &table);
    println!("{} instances, {} classes differ from the reference counts", data.len(), off.len());

    let split = split_zero_shot(&data, &table)?;
    println!("seen {}, unseen {}", split.seen.len(), split.unseen.len());

    println!("\n{:<30}{:>14}{:>14}{:>14}{:>14}", "attribute", "min", "max", "mean", "stddev");
    for a in 0..NUM_FEATURES {
        let s = attribute_stats(&data, a)?;
        println!(
            "{:<30}{:>14}{:>14}{:>14.3}{:>14.3}",
            FEATURE_NAMES[a], s.min, s.max, s.mean, s.stddev
        );
    }
    Ok(())
}
