//! Grows a tree over the seen classes of synthetic records and prints its
//! rules and the path of one instance.

use alnid::alnid::{training_set, LabelTarget};
use alnid::dtree::{build_tree, TreeParams};
use alnid::kdd::{split_zero_shot, ClassTable, FEATURE_NAMES};
use alnid::synthetic::{generate_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_dataset(&SyntheticConfig::default())?;
    let split = split_zero_shot(&data, &ClassTable::kdd99())?;
    let set = training_set(&split.seen, LabelTarget::Category);
    let tree = build_tree(&set, TreeParams::default())?;

    let hits = (0..set.len()).filter(|&i| tree.predict(set.row(i)) == set.label(i)).count();
    println!(
        "{} nodes, {} leaves, depth {}, training accuracy {:.4}",
        tree.node_count(),
        tree.leaf_count(),
        tree.depth(),
        hits as f64 / set.len() as f64
    );
    if let Some(a) = tree.root_attribute() {
        println!("root tests {}", FEATURE_NAMES[a]);
    }
    for rule in tree.extract_rules() {
        println!("{rule}");
    }

    let x = split.seen[0].features;
    println!("\npath of the first seen instance ({}):", split.seen[0].class_name());
    for step in tree.trace_path(&x) {
        println!("  {step:?}");
    }
    println!("  -> {}", tree.predict_label(&x));
    Ok(())
}
