//! Nearest-neighbour matching of learned attribute vectors, against category
//! signatures and against individual seen instances.

use alnid::alnid::{training_set, LabelTarget};
use alnid::dtree::{build_tree, TreeParams};
use alnid::kdd::{split_zero_shot, Category, ClassTable};
use alnid::synthetic::{generate_dataset, SyntheticConfig};
use alnid::zsl::{build_signature_matrix, evaluate, knn_predict, InstanceKnn};
use alnid::relearn_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_dataset(&SyntheticConfig::default())?;
    let split = split_zero_shot(&data, &ClassTable::kdd99())?;
    let tree = build_tree(&training_set(&split.seen, LabelTarget::Category), TreeParams::default())?;
    let seen: Vec<_> = relearn_dataset(&tree, &split.seen)?.iter().map(|l| (l.as_f64(), l.category.index())).collect();
    let unseen = relearn_dataset(&tree, &split.unseen)?;

    let names: Vec<String> = Category::ALL.iter().map(|c| c.to_string()).collect();
    let sig = build_signature_matrix(seen.iter().map(|(x, g)| (x.as_slice(), *g)), names.clone())?;
    for (j, label) in sig.labels().iter().enumerate() {
        println!("{label:<7} {:.2?}", sig.column(j));
    }
    let knn = InstanceKnn::fit(seen.iter().map(|(x, g)| (x.as_slice(), *g)), names.len())?;
    println!("{} seen instances, {} distinct learned vectors", knn.instances(), knn.distinct_points());

    let truth: Vec<&str> = unseen.iter().map(|l| l.category.as_str()).collect();
    let mut by_sig = Vec::new();
    let mut by_inst = Vec::new();
    for l in &unseen {
        let x = l.as_f64();
        by_sig.push(names[knn_predict(&x, &sig, 1)?].as_str());
        by_inst.push(names[knn.predict(&x, 3)?].as_str());
    }
    let labels: Vec<&str> = names.iter().map(String::as_str).collect();
    for (mode, pred) in [("signature 1-NN", &by_sig), ("instance 3-NN", &by_inst)] {
        let r = evaluate(pred, &truth, &labels)?;
        println!("\n{mode}: accuracy {:.4} on {} unseen", r.overall_accuracy, r.total);
        print!("{}", r.confusion_csv());
    }
    Ok(())
}
