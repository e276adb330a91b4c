//! The whole pipeline as the `alnid report` command runs it, on synthetic
//! records written to a temporary directory.
//!
//! ```text
//! cargo run --release --example zero_shot -- [out-dir]
//! ```

use alnid::pipeline::{self, RunConfig};
use alnid::synthetic::{generate_text, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "zero_shot_run".into());
    let records = std::env::temp_dir().join("alnid_zero_shot_records.txt");
    std::fs::write(&records, generate_text(&SyntheticConfig::default()))?;

    let cfg = RunConfig {
        data: Some(records),
        out: out.into(),
        ..RunConfig::default()
    };
    cfg.validate()?;
    let data = pipeline::load(&cfg)?;
    let report = pipeline::run_all(&cfg, &data)?;

    let t = &report.train;
    println!("tree: {} leaves, depth {}, seen accuracy {:.4}", t.leaves, t.depth, t.accuracy);
    println!(
        "learned attributes: {} of 12 separate categories better",
        report.relearn.improved_attributes
    );
    let z = &report.zsl;
    println!("{} unseen instances", z.unseen_instances);
    let mut rows = vec![("learned", &z.learned)];
    if let Some(b) = &z.baseline {
        rows.push(("original", b));
    }
    for (name, e) in rows {
        println!(
            "{name:<9} eszsl {:.4}  k-NN {:.4}  (gamma {}, lambda {})",
            e.eszsl.overall_accuracy, e.knn.overall_accuracy, e.gamma, e.lambda
        );
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
