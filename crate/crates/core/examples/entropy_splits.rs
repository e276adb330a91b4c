//! Entropy, split entropy and the best information-gain split on a small
//! hand-made set.

use alnid::dtree::{best_split, class_info, split_entropy, TrainingSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 9 positives, 5 negatives; the binary attribute splits them 6/2 and 3/3
    let mut set = TrainingSet::new(2, vec!["yes".into(), "no".into()]);
    let rows: [(f64, f64, usize, usize); 4] = [(0.0, 1.0, 6, 0), (0.0, 2.0, 0, 2), (1.0, 3.0, 3, 0), (1.0, 4.0, 0, 3)];
    for (a, b, yes, no) in rows {
        for _ in 0..yes {
            set.push(&[a, b], 0)?;
        }
        for _ in 0..no {
            set.push(&[a, b], 1)?;
        }
    }

    let info = class_info(&[9, 5])?;
    let split = split_entropy(&set, 0, 0.5)?;
    println!("info(T)          = {info:.6}");
    println!("info_x(T) on a0  = {split:.6}");
    println!("gain on a0       = {:.6}", info - split);

    for t in [1.5, 2.5, 3.5] {
        println!("gain on a1 <= {t}  = {:.6}", info - split_entropy(&set, 1, t)?);
    }
    let best = best_split(&set, &[0, 1]).expect("informative split");
    println!(
        "best split: a{} <= {} (gain {:.6})",
        best.attribute, best.threshold, best.gain
    );
    Ok(())
}
