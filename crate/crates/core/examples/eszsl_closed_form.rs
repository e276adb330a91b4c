//! Closed-form ESZSL on a toy problem: three training classes described by
//! two attributes, then a new class recognised from its signature alone.

use alnid::linalg::DenseMatrix;
use alnid::zsl::{eszsl_residual, eszsl_scores, predict_eszsl, train_eszsl, Moments, SignatureMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // features x instances; instance i belongs to class i % 3
    let protos = [[1.0, 0.0, 0.2], [0.0, 1.0, 0.1], [1.0, 1.0, 0.9]];
    let m = 30;
    let x = DenseMatrix::from_fn(3, m, |r, c| protos[c % 3][r] + 0.05 * ((c * 7 + r) % 5) as f64);
    let y = DenseMatrix::from_fn(m, 3, |r, c| if r % 3 == c { 1.0 } else { -1.0 });
    let seen = SignatureMatrix::new(
        DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]])?,
        vec!["a".into(), "b".into(), "ab".into()],
    )?;

    let model = train_eszsl(&x, &y, &seen, 1.0, 1.0)?;
    let res = eszsl_residual(&model, &Moments::from_matrices(&x, &y)?, &seen)?;
    println!("V = {:?}", model.v.data());
    println!("normal-equation residual {res:.2e}");

    // an unseen class with neither attribute, next to the seen ones
    let unseen = SignatureMatrix::new(
        DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])?,
        vec!["a".into(), "b".into(), "none".into()],
    )?;
    for (name, q) in [("a-like", [1.0, 0.0, 0.2]), ("b-like", [0.0, 1.0, 0.1]), ("empty", [0.0, 0.0, 0.0])] {
        let scores = eszsl_scores(&model, &q, &unseen)?;
        let best = predict_eszsl(&model, &q, &unseen)?;
        println!("{name:<8} scores {scores:.3?} -> {}", unseen.labels()[best]);
    }
    Ok(())
}
