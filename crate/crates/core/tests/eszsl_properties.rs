mod common;

use alnid::linalg::{solve, DenseMatrix};
use alnid::zsl::{
    build_signature_matrix, eszsl_residual, evaluate, knn_predict, predict_eszsl, train_eszsl,
    InstanceKnn, Moments, SignatureMatrix,
};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(rows: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

fn nested(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn matrix_strategy(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(-10.0..10.0f64, c), r)
    })
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

proptest! {
    #[test]
    fn matmul_matches_triple_loop(a in matrix_strategy(6), c in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = a[0].len();
        let b: Vec<Vec<f64>> = (0..k).map(|_| (0..c).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let got = dense(&a).matmul(&dense(&b)).unwrap();
        prop_assert!(max_abs_diff(&nested(&got), &mat_mul(&a, &b)) <= 1e-12);
    }

    #[test]
    fn product_transpose_identity(a in matrix_strategy(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = a[0].len();
        let b: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let (a, b) = (dense(&a), dense(&b));
        let lhs = a.matmul(&b).unwrap().transpose();
        let rhs = b.transpose().matmul(&a.transpose()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().frobenius_norm() <= 1e-12);
    }

    #[test]
    fn spd_solve_residual(a in matrix_strategy(6), shift in 0.01..5.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = dense(&a);
        let spd = a.matmul(&a.transpose()).unwrap().add_scaled_identity(shift).unwrap();
        let n = spd.rows();
        let b = DenseMatrix::from_fn(n, 2, |_, _| rng.gen_range(-3.0..3.0));
        let x = solve(&spd, &b).unwrap();
        let r = spd.matmul(&x).unwrap().sub(&b).unwrap().frobenius_norm();
        prop_assert!(r <= 1e-8 * (1.0 + b.frobenius_norm()));
    }

    #[test]
    fn general_solve_residual(a in matrix_strategy(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = a.len();
        // diagonally dominant, not symmetric
        let m = DenseMatrix::from_fn(n, n, |r, c| {
            if r == c { 20.0 + rng.gen_range(0.0..1.0) } else { a[r][c % a[r].len()] }
        });
        let b = DenseMatrix::from_fn(n, 1, |r, _| r as f64 - 1.5);
        let x = solve(&m, &b).unwrap();
        let r = m.matmul(&x).unwrap().sub(&b).unwrap().frobenius_norm();
        prop_assert!(r <= 1e-8 * (1.0 + b.frobenius_norm()));
    }

    #[test]
    fn eszsl_satisfies_normal_equations_and_minimizes(seed in any::<u64>(), gi in 0usize..3, li in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = [0.1, 1.0, 10.0];
        let (x, y, s) = random_eszsl_problem(&mut rng);
        let sig = SignatureMatrix::new(dense(&s), labels(s[0].len())).unwrap();
        let model = train_eszsl(&dense(&x), &dense(&y), &sig, grid[gi], grid[li]).unwrap();
        let moments = Moments::from_matrices(&dense(&x), &dense(&y)).unwrap();
        prop_assert!(eszsl_residual(&model, &moments, &sig).unwrap() <= 1e-8);
        let oracle = eszsl_by_minimization(&x, &y, &s, grid[gi], grid[li]);
        prop_assert!(max_abs_diff(&nested(&model.v), &oracle) <= 1e-4);
    }

    #[test]
    fn streamed_moments_equal_explicit_products(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, _) = random_eszsl_problem(&mut rng);
        let explicit = Moments::from_matrices(&dense(&x), &dense(&y)).unwrap();
        let cols: Vec<Vec<f64>> = transpose(&x);
        let lab: Vec<usize> = y.iter().map(|r| r.iter().position(|&v| v == 1.0).unwrap()).collect();
        let streamed = Moments::from_labeled(
            cols.iter().zip(&lab).map(|(c, &l)| (c.as_slice(), l)),
            x.len(),
            y[0].len(),
        ).unwrap();
        prop_assert!(explicit.gram.sub(&streamed.gram).unwrap().frobenius_norm() <= 1e-9);
        prop_assert!(explicit.xy.sub(&streamed.xy).unwrap().frobenius_norm() <= 1e-9);
    }

    #[test]
    fn argmax_ignores_positive_signature_scaling(seed in any::<u64>(), factor in 0.01..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, s) = random_eszsl_problem(&mut rng);
        let sig = SignatureMatrix::new(dense(&s), labels(s[0].len())).unwrap();
        let model = train_eszsl(&dense(&x), &dense(&y), &sig, 1.0, 1.0).unwrap();
        let query: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let a = predict_eszsl(&model, &query, &sig).unwrap();
        let b = predict_eszsl(&model, &query, &sig.scaled(factor)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn knn_matches_exhaustive_distances(
        cols in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 1..8),
        x in prop::collection::vec(0.0..1.0f64, 3),
        k_raw in 1usize..8,
    ) {
        let z = cols.len();
        let k = k_raw.min(z);
        let s = DenseMatrix::from_fn(3, z, |r, c| cols[c][r]);
        let sig = SignatureMatrix::new(s, labels(z)).unwrap();
        let got = knn_predict(&x, &sig, k).unwrap();
        let mut d: Vec<(f64, usize)> = cols
            .iter()
            .enumerate()
            .map(|(c, col)| (col.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt(), c))
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        // labels are distinct, so every neighbour has one vote and the nearest wins
        prop_assert_eq!(got, d[0].1);
    }
}

#[test]
fn scalar_case_is_a_quarter() {
    let one = || DenseMatrix::new(1, 1, vec![1.0]).unwrap();
    let sig = SignatureMatrix::new(one(), labels(1)).unwrap();
    let model = train_eszsl(&one(), &one(), &sig, 1.0, 1.0).unwrap();
    assert_eq!(model.v.data(), &[0.25]);
}

#[test]
fn zero_features_give_zero_mapping() {
    let x = DenseMatrix::zeros(3, 5);
    let y = DenseMatrix::from_fn(5, 2, |r, c| if r % 2 == c { 1.0 } else { -1.0 });
    let sig = SignatureMatrix::new(DenseMatrix::from_fn(2, 2, |r, c| (r + c) as f64 / 2.0), labels(2)).unwrap();
    let model = train_eszsl(&x, &y, &sig, 1.0, 1.0).unwrap();
    assert!(model.v.data().iter().all(|&v| v == 0.0));
}

#[test]
fn signature_rows_are_min_max_scaled() {
    let rows = [(vec![2.0, 1.0], 0), (vec![2.0, 1.0], 0), (vec![6.0, 1.0], 1)];
    let sig = build_signature_matrix(rows.iter().map(|(x, g)| (x.as_slice(), *g)), labels(2)).unwrap();
    assert_eq!(sig.matrix().row(0), &[0.0, 1.0]);
    assert_eq!(sig.matrix().row(1), &[0.5, 0.5]);
    // x is scaled like the signature rows before matching
    assert_eq!(knn_predict(&[5.5, 1.0], &sig, 1).unwrap(), 1);
    assert!(build_signature_matrix(rows.iter().map(|(x, g)| (x.as_slice(), *g)), labels(3)).is_err());
}

#[test]
fn instance_knn_votes_by_majority() {
    let pts = [
        (vec![0.0, 0.0], 0),
        (vec![0.1, 0.0], 1),
        (vec![0.1, 0.0], 1),
        (vec![5.0, 5.0], 0),
    ];
    let knn = InstanceKnn::fit(pts.iter().map(|(x, l)| (x.as_slice(), *l)), 2).unwrap();
    assert_eq!(knn.distinct_points(), 3);
    assert_eq!(knn.predict(&[0.0, 0.0], 1).unwrap(), 0);
    assert_eq!(knn.predict(&[0.0, 0.0], 3).unwrap(), 1);
    assert!(knn.predict(&[0.0, 0.0], 5).is_err());
}

#[test]
fn random_guessing_over_five_categories_scores_about_a_fifth() {
    let cats = ["DOS", "NORMAL", "PROBE", "R2L", "U2R"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 20_000;
    let truth: Vec<&str> = (0..n).map(|_| cats[rng.gen_range(0..5)]).collect();
    let pred: Vec<&str> = (0..n).map(|_| cats[rng.gen_range(0..5)]).collect();
    let r = evaluate(&pred, &truth, &cats).unwrap();
    // 4 standard errors of a binomial(20000, 0.2) proportion
    assert!((r.overall_accuracy - 0.2).abs() < 4.0 * (0.2f64 * 0.8 / n as f64).sqrt());
    assert_eq!(r.total, n as u64);
    assert_eq!(r.confusion.iter().flatten().sum::<u64>(), n as u64);
}
