//! Reference implementations used by the property and acceptance tests.
//!
//! Nothing here calls into the code it checks beyond reading inputs and
//! outputs: entropies are recomputed from raw counts, split candidates are
//! enumerated and counted by full scans, and the ESZSL mapping is recovered
//! by minimizing its objective with conjugate gradients.

#![allow(dead_code)]

use alnid::alnid::relearn_features;
use alnid::dtree::{Comparator, DecisionTree, TrainingSet};
use proptest::prelude::*;
use rand::Rng;

pub const GAIN_TOL: f64 = 1e-12;

pub fn entropy_bits(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln() / std::f64::consts::LN_2
        })
        .sum()
}

fn class_counts(set: &TrainingSet, pick: impl Fn(usize) -> bool) -> Vec<u64> {
    let mut c = vec![0u64; set.n_classes()];
    for i in 0..set.len() {
        if pick(i) {
            c[set.label(i)] += 1;
        }
    }
    c
}

pub fn split_gain(set: &TrainingSet, attribute: usize, threshold: f64) -> f64 {
    let all = class_counts(set, |_| true);
    let left = class_counts(set, |i| set.row(i)[attribute] <= threshold);
    let right = class_counts(set, |i| set.row(i)[attribute] > threshold);
    let n = set.len() as f64;
    let nl: u64 = left.iter().sum();
    let nr: u64 = right.iter().sum();
    entropy_bits(&all) - (nl as f64 / n) * entropy_bits(&left) - (nr as f64 / n) * entropy_bits(&right)
}

/// Every (attribute, midpoint) pair in scan order.
pub fn all_candidates(set: &TrainingSet, available: &[usize]) -> Vec<(usize, f64)> {
    let mut attrs = available.to_vec();
    attrs.sort_unstable();
    attrs.dedup();
    let mut out = Vec::new();
    for a in attrs {
        let mut vals: Vec<f64> = (0..set.len()).map(|i| set.row(i)[a]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            out.push((a, (w[0] + w[1]) / 2.0));
        }
    }
    out
}

/// Exhaustive search: highest gain, earlier candidates kept on ties.
pub fn brute_force_best_split(set: &TrainingSet, available: &[usize]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (a, t) in all_candidates(set, available) {
        let g = split_gain(set, a, t);
        if best.map_or(true, |(_, _, bg)| g > bg + GAIN_TOL) {
            best = Some((a, t, g));
        }
    }
    best.filter(|&(_, _, g)| g > GAIN_TOL)
}

pub fn random_training_set<R: Rng>(rng: &mut R) -> TrainingSet {
    let n_features = rng.gen_range(1..=5);
    let n_classes = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=200);
    let discrete = rng.gen_bool(0.5);
    let names = (0..n_classes).map(|c| format!("k{c}")).collect();
    let mut set = TrainingSet::new(n_features, names);
    for _ in 0..n {
        let row: Vec<f64> = (0..n_features)
            .map(|_| {
                if discrete {
                    rng.gen_range(0..6) as f64
                } else {
                    (rng.gen_range(-100.0..100.0f64) * 8.0).round() / 8.0
                }
            })
            .collect();
        set.push(&row, rng.gen_range(0..n_classes)).unwrap();
    }
    set
}

pub fn training_set_strategy() -> impl Strategy<Value = TrainingSet> {
    (1usize..=5, 1usize..=4)
        .prop_flat_map(|(d, k)| {
            let value = prop_oneof![(0i32..6).prop_map(f64::from), -50.0..50.0f64];
            (
                Just(d),
                Just(k),
                prop::collection::vec((prop::collection::vec(value, d), 0..k), 1..=200),
            )
        })
        .prop_map(|(d, k, rows)| {
            let mut set = TrainingSet::new(d, (0..k).map(|c| format!("k{c}")).collect());
            for (row, label) in rows {
                set.push(&row, label).unwrap();
            }
            set
        })
}

/// Rules, paths and relearned values checked against each other for every
/// training row.
pub fn check_tree_consistency(set: &TrainingSet, tree: &DecisionTree) -> Result<(), String> {
    let rules = tree.extract_rules();
    if rules.len() != tree.leaf_count() {
        return Err(format!("{} rules for {} leaves", rules.len(), tree.leaf_count()));
    }
    let depths = tree.node_depths();
    let d = set.n_features();
    for i in 0..set.len() {
        let x = set.row(i);
        let matching: Vec<_> = rules
            .iter()
            .filter(|r| {
                r.conditions.iter().all(|c| match c.comparator {
                    Comparator::Le => x[c.attribute] <= c.threshold,
                    Comparator::Gt => x[c.attribute] > c.threshold,
                })
            })
            .collect();
        if matching.len() != 1 {
            return Err(format!("row {i} matches {} rules", matching.len()));
        }
        let rule = matching[0];
        if rule.class != tree.predict(x) {
            return Err(format!("row {i}: rule says {}, tree says {}", rule.class, tree.predict(x)));
        }
        let mut counted = vec![0u32; d];
        for c in &rule.conditions {
            counted[c.attribute] += 1;
        }
        let learned = relearn_features(tree, x).map_err(|e| e.to_string())?;
        if learned != counted {
            return Err(format!("row {i}: relearned {learned:?}, rule counts {counted:?}"));
        }
        let path = tree.trace_path(x);
        let sum: u32 = learned.iter().sum();
        let leaf_depth = depths[tree.leaf_index(x)];
        if sum as usize != path.len() || path.len() != leaf_depth {
            return Err(format!(
                "row {i}: learned sum {sum}, path {}, leaf depth {leaf_depth}",
                path.len()
            ));
        }
        if let Some(root) = tree.root_attribute() {
            if learned[root] < 1 {
                return Err(format!("row {i}: root attribute {root} not counted"));
            }
        }
    }
    Ok(())
}

/// Column-major-free dense helpers on `Vec<Vec<f64>>`.
pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn frob_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s)).map(|(x, y)| x * y).sum()
}

fn shift(a: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    let mut out = a.to_vec();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] += c;
    }
    out
}

/// Minimizer of
/// `|X^T V S - Y|^2 + gamma |V S|^2 + lambda |X^T V|^2 + gamma lambda |V|^2`
/// by conjugate gradients on the normal equations.
/// `x` is d x m, `y` is m x z, `s` is a x z; returns V (d x a).
pub fn eszsl_by_minimization(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    s: &[Vec<f64>],
    gamma: f64,
    lambda: f64,
) -> Vec<Vec<f64>> {
    let left = shift(&mat_mul(x, &transpose(x)), gamma);
    let right = shift(&mat_mul(s, &transpose(s)), lambda);
    let apply = |v: &[Vec<f64>]| mat_mul(&mat_mul(&left, v), &right);
    // negative gradient at V = 0
    let b = mat_mul(&mat_mul(x, y), &transpose(s));
    let d = x.len();
    let a = s.len();
    let mut v = vec![vec![0.0; a]; d];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = frob_dot(&r, &r);
    let scale = rr.sqrt().max(1.0);
    for _ in 0..(50 * d * a).max(200) {
        if rr.sqrt() <= 1e-14 * scale {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / frob_dot(&p, &ap);
        for i in 0..d {
            for j in 0..a {
                v[i][j] += alpha * p[i][j];
                r[i][j] -= alpha * ap[i][j];
            }
        }
        let rr_new = frob_dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..d {
            for j in 0..a {
                p[i][j] = r[i][j] + beta * p[i][j];
            }
        }
        rr = rr_new;
    }
    v
}

/// Random ESZSL problem: X (d x m), Y (m x z, +-1 with one +1 per row),
/// S (a x z, entries in [0, 1]).
pub fn random_eszsl_problem<R: Rng>(
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=40);
    let a = rng.gen_range(1..=4);
    let z = rng.gen_range(1..=4);
    let x = (0..d)
        .map(|_| (0..m).map(|_| rng.gen_range(-2.0..3.0)).collect())
        .collect();
    let y = (0..m)
        .map(|_| {
            let c = rng.gen_range(0..z);
            (0..z).map(|j| if j == c { 1.0 } else { -1.0 }).collect()
        })
        .collect();
    let s = (0..a)
        .map(|_| (0..z).map(|_| rng.gen_range(0.0..=1.0)).collect())
        .collect();
    (x, y, s)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

/// Population mean and stddev in two passes.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
