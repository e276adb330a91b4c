//! Zero-shot inference over attribute signatures.
//!
//! A signature matrix `S` (attributes x targets) holds one column per class or
//! category with entries in [0, 1]. The ESZSL embedding
//!
//! ```text
//! V = (X X^T + gamma I)^-1  X Y S^T  (S S^T + lambda I)^-1
//! ```
//!
//! is computed with two linear solves, never by forming inverses. Here `X` is
//! d x m (one column per instance), `Y` is m x z with +1 for the instance's
//! class and -1 elsewhere, and `S` is a x z. A new instance `x` is assigned to
//! the column `i` of a (possibly different) signature matrix `S'` maximizing
//! `x^T V S'_i`.
//!
//! Only the d x d Gram matrix and the d x z product `X Y` are needed, so
//! training streams over instances through [`Moments`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve, DenseMatrix, LinalgError};

const MODEL_FORMAT: &str = "alnid-zsl-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ZslError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("group `{0}` has no instances")]
    EmptyGroup(String),
    #[error("membership row {0} must hold exactly one +1 and -1 elsewhere")]
    InvalidMembership(usize),
    #[error("regularizer must be positive and finite, got {0}")]
    InvalidHyperparameter(f64),
    #[error("signature entry ({row}, {col}) = {value} outside [0, 1]")]
    SignatureRange { row: usize, col: usize, value: f64 },
    #[error("no signatures to compare against")]
    EmptySignatures,
    #[error("k = {k} invalid for {available} candidates")]
    InvalidK { k: usize, available: usize },
    #[error("label `{0}` is not in the evaluation label set")]
    LabelMismatch(String),
    #[error("invalid model document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Attribute signatures, one column per target, plus the per-attribute
/// scaling used to map raw attribute vectors into the same [0, 1] space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    matrix: DenseMatrix,
    labels: Vec<String>,
    row_min: Vec<f64>,
    row_max: Vec<f64>,
}

impl SignatureMatrix {
    /// Wraps an explicit matrix; raw vectors are taken as already scaled.
    pub fn new(matrix: DenseMatrix, labels: Vec<String>) -> Result<Self, ZslError> {
        if labels.len() != matrix.cols() {
            return Err(ZslError::DimensionMismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                matrix.cols()
            )));
        }
        check_unit_range(&matrix)?;
        let a = matrix.rows();
        Ok(SignatureMatrix {
            matrix,
            labels,
            row_min: vec![0.0; a],
            row_max: vec![1.0; a],
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_attributes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_columns(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j)
    }

    pub fn scaling(&self) -> (&[f64], &[f64]) {
        (&self.row_min, &self.row_max)
    }

    /// Applies the per-attribute min-max scaling; constant rows map to 0.5.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.row_min.iter().zip(&self.row_max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
            .collect()
    }

    /// Same signatures multiplied by `factor` (scaling is kept).
    pub fn scaled(&self, factor: f64) -> SignatureMatrix {
        SignatureMatrix {
            matrix: self.matrix.scale(factor),
            ..self.clone()
        }
    }
}

fn check_unit_range(m: &DenseMatrix) -> Result<(), ZslError> {
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = m[(r, c)];
            if !(0.0..=1.0).contains(&v) {
                return Err(ZslError::SignatureRange {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Builds signatures from labelled attribute vectors.
///
/// Column `j` is the mean attribute vector of group `j`; each attribute row is
/// then min-max normalized across groups, with constant rows set to 0.5.
pub fn build_signature_matrix<'a, I>(
    rows: I,
    group_labels: Vec<String>,
) -> Result<SignatureMatrix, ZslError>
where
    I: IntoIterator<Item = (&'a [f64], usize)>,
{
    let z = group_labels.len();
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); z];
    let mut counts = vec![0u64; z];
    let mut a = None;
    for (x, g) in rows {
        if g >= z {
            return Err(ZslError::DimensionMismatch(format!("group index {g} >= {z}")));
        }
        match a {
            None => a = Some(x.len()),
            Some(n) if n != x.len() => {
                return Err(ZslError::DimensionMismatch("ragged attribute vectors".into()))
            }
            _ => {}
        }
        if sums[g].is_empty() {
            sums[g] = vec![0.0; x.len()];
        }
        for (s, v) in sums[g].iter_mut().zip(x) {
            *s += v;
        }
        counts[g] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(ZslError::EmptyGroup(group_labels[g].clone()));
    }
    let a = a.unwrap_or(0);
    let means = DenseMatrix::from_fn(a, z, |r, c| sums[c][r] / counts[c] as f64);
    let mut row_min = vec![0.0; a];
    let mut row_max = vec![0.0; a];
    let mut matrix = DenseMatrix::zeros(a, z);
    for r in 0..a {
        let row = means.row(r);
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row_min[r] = lo;
        row_max[r] = hi;
        for c in 0..z {
            matrix[(r, c)] = if hi > lo { (row[c] - lo) / (hi - lo) } else { 0.5 };
        }
    }
    Ok(SignatureMatrix {
        matrix,
        labels: group_labels,
        row_min,
        row_max,
    })
}

/// Sufficient statistics for ESZSL training: `X X^T` (d x d) and `X Y` (d x z).
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub gram: DenseMatrix,
    pub xy: DenseMatrix,
    pub instances: usize,
}

impl Moments {
    /// From explicit `X` (d x m) and `Y` (m x z); `Y` rows are validated.
    pub fn from_matrices(x: &DenseMatrix, y: &DenseMatrix) -> Result<Self, ZslError> {
        if x.cols() != y.rows() {
            return Err(ZslError::DimensionMismatch(format!(
                "X is {}x{}, Y is {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
        for r in 0..y.rows() {
            let row = y.row(r);
            let plus = row.iter().filter(|&&v| v == 1.0).count();
            let minus = row.iter().filter(|&&v| v == -1.0).count();
            if plus != 1 || plus + minus != row.len() {
                return Err(ZslError::InvalidMembership(r));
            }
        }
        Ok(Moments {
            gram: x.matmul(&x.transpose())?,
            xy: x.matmul(y)?,
            instances: x.cols(),
        })
    }

    /// Streams labelled vectors; the membership matrix is implicit
    /// (+1 for the label, -1 for every other of the `z` targets).
    pub fn from_labeled<'a, I>(rows: I, d: usize, z: usize) -> Result<Self, ZslError>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let mut gram = DenseMatrix::zeros(d, d);
        let mut class_sums = DenseMatrix::zeros(d, z);
        let mut total = vec![0.0; d];
        let mut m = 0;
        for (x, label) in rows {
            if x.len() != d || label >= z {
                return Err(ZslError::DimensionMismatch(format!(
                    "instance {m}: {} attributes, label {label}",
                    x.len()
                )));
            }
            for i in 0..d {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    gram[(i, j)] += x[i] * x[j];
                }
                class_sums[(i, label)] += x[i];
                total[i] += x[i];
            }
            m += 1;
        }
        // X Y[:, j] = sum over class j - sum over the rest = 2 * class_sum - total
        let xy = DenseMatrix::from_fn(d, z, |i, j| 2.0 * class_sums[(i, j)] - total[i]);
        Ok(Moments {
            gram,
            xy,
            instances: m,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EszslModel {
    /// d x a mapping from features to attributes.
    pub v: DenseMatrix,
    pub gamma: f64,
    pub lambda: f64,
    pub class_labels: Vec<String>,
}

fn check_regularizer(v: f64) -> Result<(), ZslError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ZslError::InvalidHyperparameter(v))
    }
}

/// Closed-form ESZSL on explicit matrices.
pub fn train_eszsl(
    x: &DenseMatrix,
    y: &DenseMatrix,
    signatures: &SignatureMatrix,
    gamma: f64,
    lambda: f64,
) -> Result<EszslModel, ZslError> {
    if y.cols() != signatures.n_columns() {
        return Err(ZslError::DimensionMismatch(format!(
            "Y has {} targets, S has {} columns",
            y.cols(),
            signatures.n_columns()
        )));
    }
    let moments = Moments::from_matrices(x, y)?;
    train_from_moments(&moments, signatures, gamma, lambda)
}

pub fn train_from_moments(
    moments: &Moments,
    signatures: &SignatureMatrix,
    gamma: f64,
    lambda: f64,
) -> Result<EszslModel, ZslError> {
    check_regularizer(gamma)?;
    check_regularizer(lambda)?;
    let s = signatures.matrix();
    if moments.xy.cols() != s.cols() {
        return Err(ZslError::DimensionMismatch(format!(
            "X Y has {} targets, S has {} columns",
            moments.xy.cols(),
            s.cols()
        )));
    }
    let rhs = moments.xy.matmul(&s.transpose())?; // d x a
    let left = moments.gram.add_scaled_identity(gamma)?;
    let w = solve(&left, &rhs)?;
    let right = s.matmul(&s.transpose())?.add_scaled_identity(lambda)?; // a x a, symmetric
    let v = solve(&right, &w.transpose())?.transpose();
    Ok(EszslModel {
        v,
        gamma,
        lambda,
        class_labels: signatures.labels().to_vec(),
    })
}

/// Relative Frobenius residual of
/// `(X X^T + gamma I) V (S S^T + lambda I) = X Y S^T`.
pub fn eszsl_residual(
    model: &EszslModel,
    moments: &Moments,
    signatures: &SignatureMatrix,
) -> Result<f64, ZslError> {
    let s = signatures.matrix();
    let rhs = moments.xy.matmul(&s.transpose())?;
    let lhs = moments
        .gram
        .add_scaled_identity(model.gamma)?
        .matmul(&model.v)?
        .matmul(&s.matmul(&s.transpose())?.add_scaled_identity(model.lambda)?)?;
    let num = lhs.sub(&rhs)?.frobenius_norm();
    let den = rhs.frobenius_norm();
    Ok(if den > 0.0 { num / den } else { num })
}

/// `x^T V S'_i` for every column `i`.
pub fn eszsl_scores(
    model: &EszslModel,
    x: &[f64],
    signatures: &SignatureMatrix,
) -> Result<Vec<f64>, ZslError> {
    let v = &model.v;
    if x.len() != v.rows() || signatures.n_attributes() != v.cols() {
        return Err(ZslError::DimensionMismatch(format!(
            "x has {} values, V is {}x{}, S' has {} rows",
            x.len(),
            v.rows(),
            v.cols(),
            signatures.n_attributes()
        )));
    }
    let mut projected = vec![0.0; v.cols()];
    for (i, &xi) in x.iter().enumerate() {
        for (p, &vij) in projected.iter_mut().zip(v.row(i)) {
            *p += xi * vij;
        }
    }
    let s = signatures.matrix();
    Ok((0..s.cols())
        .map(|c| (0..s.rows()).map(|r| projected[r] * s[(r, c)]).sum())
        .collect())
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Column index of `signatures` with the highest score; ties go to the first.
pub fn predict_eszsl(
    model: &EszslModel,
    x: &[f64],
    signatures: &SignatureMatrix,
) -> Result<usize, ZslError> {
    if signatures.n_columns() == 0 {
        return Err(ZslError::EmptySignatures);
    }
    Ok(argmax(&eszsl_scores(model, x, signatures)?))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Majority vote over weighted neighbours sorted nearest-first; ties go to
/// the label of the nearest neighbour among the tied labels.
fn vote(neighbours: &[(usize, f64)], n_labels: usize) -> usize {
    let mut votes = vec![0.0; n_labels];
    for &(label, w) in neighbours {
        votes[label] += w;
    }
    let top = votes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    neighbours
        .iter()
        .find(|(l, _)| votes[*l] == top)
        .map(|(l, _)| *l)
        .expect("at least one neighbour")
}

/// k-NN against signature columns after scaling `x` like the signatures.
/// Returns the winning column index.
pub fn knn_predict(x: &[f64], signatures: &SignatureMatrix, k: usize) -> Result<usize, ZslError> {
    let z = signatures.n_columns();
    if z == 0 {
        return Err(ZslError::EmptySignatures);
    }
    if k == 0 || k > z {
        return Err(ZslError::InvalidK { k, available: z });
    }
    if x.len() != signatures.n_attributes() {
        return Err(ZslError::DimensionMismatch(format!(
            "x has {} values, signatures have {} attributes",
            x.len(),
            signatures.n_attributes()
        )));
    }
    let xs = signatures.normalize(x);
    let mut dist: Vec<(f64, usize)> = (0..z)
        .map(|c| (squared_distance(&xs, &signatures.column(c)), c))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // columns sharing a label vote together
    let mut label_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let first_column: Vec<usize> = signatures
        .labels()
        .iter()
        .enumerate()
        .map(|(c, l)| *label_ids.entry(l.as_str()).or_insert(c))
        .collect();
    let neighbours: Vec<(usize, f64)> = dist[..k].iter().map(|&(_, c)| (first_column[c], 1.0)).collect();
    Ok(vote(&neighbours, z))
}

/// Instance-level k-NN. Duplicate reference vectors are merged into one point
/// carrying a label histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceKnn {
    points: Vec<Vec<f64>>,
    label_counts: Vec<Vec<u64>>,
    n_labels: usize,
}

impl InstanceKnn {
    pub fn fit<'a, I>(rows: I, n_labels: usize) -> Result<Self, ZslError>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let mut merged: BTreeMap<Vec<u64>, (Vec<f64>, Vec<u64>)> = BTreeMap::new();
        let mut dim = None;
        for (x, label) in rows {
            if label >= n_labels || dim.is_some_and(|d| d != x.len()) {
                return Err(ZslError::DimensionMismatch(format!(
                    "reference vector of length {} with label {label}",
                    x.len()
                )));
            }
            dim = Some(x.len());
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let entry = merged
                .entry(key)
                .or_insert_with(|| (x.to_vec(), vec![0; n_labels]));
            entry.1[label] += 1;
        }
        if merged.is_empty() {
            return Err(ZslError::EmptySignatures);
        }
        let (points, label_counts) = merged.into_values().unzip();
        Ok(InstanceKnn {
            points,
            label_counts,
            n_labels,
        })
    }

    pub fn distinct_points(&self) -> usize {
        self.points.len()
    }

    pub fn instances(&self) -> u64 {
        self.label_counts.iter().flatten().sum()
    }

    /// Majority label among the `k` nearest reference instances. A merged
    /// point straddling the k-th position contributes fractional votes.
    pub fn predict(&self, x: &[f64], k: usize) -> Result<usize, ZslError> {
        let available = self.instances() as usize;
        if k == 0 || k > available {
            return Err(ZslError::InvalidK { k, available });
        }
        if x.len() != self.points[0].len() {
            return Err(ZslError::DimensionMismatch("query length".into()));
        }
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(x, p), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut remaining = k as f64;
        let mut neighbours = Vec::new();
        for &(_, p) in &order {
            let counts = &self.label_counts[p];
            let total: u64 = counts.iter().sum();
            let take = remaining.min(total as f64);
            // within a merged point the most frequent label counts as nearest
            let mut labels: Vec<usize> = (0..self.n_labels).filter(|&l| counts[l] > 0).collect();
            labels.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
            for l in labels {
                neighbours.push((l, counts[l] as f64 * take / total as f64));
            }
            remaining -= take;
            if remaining <= 0.0 {
                break;
            }
        }
        Ok(vote(&neighbours, self.n_labels))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub labels: Vec<String>,
    /// `confusion[t][p]`: instances with truth `t` predicted as `p`.
    pub confusion: Vec<Vec<u64>>,
    /// Recall per truth label; `None` when the label has no instances.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub overall_accuracy: f64,
    pub total: u64,
}

impl EvalResult {
    pub fn confusion_csv(&self) -> String {
        let mut out = format!("truth\\predicted,{}\n", self.labels.join(","));
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&format!("{l},{}\n", cells.join(",")));
        }
        out
    }
}

pub fn evaluate<S: AsRef<str>>(
    predictions: &[S],
    truths: &[S],
    labels: &[S],
) -> Result<EvalResult, ZslError> {
    if predictions.len() != truths.len() {
        return Err(ZslError::DimensionMismatch(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_ref(), i))
        .collect();
    let lookup = |s: &S| {
        index
            .get(s.as_ref())
            .copied()
            .ok_or_else(|| ZslError::LabelMismatch(s.as_ref().to_string()))
    };
    let n = labels.len();
    let mut confusion = vec![vec![0u64; n]; n];
    for (p, t) in predictions.iter().zip(truths) {
        confusion[lookup(t)?][lookup(p)?] += 1;
    }
    let total = predictions.len() as u64;
    let correct: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rs: u64 = row.iter().sum();
            (rs > 0).then(|| row[i] as f64 / rs as f64)
        })
        .collect();
    Ok(EvalResult {
        labels: labels.iter().map(|l| l.as_ref().to_string()).collect(),
        confusion,
        per_class_accuracy,
        overall_accuracy: if total > 0 {
            correct as f64 / total as f64
        } else {
            0.0
        },
        total,
    })
}

/// `10^-3, 10^-2, ..., 10^3`.
pub fn log_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub lambda: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GridPoint,
    pub points: Vec<GridPoint>,
}

/// Picks (gamma, lambda) maximizing accuracy on `validation` (vectors with
/// target indices into `signatures`). The first best point in grid order wins.
pub fn grid_search(
    train: &Moments,
    signatures: &SignatureMatrix,
    validation: &[(Vec<f64>, usize)],
    grid: &[f64],
) -> Result<GridSearchResult, ZslError> {
    let mut points = Vec::with_capacity(grid.len() * grid.len());
    for &gamma in grid {
        for &lambda in grid {
            let model = train_from_moments(train, signatures, gamma, lambda)?;
            let mut hits = 0usize;
            for (x, t) in validation {
                if predict_eszsl(&model, x, signatures)? == *t {
                    hits += 1;
                }
            }
            let accuracy = if validation.is_empty() {
                0.0
            } else {
                hits as f64 / validation.len() as f64
            };
            points.push(GridPoint {
                gamma,
                lambda,
                accuracy,
            });
        }
    }
    let best = points
        .iter()
        .fold(None::<&GridPoint>, |b, p| match b {
            Some(b) if b.accuracy >= p.accuracy => Some(b),
            _ => Some(p),
        })
        .cloned()
        .ok_or_else(|| ZslError::Format("empty grid".into()))?;
    Ok(GridSearchResult { best, points })
}

/// Persisted inference model: the ESZSL mapping with both signature sets and
/// the feature scaling applied before projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZslModel {
    pub format: String,
    pub version: u32,
    /// `learned` or `original`.
    pub features: String,
    /// Per-feature (min, max) applied to inputs before use; empty for none.
    pub feature_scaling: Vec<(f64, f64)>,
    pub eszsl: EszslModel,
    pub train_signatures: SignatureMatrix,
    pub inference_signatures: SignatureMatrix,
    pub k: usize,
}

impl ZslModel {
    pub fn new(
        features: &str,
        feature_scaling: Vec<(f64, f64)>,
        eszsl: EszslModel,
        train_signatures: SignatureMatrix,
        inference_signatures: SignatureMatrix,
        k: usize,
    ) -> Self {
        ZslModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            features: features.to_string(),
            feature_scaling,
            eszsl,
            train_signatures,
            inference_signatures,
            k,
        }
    }

    pub fn prepare(&self, x: &[f64]) -> Vec<f64> {
        if self.feature_scaling.is_empty() {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.feature_scaling)
            .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
            .collect()
    }

    /// ESZSL and signature k-NN predictions (inference column indices).
    pub fn predict(&self, x: &[f64]) -> Result<(usize, usize), ZslError> {
        let x = self.prepare(x);
        Ok((
            predict_eszsl(&self.eszsl, &x, &self.inference_signatures)?,
            knn_predict(&x, &self.inference_signatures, self.k)?,
        ))
    }

    pub fn to_json(&self) -> Result<String, ZslError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ZslError> {
        let m: ZslModel = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(ZslError::Format(format!("unsupported {} v{}", m.format, m.version)));
        }
        let v = &m.eszsl.v;
        DenseMatrix::new(v.rows(), v.cols(), v.data().to_vec())?;
        for s in [&m.train_signatures, &m.inference_signatures] {
            check_unit_range(s.matrix())?;
            if s.labels().len() != s.n_columns() || s.n_attributes() != v.cols() {
                return Err(ZslError::Format("signature shape".into()));
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::new(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn one_group_is_all_half() {
        let rows = [vec![1.0, 5.0], vec![3.0, 0.0]];
        let s = build_signature_matrix(rows.iter().map(|r| (r.as_slice(), 0)), labels(1)).unwrap();
        assert_eq!(s.matrix().data(), &[0.5, 0.5]);
    }

    #[test]
    fn group_means_normalize_to_unit_range() {
        // attribute 0 means: 2 and 6
        let rows = [vec![1.0], vec![3.0], vec![6.0]];
        let groups = [0, 0, 1];
        let s = build_signature_matrix(
            rows.iter().zip(groups).map(|(r, g)| (r.as_slice(), g)),
            labels(2),
        )
        .unwrap();
        assert_eq!(s.matrix().data(), &[0.0, 1.0]);
        assert_eq!(s.normalize(&[4.0]), vec![0.5]);
    }

    #[test]
    fn empty_group_rejected() {
        let rows = [vec![1.0]];
        let err = build_signature_matrix(rows.iter().map(|r| (r.as_slice(), 0)), labels(2));
        assert!(matches!(err, Err(ZslError::EmptyGroup(g)) if g == "c1"));
    }

    #[test]
    fn scalar_closed_form() {
        let s = SignatureMatrix::new(scalar(1.0), labels(1)).unwrap();
        let m = train_eszsl(&scalar(1.0), &scalar(1.0), &s, 1.0, 1.0).unwrap();
        assert_eq!(m.v.data(), &[0.25]);
    }

    #[test]
    fn zero_features_give_zero_mapping() {
        let x = DenseMatrix::zeros(3, 4);
        let y = DenseMatrix::from_fn(4, 2, |r, c| if r % 2 == c { 1.0 } else { -1.0 });
        let s = SignatureMatrix::new(DenseMatrix::from_fn(2, 2, |r, c| (r + c) as f64 / 2.0), labels(2))
            .unwrap();
        let m = train_eszsl(&x, &y, &s, 0.5, 2.0).unwrap();
        assert!(m.v.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_input_validation() {
        let s = SignatureMatrix::new(scalar(1.0), labels(1)).unwrap();
        assert!(matches!(
            train_eszsl(&scalar(1.0), &scalar(1.0), &s, 0.0, 1.0),
            Err(ZslError::InvalidHyperparameter(_))
        ));
        assert!(matches!(
            train_eszsl(&scalar(1.0), &scalar(-1.0), &s, 1.0, 1.0),
            Err(ZslError::InvalidMembership(0))
        ));
        let x = DenseMatrix::zeros(1, 2);
        assert!(matches!(
            train_eszsl(&x, &scalar(1.0), &s, 1.0, 1.0),
            Err(ZslError::DimensionMismatch(_))
        ));
        assert!(SignatureMatrix::new(scalar(1.5), labels(1)).is_err());
    }

    #[test]
    fn streaming_moments_match_explicit() {
        let rows = [vec![1.0, 2.0], vec![0.0, 3.0], vec![4.0, 1.0]];
        let lab = [1usize, 0, 1];
        let x = DenseMatrix::from_fn(2, 3, |r, c| rows[c][r]);
        let y = DenseMatrix::from_fn(3, 2, |r, c| if lab[r] == c { 1.0 } else { -1.0 });
        let a = Moments::from_matrices(&x, &y).unwrap();
        let b = Moments::from_labeled(rows.iter().zip(lab).map(|(r, l)| (r.as_slice(), l)), 2, 2)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_prediction() {
        let s = SignatureMatrix::new(scalar(1.0), labels(1)).unwrap();
        let m = train_eszsl(&scalar(1.0), &scalar(1.0), &s, 1.0, 1.0).unwrap();
        let s2 = SignatureMatrix::new(DenseMatrix::new(1, 2, vec![1.0, 0.5]).unwrap(), labels(2))
            .unwrap();
        assert_eq!(eszsl_scores(&m, &[2.0], &s2).unwrap(), vec![0.5, 0.25]);
        assert_eq!(predict_eszsl(&m, &[2.0], &s2).unwrap(), 0);
        assert!(predict_eszsl(&m, &[2.0, 1.0], &s2).is_err());
    }

    #[test]
    fn identity_chain_is_argmax_of_x() {
        let m = EszslModel {
            v: DenseMatrix::identity(3),
            gamma: 1.0,
            lambda: 1.0,
            class_labels: labels(3),
        };
        let s = SignatureMatrix::new(DenseMatrix::identity(3), labels(3)).unwrap();
        assert_eq!(predict_eszsl(&m, &[0.2, 0.9, 0.1], &s).unwrap(), 1);
        let single = SignatureMatrix::new(DenseMatrix::new(3, 1, vec![0.1, 0.0, 0.3]).unwrap(), labels(1))
            .unwrap();
        assert_eq!(predict_eszsl(&m, &[-5.0, 2.0, 0.0], &single).unwrap(), 0);
    }

    #[test]
    fn knn_geometry() {
        let s = SignatureMatrix::new(
            DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            labels(2),
        )
        .unwrap();
        assert_eq!(knn_predict(&[0.1, 0.1], &s, 1).unwrap(), 0);
        assert_eq!(knn_predict(&[1.0, 1.0], &s, 1).unwrap(), 1);
        // k = 2: one vote each, nearest wins
        assert_eq!(knn_predict(&[0.9, 0.8], &s, 2).unwrap(), 1);
        assert!(matches!(knn_predict(&[0.0, 0.0], &s, 3), Err(ZslError::InvalidK { .. })));
        assert!(matches!(knn_predict(&[0.0, 0.0], &s, 0), Err(ZslError::InvalidK { .. })));
        let empty = SignatureMatrix::new(DenseMatrix::zeros(2, 0), vec![]).unwrap();
        assert!(matches!(knn_predict(&[0.0, 0.0], &empty, 1), Err(ZslError::EmptySignatures)));
    }

    #[test]
    fn instance_knn_merges_duplicates() {
        let rows = [vec![0.0], vec![0.0], vec![0.0], vec![5.0], vec![6.0]];
        let lab = [0usize, 0, 1, 1, 1];
        let knn = InstanceKnn::fit(rows.iter().zip(lab).map(|(r, l)| (r.as_slice(), l)), 2).unwrap();
        assert_eq!(knn.distinct_points(), 3);
        assert_eq!(knn.predict(&[0.5], 1).unwrap(), 0);
        assert_eq!(knn.predict(&[0.5], 3).unwrap(), 0);
        assert_eq!(knn.predict(&[0.5], 5).unwrap(), 1);
        assert_eq!(knn.predict(&[5.4], 1).unwrap(), 1);
        assert!(knn.predict(&[0.5], 6).is_err());
    }

    #[test]
    fn evaluation_basics() {
        let l = ["a", "b", "c"];
        let r = evaluate(&["a", "b", "c"], &["a", "b", "c"], &l).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);

        let r = evaluate(&["a", "a", "a", "a"], &["a", "b", "b", "c"], &l).unwrap();
        assert_eq!(r.overall_accuracy, 0.25);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![2, 0, 0], vec![1, 0, 0]]);
        assert_eq!(r.per_class_accuracy, vec![Some(1.0), Some(0.0), Some(0.0)]);
        assert_eq!(r.confusion_csv(), "truth\\predicted,a,b,c\na,1,0,0\nb,2,0,0\nc,1,0,0\n");

        assert!(matches!(
            evaluate(&["z"], &["a"], &l),
            Err(ZslError::LabelMismatch(x)) if x == "z"
        ));
        assert!(evaluate(&["a"], &[], &l).is_err());
        let r = evaluate(&["a"], &["a"], &l).unwrap();
        assert_eq!(r.per_class_accuracy[1], None);
    }

    #[test]
    fn grid_prefers_first_best() {
        let s = SignatureMatrix::new(DenseMatrix::identity(2), labels(2)).unwrap();
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = Moments::from_labeled(rows.iter().zip([0usize, 1]).map(|(r, l)| (r.as_slice(), l)), 2, 2)
            .unwrap();
        let val = vec![(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)];
        let g = grid_search(&m, &s, &val, &log_grid()).unwrap();
        assert_eq!(g.points.len(), 49);
        assert_eq!(g.best.accuracy, 1.0);
        assert_eq!((g.best.gamma, g.best.lambda), (1e-3, 1e-3));
    }

    #[test]
    fn model_json_round_trip() {
        let s = SignatureMatrix::new(DenseMatrix::from_rows(&[vec![0.1, 0.7]]).unwrap(), labels(2))
            .unwrap();
        let e = EszslModel {
            v: DenseMatrix::new(1, 1, vec![0.123456789012345]).unwrap(),
            gamma: 0.1,
            lambda: 10.0,
            class_labels: labels(2),
        };
        let m = ZslModel::new("learned", vec![(0.0, 3.0)], e, s.clone(), s, 1);
        let back = ZslModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&[2.0]).unwrap(), m.predict(&[2.0]).unwrap());
    }
}
