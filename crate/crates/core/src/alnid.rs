//! Attribute relearning from decision-tree paths.
//!
//! Each instance descends the tree along exactly one root-to-leaf path (the
//! extracted rules are mutually exclusive), and its learned value for an
//! attribute is the number of times that attribute is tested on the path.
//! Entropy enters only through how the tree was grown.
//!
//! The learned values are small non-negative integers that sum to the depth of
//! the reached leaf. [`separability_report`] compares how well original and
//! learned attributes separate the classes using a Fisher ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtree::{DecisionTree, TrainingSet};
use crate::kdd::{Category, ClassId, EncodedInstance, FEATURE_NAMES, NUM_FEATURES};
use crate::stats::{summarize, StatsError, Summary};

#[derive(Debug, Error)]
pub enum RelearnError {
    #[error("tree expects {expected} attributes, instance has {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("original ({original}) and learned ({learned}) datasets differ in length")]
    LengthMismatch { original: usize, learned: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Which label the tree is trained to predict.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelTarget {
    Class,
    #[default]
    Category,
}

impl LabelTarget {
    pub fn names(self) -> Vec<String> {
        match self {
            LabelTarget::Class => (0..23u8).map(|i| ClassId(i).name().to_string()).collect(),
            LabelTarget::Category => Category::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        }
    }

    pub fn label_of(self, class: ClassId, category: Category) -> usize {
        match self {
            LabelTarget::Class => class.0 as usize,
            LabelTarget::Category => category.index(),
        }
    }
}

/// Tree training examples from encoded instances.
pub fn training_set(instances: &[EncodedInstance], target: LabelTarget) -> TrainingSet {
    let mut set = TrainingSet::with_capacity(NUM_FEATURES, target.names(), instances.len());
    for inst in instances {
        set.push(&inst.features, target.label_of(inst.class, inst.category))
            .expect("encoded instances match the label schema");
    }
    set
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedInstance {
    pub learned: [u32; NUM_FEATURES],
    pub class: ClassId,
    pub category: Category,
}

impl LearnedInstance {
    pub fn as_f64(&self) -> [f64; NUM_FEATURES] {
        self.learned.map(f64::from)
    }
}

/// Per-attribute test counts along the path of `x`.
pub fn relearn_features(tree: &DecisionTree, x: &[f64]) -> Result<Vec<u32>, RelearnError> {
    check_schema(tree, x.len())?;
    let mut counts = vec![0u32; x.len()];
    tree.path_attribute_counts(x, &mut counts);
    Ok(counts)
}

fn check_schema(tree: &DecisionTree, found: usize) -> Result<(), RelearnError> {
    if tree.n_features() != found {
        return Err(RelearnError::SchemaMismatch {
            expected: tree.n_features(),
            found,
        });
    }
    Ok(())
}

pub fn relearn_instance(
    tree: &DecisionTree,
    instance: &EncodedInstance,
) -> Result<LearnedInstance, RelearnError> {
    check_schema(tree, NUM_FEATURES)?;
    Ok(relearn_unchecked(tree, instance))
}

fn relearn_unchecked(tree: &DecisionTree, instance: &EncodedInstance) -> LearnedInstance {
    let mut learned = [0u32; NUM_FEATURES];
    tree.path_attribute_counts(&instance.features, &mut learned);
    LearnedInstance {
        learned,
        class: instance.class,
        category: instance.category,
    }
}

/// Relearns every instance in parallel; output order matches input order.
pub fn relearn_dataset(
    tree: &DecisionTree,
    dataset: &[EncodedInstance],
) -> Result<Vec<LearnedInstance>, RelearnError> {
    check_schema(tree, NUM_FEATURES)?;
    Ok(dataset
        .par_iter()
        .map(|inst| relearn_unchecked(tree, inst))
        .collect())
}

pub fn learned_stats(learned: &[LearnedInstance], attribute: usize) -> Result<Summary, RelearnError> {
    if attribute >= NUM_FEATURES {
        return Err(StatsError::BadIndex {
            index: attribute,
            available: NUM_FEATURES,
        }
        .into());
    }
    Ok(summarize(learned.iter().map(|l| f64::from(l.learned[attribute])))?)
}

/// Between-group over within-group variance.
///
/// Returns 0 when every value is identical and `f64::INFINITY` when the groups
/// are internally constant but differ from each other.
pub fn fisher_ratio(values: &[f64], groups: &[usize], n_groups: usize) -> f64 {
    assert_eq!(values.len(), groups.len());
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return 0.0;
    }
    let mut sums = vec![0.0; n_groups];
    let mut counts = vec![0u64; n_groups];
    for (&v, &g) in values.iter().zip(groups) {
        sums[g] += v;
        counts[g] += 1;
    }
    let n = values.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(&m, &c)| c as f64 * (m - mean).powi(2))
        .sum();
    let mut within = 0.0;
    let mut group_constant = vec![true; n_groups];
    let mut first = vec![f64::NAN; n_groups];
    for (&v, &g) in values.iter().zip(groups) {
        within += (v - means[g]).powi(2);
        if first[g].is_nan() {
            first[g] = v;
        } else if first[g] != v {
            group_constant[g] = false;
        }
    }
    if group_constant.iter().all(|&c| c) {
        return f64::INFINITY;
    }
    between / within
}

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad ratio `{t}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Class,
    #[default]
    Category,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSeparability {
    pub attribute: String,
    /// Fisher ratio of the min-max normalized original values.
    #[serde(with = "ratio_serde")]
    pub original_ratio: f64,
    #[serde(with = "ratio_serde")]
    pub learned_ratio: f64,
}

impl AttributeSeparability {
    pub fn learned_better(&self) -> bool {
        self.learned_ratio > self.original_ratio
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Original,
    Learned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// One count per group, in report group order.
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeHistogram {
    pub attribute: String,
    pub kind: ValueKind,
    pub bins: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub grouping: Grouping,
    pub groups: Vec<String>,
    pub group_sizes: Vec<u64>,
    pub attributes: Vec<AttributeSeparability>,
    pub histograms: Vec<AttributeHistogram>,
}

impl SeparabilityReport {
    /// Number of attributes whose learned ratio beats the original one.
    pub fn improved_count(&self) -> usize {
        self.attributes.iter().filter(|a| a.learned_better()).count()
    }
}

const ORIGINAL_BINS: usize = 10;

fn normalize_column(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for v in values.iter_mut() {
        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
    }
}

fn histogram(values: &[f64], groups: &[usize], n_groups: usize, kind: ValueKind) -> Vec<HistogramBin> {
    let n_bins = match kind {
        ValueKind::Original => ORIGINAL_BINS,
        ValueKind::Learned => values.iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1,
    };
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|b| {
            let (lo, hi) = match kind {
                ValueKind::Original => (b as f64 / n_bins as f64, (b + 1) as f64 / n_bins as f64),
                ValueKind::Learned => (b as f64, (b + 1) as f64),
            };
            HistogramBin {
                lo,
                hi,
                counts: vec![0; n_groups],
            }
        })
        .collect();
    for (&v, &g) in values.iter().zip(groups) {
        let b = match kind {
            ValueKind::Original => ((v * n_bins as f64) as usize).min(n_bins - 1),
            ValueKind::Learned => v as usize,
        };
        bins[b].counts[g] += 1;
    }
    bins
}

pub fn separability_report(
    original: &[EncodedInstance],
    learned: &[LearnedInstance],
    grouping: Grouping,
) -> Result<SeparabilityReport, RelearnError> {
    if original.len() != learned.len() {
        return Err(RelearnError::LengthMismatch {
            original: original.len(),
            learned: learned.len(),
        });
    }
    let target = match grouping {
        Grouping::Class => LabelTarget::Class,
        Grouping::Category => LabelTarget::Category,
    };
    let groups_names = target.names();
    let n_groups = groups_names.len();
    let groups: Vec<usize> = learned
        .iter()
        .map(|l| target.label_of(l.class, l.category))
        .collect();
    let mut group_sizes = vec![0u64; n_groups];
    for &g in &groups {
        group_sizes[g] += 1;
    }

    let per_attr: Vec<(AttributeSeparability, AttributeHistogram, AttributeHistogram)> = (0
        ..NUM_FEATURES)
        .into_par_iter()
        .map(|a| {
            let mut orig: Vec<f64> = original.iter().map(|i| i.features[a]).collect();
            normalize_column(&mut orig);
            let lrn: Vec<f64> = learned.iter().map(|l| f64::from(l.learned[a])).collect();
            let name = FEATURE_NAMES[a].to_string();
            (
                AttributeSeparability {
                    attribute: name.clone(),
                    original_ratio: fisher_ratio(&orig, &groups, n_groups),
                    learned_ratio: fisher_ratio(&lrn, &groups, n_groups),
                },
                AttributeHistogram {
                    attribute: name.clone(),
                    kind: ValueKind::Original,
                    bins: histogram(&orig, &groups, n_groups, ValueKind::Original),
                },
                AttributeHistogram {
                    attribute: name,
                    kind: ValueKind::Learned,
                    bins: histogram(&lrn, &groups, n_groups, ValueKind::Learned),
                },
            )
        })
        .collect();

    let mut attributes = Vec::with_capacity(NUM_FEATURES);
    let mut histograms = Vec::with_capacity(2 * NUM_FEATURES);
    for (sep, ho, hl) in per_attr {
        attributes.push(sep);
        histograms.push(ho);
        histograms.push(hl);
    }
    Ok(SeparabilityReport {
        grouping,
        groups: groups_names,
        group_sizes,
        attributes,
        histograms,
    })
}
