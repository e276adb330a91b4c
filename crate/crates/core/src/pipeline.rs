//! End-to-end runs: ingestion, tree training, relearning and zero-shot
//! evaluation, each writing its artifacts into one output directory.
//!
//! ```text
//! <out>/census.csv            class,category,count
//! <out>/stats_original.csv    attribute,min,max,mean,stddev
//! <out>/ingest.json
//! <out>/tree.json  rules.txt  train.json
//! <out>/learned.csv           12 learned columns + class + category
//! <out>/stats_learned.csv
//! <out>/separability.json  separability.csv  histograms.csv
//! <out>/model.json  eval.json  confusion_*.csv
//! <out>/report.json
//! ```
//!
//! Every stage is deterministic for a fixed configuration and input, so
//! reruns reproduce the files byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alnid::{
    learned_stats, relearn_dataset, separability_report, training_set, Grouping, LabelTarget,
    LearnedInstance, RelearnError, SeparabilityReport, ValueKind,
};
use crate::dtree::{build_tree, DecisionTree, TreeError, TreeParams};
use crate::kdd::{
    attribute_stats, census, census_mismatches, open_dataset, split_zero_shot,
    stratified_subsample, Category, CensusMismatch, CensusRow, ClassId, ClassTable, DatasetSplit,
    EncodedInstance, KddError, FEATURE_NAMES, KDD10_ORIGINAL_STATS, NUM_FEATURES,
};
use crate::stats::Summary;
use crate::zsl::{
    build_signature_matrix, eszsl_residual, evaluate, grid_search, knn_predict, log_grid,
    predict_eszsl, train_from_moments, EvalResult, GridSearchResult, InstanceKnn, Moments,
    ZslError, ZslModel,
};

pub const CONFIG_VERSION: u32 = 1;

/// Residual above which a trained ESZSL mapping is reported as inaccurate.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Share of each seen class held out for hyperparameter selection.
const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnMode {
    /// Nearest category signature.
    #[default]
    Signature,
    /// Nearest seen instances, voting with their categories.
    Instance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    /// Tree used by `relearn` and `zsl`; defaults to `<out>/tree.json`.
    pub tree: Option<PathBuf>,
    pub min_leaf_size: usize,
    pub max_depth: Option<usize>,
    pub tree_target: LabelTarget,
    pub gamma: f64,
    pub lambda: f64,
    pub k: usize,
    pub grid_search: bool,
    pub seed: u64,
    pub subsample: Option<usize>,
    pub strict: bool,
    pub eszsl_target: LabelTarget,
    pub knn_mode: KnnMode,
    pub baseline: bool,
    pub grouping: Grouping,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            data: None,
            out: PathBuf::from("run"),
            tree: None,
            min_leaf_size: 2,
            max_depth: None,
            tree_target: LabelTarget::Category,
            gamma: 1.0,
            lambda: 1.0,
            k: 1,
            grid_search: false,
            seed: 0,
            subsample: None,
            strict: false,
            eszsl_target: LabelTarget::Class,
            knn_mode: KnnMode::Signature,
            baseline: true,
            grouping: Grouping::Category,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!(
            "{}: {e}",
            path.display()
        )))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.version));
        }
        if self.min_leaf_size == 0 {
            return bad("min_leaf_size must be at least 1".into());
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.subsample == Some(0) {
            return bad("subsample must be at least 1".into());
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf_size: self.min_leaf_size,
            max_depth: self.max_depth,
        }
    }

    pub fn tree_path(&self) -> PathBuf {
        self.tree.clone().unwrap_or_else(|| self.out.join("tree.json"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no dataset given (use --data or `data` in the config)")]
    NoData,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Kdd(#[from] KddError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Relearn(#[from] RelearnError),
    #[error(transparent)]
    Zsl(#[from] ZslError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("tree file {} not found; run `train` first", .0.display())]
    MissingTree(PathBuf),
    #[error("census differs from the reference table for {} classes", .0.len())]
    CensusMismatch(Vec<CensusMismatch>),
}

impl PipelineError {
    /// 1 usage, 2 data, 3 strict-mode acceptance violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::NoData => 1,
            PipelineError::CensusMismatch(_) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(ZslError::from)?;
    text.push('\n');
    write_file(path, &text)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn ensure_out(cfg: &RunConfig) -> Result<(), PipelineError> {
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))
}

/// The dataset as loaded, plus the working set the stages run on.
#[derive(Clone, Debug)]
pub struct LoadedData {
    /// Census of the complete file, before any subsampling.
    pub census: Vec<CensusRow>,
    pub mismatches: Vec<CensusMismatch>,
    pub total_instances: usize,
    /// Full data, or the stratified subsample when one is configured.
    pub working: Vec<EncodedInstance>,
    pub split: DatasetSplit,
}

pub fn load(cfg: &RunConfig) -> Result<LoadedData, PipelineError> {
    cfg.validate()?;
    let path = cfg.data.as_deref().ok_or(PipelineError::NoData)?;
    let data = open_dataset(path)?;
    from_instances(cfg, data)
}

/// Same as [`load`] for instances already in memory.
pub fn from_instances(
    cfg: &RunConfig,
    data: Vec<EncodedInstance>,
) -> Result<LoadedData, PipelineError> {
    if data.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let table = ClassTable::kdd99();
    let census = census(&data, &table);
    let mismatches = census_mismatches(&census, &table);
    let total_instances = data.len();
    let working = match cfg.subsample {
        Some(n) => stratified_subsample(&data, n, cfg.seed),
        None => data,
    };
    let split = split_zero_shot(&working, &table)?;
    Ok(LoadedData {
        census,
        mismatches,
        total_instances,
        working,
        split,
    })
}

fn check_strict(cfg: &RunConfig, data: &LoadedData) -> Result<(), PipelineError> {
    if cfg.strict && !data.mismatches.is_empty() {
        return Err(PipelineError::CensusMismatch(data.mismatches.clone()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub attribute: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
}

impl StatsRow {
    fn new(attribute: &str, s: Summary) -> Self {
        StatsRow {
            attribute: attribute.to_string(),
            min: s.min,
            max: s.max,
            mean: s.mean,
            stddev: s.stddev,
        }
    }
}

/// One statistic compared with the published reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub attribute: String,
    pub statistic: String,
    pub expected: f64,
    pub found: f64,
    pub tolerance: f64,
    pub matches: bool,
}

/// Table comparison for the full canonical subset: exact min/max, +-0.01 on
/// mean and stddev.
pub fn reference_checks(stats: &[StatsRow]) -> Vec<ReferenceCheck> {
    let mut out = Vec::new();
    for (row, &(min, max, mean, sd)) in stats.iter().zip(KDD10_ORIGINAL_STATS.iter()) {
        for (name, expected, found, tol) in [
            ("min", min, row.min, 0.0),
            ("max", max, row.max, 0.0),
            ("mean", mean, row.mean, 0.01),
            ("stddev", sd, row.stddev, 0.01),
        ] {
            out.push(ReferenceCheck {
                attribute: row.attribute.clone(),
                statistic: name.to_string(),
                expected,
                found,
                tolerance: tol,
                matches: (found - expected).abs() <= tol,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_instances: usize,
    pub working_instances: usize,
    pub seen_instances: usize,
    pub unseen_instances: usize,
    pub category_counts: BTreeMap<String, u64>,
    pub census_matches_reference: bool,
    pub mismatches: Vec<CensusMismatch>,
    pub stats: Vec<StatsRow>,
    /// Only filled for an unsampled load whose census matches the reference.
    pub reference_checks: Vec<ReferenceCheck>,
}

pub fn original_stats(data: &[EncodedInstance]) -> Result<Vec<StatsRow>, PipelineError> {
    FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| Ok(StatsRow::new(name, attribute_stats(data, i)?)))
        .collect()
}

/// Writes the census and attribute statistics. In strict mode a census
/// deviation fails after the files are written.
pub fn ingest(cfg: &RunConfig, data: &LoadedData) -> Result<IngestReport, PipelineError> {
    let stats = original_stats(&data.working)?;
    let mut category_counts = BTreeMap::new();
    for row in &data.census {
        *category_counts.entry(row.category.to_string()).or_insert(0) += row.count;
    }
    let canonical = cfg.subsample.is_none() && data.mismatches.is_empty();
    let report = IngestReport {
        total_instances: data.total_instances,
        working_instances: data.working.len(),
        seen_instances: data.split.seen.len(),
        unseen_instances: data.split.unseen.len(),
        category_counts,
        census_matches_reference: data.mismatches.is_empty(),
        mismatches: data.mismatches.clone(),
        reference_checks: if canonical { reference_checks(&stats) } else { Vec::new() },
        stats,
    };
    ensure_out(cfg)?;
    write_csv(&cfg.out.join("census.csv"), &data.census)?;
    write_csv(&cfg.out.join("stats_original.csv"), &report.stats)?;
    write_json(&cfg.out.join("ingest.json"), &report)?;
    check_strict(cfg, data)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub target: LabelTarget,
    pub instances: usize,
    pub accuracy: f64,
    pub leaves: usize,
    pub nodes: usize,
    pub depth: usize,
    pub root_attribute: Option<String>,
    pub min_leaf_size: usize,
    pub max_depth: Option<usize>,
}

/// Grows the tree on the seen split and saves it with its rules.
pub fn train(
    cfg: &RunConfig,
    data: &LoadedData,
) -> Result<(DecisionTree, TrainReport), PipelineError> {
    check_strict(cfg, data)?;
    let examples = training_set(&data.split.seen, cfg.tree_target);
    let tree = build_tree(&examples, cfg.tree_params())?;
    let report = TrainReport {
        target: cfg.tree_target,
        instances: examples.len(),
        accuracy: tree.accuracy(&examples),
        leaves: tree.leaf_count(),
        nodes: tree.node_count(),
        depth: tree.depth(),
        root_attribute: tree.root_attribute().map(|a| FEATURE_NAMES[a].to_string()),
        min_leaf_size: cfg.min_leaf_size,
        max_depth: cfg.max_depth,
    };
    ensure_out(cfg)?;
    let tree_path = cfg.out.join("tree.json");
    let mut json = tree.to_json()?;
    json.push('\n');
    write_file(&tree_path, &json)?;
    let rules: String = tree
        .extract_rules()
        .iter()
        .map(|r| format!("{r}\n"))
        .collect();
    write_file(&cfg.out.join("rules.txt"), &rules)?;
    write_json(&cfg.out.join("train.json"), &report)?;
    Ok((tree, report))
}

pub fn load_tree(cfg: &RunConfig) -> Result<DecisionTree, PipelineError> {
    let path = cfg.tree_path();
    if !path.exists() {
        return Err(PipelineError::MissingTree(path));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(DecisionTree::from_json(&text)?)
}

/// One row of `learned.csv`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedRow {
    pub duration: u32,
    pub protocol_type: u32,
    pub src_bytes: u32,
    pub dst_bytes: u32,
    pub urgent: u32,
    pub count: u32,
    pub srv_count: u32,
    pub same_srv_rate: u32,
    pub dst_host_count: u32,
    pub dst_host_srv_count: u32,
    pub dst_host_same_srv_rate: u32,
    pub dst_host_same_src_port_rate: u32,
    pub class: String,
    pub category: Category,
}

impl From<&LearnedInstance> for LearnedRow {
    fn from(l: &LearnedInstance) -> Self {
        let v = l.learned;
        LearnedRow {
            duration: v[0],
            protocol_type: v[1],
            src_bytes: v[2],
            dst_bytes: v[3],
            urgent: v[4],
            count: v[5],
            srv_count: v[6],
            same_srv_rate: v[7],
            dst_host_count: v[8],
            dst_host_srv_count: v[9],
            dst_host_same_srv_rate: v[10],
            dst_host_same_src_port_rate: v[11],
            class: l.class.name().to_string(),
            category: l.category,
        }
    }
}

impl TryFrom<LearnedRow> for LearnedInstance {
    type Error = KddError;

    fn try_from(r: LearnedRow) -> Result<Self, KddError> {
        let class = ClassId::from_name(&r.class).ok_or(KddError::UnknownClass(r.class))?;
        Ok(LearnedInstance {
            learned: [
                r.duration,
                r.protocol_type,
                r.src_bytes,
                r.dst_bytes,
                r.urgent,
                r.count,
                r.srv_count,
                r.same_srv_rate,
                r.dst_host_count,
                r.dst_host_srv_count,
                r.dst_host_same_srv_rate,
                r.dst_host_same_src_port_rate,
            ],
            class,
            category: r.category,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityRow {
    pub attribute: String,
    pub original_ratio: f64,
    pub learned_ratio: f64,
    pub learned_better: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub attribute: String,
    pub kind: ValueKind,
    pub lo: f64,
    pub hi: f64,
    pub group: String,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelearnReport {
    pub instances: usize,
    pub stats: Vec<StatsRow>,
    pub root_attribute: Option<String>,
    /// Smallest learned value of the root attribute over all instances.
    pub root_attribute_min: Option<u32>,
    pub improved_attributes: usize,
    pub separability: SeparabilityReport,
}

pub fn learned_stats_rows(learned: &[LearnedInstance]) -> Result<Vec<StatsRow>, PipelineError> {
    FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| Ok(StatsRow::new(name, learned_stats(learned, i)?)))
        .collect()
}

/// Relearns the working set with `tree` and writes the learned dataset,
/// its statistics and the separability comparison.
pub fn relearn(
    cfg: &RunConfig,
    data: &LoadedData,
    tree: &DecisionTree,
) -> Result<RelearnReport, PipelineError> {
    let learned = relearn_dataset(tree, &data.working)?;
    let stats = learned_stats_rows(&learned)?;
    let separability = separability_report(&data.working, &learned, cfg.grouping)?;
    let root = tree.root_attribute();
    let report = RelearnReport {
        instances: learned.len(),
        stats,
        root_attribute: root.map(|a| FEATURE_NAMES[a].to_string()),
        root_attribute_min: root.and_then(|a| learned.iter().map(|l| l.learned[a]).min()),
        improved_attributes: separability.improved_count(),
        separability,
    };

    ensure_out(cfg)?;
    let rows: Vec<LearnedRow> = learned.iter().map(LearnedRow::from).collect();
    write_csv(&cfg.out.join("learned.csv"), &rows)?;
    write_csv(&cfg.out.join("stats_learned.csv"), &report.stats)?;
    write_json(&cfg.out.join("separability.json"), &report.separability)?;
    let sep_rows: Vec<SeparabilityRow> = report
        .separability
        .attributes
        .iter()
        .map(|a| SeparabilityRow {
            attribute: a.attribute.clone(),
            original_ratio: a.original_ratio,
            learned_ratio: a.learned_ratio,
            learned_better: a.learned_better(),
        })
        .collect();
    write_csv(&cfg.out.join("separability.csv"), &sep_rows)?;
    let mut hist_rows = Vec::new();
    for h in &report.separability.histograms {
        for bin in &h.bins {
            for (group, &count) in report.separability.groups.iter().zip(&bin.counts) {
                hist_rows.push(HistogramRow {
                    attribute: h.attribute.clone(),
                    kind: h.kind,
                    lo: bin.lo,
                    hi: bin.hi,
                    group: group.clone(),
                    count,
                });
            }
        }
    }
    write_csv(&cfg.out.join("histograms.csv"), &hist_rows)?;
    Ok(report)
}

/// Zero-shot results for one feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEval {
    /// `learned` or `original`.
    pub features: String,
    pub gamma: f64,
    pub lambda: f64,
    pub grid: Option<GridSearchResult>,
    pub train_targets: Vec<String>,
    pub residual: f64,
    pub residual_ok: bool,
    pub eszsl: EvalResult,
    pub knn: EvalResult,
    pub per_class: Vec<UnseenClassRow>,
}

impl FeatureEval {
    pub fn best_accuracy(&self) -> f64 {
        self.eszsl.overall_accuracy.max(self.knn.overall_accuracy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnseenClassRow {
    pub class: String,
    pub category: Category,
    pub instances: u64,
    pub eszsl_correct: u64,
    pub knn_correct: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZslReport {
    pub seen_instances: usize,
    pub unseen_instances: usize,
    pub k: usize,
    pub knn_mode: KnnMode,
    pub learned: FeatureEval,
    pub baseline: Option<FeatureEval>,
}

/// Per-feature (min, max) over `rows`.
fn feature_ranges(rows: &[[f64; NUM_FEATURES]]) -> Vec<(f64, f64)> {
    (0..NUM_FEATURES)
        .map(|i| {
            rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[i]), hi.max(r[i]))
            })
        })
        .collect()
}

/// Seeded per-class holdout: indices for fitting and for validation.
fn holdout(labels: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_val = vec![false; labels.len()];
    for members in by_label.values() {
        // a class needs at least one fitting instance to keep its signature
        let n_val = ((members.len() as f64 * VALIDATION_FRACTION).round() as usize)
            .min(members.len() - 1);
        for j in index::sample(&mut rng, members.len(), n_val) {
            is_val[members[j]] = true;
        }
    }
    (0..labels.len()).partition(|&i| !is_val[i])
}

struct Prepared<'a> {
    seen_x: Vec<[f64; NUM_FEATURES]>,
    unseen_x: Vec<[f64; NUM_FEATURES]>,
    seen: &'a [EncodedInstance],
    unseen: &'a [EncodedInstance],
}

/// Seen-split targets for ESZSL: the classes or categories present, in
/// table order.
fn train_targets(seen: &[EncodedInstance], target: LabelTarget) -> (Vec<String>, Vec<usize>) {
    let names = target.names();
    let raw: Vec<usize> = seen.iter().map(|i| target.label_of(i.class, i.category)).collect();
    let mut present: Vec<usize> = raw.clone();
    present.sort_unstable();
    present.dedup();
    let remap: BTreeMap<usize, usize> = present.iter().enumerate().map(|(j, &r)| (r, j)).collect();
    (
        present.iter().map(|&r| names[r].clone()).collect(),
        raw.iter().map(|r| remap[r]).collect(),
    )
}

fn eval_features(
    cfg: &RunConfig,
    p: &Prepared,
    features: &str,
    scaling: Vec<(f64, f64)>,
) -> Result<(FeatureEval, ZslModel), PipelineError> {
    let (target_names, targets) = train_targets(p.seen, cfg.eszsl_target);
    let z = target_names.len();
    let labeled = |idx: &[usize]| -> Vec<(&[f64], usize)> {
        idx.iter().map(|&i| (p.seen_x[i].as_slice(), targets[i])).collect()
    };
    let all: Vec<usize> = (0..p.seen_x.len()).collect();

    let (gamma, lambda, grid) = if cfg.grid_search {
        let (fit, val) = holdout(&targets, cfg.seed);
        let fit_rows = labeled(&fit);
        let sig = build_signature_matrix(fit_rows.iter().copied(), target_names.clone())?;
        let moments = Moments::from_labeled(fit_rows.iter().copied(), NUM_FEATURES, z)?;
        let validation: Vec<(Vec<f64>, usize)> =
            val.iter().map(|&i| (p.seen_x[i].to_vec(), targets[i])).collect();
        let result = grid_search(&moments, &sig, &validation, &log_grid())?;
        (result.best.gamma, result.best.lambda, Some(result))
    } else {
        (cfg.gamma, cfg.lambda, None)
    };

    let rows = labeled(&all);
    let train_sig = build_signature_matrix(rows.iter().copied(), target_names.clone())?;
    let moments = Moments::from_labeled(rows.iter().copied(), NUM_FEATURES, z)?;
    let eszsl = train_from_moments(&moments, &train_sig, gamma, lambda)?;
    let residual = eszsl_residual(&eszsl, &moments, &train_sig)?;

    let (cat_names, cat_targets) = train_targets(p.seen, LabelTarget::Category);
    let cat_rows: Vec<(&[f64], usize)> = p
        .seen_x
        .iter()
        .zip(&cat_targets)
        .map(|(x, &t)| (x.as_slice(), t))
        .collect();
    let inference_sig = build_signature_matrix(cat_rows.iter().copied(), cat_names.clone())?;

    let eszsl_pred: Vec<usize> = p
        .unseen_x
        .par_iter()
        .map(|x| predict_eszsl(&eszsl, x, &inference_sig))
        .collect::<Result<_, _>>()?;
    let knn_pred: Vec<usize> = match cfg.knn_mode {
        KnnMode::Signature => p
            .unseen_x
            .par_iter()
            .map(|x| knn_predict(x, &inference_sig, cfg.k))
            .collect::<Result<_, _>>()?,
        KnnMode::Instance => {
            let index = InstanceKnn::fit(cat_rows.iter().copied(), cat_names.len())?;
            p.unseen_x
                .par_iter()
                .map(|x| index.predict(x, cfg.k))
                .collect::<Result<_, _>>()?
        }
    };

    let labels: Vec<String> = Category::ALL.iter().map(|c| c.to_string()).collect();
    let truths: Vec<String> = p.unseen.iter().map(|i| i.category.to_string()).collect();
    let named = |pred: &[usize]| -> Vec<String> { pred.iter().map(|&j| cat_names[j].clone()).collect() };
    let eszsl_named = named(&eszsl_pred);
    let knn_named = named(&knn_pred);
    let eszsl_eval = evaluate(&eszsl_named, &truths, &labels)?;
    let knn_eval = evaluate(&knn_named, &truths, &labels)?;

    let mut per_class: BTreeMap<ClassId, UnseenClassRow> = BTreeMap::new();
    for (i, inst) in p.unseen.iter().enumerate() {
        let row = per_class.entry(inst.class).or_insert_with(|| UnseenClassRow {
            class: inst.class.name().to_string(),
            category: inst.category,
            instances: 0,
            eszsl_correct: 0,
            knn_correct: 0,
        });
        row.instances += 1;
        row.eszsl_correct += u64::from(eszsl_named[i] == truths[i]);
        row.knn_correct += u64::from(knn_named[i] == truths[i]);
    }

    let model = ZslModel::new(features, scaling, eszsl, train_sig, inference_sig, cfg.k);
    let eval = FeatureEval {
        features: features.to_string(),
        gamma,
        lambda,
        grid,
        train_targets: target_names,
        residual,
        residual_ok: residual <= RESIDUAL_TOLERANCE,
        eszsl: eszsl_eval,
        knn: knn_eval,
        per_class: per_class.into_values().collect(),
    };
    Ok((eval, model))
}

fn scale_rows(rows: &[[f64; NUM_FEATURES]], ranges: &[(f64, f64)]) -> Vec<[f64; NUM_FEATURES]> {
    rows.iter()
        .map(|r| {
            let mut out = *r;
            for (v, &(lo, hi)) in out.iter_mut().zip(ranges) {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
            }
            out
        })
        .collect()
}

/// Trains ESZSL on the seen split and evaluates the unseen split at category
/// level, on learned attributes and optionally on scaled originals.
pub fn zsl(
    cfg: &RunConfig,
    data: &LoadedData,
    tree: &DecisionTree,
) -> Result<(ZslReport, ZslModel), PipelineError> {
    let seen = &data.split.seen;
    let unseen = &data.split.unseen;
    if seen.is_empty() || unseen.is_empty() {
        return Err(PipelineError::Zsl(ZslError::EmptyGroup(
            if seen.is_empty() { "seen" } else { "unseen" }.to_string(),
        )));
    }
    let learned_seen = relearn_dataset(tree, seen)?;
    let learned_unseen = relearn_dataset(tree, unseen)?;
    let learned = Prepared {
        seen_x: learned_seen.iter().map(LearnedInstance::as_f64).collect(),
        unseen_x: learned_unseen.iter().map(LearnedInstance::as_f64).collect(),
        seen,
        unseen,
    };
    let (learned_eval, model) = eval_features(cfg, &learned, "learned", Vec::new())?;

    let mut baseline_model = None;
    let baseline = if cfg.baseline {
        let raw_seen: Vec<[f64; NUM_FEATURES]> = seen.iter().map(|i| i.features).collect();
        let raw_unseen: Vec<[f64; NUM_FEATURES]> = unseen.iter().map(|i| i.features).collect();
        let ranges = feature_ranges(&raw_seen);
        let original = Prepared {
            seen_x: scale_rows(&raw_seen, &ranges),
            unseen_x: scale_rows(&raw_unseen, &ranges),
            seen,
            unseen,
        };
        let (eval, m) = eval_features(cfg, &original, "original", ranges)?;
        baseline_model = Some(m);
        Some(eval)
    } else {
        None
    };

    let report = ZslReport {
        seen_instances: seen.len(),
        unseen_instances: unseen.len(),
        k: cfg.k,
        knn_mode: cfg.knn_mode,
        learned: learned_eval,
        baseline,
    };

    ensure_out(cfg)?;
    let mut json = model.to_json()?;
    json.push('\n');
    write_file(&cfg.out.join("model.json"), &json)?;
    write_json(&cfg.out.join("eval.json"), &report)?;
    write_file(&cfg.out.join("confusion_eszsl.csv"), &report.learned.eszsl.confusion_csv())?;
    write_file(&cfg.out.join("confusion_knn.csv"), &report.learned.knn.confusion_csv())?;
    if let (Some(b), Some(m)) = (&report.baseline, baseline_model) {
        let mut json = m.to_json()?;
        json.push('\n');
        write_file(&cfg.out.join("model_baseline.json"), &json)?;
        write_file(&cfg.out.join("confusion_baseline_eszsl.csv"), &b.eszsl.confusion_csv())?;
        write_file(&cfg.out.join("confusion_baseline_knn.csv"), &b.knn.confusion_csv())?;
    }
    Ok((report, model))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub ingest: IngestReport,
    pub train: TrainReport,
    pub relearn: RelearnReport,
    pub zsl: ZslReport,
}

/// All stages in order, sharing one load, plus `report.json`.
pub fn run_all(cfg: &RunConfig, data: &LoadedData) -> Result<RunReport, PipelineError> {
    let ingest = ingest(cfg, data)?;
    let (tree, train) = train(cfg, data)?;
    let relearn = relearn(cfg, data, &tree)?;
    let (zsl, _) = zsl(cfg, data, &tree)?;
    let report = RunReport {
        config: cfg.clone(),
        ingest,
        train,
        relearn,
        zsl,
    };
    write_json(&cfg.out.join("report.json"), &report)?;
    Ok(report)
}

pub fn read_census_csv(path: &Path) -> Result<Vec<CensusRow>, PipelineError> {
    read_csv(path)
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<StatsRow>, PipelineError> {
    read_csv(path)
}

pub fn read_separability_csv(path: &Path) -> Result<Vec<SeparabilityRow>, PipelineError> {
    read_csv(path)
}

pub fn read_histograms_csv(path: &Path) -> Result<Vec<HistogramRow>, PipelineError> {
    read_csv(path)
}

pub fn read_learned_csv(path: &Path) -> Result<Vec<LearnedInstance>, PipelineError> {
    read_csv::<LearnedRow>(path)?
        .into_iter()
        .map(|r| LearnedInstance::try_from(r).map_err(PipelineError::from))
        .collect()
}

/// Confusion matrix CSV as written by [`EvalResult::confusion_csv`].
pub fn read_confusion_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<u64>>), PipelineError> {
    let mut r = csv::Reader::from_path(path)?;
    let labels: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut matrix = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<u64>()
                    .map_err(|e| PipelineError::Config(format!("confusion cell `{c}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        matrix.push(row);
    }
    Ok((labels, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::from_toml_str("version = 1\ngamma = 0.5\nknn_mode = \"instance\"\n").unwrap();
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.knn_mode, KnnMode::Instance);
        assert_eq!(cfg.tree_path(), PathBuf::from("run/tree.json"));
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_bad_values() {
        for text in ["version = 2", "gamma = 0.0", "k = 0", "min_leaf_size = 0", "colour = 1"] {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn holdout_keeps_a_fitting_instance_per_class() {
        let labels = [0, 0, 0, 0, 0, 1, 2, 2];
        let (fit, val) = holdout(&labels, 3);
        assert_eq!(fit.len() + val.len(), labels.len());
        assert_eq!(val.len(), 1);
        for l in 0..3 {
            assert!(fit.iter().any(|&i| labels[i] == l));
        }
        assert_eq!(holdout(&labels, 3), (fit, val));
    }

    #[test]
    fn empty_dataset_is_a_data_error() {
        let err = from_instances(&RunConfig::default(), Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
