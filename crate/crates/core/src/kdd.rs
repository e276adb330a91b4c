//! KDD Cup 99 ingestion.
//!
//! Records are 42 comma-separated fields: 41 connection attributes followed by
//! the attack label terminated by a period (`...,normal.`). Only twelve
//! attributes are kept; `protocol_type` is the one symbolic attribute among
//! them and is encoded alphabetically (`icmp` = 1, `tcp` = 2, `udp` = 3).
//!
//! Input may be plain text or gzip; the compression is detected from the
//! stream's magic bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{summarize, StatsError, Summary};

/// Number of fields on a record line, label included.
pub const RAW_FIELD_COUNT: usize = 42;
/// Number of attributes kept after encoding.
pub const NUM_FEATURES: usize = 12;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "duration",
    "protocol_type",
    "src_bytes",
    "dst_bytes",
    "urgent",
    "count",
    "srv_count",
    "same_srv_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_same_src_port_rate",
];

/// Raw field index of each selected attribute, in [`FEATURE_NAMES`] order.
pub const SELECTED_FIELDS: [usize; NUM_FEATURES] = [0, 1, 4, 5, 8, 22, 23, 28, 31, 32, 33, 35];

const PROTOCOL_FIELD: usize = 1;
const SERVICE_FIELD: usize = 2;
const FLAG_FIELD: usize = 3;
const LABEL_FIELD: usize = 41;

/// Encoded feature positions holding rates in [0, 1]; all others are counts.
const RATE_FEATURES: [usize; 3] = [7, 10, 11];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Dos,
    Normal,
    Probe,
    R2l,
    U2r,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Dos,
        Category::Normal,
        Category::Probe,
        Category::R2l,
        Category::U2r,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Dos => "DOS",
            Category::Normal => "NORMAL",
            Category::Probe => "PROBE",
            Category::R2l => "R2L",
            Category::U2r => "U2R",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    pub category: Category,
    pub zero_shot: bool,
    /// Instance count in the canonical 10% subset.
    pub expected_count: u64,
}

/// Index of a class in the canonical [`ClassTable::kdd99`] table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u8);

impl ClassId {
    pub fn name(self) -> &'static str {
        KDD99_CLASSES[self.0 as usize].0
    }

    pub fn category(self) -> Category {
        KDD99_CLASSES[self.0 as usize].1
    }

    pub fn is_zero_shot(self) -> bool {
        KDD99_CLASSES[self.0 as usize].2
    }

    pub fn from_name(name: &str) -> Option<ClassId> {
        KDD99_CLASSES
            .iter()
            .position(|(n, ..)| *n == name)
            .map(|i| ClassId(i as u8))
    }
}

const KDD99_CLASSES: [(&str, Category, bool, u64); 23] = [
    ("smurf", Category::Dos, false, 280_790),
    ("neptune", Category::Dos, false, 107_201),
    ("back", Category::Dos, false, 2_203),
    ("teardrop", Category::Dos, true, 979),
    ("pod", Category::Dos, false, 264),
    ("land", Category::Dos, true, 21),
    ("normal", Category::Normal, false, 97_277),
    ("satan", Category::Probe, false, 1_589),
    ("ipsweep", Category::Probe, true, 1_247),
    ("portsweep", Category::Probe, false, 1_040),
    ("nmap", Category::Probe, true, 231),
    ("warezclient", Category::R2l, false, 1_020),
    ("guess_passwd", Category::R2l, true, 53),
    ("warezmaster", Category::R2l, false, 20),
    ("imap", Category::R2l, true, 12),
    ("ftp_write", Category::R2l, false, 8),
    ("multihop", Category::R2l, false, 7),
    ("phf", Category::R2l, false, 4),
    ("spy", Category::R2l, false, 2),
    ("buffer_overflow", Category::U2r, false, 30),
    ("rootkit", Category::U2r, true, 10),
    ("loadmodule", Category::U2r, false, 9),
    ("perl", Category::U2r, true, 3),
];

/// Total instance count of the canonical 10% subset.
pub const KDD99_10PCT_INSTANCES: u64 = 494_021;

/// Class census, category and zero-shot flag per attack class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    classes: Vec<ClassInfo>,
}

impl ClassTable {
    pub fn new(classes: Vec<ClassInfo>) -> Self {
        ClassTable { classes }
    }

    /// The 23-class zero-shot setup over the 10% subset.
    pub fn kdd99() -> Self {
        ClassTable {
            classes: KDD99_CLASSES
                .iter()
                .map(|&(name, category, zero_shot, expected_count)| ClassInfo {
                    name: name.to_string(),
                    category,
                    zero_shot,
                    expected_count,
                })
                .collect(),
        }
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn get(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn zero_shot_classes(&self) -> impl Iterator<Item = &ClassInfo> {
        self.classes.iter().filter(|c| c.zero_shot)
    }

    pub fn expected_total(&self) -> u64 {
        self.classes.iter().map(|c| c.expected_count).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Icmp,
    Tcp,
    Udp,
}

impl Protocol {
    pub fn parse(s: &str) -> Option<Protocol> {
        match s {
            "icmp" => Some(Protocol::Icmp),
            "tcp" => Some(Protocol::Tcp),
            "udp" => Some(Protocol::Udp),
            _ => None,
        }
    }

    /// Alphabetical code starting at 1.
    pub fn code(self) -> f64 {
        match self {
            Protocol::Icmp => 1.0,
            Protocol::Tcp => 2.0,
            Protocol::Udp => 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldErrorKind {
    FieldCount { found: usize },
    UnparseableNumeric { text: String },
    OutOfRange { value: String },
    UnknownSymbol { text: String },
    UnknownLabel { label: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KddError {
    #[error("line {line}: {}", describe(.kind, .field))]
    Record {
        line: usize,
        /// Zero-based field index; `None` for whole-line problems.
        field: Option<usize>,
        kind: FieldErrorKind,
    },
    #[error("I/O error at line {line}: {message}")]
    Io { line: usize, message: String },
    #[error("instance of class `{0}` is not in the class table")]
    UnknownClass(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn describe(kind: &FieldErrorKind, field: &Option<usize>) -> String {
    let at = field.map(|f| format!(" (field {f})")).unwrap_or_default();
    match kind {
        FieldErrorKind::FieldCount { found } => {
            format!("expected {RAW_FIELD_COUNT} fields, found {found}")
        }
        FieldErrorKind::UnparseableNumeric { text } => format!("unparseable number `{text}`{at}"),
        FieldErrorKind::OutOfRange { value } => format!("value {value} out of range{at}"),
        FieldErrorKind::UnknownSymbol { text } => format!("unknown symbol `{text}`{at}"),
        FieldErrorKind::UnknownLabel { label } => format!("unknown label `{label}`{at}"),
    }
}

/// One parsed connection record with all 41 attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct RawConnectionRecord {
    pub protocol: Protocol,
    pub service: String,
    pub flag: String,
    /// Numeric value of each raw field; symbolic slots hold 0.
    numeric: [f64; RAW_FIELD_COUNT - 1],
    pub class: ClassId,
}

impl RawConnectionRecord {
    /// Value of a numeric raw field, `None` for the symbolic ones and the label.
    pub fn numeric(&self, field: usize) -> Option<f64> {
        match field {
            PROTOCOL_FIELD | SERVICE_FIELD | FLAG_FIELD => None,
            f if f < LABEL_FIELD => Some(self.numeric[f]),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        self.class.name()
    }
}

/// Parses one record line; `line_no` is used only for error reporting.
pub fn parse_kdd_line(line: &str, line_no: usize) -> Result<RawConnectionRecord, KddError> {
    let err = |field: Option<usize>, kind| KddError::Record {
        line: line_no,
        field,
        kind,
    };
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != RAW_FIELD_COUNT {
        return Err(err(None, FieldErrorKind::FieldCount { found: fields.len() }));
    }

    let label = fields[LABEL_FIELD].trim();
    let label = label.strip_suffix('.').unwrap_or(label);
    let class = ClassId::from_name(label).ok_or_else(|| {
        err(
            Some(LABEL_FIELD),
            FieldErrorKind::UnknownLabel {
                label: label.to_string(),
            },
        )
    })?;

    let protocol_text = fields[PROTOCOL_FIELD].trim();
    let protocol = Protocol::parse(protocol_text).ok_or_else(|| {
        err(
            Some(PROTOCOL_FIELD),
            FieldErrorKind::UnknownSymbol {
                text: protocol_text.to_string(),
            },
        )
    })?;

    let mut numeric = [0.0; RAW_FIELD_COUNT - 1];
    for (i, text) in fields[..LABEL_FIELD].iter().enumerate() {
        if matches!(i, PROTOCOL_FIELD | SERVICE_FIELD | FLAG_FIELD) {
            continue;
        }
        let text = text.trim();
        let value: f64 = text.parse().map_err(|_| {
            err(
                Some(i),
                FieldErrorKind::UnparseableNumeric {
                    text: text.to_string(),
                },
            )
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(err(
                Some(i),
                FieldErrorKind::OutOfRange {
                    value: text.to_string(),
                },
            ));
        }
        numeric[i] = value;
    }

    for (feature, &field) in SELECTED_FIELDS.iter().enumerate() {
        if field == PROTOCOL_FIELD {
            continue;
        }
        let v = numeric[field];
        let bad = if RATE_FEATURES.contains(&feature) {
            v > 1.0
        } else {
            v.fract() != 0.0
        };
        if bad {
            return Err(err(
                Some(field),
                FieldErrorKind::OutOfRange {
                    value: fields[field].trim().to_string(),
                },
            ));
        }
    }

    Ok(RawConnectionRecord {
        protocol,
        service: fields[SERVICE_FIELD].trim().to_string(),
        flag: fields[FLAG_FIELD].trim().to_string(),
        numeric,
        class,
    })
}

/// A connection reduced to the twelve selected attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedInstance {
    pub features: [f64; NUM_FEATURES],
    pub class: ClassId,
    pub category: Category,
}

impl EncodedInstance {
    pub fn class_name(&self) -> &'static str {
        self.class.name()
    }
}

pub fn encode_instance(record: &RawConnectionRecord) -> EncodedInstance {
    let mut features = [0.0; NUM_FEATURES];
    for (slot, &field) in features.iter_mut().zip(SELECTED_FIELDS.iter()) {
        *slot = if field == PROTOCOL_FIELD {
            record.protocol.code()
        } else {
            record.numeric[field]
        };
    }
    EncodedInstance {
        features,
        class: record.class,
        category: record.class.category(),
    }
}

/// Wraps `source` in a gzip decoder when it starts with the gzip magic bytes.
pub fn decompressing_reader<R: Read + 'static>(source: R) -> std::io::Result<Box<dyn BufRead>> {
    let mut buffered = BufReader::with_capacity(1 << 16, source);
    let head = buffered.fill_buf()?;
    if head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(buffered),
        )))
    } else {
        Ok(Box::new(buffered))
    }
}

/// Streams records from `source` (plain or gzip), preserving input order.
///
/// Blank lines are skipped. The first malformed record aborts the load.
pub fn load_dataset<R: Read + 'static>(source: R) -> Result<Vec<EncodedInstance>, KddError> {
    let reader = decompressing_reader(source).map_err(|e| KddError::Io {
        line: 0,
        message: e.to_string(),
    })?;
    read_records(reader)
}

pub fn open_dataset(path: &Path) -> Result<Vec<EncodedInstance>, KddError> {
    let file = File::open(path).map_err(|e| KddError::Io {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    load_dataset(file)
}

fn read_records<B: BufRead>(mut reader: B) -> Result<Vec<EncodedInstance>, KddError> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        line_no += 1;
        let n = reader.read_line(&mut buf).map_err(|e| KddError::Io {
            line: line_no,
            message: e.to_string(),
        })?;
        if n == 0 {
            break;
        }
        if buf.trim().is_empty() {
            continue;
        }
        let record = parse_kdd_line(&buf, line_no)?;
        out.push(encode_instance(&record));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub seen: Vec<EncodedInstance>,
    pub unseen: Vec<EncodedInstance>,
}

/// Routes instances of zero-shot classes to `unseen`, everything else to `seen`.
pub fn split_zero_shot(
    dataset: &[EncodedInstance],
    table: &ClassTable,
) -> Result<DatasetSplit, KddError> {
    let mut split = DatasetSplit::default();
    for inst in dataset {
        let info = table
            .get(inst.class_name())
            .ok_or_else(|| KddError::UnknownClass(inst.class_name().to_string()))?;
        if info.zero_shot {
            split.unseen.push(inst.clone());
        } else {
            split.seen.push(inst.clone());
        }
    }
    Ok(split)
}

pub fn attribute_stats(dataset: &[EncodedInstance], attribute: usize) -> Result<Summary, KddError> {
    if attribute >= NUM_FEATURES {
        return Err(StatsError::BadIndex {
            index: attribute,
            available: NUM_FEATURES,
        }
        .into());
    }
    Ok(summarize(dataset.iter().map(|i| i.features[attribute]))?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusRow {
    pub class: String,
    pub category: Category,
    pub count: u64,
}

/// Per-class counts in class-table order (classes absent from the data get 0).
pub fn census(dataset: &[EncodedInstance], table: &ClassTable) -> Vec<CensusRow> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for inst in dataset {
        *counts.entry(inst.class_name()).or_default() += 1;
    }
    table
        .classes()
        .iter()
        .map(|c| CensusRow {
            class: c.name.clone(),
            category: c.category,
            count: counts.get(c.name.as_str()).copied().unwrap_or(0),
        })
        .collect()
}

pub fn category_histogram(dataset: &[EncodedInstance]) -> [u64; 5] {
    let mut h = [0u64; 5];
    for inst in dataset {
        h[inst.category.index()] += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusMismatch {
    pub class: String,
    pub expected: u64,
    pub found: u64,
}

pub fn census_mismatches(rows: &[CensusRow], table: &ClassTable) -> Vec<CensusMismatch> {
    table
        .classes()
        .iter()
        .filter_map(|c| {
            let found = rows
                .iter()
                .find(|r| r.class == c.name)
                .map_or(0, |r| r.count);
            (found != c.expected_count).then(|| CensusMismatch {
                class: c.name.clone(),
                expected: c.expected_count,
                found,
            })
        })
        .collect()
}

/// Stratified subsample: each class keeps a share proportional to its size
/// (at least one instance), chosen with a seeded RNG. Input order is kept.
pub fn stratified_subsample(
    dataset: &[EncodedInstance],
    size: usize,
    seed: u64,
) -> Vec<EncodedInstance> {
    if size >= dataset.len() {
        return dataset.to_vec();
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, inst) in dataset.iter().enumerate() {
        by_class.entry(inst.class).or_default().push(i);
    }
    let total = dataset.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(size + by_class.len());
    for members in by_class.values() {
        let quota = ((members.len() as f64 * size as f64 / total).round() as usize)
            .max(1)
            .min(members.len());
        keep.extend(
            index::sample(&mut rng, members.len(), quota)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| dataset[i].clone()).collect()
}

/// Reference statistics of the twelve original attributes over the full
/// 10% subset: (min, max, mean, stddev).
pub const KDD10_ORIGINAL_STATS: [(f64, f64, f64, f64); NUM_FEATURES] = [
    (0.0, 58_329.0, 47.979, 707.747),
    (1.0, 3.0, 2.189, 0.961),
    (0.0, 693_375_640.0, 3025.616, 988_219.101),
    (0.0, 5_155_468.0, 868.531, 33_040.035),
    (0.0, 3.0, 0.0, 0.006),
    (0.0, 511.0, 332.286, 213.147),
    (0.0, 511.0, 292.907, 246.323),
    (0.0, 1.0, 0.792, 0.388),
    (0.0, 255.0, 232.471, 64.745),
    (0.0, 255.0, 188.666, 106.04),
    (0.0, 1.0, 0.754, 0.411),
    (0.0, 1.0, 0.602, 0.481),
];

/// Learned-attribute ranges reported for a reference tree; used as
/// plausibility bounds only since they depend on the induced tree:
/// (min, max, mean, stddev).
pub const KDD10_LEARNED_STATS: [(f64, f64, f64, f64); NUM_FEATURES] = [
    (0.0, 3.0, 0.013, 0.117),
    (0.0, 1.0, 0.845, 0.362),
    (0.0, 7.0, 0.762, 1.526),
    (0.0, 3.0, 0.057, 0.297),
    (0.0, 1.0, 0.0, 0.016),
    (1.0, 4.0, 1.821, 0.425),
    (0.0, 2.0, 0.0, 0.017),
    (0.0, 1.0, 0.784, 0.411),
    (0.0, 2.0, 0.033, 0.238),
    (0.0, 3.0, 0.21, 0.469),
    (0.0, 1.0, 0.024, 0.154),
    (0.0, 3.0, 0.585, 0.779),
];
