//! One-vs-one evaluation over class pairs, aggregate metrics and report
//! files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{train_pooled, ClassPair, PooledDataset, TrainConfig, TrainedQbc};
use crate::error::{invalid, QbcError, Result};
use crate::preprocess::ImageDataset;

/// Confusion counts with the bit-1 class (larger label) as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// `num / den`, or 1 when both are 0 and 0 when only `den` is.
fn ratio_or_vacuous(num: u64, den: u64) -> f64 {
    match (num, den) {
        (0, 0) => 1.0,
        (_, 0) => 0.0,
        _ => num as f64 / den as f64,
    }
}

impl ConfusionCounts {
    pub fn record(&mut self, actual: u8, predicted: u8) {
        match (actual, predicted) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (1, _) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        ratio_or_vacuous(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_vacuous(self.tp, self.tp + self.fn_)
    }
}

/// One row of a report: the test result of the classifier for `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairResult {
    pub class_i: u8,
    pub class_j: u8,
    pub accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl PairResult {
    pub fn new(pair: ClassPair, counts: ConfusionCounts) -> Self {
        let (class_i, class_j) = pair.labels();
        Self {
            class_i,
            class_j,
            accuracy: counts.accuracy(),
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            tn: counts.tn,
        }
    }

    pub fn counts(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            tn: self.tn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aggregates {
    pub pairs: usize,
    pub mean_accuracy: f64,
    /// Population variance of the pair accuracies.
    pub variance: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    /// Harmonic mean of `mean_precision` and `mean_recall`.
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub dataset: String,
    pub config: TrainConfig,
    pub pairs: Vec<PairResult>,
    pub aggregates: Aggregates,
}

impl EvalReport {
    pub fn new(dataset: impl Into<String>, config: TrainConfig, pairs: Vec<PairResult>) -> Result<Self> {
        let aggregates = aggregate(&pairs)?;
        Ok(Self {
            dataset: dataset.into(),
            config,
            pairs,
            aggregates,
        })
    }
}

pub fn aggregate(rows: &[PairResult]) -> Result<Aggregates> {
    if rows.is_empty() {
        return invalid("cannot aggregate an empty set of pair results");
    }
    let k = rows.len() as f64;
    let mean = |f: &dyn Fn(&PairResult) -> f64| rows.iter().map(f).sum::<f64>() / k;
    let mean_accuracy = mean(&|r| r.accuracy);
    let variance = mean(&|r| (r.accuracy - mean_accuracy).powi(2));
    let mean_precision = mean(&|r| r.counts().precision());
    let mean_recall = mean(&|r| r.counts().recall());
    let f1 = if mean_precision + mean_recall > 0.0 {
        2.0 * mean_precision * mean_recall / (mean_precision + mean_recall)
    } else {
        0.0
    };
    Ok(Aggregates {
        pairs: rows.len(),
        mean_accuracy,
        variance,
        mean_precision,
        mean_recall,
        f1,
    })
}

/// Tests `model` on the images of its two classes.
pub fn evaluate_pair(model: &TrainedQbc, test: &ImageDataset) -> Result<PairResult> {
    let pair = model.class_pair();
    let mut counts = ConfusionCounts::default();
    for (label, image) in test.iter() {
        if let Some(actual) = pair.bit(label) {
            counts.record(actual, model.predict(&image)?.bit);
        }
    }
    finish(pair, counts)
}

/// [`evaluate_pair`] on pre-pooled test features.
pub fn evaluate_pair_pooled(model: &TrainedQbc, test: &PooledDataset) -> Result<PairResult> {
    let pair = model.class_pair();
    let mut counts = ConfusionCounts::default();
    for (i, &label) in test.labels().iter().enumerate() {
        if let Some(actual) = pair.bit(label) {
            counts.record(actual, model.predict_pooled(test.vector(i))?.bit);
        }
    }
    finish(pair, counts)
}

fn finish(pair: ClassPair, counts: ConfusionCounts) -> Result<PairResult> {
    if counts.total() == 0 {
        return invalid(format!("test set has no images of classes {pair}"));
    }
    Ok(PairResult::new(pair, counts))
}

/// All unordered pairs `(i, j)`, `i < j`, of `classes`.
pub fn all_pairs(classes: &[u8]) -> Vec<ClassPair> {
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    for (k, &i) in sorted.iter().enumerate() {
        for &j in &sorted[k + 1..] {
            out.push(ClassPair::new(i, j).expect("distinct classes"));
        }
    }
    out
}

/// Trains and tests one classifier per pair. `jobs = 0` uses every core.
/// Rows come back in the order of `pairs` whatever the thread count.
pub fn evaluate_pairs(
    train: &ImageDataset,
    test: &ImageDataset,
    config: &TrainConfig,
    pairs: &[ClassPair],
    jobs: usize,
) -> Result<Vec<PairResult>> {
    config.validate()?;
    for pair in pairs {
        let (a, b) = pair.labels();
        for class in [a, b] {
            if !train.contains_class(class) {
                return invalid(format!("class {class} is missing from the training data"));
            }
            if !test.contains_class(class) {
                return invalid(format!("class {class} is missing from the test data"));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| QbcError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let (train_pooled_set, test_pooled_set) = rayon::join(
            || PooledDataset::new(train, &config.feature_spec),
            || PooledDataset::new(test, &config.feature_spec),
        );
        let (train_set, test_set) = (train_pooled_set?, test_pooled_set?);
        pairs
            .par_iter()
            .map(|&pair| {
                let model = train_pooled(&train_set, pair, config)?;
                let row = evaluate_pair_pooled(&model, &test_set)?;
                log::info!("pair {pair}: accuracy {:.4}", row.accuracy);
                Ok(row)
            })
            .collect()
    })
}

/// The one-vs-one sweep over the 45 pairs of classes 0–9.
pub fn evaluate_all_pairs(
    dataset: &str,
    train: &ImageDataset,
    test: &ImageDataset,
    config: &TrainConfig,
    jobs: usize,
) -> Result<EvalReport> {
    let classes: Vec<u8> = (0..10).collect();
    let rows = evaluate_pairs(train, test, config, &all_pairs(&classes), jobs)?;
    EvalReport::new(dataset, config.clone(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` files get JSON, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = QbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => invalid(format!("unknown report format {other:?} (expected csv or json)")),
        }
    }
}

const DATASET_PREFIX: &str = "# dataset: ";
const CONFIG_PREFIX: &str = "# config: ";

fn csv_error(e: csv::Error) -> QbcError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => QbcError::Io(io),
            _ => unreachable!(),
        }
    } else {
        QbcError::Format(format!("report csv: {e}"))
    }
}

/// Writes the report. CSV files start with `#` comment lines echoing the
/// dataset and the training configuration, followed by one row per pair.
pub fn write_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)
                .map_err(|e| QbcError::Io(std::io::Error::other(e)))?;
            writeln!(out)?;
        }
        ReportFormat::Csv => {
            writeln!(out, "{DATASET_PREFIX}{}", report.dataset)?;
            let config = serde_json::to_string(&report.config).expect("config serializes");
            writeln!(out, "{CONFIG_PREFIX}{config}")?;
            let mut w = csv::Writer::from_writer(&mut out);
            for row in &report.pairs {
                w.serialize(row).map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<EvalReport> {
    let path = path.as_ref();
    match format {
        ReportFormat::Json => serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| QbcError::Format(format!("report json: {e}"))),
        ReportFormat::Csv => read_csv_report(path),
    }
}

/// Rebuilds a report from its CSV form; aggregates are recomputed from the
/// rows.
fn read_csv_report(path: &Path) -> Result<EvalReport> {
    let mut dataset = None;
    let mut config = None;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix(DATASET_PREFIX) {
            dataset = Some(rest.to_string());
        } else if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
            config = Some(
                serde_json::from_str::<TrainConfig>(rest)
                    .map_err(|e| QbcError::Format(format!("report config line: {e}")))?,
            );
        } else if !line.starts_with('#') {
            break;
        }
    }
    let (Some(dataset), Some(config)) = (dataset, config) else {
        return Err(QbcError::Format("report csv lacks the dataset/config header lines".into()));
    };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_error)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<PairResult>, _>>()
        .map_err(csv_error)?;
    EvalReport::new(dataset, config, rows)
}
