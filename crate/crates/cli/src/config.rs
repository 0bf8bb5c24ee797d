//! Training settings assembled from defaults, an optional JSON config file
//! and command-line flags, in that order of increasing precedence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::{Map, Value};

use qbc::bayesnet::{CmiWeighting, NetworkKind};
use qbc::classifier::{ClassPair, TrainConfig};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetworkArg {
    Naive,
    Spode,
    Tan,
    Symmetric,
}

impl From<NetworkArg> for NetworkKind {
    fn from(n: NetworkArg) -> Self {
        match n {
            NetworkArg::Naive => NetworkKind::Naive,
            NetworkArg::Spode => NetworkKind::Spode,
            NetworkArg::Tan => NetworkKind::Tan,
            NetworkArg::Symmetric => NetworkKind::Symmetric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Joint,
    ClassConditional,
}

impl From<WeightingArg> for CmiWeighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Joint => CmiWeighting::Joint,
            WeightingArg::ClassConditional => CmiWeighting::ClassConditional,
        }
    }
}

/// Flags shared by every command that trains models.
#[derive(Debug, Clone, Args)]
pub struct TrainingFlags {
    /// JSON config file. Keys mirror the flags in snake_case (network,
    /// superparent, tan_root, symmetric_pairs, alpha, cmi_weighting,
    /// feature_spec, crossing_range, shots, seed, elide_x_pairs) plus the
    /// paths images, labels, dataset and data_dir. Unknown keys are errors
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Network structure [default: naive]
    #[arg(long, value_enum)]
    pub network: Option<NetworkArg>,

    /// Superparent feature of the SPODE network, 1-based [default: 5]
    #[arg(long, value_name = "N")]
    pub superparent: Option<usize>,

    /// Root feature of the TAN spanning tree, 1-based [default: 1]
    #[arg(long, value_name = "N")]
    pub tan_root: Option<usize>,

    /// Linked feature pairs of the symmetric network [default: 1-9,2-8,3-7,4-6]
    #[arg(long, value_name = "PAIRS", value_parser = parse_pairs)]
    pub symmetric_pairs: Option<Vec<(usize, usize)>>,

    /// Laplace pseudocount for probability estimates [default: 1]
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,

    /// Class weighting of the conditional mutual information used by TAN [default: joint]
    #[arg(long, value_enum)]
    pub cmi_weighting: Option<WeightingArg>,

    /// Pooled-value range whose density crossings become binarization
    /// thresholds, as LO,HI or "all" for every real crossing [default: 0,1]
    #[arg(long, value_name = "RANGE", value_parser = parse_range)]
    pub crossing_range: Option<RangeArg>,

    /// Measurement shots used to read the circuit; 0 reads exact
    /// probabilities [default: 0]
    #[arg(long, value_name = "N")]
    pub shots: Option<u64>,

    /// Seed for shot sampling [default: 0]
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Cancel back-to-back X gates in the compiled circuit
    #[arg(long)]
    pub elide_x_pairs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg(pub Option<[f64; 2]>);

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| format!("{pair:?} is not a pair like 1-9"))?;
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn parse_range(s: &str) -> Result<RangeArg, String> {
    if s == "all" {
        return Ok(RangeArg(None));
    }
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI or all")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(RangeArg(Some([parse(lo)?, parse(hi)?])))
}

pub fn parse_classes(s: &str) -> Result<ClassPair, String> {
    let (a, b) = s.split_once(',').ok_or("expected two labels like 0,1")?;
    let parse = |v: &str| v.trim().parse::<u8>().map_err(|e| format!("{v:?}: {e}"));
    ClassPair::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
}

/// Paths that a config file may carry next to the training settings.
#[derive(Debug, Default, Clone)]
pub struct ConfigPaths {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub dataset: Option<String>,
    pub data_dir: Option<PathBuf>,
}

fn take_string(map: &mut Map<String, Value>, key: &str) -> Result<Option<String>, Failure> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(Failure::Usage(format!("config key {key:?} must be a string, got {other}"))),
    }
}

fn read_config(path: &Path) -> Result<(TrainConfig, ConfigPaths), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let mut map: Map<String, Value> = serde_json::from_str(&text).map_err(bad)?;
    let paths = ConfigPaths {
        images: take_string(&mut map, "images")?.map(PathBuf::from),
        labels: take_string(&mut map, "labels")?.map(PathBuf::from),
        dataset: take_string(&mut map, "dataset")?,
        data_dir: take_string(&mut map, "data_dir")?.map(PathBuf::from),
    };
    let config = serde_json::from_value(Value::Object(map)).map_err(bad)?;
    Ok((config, paths))
}

impl TrainingFlags {
    /// Defaults, overlaid by the config file, overlaid by flags.
    pub fn resolve(&self) -> Result<(TrainConfig, ConfigPaths), Failure> {
        let (mut c, paths) = match &self.config {
            Some(path) => read_config(path)?,
            None => (TrainConfig::default(), ConfigPaths::default()),
        };
        if let Some(v) = self.network {
            c.network = v.into();
        }
        if let Some(v) = self.superparent {
            c.superparent = v;
        }
        if let Some(v) = self.tan_root {
            c.tan_root = v;
        }
        if let Some(v) = &self.symmetric_pairs {
            c.symmetric_pairs = v.clone();
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.cmi_weighting {
            c.cmi_weighting = v.into();
        }
        if let Some(RangeArg(v)) = self.crossing_range {
            c.crossing_range = v;
        }
        if let Some(v) = self.shots {
            c.shots = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.elide_x_pairs |= self.elide_x_pairs;
        c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok((c, paths))
    }
}
