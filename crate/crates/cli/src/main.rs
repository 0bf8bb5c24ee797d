//! `qbc`: train quantum Bayes classifiers on IDX image data, evaluate them
//! pair by pair and export their circuits.

mod config;
mod inspect;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qbc::classifier::{train, ClassPair, LossMatrix, TrainedQbc};
use qbc::evalharness::{evaluate_all_pairs, evaluate_pair, write_report, EvalReport, ReportFormat};
use qbc::preprocess::{load_idx, load_idx_images, load_split, ImageView, Split};
use qbc::qcircuit::{export, ExportFormat};
use qbc::QbcError;

use config::{parse_classes, TrainingFlags};

/// Dataset root used when neither `--data-dir`, the config file nor
/// `QBC_DATA_DIR` names one.
const DEFAULT_DATA_DIR: &str = "data";

#[derive(Debug, Parser)]
#[command(
    name = "qbc",
    version,
    about = "Quantum Bayes classifiers for binary image classification",
    long_about = "Quantum Bayes classifiers for binary image classification.\n\n\
        Settings come from defaults, then --config, then flags. Set RUST_LOG=info for progress logs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a classifier for one pair of classes and save it as JSON
    Train(TrainArgs),
    /// Predict the class of every image in an IDX file
    Predict(PredictArgs),
    /// Test a saved model on the images of its two classes
    EvalPair(EvalPairArgs),
    /// Train and test one classifier for each of the 45 pairs of classes 0-9
    EvalAll(EvalAllArgs),
    /// Write the circuit of a saved model
    Export(ExportArgs),
    /// Print the network, probability tables, rotation angles and binarizer of a model
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// IDX image file, optionally gzipped (or `images` in the config)
    #[arg(long, value_name = "FILE")]
    images: Option<PathBuf>,

    /// IDX label file, optionally gzipped (or `labels` in the config)
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,

    /// The two classes to separate, e.g. 0,1
    #[arg(long, value_name = "A,B", value_parser = parse_classes)]
    classes: ClassPair,

    /// Where to write the model
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// IDX image file, optionally gzipped
    #[arg(long, value_name = "FILE")]
    images: PathBuf,

    /// IDX label file; adds the true label to each line and an accuracy line
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,

    /// Decide by minimum risk under the loss matrix L00,L01,L10,L11, where
    /// Lij is the loss of choosing bit i when the truth is bit j
    #[arg(long, value_name = "L00,L01,L10,L11", value_parser = parse_loss)]
    loss: Option<LossMatrix>,

    /// Score with the classical chain rule instead of the circuit
    #[arg(long)]
    classical: bool,
}

#[derive(Debug, Args)]
struct EvalPairArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    /// IDX test image file, optionally gzipped
    #[arg(long, value_name = "FILE")]
    images: PathBuf,

    /// IDX test label file, optionally gzipped
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,

    /// Also write a one-row report (CSV, or JSON for a .json path)
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetArg {
    Mnist,
    FashionMnist,
}

impl DatasetArg {
    fn dir_name(self) -> &'static str {
        match self {
            DatasetArg::Mnist => "mnist",
            DatasetArg::FashionMnist => "fashion-mnist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct EvalAllArgs {
    /// Dataset directory under the data root (or `dataset` in the config)
    #[arg(long, value_enum)]
    dataset: Option<DatasetArg>,

    /// Data root holding mnist/ and fashion-mnist/ [default: $QBC_DATA_DIR, else data]
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    /// Where to write the report
    #[arg(long, value_name = "FILE")]
    report: PathBuf,

    /// Report format [default: json for a .json path, else csv]
    #[arg(long, value_enum)]
    format: Option<ReportFormatArg>,

    /// Worker threads; 0 uses every core
    #[arg(long, value_name = "K", default_value_t = 0)]
    jobs: usize,

    #[command(flatten)]
    training: TrainingFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CircuitFormatArg {
    Qasm3,
    Json,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,

    #[arg(long, value_enum, default_value = "qasm3")]
    format: CircuitFormatArg,

    /// Output file [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
}

/// Why a command stopped. Usage problems exit with 2, everything else
/// (unreadable data, corrupt models, I/O) with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<QbcError> for Failure {
    fn from(e: QbcError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn parse_loss(s: &str) -> Result<LossMatrix, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [l00, l01, l10, l11] = v[..] else {
        return Err(format!("expected 4 comma-separated losses, got {}", v.len()));
    };
    LossMatrix::new([[l00, l01], [l10, l11]]).map_err(|e| e.to_string())
}

fn required(value: Option<PathBuf>, fallback: Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    value
        .or(fallback)
        .ok_or_else(|| Failure::Usage(format!("{flag} is required (as a flag or in --config)")))
}

fn load_model(path: &Path) -> Result<TrainedQbc, Failure> {
    TrainedQbc::load(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let (config, paths) = args.training.resolve()?;
    let images = required(args.images, paths.images, "--images")?;
    let labels = required(args.labels, paths.labels, "--labels")?;
    let dataset = load_idx(&images, &labels)?;
    let model = train(&dataset, args.classes, &config)?;
    model.save(&args.out)?;

    let (a, b) = args.classes.labels();
    let counts = model.metadata().train_counts;
    let circuit = model.circuit();
    let entries: usize = model.net().features().map(|x| model.cpts().table(x).len()).sum();
    println!(
        "trained {} classifier for classes {a},{b} on {} + {} images",
        config.network, counts[0], counts[1]
    );
    println!("prior P(y={a}) = {:.6}", model.cpts().prior0());
    println!("{} features, {} conditional probabilities", model.net().n_features(), entries);
    println!(
        "circuit: {} qubits, {} rotations, {} X gates",
        circuit.n_qubits(),
        circuit.rotation_count(),
        circuit.x_count()
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let (count, rows, cols, pixels) = load_idx_images(&args.images)?;
    let labels = match &args.labels {
        Some(path) => {
            let set = load_idx(&args.images, path)?;
            Some(set.labels().to_vec())
        }
        None => None,
    };
    let pair = model.class_pair();
    let (mut correct, mut scored) = (0usize, 0usize);
    let header = if labels.is_some() { "index\tpredicted\tscore0\tscore1\tactual" } else { "index\tpredicted\tscore0\tscore1" };
    println!("{header}");
    for i in 0..count {
        let image = ImageView::new(rows, cols, &pixels[i * rows * cols..(i + 1) * rows * cols]);
        let mut p = if args.classical { model.classical_predict(&image)? } else { model.predict(&image)? };
        if let Some(loss) = &args.loss {
            p.bit = loss.decide(p.scores);
            p.label = pair.label(p.bit);
        }
        let line = format!("{i}\t{}\t{:e}\t{:e}", p.label, p.scores.0, p.scores.1);
        match &labels {
            Some(l) => {
                println!("{line}\t{}", l[i]);
                if pair.bit(l[i]).is_some() {
                    scored += 1;
                    correct += usize::from(l[i] == p.label);
                }
            }
            None => println!("{line}"),
        }
    }
    if labels.is_some() {
        let acc = if scored == 0 { 0.0 } else { correct as f64 / scored as f64 };
        println!("accuracy {acc:.4} ({correct}/{scored} images of classes {pair})");
    }
    Ok(())
}

fn cmd_eval_pair(args: EvalPairArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let test = load_idx(&args.images, &args.labels)?;
    let row = evaluate_pair(&model, &test)?;
    let c = row.counts();
    println!(
        "accuracy {:.4} classes {} tp {} fp {} fn {} tn {}",
        row.accuracy,
        model.class_pair(),
        c.tp,
        c.fp,
        c.fn_,
        c.tn
    );
    if let Some(path) = args.report {
        let report = EvalReport::new(args.images.display().to_string(), model.config(), vec![row])?;
        write_report(&report, &path, ReportFormat::from_path(&path))?;
    }
    Ok(())
}

fn cmd_eval_all(args: EvalAllArgs) -> Result<(), Failure> {
    let (config, paths) = args.training.resolve()?;
    let dataset = match (args.dataset, paths.dataset.as_deref()) {
        (Some(d), _) => d,
        (None, Some(name)) => DatasetArg::from_str(name, false).map_err(|e| Failure::Usage(format!("config dataset: {e}")))?,
        (None, None) => return Err(Failure::Usage("--dataset is required (as a flag or in --config)".into())),
    };
    let root = args
        .data_dir
        .or(paths.data_dir)
        .or_else(|| std::env::var_os("QBC_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let dir = root.join(dataset.dir_name());
    let train_set = load_split(&dir, Split::Train)?;
    let test_set = load_split(&dir, Split::Test)?;
    let report = evaluate_all_pairs(dataset.dir_name(), &train_set, &test_set, &config, args.jobs)?;
    let format = match args.format {
        Some(ReportFormatArg::Csv) => ReportFormat::Csv,
        Some(ReportFormatArg::Json) => ReportFormat::Json,
        None => ReportFormat::from_path(&args.report),
    };
    write_report(&report, &args.report, format)?;
    let a = &report.aggregates;
    println!(
        "{} {}: {} pairs, mean accuracy {:.4}, variance {:.6}, precision {:.4}, recall {:.4}, f1 {:.4}",
        dataset.dir_name(),
        config.network,
        a.pairs,
        a.mean_accuracy,
        a.variance,
        a.mean_precision,
        a.mean_recall,
        a.f1
    );
    println!("report written to {}", args.report.display());
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let format = match args.format {
        CircuitFormatArg::Qasm3 => ExportFormat::Qasm3,
        CircuitFormatArg::Json => ExportFormat::Json,
    };
    let text = export(model.circuit(), format);
    match args.out {
        Some(path) => fs::write(&path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_inspect(args: InspectArgs) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    print!("{}", inspect::render(&model)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::EvalPair(a) => cmd_eval_pair(a),
        Command::EvalAll(a) => cmd_eval_all(a),
        Command::Export(a) => cmd_export(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
