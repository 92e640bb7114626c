//! `geosep`: batch command-line front end for geometric separation
//! scoring, confidence calibration, and evaluation.
//!
//! Every subcommand is deterministic for fixed flags and inputs (bench
//! timing aside). Machine-readable CSV goes to stdout or `--out`; human
//! diagnostics go to stderr. Exit codes: 0 on success, 1 for runtime
//! failures such as unreadable files, 2 for usage and contract errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use geosep_core::calibration::{
    collect_pairs, fit, fit_curve_table, load_calibrator, save_calibrator, write_fit_curve_csv,
    Calibrator, CalibratorKind, CalibrationError, ISOTONIC_FORMAT, LOGISTIC_FORMAT,
    LOGISTIC_SLOPE_CAP,
};
use geosep_core::data::{
    load_dataset, load_dataset_strict, load_predictions, write_dataset, DataError, Dataset,
};
use geosep_core::geometry::{write_scores_csv, ClassPartitionIndex, ScoreKind};
use geosep_core::metrics::ece;
use geosep_core::pipeline::{
    benchmark_throughput, generate_blobs, knn_predict, predict_batch, run_experiment,
    sample_queries, score_batch, write_predictions_csv, ExperimentConfig, PipelineError,
};
use rayon::prelude::*;

const DEFAULT_KNN: usize = 5;
const FIT_CURVE_BINS: usize = 50;
const BENCH_QUERY_NOISE: f64 = 0.5;

fn long_version_string() -> String {
    format!(
        "{} (formats: {ISOTONIC_FORMAT}, {LOGISTIC_FORMAT})",
        env!("CARGO_PKG_VERSION")
    )
}

#[derive(Parser)]
#[command(
    name = "geosep",
    version,
    long_version = long_version_string(),
    about = "Geometric separation scoring and confidence calibration for labeled point sets"
)]
struct Cli {
    /// Reject datasets whose feature magnitudes exceed the strict limit.
    #[arg(long, global = true)]
    strict: bool,

    /// Worker threads (default: 1 for bench, all cores elsewhere).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score inputs with signed separation against a training set.
    #[command(group(ArgGroup::new("labeling").required(true).args(["labels", "knn"])))]
    Separation {
        /// Training dataset CSV (label,f0,f1,...).
        #[arg(long)]
        train: PathBuf,
        /// Inputs to score, same CSV layout as the training data.
        #[arg(long)]
        inputs: PathBuf,
        /// Predicted labels as a predictions CSV (index,predicted_label[,native_confidence]).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Predict labels with k-nearest-neighbor voting on the training set.
        #[arg(long)]
        knn: Option<usize>,
        /// Also compute the exact separation (quadratic scan) per input.
        #[arg(long)]
        exact: bool,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a confidence calibrator on a validation set and write it out.
    Calibrate {
        /// Training dataset CSV.
        #[arg(long)]
        train: PathBuf,
        /// Validation dataset CSV with true labels.
        #[arg(long)]
        val: PathBuf,
        /// Predict validation labels with k-nearest-neighbor voting (default 5).
        #[arg(long, conflicts_with = "predictions")]
        knn: Option<usize>,
        /// Use externally supplied predictions instead of the built-in model.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Calibrator family.
        #[arg(long, value_enum, default_value_t = KindArg::Isotonic)]
        kind: KindArg,
        /// Destination path for the calibrator file.
        #[arg(long)]
        out: PathBuf,
        /// Also write a 50-group score-versus-accuracy table to this path.
        #[arg(long)]
        dump_fit_curve: Option<PathBuf>,
    },
    /// Score inputs and apply a saved calibrator to each score.
    #[command(group(ArgGroup::new("labeling").required(true).args(["labels", "knn"])))]
    Predict {
        /// Training dataset CSV.
        #[arg(long)]
        train: PathBuf,
        /// Inputs to score, same CSV layout as the training data.
        #[arg(long)]
        inputs: PathBuf,
        /// Predicted labels as a predictions CSV.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Predict labels with k-nearest-neighbor voting on the training set.
        #[arg(long)]
        knn: Option<usize>,
        /// Calibrator file written by `calibrate`.
        #[arg(long)]
        calibrator: PathBuf,
        /// Also use the exact separation instead of the fast score.
        #[arg(long)]
        exact: bool,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure expected calibration error on a test set, or run repeated
    /// split/fit/evaluate trials over one dataset.
    Evaluate {
        /// Training dataset CSV (single evaluation).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Test dataset CSV with true labels (single evaluation).
        #[arg(long)]
        test: Option<PathBuf>,
        /// Calibrator file written by `calibrate` (single evaluation).
        #[arg(long)]
        calibrator: Option<PathBuf>,
        /// Predict labels with k-nearest-neighbor voting (default 5).
        #[arg(long, conflicts_with = "predictions")]
        knn: Option<usize>,
        /// Use externally supplied predictions instead of the built-in model.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Number of equal-width confidence bins.
        #[arg(long, default_value_t = 30)]
        m_bins: usize,
        /// Use the exact separation instead of the fast score.
        #[arg(long)]
        exact: bool,
        /// Trial mode: number of repeated split/fit/evaluate rounds.
        #[arg(long)]
        trials: Option<usize>,
        /// Trial mode: dataset to split per trial.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Trial mode: calibrator family fitted per trial.
        #[arg(long, value_enum, default_value_t = KindArg::Isotonic)]
        kind: KindArg,
        /// Trial mode: base random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure confidence-prediction throughput on a training set.
    #[command(group(ArgGroup::new("source").required(true).args(["train", "synthetic"])))]
    Bench {
        /// Training dataset CSV.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Generate NxD synthetic training data instead (e.g. 42000x784).
        #[arg(long, value_parser = parse_synthetic)]
        synthetic: Option<(usize, usize)>,
        /// Number of query points to time per repeat.
        #[arg(long)]
        queries: usize,
        /// Timed repeats after one warm-up pass.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Seed for synthetic data and query sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a Gaussian-blob dataset CSV.
    Synth {
        /// Number of classes (at least 2).
        #[arg(long)]
        classes: usize,
        /// Points per class.
        #[arg(long)]
        per_class: usize,
        /// Feature dimension.
        #[arg(long)]
        dim: usize,
        /// Standard deviation of each cluster.
        #[arg(long)]
        spread: f64,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination dataset CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    Isotonic,
    Logistic,
}

impl From<KindArg> for CalibratorKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Isotonic => CalibratorKind::Isotonic,
            KindArg::Logistic => CalibratorKind::Logistic,
        }
    }
}

fn parse_synthetic(raw: &str) -> Result<(usize, usize), String> {
    let (n, d) = raw
        .split_once('x')
        .ok_or_else(|| format!("expected NxD, e.g. 42000x784, got {raw}"))?;
    let n: usize = n.parse().map_err(|_| format!("bad point count in {raw}"))?;
    let d: usize = d.parse().map_err(|_| format!("bad dimension in {raw}"))?;
    if n < 2 || d == 0 {
        return Err(format!("need at least 2 points and 1 dimension, got {raw}"));
    }
    Ok((n, d))
}

/// A subcommand failure with its process exit code: 1 for runtime
/// problems, 2 for violated input contracts.
enum Failure {
    Runtime(String),
    Contract(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Contract(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Runtime(m) | Failure::Contract(m) => m,
        }
    }
}

fn data_failure(err: DataError) -> Failure {
    match err {
        DataError::Io { .. } => Failure::Runtime(err.to_string()),
        _ => Failure::Contract(err.to_string()),
    }
}

fn calibration_failure(err: CalibrationError) -> Failure {
    match err {
        CalibrationError::Io { .. } => Failure::Runtime(err.to_string()),
        _ => Failure::Contract(err.to_string()),
    }
}

fn pipeline_failure(err: PipelineError) -> Failure {
    match err {
        PipelineError::Data(inner) => data_failure(inner),
        PipelineError::Calibration(inner) => calibration_failure(inner),
        PipelineError::ThreadPool { .. } => Failure::Runtime(err.to_string()),
        _ => Failure::Contract(err.to_string()),
    }
}

fn write_failure(what: &str, err: io::Error) -> Failure {
    Failure::Runtime(format!("cannot write {what}: {err}"))
}

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("error: {}", failure.message());
        process::exit(failure.code());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let parallel = configure_threads(cli.threads, matches!(cli.command, Command::Bench { .. }))?;
    let strict = cli.strict;
    match cli.command {
        Command::Separation {
            train,
            inputs,
            labels,
            knn,
            exact,
            out,
        } => cmd_separation(&train, &inputs, labels, knn, exact, out, strict, parallel),
        Command::Calibrate {
            train,
            val,
            knn,
            predictions,
            kind,
            out,
            dump_fit_curve,
        } => cmd_calibrate(
            &train,
            &val,
            knn,
            predictions,
            kind.into(),
            &out,
            dump_fit_curve,
            strict,
            parallel,
        ),
        Command::Predict {
            train,
            inputs,
            labels,
            knn,
            calibrator,
            exact,
            out,
        } => cmd_predict(
            &train,
            &inputs,
            labels,
            knn,
            &calibrator,
            exact,
            out,
            strict,
            parallel,
        ),
        Command::Evaluate {
            train,
            test,
            calibrator,
            knn,
            predictions,
            m_bins,
            exact,
            trials,
            data,
            kind,
            seed,
        } => cmd_evaluate(EvaluateSpec {
            train,
            test,
            calibrator,
            knn,
            predictions,
            m_bins,
            exact,
            trials,
            data,
            kind: kind.into(),
            seed,
            strict,
            parallel,
        }),
        Command::Bench {
            train,
            synthetic,
            queries,
            repeats,
            seed,
        } => cmd_bench(train, synthetic, queries, repeats, seed, strict, cli.threads),
        Command::Synth {
            classes,
            per_class,
            dim,
            spread,
            seed,
            out,
        } => cmd_synth(classes, per_class, dim, spread, seed, &out),
    }
}

/// Applies `--threads` and reports whether batch work should fan out.
/// Bench manages its own timing pool, so only validation applies there.
fn configure_threads(threads: Option<usize>, bench: bool) -> Result<bool, Failure> {
    match threads {
        Some(0) => Err(Failure::Contract(
            "--threads must be a positive thread count".to_string(),
        )),
        _ if bench => Ok(false),
        Some(1) => Ok(false),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Runtime(format!("cannot size the thread pool: {e}")))?;
            Ok(true)
        }
        None => Ok(true),
    }
}

fn load(path: &PathBuf, strict: bool) -> Result<Dataset, Failure> {
    if strict {
        load_dataset_strict(path).map_err(data_failure)
    } else {
        load_dataset(path).map_err(data_failure)
    }
}

fn build_index(train: &Dataset) -> Result<ClassPartitionIndex, Failure> {
    ClassPartitionIndex::build(train).map_err(|e| Failure::Contract(e.to_string()))
}

fn check_dimensions(index: &ClassPartitionIndex, inputs: &Dataset) -> Result<(), Failure> {
    if index.dimension() != inputs.dimension() {
        return Err(Failure::Contract(format!(
            "dimension mismatch: train has {} features, inputs have {}",
            index.dimension(),
            inputs.dimension()
        )));
    }
    Ok(())
}

/// Pairs each input's features with a predicted label, either replayed
/// from a predictions CSV (which must cover every input exactly once) or
/// produced by k-nearest-neighbor voting on the training index.
fn assign_labels(
    index: &ClassPartitionIndex,
    inputs: &Dataset,
    labels: Option<&PathBuf>,
    knn: Option<usize>,
    parallel: bool,
) -> Result<Vec<(Vec<f64>, String)>, Failure> {
    if let Some(path) = labels {
        let records = load_predictions(path).map_err(data_failure)?;
        let mut assigned: Vec<Option<String>> = vec![None; inputs.len()];
        for record in records {
            let slot = assigned.get_mut(record.point_index).ok_or_else(|| {
                Failure::Contract(format!(
                    "prediction index {} is out of range for {} inputs",
                    record.point_index,
                    inputs.len()
                ))
            })?;
            if slot.is_some() {
                return Err(Failure::Contract(format!(
                    "duplicate prediction for input {}",
                    record.point_index
                )));
            }
            *slot = Some(record.predicted_label);
        }
        inputs
            .points()
            .iter()
            .zip(assigned)
            .enumerate()
            .map(|(i, (point, label))| {
                let label = label.ok_or_else(|| {
                    Failure::Contract(format!("no prediction supplied for input {i}"))
                })?;
                Ok((point.features.clone(), label))
            })
            .collect()
    } else {
        let k = knn.unwrap_or(DEFAULT_KNN);
        let predict = |features: &Vec<f64>| {
            knn_predict(index, features, k).map(|(label, _)| (features.clone(), label))
        };
        let rows: Result<Vec<_>, PipelineError> = if parallel {
            inputs
                .points()
                .par_iter()
                .map(|p| predict(&p.features))
                .collect()
        } else {
            inputs.points().iter().map(|p| predict(&p.features)).collect()
        };
        rows.map_err(pipeline_failure)
    }
}

/// Streams one CSV payload to `--out` or stdout.
fn emit<F>(out: Option<&PathBuf>, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| write_failure(&path.display().to_string(), e))?;
            let mut buffered = BufWriter::new(file);
            write(&mut buffered)
                .and_then(|()| buffered.flush())
                .map_err(|e| write_failure(&path.display().to_string(), e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| write_failure("stdout", e))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_separation(
    train: &PathBuf,
    inputs: &PathBuf,
    labels: Option<PathBuf>,
    knn: Option<usize>,
    exact: bool,
    out: Option<PathBuf>,
    strict: bool,
    parallel: bool,
) -> Result<(), Failure> {
    let train_data = load(train, strict)?;
    let index = build_index(&train_data)?;
    let input_data = load(inputs, strict)?;
    check_dimensions(&index, &input_data)?;
    let labeled = assign_labels(&index, &input_data, labels.as_ref(), knn, parallel)?;
    let rows = score_batch(&index, &labeled, exact, parallel).map_err(pipeline_failure)?;
    emit(out.as_ref(), |w| write_scores_csv(w, &rows))?;
    eprintln!(
        "scored {} inputs against {} training points ({})",
        rows.len(),
        index.total_count(),
        if exact { "fast + exact" } else { "fast" }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_calibrate(
    train: &PathBuf,
    val: &PathBuf,
    knn: Option<usize>,
    predictions: Option<PathBuf>,
    kind: CalibratorKind,
    out: &PathBuf,
    dump_fit_curve: Option<PathBuf>,
    strict: bool,
    parallel: bool,
) -> Result<(), Failure> {
    let train_data = load(train, strict)?;
    let index = build_index(&train_data)?;
    let val_data = load(val, strict)?;
    check_dimensions(&index, &val_data)?;
    let labeled = assign_labels(&index, &val_data, predictions.as_ref(), knn, parallel)?;
    let scored = score_batch(&index, &labeled, false, parallel).map_err(pipeline_failure)?;
    let scores: Vec<f64> = scored.iter().map(|r| r.fast).collect();
    let outcomes: Vec<bool> = labeled
        .iter()
        .zip(val_data.points())
        .map(|((_, predicted), truth)| predicted == &truth.label)
        .collect();
    let pairs = collect_pairs(&scores, &outcomes).map_err(calibration_failure)?;
    let calibrator = fit(&pairs, kind).map_err(calibration_failure)?;
    if let Calibrator::Logistic(model) = &calibrator {
        if model.is_capped() {
            eprintln!(
                "warning: validation outcomes are perfectly separated by score; \
                 logistic slope capped at {LOGISTIC_SLOPE_CAP:.0}"
            );
        }
    }
    save_calibrator(&calibrator, out).map_err(calibration_failure)?;
    if let Some(curve_path) = dump_fit_curve {
        let table =
            fit_curve_table(&scores, &outcomes, FIT_CURVE_BINS).map_err(calibration_failure)?;
        emit(Some(&curve_path), |w| write_fit_curve_csv(w, &table))?;
    }
    let kind_name = match kind {
        CalibratorKind::Isotonic => "isotonic",
        CalibratorKind::Logistic => "logistic",
    };
    eprintln!(
        "fitted {kind_name} calibrator on {} validation points; wrote {}",
        scores.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict(
    train: &PathBuf,
    inputs: &PathBuf,
    labels: Option<PathBuf>,
    knn: Option<usize>,
    calibrator: &PathBuf,
    exact: bool,
    out: Option<PathBuf>,
    strict: bool,
    parallel: bool,
) -> Result<(), Failure> {
    let train_data = load(train, strict)?;
    let index = build_index(&train_data)?;
    let input_data = load(inputs, strict)?;
    check_dimensions(&index, &input_data)?;
    let model = load_calibrator(calibrator).map_err(calibration_failure)?;
    let labeled = assign_labels(&index, &input_data, labels.as_ref(), knn, parallel)?;
    let kind = if exact { ScoreKind::Exact } else { ScoreKind::Fast };
    let rows =
        predict_batch(&index, &model, &labeled, kind, parallel).map_err(pipeline_failure)?;
    emit(out.as_ref(), |w| write_predictions_csv(w, &rows))?;
    eprintln!("calibrated {} inputs", rows.len());
    Ok(())
}

struct EvaluateSpec {
    train: Option<PathBuf>,
    test: Option<PathBuf>,
    calibrator: Option<PathBuf>,
    knn: Option<usize>,
    predictions: Option<PathBuf>,
    m_bins: usize,
    exact: bool,
    trials: Option<usize>,
    data: Option<PathBuf>,
    kind: CalibratorKind,
    seed: u64,
    strict: bool,
    parallel: bool,
}

fn cmd_evaluate(spec: EvaluateSpec) -> Result<(), Failure> {
    match (&spec.trials, &spec.data) {
        (Some(_), Some(_)) => cmd_evaluate_trials(&spec),
        (None, None) => cmd_evaluate_single(&spec),
        _ => Err(Failure::Contract(
            "trial mode needs both --trials and --data".to_string(),
        )),
    }
}

fn cmd_evaluate_trials(spec: &EvaluateSpec) -> Result<(), Failure> {
    if spec.train.is_some() || spec.test.is_some() || spec.calibrator.is_some() {
        return Err(Failure::Contract(
            "trial mode splits --data internally; drop --train/--test/--calibrator".to_string(),
        ));
    }
    if spec.predictions.is_some() {
        return Err(Failure::Contract(
            "trial mode uses the built-in model; drop --predictions".to_string(),
        ));
    }
    let data = load(spec.data.as_ref().expect("checked by caller"), spec.strict)?;
    let config = ExperimentConfig {
        trials: spec.trials.expect("checked by caller"),
        m_bins: spec.m_bins,
        score_kind: if spec.exact {
            ScoreKind::Exact
        } else {
            ScoreKind::Fast
        },
        calibrator_kind: spec.kind,
        knn_k: spec.knn.unwrap_or(DEFAULT_KNN),
        seed: spec.seed,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&data, &config, None, spec.parallel).map_err(pipeline_failure)?;
    emit(None, |w| report.write_csv(w))?;
    eprint!("{}", report.human_table());
    Ok(())
}

fn cmd_evaluate_single(spec: &EvaluateSpec) -> Result<(), Failure> {
    let missing = |flag: &str| {
        Failure::Contract(format!("single evaluation needs {flag} (or use --trials with --data)"))
    };
    let train = spec.train.as_ref().ok_or_else(|| missing("--train"))?;
    let test = spec.test.as_ref().ok_or_else(|| missing("--test"))?;
    let calibrator_path = spec.calibrator.as_ref().ok_or_else(|| missing("--calibrator"))?;

    let train_data = load(train, spec.strict)?;
    let index = build_index(&train_data)?;
    let test_data = load(test, spec.strict)?;
    check_dimensions(&index, &test_data)?;
    let model = load_calibrator(calibrator_path).map_err(calibration_failure)?;
    let labeled = assign_labels(
        &index,
        &test_data,
        spec.predictions.as_ref(),
        spec.knn,
        spec.parallel,
    )?;
    let kind = if spec.exact {
        ScoreKind::Exact
    } else {
        ScoreKind::Fast
    };
    let rows =
        predict_batch(&index, &model, &labeled, kind, spec.parallel).map_err(pipeline_failure)?;
    let confidences: Vec<f64> = rows.iter().map(|r| r.confidence).collect();
    let correctness: Vec<bool> = rows
        .iter()
        .zip(test_data.points())
        .map(|(row, truth)| row.predicted_label == truth.label)
        .collect();
    let report = ece(&confidences, &correctness, spec.m_bins)
        .map_err(|e| Failure::Contract(e.to_string()))?;
    emit(None, |w| report.write_csv(w))?;
    let hits = correctness.iter().filter(|&&ok| ok).count();
    eprintln!(
        "ECE {:.6} over {} test points in {} bins (model accuracy {:.4})",
        report.ece,
        report.n,
        report.m_bins,
        hits as f64 / correctness.len().max(1) as f64
    );
    Ok(())
}

fn cmd_bench(
    train: Option<PathBuf>,
    synthetic: Option<(usize, usize)>,
    queries: usize,
    repeats: usize,
    seed: u64,
    strict: bool,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let train_data = match (train, synthetic) {
        (Some(path), None) => load(&path, strict)?,
        (None, Some((n, d))) => synthetic_train(n, d, seed)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let index = build_index(&train_data)?;
    let pairs = collect_pairs(
        &[-2.0, -1.0, 0.0, 1.0, 2.0],
        &[false, false, true, true, true],
    )
    .map_err(calibration_failure)?;
    let calibrator = fit(&pairs, CalibratorKind::Isotonic).map_err(calibration_failure)?;
    let query_points = sample_queries(&train_data, queries, BENCH_QUERY_NOISE, seed.wrapping_add(1))
        .map_err(pipeline_failure)?;
    let report = benchmark_throughput(
        &index,
        &calibrator,
        &query_points,
        repeats,
        threads.unwrap_or(1),
    )
    .map_err(pipeline_failure)?;
    emit(None, |w| report.write_csv(w))?;
    eprintln!(
        "throughput {:.1} predictions/s (95% CI half-width {:.1}) over {} queries x {} repeats, \
         {} threads, train {}x{}",
        report.predictions_per_second,
        report.ci95_halfwidth,
        report.queries,
        report.repeats,
        report.threads,
        report.train_size,
        report.dimension
    );
    Ok(())
}

/// Builds an `n`-point, `d`-dimensional blob set for benchmarking: ten
/// classes when there is room, two otherwise, trimmed to exactly `n`.
fn synthetic_train(n: usize, d: usize, seed: u64) -> Result<Dataset, Failure> {
    let classes = if n >= 20 { 10 } else { 2 };
    let per_class = n.div_ceil(classes);
    let blob = generate_blobs(classes, per_class, d, 1.0, seed).map_err(pipeline_failure)?;
    Dataset::new(blob.points()[..n].to_vec()).map_err(data_failure)
}

fn cmd_synth(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
    out: &PathBuf,
) -> Result<(), Failure> {
    let data = generate_blobs(classes, per_class, dim, spread, seed).map_err(pipeline_failure)?;
    write_dataset(&data, out).map_err(data_failure)?;
    eprintln!(
        "wrote {} points ({} classes x {}, {} features) to {}",
        data.len(),
        classes,
        per_class,
        dim,
        out.display()
    );
    Ok(())
}
