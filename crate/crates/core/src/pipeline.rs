//! End-to-end flows: predict, score, calibrate, evaluate, and benchmark.
//!
//! The experiment runner repeats a seeded split/fit/evaluate cycle:
//! each trial splits the source data, builds a separation index on the
//! train part, obtains predictions (a built-in k-NN baseline or externally
//! supplied ones), fits a calibrator on validation scores, and measures
//! expected calibration error on the test part. Per-trial seeds are
//! `seed, seed+1, ...` (wrapping), so a report is reproducible from its
//! config alone.
//!
//! The throughput benchmark times the fast-separation scoring path plus
//! calibrator application per query, excluding a warm-up pass, and reports
//! predictions per second with a 95% confidence interval over repeats.

use std::collections::HashMap;
use std::hint::black_box;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::calibration::{self, Calibrator, CalibratorKind};
use crate::data::{
    split_dataset, DataError, Dataset, DataSplit, LabeledPoint, PredictionRecord, SplitRatios,
};
use crate::geometry::{ClassPartitionIndex, GeometryError, ScoreKind, ScoredInput};
use crate::metrics::{self, MetricsError, TrialSummary};
use crate::numfmt::fmt_sig;

/// Errors from pipeline flows, including everything bubbled up from the
/// stage modules.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Calibration(#[from] calibration::CalibrationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("k must be between 1 and the training size {n}, got {k}")]
    BadK { k: usize, n: usize },
    #[error("blob generation needs {reason}")]
    BadBlobSpec { reason: String },
    #[error("need at least one trial")]
    NoTrials,
    #[error("got {got} per-trial prediction sets for {expected} trials")]
    TrialCountMismatch { expected: usize, got: usize },
    #[error("prediction for point {point_index} is out of range (dataset has {n} points)")]
    PredictionIndexOutOfRange { point_index: usize, n: usize },
    #[error("trial {trial}: duplicate prediction for point {point_index}")]
    DuplicatePrediction { trial: usize, point_index: usize },
    #[error("trial {trial}: missing prediction for point {point_index}")]
    MissingPrediction { trial: usize, point_index: usize },
    #[error("trial {trial}: predicted label {label:?} for point {point_index} does not occur in the training part")]
    UnknownPredictedLabel {
        trial: usize,
        point_index: usize,
        label: String,
    },
    #[error("benchmark needs at least one query")]
    NoQueries,
    #[error("benchmark needs at least one repeat")]
    NoRepeats,
    #[error("thread count must be at least 1")]
    ZeroThreads,
    #[error("could not start worker threads: {reason}")]
    ThreadPool { reason: String },
}

fn map_maybe_parallel<T, R, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<R>, PipelineError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, PipelineError> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Predicts a label for `x` by majority vote among its `k` nearest
/// training points, returning the winning label and its vote fraction.
///
/// Neighbors are ordered by `(distance, label)`; vote ties go to the
/// candidate with the smaller mean neighbor distance, then to the
/// lexicographically smaller label, so results are deterministic.
pub fn knn_predict(
    index: &ClassPartitionIndex,
    x: &[f64],
    k: usize,
) -> Result<(String, f64), PipelineError> {
    let n = index.total_count();
    if k == 0 || k > n {
        return Err(PipelineError::BadK { k, n });
    }
    if x.len() != index.dimension() {
        return Err(GeometryError::DimensionMismatch {
            expected: index.dimension(),
            found: x.len(),
        }
        .into());
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteQuery.into());
    }

    let mut neighbors: Vec<(f64, &str)> = Vec::with_capacity(n);
    for label in index.labels() {
        for row in index.class_rows(label).expect("label comes from the index") {
            neighbors.push((crate::geometry::sq_dist(row, x), label));
        }
    }
    let by_distance_then_label = |a: &(f64, &str), b: &(f64, &str)| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then_with(|| a.1.cmp(b.1))
    };
    if k < n {
        neighbors.select_nth_unstable_by(k - 1, by_distance_then_label);
    }
    let members = &neighbors[..k];

    let mut tally: HashMap<&str, (usize, f64)> = HashMap::new();
    for &(sq, label) in members {
        let entry = tally.entry(label).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += sq.sqrt();
    }
    let max_votes = tally.values().map(|&(votes, _)| votes).max().expect("k >= 1");
    let (winner, _) = tally
        .iter()
        .filter(|(_, &(votes, _))| votes == max_votes)
        .map(|(&label, &(votes, dist_sum))| (label, dist_sum / votes as f64))
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("finite distances")
                .then_with(|| a.0.cmp(b.0))
        })
        .expect("at least one candidate");
    Ok((winner.to_string(), max_votes as f64 / k as f64))
}

/// Generates an isotropic Gaussian blob per class. Class `c` is labeled
/// `c{c}` and centered at distance `c` along the first coordinate, so
/// neighboring class means sit one unit apart; every coordinate gets
/// independent `N(0, spread^2)` noise.
pub fn generate_blobs(
    classes: usize,
    per_class: usize,
    dimension: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, PipelineError> {
    if classes < 2 {
        return Err(PipelineError::BadBlobSpec {
            reason: format!("at least two classes, got {classes}"),
        });
    }
    if per_class == 0 {
        return Err(PipelineError::BadBlobSpec {
            reason: "at least one point per class".to_string(),
        });
    }
    if dimension == 0 {
        return Err(PipelineError::BadBlobSpec {
            reason: "a positive dimension".to_string(),
        });
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(PipelineError::BadBlobSpec {
            reason: format!("a positive finite spread, got {spread}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("validated spread");
    let mut points = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let label = format!("c{class}");
        for _ in 0..per_class {
            let mut features = Vec::with_capacity(dimension);
            for d in 0..dimension {
                let mean = if d == 0 { class as f64 } else { 0.0 };
                features.push(mean + noise.sample(&mut rng));
            }
            points.push(LabeledPoint::new(label.clone(), features));
        }
    }
    Dataset::new(points).map_err(PipelineError::Data)
}

/// Draws benchmark queries by perturbing randomly chosen training points
/// with isotropic `N(0, noise^2)` offsets; each query keeps the label of
/// the point it was drawn from. A `noise` of zero replays training points
/// verbatim.
pub fn sample_queries(
    train: &Dataset,
    count: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, String)>, PipelineError> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(PipelineError::BadBlobSpec {
            reason: format!("a non-negative finite noise level, got {noise}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("validated noise");
    let mut queries = Vec::with_capacity(count);
    for _ in 0..count {
        let point = train.point(rng.gen_range(0..train.len()));
        let features = point
            .features
            .iter()
            .map(|&v| if noise > 0.0 { v + offset.sample(&mut rng) } else { v })
            .collect();
        queries.push((features, point.label.clone()));
    }
    Ok(queries)
}

/// Scores a batch of `(features, predicted_label)` inputs, always with the
/// fast separation and optionally with the exact one. Row indices follow
/// input order.
pub fn score_batch(
    index: &ClassPartitionIndex,
    inputs: &[(Vec<f64>, String)],
    with_exact: bool,
    parallel: bool,
) -> Result<Vec<ScoredInput>, PipelineError> {
    let rows = map_maybe_parallel(inputs, parallel, |(features, label)| {
        let fast = index.fast_separation(features, label)?.value;
        let exact = if with_exact {
            Some(index.exact_separation(features, label)?.value)
        } else {
            None
        };
        Ok(ScoredInput {
            index: 0,
            predicted_label: label.clone(),
            fast,
            exact,
        })
    })?;
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.index = i;
            row
        })
        .collect())
}

/// One row of the confidence-prediction CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedRow {
    pub index: usize,
    pub predicted_label: String,
    pub score: f64,
    pub confidence: f64,
}

/// Scores inputs with the chosen separation variant and applies a fitted
/// calibrator to each score.
pub fn predict_batch(
    index: &ClassPartitionIndex,
    calibrator: &Calibrator,
    inputs: &[(Vec<f64>, String)],
    kind: ScoreKind,
    parallel: bool,
) -> Result<Vec<PredictedRow>, PipelineError> {
    let rows = map_maybe_parallel(inputs, parallel, |(features, label)| {
        let score = match kind {
            ScoreKind::Fast => index.fast_separation(features, label)?.value,
            ScoreKind::Exact => index.exact_separation(features, label)?.value,
        };
        Ok(PredictedRow {
            index: 0,
            predicted_label: label.clone(),
            score,
            confidence: calibrator.predict(score),
        })
    })?;
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.index = i;
            row
        })
        .collect())
}

/// Writes prediction rows as `index,predicted_label,score,confidence` CSV
/// with nine significant digits.
pub fn write_predictions_csv<W: Write>(mut out: W, rows: &[PredictedRow]) -> io::Result<()> {
    writeln!(out, "index,predicted_label,score,confidence")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.index,
            row.predicted_label,
            fmt_sig(row.score, 9),
            fmt_sig(row.confidence, 9)
        )?;
    }
    Ok(())
}

/// Settings for [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub ratios: SplitRatios,
    pub trials: usize,
    pub m_bins: usize,
    pub score_kind: ScoreKind,
    pub calibrator_kind: CalibratorKind,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ratios: SplitRatios::default(),
            trials: 10,
            m_bins: 30,
            score_kind: ScoreKind::Fast,
            calibrator_kind: CalibratorKind::Isotonic,
            knn_k: 5,
            seed: 0,
        }
    }
}

/// Results of one experiment trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// Test-part ECE of separation-score calibration.
    pub geo_ece: f64,
    /// Test-part ECE of calibrating the predictor's native confidence with
    /// the same machinery; absent when native confidences were not
    /// supplied for every evaluated point.
    pub baseline_ece: Option<f64>,
    pub test_accuracy: f64,
}

/// Per-trial outcomes plus cross-trial summaries (present when the
/// experiment ran at least two trials).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub trials: Vec<TrialOutcome>,
    pub geo_summary: Option<TrialSummary>,
    pub baseline_summary: Option<TrialSummary>,
    pub accuracy_summary: Option<TrialSummary>,
}

impl ExperimentReport {
    /// Writes per-trial rows then, when summaries exist, `mean` and `ci95`
    /// rows:
    ///
    /// ```text
    /// trial,seed,geo_ece,baseline_ece,test_accuracy
    /// 0,11,0.0312...,0.0650...,0.845...
    /// mean,,...,...,...
    /// ci95,,...,...,...
    /// ```
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trial,seed,geo_ece,baseline_ece,test_accuracy")?;
        for row in &self.trials {
            let baseline = row.baseline_ece.map(|v| fmt_sig(v, 9)).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                row.trial,
                row.seed,
                fmt_sig(row.geo_ece, 9),
                baseline,
                fmt_sig(row.test_accuracy, 9)
            )?;
        }
        if let Some(geo) = &self.geo_summary {
            let acc = self.accuracy_summary.as_ref().expect("summaries come together");
            let (bmean, bci) = match &self.baseline_summary {
                Some(b) => (fmt_sig(b.mean, 9), fmt_sig(b.ci95_halfwidth, 9)),
                None => (String::new(), String::new()),
            };
            writeln!(
                out,
                "mean,,{},{},{}",
                fmt_sig(geo.mean, 9),
                bmean,
                fmt_sig(acc.mean, 9)
            )?;
            writeln!(
                out,
                "ci95,,{},{},{}",
                fmt_sig(geo.ci95_halfwidth, 9),
                bci,
                fmt_sig(acc.ci95_halfwidth, 9)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// A small aligned table for human eyes; goes to stderr in the CLI so
    /// stdout stays machine-readable.
    pub fn human_table(&self) -> String {
        let mut text = String::new();
        let line = |name: &str, summary: &Option<TrialSummary>, single: Option<f64>| match summary {
            Some(s) => format!("{name:<14} {:.4} ± {:.4}  (n={})\n", s.mean, s.ci95_halfwidth, s.trials),
            None => match single {
                Some(v) => format!("{name:<14} {v:.4}\n"),
                None => format!("{name:<14} -\n"),
            },
        };
        let single = |f: fn(&TrialOutcome) -> Option<f64>| {
            if self.trials.len() == 1 {
                f(&self.trials[0])
            } else {
                None
            }
        };
        text.push_str(&line("geo ECE", &self.geo_summary, single(|t| Some(t.geo_ece))));
        text.push_str(&line(
            "baseline ECE",
            &self.baseline_summary,
            single(|t| t.baseline_ece),
        ));
        text.push_str(&line(
            "test accuracy",
            &self.accuracy_summary,
            single(|t| Some(t.test_accuracy)),
        ));
        text
    }
}

struct PartEval {
    scores: Vec<f64>,
    outcomes: Vec<bool>,
    natives: Vec<Option<f64>>,
    predicted: Vec<String>,
}

fn eval_part(
    trial: usize,
    index: &ClassPartitionIndex,
    part: &Dataset,
    part_indices: &[usize],
    external: Option<&HashMap<usize, PredictionRecord>>,
    config: &ExperimentConfig,
    parallel: bool,
) -> Result<PartEval, PipelineError> {
    let predictions: Vec<(String, Option<f64>)> = match external {
        None => map_maybe_parallel(part.points(), parallel, |point| {
            knn_predict(index, &point.features, config.knn_k)
                .map(|(label, vote)| (label, Some(vote)))
        })?,
        Some(map) => part_indices
            .iter()
            .map(|&source| {
                let record = map.get(&source).ok_or(PipelineError::MissingPrediction {
                    trial,
                    point_index: source,
                })?;
                if index.class_size(&record.predicted_label).is_none() {
                    return Err(PipelineError::UnknownPredictedLabel {
                        trial,
                        point_index: source,
                        label: record.predicted_label.clone(),
                    });
                }
                Ok((record.predicted_label.clone(), record.native_confidence))
            })
            .collect::<Result<_, _>>()?,
    };

    let items: Vec<(&[f64], &str)> = part
        .points()
        .iter()
        .zip(&predictions)
        .map(|(point, (label, _))| (point.features.as_slice(), label.as_str()))
        .collect();
    let scores = map_maybe_parallel(&items, parallel, |&(features, label)| {
        let score = match config.score_kind {
            ScoreKind::Fast => index.fast_separation(features, label)?.value,
            ScoreKind::Exact => index.exact_separation(features, label)?.value,
        };
        Ok(score)
    })?;
    let outcomes: Vec<bool> = part
        .points()
        .iter()
        .zip(&predictions)
        .map(|(point, (label, _))| point.label == *label)
        .collect();
    Ok(PartEval {
        scores,
        outcomes,
        natives: predictions.iter().map(|(_, v)| *v).collect(),
        predicted: predictions.into_iter().map(|(label, _)| label).collect(),
    })
}

/// Runs `config.trials` seeded split/fit/evaluate cycles over `data`.
///
/// Without `external` predictions, a k-NN vote over the trial's train part
/// supplies both predicted labels and native confidences (vote fractions).
/// With `external`, entry `t` must cover every validation and test point
/// of trial `t` by source index; the baseline column is reported when all
/// covered records carry native confidences.
///
/// The output is a pure function of `(data, config, external)`.
pub fn run_experiment(
    data: &Dataset,
    config: &ExperimentConfig,
    external: Option<&[Vec<PredictionRecord>]>,
    parallel: bool,
) -> Result<ExperimentReport, PipelineError> {
    if config.trials == 0 {
        return Err(PipelineError::NoTrials);
    }
    if let Some(sets) = external {
        if sets.len() != config.trials {
            return Err(PipelineError::TrialCountMismatch {
                expected: config.trials,
                got: sets.len(),
            });
        }
    }

    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let seed = config.seed.wrapping_add(trial as u64);
        let split: DataSplit = split_dataset(data, config.ratios, seed)?;
        let index = ClassPartitionIndex::build(&split.train)?;

        let external_map = match external {
            None => None,
            Some(sets) => {
                let mut map = HashMap::with_capacity(sets[trial].len());
                for record in &sets[trial] {
                    if record.point_index >= data.len() {
                        return Err(PipelineError::PredictionIndexOutOfRange {
                            point_index: record.point_index,
                            n: data.len(),
                        });
                    }
                    if map.insert(record.point_index, record.clone()).is_some() {
                        return Err(PipelineError::DuplicatePrediction {
                            trial,
                            point_index: record.point_index,
                        });
                    }
                }
                Some(map)
            }
        };

        let val = eval_part(
            trial,
            &index,
            &split.validation,
            &split.validation_indices,
            external_map.as_ref(),
            config,
            parallel,
        )?;
        let test = eval_part(
            trial,
            &index,
            &split.test,
            &split.test_indices,
            external_map.as_ref(),
            config,
            parallel,
        )?;

        let pairs = calibration::collect_pairs(&val.scores, &val.outcomes)?;
        let calibrator = calibration::fit(&pairs, config.calibrator_kind)?;
        let confidences: Vec<f64> = test.scores.iter().map(|&s| calibrator.predict(s)).collect();
        let geo_ece = metrics::ece(&confidences, &test.outcomes, config.m_bins)?.ece;

        let baseline_ece = if val.natives.iter().all(Option::is_some)
            && test.natives.iter().all(Option::is_some)
        {
            let val_native: Vec<f64> = val.natives.iter().map(|v| v.unwrap()).collect();
            let test_native: Vec<f64> = test.natives.iter().map(|v| v.unwrap()).collect();
            let pairs = calibration::collect_pairs(&val_native, &val.outcomes)?;
            let calibrator = calibration::fit(&pairs, config.calibrator_kind)?;
            let confidences: Vec<f64> =
                test_native.iter().map(|&s| calibrator.predict(s)).collect();
            Some(metrics::ece(&confidences, &test.outcomes, config.m_bins)?.ece)
        } else {
            None
        };

        let actual: Vec<&str> = split.test.points().iter().map(|p| p.label.as_str()).collect();
        let test_accuracy = metrics::accuracy(&test.predicted, &actual)?;
        trials.push(TrialOutcome {
            trial,
            seed,
            geo_ece,
            baseline_ece,
            test_accuracy,
        });
    }

    let (geo_summary, baseline_summary, accuracy_summary) = if config.trials >= 2 {
        let geo: Vec<f64> = trials.iter().map(|t| t.geo_ece).collect();
        let acc: Vec<f64> = trials.iter().map(|t| t.test_accuracy).collect();
        let baseline: Option<Vec<f64>> = trials.iter().map(|t| t.baseline_ece).collect();
        (
            Some(metrics::aggregate_trials(&geo)?),
            match baseline {
                Some(values) => Some(metrics::aggregate_trials(&values)?),
                None => None,
            },
            Some(metrics::aggregate_trials(&acc)?),
        )
    } else {
        (None, None, None)
    };

    Ok(ExperimentReport {
        trials,
        geo_summary,
        baseline_summary,
        accuracy_summary,
    })
}

/// Throughput measurement of the fast-separation prediction path.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub predictions_per_second: f64,
    /// 95% confidence halfwidth over repeats; 0 when only one repeat ran.
    pub ci95_halfwidth: f64,
    pub repeats: usize,
    pub queries: usize,
    pub train_size: usize,
    pub dimension: usize,
    pub threads: usize,
}

impl ThroughputReport {
    /// Writes a one-row CSV:
    ///
    /// ```text
    /// predictions_per_second,ci95_halfwidth,repeats,queries,train_size,dimension,threads
    /// ```
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "predictions_per_second,ci95_halfwidth,repeats,queries,train_size,dimension,threads"
        )?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig(self.predictions_per_second, 9),
            fmt_sig(self.ci95_halfwidth, 9),
            self.repeats,
            self.queries,
            self.train_size,
            self.dimension,
            self.threads
        )
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Times fast separation plus calibration per query over `repeats` passes,
/// after one untimed warm-up pass that also validates every query.
/// `threads = 1` runs the scoring loop sequentially; larger values fan
/// queries out over a dedicated worker pool.
pub fn benchmark_throughput(
    index: &ClassPartitionIndex,
    calibrator: &Calibrator,
    queries: &[(Vec<f64>, String)],
    repeats: usize,
    threads: usize,
) -> Result<ThroughputReport, PipelineError> {
    if queries.is_empty() {
        return Err(PipelineError::NoQueries);
    }
    if repeats == 0 {
        return Err(PipelineError::NoRepeats);
    }
    if threads == 0 {
        return Err(PipelineError::ZeroThreads);
    }

    let one = |(features, label): &(Vec<f64>, String)| -> Result<(), GeometryError> {
        let score = index.fast_separation(features, label)?;
        black_box(calibrator.predict(score.value));
        Ok(())
    };

    for query in queries {
        one(query)?;
    }

    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| PipelineError::ThreadPool {
                    reason: e.to_string(),
                })?,
        )
    } else {
        None
    };

    let mut rates = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        match &pool {
            None => {
                for query in queries {
                    one(query).expect("validated in warm-up");
                }
            }
            Some(pool) => pool.install(|| {
                queries
                    .par_iter()
                    .for_each(|query| one(query).expect("validated in warm-up"));
            }),
        }
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        rates.push(queries.len() as f64 / secs);
    }

    let (mean, ci) = if repeats >= 2 {
        let summary = metrics::aggregate_trials(&rates)?;
        (summary.mean, summary.ci95_halfwidth)
    } else {
        (rates[0], 0.0)
    };
    Ok(ThroughputReport {
        predictions_per_second: mean,
        ci95_halfwidth: ci,
        repeats,
        queries: queries.len(),
        train_size: index.total_count(),
        dimension: index.dimension(),
        threads,
    })
}
