//! Mapping separation scores to calibrated probabilities.
//!
//! Calibration starts from `(score, outcome)` pairs collected on held-out
//! data: the score is a separation value and the outcome records whether
//! the prediction was correct. Two fits are offered:
//!
//! * [`fit_isotonic`]: a non-parametric, monotone step fit via weighted
//!   pool-adjacent-violators, evaluated with linear interpolation between
//!   the fitted knots.
//! * [`fit_logistic`]: a two-parameter sigmoid `p = 1/(1 + exp(-(a*s + b)))`
//!   fit by damped Newton iteration on the weighted Bernoulli
//!   log-likelihood, with the slope constrained to be non-negative.
//!
//! Fitted calibrators serialize to a small versioned text format so a fit
//! can be reused across runs; see [`save_calibrator`] and
//! [`load_calibrator`].

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::numfmt::fmt_sig;

/// Version line of the isotonic calibrator file format.
pub const ISOTONIC_FORMAT: &str = "geosep-isotonic v1";
/// Version line of the logistic calibrator file format.
pub const LOGISTIC_FORMAT: &str = "geosep-logistic v1";

/// Ceiling applied to the logistic slope when the data is perfectly
/// separated and the unconstrained likelihood has no finite maximizer.
pub const LOGISTIC_SLOPE_CAP: f64 = 1e4;

/// Errors from collecting pairs, fitting, or (de)serializing calibrators.
#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("got {scores} scores but {outcomes} outcomes")]
    LengthMismatch { scores: usize, outcomes: usize },
    #[error("no calibration pairs")]
    Empty,
    #[error("pair {position}: score {value} is not finite")]
    NonFiniteScore { position: usize, value: f64 },
    #[error("pair {position}: scores are not sorted ascending")]
    Unsorted { position: usize },
    #[error("pair {position}: target {value} outside [0, 1]")]
    BadTarget { position: usize, value: f64 },
    #[error("pair {position}: weight {value} is not positive and finite")]
    BadWeight { position: usize, value: f64 },
    #[error("logistic fit needs at least two distinct scores")]
    TooFewDistinctScores,
    #[error("logistic fit needs both outcome classes")]
    SingleOutcomeClass,
    #[error("fit curve needs at least one bin")]
    ZeroBins,
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("unsupported calibrator format {found:?}")]
    BadVersion { found: String },
    #[error("calibrator file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// One weighted calibration observation. `target` is the mean outcome of
/// the raw pairs merged into this observation, so it lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair {
    pub score: f64,
    pub target: f64,
    pub weight: f64,
}

/// Pairs scores with correctness outcomes, sorts by score, and merges
/// exact duplicate scores into one weighted pair whose target is the mean
/// outcome.
pub fn collect_pairs(
    scores: &[f64],
    outcomes: &[bool],
) -> Result<Vec<CalibrationPair>, CalibrationError> {
    if scores.len() != outcomes.len() {
        return Err(CalibrationError::LengthMismatch {
            scores: scores.len(),
            outcomes: outcomes.len(),
        });
    }
    if scores.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if let Some((position, &value)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(CalibrationError::NonFiniteScore { position, value });
    }
    let mut sorted: Vec<(f64, bool)> = scores.iter().copied().zip(outcomes.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    let mut pairs: Vec<CalibrationPair> = Vec::new();
    for (score, outcome) in sorted {
        let hit = f64::from(outcome);
        match pairs.last_mut() {
            Some(last) if last.score == score => {
                last.target = (last.target * last.weight + hit) / (last.weight + 1.0);
                last.weight += 1.0;
            }
            _ => pairs.push(CalibrationPair {
                score,
                target: hit,
                weight: 1.0,
            }),
        }
    }
    Ok(pairs)
}

fn validate_pairs(pairs: &[CalibrationPair]) -> Result<(), CalibrationError> {
    if pairs.is_empty() {
        return Err(CalibrationError::Empty);
    }
    for (position, pair) in pairs.iter().enumerate() {
        if !pair.score.is_finite() {
            return Err(CalibrationError::NonFiniteScore {
                position,
                value: pair.score,
            });
        }
        if position > 0 && pair.score < pairs[position - 1].score {
            return Err(CalibrationError::Unsorted { position });
        }
        if !(0.0..=1.0).contains(&pair.target) || pair.target.is_nan() {
            return Err(CalibrationError::BadTarget {
                position,
                value: pair.target,
            });
        }
        if !(pair.weight > 0.0 && pair.weight.is_finite()) {
            return Err(CalibrationError::BadWeight {
                position,
                value: pair.weight,
            });
        }
    }
    Ok(())
}

/// Merges runs of equal scores into single weighted pairs. Input must be
/// sorted; output scores are strictly increasing.
fn merge_equal_scores(pairs: &[CalibrationPair]) -> Vec<CalibrationPair> {
    let mut merged: Vec<CalibrationPair> = Vec::with_capacity(pairs.len());
    for pair in pairs {
        match merged.last_mut() {
            Some(last) if last.score == pair.score => {
                let weight = last.weight + pair.weight;
                last.target = (last.target * last.weight + pair.target * pair.weight) / weight;
                last.weight = weight;
            }
            _ => merged.push(*pair),
        }
    }
    merged
}

/// A monotone piecewise-linear calibrator fitted by weighted
/// pool-adjacent-violators.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicCalibrator {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicCalibrator {
    /// Strictly increasing score knots.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Fitted probabilities at the knots, non-decreasing and in `[0, 1]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Calibrated probability for a score: linear interpolation between
    /// knots, clamped to the end values outside the fitted range.
    ///
    /// Panics on NaN scores.
    pub fn predict(&self, score: f64) -> f64 {
        assert!(!score.is_nan(), "cannot calibrate a NaN score");
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if score <= bp[0] {
            return self.values[0];
        }
        if score >= bp[last] {
            return self.values[last];
        }
        let hi = bp.partition_point(|&b| b < score);
        let lo = hi - 1;
        let t = (score - bp[lo]) / (bp[hi] - bp[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }
}

/// Fits a weighted isotonic (non-decreasing) regression of targets on
/// scores. Pairs must be sorted by score; equal scores are merged first,
/// so the fitted knots are strictly increasing.
pub fn fit_isotonic(pairs: &[CalibrationPair]) -> Result<IsotonicCalibrator, CalibrationError> {
    validate_pairs(pairs)?;
    let merged = merge_equal_scores(pairs);

    struct Block {
        mean: f64,
        weight: f64,
        count: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(merged.len());
    for pair in &merged {
        let mut mean = pair.target;
        let mut weight = pair.weight;
        let mut count = 1;
        while let Some(prev) = blocks.last() {
            if prev.mean <= mean {
                break;
            }
            mean = (prev.mean * prev.weight + mean * weight) / (prev.weight + weight);
            weight += prev.weight;
            count += prev.count;
            blocks.pop();
        }
        blocks.push(Block {
            mean,
            weight,
            count,
        });
    }

    let mut values = Vec::with_capacity(merged.len());
    for block in &blocks {
        // Pooling can drift a hair outside [0, 1] in the last bit; clamp.
        let v = block.mean.clamp(0.0, 1.0);
        values.extend(std::iter::repeat(v).take(block.count));
    }
    Ok(IsotonicCalibrator {
        breakpoints: merged.iter().map(|p| p.score).collect(),
        values,
    })
}

/// A two-parameter sigmoid calibrator `p = sigmoid(slope * score + offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticCalibrator {
    slope: f64,
    offset: f64,
    capped: bool,
}

impl LogisticCalibrator {
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// True when the fit hit [`LOGISTIC_SLOPE_CAP`] because the outcomes
    /// were perfectly separated by score and the unconstrained maximum
    /// likelihood slope diverges.
    pub fn is_capped(&self) -> bool {
        self.capped
    }

    /// Calibrated probability for a score. Panics on NaN scores.
    pub fn predict(&self, score: f64) -> f64 {
        assert!(!score.is_nan(), "cannot calibrate a NaN score");
        sigmoid(self.slope * score + self.offset)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn ln_1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits the sigmoid parameters by maximizing the weighted Bernoulli
/// log-likelihood with damped Newton steps, subject to `slope >= 0`.
///
/// Perfectly separated outcomes (every incorrect score below every correct
/// one) have no finite optimum; the fit then pins the slope to
/// [`LOGISTIC_SLOPE_CAP`], centers the sigmoid between the two groups, and
/// sets the [`LogisticCalibrator::is_capped`] flag.
pub fn fit_logistic(pairs: &[CalibrationPair]) -> Result<LogisticCalibrator, CalibrationError> {
    validate_pairs(pairs)?;
    let merged = merge_equal_scores(pairs);
    if merged.len() < 2 {
        return Err(CalibrationError::TooFewDistinctScores);
    }
    let total: f64 = merged.iter().map(|p| p.weight).sum();
    let positives: f64 = merged.iter().map(|p| p.weight * p.target).sum();
    if positives <= 0.0 || positives >= total {
        return Err(CalibrationError::SingleOutcomeClass);
    }

    if let Some(midpoint) = separation_midpoint(&merged) {
        return Ok(LogisticCalibrator {
            slope: LOGISTIC_SLOPE_CAP,
            offset: -LOGISTIC_SLOPE_CAP * midpoint,
            capped: true,
        });
    }

    let mean = (positives / total).clamp(1e-6, 1.0 - 1e-6);
    let mut slope = 0.0;
    let mut offset = logit(mean);
    let nll = |slope: f64, offset: f64| -> f64 {
        merged
            .iter()
            .map(|p| {
                let z = slope * p.score + offset;
                p.weight * (ln_1p_exp(z) - p.target * z)
            })
            .sum()
    };
    let mut current = nll(slope, offset);
    for _ in 0..100 {
        let mut g = [0.0; 2];
        let mut h = [0.0; 3]; // [d2/ds2, d2/dsdo, d2/do2]
        for p in &merged {
            let z = slope * p.score + offset;
            let mu = sigmoid(z);
            let r = p.weight * (mu - p.target);
            let v = p.weight * mu * (1.0 - mu);
            g[0] += r * p.score;
            g[1] += r;
            h[0] += v * p.score * p.score;
            h[1] += v * p.score;
            h[2] += v;
        }
        if g[0].hypot(g[1]) < 1e-8 {
            break;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let (mut ds, mut doff) = if det > 1e-300 {
            ((h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det)
        } else {
            (g[0], g[1])
        };
        let mut improved = false;
        for _ in 0..40 {
            let candidate = nll(slope - ds, offset - doff);
            if candidate <= current {
                slope -= ds;
                offset -= doff;
                current = candidate;
                improved = true;
                break;
            }
            ds /= 2.0;
            doff /= 2.0;
        }
        if !improved {
            break;
        }
    }

    let mut capped = false;
    if slope.abs() > LOGISTIC_SLOPE_CAP {
        slope = slope.signum() * LOGISTIC_SLOPE_CAP;
        capped = true;
    }
    if slope < 0.0 {
        // Constrained optimum on the slope = 0 boundary: a constant fit at
        // the weighted mean outcome.
        slope = 0.0;
        offset = logit(mean);
    }
    Ok(LogisticCalibrator {
        slope,
        offset,
        capped,
    })
}

/// Midpoint between the score groups when outcomes are perfectly
/// separated: all targets exactly 0 or 1 and every 0 sits below every 1.
fn separation_midpoint(merged: &[CalibrationPair]) -> Option<f64> {
    let mut highest_zero = f64::NEG_INFINITY;
    let mut lowest_one = f64::INFINITY;
    for p in merged {
        if p.target == 0.0 {
            highest_zero = highest_zero.max(p.score);
        } else if p.target == 1.0 {
            lowest_one = lowest_one.min(p.score);
        } else {
            return None;
        }
    }
    (highest_zero < lowest_one).then(|| (highest_zero + lowest_one) / 2.0)
}

/// Which calibrator family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibratorKind {
    Isotonic,
    Logistic,
}

/// A fitted calibrator of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibrator {
    Isotonic(IsotonicCalibrator),
    Logistic(LogisticCalibrator),
}

impl Calibrator {
    pub fn kind(&self) -> CalibratorKind {
        match self {
            Calibrator::Isotonic(_) => CalibratorKind::Isotonic,
            Calibrator::Logistic(_) => CalibratorKind::Logistic,
        }
    }

    /// Calibrated probability in `[0, 1]` for a score. Panics on NaN.
    pub fn predict(&self, score: f64) -> f64 {
        match self {
            Calibrator::Isotonic(c) => c.predict(score),
            Calibrator::Logistic(c) => c.predict(score),
        }
    }
}

/// Fits the requested calibrator family on collected pairs.
pub fn fit(
    pairs: &[CalibrationPair],
    kind: CalibratorKind,
) -> Result<Calibrator, CalibrationError> {
    match kind {
        CalibratorKind::Isotonic => fit_isotonic(pairs).map(Calibrator::Isotonic),
        CalibratorKind::Logistic => fit_logistic(pairs).map(Calibrator::Logistic),
    }
}

/// Writes a calibrator in its versioned text format: a version line, then
/// for isotonic one `breakpoint<TAB>value` row per knot, or for logistic a
/// single `slope<TAB>offset` row. Numbers carry 17 significant digits, so
/// a load recovers the exact bits.
pub fn write_calibrator<W: Write>(mut out: W, calibrator: &Calibrator) -> io::Result<()> {
    match calibrator {
        Calibrator::Isotonic(c) => {
            writeln!(out, "{ISOTONIC_FORMAT}")?;
            for (bp, v) in c.breakpoints.iter().zip(&c.values) {
                writeln!(out, "{}\t{}", fmt_sig(*bp, 17), fmt_sig(*v, 17))?;
            }
        }
        Calibrator::Logistic(c) => {
            writeln!(out, "{LOGISTIC_FORMAT}")?;
            writeln!(out, "{}\t{}", fmt_sig(c.slope, 17), fmt_sig(c.offset, 17))?;
        }
    }
    Ok(())
}

/// Saves a calibrator to a file; see [`write_calibrator`] for the format.
pub fn save_calibrator(
    calibrator: &Calibrator,
    path: impl AsRef<Path>,
) -> Result<(), CalibrationError> {
    let path = path.as_ref();
    let io_err = |source| CalibrationError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_calibrator(&mut out, calibrator).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Parses a calibrator from its text format, validating the version line
/// and every structural invariant of the stored fit.
pub fn read_calibrator<R: Read>(input: R) -> Result<Calibrator, CalibrationError> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let version = match lines.next() {
        Some(line) => line.map_err(|source| CalibrationError::Io {
            action: "read",
            path: PathBuf::from("<reader>"),
            source,
        })?,
        None => {
            return Err(CalibrationError::BadVersion {
                found: String::new(),
            })
        }
    };
    let version = version.trim_end_matches('\r');

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|source| CalibrationError::Io {
            action: "read",
            path: PathBuf::from("<reader>"),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| CalibrationError::Malformed {
            line: line_no,
            reason: "expected two tab-separated numbers".to_string(),
        })?;
        let parse = |cell: &str| -> Result<f64, CalibrationError> {
            let v: f64 = cell.parse().map_err(|_| CalibrationError::Malformed {
                line: line_no,
                reason: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(CalibrationError::Malformed {
                    line: line_no,
                    reason: format!("non-finite value {v}"),
                });
            }
            Ok(v)
        };
        rows.push((parse(a)?, parse(b)?));
    }

    match version {
        ISOTONIC_FORMAT => {
            if rows.is_empty() {
                return Err(CalibrationError::Malformed {
                    line: 2,
                    reason: "isotonic calibrator has no knots".to_string(),
                });
            }
            for (i, pair) in rows.iter().enumerate() {
                if i > 0 && pair.0 <= rows[i - 1].0 {
                    return Err(CalibrationError::Malformed {
                        line: i + 2,
                        reason: "breakpoints must be strictly increasing".to_string(),
                    });
                }
                if i > 0 && pair.1 < rows[i - 1].1 {
                    return Err(CalibrationError::Malformed {
                        line: i + 2,
                        reason: "values must be non-decreasing".to_string(),
                    });
                }
                if !(0.0..=1.0).contains(&pair.1) {
                    return Err(CalibrationError::Malformed {
                        line: i + 2,
                        reason: format!("value {} outside [0, 1]", pair.1),
                    });
                }
            }
            Ok(Calibrator::Isotonic(IsotonicCalibrator {
                breakpoints: rows.iter().map(|r| r.0).collect(),
                values: rows.iter().map(|r| r.1).collect(),
            }))
        }
        LOGISTIC_FORMAT => {
            if rows.len() != 1 {
                return Err(CalibrationError::Malformed {
                    line: 2,
                    reason: format!("logistic calibrator needs exactly one row, got {}", rows.len()),
                });
            }
            let (slope, offset) = rows[0];
            if slope < 0.0 {
                return Err(CalibrationError::Malformed {
                    line: 2,
                    reason: format!("slope {slope} must be non-negative"),
                });
            }
            Ok(Calibrator::Logistic(LogisticCalibrator {
                slope,
                offset,
                capped: slope >= LOGISTIC_SLOPE_CAP,
            }))
        }
        other => Err(CalibrationError::BadVersion {
            found: other.to_string(),
        }),
    }
}

/// Loads a calibrator file; see [`read_calibrator`].
pub fn load_calibrator(path: impl AsRef<Path>) -> Result<Calibrator, CalibrationError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CalibrationError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    read_calibrator(file).map_err(|e| match e {
        CalibrationError::Io { action, source, .. } => CalibrationError::Io {
            action,
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// One row of the fit-curve diagnostic: an equal-count score bin with its
/// mean score and empirical accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct FitCurvePoint {
    pub score: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// Buckets `(score, outcome)` samples into up to `bins` equal-count groups
/// by score and reports each group's mean score and accuracy. With fewer
/// samples than bins, every sample forms its own group.
pub fn fit_curve_table(
    scores: &[f64],
    outcomes: &[bool],
    bins: usize,
) -> Result<Vec<FitCurvePoint>, CalibrationError> {
    if bins == 0 {
        return Err(CalibrationError::ZeroBins);
    }
    if scores.len() != outcomes.len() {
        return Err(CalibrationError::LengthMismatch {
            scores: scores.len(),
            outcomes: outcomes.len(),
        });
    }
    if scores.is_empty() {
        return Err(CalibrationError::Empty);
    }
    if let Some((position, &value)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(CalibrationError::NonFiniteScore { position, value });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let n = scores.len();
    let groups = bins.min(n);
    let base = n / groups;
    let extra = n % groups;
    let mut rows = Vec::with_capacity(groups);
    let mut at = 0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        let members = &order[at..at + size];
        at += size;
        let score = members.iter().map(|&i| scores[i]).sum::<f64>() / size as f64;
        let hits = members.iter().filter(|&&i| outcomes[i]).count();
        rows.push(FitCurvePoint {
            score,
            accuracy: hits as f64 / size as f64,
            count: size,
        });
    }
    Ok(rows)
}

/// Writes a fit-curve table as `score,accuracy,count` CSV rows with nine
/// significant digits.
pub fn write_fit_curve_csv<W: Write>(mut out: W, rows: &[FitCurvePoint]) -> io::Result<()> {
    writeln!(out, "score,accuracy,count")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{}",
            fmt_sig(row.score, 9),
            fmt_sig(row.accuracy, 9),
            row.count
        )?;
    }
    Ok(())
}
