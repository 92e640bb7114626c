//! Calibration quality metrics and per-trial aggregation.
//!
//! Expected calibration error (ECE) buckets predictions into `M`
//! equal-width confidence bins `[b/M, (b+1)/M)` (the last bin closes at
//! 1.0) and sums, over bins, the bin's sample share times the absolute gap
//! between its empirical accuracy and its mean confidence. Repeated-trial
//! results aggregate to a mean and a normal-approximation 95% confidence
//! interval.

use std::io::{self, Write};

use thiserror::Error;

use crate::numfmt::fmt_sig;

/// Errors from metric computation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("got {left} predictions but {right} references")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least one bin")]
    ZeroBins,
    #[error("sample {position}: confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { position: usize, value: f64 },
    #[error("need at least two trial values, got {got}")]
    TooFewTrials { got: usize },
    #[error("trial value {position} is not finite")]
    NonFiniteTrial { position: usize },
}

/// Accumulated statistics of one confidence bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Fraction of correct predictions in the bin; 0.0 when empty.
    pub accuracy: f64,
    /// Mean confidence of the bin's samples; 0.0 when empty.
    pub mean_confidence: f64,
}

/// An expected-calibration-error breakdown over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct EceReport {
    pub m_bins: usize,
    pub n: usize,
    pub ece: f64,
    /// All `m_bins` bins in order, including empty ones.
    pub bins: Vec<BinStat>,
}

impl EceReport {
    /// Writes the per-bin table plus a trailing summary line:
    ///
    /// ```text
    /// bin_lower,bin_upper,count,accuracy,mean_confidence
    /// ...
    /// ECE,<value>,N,<n>,M,<m_bins>
    /// ```
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_lower,bin_upper,count,accuracy,mean_confidence")?;
        for bin in &self.bins {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sig(bin.lower, 9),
                fmt_sig(bin.upper, 9),
                bin.count,
                fmt_sig(bin.accuracy, 9),
                fmt_sig(bin.mean_confidence, 9)
            )?;
        }
        writeln!(out, "ECE,{},N,{},M,{}", fmt_sig(self.ece, 9), self.n, self.m_bins)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Computes expected calibration error over `m_bins` equal-width bins.
/// Confidences must lie in `[0, 1]`; a confidence of exactly 1.0 lands in
/// the last bin. Empty bins appear in the report with zero statistics and
/// contribute nothing to the error.
pub fn ece(
    confidences: &[f64],
    correctness: &[bool],
    m_bins: usize,
) -> Result<EceReport, MetricsError> {
    if m_bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    if confidences.len() != correctness.len() {
        return Err(MetricsError::LengthMismatch {
            left: confidences.len(),
            right: correctness.len(),
        });
    }
    if confidences.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (position, &value) in confidences.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(MetricsError::ConfidenceOutOfRange { position, value });
        }
    }

    let mut counts = vec![0usize; m_bins];
    let mut hits = vec![0usize; m_bins];
    let mut conf_sums = vec![0.0f64; m_bins];
    for (&c, &ok) in confidences.iter().zip(correctness) {
        let bin = ((c * m_bins as f64) as usize).min(m_bins - 1);
        counts[bin] += 1;
        hits[bin] += usize::from(ok);
        conf_sums[bin] += c;
    }

    let n = confidences.len();
    let mut bins = Vec::with_capacity(m_bins);
    let mut total = 0.0;
    for b in 0..m_bins {
        let lower = b as f64 / m_bins as f64;
        let upper = (b + 1) as f64 / m_bins as f64;
        let (accuracy, mean_confidence) = if counts[b] > 0 {
            (
                hits[b] as f64 / counts[b] as f64,
                conf_sums[b] / counts[b] as f64,
            )
        } else {
            (0.0, 0.0)
        };
        if counts[b] > 0 {
            total += counts[b] as f64 / n as f64 * (accuracy - mean_confidence).abs();
        }
        bins.push(BinStat {
            lower,
            upper,
            count: counts[b],
            accuracy,
            mean_confidence,
        });
    }
    Ok(EceReport {
        m_bins,
        n,
        ece: total,
        bins,
    })
}

/// Fraction of positions where the predicted label equals the reference.
pub fn accuracy<A: AsRef<str>, B: AsRef<str>>(
    predicted: &[A],
    actual: &[B],
) -> Result<f64, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| p.as_ref() == a.as_ref())
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Mean and 95% confidence halfwidth over repeated trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub mean: f64,
    /// `1.96 * s / sqrt(trials)` with `s` the sample standard deviation
    /// (n-1 denominator).
    pub ci95_halfwidth: f64,
}

/// Aggregates at least two per-trial values into a [`TrialSummary`].
pub fn aggregate_trials(values: &[f64]) -> Result<TrialSummary, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFewTrials { got: values.len() });
    }
    if let Some((position, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(MetricsError::NonFiniteTrial { position });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let ci95_halfwidth = 1.96 * (variance.sqrt() / n.sqrt());
    Ok(TrialSummary {
        trials: values.len(),
        mean,
        ci95_halfwidth,
    })
}
