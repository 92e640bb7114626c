//! Labeled dataset container, CSV interchange, and seeded splitting.
//!
//! The on-disk dataset format is a plain CSV with a `label` column followed
//! by one column per feature:
//!
//! ```text
//! label,f0,f1
//! A,0.25,-1.5
//! B,3,4
//! ```
//!
//! Labels are arbitrary non-empty tokens without commas or line breaks;
//! features must parse as finite numbers. Feature column names beyond the
//! leading `label` are not interpreted, so hand-edited headers load fine.
//! Row numbers in error messages count data rows from 1 (the header is not
//! a row).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Largest feature magnitude accepted by [`load_dataset_strict`].
pub const STRICT_FEATURE_LIMIT: f64 = 1e6;

/// Errors from loading, writing, or splitting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
    #[error("header must start with a `label` column, got {found:?}")]
    Header { found: String },
    #[error("header has no feature columns")]
    NoFeatureColumns,
    #[error("row {row}: dimension mismatch (expected {expected} features, found {found})")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, feature {column}: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("row {row}, feature {column}: value {value} is not finite")]
    NonFinite {
        row: usize,
        column: usize,
        value: f64,
    },
    #[error("row {row}, feature {column}: value {value} outside strict range [-{limit}, {limit}]")]
    OutOfRange {
        row: usize,
        column: usize,
        value: f64,
        limit: f64,
    },
    #[error("row {row}: {reason}")]
    BadLabel { row: usize, reason: String },
    #[error("row {row}: cannot parse point index {value:?}")]
    BadIndex { row: usize, value: String },
    #[error("row {row}: native confidence {value} outside [0, 1]")]
    BadConfidence { row: usize, value: f64 },
    #[error("split ratios must be positive, got ({train}, {validation}, {test})")]
    NonPositiveRatio {
        train: f64,
        validation: f64,
        test: f64,
    },
    #[error("split ratios must sum to 1, got {sum}")]
    RatioSum { sum: f64 },
    #[error("dataset with {n} points cannot populate all three split parts")]
    TooSmall { n: usize },
}

/// One labeled feature vector. Validity (finite features, consistent
/// dimension, well-formed label) is enforced when points are collected
/// into a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub label: String,
    pub features: Vec<f64>,
}

impl LabeledPoint {
    pub fn new(label: impl Into<String>, features: Vec<f64>) -> Self {
        LabeledPoint {
            label: label.into(),
            features,
        }
    }
}

/// A non-empty collection of labeled points sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<LabeledPoint>,
    dimension: usize,
}

impl Dataset {
    /// Validates and wraps a point collection. Points are kept in the order
    /// given; duplicates are allowed.
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self, DataError> {
        let first = points.first().ok_or(DataError::Empty {
            path: PathBuf::from("<memory>"),
        })?;
        let dimension = first.features.len();
        if dimension == 0 {
            return Err(DataError::NoFeatureColumns);
        }
        for (i, point) in points.iter().enumerate() {
            let row = i + 1;
            validate_label(&point.label, row)?;
            if point.features.len() != dimension {
                return Err(DataError::DimensionMismatch {
                    row,
                    expected: dimension,
                    found: point.features.len(),
                });
            }
            for (j, &v) in point.features.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DataError::NonFinite {
                        row,
                        column: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Dataset { points, dimension })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &LabeledPoint {
        &self.points[index]
    }

    /// The set of labels that occur in the dataset, in sorted order.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.points.iter().map(|p| p.label.as_str()).collect()
    }
}

fn validate_label(label: &str, row: usize) -> Result<(), DataError> {
    if label.is_empty() {
        return Err(DataError::BadLabel {
            row,
            reason: "empty label".to_string(),
        });
    }
    if label.contains(',') || label.contains('\n') || label.contains('\r') {
        return Err(DataError::BadLabel {
            row,
            reason: format!("label {label:?} contains a comma or line break"),
        });
    }
    Ok(())
}

/// Loads a dataset CSV, accepting any finite feature values.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_impl(path.as_ref(), false)
}

/// Loads a dataset CSV, additionally rejecting feature magnitudes above
/// [`STRICT_FEATURE_LIMIT`] so unnormalized inputs fail fast.
pub fn load_dataset_strict(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    load_impl(path.as_ref(), true)
}

fn load_impl(path: &Path, strict: bool) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|source| DataError::Io {
            action: "read",
            path: path.to_path_buf(),
            source,
        })?,
        None => {
            return Err(DataError::Empty {
                path: path.to_path_buf(),
            })
        }
    };
    let header = header.trim_start_matches('\u{feff}').trim_end_matches('\r');
    let mut header_cells = header.split(',');
    let first = header_cells.next().unwrap_or("");
    if first != "label" {
        return Err(DataError::Header {
            found: first.to_string(),
        });
    }
    let expected = header_cells.count();
    if expected == 0 {
        return Err(DataError::NoFeatureColumns);
    }

    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let line = line.map_err(|source| DataError::Io {
            action: "read",
            path: path.to_path_buf(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        let mut cells = line.split(',');
        let label = cells.next().unwrap_or("");
        validate_label(label, row)?;
        let mut features = Vec::with_capacity(expected);
        for (j, cell) in cells.enumerate() {
            if j >= expected {
                break;
            }
            let value: f64 = cell.parse().map_err(|_| DataError::BadNumber {
                row,
                column: j,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: j,
                    value,
                });
            }
            if strict && value.abs() > STRICT_FEATURE_LIMIT {
                return Err(DataError::OutOfRange {
                    row,
                    column: j,
                    value,
                    limit: STRICT_FEATURE_LIMIT,
                });
            }
            features.push(value);
        }
        let found = line.split(',').count() - 1;
        if found != expected {
            return Err(DataError::DimensionMismatch {
                row,
                expected,
                found,
            });
        }
        points.push(LabeledPoint {
            label: label.to_string(),
            features,
        });
    }
    if points.is_empty() {
        return Err(DataError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(Dataset {
        dimension: points[0].features.len(),
        points,
    })
}

/// Writes a dataset CSV with a canonical `label,f0,...` header. Feature
/// values use the shortest decimal form that parses back to the identical
/// bits, so write/load round trips are exact.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut line = String::from("label");
    for j in 0..dataset.dimension() {
        write!(line, ",f{j}").unwrap();
    }
    line.push('\n');
    out.write_all(line.as_bytes()).map_err(io_err)?;
    for point in dataset.points() {
        line.clear();
        line.push_str(&point.label);
        for &v in &point.features {
            write!(line, ",{v}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Fractions of the source assigned to each split part. Must be positive
/// and sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

/// A seeded train/validation/test partition of a source dataset.
///
/// The `*_indices` lists give, for each point of the corresponding part in
/// order, its position in the source dataset. Together the three lists are
/// disjoint and exhaust `0..source.len()`.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Splits a dataset into train/validation/test parts by a seeded
/// Fisher-Yates shuffle of the point indices.
///
/// Part sizes are the floors of `ratio * n`; leftover points go one each to
/// train, then validation, then test. If a part would still be empty, it
/// takes a point from the largest part, so every part is non-empty whenever
/// the source has at least three points. The same `(dataset, ratios, seed)`
/// triple always produces the same partition.
pub fn split_dataset(
    source: &Dataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DataSplit, DataError> {
    let n = source.len();
    if !(ratios.train > 0.0 && ratios.validation > 0.0 && ratios.test > 0.0) {
        return Err(DataError::NonPositiveRatio {
            train: ratios.train,
            validation: ratios.validation,
            test: ratios.test,
        });
    }
    let sum = ratios.train + ratios.validation + ratios.test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::RatioSum { sum });
    }
    if n < 3 {
        return Err(DataError::TooSmall { n });
    }

    let mut sizes = [
        (ratios.train * n as f64).floor() as usize,
        (ratios.validation * n as f64).floor() as usize,
        (ratios.test * n as f64).floor() as usize,
    ];
    let mut leftover = n - sizes.iter().sum::<usize>();
    for size in sizes.iter_mut() {
        if leftover == 0 {
            break;
        }
        *size += 1;
        leftover -= 1;
    }
    while sizes.iter().any(|&s| s == 0) {
        let needy = sizes.iter().position(|&s| s == 0).unwrap();
        let donor = (0..3).max_by_key(|&i| sizes[i]).unwrap();
        sizes[donor] -= 1;
        sizes[needy] += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let train_indices = order[..sizes[0]].to_vec();
    let validation_indices = order[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let test_indices = order[sizes[0] + sizes[1]..].to_vec();
    let part = |indices: &[usize]| Dataset {
        points: indices.iter().map(|&i| source.points[i].clone()).collect(),
        dimension: source.dimension,
    };
    Ok(DataSplit {
        train: part(&train_indices),
        validation: part(&validation_indices),
        test: part(&test_indices),
        train_indices,
        validation_indices,
        test_indices,
        seed,
    })
}

/// One externally supplied prediction for a point of a source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub point_index: usize,
    pub predicted_label: String,
    pub native_confidence: Option<f64>,
}

/// Loads a predictions CSV of the form `index,predicted_label` with an
/// optional third `native_confidence` column. Confidence cells may be left
/// empty per row; present values must lie in `[0, 1]`.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>, DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(io_err)?,
        None => {
            return Err(DataError::Empty {
                path: path.to_path_buf(),
            })
        }
    };
    let header = header.trim_start_matches('\u{feff}').trim_end_matches('\r');
    let cells: Vec<&str> = header.split(',').collect();
    let has_confidence = match cells.as_slice() {
        ["index", "predicted_label"] => false,
        ["index", "predicted_label", "native_confidence"] => true,
        _ => {
            return Err(DataError::Header {
                found: header.to_string(),
            })
        }
    };

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches('\r');
        let cells: Vec<&str> = line.split(',').collect();
        let expected = if has_confidence { 3 } else { 2 };
        if cells.len() != expected {
            return Err(DataError::DimensionMismatch {
                row,
                expected: expected - 1,
                found: cells.len().saturating_sub(1),
            });
        }
        let point_index: usize = cells[0].parse().map_err(|_| DataError::BadIndex {
            row,
            value: cells[0].to_string(),
        })?;
        validate_label(cells[1], row)?;
        let native_confidence = if has_confidence && !cells[2].is_empty() {
            let value: f64 = cells[2].parse().map_err(|_| DataError::BadNumber {
                row,
                column: 2,
                value: cells[2].to_string(),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(DataError::BadConfidence { row, value });
            }
            Some(value)
        } else {
            None
        };
        records.push(PredictionRecord {
            point_index,
            predicted_label: cells[1].to_string(),
            native_confidence,
        });
    }
    if records.is_empty() {
        return Err(DataError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(records)
}
