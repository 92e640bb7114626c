//! Separation scoring against a class-partitioned training set.
//!
//! For a query `x` with a predicted label, the training set divides into
//! the points carrying that label (the matching set) and everything else
//! (the complement). A query is *safe* when it lies strictly nearer to the
//! matching set than to the complement; ties count as unsafe. The signed
//! separation of `x` measures how far `x` can be perturbed before that
//! status can change:
//!
//! * [`ClassPartitionIndex::exact_separation`] evaluates the margin
//!   exactly as the least, over complement points, of the largest signed
//!   distance from `x` to a perpendicular bisector between a matching
//!   point and that complement point.
//! * [`ClassPartitionIndex::fast_separation`] lower-bounds the same
//!   quantity (in magnitude) with just two nearest-neighbor distance
//!   queries: half the difference between the complement distance and the
//!   matching distance.
//!
//! Both scores are positive exactly when the query is safe. All distances
//! are Euclidean; nearest-neighbor queries are exact brute-force scans and
//! each one bumps an instrumentation counter so callers can audit query
//! volume.

use std::collections::BTreeMap;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::data::Dataset;
use crate::numfmt::fmt_sig;

/// Errors from building or querying a [`ClassPartitionIndex`].
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("training set has only the class {label:?}; separation needs at least two")]
    SingleClass { label: String },
    #[error("unknown label {label:?}")]
    UnknownLabel { label: String },
    #[error("query has {found} features, index expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("query contains a non-finite value")]
    NonFiniteQuery,
    #[error("bisector is undefined for coincident points")]
    CoincidentPair,
}

/// Which side of the class partition a nearest-neighbor query scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Points whose label matches the query label.
    Same,
    /// Points of every other label.
    Other,
}

/// How a separation value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Fast,
    Exact,
}

/// A signed separation value. Positive means the query is safe (strictly
/// nearer its predicted class than the complement); zero or negative means
/// it is not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationScore {
    pub value: f64,
    pub kind: ScoreKind,
}

impl SeparationScore {
    pub fn is_safe(&self) -> bool {
        self.value > 0.0
    }
}

#[derive(Debug)]
struct Bucket {
    label: String,
    /// Row-major `count x dimension` coordinates, contiguous per point.
    data: Vec<f64>,
    count: usize,
}

/// A training set grouped by label into contiguous per-class buckets, with
/// an atomic counter over nearest-neighbor distance queries.
///
/// All query methods take `&self` and may be called concurrently.
#[derive(Debug)]
pub struct ClassPartitionIndex {
    buckets: Vec<Bucket>,
    dimension: usize,
    total: usize,
    queries: AtomicU64,
}

impl ClassPartitionIndex {
    /// Groups a training set by label. Fails if only one class is present.
    pub fn build(train: &Dataset) -> Result<Self, GeometryError> {
        let dimension = train.dimension();
        let mut grouped: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
        for point in train.points() {
            grouped
                .entry(point.label.as_str())
                .or_default()
                .push(&point.features);
        }
        if grouped.len() < 2 {
            let label = grouped.keys().next().expect("dataset is non-empty");
            return Err(GeometryError::SingleClass {
                label: label.to_string(),
            });
        }
        let buckets = grouped
            .into_iter()
            .map(|(label, rows)| {
                let mut data = Vec::with_capacity(rows.len() * dimension);
                for row in &rows {
                    data.extend_from_slice(row);
                }
                Bucket {
                    label: label.to_string(),
                    data,
                    count: rows.len(),
                }
            })
            .collect::<Vec<_>>();
        Ok(ClassPartitionIndex {
            dimension,
            total: train.len(),
            buckets,
            queries: AtomicU64::new(0),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of training points across all classes.
    pub fn total_count(&self) -> usize {
        self.total
    }

    pub fn num_classes(&self) -> usize {
        self.buckets.len()
    }

    /// Labels in sorted order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.buckets.iter().map(|b| b.label.as_str())
    }

    pub fn class_size(&self, label: &str) -> Option<usize> {
        self.bucket(label).map(|b| b.count)
    }

    /// Iterates the stored points of one class.
    pub fn class_rows(&self, label: &str) -> Option<impl Iterator<Item = &[f64]>> {
        self.bucket(label)
            .map(|b| b.data.chunks_exact(self.dimension))
    }

    /// Total nearest-neighbor distance queries served so far.
    pub fn distance_queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn bucket(&self, label: &str) -> Option<&Bucket> {
        self.buckets
            .binary_search_by(|b| b.label.as_str().cmp(label))
            .ok()
            .map(|i| &self.buckets[i])
    }

    fn check_query(&self, x: &[f64], label: &str) -> Result<usize, GeometryError> {
        if x.len() != self.dimension {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteQuery);
        }
        self.buckets
            .binary_search_by(|b| b.label.as_str().cmp(label))
            .map_err(|_| GeometryError::UnknownLabel {
                label: label.to_string(),
            })
    }

    /// Exact distance from `x` to its nearest neighbor among the points
    /// with the given label (`Side::Same`) or among all other points
    /// (`Side::Other`). One call counts as one distance query.
    pub fn nn_distance(&self, x: &[f64], label: &str, side: Side) -> Result<f64, GeometryError> {
        let at = self.check_query(x, label)?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        let mut best = f64::INFINITY;
        match side {
            Side::Same => best = min_sq_dist(&self.buckets[at].data, self.dimension, x),
            Side::Other => {
                for (i, bucket) in self.buckets.iter().enumerate() {
                    if i == at {
                        continue;
                    }
                    let d = min_sq_dist(&bucket.data, self.dimension, x);
                    if d < best {
                        best = d;
                    }
                }
            }
        }
        Ok(best.sqrt())
    }

    /// Separation lower bound from two nearest-neighbor queries: half the
    /// gap between the complement distance and the matching distance. Runs
    /// in one pass over the training set per side.
    pub fn fast_separation(
        &self,
        x: &[f64],
        label: &str,
    ) -> Result<SeparationScore, GeometryError> {
        let same = self.nn_distance(x, label, Side::Same)?;
        let other = self.nn_distance(x, label, Side::Other)?;
        Ok(SeparationScore {
            value: (other - same) / 2.0,
            kind: ScoreKind::Fast,
        })
    }

    /// Exact signed separation: the minimum over complement points `z` of
    /// the largest signed bisector margin between `x`'s class points and
    /// `z`. Quadratic in the training set size; see
    /// [`fast_separation`](Self::fast_separation) for the cheap bound.
    ///
    /// A matching/complement pair at distance zero (the same coordinates
    /// stored under two labels) has no bisector and is skipped; if every
    /// pair for some complement point degenerates this way, that point
    /// contributes a zero margin.
    pub fn exact_separation(
        &self,
        x: &[f64],
        label: &str,
    ) -> Result<SeparationScore, GeometryError> {
        let at = self.check_query(x, label)?;
        let same = &self.buckets[at];
        let same_sq: Vec<f64> = same
            .data
            .chunks_exact(self.dimension)
            .map(|row| sq_dist(row, x))
            .collect();

        let mut outer_min = f64::INFINITY;
        for (i, bucket) in self.buckets.iter().enumerate() {
            if i == at {
                continue;
            }
            for other_row in bucket.data.chunks_exact(self.dimension) {
                let other_sq = sq_dist(other_row, x);
                let mut inner_max = f64::NEG_INFINITY;
                for (same_row, &sq) in same.data.chunks_exact(self.dimension).zip(&same_sq) {
                    let pair_sq = sq_dist(same_row, other_row);
                    if pair_sq == 0.0 {
                        continue;
                    }
                    let margin = (other_sq - sq) / (2.0 * pair_sq.sqrt());
                    if margin > inner_max {
                        inner_max = margin;
                    }
                }
                let contribution = if inner_max == f64::NEG_INFINITY {
                    0.0
                } else {
                    inner_max
                };
                if contribution < outer_min {
                    outer_min = contribution;
                }
            }
        }
        Ok(SeparationScore {
            value: outer_min,
            kind: ScoreKind::Exact,
        })
    }

    /// Upper bound on the gap between exact and fast separation: half the
    /// sum of the matching and complement nearest-neighbor distances.
    pub fn gap_bound(&self, x: &[f64], label: &str) -> Result<f64, GeometryError> {
        let same = self.nn_distance(x, label, Side::Same)?;
        let other = self.nn_distance(x, label, Side::Other)?;
        Ok((same + other) / 2.0)
    }
}

/// Signed distance from `x` to the perpendicular bisector hyperplane
/// between `x_same` and `x_other`, positive on the `x_same` side.
pub fn bisector_margin(x: &[f64], x_same: &[f64], x_other: &[f64]) -> Result<f64, GeometryError> {
    if x.len() != x_same.len() || x.len() != x_other.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: x.len(),
            found: if x_same.len() != x.len() {
                x_same.len()
            } else {
                x_other.len()
            },
        });
    }
    let pair_sq = sq_dist(x_same, x_other);
    if pair_sq == 0.0 {
        return Err(GeometryError::CoincidentPair);
    }
    Ok((sq_dist(x, x_other) - sq_dist(x, x_same)) / (2.0 * pair_sq.sqrt()))
}

/// One scored input for the scoring CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInput {
    pub index: usize,
    pub predicted_label: String,
    pub fast: f64,
    pub exact: Option<f64>,
}

/// Writes scoring results as `index,predicted_label,fast_sep,exact_sep`
/// rows with nine significant digits. The `exact_sep` cell stays empty for
/// rows scored without the exact pass.
pub fn write_scores_csv<W: io::Write>(mut out: W, rows: &[ScoredInput]) -> io::Result<()> {
    writeln!(out, "index,predicted_label,fast_sep,exact_sep")?;
    for row in rows {
        let exact = row.exact.map(|v| fmt_sig(v, 9)).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            row.index,
            row.predicted_label,
            fmt_sig(row.fast, 9),
            exact
        )?;
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            let d = pa[k] - pb[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn min_sq_dist(data: &[f64], dimension: usize, x: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for row in data.chunks_exact(dimension) {
        let d = sq_dist(row, x);
        if d < best {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledPoint;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[(&str, &[f64])]) -> Dataset {
        Dataset::new(
            rows.iter()
                .map(|(label, feats)| LabeledPoint::new(*label, feats.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn build_groups_points_by_label() {
        let ds = dataset(&[
            ("B", &[1.0, 0.0]),
            ("A", &[0.0, 0.0]),
            ("B", &[2.0, 0.0]),
            ("C", &[5.0, 5.0]),
        ]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        assert_eq!(index.num_classes(), 3);
        assert_eq!(index.total_count(), 4);
        assert_eq!(index.labels().collect::<Vec<_>>(), vec!["A", "B", "C"]);
        assert_eq!(index.class_size("B"), Some(2));
        assert_eq!(index.class_size("Z"), None);
        let rows: Vec<&[f64]> = index.class_rows("B").unwrap().collect();
        assert_eq!(rows, vec![&[1.0, 0.0][..], &[2.0, 0.0][..]]);
    }

    #[test]
    fn build_rejects_single_class() {
        let ds = dataset(&[("A", &[0.0]), ("A", &[1.0])]);
        assert!(matches!(
            ClassPartitionIndex::build(&ds).unwrap_err(),
            GeometryError::SingleClass { .. }
        ));
    }

    #[test]
    fn nn_distance_scans_the_requested_side() {
        let ds = dataset(&[
            ("A", &[0.0, 0.0]),
            ("A", &[10.0, 0.0]),
            ("B", &[3.0, 4.0]),
            ("C", &[0.0, 7.0]),
        ]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        let x = [0.0, 0.0];
        assert_eq!(index.nn_distance(&x, "A", Side::Same).unwrap(), 0.0);
        assert_eq!(index.nn_distance(&x, "A", Side::Other).unwrap(), 5.0);
        assert_eq!(index.nn_distance(&x, "B", Side::Same).unwrap(), 5.0);
        assert_eq!(index.nn_distance(&x, "B", Side::Other).unwrap(), 0.0);
        assert_eq!(index.nn_distance(&x, "C", Side::Other).unwrap(), 0.0);
    }

    #[test]
    fn nn_distance_validates_queries() {
        let ds = dataset(&[("A", &[0.0]), ("B", &[1.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        assert!(matches!(
            index.nn_distance(&[0.0], "Z", Side::Same).unwrap_err(),
            GeometryError::UnknownLabel { .. }
        ));
        assert!(matches!(
            index.nn_distance(&[0.0, 1.0], "A", Side::Same).unwrap_err(),
            GeometryError::DimensionMismatch { expected: 1, found: 2 }
        ));
        assert!(matches!(
            index.nn_distance(&[f64::NAN], "A", Side::Same).unwrap_err(),
            GeometryError::NonFiniteQuery
        ));
    }

    #[test]
    fn every_nn_call_increments_the_query_counter() {
        let ds = dataset(&[("A", &[0.0]), ("B", &[1.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        assert_eq!(index.distance_queries(), 0);
        index.nn_distance(&[0.2], "A", Side::Same).unwrap();
        assert_eq!(index.distance_queries(), 1);
        index.fast_separation(&[0.2], "A").unwrap();
        assert_eq!(index.distance_queries(), 3, "fast separation issues exactly two");
        index.gap_bound(&[0.2], "A").unwrap();
        assert_eq!(index.distance_queries(), 5);
        index.exact_separation(&[0.2], "A").unwrap();
        assert_eq!(index.distance_queries(), 5, "exact path is not a nn query");
    }

    #[test]
    fn bisector_margin_is_signed_distance_to_the_midplane() {
        let margin = bisector_margin(&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]).unwrap();
        assert_abs_diff_eq!(margin, 2.0, epsilon = 1e-12);
        let margin = bisector_margin(&[0.0, 0.0], &[3.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(margin, -2.0, epsilon = 1e-12);
        let margin = bisector_margin(&[2.0, 9.0], &[1.0, 9.0], &[3.0, 9.0]).unwrap();
        assert_abs_diff_eq!(margin, 0.0, epsilon = 1e-12);
        assert!(matches!(
            bisector_margin(&[0.0], &[1.0], &[1.0]).unwrap_err(),
            GeometryError::CoincidentPair
        ));
    }

    #[test]
    fn opposite_singletons_give_equal_fast_and_exact_scores() {
        let ds = dataset(&[("A", &[-1.0]), ("B", &[2.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        let x = [0.0];
        let fast = index.fast_separation(&x, "A").unwrap();
        let exact = index.exact_separation(&x, "A").unwrap();
        assert_abs_diff_eq!(fast.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.value, 0.5, epsilon = 1e-12);
        assert_eq!(fast.kind, ScoreKind::Fast);
        assert_eq!(exact.kind, ScoreKind::Exact);
        assert!(fast.is_safe() && exact.is_safe());
    }

    #[test]
    fn same_side_singletons_let_exact_exceed_fast() {
        let ds = dataset(&[("A", &[3.0]), ("B", &[4.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        let x = [0.0];
        let fast = index.fast_separation(&x, "A").unwrap();
        let exact = index.exact_separation(&x, "A").unwrap();
        assert_abs_diff_eq!(fast.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.value, 3.5, epsilon = 1e-12);
    }

    #[test]
    fn unsafe_queries_score_negative_on_both_paths() {
        let ds = dataset(&[("A", &[0.0, 0.0]), ("B", &[4.0, 0.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        let x = [3.5, 0.0];
        let fast = index.fast_separation(&x, "A").unwrap();
        let exact = index.exact_separation(&x, "A").unwrap();
        assert!(fast.value < 0.0);
        assert!(exact.value < 0.0);
        assert_abs_diff_eq!(fast.value, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.value, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn coincident_cross_class_points_pin_the_degenerate_margins() {
        let ds = dataset(&[("A", &[0.0]), ("B", &[0.0]), ("B", &[4.0])]);
        let index = ClassPartitionIndex::build(&ds).unwrap();
        let x = [1.0];
        let exact = index.exact_separation(&x, "A").unwrap();
        let fast = index.fast_separation(&x, "A").unwrap();
        assert_abs_diff_eq!(exact.value, 0.0, epsilon = 1e-12);
        assert!(!exact.is_safe(), "ties are unsafe");
        assert!(exact.value <= fast.value || fast.value <= 0.0);
        let x = [3.5];
        let exact = index.exact_separation(&x, "A").unwrap();
        assert_abs_diff_eq!(exact.value, -1.5, epsilon = 1e-12);
    }

    fn naive_exact(train: &[(String, Vec<f64>)], x: &[f64], label: &str) -> f64 {
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        };
        let mut outer = f64::INFINITY;
        for (other_label, other) in train {
            if other_label == label {
                continue;
            }
            let mut inner = f64::NEG_INFINITY;
            for (same_label, same) in train {
                if same_label != label {
                    continue;
                }
                let pair = dist(same, other);
                if pair == 0.0 {
                    continue;
                }
                let m = (dist(x, other).powi(2) - dist(x, same).powi(2)) / (2.0 * pair);
                inner = inner.max(m);
            }
            outer = outer.min(if inner.is_finite() { inner } else { 0.0 });
        }
        outer
    }

    #[test]
    fn exact_separation_matches_a_naive_rebuild_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _case in 0..200 {
            let dim = rng.gen_range(1..=5);
            let classes = rng.gen_range(2..=4);
            let n = rng.gen_range(classes..=40.max(classes));
            let mut rows = Vec::new();
            for i in 0..n {
                let label = if i < classes {
                    format!("c{i}")
                } else {
                    format!("c{}", rng.gen_range(0..classes))
                };
                let feats: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
                rows.push((label, feats));
            }
            let ds = Dataset::new(
                rows.iter()
                    .map(|(l, f)| LabeledPoint::new(l.clone(), f.clone()))
                    .collect(),
            )
            .unwrap();
            let index = ClassPartitionIndex::build(&ds).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let label = format!("c{}", rng.gen_range(0..classes));
                let got = index.exact_separation(&x, &label).unwrap().value;
                let want = naive_exact(&rows, &x, &label);
                assert_abs_diff_eq!(got, want, epsilon = 1e-9);
                let fast = index.fast_separation(&x, &label).unwrap().value;
                let naive_fast = {
                    let dist = |a: &[f64], b: &[f64]| {
                        a.iter()
                            .zip(b)
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum::<f64>()
                            .sqrt()
                    };
                    let same = rows
                        .iter()
                        .filter(|(l, _)| l == &label)
                        .map(|(_, f)| dist(&x, f))
                        .fold(f64::INFINITY, f64::min);
                    let other = rows
                        .iter()
                        .filter(|(l, _)| l != &label)
                        .map(|(_, f)| dist(&x, f))
                        .fold(f64::INFINITY, f64::min);
                    (other - same) / 2.0
                };
                assert_abs_diff_eq!(fast, naive_fast, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn scores_csv_has_stable_layout_and_empty_exact_cells() {
        let rows = vec![
            ScoredInput {
                index: 0,
                predicted_label: "A".to_string(),
                fast: 0.5,
                exact: Some(3.5),
            },
            ScoredInput {
                index: 1,
                predicted_label: "B".to_string(),
                fast: -0.25,
                exact: None,
            },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "index,predicted_label,fast_sep,exact_sep\n\
             0,A,0.500000000,3.50000000\n\
             1,B,-0.250000000,\n"
        );
    }

    #[test]
    fn squared_distance_handles_all_lane_remainders() {
        for dim in 1..=9 {
            let a: Vec<f64> = (0..dim).map(|i| i as f64 * 0.5).collect();
            let b: Vec<f64> = (0..dim).map(|i| -(i as f64) * 0.25).collect();
            let want: f64 = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            assert_abs_diff_eq!(sq_dist(&a, &b), want, epsilon = 1e-12);
        }
    }
}
