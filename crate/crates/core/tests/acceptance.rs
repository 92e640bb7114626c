//! Acceptance gate for the toolkit: nine release criteria, one test per
//! criterion, each printing a single `ACCEPTANCE Cn ...: PASS` line with
//! its key measurement. Tolerances are pinned next to each assertion.
//!
//! The throughput criterion (C8) times a large scan and must not share the
//! process with concurrently running tests; a reader/writer gate keeps
//! every other criterion on the read side and gives C8 the write side.

use std::sync::{LazyLock, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::Instant;

use geosep_core::calibration::{collect_pairs, fit, fit_isotonic, CalibrationPair, CalibratorKind};
use geosep_core::data::{Dataset, LabeledPoint, SplitRatios};
use geosep_core::geometry::{ClassPartitionIndex, ScoreKind, Side};
use geosep_core::metrics::ece;
use geosep_core::pipeline::{
    benchmark_throughput, generate_blobs, run_experiment, sample_queries, ExperimentConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static TIMING_GATE: LazyLock<RwLock<()>> = LazyLock::new(|| RwLock::new(()));

fn shared() -> RwLockReadGuard<'static, ()> {
    TIMING_GATE.read().unwrap()
}

fn exclusive() -> RwLockWriteGuard<'static, ()> {
    TIMING_GATE.write().unwrap()
}

/// One random evaluation instance: a small labeled train set plus a query
/// point and the label it is scored against.
struct Instance {
    index: ClassPartitionIndex,
    query: Vec<f64>,
    label: String,
}

/// Deterministic stream of random instances: 1-10 dimensions, 2-5 classes
/// with Gaussian clusters at random centers, at most 200 train points.
fn random_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dim = rng.gen_range(1..=10usize);
        let classes = rng.gen_range(2..=5usize);
        let noise = rng.gen_range(0.1..1.0f64);
        let mut points = Vec::new();
        let mut centers = Vec::new();
        for c in 0..classes {
            let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let size = rng.gen_range(1..=40usize);
            for _ in 0..size {
                let features = center
                    .iter()
                    .map(|&m| m + noise * sample_standard_normal(&mut rng))
                    .collect();
                points.push(LabeledPoint {
                    label: format!("c{c}"),
                    features,
                });
            }
            centers.push(center);
        }
        let data = Dataset::new(points).expect("generated points are valid");
        for _ in 0..4 {
            if out.len() == count {
                break;
            }
            let anchor = &centers[rng.gen_range(0..classes)];
            let query: Vec<f64> = anchor
                .iter()
                .map(|&m| m + 1.5 * noise * sample_standard_normal(&mut rng))
                .collect();
            let label = format!("c{}", rng.gen_range(0..classes));
            let index = ClassPartitionIndex::build(&data).expect("rebuild");
            out.push(Instance {
                index,
                query,
                label,
            });
        }
    }
    out
}

/// Box-Muller draw so the instance stream depends only on `rand` core.
fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

#[test]
fn c1_fast_score_is_signed_lower_bound() {
    let _gate = shared();
    let started = Instant::now();
    let instances = random_instances(0xC1, 1000);
    let mut safe = 0usize;
    let mut dangerous = 0usize;
    for inst in &instances {
        let same = inst.index.nn_distance(&inst.query, &inst.label, Side::Same).unwrap();
        let other = inst.index.nn_distance(&inst.query, &inst.label, Side::Other).unwrap();
        let fast = inst.index.fast_separation(&inst.query, &inst.label).unwrap().value;
        let exact = inst.index.exact_separation(&inst.query, &inst.label).unwrap().value;
        if same < other {
            safe += 1;
            assert!(fast >= -1e-9, "safe input produced fast {fast} < 0");
            assert!(exact >= fast - 1e-9, "safe input ordered exact {exact} < fast {fast}");
        } else {
            dangerous += 1;
            assert!(fast <= 1e-9, "dangerous input produced fast {fast} > 0");
            assert!(exact <= fast + 1e-9, "dangerous input ordered exact {exact} > fast {fast}");
        }
    }
    assert!(safe >= 100 && dangerous >= 100, "sweep must exercise both zones, got {safe}/{dangerous}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion must finish in under a minute");
    println!(
        "ACCEPTANCE C1 signed lower bound on 1000 instances ({safe} safe, {dangerous} dangerous, {:.1}s): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn c2_gap_bound_holds_and_is_achieved() {
    let _gate = shared();
    let instances = random_instances(0xC1, 1000);
    for inst in &instances {
        let fast = inst.index.fast_separation(&inst.query, &inst.label).unwrap().value;
        let exact = inst.index.exact_separation(&inst.query, &inst.label).unwrap().value;
        let bound = inst.index.gap_bound(&inst.query, &inst.label).unwrap();
        assert!(
            (exact - fast).abs() <= bound + 1e-9,
            "gap {} exceeded bound {bound}",
            (exact - fast).abs()
        );
    }

    let near = 2f64.powi(-10);
    let far = 2f64.powi(-10) + 2f64.powi(-36);
    let data = Dataset::new(vec![
        LabeledPoint {
            label: "a".to_string(),
            features: vec![near, 0.0],
        },
        LabeledPoint {
            label: "b".to_string(),
            features: vec![far, 0.0],
        },
    ])
    .unwrap();
    let index = ClassPartitionIndex::build(&data).unwrap();
    let x = [0.0, 0.0];
    let fast = index.fast_separation(&x, "a").unwrap().value;
    let exact = index.exact_separation(&x, "a").unwrap().value;
    let bound = index.gap_bound(&x, "a").unwrap();
    let gap = (exact - fast).abs();
    assert!(
        (bound - gap).abs() <= 1e-9,
        "tight construction left slack {} between gap {gap} and bound {bound}",
        bound - gap
    );
    println!(
        "ACCEPTANCE C2 gap bound on 1000 instances, tight case slack {:.2e}: PASS",
        bound - gap
    );
}

#[test]
fn c3_score_radius_zones_are_sound_and_maximal() {
    let _gate = shared();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut checked_safe = 0usize;
    let mut checked_dangerous = 0usize;
    let mut stream = 0u64;
    while checked_safe < 100 || checked_dangerous < 100 {
        stream += 1;
        assert!(stream < 2000, "instance stream exhausted before both zones were covered");
        for inst in random_instances(0xC3_000 + stream, 8) {
            let exact = inst.index.exact_separation(&inst.query, &inst.label).unwrap().value;
            let radius = 0.999 * exact.abs();
            if exact > 1e-6 && checked_safe < 100 {
                for _ in 0..1000 {
                    let y = sample_in_ball(&mut rng, &inst.query, radius);
                    let same = inst.index.nn_distance(&y, &inst.label, Side::Same).unwrap();
                    let other = inst.index.nn_distance(&y, &inst.label, Side::Other).unwrap();
                    assert!(
                        same < other,
                        "point inside the safe radius was not strictly closer to its class"
                    );
                }
                checked_safe += 1;
            } else if exact < -1e-6 && checked_dangerous < 100 {
                for _ in 0..1000 {
                    let y = sample_in_ball(&mut rng, &inst.query, radius);
                    let same = inst.index.nn_distance(&y, &inst.label, Side::Same).unwrap();
                    let other = inst.index.nn_distance(&y, &inst.label, Side::Other).unwrap();
                    assert!(
                        same >= other,
                        "point inside the dangerous radius became strictly closer to its class"
                    );
                }
                checked_dangerous += 1;
            }
        }
    }

    let mut flips = 0usize;
    for _ in 0..100 {
        let f: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut g: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        while (f[0] - g[0]).hypot(f[1] - g[1]) < 1e-3 {
            g = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        }
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let data = Dataset::new(vec![
            LabeledPoint {
                label: "a".to_string(),
                features: f.clone(),
            },
            LabeledPoint {
                label: "b".to_string(),
                features: g.clone(),
            },
        ])
        .unwrap();
        let index = ClassPartitionIndex::build(&data).unwrap();
        let exact = index.exact_separation(&x, "a").unwrap().value;
        if exact.abs() < 1e-6 {
            continue;
        }
        let link_len = (g[0] - f[0]).hypot(g[1] - f[1]);
        let towards_boundary: Vec<f64> = if exact > 0.0 {
            (0..2).map(|d| (g[d] - f[d]) / link_len).collect()
        } else {
            (0..2).map(|d| (f[d] - g[d]) / link_len).collect()
        };
        let step = 1.01 * exact.abs();
        let y: Vec<f64> = (0..2).map(|d| x[d] + step * towards_boundary[d]).collect();
        let same = index.nn_distance(&y, "a", Side::Same).unwrap();
        let other = index.nn_distance(&y, "a", Side::Other).unwrap();
        let flipped = if exact > 0.0 { same >= other } else { same <= other };
        assert!(
            flipped,
            "no ordering flip within 1.01x the score radius (score {exact})"
        );
        flips += 1;
    }
    assert!(flips >= 80, "maximality probe needs a healthy sample, got {flips}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "criterion must finish in under two minutes");
    println!(
        "ACCEPTANCE C3 zone soundness (100 safe + 100 dangerous x 1000 probes) and {flips} maximality flips ({:.1}s): PASS",
        elapsed.as_secs_f64()
    );
}

fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dim = center.len();
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| sample_standard_normal(rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / dim as f64);
        return center
            .iter()
            .zip(&dir)
            .map(|(&c, &d)| c + r * d / norm)
            .collect();
    }
}

/// Exhaustive weighted-least-squares reference: tries every contiguous
/// block partition, keeps the cheapest one with non-decreasing block
/// means. The projection is unique, so any cost minimizer matches it.
fn oracle_isotonic(targets: &[f64]) -> Vec<f64> {
    let n = targets.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = vec![0.0; n];
        let mut means: Vec<f64> = Vec::new();
        let mut start = 0usize;
        for i in 0..n {
            if i == n - 1 || (mask >> i) & 1 == 1 {
                let block = &targets[start..=i];
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                means.push(mean);
                for slot in &mut fit[start..=i] {
                    *slot = mean;
                }
                start = i + 1;
            }
        }
        if !means.windows(2).all(|w| w[0] <= w[1] + 1e-12) {
            continue;
        }
        let cost: f64 = targets.iter().zip(&fit).map(|(t, f)| (t - f) * (t - f)).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, fit));
        }
    }
    best.expect("the all-in-one-block partition is always monotone").1
}

#[test]
fn c4_isotonic_fit_matches_exhaustive_search() {
    let _gate = shared();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut cases = 0usize;
    for len in 1..=6usize {
        let mut stack = vec![Vec::<f64>::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == len {
                let pairs: Vec<CalibrationPair> = prefix
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| CalibrationPair {
                        score: i as f64,
                        target: t,
                        weight: 1.0,
                    })
                    .collect();
                let fitted = fit_isotonic(&pairs).unwrap();
                let expected = oracle_isotonic(&prefix);
                for (got, want) in fitted.values().iter().zip(&expected) {
                    assert!(
                        (got - want).abs() <= 1e-9,
                        "fit {got} disagreed with exhaustive reference {want} on {prefix:?}"
                    );
                }
                cases += 1;
                continue;
            }
            for &v in &grid {
                let mut next = prefix.clone();
                next.push(v);
                stack.push(next);
            }
        }
    }
    assert_eq!(cases, 5 + 25 + 125 + 625 + 3125 + 15625);
    println!("ACCEPTANCE C4 isotonic fit equals exhaustive search on {cases} sequences: PASS");
}

fn naive_ece(confidences: &[f64], correctness: &[bool], m_bins: usize) -> f64 {
    let n = confidences.len() as f64;
    let mut total = 0.0;
    for b in 0..m_bins {
        let mut count = 0usize;
        let mut hits = 0usize;
        let mut conf_sum = 0.0;
        for (&c, &ok) in confidences.iter().zip(correctness) {
            let mut bin = (c * m_bins as f64).floor() as usize;
            if bin == m_bins {
                bin -= 1;
            }
            if bin == b {
                count += 1;
                conf_sum += c;
                if ok {
                    hits += 1;
                }
            }
        }
        if count > 0 {
            let acc = hits as f64 / count as f64;
            let mean_conf = conf_sum / count as f64;
            total += (count as f64 / n) * (acc - mean_conf).abs();
        }
    }
    total
}

#[test]
fn c5_ece_matches_hand_example_and_naive_reference() {
    let _gate = shared();
    let hand = ece(&[0.7, 0.9], &[true, false], 1).unwrap();
    let expected = (0.5f64 - (0.7 + 0.9) / 2.0).abs();
    assert_eq!(hand.ece, expected, "single-bin hand example must match exactly");
    assert!((hand.ece - 0.3).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let confidences: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let correctness: Vec<bool> = confidences.iter().map(|&c| rng.gen_bool(c.clamp(0.05, 0.95))).collect();
    for m in [1usize, 10, 30] {
        let report = ece(&confidences, &correctness, m).unwrap();
        let reference = naive_ece(&confidences, &correctness, m);
        assert!(
            (report.ece - reference).abs() <= 1e-12,
            "M={m}: {} vs naive {reference}",
            report.ece
        );
    }
    println!("ACCEPTANCE C5 expected calibration error matches hand example and naive reference: PASS");
}

/// Shared benchmark for the two end-to-end calibration criteria: three
/// overlapping Gaussian blobs, 2000 points, and a wide-vote nearest
/// neighbor predictor whose accuracy lands near 0.85.
fn blobs_benchmark_config() -> (Dataset, ExperimentConfig) {
    let blob = generate_blobs(3, 667, 4, 0.40, 424_242).unwrap();
    let data = Dataset::new(blob.points()[..2000].to_vec()).unwrap();
    let config = ExperimentConfig {
        ratios: SplitRatios {
            train: 0.5,
            validation: 0.3,
            test: 0.2,
        },
        trials: 10,
        m_bins: 30,
        score_kind: ScoreKind::Fast,
        calibrator_kind: CalibratorKind::Isotonic,
        knn_k: 101,
        seed: 13_000,
    };
    (data, config)
}

#[test]
fn c6_calibrated_separation_beats_native_confidence() {
    let _gate = shared();
    let (data, config) = blobs_benchmark_config();
    let report = run_experiment(&data, &config, None, true).unwrap();
    let accuracy = report.accuracy_summary.as_ref().unwrap().mean;
    let geo = report.geo_summary.as_ref().unwrap().mean;
    let native = report
        .baseline_summary
        .as_ref()
        .expect("vote fractions give every point a native confidence")
        .mean;
    assert!(
        (0.82..=0.88).contains(&accuracy),
        "benchmark drifted away from its tuned accuracy: {accuracy}"
    );
    assert!(
        geo <= native,
        "mean calibrated-separation ECE {geo} exceeded the calibrated native baseline {native}"
    );
    println!(
        "ACCEPTANCE C6 separation ECE {geo:.4} <= native-confidence ECE {native:.4} at accuracy {accuracy:.3}: PASS"
    );
}

#[test]
fn c7_fast_and_exact_scores_calibrate_alike() {
    let _gate = shared();
    let (data, config) = blobs_benchmark_config();
    let fast = run_experiment(&data, &config, None, true).unwrap();
    let exact_config = ExperimentConfig {
        score_kind: ScoreKind::Exact,
        ..config
    };
    let exact = run_experiment(&data, &exact_config, None, true).unwrap();
    let fast_ece = fast.geo_summary.as_ref().unwrap().mean;
    let exact_ece = exact.geo_summary.as_ref().unwrap().mean;
    assert!(
        (fast_ece - exact_ece).abs() <= 0.02,
        "pipeline ECE diverged: fast {fast_ece} vs exact {exact_ece}"
    );
    println!(
        "ACCEPTANCE C7 pipeline ECE gap |{fast_ece:.4} - {exact_ece:.4}| = {:.4} <= 0.02: PASS",
        (fast_ece - exact_ece).abs()
    );
}

#[test]
fn c8_single_thread_throughput_floor() {
    let _gate = exclusive();
    let started = Instant::now();
    let train = generate_blobs(10, 4200, 784, 1.0, 0xBE7C).unwrap();
    let index = ClassPartitionIndex::build(&train).unwrap();
    let pairs = collect_pairs(
        &[-2.0, -1.0, 0.0, 1.0, 2.0],
        &[false, false, true, true, true],
    )
    .unwrap();
    let calibrator = fit(&pairs, CalibratorKind::Isotonic).unwrap();
    let queries = sample_queries(&train, 33, 0.5, 0xBE7D).unwrap();
    let before = index.distance_queries();
    let report = benchmark_throughput(&index, &calibrator, &queries, 3, 1).unwrap();
    let after = index.distance_queries();
    assert_eq!(report.threads, 1);
    assert_eq!(report.train_size, 42_000);
    assert_eq!(report.dimension, 784);
    assert_eq!(
        after - before,
        2 * (queries.len() as u64) * 4,
        "timed region must spend exactly two scans per prediction (plus warm-up)"
    );
    assert!(
        report.predictions_per_second >= 22.0,
        "throughput floor missed: {:.1} predictions/second",
        report.predictions_per_second
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "criterion must finish in under five minutes");
    println!(
        "ACCEPTANCE C8 single-thread throughput {:.1} predictions/second on 42000x784 ({:.0}s): PASS",
        report.predictions_per_second,
        elapsed.as_secs_f64()
    );
}

#[test]
fn c9_experiment_reports_are_deterministic() {
    let _gate = shared();
    let blob = generate_blobs(3, 200, 3, 0.45, 1_234).unwrap();
    let config = ExperimentConfig {
        trials: 5,
        knn_k: 15,
        seed: 99,
        ..ExperimentConfig::default()
    };
    let first = run_experiment(&blob, &config, None, true).unwrap().to_csv();
    let second = run_experiment(&blob, &config, None, true).unwrap().to_csv();
    let sequential = run_experiment(&blob, &config, None, false).unwrap().to_csv();
    assert_eq!(first, second, "repeated runs must serialize identically");
    assert_eq!(first, sequential, "parallel and sequential runs must serialize identically");
    println!("ACCEPTANCE C9 repeated experiment reports are byte-identical: PASS");
}
