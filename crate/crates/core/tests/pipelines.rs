//! Statistical and end-to-end checks that need more data than a unit test.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use cim_core::cim::{best_lag, LagSet};
use cim_core::connectivity::{build_map, sensor_profile};
use cim_core::decode::{cross_validate, FeatureTable};
use cim_core::embedding::PointCloud;
use cim_core::fractal::{box_dimension, correlation_dimension, DimensionConfig};
use cim_core::io::Recording;
use cim_core::stats::welch_t_greater;
use cim_core::synth::stream_rng;

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[test]
fn shifted_copy_lag_identified_for_every_k() {
    let mut rng = stream_rng(11, 0);
    let base: Vec<f64> = (0..260).map(|_| normal(&mut rng)).collect();
    let lags = LagSet::range(1, 10).unwrap();
    let cfg = DimensionConfig::default();
    for k in 1..=10 {
        // x_n = y_{n-k}
        let y = base[10..].to_vec();
        let x = base[10 - k..base.len() - k].to_vec();
        assert_eq!(best_lag(&x, &y, &lags, &cfg).unwrap().lag, k);
    }
}

#[test]
fn subsample_estimate_is_stable() {
    let mut rng = stream_rng(12, 0);
    let pts: Vec<Vec<f64>> = (0..4000)
        .map(|_| {
            let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let r: f64 = rng.random();
            vec![t.cos() * (1.0 + 0.3 * r), t.sin() * (1.0 + 0.3 * r), r]
        })
        .collect();
    let cfg = DimensionConfig::default();
    let full = correlation_dimension(&PointCloud::from_points(&pts).unwrap(), &cfg).unwrap().value;
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.shuffle(&mut rng);
    let half: Vec<Vec<f64>> = idx[..2000].iter().map(|&i| pts[i].clone()).collect();
    let sub = correlation_dimension(&PointCloud::from_points(&half).unwrap(), &cfg).unwrap().value;
    assert!((full - sub).abs() < 0.1, "full {full} vs half {sub}");
}

#[test]
fn box_and_correlation_agree_on_bounded_blob() {
    // compact support: uniform square with a little jitter
    let mut rng = stream_rng(13, 0);
    let pts: Vec<Vec<f64>> = (0..5000)
        .map(|_| {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            vec![u + 0.005 * normal(&mut rng), v + 0.005 * normal(&mut rng)]
        })
        .collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    let cfg = DimensionConfig::default();
    let c = correlation_dimension(&cloud, &cfg).unwrap().value;
    let b = box_dimension(&cloud, cfg.min_window).unwrap().value;
    assert!((b - c).abs() <= 0.1, "box {b} vs corr {c}");
}

/// Three-channel chain a -> b -> c whose coupling is switched on only
/// inside `[on, on + len)`.
fn windowed_chain(seed: u64, n: usize, on: usize, len: usize) -> Recording {
    let mut rng = stream_rng(seed, 0);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for t in 0..n {
        let active = t > on && t < on + len;
        a[t] = normal(&mut rng);
        b[t] = if active { 0.95 * a[t - 1] + 0.1 * normal(&mut rng) } else { normal(&mut rng) };
        c[t] = if active { 0.95 * b[t - 1] + 0.1 * normal(&mut rng) } else { normal(&mut rng) };
    }
    Recording::new(vec!["a".into(), "b".into(), "c".into()], vec![a, b, c], 200.0).unwrap()
}

fn mean_off_diagonal(rec: &Recording, start: usize, len: usize) -> f64 {
    let w = cim_core::io::slice_window(rec, cim_core::io::WindowSpec::new(start, len)).unwrap();
    let w = cim_core::io::zscore(&w).unwrap();
    let map = build_map(&w, &LagSet::range(1, 5).unwrap(), &DimensionConfig::default()).unwrap();
    let n = map.n_channels();
    let mut s = 0.0;
    for k in 0..n {
        for j in 0..n {
            if k != j {
                s += map.weight(k, j);
            }
        }
    }
    s / (n * (n - 1)) as f64
}

#[test]
fn coupled_window_has_stronger_connectivity() {
    let (mut active, mut quiet) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let rec = windowed_chain(100 + seed, 600, 300, 200);
        active.push(mean_off_diagonal(&rec, 300, 200));
        quiet.push(mean_off_diagonal(&rec, 50, 200));
    }
    let (_, p) = welch_t_greater(&active, &quiet);
    assert!(p < 0.01, "p = {p}");
}

#[test]
fn sensor_profile_recomputes_from_map() {
    let rec = cim_core::io::zscore(&windowed_chain(7, 300, 0, 300)).unwrap();
    let map = build_map(&rec, &LagSet::range(1, 3).unwrap(), &DimensionConfig::default()).unwrap();
    let prof = sensor_profile(&map).unwrap();
    for k in 0..map.n_channels() {
        let direct = (0..map.n_channels())
            .filter(|&j| j != k)
            .map(|j| 1.0 / map.weight(k, j))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(prof.dimension[k], direct);
    }
}

#[test]
fn duplicated_rows_keep_lambda() {
    let mut rng = stream_rng(14, 0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for k in 0..3 {
        for _ in 0..20 {
            rows.push((0..6).map(|j| normal(&mut rng) + if j == k { 1.5 } else { 0.0 }).collect::<Vec<f64>>());
            labels.push(k);
        }
    }
    let classes = vec!["a".to_string(), "b".into(), "c".into()];
    let ids: Vec<String> = (0..6).map(|j| format!("f{j}")).collect();
    let once = FeatureTable::new(rows.clone(), labels.clone(), classes.clone(), ids.clone()).unwrap();
    let twice = FeatureTable::new(
        rows.iter().chain(&rows).cloned().collect(),
        labels.iter().chain(&labels).copied().collect(),
        classes,
        ids,
    )
    .unwrap();
    let a = cross_validate(&once, 0.6, 5, 3).unwrap();
    let b = cross_validate(&twice, 0.6, 5, 3).unwrap();
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-12 * p.abs());
    assert!(close(&a.lambdas, &b.lambdas));
    let pos = |cv: &cim_core::decode::CvResult| cv.lambdas.iter().position(|&l| l == cv.lambda_star).unwrap();
    assert_eq!(pos(&a), pos(&b));
}
