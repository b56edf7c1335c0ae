//! Fractal dimension of point clouds.
//!
//! The correlation dimension is the slope of `ln C(r)` against `ln r`, where
//! `C(r)` is the fraction of unordered point pairs within Euclidean distance
//! `r`. The box-counting dimension is the slope of `ln ν(r)` against
//! `ln(1/r)`, with `ν(r)` the number of occupied grid cells of side `r`.
//! Both slopes are taken over an automatically selected linear region: every
//! contiguous window of at least `min_window` grid points is fitted by OLS
//! and the window with the highest R² wins (ties go to the longer window,
//! then to the one at smaller radii).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::PointCloud;
use crate::error::{Error, Result};
use crate::stats::{ols, quantile_sorted};

/// Pair counts above this many points come from a seeded sample of pairs.
pub const EXACT_PAIR_POINT_LIMIT: usize = 20_000;
const SAMPLED_PAIRS: usize = 20_000_000;
const MAX_QUANTILE_PAIRS: usize = 1_000_000;
const R2_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Corr,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    /// First grid index of the fitted region.
    pub fit_lo: usize,
    /// Last grid index of the fitted region (inclusive).
    pub fit_hi: usize,
    pub r_squared: f64,
    pub stderr: f64,
    pub method: Method,
    /// Set when the estimate exceeds the ambient dimension by more than 0.5.
    #[serde(default)]
    pub exceeds_ambient: bool,
}

/// How the radius grid is laid out between its lower and upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSize {
    Count(usize),
    PerDecade(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    pub grid: GridSize,
    /// Pairwise-distance quantile used as the largest radius.
    pub upper_quantile: f64,
    /// The smallest radius is where the mean neighbour count per point
    /// reaches this value.
    pub min_neighbors: f64,
    pub min_window: usize,
    /// Seed for pair subsampling on large clouds.
    pub seed: u64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            grid: GridSize::Count(24),
            upper_quantile: 0.9,
            min_neighbors: 6.0,
            min_window: 8,
            seed: 0,
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn total_pairs(n: usize) -> usize {
    n * (n - 1) / 2
}

fn sample_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    loop {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            return (i, j);
        }
    }
}

/// Sorted pairwise distances, subsampled to at most a million pairs.
fn distance_sample(cloud: &PointCloud, seed: u64) -> Vec<f64> {
    let n = cloud.count();
    let mut d = if total_pairs(n) <= MAX_QUANTILE_PAIRS {
        let mut d = Vec::with_capacity(total_pairs(n));
        for i in 0..n {
            let p = cloud.point(i);
            for j in i + 1..n {
                d.push(dist(p, cloud.point(j)));
            }
        }
        d
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..MAX_QUANTILE_PAIRS)
            .map(|_| {
                let (i, j) = sample_pair(&mut rng, n);
                dist(cloud.point(i), cloud.point(j))
            })
            .collect()
    };
    d.sort_by(f64::total_cmp);
    d
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|q| {
            if q == 0 {
                lo
            } else if q + 1 == count {
                hi
            } else {
                (a + (b - a) * q as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Default radius grid: log-spaced between the radius where each point has
/// on average `min_neighbors` neighbours and the `upper_quantile` of the
/// pairwise distances.
pub fn default_radii(cloud: &PointCloud, cfg: &DimensionConfig) -> Result<Vec<f64>> {
    let n = cloud.count();
    if n < 2 {
        return Err(Error::DegenerateCloud(format!("{n} point(s)")));
    }
    let d = distance_sample(cloud, cfg.seed);
    let lower_q = (cfg.min_neighbors / (n - 1) as f64).min(cfg.upper_quantile / 4.0);
    let hi = quantile_sorted(&d, cfg.upper_quantile);
    let mut lo = quantile_sorted(&d, lower_q);
    if lo <= 0.0 {
        lo = d.iter().copied().find(|&v| v > 0.0).unwrap_or(0.0);
    }
    if !(hi > lo && lo > 0.0) {
        return Err(Error::NoScalingRegion(
            "pairwise distances do not span a positive range".into(),
        ));
    }
    let count = match cfg.grid {
        GridSize::Count(c) => c,
        GridSize::PerDecade(k) => ((k as f64 * (hi / lo).log10()).ceil() as usize + 1).max(cfg.min_window),
    };
    if count < 2 {
        return Err(Error::InvalidArgument("radius grid needs at least two radii".into()));
    }
    Ok(log_spaced(lo, hi, count))
}

fn bin_counts(cloud: &PointCloud, radii: &[f64], seed: u64) -> (Vec<u64>, u64) {
    let n = cloud.count();
    let bins = radii.len();
    let bin_of = |d: f64| radii.partition_point(|&r| r < d);
    if n <= EXACT_PAIR_POINT_LIMIT {
        let counts = (0..n)
            .into_par_iter()
            .fold(
                || vec![0u64; bins + 1],
                |mut acc, i| {
                    let p = cloud.point(i);
                    for j in i + 1..n {
                        acc[bin_of(dist(p, cloud.point(j)))] += 1;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; bins + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        (counts, total_pairs(n) as u64)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u64; bins + 1];
        for _ in 0..SAMPLED_PAIRS {
            let (i, j) = sample_pair(&mut rng, n);
            counts[bin_of(dist(cloud.point(i), cloud.point(j)))] += 1;
        }
        (counts, SAMPLED_PAIRS as u64)
    }
}

/// `C(r)` at each radius: the fraction of unordered pairs at distance `<= r`.
pub fn correlation_integral(cloud: &PointCloud, radii: &[f64]) -> Result<CorrelationCurve> {
    correlation_integral_seeded(cloud, radii, 0)
}

pub fn correlation_integral_seeded(
    cloud: &PointCloud,
    radii: &[f64],
    seed: u64,
) -> Result<CorrelationCurve> {
    let n = cloud.count();
    if n < 2 {
        return Err(Error::DegenerateCloud(format!("{n} point(s)")));
    }
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let (counts, total) = bin_counts(cloud, radii, seed);
    let mut acc = 0u64;
    let values = counts[..radii.len()]
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect();
    Ok(CorrelationCurve {
        radii: radii.to_vec(),
        values,
        n,
    })
}

/// Scans every contiguous window of at least `min_window` points and keeps
/// the best-R² fit. `idx` maps the fitted points back to grid indices.
fn best_window(x: &[f64], y: &[f64], idx: &[usize], min_window: usize, method: Method) -> DimensionEstimate {
    let len = x.len();
    let w = min_window.min(len).max(2);
    let mut best: Option<(usize, usize, crate::stats::LinearFit)> = None;
    for a in 0..len {
        for b in (a + w)..=len {
            let fit = ols(&x[a..b], &y[a..b]);
            let better = match &best {
                None => true,
                Some((ba, bb, bf)) => {
                    if fit.r_squared > bf.r_squared + R2_TIE {
                        true
                    } else if fit.r_squared >= bf.r_squared - R2_TIE {
                        let (l, bl) = (b - a, bb - ba);
                        l > bl || (l == bl && a < *ba)
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((a, b, fit));
            }
        }
    }
    let (a, b, fit) = best.expect("at least one window");
    DimensionEstimate {
        value: fit.slope.max(0.0),
        fit_lo: idx[a],
        fit_hi: idx[b - 1],
        r_squared: fit.r_squared,
        stderr: fit.stderr,
        method,
        exceeds_ambient: false,
    }
}

/// Slope of `ln C` against `ln r` over the selected linear region. Radii with
/// `C = 0` (and saturated radii with `C = 1`) are dropped before fitting.
pub fn estimate_correlation_dimension(
    curve: &CorrelationCurve,
    min_window: usize,
) -> Result<DimensionEstimate> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut idx = Vec::new();
    for (q, (&r, &c)) in curve.radii.iter().zip(&curve.values).enumerate() {
        if c > 0.0 && c < 1.0 {
            x.push(r.ln());
            y.push(c.ln());
            idx.push(q);
        }
    }
    if x.len() < 4 {
        return Err(Error::NoScalingRegion(format!(
            "only {} radii with 0 < C(r) < 1",
            x.len()
        )));
    }
    Ok(best_window(&x, &y, &idx, min_window, Method::Corr))
}

/// Correlation dimension on the default radius grid.
pub fn correlation_dimension(cloud: &PointCloud, cfg: &DimensionConfig) -> Result<DimensionEstimate> {
    let radii = default_radii(cloud, cfg)?;
    let curve = correlation_integral_seeded(cloud, &radii, cfg.seed)?;
    let mut est = estimate_correlation_dimension(&curve, cfg.min_window)?;
    est.exceeds_ambient = est.value > cloud.ambient_dim() as f64 + 0.5;
    Ok(est)
}

/// Number of occupied axis-aligned cells of side `size`, grid anchored at the
/// coordinate-wise minimum.
pub fn occupied_boxes(cloud: &PointCloud, size: f64) -> usize {
    let dim = cloud.ambient_dim();
    let mut origin = vec![f64::INFINITY; dim];
    for p in cloud.points() {
        for (o, v) in origin.iter_mut().zip(p) {
            *o = o.min(*v);
        }
    }
    let mut seen: HashSet<Vec<i64>> = HashSet::with_capacity(cloud.count());
    for p in cloud.points() {
        seen.insert(
            p.iter()
                .zip(&origin)
                .map(|(v, o)| ((v - o) / size).floor() as i64)
                .collect(),
        );
    }
    seen.len()
}

/// Default box sizes: from half the largest extent, shrinking by `2^(1/4)`,
/// until more than a tenth of the points sit in their own box.
pub fn default_box_sizes(cloud: &PointCloud) -> Result<Vec<f64>> {
    let dim = cloud.ambient_dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in cloud.points() {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if !(extent > 0.0) {
        return Err(Error::NoScalingRegion("cloud has zero extent".into()));
    }
    let limit = cloud.count() / 10;
    let factor = 2f64.powf(0.25);
    let mut sizes = Vec::new();
    let mut r = extent / 2.0;
    while sizes.len() < 64 {
        if occupied_boxes(cloud, r) > limit {
            break;
        }
        sizes.push(r);
        r /= factor;
    }
    Ok(sizes)
}

/// Slope of `ln ν(r)` against `ln(1/r)` over the selected linear region.
pub fn box_counting_dimension(
    cloud: &PointCloud,
    sizes: &[f64],
    min_window: usize,
) -> Result<DimensionEstimate> {
    if cloud.count() < 2 {
        return Err(Error::DegenerateCloud(format!("{} point(s)", cloud.count())));
    }
    if sizes.iter().any(|&s| s <= 0.0) || sizes.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument(
            "box sizes must be positive and strictly decreasing".into(),
        ));
    }
    if sizes.len() < 4 {
        return Err(Error::NoScalingRegion(format!("only {} box sizes", sizes.len())));
    }
    let counts: Vec<usize> = sizes.par_iter().map(|&s| occupied_boxes(cloud, s)).collect();
    if counts.iter().all(|&c| c == counts[0]) {
        return Err(Error::NoScalingRegion("occupied box count never changes".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|s| (1.0 / s).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let idx: Vec<usize> = (0..sizes.len()).collect();
    let mut est = best_window(&x, &y, &idx, min_window, Method::Box);
    est.exceeds_ambient = est.value > cloud.ambient_dim() as f64 + 0.5;
    Ok(est)
}

/// Box-counting dimension on the default size ladder.
pub fn box_dimension(cloud: &PointCloud, min_window: usize) -> Result<DimensionEstimate> {
    let sizes = default_box_sizes(cloud)?;
    box_counting_dimension(cloud, &sizes, min_window)
}

/// Dispatches on `method` with the default grids.
pub fn estimate_dimension(cloud: &PointCloud, method: Method, cfg: &DimensionConfig) -> Result<DimensionEstimate> {
    match method {
        Method::Corr => correlation_dimension(cloud, cfg),
        Method::Box => box_dimension(cloud, cfg.min_window),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn line3() -> PointCloud {
        PointCloud::from_flat(vec![0.0, 1.0, 2.0], 1).unwrap()
    }

    #[test]
    fn three_collinear_points() {
        let c = correlation_integral(&line3(), &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(c.values, vec![0.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn degenerate_inputs() {
        let one = PointCloud::from_flat(vec![1.0, 2.0], 2).unwrap();
        assert!(matches!(correlation_integral(&one, &[1.0]), Err(Error::DegenerateCloud(_))));
        let same = PointCloud::from_flat(vec![0.5; 200], 2).unwrap();
        assert!(matches!(
            correlation_dimension(&same, &DimensionConfig::default()),
            Err(Error::NoScalingRegion(_))
        ));
        assert!(correlation_integral(&line3(), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn all_zero_curve_has_no_scaling_region() {
        let curve = CorrelationCurve {
            radii: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            values: vec![0.0; 5],
            n: 10,
        };
        assert!(matches!(
            estimate_correlation_dimension(&curve, 5),
            Err(Error::NoScalingRegion(_))
        ));
    }

    #[test]
    fn power_law_curve_recovers_exponent() {
        let radii: Vec<f64> = (1..=20).map(|k| 0.01 * k as f64).collect();
        let values: Vec<f64> = radii.iter().map(|r| 3.0 * r * r * r.sqrt()).collect();
        let est = estimate_correlation_dimension(&CorrelationCurve { radii, values, n: 100 }, 5).unwrap();
        assert!((est.value - 2.5).abs() < 1e-9);
        // exact fit everywhere, so the longest window wins
        assert_eq!((est.fit_lo, est.fit_hi), (0, 19));
    }

    #[test]
    fn box_counts_on_unit_grid() {
        let pts: Vec<Vec<f64>> = (0..4).flat_map(|i| (0..4).map(move |j| vec![i as f64, j as f64])).collect();
        let c = PointCloud::from_points(&pts).unwrap();
        assert_eq!(occupied_boxes(&c, 1.0), 16);
        assert_eq!(occupied_boxes(&c, 2.0), 4);
        assert_eq!(occupied_boxes(&c, 4.0), 1);
    }

    #[test]
    fn curve_is_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cloud = PointCloud::from_flat(data, 3).unwrap();
        let radii = default_radii(&cloud, &DimensionConfig::default()).unwrap();
        let c = correlation_integral(&cloud, &radii).unwrap();
        assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
