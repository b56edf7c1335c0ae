//! Causal interaction measure.
//!
//! For a reference series `x` and a candidate driver `y`, the cloud
//! `(x_n, y_{n-τ})` has correlation dimension `d`; the measure is `1/d`. A
//! low dimension means `y`'s past and `x`'s present share structure, so the
//! pair carries flow from `y` into `x` with delay `τ`. Throughout the crate
//! `cim_pair(x, y, τ)` therefore reads "y drives x".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_pair, PointCloud};
use crate::error::{Error, Result};
use crate::fractal::{correlation_dimension, DimensionConfig, DimensionEstimate};

const MIN_POINTS: usize = 4;
const DIM_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CimResult {
    /// Driving series (`y`), when known.
    pub source: Option<String>,
    /// Driven series (`x`), when known.
    pub target: Option<String>,
    pub lag: usize,
    pub dimension: f64,
    pub cim: f64,
    pub diagnostics: DimensionEstimate,
}

impl CimResult {
    fn from_estimate(lag: usize, est: DimensionEstimate) -> Result<Self> {
        if !(est.value > 0.0) {
            return Err(Error::Degenerate(format!(
                "dimension estimate {} at lag {lag} is not positive",
                est.value
            )));
        }
        Ok(CimResult {
            source: None,
            target: None,
            lag,
            dimension: est.value,
            cim: 1.0 / est.value,
            diagnostics: est,
        })
    }

    pub fn with_channels(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self.target = Some(target.into());
        self
    }
}

/// Candidate delays, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(lags: Vec<usize>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidArgument("lag set is empty".into()));
        }
        if lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("lags must be strictly increasing".into()));
        }
        Ok(LagSet(lags))
    }

    /// `lo..=hi`.
    pub fn range(lo: usize, hi: usize) -> Result<Self> {
        LagSet::new((lo..=hi).collect())
    }

    pub fn lags(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("non-empty")
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.0.binary_search(&lag).is_ok()
    }
}

impl TryFrom<Vec<usize>> for LagSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        LagSet::new(v)
    }
}

impl From<LagSet> for Vec<usize> {
    fn from(l: LagSet) -> Self {
        l.0
    }
}

/// Dimension of `(x_n, y_{n-lag})` and its reciprocal.
pub fn cim_pair(x: &[f64], y: &[f64], lag: usize, cfg: &DimensionConfig) -> Result<CimResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths differ ({} vs {})", x.len(), y.len())));
    }
    if lag + MIN_POINTS > x.len() {
        return Err(Error::InsufficientLength {
            needed: lag + MIN_POINTS - 1,
            available: x.len(),
        });
    }
    let cloud = embed_pair(x, y, lag)?;
    CimResult::from_estimate(lag, correlation_dimension(&cloud, cfg)?)
}

/// Lag with the smallest pair dimension. Lags whose estimate fails are
/// skipped; ties within 1e-9 go to the smaller lag.
pub fn best_lag(x: &[f64], y: &[f64], lags: &LagSet, cfg: &DimensionConfig) -> Result<CimResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths differ ({} vs {})", x.len(), y.len())));
    }
    let results: Vec<Option<CimResult>> = lags
        .lags()
        .par_iter()
        .map(|&lag| cim_pair(x, y, lag, cfg).ok())
        .collect();
    let mut best: Option<CimResult> = None;
    for r in results.into_iter().flatten() {
        match &best {
            Some(b) if r.dimension >= b.dimension - DIM_TIE => {}
            _ => best = Some(r),
        }
    }
    best.ok_or(Error::NoValidLag)
}

/// One lagged coordinate `x_{series, t - lag}`, where `t` is the time of the
/// first future sample of the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub series: usize,
    pub lag: usize,
}

/// Future coordinates `x_{series, t}, ..., x_{series, t + horizon - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FutureSpec {
    pub series: usize,
    pub horizon: usize,
}

/// Candidate pool holding lags `1..=max_lags[i]` of every series `i`, in
/// series order then ascending lag.
pub fn candidate_pool(max_lags: &[usize]) -> Vec<Component> {
    max_lags
        .iter()
        .enumerate()
        .flat_map(|(series, &l)| (1..=l).map(move |lag| Component { series, lag }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub candidate: Component,
    pub ambient_dim: usize,
    pub dimension: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVectorSelection {
    pub selected: Vec<Component>,
    pub pool: Vec<Component>,
    pub target: FutureSpec,
    pub steps: Vec<SelectionStep>,
}

fn joint_cloud(series: &[&[f64]], comps: &[Component], target: FutureSpec) -> Result<PointCloud> {
    let n = series[0].len();
    let max_lag = comps.iter().map(|c| c.lag).max().unwrap_or(0);
    let start = max_lag;
    // last t with t + horizon - 1 <= n - 1
    let end = n + 1 - target.horizon;
    if start + MIN_POINTS > end {
        return Err(Error::InsufficientLength {
            needed: max_lag + target.horizon + MIN_POINTS - 1,
            available: n,
        });
    }
    let dim = comps.len() + target.horizon;
    let mut data = Vec::with_capacity((end - start) * dim);
    for t in start..end {
        data.extend(comps.iter().map(|c| series[c.series][t - c.lag]));
        data.extend((0..target.horizon).map(|h| series[target.series][t + h]));
    }
    PointCloud::from_flat(data, dim)
}

/// Greedy selection of embedding components. Each pool element, in order,
/// is appended to the current selection; the joint cloud with the future
/// target is kept when its dimension falls below `ratio` times its ambient
/// dimension.
pub fn progressive_embed(
    series: &[&[f64]],
    pool: &[Component],
    target: FutureSpec,
    ratio: f64,
    cfg: &DimensionConfig,
) -> Result<EmbeddingVectorSelection> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("candidate pool is empty".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold ratio must lie in (0, 1), got {ratio}")));
    }
    if target.horizon == 0 {
        return Err(Error::InvalidArgument("future horizon must be at least 1".into()));
    }
    let n = series.first().map_or(0, |s| s.len());
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Shape("series have unequal lengths".into()));
    }
    let bad = pool
        .iter()
        .map(|c| c.series)
        .chain(std::iter::once(target.series))
        .find(|&s| s >= series.len());
    if let Some(s) = bad {
        return Err(Error::InvalidArgument(format!("series index {s} out of range")));
    }
    let max_lag = pool.iter().map(|c| c.lag).max().unwrap_or(0);
    if max_lag + target.horizon + MIN_POINTS - 1 > n {
        return Err(Error::InsufficientLength {
            needed: max_lag + target.horizon + MIN_POINTS - 1,
            available: n,
        });
    }

    let mut selected: Vec<Component> = Vec::new();
    let mut steps = Vec::with_capacity(pool.len());
    for &cand in pool {
        let mut trial = selected.clone();
        trial.push(cand);
        let cloud = joint_cloud(series, &trial, target)?;
        let ambient = cloud.ambient_dim();
        let dimension = correlation_dimension(&cloud, cfg).ok().map(|e| e.value);
        let accepted = dimension.is_some_and(|d| d < ratio * ambient as f64);
        if accepted {
            selected = trial;
        }
        steps.push(SelectionStep {
            candidate: cand,
            ambient_dim: ambient,
            dimension,
            accepted,
        });
    }
    Ok(EmbeddingVectorSelection {
        selected,
        pool: pool.to_vec(),
        target,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_linear_flow, stream_rng};
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_series_lie_on_a_line() {
        let x = noise(1000, 1);
        let r = cim_pair(&x, &x, 0, &DimensionConfig::default()).unwrap();
        assert!((r.dimension - 1.0).abs() < 0.05, "{}", r.dimension);
        assert!((r.cim * r.dimension - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn short_series_rejected() {
        let x = noise(10, 1);
        assert!(matches!(
            cim_pair(&x, &x, 7, &DimensionConfig::default()),
            Err(Error::InsufficientLength { .. })
        ));
        assert!(matches!(
            cim_pair(&x, &x[..9], 0, &DimensionConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn singleton_lag_set_matches_pair() {
        let (x, y) = gen_linear_flow(180, 0.5, 3);
        let cfg = DimensionConfig::default();
        let a = best_lag(&y, &x, &LagSet::new(vec![2]).unwrap(), &cfg).unwrap();
        let b = cim_pair(&y, &x, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shifted_copy_lag_is_found() {
        let x = noise(600, 9);
        let mut y = vec![0.0; 600];
        y[..597].copy_from_slice(&x[3..]);
        // x_n = y_{n-3}
        let r = best_lag(&x, &y, &LagSet::new(vec![1, 2, 3, 4]).unwrap(), &DimensionConfig::default()).unwrap();
        assert_eq!(r.lag, 3);
        assert!((r.dimension - 1.0).abs() < 0.05);
    }

    #[test]
    fn lag_set_validation() {
        assert!(LagSet::new(vec![]).is_err());
        assert!(LagSet::new(vec![2, 1]).is_err());
        assert!(LagSet::new(vec![1, 1]).is_err());
        let l: LagSet = serde_json::from_str("[0,1,5]").unwrap();
        assert_eq!(l.max(), 5);
        assert!(serde_json::from_str::<LagSet>("[3,2]").is_err());
    }

    #[test]
    fn progressive_finds_driver_lag() {
        let (x, y) = gen_linear_flow(400, 0.5, 21);
        let series = [x.as_slice(), y.as_slice()];
        let pool = candidate_pool(&[3, 3]);
        assert_eq!(pool.len(), 6);
        let sel = progressive_embed(&series, &pool, FutureSpec { series: 1, horizon: 1 }, 0.9, &DimensionConfig::default()).unwrap();
        assert!(sel.selected.contains(&Component { series: 0, lag: 1 }), "{sel:?}");
        assert_eq!(sel.steps.len(), 6);
        assert!(sel.steps[0].accepted);
    }

    #[test]
    fn progressive_rejects_pure_noise() {
        let a = noise(2000, 4);
        let b = noise(2000, 5);
        let c = noise(2000, 6);
        let series = [a.as_slice(), b.as_slice(), c.as_slice()];
        let pool = candidate_pool(&[2, 2, 0]);
        let sel = progressive_embed(&series, &pool, FutureSpec { series: 2, horizon: 1 }, 0.9, &DimensionConfig::default()).unwrap();
        assert!(sel.selected.is_empty(), "{:?}", sel.steps);
    }

    #[test]
    fn single_candidate_reduces_to_pair() {
        let (x, y) = gen_linear_flow(300, 0.5, 8);
        let series = [x.as_slice(), y.as_slice()];
        let cfg = DimensionConfig::default();
        let sel = progressive_embed(&series, &[Component { series: 0, lag: 2 }], FutureSpec { series: 1, horizon: 1 }, 0.9, &cfg).unwrap();
        let pair = cim_pair(&y, &x, 2, &cfg).unwrap();
        assert_eq!(sel.steps[0].dimension, Some(pair.dimension));
    }

    #[test]
    fn progressive_errors() {
        let x = noise(20, 1);
        let series = [x.as_slice()];
        let cfg = DimensionConfig::default();
        let target = FutureSpec { series: 0, horizon: 18 };
        assert!(matches!(
            progressive_embed(&series, &candidate_pool(&[2]), target, 0.9, &cfg),
            Err(Error::InsufficientLength { .. })
        ));
        assert!(progressive_embed(&series, &[], FutureSpec { series: 0, horizon: 1 }, 0.9, &cfg).is_err());
        assert!(progressive_embed(&series, &candidate_pool(&[2]), FutureSpec { series: 0, horizon: 1 }, 1.0, &cfg).is_err());
    }
}
