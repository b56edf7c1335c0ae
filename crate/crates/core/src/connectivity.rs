//! Effective-connectivity maps over all ordered channel pairs.
//!
//! Entry `a[k][j]` measures flow from channel `j` into channel `k`: it is the
//! causal interaction measure of `(x_k(n), x_j(n - τ))` at the lag `τ` that
//! minimises the pair dimension. `l[k][j]` stores that lag.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cim::{best_lag, LagSet};
use crate::error::{Error, Result};
use crate::fractal::DimensionConfig;
use crate::io::{mean_sd, Recording, WindowSpec};

/// Largest delay searched by default (500 ms at 200 Hz).
pub const DEFAULT_MAX_LAG: usize = 100;

/// Lags `1..=max_lag`, or `0..=max_lag` when instantaneous coupling is wanted.
pub fn default_lag_set(max_lag: usize, include_zero: bool) -> Result<LagSet> {
    LagSet::range(if include_zero { 0 } else { 1 }, max_lag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMap {
    /// Row-major `n × n` weights.
    pub weights: Vec<f64>,
    /// Row-major `n × n` chosen lags.
    pub lags: Vec<usize>,
    pub channel_ids: Vec<String>,
    pub window: Option<WindowSpec>,
    pub lag_set: LagSet,
}

impl ConnectivityMap {
    pub fn n_channels(&self) -> usize {
        self.channel_ids.len()
    }

    pub fn weight(&self, k: usize, j: usize) -> f64 {
        self.weights[k * self.n_channels() + j]
    }

    pub fn lag(&self, k: usize, j: usize) -> usize {
        self.lags[k * self.n_channels() + j]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.n_channels()).map(<[f64]>::to_vec).collect()
    }

    pub fn lag_rows(&self) -> Vec<Vec<usize>> {
        self.lags.chunks(self.n_channels()).map(<[usize]>::to_vec).collect()
    }

    /// Checks the structural invariants of a map.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_channels();
        if self.weights.len() != n * n || self.lags.len() != n * n {
            return Err(Error::Shape(format!("map matrices are not {n}x{n}")));
        }
        for k in 0..n {
            for j in 0..n {
                let (a, l) = (self.weight(k, j), self.lag(k, j));
                if k == j {
                    if a != 0.0 || l != 0 {
                        return Err(Error::Shape(format!("non-zero diagonal at {k}")));
                    }
                } else if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::Shape(format!("weight ({k}, {j}) = {a} is not positive")));
                } else if !self.lag_set.contains(l) {
                    return Err(Error::Shape(format!("lag ({k}, {j}) = {l} outside the lag set")));
                }
            }
        }
        Ok(())
    }
}

/// Runs the lag search for every ordered channel pair.
pub fn build_map(rec: &Recording, lags: &LagSet, cfg: &DimensionConfig) -> Result<ConnectivityMap> {
    let n = rec.n_channels();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 channels, got {n}")));
    }
    for (id, x) in rec.channels.iter().zip(&rec.samples) {
        let (_, sd) = mean_sd(x);
        if !(sd > 0.0) {
            return Err(Error::DegenerateChannel(id.clone()));
        }
    }
    if lags.max() + 4 > rec.len() {
        return Err(Error::InsufficientLength {
            needed: lags.max() + 4,
            available: rec.len(),
        });
    }

    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|k| (0..n).filter(move |&j| j != k).map(move |j| (k, j)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(k, j)| best_lag(&rec.samples[k], &rec.samples[j], lags, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut weights = vec![0.0; n * n];
    let mut lag_m = vec![0; n * n];
    for (&(k, j), r) in cells.iter().zip(results) {
        weights[k * n + j] = r.cim;
        lag_m[k * n + j] = r.lag;
    }
    Ok(ConnectivityMap {
        weights,
        lags: lag_m,
        channel_ids: rec.channels.clone(),
        window: None,
        lag_set: lags.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    /// Smallest pair dimension per channel.
    pub dimension: Vec<f64>,
    /// Channel index achieving it.
    pub partner: Vec<usize>,
}

pub fn sensor_profile(map: &ConnectivityMap) -> Result<SensorProfile> {
    map.validate()?;
    let n = map.n_channels();
    let mut dimension = Vec::with_capacity(n);
    let mut partner = Vec::with_capacity(n);
    for k in 0..n {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for j in (0..n).filter(|&j| j != k) {
            if map.weight(k, j) > best.1 {
                best = (j, map.weight(k, j));
            }
        }
        partner.push(best.0);
        dimension.push(1.0 / best.1);
    }
    Ok(SensorProfile { dimension, partner })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetrizePolicy {
    #[default]
    Max,
    Mean,
}

/// Symmetric weights `w_kj = policy(a_kj, a_jk)`, row-major.
pub fn symmetrize(map: &ConnectivityMap, policy: SymmetrizePolicy) -> Vec<Vec<f64>> {
    let n = map.n_channels();
    let mut w = vec![vec![0.0; n]; n];
    for k in 0..n {
        for j in (k + 1)..n {
            let (a, b) = (map.weight(k, j), map.weight(j, k));
            let v = match policy {
                SymmetrizePolicy::Max => a.max(b),
                SymmetrizePolicy::Mean => 0.5 * (a + b),
            };
            w[k][j] = v;
            w[j][k] = v;
        }
    }
    w
}

/// One feature per unordered pair `k < j`: the flow `a_jk` out of the
/// lower-indexed channel, in lexicographic pair order.
pub fn extract_features(map: &ConnectivityMap) -> Vec<f64> {
    let n = map.n_channels();
    (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |j| (k, j)))
        .map(|(k, j)| map.weight(j, k))
        .collect()
}

/// Names matching [`extract_features`], as `"source->target"`.
pub fn feature_ids(channel_ids: &[String]) -> Vec<String> {
    let n = channel_ids.len();
    (0..n)
        .flat_map(|k| ((k + 1)..n).map(move |j| (k, j)))
        .map(|(k, j)| format!("{}->{}", channel_ids[k], channel_ids[j]))
        .collect()
}
