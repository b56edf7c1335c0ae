//! Delay-coordinate embeddings: univariate, multivariate with per-series lag
//! lists (the non-uniform form), and the two-series lagged pair used by the
//! causal interaction measure.
//!
//! Points are only emitted for indices where every lagged coordinate exists;
//! there is no padding and no wraparound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points in R^M, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("ambient dimension must be at least 1".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form a non-empty set of {dim}-dimensional points",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("point cloud contains non-finite coordinates".into()));
        }
        Ok(PointCloud { data, dim })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape("points have differing dimensions".into()));
        }
        PointCloud::from_flat(points.concat(), dim)
    }

    /// Builds a cloud whose coordinate `q` is `columns[q]`.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let dim = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns have differing lengths".into()));
        }
        let mut data = Vec::with_capacity(n * dim);
        for i in 0..n {
            data.extend(columns.iter().map(|c| c[i]));
        }
        PointCloud::from_flat(data, dim)
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, q: usize) -> Vec<f64> {
        self.points().map(|p| p[q]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Applies `f` to every point, keeping the dimension.
    pub fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> PointCloud {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.data.chunks_exact(self.dim).zip(data.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        PointCloud { data, dim: self.dim }
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointCloud { data, dim: self.dim }
    }

    /// Keeps the coordinates at `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<PointCloud> {
        if cols.is_empty() || cols.iter().any(|&c| c >= self.dim) {
            return Err(Error::InvalidArgument(format!("invalid column selection {cols:?}")));
        }
        let mut data = Vec::with_capacity(self.count() * cols.len());
        for p in self.points() {
            data.extend(cols.iter().map(|&c| p[c]));
        }
        Ok(PointCloud { data, dim: cols.len() })
    }

    /// Concatenates the coordinates of two clouds with equal counts.
    pub fn hstack(&self, other: &PointCloud) -> Result<PointCloud> {
        if self.count() != other.count() {
            return Err(Error::Shape(format!(
                "cannot stack clouds of {} and {} points",
                self.count(),
                other.count()
            )));
        }
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(self.count() * dim);
        for (a, b) in self.points().zip(other.points()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(PointCloud { data, dim })
    }
}

/// Lag list for one input series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesLags {
    pub id: String,
    pub lags: Vec<usize>,
}

/// Per-series lag lists. Uniform embeddings use lags `0, τ, 2τ, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub series: Vec<SeriesLags>,
}

impl EmbeddingSpec {
    pub fn new(series: Vec<SeriesLags>) -> Result<Self> {
        let spec = EmbeddingSpec { series };
        spec.validate()?;
        Ok(spec)
    }

    /// `m` lags spaced by `tau` on each series, in order.
    pub fn uniform(ids: &[&str], m: &[usize], tau: &[usize]) -> Result<Self> {
        if ids.len() != m.len() || ids.len() != tau.len() {
            return Err(Error::Shape("ids, m and tau must have equal lengths".into()));
        }
        EmbeddingSpec::new(
            ids.iter()
                .zip(m.iter().zip(tau))
                .map(|(id, (&m, &tau))| SeriesLags {
                    id: id.to_string(),
                    lags: (0..m).map(|j| j * tau).collect(),
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::InvalidArgument("embedding spec has no series".into()));
        }
        for s in &self.series {
            if s.lags.is_empty() {
                return Err(Error::InvalidArgument(format!("series {:?} has no lags", s.id)));
            }
            if s.lags.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "lags for series {:?} are not strictly increasing",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.series.iter().map(|s| s.lags.len()).sum()
    }

    pub fn max_lag(&self) -> usize {
        self.series
            .iter()
            .filter_map(|s| s.lags.last().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: EmbeddingSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// `(x_n, x_{n-τ}, ..., x_{n-(m-1)τ})` for `n = (m-1)τ .. len-1`.
pub fn embed_univariate(x: &[f64], m: usize, tau: usize) -> Result<PointCloud> {
    if m == 0 || tau == 0 {
        return Err(Error::InvalidArgument(format!(
            "embedding needs m >= 1 and tau >= 1 (got m={m}, tau={tau})"
        )));
    }
    let span = (m - 1) * tau;
    if span >= x.len() {
        return Err(Error::InsufficientLength {
            needed: span,
            available: x.len(),
        });
    }
    let mut data = Vec::with_capacity((x.len() - span) * m);
    for n in span..x.len() {
        data.extend((0..m).map(|j| x[n - j * tau]));
    }
    PointCloud::from_flat(data, m)
}

/// Non-uniform multivariate embedding. `series[i]` is matched to
/// `spec.series[i]`; point `n` concatenates `x_{i, n - l_ij}` in series order,
/// then lag order.
pub fn embed_multivariate(series: &[&[f64]], spec: &EmbeddingSpec) -> Result<PointCloud> {
    spec.validate()?;
    if series.len() != spec.series.len() {
        return Err(Error::Shape(format!(
            "{} series supplied for a spec over {}",
            series.len(),
            spec.series.len()
        )));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Shape("series have unequal lengths".into()));
    }
    let max_lag = spec.max_lag();
    if max_lag >= n {
        return Err(Error::InsufficientLength {
            needed: max_lag,
            available: n,
        });
    }
    let dim = spec.ambient_dim();
    let mut data = Vec::with_capacity((n - max_lag) * dim);
    for t in max_lag..n {
        for (s, lags) in series.iter().zip(&spec.series) {
            data.extend(lags.lags.iter().map(|&l| s[t - l]));
        }
    }
    PointCloud::from_flat(data, dim)
}

/// `(x_n, y_{n-lag})`, the cloud whose dimension measures flow from `y` to `x`.
pub fn embed_pair(x: &[f64], y: &[f64], lag: usize) -> Result<PointCloud> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if lag >= x.len() {
        return Err(Error::InsufficientLength {
            needed: lag,
            available: x.len(),
        });
    }
    let mut data = Vec::with_capacity(2 * (x.len() - lag));
    for t in lag..x.len() {
        data.push(x[t]);
        data.push(y[t - lag]);
    }
    PointCloud::from_flat(data, 2)
}
