//! Condition decoding from connectivity features.
//!
//! Features are screened with a Kruskal-Wallis test, then a multinomial
//! logistic model with an elastic-net penalty is fit by cyclic coordinate
//! descent. Each class block is minimised against a quadratic majoriser of
//! the log-likelihood (curvature bound 1/4), so every sweep decreases the
//! penalised objective.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::stats::average_ranks;

pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_SCREEN_LEVEL: f64 = 0.01;
pub const PATH_LENGTH: usize = 100;
pub const PATH_RATIO: f64 = 1e-3;

/// Curvature bound of the binary log-likelihood.
const MAJORIZER: f64 = 0.25;
/// Mixing floor used to define the path top when `alpha = 0`.
const MIN_ALPHA_FOR_PATH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    /// Observations, one row each.
    pub rows: Vec<Vec<f64>>,
    /// Class index per row, into `classes`.
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub feature_ids: Vec<String>,
}

impl FeatureTable {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: Vec<String>, feature_ids: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let p = feature_ids.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Shape(format!("row {i} has {} features, expected {p}", r.len())));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    channel: feature_ids[j].clone(),
                });
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::InvalidArgument(format!("label index {l} out of range")));
        }
        let mut present = vec![false; classes.len()];
        labels.iter().for_each(|&l| present[l] = true);
        if present.iter().filter(|&&b| b).count() < 2 {
            return Err(Error::InvalidArgument("labels must cover at least two classes".into()));
        }
        let mut ids = feature_ids.clone();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("feature ids are not unique".into()));
        }
        Ok(FeatureTable {
            rows,
            labels,
            classes,
            feature_ids,
        })
    }

    /// Builds a table from string labels; classes are sorted label names.
    pub fn from_named(rows: Vec<Vec<f64>>, labels: &[String], feature_ids: Vec<String>) -> Result<Self> {
        let mut classes: Vec<String> = labels.to_vec();
        classes.sort();
        classes.dedup();
        let idx = labels.iter().map(|l| classes.binary_search(l).expect("present")).collect();
        FeatureTable::new(rows, idx, classes, feature_ids)
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps the features at `cols`, in that order.
    pub fn select_features(&self, cols: &[usize]) -> FeatureTable {
        FeatureTable {
            rows: self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect(),
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            feature_ids: cols.iter().map(|&c| self.feature_ids[c].clone()).collect(),
        }
    }

    fn subset_rows(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            feature_ids: self.feature_ids.clone(),
        }
    }
}

/// CSV with a header row; the first column holds the class label.
pub fn read_feature_table<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 0,
            message: "need a label column and at least one feature".into(),
        });
    }
    let feature_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        labels.push(rec[0].trim().to_string());
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    message: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    FeatureTable::from_named(rows, &labels, feature_ids)
}

pub fn load_feature_table(path: &Path) -> Result<FeatureTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_table(std::io::BufReader::new(f))
}

pub fn write_feature_table<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Parse {
        row: 0,
        message: e.to_string(),
    };
    let mut header = vec!["label".to_string()];
    header.extend(table.feature_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (r, &l) in table.rows.iter().zip(&table.labels) {
        let mut rec = vec![table.classes[l].clone()];
        rec.extend(r.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })
}

/// Kruskal-Wallis H with tie correction and its chi-squared p-value.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<(f64, f64)> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidArgument("need at least two non-empty groups".into()));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let ranks = average_ranks(&pooled);
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_sum += t * t * t - t;
        i += j;
    }
    let correction = 1.0 - tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Ok((0.0, 1.0));
    }
    let mut offset = 0;
    let mut s = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        s += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = ((12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction).max(0.0);
    let chi = ChiSquared::new((groups.len() - 1) as f64).expect("positive degrees of freedom");
    Ok((h, chi.sf(h)))
}

/// Per-feature Kruskal-Wallis p-values across classes.
pub fn screen_pvalues(table: &FeatureTable) -> Vec<f64> {
    let k = table.n_classes();
    (0..table.n_features())
        .into_par_iter()
        .map(|j| {
            let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
            for (r, &l) in table.rows.iter().zip(&table.labels) {
                groups[l].push(r[j]);
            }
            let refs: Vec<&[f64]> = groups.iter().filter(|g| !g.is_empty()).map(Vec::as_slice).collect();
            kruskal_wallis(&refs).map_or(1.0, |(_, p)| p)
        })
        .collect()
}

/// Indices of features with Kruskal-Wallis p below `alpha_level`.
pub fn select_features(table: &FeatureTable, alpha_level: f64) -> Result<Vec<usize>> {
    if !(alpha_level > 0.0 && alpha_level <= 1.0) {
        return Err(Error::InvalidArgument(format!("significance level {alpha_level} outside (0, 1]")));
    }
    Ok(screen_pvalues(table)
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p < alpha_level || alpha_level >= 1.0)
        .map(|(j, _)| j)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub classes: Vec<String>,
    pub feature_ids: Vec<String>,
    /// Classes x features, on the original feature scale.
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub converged: bool,
    pub updates: usize,
}

impl ElasticNetModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.intercept)
            .map(|(b, b0)| b0 + b.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }

    pub fn nonzero_features(&self) -> Vec<usize> {
        (0..self.feature_ids.len())
            .filter(|&j| self.coef.iter().any(|b| b[j] != 0.0))
            .collect()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn log_softmax_at(s: &[f64], y: usize) -> f64 {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
    s[y] - m - z.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnetOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    /// Coordinate updates allowed per lambda.
    pub max_updates: usize,
}

impl Default for EnetOptions {
    fn default() -> Self {
        EnetOptions {
            tol: 1e-7,
            max_updates: 100_000,
        }
    }
}

/// Standardised design, stored column-major.
struct Design {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Design {
    fn new(table: &FeatureTable) -> Self {
        let n = table.n_obs() as f64;
        let mut cols = Vec::with_capacity(table.n_features());
        let mut means = Vec::with_capacity(table.n_features());
        let mut scales = Vec::with_capacity(table.n_features());
        for j in 0..table.n_features() {
            let c = table.column(j);
            let m = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            let s = if sd > 0.0 { sd } else { 0.0 };
            cols.push(c.iter().map(|v| if s > 0.0 { (v - m) / s } else { 0.0 }).collect());
            means.push(m);
            scales.push(s);
        }
        Design {
            cols,
            means,
            scales,
            labels: table.labels.clone(),
            n_classes: table.n_classes(),
        }
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    fn class_freq(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_classes];
        self.labels.iter().for_each(|&l| f[l] += 1.0);
        f.iter().map(|c| c / self.n() as f64).collect()
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        let pi = self.class_freq();
        let n = self.n() as f64;
        let mut g: f64 = 0.0;
        for col in &self.cols {
            for (k, &p) in pi.iter().enumerate() {
                let s: f64 = col
                    .iter()
                    .zip(&self.labels)
                    .map(|(x, &l)| x * (if l == k { 1.0 } else { 0.0 } - p))
                    .sum();
                g = g.max((s / n).abs());
            }
        }
        g / alpha.max(MIN_ALPHA_FOR_PATH)
    }
}

/// State of a fit on the standardised scale.
#[derive(Clone)]
struct Coefs {
    beta: Vec<Vec<f64>>,
    b0: Vec<f64>,
    /// Linear predictor, observation-major.
    eta: Vec<Vec<f64>>,
}

impl Coefs {
    fn null(d: &Design) -> Self {
        let pi = d.class_freq();
        let b0: Vec<f64> = pi.iter().map(|&p| if p > 0.0 { p.ln() } else { -30.0 }).collect();
        Coefs {
            beta: vec![vec![0.0; d.cols.len()]; d.n_classes],
            eta: vec![b0.clone(); d.n()],
            b0,
        }
    }
}

fn objective(d: &Design, c: &Coefs, alpha: f64, lambda: f64) -> f64 {
    let nll = -c
        .eta
        .iter()
        .zip(&d.labels)
        .map(|(s, &y)| log_softmax_at(s, y))
        .sum::<f64>()
        / d.n() as f64;
    let pen: f64 = c
        .beta
        .iter()
        .flatten()
        .map(|b| 0.5 * (1.0 - alpha) * b * b + alpha * b.abs())
        .sum();
    nll + lambda * pen
}

fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Runs sweeps over all class blocks until the largest change is below tol.
/// Returns `(converged, updates)`; `trace` receives the objective after
/// each class block when given.
fn solve(
    d: &Design,
    c: &mut Coefs,
    alpha: f64,
    lambda: f64,
    opts: &EnetOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> (bool, usize) {
    let n = d.n();
    let nf = n as f64;
    let w = MAJORIZER;
    let l1 = lambda * alpha;
    let denom = w + lambda * (1.0 - alpha);
    let mut updates = 0;
    let mut r = vec![0.0; n];
    loop {
        let mut max_change: f64 = 0.0;
        for k in 0..d.n_classes {
            // working residual of the majorised block problem
            for i in 0..n {
                let p = softmax(&c.eta[i])[k];
                let y = if d.labels[i] == k { 1.0 } else { 0.0 };
                r[i] = (y - p) / w;
            }
            let mut block_change: f64 = 1.0;
            while block_change > opts.tol && updates < opts.max_updates {
                block_change = 0.0;
                let delta0 = r.iter().sum::<f64>() / nf;
                if delta0 != 0.0 {
                    c.b0[k] += delta0;
                    r.iter_mut().for_each(|v| *v -= delta0);
                    c.eta.iter_mut().for_each(|e| e[k] += delta0);
                    block_change = block_change.max(delta0.abs());
                }
                for (j, col) in d.cols.iter().enumerate() {
                    if d.scales[j] == 0.0 {
                        continue;
                    }
                    let old = c.beta[k][j];
                    let z = w * (col.iter().zip(&r).map(|(x, v)| x * v).sum::<f64>() / nf + old);
                    let new = soft(z, l1) / denom;
                    updates += 1;
                    let delta = new - old;
                    if delta != 0.0 {
                        c.beta[k][j] = new;
                        for i in 0..n {
                            r[i] -= col[i] * delta;
                            c.eta[i][k] += col[i] * delta;
                        }
                        block_change = block_change.max(delta.abs());
                    }
                }
                max_change = max_change.max(block_change);
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective(d, c, alpha, lambda));
            }
        }
        if updates >= opts.max_updates {
            return (false, updates);
        }
        if max_change <= opts.tol {
            return (true, updates);
        }
    }
}

fn to_model(table: &FeatureTable, d: &Design, c: &Coefs, alpha: f64, lambda: f64, converged: bool, updates: usize) -> ElasticNetModel {
    let mut coef = vec![vec![0.0; d.cols.len()]; d.n_classes];
    let mut intercept = c.b0.clone();
    for k in 0..d.n_classes {
        for j in 0..d.cols.len() {
            if d.scales[j] > 0.0 {
                coef[k][j] = c.beta[k][j] / d.scales[j];
                intercept[k] -= coef[k][j] * d.means[j];
            }
        }
    }
    ElasticNetModel {
        classes: table.classes.clone(),
        feature_ids: table.feature_ids.clone(),
        coef,
        intercept,
        alpha,
        lambda,
        means: d.means.clone(),
        scales: d.scales.clone(),
        converged,
        updates,
    }
}

/// Log-spaced path from the data-derived `λ_max` down to `ratio · λ_max`.
pub fn lambda_path(table: &FeatureTable, alpha: f64, len: usize, ratio: f64) -> Vec<f64> {
    let top = Design::new(table).lambda_max(alpha);
    if len == 1 {
        return vec![top];
    }
    (0..len)
        .map(|l| top * ratio.powf(l as f64 / (len - 1) as f64))
        .collect()
}

fn check_path(alpha: f64, lambdas: &[f64]) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("lambda path must be non-empty and positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("lambda path must be descending".into()));
    }
    Ok(())
}

/// Fits along a descending lambda path with warm starts.
pub fn fit_elasticnet_multinomial(table: &FeatureTable, alpha: f64, lambdas: &[f64]) -> Result<Vec<ElasticNetModel>> {
    fit_elasticnet_with(table, alpha, lambdas, &EnetOptions::default())
}

pub fn fit_elasticnet_with(table: &FeatureTable, alpha: f64, lambdas: &[f64], opts: &EnetOptions) -> Result<Vec<ElasticNetModel>> {
    check_path(alpha, lambdas)?;
    let d = Design::new(table);
    let mut c = Coefs::null(&d);
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let (conv, up) = solve(&d, &mut c, alpha, lambda, opts, None);
            to_model(table, &d, &c, alpha, lambda, conv, up)
        })
        .collect())
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; labels.len()];
    let mut next = 0;
    for k in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == k).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            return Err(Error::Stratification(format!(
                "class {k} has {} observations, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            assign[i] = next % folds;
            next += 1;
        }
    }
    Ok(assign)
}

/// Stratified folds over distinct observations: exact duplicates share a
/// fold so no copy of a held-out row is ever trained on.
fn grouped_folds(table: &FeatureTable, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut first: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut group = Vec::with_capacity(table.n_obs());
    let mut distinct_labels = Vec::new();
    for (row, &label) in table.rows.iter().zip(&table.labels) {
        let key = (label, row.iter().map(|v| v.to_bits()).collect());
        let next = distinct_labels.len();
        let g = *first.entry(key).or_insert(next);
        if g == next {
            distinct_labels.push(label);
        }
        group.push(g);
    }
    let distinct = stratified_folds(&distinct_labels, table.n_classes(), folds, seed)?;
    Ok(group.into_iter().map(|g| distinct[g]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_star: f64,
    pub lambdas: Vec<f64>,
    /// Mean held-out deviance per observation, per lambda.
    pub cv_deviance: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
    pub standardized: bool,
}

/// Chooses lambda by minimum mean held-out multinomial deviance.
pub fn cross_validate(table: &FeatureTable, alpha: f64, folds: usize, seed: u64) -> Result<CvResult> {
    let lambdas = lambda_path(table, alpha, PATH_LENGTH, PATH_RATIO);
    cross_validate_path(table, alpha, &lambdas, folds, seed, &EnetOptions::default())
}

pub fn cross_validate_path(
    table: &FeatureTable,
    alpha: f64,
    lambdas: &[f64],
    folds: usize,
    seed: u64,
    opts: &EnetOptions,
) -> Result<CvResult> {
    check_path(alpha, lambdas)?;
    let assign = grouped_folds(table, folds, seed)?;
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] != f).collect();
            let test: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] == f).collect();
            let models = fit_elasticnet_with(&table.subset_rows(&train), alpha, lambdas, opts)?;
            Ok(models
                .iter()
                .map(|m| {
                    -2.0 * test
                        .iter()
                        .map(|&i| log_softmax_at(&m.scores(&table.rows[i]), table.labels[i]))
                        .sum::<f64>()
                        / test.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let cv_deviance: Vec<f64> = (0..lambdas.len())
        .map(|l| per_fold.iter().map(|d| d[l]).sum::<f64>() / folds as f64)
        .collect();
    let mut best = 0;
    for (l, &v) in cv_deviance.iter().enumerate() {
        if v < cv_deviance[best] {
            best = l;
        }
    }
    Ok(CvResult {
        lambda_star: lambdas[best],
        lambdas: lambdas.to_vec(),
        cv_deviance,
        folds,
        seed,
        stratified: true,
        standardized: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    /// Rows are actual classes, columns predicted.
    pub matrix: Vec<Vec<usize>>,
    pub overall_accuracy: f64,
    /// `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
}

pub fn predict_confusion(model: &ElasticNetModel, test: &FeatureTable) -> Result<Confusion> {
    if model.feature_ids != test.feature_ids {
        return Err(Error::Schema("test features do not match the model".into()));
    }
    let map: Vec<usize> = test
        .classes
        .iter()
        .map(|c| {
            model
                .classes
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| Error::Schema(format!("test class {c:?} unknown to the model")))
        })
        .collect::<Result<_>>()?;
    let k = model.classes.len();
    let mut matrix = vec![vec![0usize; k]; k];
    for (r, &l) in test.rows.iter().zip(&test.labels) {
        matrix[map[l]][model.predict(r)] += 1;
    }
    let total: usize = matrix.iter().flatten().sum();
    let trace: usize = (0..k).map(|i| matrix[i][i]).sum();
    let per_class_accuracy = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let s: usize = row.iter().sum();
            (s > 0).then(|| row[i] as f64 / s as f64)
        })
        .collect();
    Ok(Confusion {
        classes: model.classes.clone(),
        matrix,
        overall_accuracy: if total > 0 { trace as f64 / total as f64 } else { 0.0 },
        per_class_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub lambda_star: f64,
    pub selected_features: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<String>,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub screen_level: f64,
    pub standardized: bool,
    pub stratified: bool,
    pub converged: bool,
}

/// Screening, cross-validated fit on the training table, test confusion.
pub fn decode_pipeline(
    train: &FeatureTable,
    test: &FeatureTable,
    alpha: f64,
    folds: usize,
    screen_level: f64,
    seed: u64,
) -> Result<DecodeReport> {
    if train.feature_ids != test.feature_ids {
        return Err(Error::Schema("train and test features differ".into()));
    }
    let selected = select_features(train, screen_level)?;
    if selected.is_empty() {
        return Err(Error::Degenerate(format!("no feature passes screening at level {screen_level}")));
    }
    let tr = train.select_features(&selected);
    let te = test.select_features(&selected);
    let cv = cross_validate(&tr, alpha, folds, seed)?;
    let upto: Vec<f64> = cv.lambdas.iter().copied().filter(|&l| l >= cv.lambda_star).collect();
    let model = fit_elasticnet_multinomial(&tr, alpha, &upto)?.pop().expect("non-empty path");
    let conf = predict_confusion(&model, &te)?;
    Ok(DecodeReport {
        lambda_star: cv.lambda_star,
        selected_features: tr.feature_ids.clone(),
        confusion: conf.matrix,
        classes: conf.classes,
        overall_accuracy: conf.overall_accuracy,
        per_class_accuracy: conf.per_class_accuracy,
        alpha,
        folds,
        seed,
        screen_level,
        standardized: cv.standardized,
        stratified: cv.stratified,
        converged: model.converged,
    })
}
