//! Clique topology of weighted graphs.
//!
//! Edges enter a rank filtration one at a time. Threshold index `i` counts
//! the edges present, so index 0 is the bare vertex set and the edge of rank
//! `r` appears at index `r + 1`. Intervals are half-open: a class with
//! `birth = b, death = d` is alive at indices `b <= i < d`.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Smallest weights enter first.
    #[default]
    Ascending,
    /// Largest weights enter first.
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFiltration {
    pub n_nodes: usize,
    /// Edge of rank `r` at position `r`, with `u < v`.
    pub edges: Vec<Edge>,
}

impl RankFiltration {
    /// Filtration from edges already in rank order.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = vec![false; n_nodes * n_nodes];
        let mut out = Vec::with_capacity(edges.len());
        for (r, &(a, b)) in edges.iter().enumerate() {
            let (u, v) = (a.min(b), a.max(b));
            if u == v || v >= n_nodes {
                return Err(Error::Shape(format!("invalid edge ({a}, {b}) for {n_nodes} nodes")));
            }
            if std::mem::replace(&mut seen[u * n_nodes + v], true) {
                return Err(Error::Shape(format!("duplicate edge ({u}, {v})")));
            }
            out.push(Edge { u, v, weight: r as f64 });
        }
        Ok(RankFiltration { n_nodes, edges: out })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge list of the graph at threshold index `i`.
    pub fn graph_at(&self, i: usize) -> Vec<(usize, usize)> {
        self.edges[..i.min(self.edges.len())].iter().map(|e| (e.u, e.v)).collect()
    }
}

/// Sorts the upper-triangle edges of a symmetric weight matrix. Non-finite
/// weights mark absent edges. Ties break on `(u, v)`.
pub fn rank_filtration(weights: &[Vec<f64>], order: Order) -> Result<RankFiltration> {
    let n = weights.len();
    if weights.iter().any(|row| row.len() != n) {
        return Err(Error::Shape("weight matrix is not square".into()));
    }
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let (a, b) = (weights[u][v], weights[v][u]);
            let same = a == b || (!a.is_finite() && !b.is_finite());
            if !same {
                return Err(Error::Shape(format!("weights ({u}, {v}) = {a} and ({v}, {u}) = {b} differ")));
            }
            if a.is_finite() {
                edges.push(Edge { u, v, weight: a });
            }
        }
    }
    edges.sort_by(|x, y| {
        let w = match order {
            Order::Ascending => x.weight.total_cmp(&y.weight),
            Order::Descending => y.weight.total_cmp(&x.weight),
        };
        w.then((x.u, x.v).cmp(&(y.u, y.v)))
    });
    Ok(RankFiltration { n_nodes: n, edges })
}

/// Simplices grouped by dimension; each is a sorted vertex list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagComplex {
    pub n_vertices: usize,
    pub simplices: Vec<Vec<Vec<usize>>>,
}

impl FlagComplex {
    pub fn count(&self, dim: usize) -> usize {
        self.simplices.get(dim).map_or(0, Vec::len)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(q, s)| if q % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) })
            .sum()
    }
}

fn neighbor_sets(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut up = vec![Vec::new(); n];
    for &(a, b) in edges {
        up[a.min(b)].push(a.max(b));
    }
    for l in &mut up {
        l.sort_unstable();
        l.dedup();
    }
    up
}

/// All cliques with at most `max_dim + 1` vertices.
pub fn flag_complex(n_vertices: usize, edges: &[(usize, usize)], max_dim: usize) -> FlagComplex {
    let up = neighbor_sets(n_vertices, edges);
    let mut simplices: Vec<Vec<Vec<usize>>> = vec![Vec::new(); max_dim + 1];

    fn extend(
        clique: &mut Vec<usize>,
        cands: &[usize],
        up: &[Vec<usize>],
        max_dim: usize,
        out: &mut [Vec<Vec<usize>>],
    ) {
        out[clique.len() - 1].push(clique.clone());
        if clique.len() > max_dim {
            return;
        }
        for (i, &c) in cands.iter().enumerate() {
            let next: Vec<usize> = cands[i + 1..]
                .iter()
                .copied()
                .filter(|w| up[c].binary_search(w).is_ok())
                .collect();
            clique.push(c);
            extend(clique, &next, up, max_dim, out);
            clique.pop();
        }
    }

    for v in 0..n_vertices {
        extend(&mut vec![v], &up[v], &up, max_dim, &mut simplices);
    }
    for s in &mut simplices {
        s.sort();
    }
    FlagComplex {
        n_vertices,
        simplices,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub dim: usize,
    pub birth: usize,
    /// `None` for classes that never die.
    pub death: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Barcode {
    pub max_dim: usize,
    /// Number of edges in the filtration; valid indices are `0..=n_edges`.
    pub n_edges: usize,
    /// Sorted by `(dim, birth, death)`, finite deaths before infinite ones.
    pub intervals: Vec<Interval>,
}

impl Barcode {
    pub fn new(max_dim: usize, n_edges: usize, mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by_key(|iv| (iv.dim, iv.birth, iv.death.unwrap_or(usize::MAX)));
        Barcode {
            max_dim,
            n_edges,
            intervals,
        }
    }

    pub fn betti_at(&self, dim: usize, i: usize) -> usize {
        self.intervals
            .iter()
            .filter(|iv| iv.dim == dim && iv.birth <= i && iv.death.is_none_or(|d| i < d))
            .count()
    }
}

/// Column reduction over Z/2 with clearing.
pub fn persistent_homology(filt: &RankFiltration, max_hom_dim: usize) -> Barcode {
    let n = filt.n_nodes;
    let mut edge_index = vec![0usize; n * n];
    for (r, e) in filt.edges.iter().enumerate() {
        edge_index[e.u * n + e.v] = r + 1;
        edge_index[e.v * n + e.u] = r + 1;
    }
    let complex = flag_complex(n, &filt.graph_at(filt.n_edges()), max_hom_dim + 1);

    let value = |s: &[usize]| -> usize {
        let mut m = 0;
        for (a, &x) in s.iter().enumerate() {
            for &y in &s[a + 1..] {
                m = m.max(edge_index[x * n + y]);
            }
        }
        m
    };
    let mut order: Vec<(usize, usize, &Vec<usize>)> = complex
        .simplices
        .iter()
        .enumerate()
        .flat_map(|(q, ss)| ss.iter().map(move |s| (q, s)))
        .map(|(q, s)| (value(s), q, s))
        .collect();
    order.sort();
    let index: HashMap<&[usize], usize> =
        order.iter().enumerate().map(|(i, &(_, _, s))| (s.as_slice(), i)).collect();

    let total = order.len();
    let mut pivot_of_row: Vec<Option<usize>> = vec![None; total];
    let mut negative = vec![false; total];
    let mut cleared = vec![false; total];
    let mut reduced: HashMap<usize, Vec<usize>> = HashMap::new();

    for q in (1..=max_hom_dim + 1).rev() {
        for j in 0..total {
            let (_, dim, s) = order[j];
            if dim != q || cleared[j] {
                continue;
            }
            let mut col: Vec<usize> = (0..s.len())
                .map(|skip| {
                    let face: Vec<usize> =
                        s.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &v)| v).collect();
                    index[face.as_slice()]
                })
                .collect();
            col.sort_unstable();
            while let Some(&low) = col.last() {
                match pivot_of_row[low] {
                    Some(k) => col = sym_diff(&col, &reduced[&k]),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                pivot_of_row[low] = Some(j);
                negative[j] = true;
                cleared[low] = true;
                reduced.insert(j, col);
            }
        }
    }

    let mut intervals = Vec::new();
    for i in 0..total {
        let (birth, dim, _) = order[i];
        if dim > max_hom_dim || negative[i] {
            continue;
        }
        match pivot_of_row[i] {
            Some(j) => {
                let death = order[j].0;
                if death > birth {
                    intervals.push(Interval { dim, birth, death: Some(death) });
                }
            }
            None => intervals.push(Interval { dim, birth, death: None }),
        }
    }
    Barcode::new(max_hom_dim, filt.n_edges(), intervals)
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiTrajectory {
    pub dim: usize,
    /// `values[i]` is the Betti number at threshold index `i`.
    pub values: Vec<usize>,
    pub integrated: u64,
}

/// Bar counts at indices `0..=n_ranks`.
pub fn betti_trajectory(bc: &Barcode, dim: usize, n_ranks: usize) -> BettiTrajectory {
    let mut diff = vec![0i64; n_ranks + 2];
    for iv in bc.intervals.iter().filter(|iv| iv.dim == dim) {
        if iv.birth > n_ranks {
            continue;
        }
        diff[iv.birth] += 1;
        if let Some(d) = iv.death {
            diff[d.min(n_ranks + 1)] -= 1;
        }
    }
    let mut acc = 0i64;
    let values: Vec<usize> = diff[..=n_ranks]
        .iter()
        .map(|d| {
            acc += d;
            acc as usize
        })
        .collect();
    let integrated = values.iter().map(|&v| v as u64).sum();
    BettiTrajectory {
        dim,
        values,
        integrated,
    }
}

/// Label-shuffle test of `mean(a) > mean(b)` on integrated Betti numbers.
///
/// The statistic is the difference of group means averaged over `resamples`
/// draws of `subset_size` members per group. The null repeats the same
/// protocol after shuffling group labels, once per resample.
pub fn bootstrap_compare(
    group_a: &[BettiTrajectory],
    group_b: &[BettiTrajectory],
    resamples: usize,
    subset_size: usize,
    seed: u64,
) -> Result<f64> {
    let a: Vec<f64> = group_a.iter().map(|t| t.integrated as f64).collect();
    let b: Vec<f64> = group_b.iter().map(|t| t.integrated as f64).collect();
    bootstrap_compare_values(&a, &b, resamples, subset_size, seed)
}

pub fn bootstrap_compare_values(a: &[f64], b: &[f64], resamples: usize, subset_size: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("both groups must be non-empty".into()));
    }
    if resamples == 0 || subset_size == 0 {
        return Err(Error::InvalidArgument("resamples and subset size must be positive".into()));
    }
    if subset_size > a.len().min(b.len()) {
        return Err(Error::Size(format!(
            "subset size {subset_size} exceeds group sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subset_stat = |xa: &[f64], xb: &[f64], rng: &mut ChaCha8Rng| -> f64 {
        let mut total = 0.0;
        for _ in 0..resamples {
            let ma: f64 = xa.choose_multiple(rng, subset_size).sum::<f64>() / subset_size as f64;
            let mb: f64 = xb.choose_multiple(rng, subset_size).sum::<f64>() / subset_size as f64;
            total += ma - mb;
        }
        total / resamples as f64
    };
    let observed = subset_stat(a, b, &mut rng);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut exceed = 0usize;
    for _ in 0..resamples {
        pooled.shuffle(&mut rng);
        let (sa, sb) = pooled.split_at(a.len());
        if subset_stat(sa, sb, &mut rng) >= observed {
            exceed += 1;
        }
    }
    Ok(exceed as f64 / resamples as f64)
}
