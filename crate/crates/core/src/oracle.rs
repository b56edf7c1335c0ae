//! Independent validators.
//!
//! Nearest-neighbour mutual information estimators give a second opinion on
//! the ordering produced by the dimension-based measure, and a dense
//! brute-force homology computation cross-checks the persistence code on
//! small graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::PointCloud;
use crate::error::{Error, Result};
use crate::topology::{Barcode, Interval, RankFiltration};

pub const BRUTE_FORCE_MAX_NODES: usize = 8;
const JITTER_SCALE: f64 = 1e-10;

/// Digamma function. Uses upward recurrence to reach `x >= 10`, then the
/// asymptotic expansion.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0
                - x2 * (1.0 / 252.0
                    - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0 - x2 * (691.0 / 32760.0 - x2 / 12.0))))));
    acc + x.ln() - 0.5 / x - series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Nats.
    pub value: f64,
    pub k: usize,
    pub n: usize,
    /// Coordinates were perturbed because of coincident points.
    pub jittered: bool,
    /// Estimate sits at its ceiling `ψ(N) - ψ(k)`, as for identical variables.
    pub saturated: bool,
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Per-point distance to the k-th nearest neighbour in the max norm.
fn knn_radii(cloud: &PointCloud, k: usize) -> Vec<f64> {
    let n = cloud.count();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| max_dist(p, cloud.point(j))).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Number of other points strictly closer than `radius[i]`, per point.
fn strict_counts(cloud: &PointCloud, radius: &[f64]) -> Vec<usize> {
    let n = cloud.count();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            (0..n).filter(|&j| j != i && max_dist(p, cloud.point(j)) < radius[i]).count()
        })
        .collect()
}

fn mean_digamma_plus_one(counts: &[usize]) -> f64 {
    counts.iter().map(|&c| digamma(c as f64 + 1.0)).sum::<f64>() / counts.len() as f64
}

fn jitter(cloud: &PointCloud, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let d = cloud.ambient_dim();
    let scales: Vec<f64> = (0..d)
        .map(|q| {
            let c = cloud.column(q);
            let m = c.iter().sum::<f64>() / c.len() as f64;
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    let data = cloud
        .as_flat()
        .iter()
        .enumerate()
        .map(|(i, v)| v + JITTER_SCALE * scales[i % d] * rng.random_range(-0.5..0.5))
        .collect();
    PointCloud::from_flat(data, d)
}

fn check_inputs(clouds: &[&PointCloud], k: usize) -> Result<usize> {
    let n = clouds[0].count();
    if clouds.iter().any(|c| c.count() != n) {
        return Err(Error::Shape("point sets have different sizes".into()));
    }
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!("need 1 <= k < N, got k = {k}, N = {n}")));
    }
    Ok(n)
}

/// Joint cloud plus the split column ranges, with jitter applied when any
/// k-NN radius is zero.
fn prepared(parts: &[&PointCloud], k: usize, seed: u64) -> Result<(Vec<PointCloud>, Vec<f64>, bool)> {
    let mut joint = parts[0].clone();
    for p in &parts[1..] {
        joint = joint.hstack(p)?;
    }
    let mut radii = knn_radii(&joint, k);
    let mut jittered = false;
    if radii.contains(&0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        joint = jitter(&joint, &mut rng)?;
        radii = knn_radii(&joint, k);
        jittered = true;
        if radii.contains(&0.0) {
            return Err(Error::Degenerate("zero neighbour distance after jitter".into()));
        }
    }
    let mut out = Vec::with_capacity(parts.len());
    let mut offset = 0;
    for p in parts {
        let cols: Vec<usize> = (offset..offset + p.ambient_dim()).collect();
        out.push(joint.select_columns(&cols)?);
        offset += p.ambient_dim();
    }
    Ok((out, radii, jittered))
}

pub fn ksg_mutual_information(x: &PointCloud, y: &PointCloud, k: usize) -> Result<MiEstimate> {
    ksg_mutual_information_seeded(x, y, k, 0)
}

/// Kraskov estimator (first variant) in the max norm. `seed` only drives the
/// jitter used when coincident points make a neighbour distance vanish.
pub fn ksg_mutual_information_seeded(x: &PointCloud, y: &PointCloud, k: usize, seed: u64) -> Result<MiEstimate> {
    let n = check_inputs(&[x, y], k)?;
    let (parts, radii, jittered) = prepared(&[x, y], k, seed)?;
    let nx = strict_counts(&parts[0], &radii);
    let ny = strict_counts(&parts[1], &radii);
    let ceiling = digamma(n as f64) - digamma(k as f64);
    let value = digamma(k as f64) + digamma(n as f64) - mean_digamma_plus_one(&nx) - mean_digamma_plus_one(&ny);
    Ok(MiEstimate {
        value,
        k,
        n,
        jittered,
        saturated: value >= ceiling - 1e-9,
    })
}

/// Projected mutual informations `(I_p(X;Y), I_p(X;Z))`, both using the
/// k-NN radius of each point in the joint `(X, Y, Z)` space.
pub fn projected_mi(x: &PointCloud, y: &PointCloud, z: &PointCloud, k: usize) -> Result<(MiEstimate, MiEstimate)> {
    let n = check_inputs(&[x, y, z], k)?;
    let (parts, radii, jittered) = prepared(&[x, y, z], k, 0)?;
    let (px, py, pz) = (&parts[0], &parts[1], &parts[2]);
    let psi_x = mean_digamma_plus_one(&strict_counts(px, &radii));
    let psi_y = mean_digamma_plus_one(&strict_counts(py, &radii));
    let psi_z = mean_digamma_plus_one(&strict_counts(pz, &radii));
    let psi_xy = mean_digamma_plus_one(&strict_counts(&px.hstack(py)?, &radii));
    let psi_xz = mean_digamma_plus_one(&strict_counts(&px.hstack(pz)?, &radii));
    let psi_n = digamma(n as f64);
    let est = |value| MiEstimate {
        value,
        k,
        n,
        jittered,
        saturated: false,
    };
    Ok((est(psi_n - psi_x - psi_y + psi_xy), est(psi_n - psi_x - psi_z + psi_xz)))
}

/// GF(2) vectors over at most 128 simplices of one dimension.
type Bits = u128;

fn rank_of(vectors: impl IntoIterator<Item = Bits>) -> usize {
    let mut basis = [0 as Bits; 128];
    let mut rank = 0;
    for mut v in vectors {
        while v != 0 {
            let top = 127 - v.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = v;
                rank += 1;
                break;
            }
            v ^= basis[top];
        }
    }
    rank
}

/// Basis of the kernel of the boundary map restricted to `active` simplices.
fn cycle_basis(boundaries: &[Bits], active: &[usize]) -> Vec<Bits> {
    let mut basis: Vec<(Bits, Bits)> = Vec::new();
    let mut cycles = Vec::new();
    for &s in active {
        let (mut b, mut c) = (boundaries[s], (1 as Bits) << s);
        loop {
            if b == 0 {
                cycles.push(c);
                break;
            }
            let top = 127 - b.leading_zeros();
            match basis.iter().find(|(bb, _)| 127 - bb.leading_zeros() == top) {
                Some(&(bb, cc)) => {
                    b ^= bb;
                    c ^= cc;
                }
                None => {
                    basis.push((b, c));
                    break;
                }
            }
        }
    }
    cycles
}

/// Barcode from dense rank computations at every threshold index.
///
/// Persistent Betti numbers `β^{i,j} = dim(Z_i + B_j) - dim B_j` are computed
/// for all `i <= j` and the interval multiplicities recovered by
/// inclusion-exclusion, so no reduction order is shared with
/// [`crate::topology::persistent_homology`].
pub fn brute_force_betti(filt: &RankFiltration, max_hom_dim: usize) -> Result<Barcode> {
    let n = filt.n_nodes;
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::Size(format!("{n} nodes exceed the brute-force limit of {BRUTE_FORCE_MAX_NODES}")));
    }
    let n_idx = filt.n_edges();
    // appearance index of each edge, usize::MAX when absent
    let mut appear = vec![vec![usize::MAX; n]; n];
    for (r, e) in filt.edges.iter().enumerate() {
        appear[e.u][e.v] = r + 1;
        appear[e.v][e.u] = r + 1;
    }
    // every vertex subset of the final graph that is a clique, by dimension
    let top = max_hom_dim + 1;
    let mut by_dim: Vec<Vec<(u32, usize)>> = vec![Vec::new(); top + 1];
    for mask in 1u32..(1u32 << n) {
        let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let q = verts.len() - 1;
        if q > top {
            continue;
        }
        let mut value = 0;
        let mut clique = true;
        'pairs: for (a, &u) in verts.iter().enumerate() {
            for &v in &verts[a + 1..] {
                if appear[u][v] == usize::MAX {
                    clique = false;
                    break 'pairs;
                }
                value = value.max(appear[u][v]);
            }
        }
        if clique {
            by_dim[q].push((mask, value));
        }
    }
    // boundary vectors: simplex of dim q -> bits over dim q-1 simplices
    let boundaries: Vec<Vec<Bits>> = (0..=top)
        .map(|q| {
            by_dim[q]
                .iter()
                .map(|&(mask, _)| {
                    if q == 0 {
                        return 0;
                    }
                    by_dim[q - 1]
                        .iter()
                        .enumerate()
                        .filter(|&(_, &(f, _))| f & mask == f)
                        .fold(0, |acc, (i, _)| acc | (1 as Bits) << i)
                })
                .collect()
        })
        .collect();

    let mut intervals = Vec::new();
    for q in 0..=max_hom_dim {
        let active_at = |dim: usize, i: usize| -> Vec<usize> {
            by_dim[dim].iter().enumerate().filter(|(_, s)| s.1 <= i).map(|(k, _)| k).collect()
        };
        let z: Vec<Vec<Bits>> = (0..=n_idx).map(|i| cycle_basis(&boundaries[q], &active_at(q, i))).collect();
        let b: Vec<Vec<Bits>> = (0..=n_idx)
            .map(|j| active_at(q + 1, j).into_iter().map(|s| boundaries[q + 1][s]).collect())
            .collect();
        let b_rank: Vec<usize> = b.iter().map(|v| rank_of(v.iter().copied())).collect();
        // pb[i][j] for i <= j
        let pb: Vec<Vec<i64>> = (0..=n_idx)
            .map(|i| {
                (0..=n_idx)
                    .map(|j| {
                        if j < i {
                            0
                        } else {
                            (rank_of(z[i].iter().chain(&b[j]).copied()) - b_rank[j]) as i64
                        }
                    })
                    .collect()
            })
            .collect();
        let beta = |i: isize, j: usize| -> i64 { if i < 0 { 0 } else { pb[i as usize][j] } };
        for i in 0..=n_idx {
            let ii = i as isize;
            for j in (i + 1)..=n_idx {
                let mu = beta(ii, j - 1) - beta(ii, j) - beta(ii - 1, j - 1) + beta(ii - 1, j);
                for _ in 0..mu.max(0) {
                    intervals.push(Interval { dim: q, birth: i, death: Some(j) });
                }
            }
            let inf = beta(ii, n_idx) - beta(ii - 1, n_idx);
            for _ in 0..inf.max(0) {
                intervals.push(Interval { dim: q, birth: i, death: None });
            }
        }
    }
    Ok(Barcode::new(max_hom_dim, n_idx, intervals))
}
