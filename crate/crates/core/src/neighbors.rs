//! Neighbour search and agglomerative clustering in factor space.
//!
//! Distances are Euclidean over all retained factors, which by the isometry
//! of principal coordinates equal chi-square distances between profiles.
//! Clustering grows nearest-neighbour chains and merges reciprocal pairs;
//! both offered linkages are reducible, so the merge sequence reproduces
//! the greedy agglomeration and heights come out monotone.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::ca::CaModel;
use crate::{Error, Result};

/// Labeled points sharing one dimensionality, the working input for all
/// neighbour and cluster operations.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    labels: Vec<String>,
    coords: Vec<Vec<f64>>,
    dim: usize,
}

impl LabeledPoints {
    pub fn new(labels: Vec<String>, coords: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != coords.len() {
            return Err(Error::LengthMismatch {
                what: "coordinate rows",
                actual: coords.len(),
                expected: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput("no labeled points".into()));
        }
        let dim = coords[0].len();
        for point in &coords {
            if point.len() != dim {
                return Err(Error::LengthMismatch {
                    what: "point dimensions",
                    actual: point.len(),
                    expected: dim,
                });
            }
        }
        let mut seen = HashMap::new();
        for (i, label) in labels.iter().enumerate() {
            if seen.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateId(label.clone()));
            }
        }
        Ok(LabeledPoints { labels, coords, dim })
    }

    /// Row points of a fitted model, over all retained factors.
    pub fn from_model_rows(model: &CaModel) -> Result<Self> {
        Self::new(model.row_labels.clone(), model.row_coords.clone())
    }

    /// Column points of a fitted model, over all retained factors.
    pub fn from_model_cols(model: &CaModel) -> Result<Self> {
        Self::new(model.col_labels.clone(), model.col_coords.clone())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.coords[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    fn sqdist(&self, a: usize, b: usize) -> f64 {
        self.coords[a]
            .iter()
            .zip(&self.coords[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// Squared Euclidean distance between two labeled points over all factors.
pub fn full_space_sqdist(points: &LabeledPoints, label_a: &str, label_b: &str) -> Result<f64> {
    let a = points.index_of(label_a)?;
    let b = points.index_of(label_b)?;
    Ok(points.sqdist(a, b))
}

/// Nearest matches of one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    pub query_label: String,
    /// `(label, squared distance)`, distance non-decreasing, query excluded.
    pub matches: Vec<(String, f64)>,
    /// Number of matches actually returned; smaller than requested when the
    /// set has too few other points.
    pub k: usize,
}

/// The `k` nearest other points by squared full-space distance, ties broken
/// by label order. Asking for more neighbours than exist truncates.
pub fn nearest(points: &LabeledPoints, label: &str, k: usize) -> Result<NeighborResult> {
    if k == 0 {
        return Err(Error::Bounds { what: "k", value: 0, min: 1, max: usize::MAX });
    }
    let query = points.index_of(label)?;
    let mut others: Vec<(usize, f64)> = (0..points.len())
        .filter(|&i| i != query)
        .map(|i| (i, points.sqdist(query, i)))
        .collect();
    others.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("distances are finite")
            .then_with(|| points.labels[a.0].cmp(&points.labels[b.0]))
    });
    others.truncate(k);
    Ok(NeighborResult {
        query_label: label.to_string(),
        matches: others
            .into_iter()
            .map(|(i, d)| (points.labels[i].clone(), d))
            .collect(),
        k: points.len().saturating_sub(1).min(k),
    })
}

/// Index of each point's single nearest neighbour, ties broken by label.
fn all_nearest(points: &LabeledPoints) -> Vec<usize> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for j in 0..points.len() {
                if j == i {
                    continue;
                }
                let d = points.sqdist(i, j);
                let better = d < best_d
                    || (d == best_d
                        && best != usize::MAX
                        && points.labels[j] < points.labels[best]);
                if better {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// All unordered pairs that are mutual nearest neighbours, in order of
/// their first point. Any set of two or more points has at least one such
/// pair (the closest pair overall is always mutual).
pub fn reciprocal_pairs(points: &LabeledPoints) -> Result<Vec<(String, String)>> {
    if points.len() < 2 {
        return Err(Error::Bounds {
            what: "points",
            value: points.len(),
            min: 2,
            max: usize::MAX,
        });
    }
    let nn = all_nearest(points);
    let mut pairs = Vec::new();
    for (i, &j) in nn.iter().enumerate() {
        if j > i && nn[j] == i {
            pairs.push((points.labels[i].clone(), points.labels[j].clone()));
        }
    }
    Ok(pairs)
}

/// Cluster-merge criterion. Both satisfy the reducibility property, so
/// chain-discovered reciprocal pairs can be merged as soon as they appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Linkage {
    /// Minimum-variance criterion on squared Euclidean distances; reported
    /// heights are square roots of the merge dissimilarity.
    Ward,
    /// Unweighted average of pairwise Euclidean distances.
    Average,
}

/// One agglomeration step. Leaves are clusters `0..n`; step `s` creates
/// cluster `n + s` from `a` and `b` (both smaller than `n + s`).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    /// Leaf count of the merged cluster.
    pub size: usize,
}

/// A full agglomeration: `n - 1` merges over `n` leaves, sorted by height.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Leaf indices under each merged cluster, in merge order.
    pub fn merged_leaf_sets(&self) -> Vec<std::collections::BTreeSet<usize>> {
        let n = self.labels.len();
        let mut sets: Vec<std::collections::BTreeSet<usize>> =
            (0..n).map(|i| [i].into()).collect();
        let mut out = Vec::with_capacity(self.merges.len());
        for merge in &self.merges {
            let mut set = sets[merge.a].clone();
            set.extend(sets[merge.b].iter().copied());
            sets.push(set.clone());
            out.push(set);
        }
        out
    }
}

fn initial_dissimilarity(points: &LabeledPoints, linkage: Linkage, a: usize, b: usize) -> f64 {
    let d2 = points.sqdist(a, b);
    match linkage {
        Linkage::Ward => d2,
        Linkage::Average => d2.sqrt(),
    }
}

fn merge_height(linkage: Linkage, dissimilarity: f64) -> f64 {
    match linkage {
        Linkage::Ward => dissimilarity.max(0.0).sqrt(),
        Linkage::Average => dissimilarity,
    }
}

fn lance_williams(
    linkage: Linkage,
    d_ac: f64,
    d_bc: f64,
    d_ab: f64,
    size_a: f64,
    size_b: f64,
    size_c: f64,
) -> f64 {
    match linkage {
        Linkage::Ward => {
            ((size_a + size_c) * d_ac + (size_b + size_c) * d_bc - size_c * d_ab)
                / (size_a + size_b + size_c)
        }
        Linkage::Average => (size_a * d_ac + size_b * d_bc) / (size_a + size_b),
    }
}

/// Agglomerate by growing a nearest-neighbour chain and merging each
/// reciprocal pair the chain uncovers. Equivalent to greedy agglomeration
/// for these linkages, but quadratic rather than cubic.
pub fn nn_chain_cluster(points: &LabeledPoints, linkage: Linkage) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Bounds { what: "points", value: n, min: 2, max: usize::MAX });
    }

    // Dense dissimilarities in slot space; merged clusters reuse a slot.
    let mut diss = vec![vec![0.0f64; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let d = initial_dissimilarity(points, linkage, a, b);
            diss[a][b] = d;
            diss[b][a] = d;
        }
    }
    let mut alive = vec![true; n];
    let mut sizes = vec![1usize; n];
    // Smallest leaf under each slot, to identify clusters across renumbering.
    let mut reps: Vec<usize> = (0..n).collect();

    struct RawMerge {
        rep_a: usize,
        rep_b: usize,
        height: f64,
        size: usize,
    }
    let mut raw: Vec<RawMerge> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();

    while raw.len() < n - 1 {
        if chain.is_empty() {
            let seed = alive.iter().position(|&a| a).expect("clusters remain");
            chain.push(seed);
        }
        let top = *chain.last().expect("chain non-empty");
        // Nearest alive cluster to the chain head, smallest slot on ties.
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for cand in 0..n {
            if cand == top || !alive[cand] {
                continue;
            }
            if diss[top][cand] < next_d {
                next_d = diss[top][cand];
                next = cand;
            }
        }
        if chain.len() >= 2 && chain[chain.len() - 2] == next {
            // Reciprocal pair: merge into the slot of `top`.
            chain.pop();
            chain.pop();
            let merged_size = sizes[top] + sizes[next];
            raw.push(RawMerge {
                rep_a: reps[top],
                rep_b: reps[next],
                height: merge_height(linkage, next_d),
                size: merged_size,
            });
            for c in 0..n {
                if !alive[c] || c == top || c == next {
                    continue;
                }
                let updated = lance_williams(
                    linkage,
                    diss[top][c],
                    diss[next][c],
                    diss[top][next],
                    sizes[top] as f64,
                    sizes[next] as f64,
                    sizes[c] as f64,
                );
                diss[top][c] = updated;
                diss[c][top] = updated;
            }
            alive[next] = false;
            sizes[top] = merged_size;
            reps[top] = reps[top].min(reps[next]);
        } else {
            chain.push(next);
        }
    }

    // Chains discover merges out of height order; sort, then renumber
    // clusters in sorted order via a union-find over leaves.
    raw.sort_by(|x, y| x.height.partial_cmp(&y.height).expect("finite heights"));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut cluster_of_root: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n - 1);
    for (step, m) in raw.into_iter().enumerate() {
        let root_a = find(&mut parent, m.rep_a);
        let root_b = find(&mut parent, m.rep_b);
        let id_a = cluster_of_root[root_a];
        let id_b = cluster_of_root[root_b];
        parent[root_b] = root_a;
        cluster_of_root[root_a] = n + step;
        merges.push(Merge {
            a: id_a.min(id_b),
            b: id_a.max(id_b),
            height: m.height,
            size: m.size,
        });
    }
    Ok(Dendrogram { labels: points.labels().to_vec(), merges })
}

/// One labeled link in a factor plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLink {
    pub label_a: String,
    pub label_b: String,
    /// Planar Euclidean distance, or None when either label is missing.
    pub distance: Option<f64>,
}

/// Distances between designated pairs in one factor plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLinkReport {
    /// Zero-based factor axes spanning the plane.
    pub plane: (usize, usize),
    pub links: Vec<PairLink>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

/// Planar distance per pair, with missing labels reported per entry rather
/// than failing the whole report.
pub fn pair_links(
    points: &LabeledPoints,
    pairs: &[(String, String)],
    plane: (usize, usize),
) -> Result<PairLinkReport> {
    let (fa, fb) = plane;
    if fa >= points.dim() || fb >= points.dim() || fa == fb {
        return Err(Error::Bounds {
            what: "plane axis",
            value: fa.max(fb),
            min: 0,
            max: points.dim().saturating_sub(1),
        });
    }
    let mut links = Vec::with_capacity(pairs.len());
    let mut resolved = Vec::new();
    for (label_a, label_b) in pairs {
        let distance = match (points.index_of(label_a), points.index_of(label_b)) {
            (Ok(a), Ok(b)) => {
                let dx = points.coords[a][fa] - points.coords[b][fa];
                let dy = points.coords[a][fb] - points.coords[b][fb];
                let d = (dx * dx + dy * dy).sqrt();
                resolved.push(d);
                Some(d)
            }
            _ => None,
        };
        links.push(PairLink {
            label_a: label_a.clone(),
            label_b: label_b.clone(),
            distance,
        });
    }
    let mean = if resolved.is_empty() {
        None
    } else {
        Some(resolved.iter().sum::<f64>() / resolved.len() as f64)
    };
    let max = resolved.iter().copied().reduce(f64::max);
    Ok(PairLinkReport { plane, links, mean, max })
}
