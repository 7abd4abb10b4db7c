//! Kernel clustering algorithms on a Gaussian Gram matrix: kernel k-means
//! (Lloyd and exhaustive), farthest-first kernel k-means, kernel k-center and
//! agglomerative linkage. Distances are MMDs between KDE components, read off
//! the Gram matrix through [`BandwidthSplit`].

use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    point_to_cluster_sq, pointwise_sq_unchecked, pointwise_unchecked, BandwidthSplit, KernelMatrix,
};
use crate::numeric::accurate_sum;
use crate::partition::{for_each_surjective_partition, stirling2, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Kmn,
    Ffk,
    Ctr,
    LnkSingle,
    LnkComplete,
    LnkAverage,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Kmn => "kmn",
            Algorithm::Ffk => "ffk",
            Algorithm::Ctr => "ctr",
            Algorithm::LnkSingle => "lnk-single",
            Algorithm::LnkComplete => "lnk-complete",
            Algorithm::LnkAverage => "lnk-average",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kmn" | "kmeans" => Algorithm::Kmn,
            "ffk" => Algorithm::Ffk,
            "ctr" | "kcenter" => Algorithm::Ctr,
            "lnk-single" | "linkage-single" => Algorithm::LnkSingle,
            "lnk-complete" | "linkage-complete" => Algorithm::LnkComplete,
            "lnk-average" | "linkage-average" => Algorithm::LnkAverage,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown algorithm `{other}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub partition: Partition,
    /// Value of the algorithm's own objective on `partition`.
    pub objective: f64,
    pub algorithm: Algorithm,
    pub iterations: usize,
    /// Random seed for randomized runs; the first center for FFK; 0 otherwise.
    pub seed: u64,
}

fn check_k(g: &KernelMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > g.n() {
        return Err(Error::TooManyClusters { k, n: g.n() });
    }
    Ok(())
}

fn check_partition(g: &KernelMatrix, p: &Partition) -> Result<Vec<Vec<usize>>> {
    if p.len() != g.n() {
        return Err(Error::LengthMismatch(p.len(), g.n()));
    }
    p.require_nonempty()?;
    Ok(p.clusters())
}

/// `n - sum_k (1/|c_k|) sum_{i,j in c_k} G[i][j]`: the k-means objective in
/// raw Gram units.
pub fn kmeans_objective_gram(g: &KernelMatrix, p: &Partition) -> Result<f64> {
    let clusters = check_partition(g, p)?;
    let within = accurate_sum(clusters.iter().map(|c| g.block_sum(c, c) / c.len() as f64));
    Ok((g.n() as f64 - within).max(0.0))
}

/// `sum_k sum_{i in c_k} rho^2(psi_i, mean_k)`.
pub fn kmeans_objective(g: &KernelMatrix, p: &Partition, bw: &BandwidthSplit) -> Result<f64> {
    g.check_split(bw)?;
    Ok(bw.embedding_norm_sq() * kmeans_objective_gram(g, p)?)
}

/// `max_i rho(psi_i, mean of the cluster of i)`.
pub fn kcenter_objective(g: &KernelMatrix, p: &Partition, bw: &BandwidthSplit) -> Result<f64> {
    g.check_split(bw)?;
    let clusters = check_partition(g, p)?;
    let mut worst: f64 = 0.0;
    for c in &clusters {
        let self_sum = g.block_sum(c, c);
        for &i in c {
            let sq = point_to_cluster_sq(g.row_sum(i, c), self_sum, c.len(), bw);
            worst = worst.max(sq.max(0.0).sqrt());
        }
    }
    Ok(worst)
}

/// Incrementally maintained Gram sums for a partition: `cross[i][k]` holds
/// `sum_{j in c_k} G[i][j]` and `self_sums[k]` the within-cluster block sum.
struct ClusterSums<'a> {
    g: &'a KernelMatrix,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    cross: Array2<f64>,
    self_sums: Vec<f64>,
}

impl<'a> ClusterSums<'a> {
    fn new(g: &'a KernelMatrix, labels: Vec<usize>, k: usize) -> Self {
        let mut s = Self {
            g,
            sizes: vec![0; k],
            cross: Array2::zeros((g.n(), k)),
            self_sums: vec![0.0; k],
            labels,
        };
        s.rebuild();
        s
    }

    fn k(&self) -> usize {
        self.sizes.len()
    }

    fn rebuild(&mut self) {
        let n = self.g.n();
        self.sizes.iter_mut().for_each(|s| *s = 0);
        for &l in &self.labels {
            self.sizes[l] += 1;
        }
        self.cross.fill(0.0);
        for i in 0..n {
            let row = self.g.row(i);
            for j in 0..n {
                self.cross[[i, self.labels[j]]] += row[j];
            }
        }
        self.refresh_self_sums();
    }

    fn refresh_self_sums(&mut self) {
        self.self_sums.iter_mut().for_each(|s| *s = 0.0);
        for (i, &l) in self.labels.iter().enumerate() {
            self.self_sums[l] += self.cross[[i, l]];
        }
    }

    fn move_point(&mut self, p: usize, to: usize) {
        let from = self.labels[p];
        if from == to {
            return;
        }
        let row = self.g.row(p);
        for i in 0..self.g.n() {
            self.cross[[i, from]] -= row[i];
            self.cross[[i, to]] += row[i];
        }
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.labels[p] = to;
    }

    /// Squared distance of `i` to the mean of cluster `k`, up to the factor
    /// `(zeta/eta)^(d/2)`. Requires `sizes[k] > 0`.
    fn dist_sq_raw(&self, i: usize, k: usize) -> f64 {
        let m = self.sizes[k] as f64;
        1.0 + self.self_sums[k] / (m * m) - 2.0 * self.cross[[i, k]] / m
    }

    /// Moves the point farthest from its own mean into each empty cluster.
    fn repair_empty(&mut self) {
        while let Some(empty) = self.sizes.iter().position(|&s| s == 0) {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.g.n() {
                let l = self.labels[i];
                if self.sizes[l] < 2 {
                    continue;
                }
                let d = self.dist_sq_raw(i, l);
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((i, d));
                }
            }
            let (p, _) = best.expect("k <= n guarantees a cluster with two points");
            self.move_point(p, empty);
            self.refresh_self_sums();
        }
    }

    fn partition(&self) -> Partition {
        Partition::new(self.labels.clone(), self.k()).expect("labels are in range")
    }
}

const LLOYD_MAX_ITER: usize = 1000;

/// Lloyd iterations in the RKHS: every point moves to the cluster whose
/// component mean is nearest in MMD, until no point moves. Empty clusters
/// are reseeded with the point farthest from its own mean. Returns the final
/// partition and the number of assignment rounds that moved a point.
pub fn lloyd(g: &KernelMatrix, init: &Partition) -> Result<(Partition, usize)> {
    if init.len() != g.n() {
        return Err(Error::LengthMismatch(init.len(), g.n()));
    }
    check_k(g, init.k())?;
    let mut sums = ClusterSums::new(g, init.labels().to_vec(), init.k());
    sums.repair_empty();
    let n = g.n();
    let k = sums.k();
    let mut rounds = 0;
    while rounds < LLOYD_MAX_ITER {
        let mut moves = Vec::new();
        for i in 0..n {
            let current = sums.labels[i];
            let mut best = current;
            let mut best_d = sums.dist_sq_raw(i, current);
            for c in 0..k {
                let d = sums.dist_sq_raw(i, c);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if best != current {
                moves.push((i, best));
            }
        }
        if moves.is_empty() {
            break;
        }
        rounds += 1;
        if moves.len() * 4 > n {
            for &(i, c) in &moves {
                sums.labels[i] = c;
            }
            sums.rebuild();
        } else {
            for &(i, c) in &moves {
                sums.move_point(i, c);
            }
            sums.refresh_self_sums();
        }
        sums.repair_empty();
    }
    Ok((sums.partition(), rounds))
}

/// Kernel k-means from `restarts` uniformly random initial partitions,
/// keeping the lowest objective.
pub fn kernel_kmeans(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    g.check_split(bw)?;
    check_k(g, k)?;
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusteringResult> = None;
    for _ in 0..restarts {
        let labels: Vec<usize> = (0..g.n()).map(|_| rng.random_range(0..k)).collect();
        let init = Partition::new(labels, k)?;
        let (partition, iterations) = lloyd(g, &init)?;
        let objective = kmeans_objective(g, &partition, bw)?;
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(ClusteringResult {
                partition,
                objective,
                algorithm: Algorithm::Kmn,
                iterations,
                seed,
            });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

const EXACT_BUDGET: u128 = 200_000;

/// Whether exhaustive search over `k`-partitions of `n` points is allowed.
pub fn exact_allowed(n: usize, k: usize) -> bool {
    match k {
        0 => false,
        1 => true,
        _ if k >= n => true,
        2 => n <= 16,
        3 => n <= 12,
        _ => stirling2(n, k) <= EXACT_BUDGET,
    }
}

fn exhaustive_min(
    g: &KernelMatrix,
    k: usize,
    mut score: impl FnMut(&[usize]) -> f64,
) -> Result<(Partition, usize)> {
    check_k(g, k)?;
    if !exact_allowed(g.n(), k) {
        return Err(Error::ExactTooLarge { n: g.n(), k });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut visited = 0;
    for_each_surjective_partition(g.n(), k, |labels| {
        visited += 1;
        let s = score(labels);
        if best.as_ref().is_none_or(|(_, b)| s < *b) {
            best = Some((labels.to_vec(), s));
        }
    });
    let (labels, _) = best.expect("k <= n has at least one partition");
    Ok((Partition::new(labels, k)?, visited))
}

/// Exhaustive kernel k-means: the partition with the smallest objective.
/// `iterations` reports the number of partitions examined.
pub fn kernel_kmeans_exact(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
) -> Result<ClusteringResult> {
    g.check_split(bw)?;
    let (partition, visited) = exhaustive_min(g, k, |labels| {
        let p = Partition::new(labels.to_vec(), k).expect("enumerated labels");
        kmeans_objective_gram(g, &p).expect("surjective partition")
    })?;
    Ok(ClusteringResult {
        objective: kmeans_objective(g, &partition, bw)?,
        partition,
        algorithm: Algorithm::Kmn,
        iterations: visited,
        seed: 0,
    })
}

/// How farthest-first measures the distance from a point to the chosen centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarthestRule {
    /// Distance to the nearest center (the usual traversal).
    #[default]
    MinDistance,
    /// Distance to the farthest center.
    MaxDistance,
}

/// Farthest-first center selection starting from `first`. Centers are never
/// chosen twice; ties go to the lowest index.
pub fn farthest_first_centers(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    first: usize,
    rule: FarthestRule,
) -> Result<Vec<usize>> {
    g.check_split(bw)?;
    check_k(g, k)?;
    g.check_index(first)?;
    let n = g.n();
    let mut centers = vec![first];
    let mut is_center = vec![false; n];
    is_center[first] = true;
    // rho is decreasing in the kernel value, so the traversal tracks kernel
    // values directly; 1 - G saturates at 1.0 for far points.
    let mut closeness: Vec<f64> = (0..n).map(|x| g.get(x, first)).collect();
    while centers.len() < k {
        let mut pick: Option<usize> = None;
        for x in 0..n {
            if !is_center[x] && pick.is_none_or(|p| closeness[x] < closeness[p]) {
                pick = Some(x);
            }
        }
        let c = pick.expect("k <= n leaves a candidate");
        centers.push(c);
        is_center[c] = true;
        for (x, v) in closeness.iter_mut().enumerate() {
            let to_c = g.get(x, c);
            *v = match rule {
                FarthestRule::MinDistance => v.max(to_c),
                FarthestRule::MaxDistance => v.min(to_c),
            };
        }
    }
    Ok(centers)
}

/// Labels each point with its nearest center (lowest center index on ties).
pub fn assign_to_centers(g: &KernelMatrix, centers: &[usize]) -> Result<Partition> {
    let labels = (0..g.n())
        .map(|x| {
            let mut best = 0;
            for (c, &ctr) in centers.iter().enumerate() {
                // rho is increasing in 1 - G, so compare kernel values directly.
                if g.get(x, ctr) > g.get(x, centers[best]) {
                    best = c;
                }
            }
            best
        })
        .collect();
    Partition::new(labels, centers.len())
}

/// Farthest-first kernel k-means: farthest-first centers from `first_center`,
/// nearest-center assignment, then Lloyd iterations until stable.
pub fn ffk(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    first_center: usize,
) -> Result<ClusteringResult> {
    ffk_with_rule(g, k, bw, first_center, FarthestRule::MinDistance)
}

pub fn ffk_with_rule(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    first_center: usize,
    rule: FarthestRule,
) -> Result<ClusteringResult> {
    let centers = farthest_first_centers(g, k, bw, first_center, rule)?;
    let init = assign_to_centers(g, &centers)?;
    let (partition, iterations) = lloyd(g, &init)?;
    Ok(ClusteringResult {
        objective: kmeans_objective(g, &partition, bw)?,
        partition,
        algorithm: Algorithm::Ffk,
        iterations,
        seed: first_center as u64,
    })
}

/// FFK final partitions for every possible first center, in index order.
/// Runs sharing the same initial partition share one Lloyd run.
pub fn ffk_all_first_centers(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    rule: FarthestRule,
) -> Result<Vec<Partition>> {
    let mut cache: HashMap<Vec<usize>, Partition> = HashMap::new();
    let mut out = Vec::with_capacity(g.n());
    for first in 0..g.n() {
        let centers = farthest_first_centers(g, k, bw, first, rule)?;
        let init = assign_to_centers(g, &centers)?;
        let key = init.labels().to_vec();
        let result = match cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                let (p, _) = lloyd(g, &init)?;
                cache.insert(key, p.clone());
                p
            }
        };
        out.push(result);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KcenterMode {
    Exact,
    Heuristic,
}

/// Kernel k-center. Exact mode enumerates every partition; heuristic mode
/// seeds with farthest-first from a random first center and then applies
/// single-point relocations while they lower the objective.
pub fn kcenter(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    mode: KcenterMode,
    seed: u64,
) -> Result<ClusteringResult> {
    g.check_split(bw)?;
    check_k(g, k)?;
    let (partition, iterations) = match mode {
        KcenterMode::Exact => exhaustive_min(g, k, |labels| {
            let p = Partition::new(labels.to_vec(), k).expect("enumerated labels");
            kcenter_objective(g, &p, bw).expect("surjective partition")
        })?,
        KcenterMode::Heuristic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let first = rng.random_range(0..g.n());
            let centers = farthest_first_centers(g, k, bw, first, FarthestRule::MinDistance)?;
            let init = assign_to_centers(g, &centers)?;
            kcenter_local_search(g, bw, &init)
        }
    };
    Ok(ClusteringResult {
        objective: kcenter_objective(g, &partition, bw)?,
        partition,
        algorithm: Algorithm::Ctr,
        iterations,
        seed,
    })
}

/// Largest point-to-mean distance in cluster `c` after hypothetically adding
/// (`delta = +1`) or removing (`delta = -1`) point `p`.
fn radius_after_move(
    sums: &ClusterSums<'_>,
    bw: &BandwidthSplit,
    c: usize,
    p: usize,
    adding: bool,
) -> f64 {
    let g = sums.g;
    let gpp = g.get(p, p);
    let (m, self_sum) = if adding {
        (
            sums.sizes[c] + 1,
            sums.self_sums[c] + 2.0 * sums.cross[[p, c]] + gpp,
        )
    } else {
        (
            sums.sizes[c] - 1,
            sums.self_sums[c] - 2.0 * sums.cross[[p, c]] + gpp,
        )
    };
    let mut worst: f64 = 0.0;
    for i in 0..g.n() {
        let member = if i == p { adding } else { sums.labels[i] == c };
        if !member {
            continue;
        }
        let cross = if adding {
            sums.cross[[i, c]] + g.get(i, p)
        } else {
            sums.cross[[i, c]] - g.get(i, p)
        };
        worst = worst.max(point_to_cluster_sq(cross, self_sum, m, bw));
    }
    worst
}

fn cluster_radius_sq(sums: &ClusterSums<'_>, bw: &BandwidthSplit, c: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..sums.g.n() {
        if sums.labels[i] == c {
            worst = worst.max(point_to_cluster_sq(
                sums.cross[[i, c]],
                sums.self_sums[c],
                sums.sizes[c],
                bw,
            ));
        }
    }
    worst
}

fn kcenter_local_search(
    g: &KernelMatrix,
    bw: &BandwidthSplit,
    init: &Partition,
) -> (Partition, usize) {
    let mut sums = ClusterSums::new(g, init.labels().to_vec(), init.k());
    sums.repair_empty();
    let k = sums.k();
    let mut moves = 0;
    loop {
        let radii: Vec<f64> = (0..k).map(|c| cluster_radius_sq(&sums, bw, c)).collect();
        let current = radii.iter().copied().fold(0.0, f64::max);
        let mut best: Option<(usize, usize, f64)> = None;
        for p in 0..g.n() {
            let from = sums.labels[p];
            if sums.sizes[from] < 2 {
                continue;
            }
            let from_radius = radius_after_move(&sums, bw, from, p, false);
            for to in 0..k {
                if to == from {
                    continue;
                }
                let to_radius = radius_after_move(&sums, bw, to, p, true);
                let mut value = from_radius.max(to_radius);
                for (c, r) in radii.iter().enumerate() {
                    if c != from && c != to {
                        value = value.max(*r);
                    }
                }
                if best.as_ref().is_none_or(|b| value < b.2) {
                    best = Some((p, to, value));
                }
            }
        }
        match best {
            Some((p, to, value)) if value < current * (1.0 - 1e-12) => {
                sums.move_point(p, to);
                sums.refresh_self_sums();
                moves += 1;
            }
            _ => break,
        }
    }
    (sums.partition(), moves)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

impl Linkage {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Linkage::Single => Algorithm::LnkSingle,
            Linkage::Complete => Algorithm::LnkComplete,
            Linkage::Average => Algorithm::LnkAverage,
        }
    }
}

/// One agglomeration step. Clusters are named by their smallest member index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Result of agglomerating down to a fixed number of clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub partition: Partition,
}

/// Agglomerative clustering of an arbitrary symmetric distance matrix,
/// stopping at `k` clusters. The pair with the smallest linkage distance is
/// merged first; ties go to the lexicographically smallest pair of cluster
/// names.
pub fn agglomerate(dist: &Array2<f64>, k: usize, mode: Linkage) -> Result<Dendrogram> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(Error::InvalidParameter(
            "distance matrix must be square".into(),
        ));
    }
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    let mut d = dist.clone();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut owner: Vec<usize> = (0..n).collect();
    // nn[i]: best partner j > i among active clusters, with its distance.
    let mut nn = vec![usize::MAX; n];
    let mut nnd = vec![f64::INFINITY; n];
    let recompute =
        |i: usize, d: &Array2<f64>, active: &[bool], nn: &mut [usize], nnd: &mut [f64]| {
            nn[i] = usize::MAX;
            nnd[i] = f64::INFINITY;
            for j in i + 1..n {
                if active[j] && d[[i, j]] < nnd[i] {
                    nn[i] = j;
                    nnd[i] = d[[i, j]];
                }
            }
        };
    for i in 0..n {
        recompute(i, &d, &active, &mut nn, &mut nnd);
    }
    let mut merges = Vec::with_capacity(n - k);
    let mut clusters = n;
    while clusters > k {
        let mut a = usize::MAX;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && (a == usize::MAX || nnd[i] < nnd[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let height = nnd[a];
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let (dac, dbc) = (d[[a, c]], d[[b, c]]);
            let merged = match mode {
                Linkage::Single => dac.min(dbc),
                Linkage::Complete => dac.max(dbc),
                Linkage::Average => {
                    (size[a] as f64 * dac + size[b] as f64 * dbc) / (size[a] + size[b]) as f64
                }
            };
            d[[a, c]] = merged;
            d[[c, a]] = merged;
        }
        active[b] = false;
        size[a] += size[b];
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
        merges.push(Merge {
            left: a,
            right: b,
            height,
            size: size[a],
        });
        clusters -= 1;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if i == a || nn[i] == a || nn[i] == b {
                recompute(i, &d, &active, &mut nn, &mut nnd);
            } else if i < a && (d[[i, a]] < nnd[i] || (d[[i, a]] == nnd[i] && a < nn[i])) {
                nn[i] = a;
                nnd[i] = d[[i, a]];
            }
        }
    }
    // Label clusters in order of their smallest member.
    let mut label_of = vec![usize::MAX; n];
    let mut next = 0;
    let labels = owner
        .iter()
        .map(|&o| {
            if label_of[o] == usize::MAX {
                label_of[o] = next;
                next += 1;
            }
            label_of[o]
        })
        .collect();
    Ok(Dendrogram {
        merges,
        partition: Partition::new(labels, k)?,
    })
}

/// Pairwise component MMD matrix `rho(psi_i, psi_j)`.
pub fn mmd_distance_matrix(g: &KernelMatrix, bw: &BandwidthSplit) -> Result<Array2<f64>> {
    g.check_split(bw)?;
    let n = g.n();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        pointwise_unchecked(i, j, g, bw)
    }))
}

pub fn linkage_tree(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    mode: Linkage,
) -> Result<Dendrogram> {
    check_k(g, k)?;
    agglomerate(&mmd_distance_matrix(g, bw)?, k, mode)
}

/// Agglomerative linkage clustering on component MMDs, cut at `k` clusters.
/// The reported objective is [`linkage_objective`] of the result.
pub fn linkage(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    mode: Linkage,
) -> Result<ClusteringResult> {
    let tree = linkage_tree(g, k, bw, mode)?;
    Ok(ClusteringResult {
        objective: linkage_objective(g, &tree.partition, bw, mode)?,
        iterations: tree.merges.len(),
        partition: tree.partition,
        algorithm: mode.algorithm(),
        seed: 0,
    })
}

/// Smallest linkage distance between two distinct clusters of `p`: the height
/// of the next merge. Infinite for a single cluster.
pub fn linkage_objective(
    g: &KernelMatrix,
    p: &Partition,
    bw: &BandwidthSplit,
    mode: Linkage,
) -> Result<f64> {
    g.check_split(bw)?;
    let clusters = check_partition(g, p)?;
    let mut best = f64::INFINITY;
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            let pairs = clusters[a]
                .iter()
                .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                .map(|(i, j)| pointwise_unchecked(i, j, g, bw));
            let value = match mode {
                Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
                Linkage::Complete => pairs.fold(0.0, f64::max),
                Linkage::Average => {
                    accurate_sum(pairs) / (clusters[a].len() * clusters[b].len()) as f64
                }
            };
            best = best.min(value);
        }
    }
    Ok(best)
}

/// Objective each algorithm reports, recomputed from `(G, partition)`.
/// Runs `algorithm` with its default settings: ten random restarts for KMN,
/// first center `seed mod n` for FFK and the heuristic for CTR.
pub fn run_algorithm(
    g: &KernelMatrix,
    k: usize,
    bw: &BandwidthSplit,
    algorithm: Algorithm,
    seed: u64,
) -> Result<ClusteringResult> {
    match algorithm {
        Algorithm::Kmn => kernel_kmeans(g, k, bw, 10, seed),
        Algorithm::Ffk => {
            g.check_split(bw)?;
            check_k(g, k)?;
            ffk(g, k, bw, (seed % g.n() as u64) as usize)
        }
        Algorithm::Ctr => kcenter(g, k, bw, KcenterMode::Heuristic, seed),
        Algorithm::LnkSingle => linkage(g, k, bw, Linkage::Single),
        Algorithm::LnkComplete => linkage(g, k, bw, Linkage::Complete),
        Algorithm::LnkAverage => linkage(g, k, bw, Linkage::Average),
    }
}

pub fn objective_for(
    g: &KernelMatrix,
    p: &Partition,
    bw: &BandwidthSplit,
    algorithm: Algorithm,
) -> Result<f64> {
    match algorithm {
        Algorithm::Kmn | Algorithm::Ffk => kmeans_objective(g, p, bw),
        Algorithm::Ctr => kcenter_objective(g, p, bw),
        Algorithm::LnkSingle => linkage_objective(g, p, bw, Linkage::Single),
        Algorithm::LnkComplete => linkage_objective(g, p, bw, Linkage::Complete),
        Algorithm::LnkAverage => linkage_objective(g, p, bw, Linkage::Average),
    }
}

/// Squared pairwise MMD matrix; same merge order as [`mmd_distance_matrix`]
/// under single linkage.
pub fn mmd_sq_distance_matrix(g: &KernelMatrix, bw: &BandwidthSplit) -> Result<Array2<f64>> {
    g.check_split(bw)?;
    let n = g.n();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        pointwise_sq_unchecked(i, j, g, bw)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_matrix;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn four_points() -> (KernelMatrix, BandwidthSplit) {
        let bw = BandwidthSplit::new(0.5, 1.0, 1).unwrap();
        let x = array![[0.0], [0.1], [10.0], [10.1]];
        (kernel_matrix(x.view(), bw.eta()).unwrap(), bw)
    }

    fn planted4() -> Partition {
        Partition::new(vec![0, 0, 1, 1], 2).unwrap()
    }

    #[test]
    fn kmeans_objective_examples() {
        let bw = BandwidthSplit::new(0.3, 1.0, 1).unwrap();
        let same = array![[1.0], [1.0], [1.0]];
        let g = kernel_matrix(same.view(), bw.eta()).unwrap();
        assert_eq!(
            kmeans_objective(&g, &Partition::single(3), &bw).unwrap(),
            0.0
        );

        let (g, bw) = four_points();
        let total: f64 = g.entries().iter().sum();
        assert_relative_eq!(
            kmeans_objective(&g, &Partition::single(4), &bw).unwrap(),
            bw.embedding_norm_sq() * (4.0 - total / 4.0),
            max_relative = 1e-14
        );
        let empty = Partition::new(vec![0, 0, 0, 0], 2).unwrap();
        assert_eq!(
            kmeans_objective(&g, &empty, &bw),
            Err(Error::EmptyCluster(1))
        );
    }

    #[test]
    fn planted_is_unique_kmeans_minimum_on_four_points() {
        let (g, bw) = four_points();
        let planted = kmeans_objective(&g, &planted4(), &bw).unwrap();
        let mut others = 0;
        for_each_surjective_partition(4, 2, |labels| {
            let p = Partition::new(labels.to_vec(), 2).unwrap();
            if !p.same_up_to_relabeling(&planted4()) {
                others += 1;
                assert!(kmeans_objective(&g, &p, &bw).unwrap() > planted);
            }
        });
        assert_eq!(others, 6);
        let exact = kernel_kmeans_exact(&g, 2, &bw).unwrap();
        assert!(exact.partition.same_up_to_relabeling(&planted4()));
    }

    #[test]
    fn kmeans_with_k_equal_n() {
        let (g, bw) = four_points();
        let r = kernel_kmeans(&g, 4, &bw, 3, 1).unwrap();
        assert_eq!(r.partition.sizes(), vec![1, 1, 1, 1]);
        assert!(r.objective.abs() < 1e-15);
        assert!(matches!(
            kernel_kmeans(&g, 5, &bw, 1, 0),
            Err(Error::TooManyClusters { .. })
        ));
        assert!(kernel_kmeans(&g, 2, &bw, 0, 0).is_err());
    }

    #[test]
    fn lloyd_recovers_four_points() {
        let (g, bw) = four_points();
        let r = kernel_kmeans(&g, 2, &bw, 5, 7).unwrap();
        assert!(r.partition.same_up_to_relabeling(&planted4()));
    }

    #[test]
    fn lloyd_repairs_empty_clusters() {
        let (g, _) = four_points();
        let init = Partition::new(vec![0, 0, 0, 0], 3).unwrap();
        let (p, _) = lloyd(&g, &init).unwrap();
        assert!(p.first_empty().is_none());
    }

    #[test]
    fn ffk_four_point_trace() {
        let (g, bw) = four_points();
        let centers = farthest_first_centers(&g, 2, &bw, 0, FarthestRule::MinDistance).unwrap();
        assert_eq!(centers, vec![0, 3]);
        let r = ffk(&g, 2, &bw, 0).unwrap();
        assert!(r.partition.same_up_to_relabeling(&planted4()));
        for first in 0..4 {
            let one = ffk(&g, 1, &bw, first).unwrap();
            assert_eq!(one.partition.k(), 1);
            assert!(one.partition.labels().iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn farthest_rules_agree_for_two_centers() {
        let (g, bw) = four_points();
        for first in 0..4 {
            assert_eq!(
                farthest_first_centers(&g, 2, &bw, first, FarthestRule::MinDistance).unwrap(),
                farthest_first_centers(&g, 2, &bw, first, FarthestRule::MaxDistance).unwrap()
            );
        }
    }

    #[test]
    fn farthest_rules_differ_for_three_centers() {
        let bw = BandwidthSplit::new(0.1, 1.0, 1).unwrap();
        let x = array![[0.0], [0.5], [1.0], [5.0]];
        let g = kernel_matrix(x.view(), bw.eta()).unwrap();
        let min_rule = farthest_first_centers(&g, 3, &bw, 0, FarthestRule::MinDistance).unwrap();
        let max_rule = farthest_first_centers(&g, 3, &bw, 0, FarthestRule::MaxDistance).unwrap();
        assert_eq!(min_rule, vec![0, 3, 2]);
        // Under the max rule every non-center is far from point 3; the lowest index wins.
        assert_eq!(max_rule, vec![0, 3, 1]);
    }

    #[test]
    fn ffk_sweep_matches_individual_runs() {
        let (g, bw) = four_points();
        let all = ffk_all_first_centers(&g, 2, &bw, FarthestRule::MinDistance).unwrap();
        for (first, p) in all.iter().enumerate() {
            assert_eq!(*p, ffk(&g, 2, &bw, first).unwrap().partition);
        }
    }

    #[test]
    fn kcenter_examples() {
        let (g, bw) = four_points();
        let singletons = Partition::new(vec![0, 1, 2, 3], 4).unwrap();
        assert_eq!(kcenter_objective(&g, &singletons, &bw).unwrap(), 0.0);
        let exact = kcenter(&g, 2, &bw, KcenterMode::Exact, 0).unwrap();
        assert!(exact.partition.same_up_to_relabeling(&planted4()));
        let n_eq_k = kcenter(&g, 4, &bw, KcenterMode::Heuristic, 0).unwrap();
        assert_eq!(n_eq_k.objective, 0.0);
        let planted = kcenter_objective(&g, &planted4(), &bw).unwrap();
        for_each_surjective_partition(4, 2, |labels| {
            let p = Partition::new(labels.to_vec(), 2).unwrap();
            if !p.same_up_to_relabeling(&planted4()) {
                assert!(kcenter_objective(&g, &p, &bw).unwrap() > planted);
            }
        });
    }

    #[test]
    fn kcenter_singleton_plus_pair() {
        // The pair's radius is half its pairwise MMD: ||mu_a - (mu_a + mu_b)/2|| = rho(a,b)/2.
        let (g, bw) = four_points();
        let p = Partition::new(vec![0, 0, 1, 2], 3).unwrap();
        let expected = 0.5 * crate::kernel::mmd_pointwise(0, 1, &g, &bw).unwrap();
        assert_relative_eq!(
            kcenter_objective(&g, &p, &bw).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn exact_size_limits() {
        assert!(exact_allowed(16, 2));
        assert!(!exact_allowed(17, 2));
        assert!(exact_allowed(12, 3));
        assert!(!exact_allowed(13, 3));
        let bw = BandwidthSplit::new(0.5, 1.0, 1).unwrap();
        let x = Array2::from_shape_fn((17, 1), |(i, _)| i as f64);
        let g = kernel_matrix(x.view(), bw.eta()).unwrap();
        assert!(matches!(
            kcenter(&g, 2, &bw, KcenterMode::Exact, 0),
            Err(Error::ExactTooLarge { .. })
        ));
    }

    #[test]
    fn single_linkage_four_point_trace() {
        let (g, bw) = four_points();
        let tree = linkage_tree(&g, 2, &bw, Linkage::Single).unwrap();
        assert_eq!(tree.merges.len(), 2);
        assert_eq!((tree.merges[0].left, tree.merges[0].right), (0, 1));
        assert_eq!((tree.merges[1].left, tree.merges[1].right), (2, 3));
        assert_eq!(tree.partition, planted4());
        let r = linkage(&g, 4, &bw, Linkage::Complete).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.partition.labels(), &[0, 1, 2, 3]);
    }

    #[test]
    fn linkage_ties_break_lexicographically() {
        let dist = array![
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 0.0]
        ];
        let tree = agglomerate(&dist, 1, Linkage::Average).unwrap();
        let pairs: Vec<_> = tree.merges.iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn single_linkage_invariant_under_squaring() {
        let bw = BandwidthSplit::new(0.4, 1.0, 2).unwrap();
        let x = Array2::from_shape_fn((25, 2), |(i, j)| ((i * 31 + j * 17) % 23) as f64 * 0.21);
        let g = kernel_matrix(x.view(), bw.eta()).unwrap();
        for k in 1..6 {
            let a =
                agglomerate(&mmd_distance_matrix(&g, &bw).unwrap(), k, Linkage::Single).unwrap();
            let b = agglomerate(
                &mmd_sq_distance_matrix(&g, &bw).unwrap(),
                k,
                Linkage::Single,
            )
            .unwrap();
            assert_eq!(a.partition, b.partition);
        }
    }

    #[test]
    fn linkage_objective_is_next_merge_height() {
        let bw = BandwidthSplit::new(0.3, 1.0, 1).unwrap();
        let x = array![[0.0], [0.3], [1.1], [2.9], [3.0], [5.5]];
        let g = kernel_matrix(x.view(), bw.eta()).unwrap();
        for mode in [Linkage::Single, Linkage::Complete, Linkage::Average] {
            let three = linkage_tree(&g, 3, &bw, mode).unwrap();
            let two = linkage_tree(&g, 2, &bw, mode).unwrap();
            let next = two.merges.last().unwrap().height;
            let obj = linkage_objective(&g, &three.partition, &bw, mode).unwrap();
            assert_relative_eq!(obj, next, max_relative = 1e-12);
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::Kmn,
            Algorithm::Ffk,
            Algorithm::Ctr,
            Algorithm::LnkSingle,
            Algorithm::LnkComplete,
            Algorithm::LnkAverage,
        ] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("spectral".parse::<Algorithm>().is_err());
    }
}
