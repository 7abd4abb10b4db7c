//! Separation statistics of a planted partition and permutation-invariant
//! agreement between partitions.

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, point_to_cluster_sq, BandwidthSplit};
use crate::mixtures::{component_mmd, LabeledSample, MixingMeasure};
use crate::numeric::fmt_f64;
use crate::partition::Partition;

/// Separation of the true components against the spread of the planted
/// clusters, all in MMD units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    /// Smallest MMD between two distinct true components; `+inf` when K = 1.
    pub min_pair_mmd: f64,
    /// Largest MMD from a KDE component to its planted cluster mean.
    pub max_radius: f64,
    /// Largest MMD between two KDE components of the same planted cluster.
    pub max_diameter: f64,
    /// `min_pair_mmd / max_radius`.
    pub ratio: f64,
    /// Largest epsilon for which the sufficient condition holds,
    /// `max(0, min_pair_mmd - 4 max_radius)`.
    pub epsilon_margin: f64,
}

impl SeparationReport {
    pub const CSV_HEADER: &'static str =
        "min_pair_mmd,max_radius,max_diameter,ratio,epsilon_margin";

    pub fn csv_row(&self) -> String {
        [
            self.min_pair_mmd,
            self.max_radius,
            self.max_diameter,
            self.ratio,
            self.epsilon_margin,
        ]
        .map(fmt_f64)
        .join(",")
    }

    /// True when there is only one component and no pair to separate.
    pub fn no_pair(&self) -> bool {
        self.min_pair_mmd.is_infinite()
    }
}

/// Smallest MMD between distinct components of `lam`.
pub fn min_pair_mmd(lam: &MixingMeasure, zeta: f64) -> Result<f64> {
    let comps = lam.components();
    let mut best = f64::INFINITY;
    for a in 0..comps.len() {
        for b in a + 1..comps.len() {
            best = best.min(component_mmd(&comps[a], &comps[b], zeta)?);
        }
    }
    Ok(best)
}

pub fn separation_stats(
    sample: &LabeledSample,
    lam: &MixingMeasure,
    bw: &BandwidthSplit,
) -> Result<SeparationReport> {
    if sample.points.ncols() != lam.dim() || bw.dim() != lam.dim() {
        return Err(Error::DimensionMismatch {
            expected: lam.dim(),
            got: sample.points.ncols(),
        });
    }
    sample.planted.require_nonempty()?;
    let g = kernel_matrix(sample.points.view(), bw.eta())?;
    let clusters = sample.planted.clusters();
    let mut radius_sq: f64 = 0.0;
    let mut min_kernel: f64 = 1.0;
    for c in &clusters {
        let self_sum = g.block_sum(c, c);
        for &i in c {
            radius_sq = radius_sq.max(point_to_cluster_sq(g.row_sum(i, c), self_sum, c.len(), bw));
            let row = g.row(i);
            for &j in c {
                min_kernel = min_kernel.min(row[j]);
            }
        }
    }
    let max_radius = radius_sq.max(0.0).sqrt();
    let max_diameter = (bw.mmd_scale() * (1.0 - min_kernel)).max(0.0).sqrt();
    let min_pair = min_pair_mmd(lam, bw.zeta())?;
    let ratio = if max_radius > 0.0 {
        min_pair / max_radius
    } else {
        f64::INFINITY
    };
    let epsilon_margin = if min_pair.is_infinite() {
        f64::INFINITY
    } else {
        (min_pair - 4.0 * max_radius).max(0.0)
    };
    Ok(SeparationReport {
        min_pair_mmd: min_pair,
        max_radius,
        max_diameter,
        ratio,
        epsilon_margin,
    })
}

/// Sufficient separation condition: `min_pair_mmd > 4 max_radius + epsilon`.
pub fn check_sufficient(report: &SeparationReport, epsilon: f64) -> bool {
    report.min_pair_mmd > 4.0 * report.max_radius + epsilon
}

const EXHAUSTIVE_MAX_K: usize = 6;

/// Fraction of points on which two partitions agree under the best
/// relabeling of `b`.
pub fn partition_agreement(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let k = a.k().max(b.k());
    let mut confusion = vec![vec![0i64; k]; k];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        confusion[la][lb] += 1;
    }
    let matched = if k <= EXHAUSTIVE_MAX_K {
        best_permutation_exhaustive(&confusion)
    } else {
        hungarian_max(&confusion)
    };
    Ok(matched as f64 / a.len() as f64)
}

fn best_permutation_exhaustive(confusion: &[Vec<i64>]) -> i64 {
    let k = confusion.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = i64::MIN;
    permute(&mut perm, 0, &mut |p| {
        let total: i64 = p.iter().enumerate().map(|(r, &c)| confusion[r][c]).sum();
        best = best.max(total);
    });
    best
}

fn permute(p: &mut [usize], start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method,
/// potentials form, O(k^3)).
pub(crate) fn hungarian_max(weights: &[Vec<i64>]) -> i64 {
    let k = weights.len();
    let big = weights.iter().flatten().copied().max().unwrap_or(0);
    // Minimise cost = big - weight.
    let cost = |r: usize, c: usize| big - weights[r][c];
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut way = vec![0usize; k + 1];
    let mut matched_row = vec![0usize; k + 1];
    for row in 1..=k {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i64::MAX; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col0] = true;
            let r0 = matched_row[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0;
            for col in 1..=k {
                if used[col] {
                    continue;
                }
                let cur = cost(r0 - 1, col - 1) - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=k {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    (1..=k)
        .map(|col| weights[matched_row[col] - 1][col - 1])
        .sum()
}
