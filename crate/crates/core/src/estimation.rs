//! Mixing-measure estimation from a clustering, Wasserstein distance between
//! mixing measures, and the Bayes reassignment rule.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::partition_agreement;
use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, sq_dist};
use crate::mixtures::{
    argmax_with_tie, component_mmd, structural_cmp, BayesLabel, Component, LabeledSample,
    MixingMeasure,
};
use crate::partition::Partition;
use crate::transport::solve_transport;

/// A mixing measure estimated from a partition of the sample: weights are
/// cluster proportions and each component is the equal-weight mixture of its
/// cluster's KDE components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedMixingMeasure {
    pub weights: Vec<f64>,
    pub clusters: Vec<Vec<usize>>,
    pub beta: f64,
}

impl EstimatedMixingMeasure {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Cluster sizes over `n`, exact as rationals.
    pub fn counts(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Estimated component `k` over the rows of `points`.
    pub fn component(&self, k: usize, points: ArrayView2<'_, f64>) -> Result<Component> {
        let variance = self.beta * self.beta;
        let parts = self.clusters[k]
            .iter()
            .map(|&i| Component::gaussian(points.row(i).to_vec(), variance))
            .collect::<Result<Vec<_>>>()?;
        Component::equal_mix(parts)
    }

    pub fn to_mixing_measure(&self, points: ArrayView2<'_, f64>) -> Result<MixingMeasure> {
        self.check_points(points)?;
        let comps = (0..self.k())
            .map(|k| self.component(k, points))
            .collect::<Result<Vec<_>>>()?;
        MixingMeasure::new(self.weights.clone(), comps)
    }

    pub fn partition(&self) -> Partition {
        let mut labels = vec![0; self.n()];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                labels[i] = k;
            }
        }
        Partition::new(labels, self.k()).expect("estimated clusters are labeled in range")
    }

    fn check_points(&self, points: ArrayView2<'_, f64>) -> Result<()> {
        if points.nrows() != self.n() {
            return Err(Error::LengthMismatch(points.nrows(), self.n()));
        }
        Ok(())
    }
}

pub fn estimate_mixing_measure(
    points: ArrayView2<'_, f64>,
    partition: &Partition,
    beta: f64,
) -> Result<EstimatedMixingMeasure> {
    check_bandwidth(beta)?;
    if points.nrows() != partition.len() {
        return Err(Error::LengthMismatch(points.nrows(), partition.len()));
    }
    partition.require_nonempty()?;
    let n = partition.len() as f64;
    let clusters = partition.clusters();
    let weights = clusters.iter().map(|c| c.len() as f64 / n).collect();
    Ok(EstimatedMixingMeasure {
        weights,
        clusters,
        beta,
    })
}

/// Estimate built from the planted labels of a sample.
pub fn estimate_from_sample(sample: &LabeledSample, beta: f64) -> Result<EstimatedMixingMeasure> {
    estimate_mixing_measure(sample.points.view(), &sample.planted, beta)
}

/// Ground cost matrix `rho(a_k, b_l)` between the components of two measures.
pub fn mmd_cost_matrix(a: &MixingMeasure, b: &MixingMeasure, zeta: f64) -> Result<Array2<f64>> {
    let (ka, kb) = (a.k(), b.k());
    let cells: Vec<Result<f64>> = (0..ka * kb)
        .into_par_iter()
        .map(|idx| component_mmd(&a.components()[idx / kb], &b.components()[idx % kb], zeta))
        .collect();
    let values = cells.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_vec((ka, kb), values).expect("ka * kb cells"))
}

/// Order-1 Wasserstein distance between two mixing measures, with the MMD
/// under the Gaussian kernel of bandwidth `zeta` as ground metric.
pub fn wasserstein(a: &MixingMeasure, b: &MixingMeasure, zeta: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    // Solve in a fixed orientation so that the distance is bitwise symmetric.
    let (a, b) = if measure_cmp(a, b).is_gt() {
        (b, a)
    } else {
        (a, b)
    };
    let cost = mmd_cost_matrix(a, b, zeta)?;
    Ok(solve_transport(a.weights(), b.weights(), &cost)?
        .cost
        .max(0.0))
}

fn measure_cmp(a: &MixingMeasure, b: &MixingMeasure) -> Ordering {
    a.k()
        .cmp(&b.k())
        .then_with(|| {
            a.weights()
                .iter()
                .zip(b.weights())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            a.components()
                .iter()
                .zip(b.components())
                .map(|(x, y)| structural_cmp(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn check_query(points: ArrayView2<'_, f64>, x: &[f64]) -> Result<()> {
    if points.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: points.ncols(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Per-cluster sums `sum_{j in c_k} exp(-|x - x_j|^2 / (2 beta^2))`.
pub fn kernel_sums(
    est: &EstimatedMixingMeasure,
    points: ArrayView2<'_, f64>,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_query(points, x)?;
    let scale = 2.0 * est.beta * est.beta;
    Ok(est
        .clusters
        .iter()
        .map(|c| {
            c.iter()
                .map(|&j| {
                    (-sq_dist(x, points.row(j).as_slice().expect("standard layout")) / scale).exp()
                })
                .sum()
        })
        .collect())
}

/// `lambda_hat_k * f_hat_k(x)` for every estimated component.
pub fn weighted_kde(
    est: &EstimatedMixingMeasure,
    points: ArrayView2<'_, f64>,
    x: &[f64],
) -> Result<Vec<f64>> {
    let sums = kernel_sums(est, points, x)?;
    let d = points.ncols() as f64;
    let norm = (2.0 * std::f64::consts::PI * est.beta * est.beta).powf(d / 2.0) * est.n() as f64;
    Ok(sums.into_iter().map(|s| s / norm).collect())
}

/// Log of the per-cluster kernel sums, stable far from the data.
fn log_kernel_sums(
    est: &EstimatedMixingMeasure,
    points: ArrayView2<'_, f64>,
    x: &[f64],
) -> Vec<f64> {
    let scale = 2.0 * est.beta * est.beta;
    est.clusters
        .iter()
        .map(|c| {
            let exps: Vec<f64> = c
                .iter()
                .map(|&j| {
                    let row = points.row(j);
                    -row.iter()
                        .zip(x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        / scale
                })
                .collect();
            let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// Reassigns `x` to the cluster with the largest kernel sum (equivalently
/// the largest weighted estimated density). Ties go to the lowest index.
pub fn bayes_reassign(
    est: &EstimatedMixingMeasure,
    points: ArrayView2<'_, f64>,
    x: &[f64],
) -> Result<BayesLabel> {
    check_query(points, x)?;
    if est.k() == 1 {
        return Ok(BayesLabel {
            label: 0,
            tie: false,
        });
    }
    let logs = log_kernel_sums(est, points, x);
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Shifted to make the largest entry 1 so the shared argmax helper applies.
    let shifted: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    argmax_with_tie(&shifted)
}

/// Agreement between the reassigned labels and the true Bayes labels over
/// grid points outside the exceptional set, under the best relabeling.
pub fn bayes_agreement_scan(
    est: &EstimatedMixingMeasure,
    lam: &MixingMeasure,
    points: ArrayView2<'_, f64>,
    grid: &[Vec<f64>],
    t: f64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("evaluation grid is empty".into()));
    }
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for x in grid {
        if lam.exceptional_member(x, t)? {
            continue;
        }
        let true_label = if lam.k() == 1 {
            0
        } else {
            lam.bayes_label(x)?.label
        };
        predicted.push(bayes_reassign(est, points, x)?.label);
        truth.push(true_label);
    }
    if predicted.is_empty() {
        return Err(Error::VacuousGrid);
    }
    let k = est.k().max(lam.k());
    partition_agreement(&Partition::new(predicted, k)?, &Partition::new(truth, k)?)
}
