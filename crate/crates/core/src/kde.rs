//! Gaussian kernel density estimates and the default bandwidth schedule.

use std::f64::consts::PI;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, sq_dist};
use crate::mixtures::MixingMeasure;

/// One KDE component: the Gaussian density `N(center, beta^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeComponent {
    pub center: Vec<f64>,
    pub beta: f64,
}

impl KdeComponent {
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.center.len() as f64;
        let b2 = self.beta * self.beta;
        (-sq_dist(x, &self.center) / (2.0 * b2)).exp() / (2.0 * PI * b2).powf(d / 2.0)
    }
}

/// Equal-weight average of one component per sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimate {
    components: Vec<KdeComponent>,
    beta: f64,
    dim: usize,
}

impl KdeEstimate {
    pub fn new(points: ArrayView2<'_, f64>, beta: f64) -> Result<Self> {
        check_bandwidth(beta)?;
        if points.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let components = points
            .outer_iter()
            .map(|row| KdeComponent {
                center: row.to_vec(),
                beta,
            })
            .collect();
        Ok(Self {
            components,
            beta,
            dim: points.ncols(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[KdeComponent] {
        &self.components
    }
}

/// `beta_n = (log n / n)^(1/(d+4))`.
pub fn default_bandwidth(n: usize, d: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "the bandwidth schedule needs n >= 2, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let nf = n as f64;
    Ok((nf.ln() / nf).powf(1.0 / (d as f64 + 4.0)))
}

pub fn kde_eval(est: &KdeEstimate, x: &[f64]) -> Result<f64> {
    if x.len() != est.dim {
        return Err(Error::DimensionMismatch {
            expected: est.dim,
            got: x.len(),
        });
    }
    let total: f64 = est.components.iter().map(|c| c.density(x)).sum();
    Ok(total / est.components.len() as f64)
}

/// Largest absolute gap between the estimate and the true density on `grid`.
pub fn kde_sup_error(est: &KdeEstimate, truth: &MixingMeasure, grid: &[Vec<f64>]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("evaluation grid is empty".into()));
    }
    let mut worst: f64 = 0.0;
    for x in grid {
        let gap = (kde_eval(est, x)? - truth.density(x)?).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// `count` equispaced 1-D points covering `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    if count == 1 {
        return vec![vec![0.5 * (lo + hi)]];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| vec![lo + step * i as f64]).collect()
}

/// The default sup-norm grid: 512 points over the data range padded by `3 beta`.
pub fn data_range_grid(points: ArrayView2<'_, f64>, beta: f64) -> Vec<Vec<f64>> {
    padded_range_grid(points, beta, 512)
}

/// `count` points over the range of the first coordinate padded by `3 beta`.
pub fn padded_range_grid(points: ArrayView2<'_, f64>, beta: f64, count: usize) -> Vec<Vec<f64>> {
    let col = points.column(0);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linear_grid(lo - 3.0 * beta, hi + 3.0 * beta, count)
}
