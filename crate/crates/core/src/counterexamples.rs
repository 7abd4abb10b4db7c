//! Adversarial mixtures on which k-means, farthest-first and single linkage
//! fail, plus trial runners that measure the failures empirically.

use serde::{Deserialize, Serialize};

use crate::clustering::{ffk_all_first_centers, kmeans_objective, linkage, FarthestRule, Linkage};
use crate::diagnostics::partition_agreement;
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, BandwidthSplit};
use crate::mixtures::{Component, LabeledSample, MixingMeasure};
use crate::partition::Partition;

const THM1_DEFAULTS: &str = include_str!("../defaults/thm1.toml");
const THM3_DEFAULTS: &str = include_str!("../defaults/thm3.toml");

/// Two nearby intervals forming one component and a light interval far away:
/// `(1 - lambda2) (U[-eps, eps] + U[r - eps, r + eps]) / 2 + lambda2 U[D r - eps, D r + eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThm1")]
pub struct Thm1Params {
    pub r: f64,
    pub eps: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub lambda2: f64,
    pub zeta: f64,
}

#[derive(Deserialize)]
struct RawThm1 {
    r: f64,
    eps: f64,
    #[serde(rename = "D")]
    d: f64,
    lambda2: f64,
    zeta: f64,
}

impl TryFrom<RawThm1> for Thm1Params {
    type Error = Error;
    fn try_from(p: RawThm1) -> Result<Self> {
        Thm1Params::new(p.r, p.eps, p.d, p.lambda2, p.zeta)
    }
}

impl Thm1Params {
    pub fn new(r: f64, eps: f64, d: f64, lambda2: f64, zeta: f64) -> Result<Self> {
        let p = Thm1Params {
            r,
            eps,
            d,
            lambda2,
            zeta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.d > 2.0 && 2.0 > self.r && self.r > self.eps && self.eps > 0.0;
        if !ordered || !self.d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need D > 2 > r > eps > 0, got D={}, r={}, eps={}",
                self.d, self.r, self.eps
            )));
        }
        if !(4.0 * self.eps * self.eps < self.zeta) {
            return Err(Error::InvalidParameter(format!(
                "need 4 eps^2 < zeta, got eps={}, zeta={}",
                self.eps, self.zeta
            )));
        }
        if !(self.lambda2 > 0.0 && self.lambda2 < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "lambda2 must lie in (0, 0.5), got {}",
                self.lambda2
            )));
        }
        Ok(())
    }

    /// Centers of the three intervals, in order.
    pub fn interval_centers(&self) -> [f64; 3] {
        [0.0, self.r, self.d * self.r]
    }
}

impl Default for Thm1Params {
    fn default() -> Self {
        toml::from_str(THM1_DEFAULTS).expect("bundled defaults are valid")
    }
}

/// Four equally spaced-ish intervals at `0, r, 2r - K, 3r - K`, paired as
/// `{0, r}` and `{2r - K, 3r - K}` with equal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThm3")]
pub struct Thm3Params {
    pub r: f64,
    #[serde(rename = "K_off")]
    pub k_off: f64,
    pub eps: f64,
    pub zeta: f64,
}

#[derive(Deserialize)]
struct RawThm3 {
    r: f64,
    #[serde(rename = "K_off")]
    k_off: f64,
    eps: f64,
    zeta: f64,
}

impl TryFrom<RawThm3> for Thm3Params {
    type Error = Error;
    fn try_from(p: RawThm3) -> Result<Self> {
        Thm3Params::new(p.r, p.k_off, p.eps, p.zeta)
    }
}

impl Thm3Params {
    pub fn new(r: f64, k_off: f64, eps: f64, zeta: f64) -> Result<Self> {
        let p = Thm3Params {
            r,
            k_off,
            eps,
            zeta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = 1.0 > self.r
            && self.r > 2.0 * self.k_off
            && 2.0 * self.k_off > 16.0 * self.eps
            && self.eps > 0.0;
        if !ordered {
            return Err(Error::InvalidParameter(format!(
                "need 1 > r > 2K > 16 eps > 0, got r={}, K={}, eps={}",
                self.r, self.k_off, self.eps
            )));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::NonPositiveBandwidth(self.zeta));
        }
        Ok(())
    }

    pub fn interval_centers(&self) -> [f64; 4] {
        let (r, k) = (self.r, self.k_off);
        [0.0, r, 2.0 * r - k, 3.0 * r - k]
    }
}

impl Default for Thm3Params {
    fn default() -> Self {
        toml::from_str(THM3_DEFAULTS).expect("bundled defaults are valid")
    }
}

fn interval(center: f64, eps: f64) -> Result<Component> {
    Component::uniform(center - eps, center + eps)
}

fn interval_pair(a: f64, b: f64, eps: f64) -> Result<Component> {
    Component::equal_mix(vec![interval(a, eps)?, interval(b, eps)?])
}

pub fn theorem1_mixture(p: &Thm1Params) -> Result<MixingMeasure> {
    p.validate()?;
    let [a, b, c] = p.interval_centers();
    MixingMeasure::new(
        vec![1.0 - p.lambda2, p.lambda2],
        vec![interval_pair(a, b, p.eps)?, interval(c, p.eps)?],
    )
}

pub fn theorem3_mixture(p: &Thm3Params) -> Result<MixingMeasure> {
    p.validate()?;
    let [a, b, c, d] = p.interval_centers();
    MixingMeasure::new(
        vec![0.5, 0.5],
        vec![interval_pair(a, b, p.eps)?, interval_pair(c, d, p.eps)?],
    )
}

/// Two copies of the first necessity-construction component, centered at 0 and 10.
pub fn control_mixture() -> Result<MixingMeasure> {
    let (r, eps) = (0.2, 0.005);
    MixingMeasure::new(
        vec![0.5, 0.5],
        vec![
            interval_pair(0.0, r, eps)?,
            interval_pair(10.0, 10.0 + r, eps)?,
        ],
    )
}

/// Index of the interval (by nearest center) containing each sample point.
fn interval_index(x: f64, centers: &[f64]) -> usize {
    centers
        .iter()
        .enumerate()
        .min_by(|a, b| (x - a.1).abs().total_cmp(&(x - b.1).abs()))
        .map(|(i, _)| i)
        .expect("at least one interval")
}

fn interval_labels(sample: &LabeledSample, centers: &[f64], what: &str) -> Result<Vec<usize>> {
    let labels: Vec<usize> = sample
        .points
        .column(0)
        .iter()
        .map(|&x| interval_index(x, centers))
        .collect();
    for (j, c) in centers.iter().enumerate() {
        if !labels.contains(&j) {
            return Err(Error::VoidTrial(format!(
                "{what}: interval around {c} has no sample points"
            )));
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityTrial {
    pub planted_obj: f64,
    pub alternative_obj: f64,
    pub kmeans_failed: bool,
}

/// Compares the k-means objective of the planted partition with that of the
/// partition isolating the first interval. A smaller alternative objective
/// certifies that the k-means optimum is not the planted partition.
pub fn run_impossibility_trial(
    p: &Thm1Params,
    n: usize,
    beta: f64,
    seed: u64,
) -> Result<ImpossibilityTrial> {
    let lam = theorem1_mixture(p)?;
    let sample = lam.sample_labeled(n, seed)?;
    let which = interval_labels(&sample, &p.interval_centers(), "impossibility trial")?;
    let planted = Partition::new(which.iter().map(|&j| usize::from(j == 2)).collect(), 2)?;
    let alternative = Partition::new(which.iter().map(|&j| usize::from(j != 0)).collect(), 2)?;
    let bw = BandwidthSplit::new(beta, p.zeta, 1)?;
    let g = kernel_matrix(sample.points.view(), bw.eta())?;
    let planted_obj = kmeans_objective(&g, &planted, &bw)?;
    let alternative_obj = kmeans_objective(&g, &alternative, &bw)?;
    Ok(ImpossibilityTrial {
        planted_obj,
        alternative_obj,
        kmeans_failed: alternative_obj < planted_obj,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NecessityTrial {
    pub ffk_failed_fraction: f64,
    pub lnk_failed: bool,
}

/// Failure fraction of farthest-first over every possible first center and
/// failure indicator of single linkage, both against the planted partition.
pub fn run_necessity_trial(
    p: &Thm3Params,
    n: usize,
    beta: f64,
    seed: u64,
) -> Result<NecessityTrial> {
    let lam = theorem3_mixture(p)?;
    necessity_on(&lam, &p.interval_centers(), p.zeta, n, beta, seed)
}

/// The same measurements on the well-separated control mixture.
pub fn run_control_trial(zeta: f64, n: usize, beta: f64, seed: u64) -> Result<NecessityTrial> {
    let lam = control_mixture()?;
    necessity_on(&lam, &[0.0, 0.2, 10.0, 10.2], zeta, n, beta, seed)
}

fn necessity_on(
    lam: &MixingMeasure,
    centers: &[f64],
    zeta: f64,
    n: usize,
    beta: f64,
    seed: u64,
) -> Result<NecessityTrial> {
    let sample = lam.sample_labeled(n, seed)?;
    interval_labels(&sample, centers, "necessity trial")?;
    let bw = BandwidthSplit::new(beta, zeta, 1)?;
    let g = kernel_matrix(sample.points.view(), bw.eta())?;
    let runs = ffk_all_first_centers(&g, 2, &bw, FarthestRule::MinDistance)?;
    let mut failed = 0usize;
    for part in &runs {
        if partition_agreement(part, &sample.planted)? < 1.0 {
            failed += 1;
        }
    }
    let lnk = linkage(&g, 2, &bw, Linkage::Single)?;
    Ok(NecessityTrial {
        ffk_failed_fraction: failed as f64 / runs.len() as f64,
        lnk_failed: partition_agreement(&lnk.partition, &sample.planted)? < 1.0,
    })
}
