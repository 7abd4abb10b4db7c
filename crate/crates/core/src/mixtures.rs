//! Ground-truth mixtures: component distributions, mixing measures, planted
//! sampling, Bayes labels and closed-form or quadrature MMD between components.

use std::cmp::Ordering;
use std::f64::consts::PI;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, sq_dist};
use crate::numeric::{composite_nodes, gauss_legendre};
use crate::partition::Partition;

const WEIGHT_TOL: f64 = 1e-12;

/// A component distribution with a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawComponent")]
pub enum Component {
    /// `N(mean, variance * I)`.
    Gaussian { mean: Vec<f64>, variance: f64 },
    /// `U([lo, hi])` on the real line.
    Uniform { lo: f64, hi: f64 },
    /// Finite mixture `sum_i weights[i] * parts[i]`.
    Mix {
        weights: Vec<f64>,
        parts: Vec<Component>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawComponent {
    Gaussian {
        mean: Vec<f64>,
        variance: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Mix {
        weights: Vec<f64>,
        parts: Vec<Component>,
    },
}

impl TryFrom<RawComponent> for Component {
    type Error = Error;

    fn try_from(raw: RawComponent) -> Result<Self> {
        match raw {
            RawComponent::Gaussian { mean, variance } => Component::gaussian(mean, variance),
            RawComponent::Uniform { lo, hi } => Component::uniform(lo, hi),
            RawComponent::Mix { weights, parts } => Component::mix(weights, parts),
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("no weights given".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidParameter(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

impl Component {
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "gaussian mean must be finite and nonempty".into(),
            ));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(Component::Gaussian { mean, variance })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "uniform interval needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Component::Uniform { lo, hi })
    }

    pub fn mix(weights: Vec<f64>, parts: Vec<Component>) -> Result<Self> {
        if weights.len() != parts.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} parts",
                weights.len(),
                parts.len()
            )));
        }
        check_weights(&weights)?;
        let d = parts[0].dim();
        if let Some(p) = parts.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        Ok(Component::Mix { weights, parts })
    }

    /// Equal-weight mixture of the given parts.
    pub fn equal_mix(parts: Vec<Component>) -> Result<Self> {
        let w = 1.0 / parts.len().max(1) as f64;
        Component::mix(vec![w; parts.len()], parts)
    }

    pub fn dim(&self) -> usize {
        match self {
            Component::Gaussian { mean, .. } => mean.len(),
            Component::Uniform { .. } => 1,
            Component::Mix { parts, .. } => parts[0].dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Component::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                mean.iter()
                    .map(|m| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + sd * z
                    })
                    .collect()
            }
            Component::Uniform { lo, hi } => vec![lo + (hi - lo) * rng.random::<f64>()],
            Component::Mix { weights, parts } => {
                let idx = WeightedIndex::new(weights)
                    .expect("validated weights")
                    .sample(rng);
                parts[idx].sample(rng)
            }
        }
    }

    /// Density at `x`. The caller guarantees `x.len() == self.dim()`.
    fn density_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Component::Gaussian { mean, variance } => {
                let d = mean.len() as f64;
                (-sq_dist(x, mean) / (2.0 * variance)).exp() / (2.0 * PI * variance).powf(d / 2.0)
            }
            Component::Uniform { lo, hi } => {
                if x[0] >= *lo && x[0] <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Component::Mix { weights, parts } => weights
                .iter()
                .zip(parts)
                .map(|(w, p)| w * p.density_unchecked(x))
                .sum(),
        }
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.density_unchecked(x))
    }

    /// Shifts the component by `offset` in every coordinate.
    pub fn translated(&self, offset: f64) -> Component {
        match self {
            Component::Gaussian { mean, variance } => Component::Gaussian {
                mean: mean.iter().map(|m| m + offset).collect(),
                variance: *variance,
            },
            Component::Uniform { lo, hi } => Component::Uniform {
                lo: lo + offset,
                hi: hi + offset,
            },
            Component::Mix { weights, parts } => Component::Mix {
                weights: weights.clone(),
                parts: parts.iter().map(|p| p.translated(offset)).collect(),
            },
        }
    }

    /// Mean of the first coordinate.
    pub fn center(&self) -> f64 {
        match self {
            Component::Gaussian { mean, .. } => mean[0],
            Component::Uniform { lo, hi } => 0.5 * (lo + hi),
            Component::Mix { weights, parts } => {
                weights.iter().zip(parts).map(|(w, p)| w * p.center()).sum()
            }
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

const QUAD_RULE_POINTS: usize = 64;
const QUAD_TOL: f64 = 1e-9;
const QUAD_MAX_PANELS: usize = 64;

fn converged(prev: f64, next: f64) -> bool {
    (next - prev).abs() <= (QUAD_TOL * next.abs()).max(1e-16)
}

/// Doubles panel counts until two successive estimates agree.
fn adaptive(mut estimate: impl FnMut(usize) -> f64) -> Result<f64> {
    let mut panels = 1;
    let mut prev = estimate(panels);
    loop {
        panels *= 2;
        let next = estimate(panels);
        if converged(prev, next) {
            return Ok(next);
        }
        if panels >= QUAD_MAX_PANELS {
            return Err(Error::QuadratureNonConvergence {
                tol: QUAD_TOL,
                last_change: (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE),
            });
        }
        prev = next;
    }
}

fn uniform_uniform_inner(a: (f64, f64), b: (f64, f64), zeta: f64) -> Result<f64> {
    let rule = gauss_legendre(QUAD_RULE_POINTS);
    let norm = (a.1 - a.0) * (b.1 - b.0);
    adaptive(|panels| {
        let xs = composite_nodes(a.0, a.1, panels, &rule);
        let ys = composite_nodes(b.0, b.1, panels, &rule);
        let mut total = 0.0;
        for &(x, wx) in &xs {
            let mut row = 0.0;
            for &(y, wy) in &ys {
                row += wy * (-(x - y) * (x - y) / zeta).exp();
            }
            total += wx * row;
        }
        total / norm
    })
}

fn gaussian_uniform_inner(mean: f64, variance: f64, u: (f64, f64), zeta: f64) -> Result<f64> {
    let rule = gauss_legendre(QUAD_RULE_POINTS);
    let width = zeta + 2.0 * variance;
    let scale = (zeta / width).sqrt();
    adaptive(|panels| {
        let total: f64 = composite_nodes(u.0, u.1, panels, &rule)
            .iter()
            .map(|&(y, w)| w * (-(y - mean) * (y - mean) / width).exp())
            .sum();
        scale * total / (u.1 - u.0)
    })
}

/// RKHS inner product of the mean embeddings of `a` and `b` under the
/// Gaussian kernel of bandwidth `zeta`: `E k(X, Y)` with `X ~ a`, `Y ~ b`.
pub fn embedding_inner(a: &Component, b: &Component, zeta: f64) -> Result<f64> {
    check_bandwidth(zeta)?;
    check_dim(a.dim(), b.dim())?;
    // A fixed argument order makes the result bitwise symmetric.
    match structural_cmp(a, b) {
        Ordering::Greater => inner_unchecked(b, a, zeta),
        _ => inner_unchecked(a, b, zeta),
    }
}

/// Arbitrary but total order on components, used only to orient pairs.
pub(crate) fn structural_cmp(a: &Component, b: &Component) -> Ordering {
    use Component::*;
    let rank = |c: &Component| match c {
        Gaussian { .. } => 0,
        Uniform { .. } => 1,
        Mix { .. } => 2,
    };
    let floats = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(x.len().cmp(&y.len()))
    };
    match (a, b) {
        (
            Gaussian {
                mean: m1,
                variance: v1,
            },
            Gaussian {
                mean: m2,
                variance: v2,
            },
        ) => floats(m1, m2).then(v1.total_cmp(v2)),
        (Uniform { lo: a0, hi: a1 }, Uniform { lo: b0, hi: b1 }) => {
            a0.total_cmp(b0).then(a1.total_cmp(b1))
        }
        (
            Mix {
                weights: w1,
                parts: p1,
            },
            Mix {
                weights: w2,
                parts: p2,
            },
        ) => floats(w1, w2).then_with(|| {
            p1.iter()
                .zip(p2)
                .map(|(x, y)| structural_cmp(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(p1.len().cmp(&p2.len()))
        }),
        _ => rank(a).cmp(&rank(b)),
    }
}

fn inner_unchecked(a: &Component, b: &Component, zeta: f64) -> Result<f64> {
    use Component::*;
    match (a, b) {
        (
            Gaussian {
                mean: m1,
                variance: v1,
            },
            Gaussian {
                mean: m2,
                variance: v2,
            },
        ) => {
            let width = zeta + 2.0 * v1 + 2.0 * v2;
            let d = m1.len() as f64;
            Ok((zeta / width).powf(d / 2.0) * (-sq_dist(m1, m2) / width).exp())
        }
        (Uniform { lo: a0, hi: a1 }, Uniform { lo: b0, hi: b1 }) => {
            uniform_uniform_inner((*a0, *a1), (*b0, *b1), zeta)
        }
        (Gaussian { mean, variance }, Uniform { lo, hi })
        | (Uniform { lo, hi }, Gaussian { mean, variance }) => {
            gaussian_uniform_inner(mean[0], *variance, (*lo, *hi), zeta)
        }
        (Mix { weights, parts }, other) | (other, Mix { weights, parts }) => {
            let mut total = 0.0;
            for (w, p) in weights.iter().zip(parts) {
                total += w * inner_unchecked(p, other, zeta)?;
            }
            Ok(total)
        }
    }
}

/// Squared MMD between two components from the three inner products.
pub fn component_mmd_sq(a: &Component, b: &Component, zeta: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let aa = embedding_inner(a, a, zeta)?;
    let bb = embedding_inner(b, b, zeta)?;
    let ab = embedding_inner(a, b, zeta)?;
    Ok((aa + bb - 2.0 * ab).max(0.0))
}

/// MMD between two components under the Gaussian kernel of bandwidth `zeta`.
pub fn component_mmd(a: &Component, b: &Component, zeta: f64) -> Result<f64> {
    component_mmd_sq(a, b, zeta).map(f64::sqrt)
}

/// A discrete measure over component distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixingMeasure")]
pub struct MixingMeasure {
    weights: Vec<f64>,
    components: Vec<Component>,
}

#[derive(Deserialize)]
struct RawMixingMeasure {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl TryFrom<RawMixingMeasure> for MixingMeasure {
    type Error = Error;

    fn try_from(raw: RawMixingMeasure) -> Result<Self> {
        MixingMeasure::new(raw.weights, raw.components)
    }
}

/// Bayes label with a flag recording whether the maximum was shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BayesLabel {
    pub label: usize,
    pub tie: bool,
}

/// Points with the component label each was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: Array2<f64>,
    pub planted: Partition,
    pub seed: u64,
}

impl MixingMeasure {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        check_weights(&weights)?;
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `lambda_k f_k(x)` for every component.
    pub fn weighted_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.density_unchecked(x))
            .collect())
    }

    /// Mixture density `f(x) = sum_k lambda_k f_k(x)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.weighted_densities(x)?.iter().sum())
    }

    pub fn bayes_label(&self, x: &[f64]) -> Result<BayesLabel> {
        argmax_with_tie(&self.weighted_densities(x)?)
    }

    /// Membership in the exceptional set: some pair of weighted component
    /// densities differs by at most `t` at `x`.
    pub fn exceptional_member(&self, x: &[f64], t: f64) -> Result<bool> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be >= 0, got {t}"
            )));
        }
        let vals = self.weighted_densities(x)?;
        for a in 0..vals.len() {
            for b in a + 1..vals.len() {
                if (vals[a] - vals[b]).abs() <= t {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Draws `n` points: a label from the weights, then a point from that
    /// component. Deterministic in `seed`.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledSample> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picker = WeightedIndex::new(&self.weights).expect("validated weights");
        let d = self.dim();
        let mut points = Array2::<f64>::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let k = picker.sample(&mut rng);
            let x = self.components[k].sample(&mut rng);
            points.row_mut(i).assign(&ndarray::ArrayView1::from(&x));
            labels.push(k);
        }
        Ok(LabeledSample {
            points,
            planted: Partition::new(labels, self.k())?,
            seed,
        })
    }

    /// The same measure with component `k` translated so its center sits at
    /// `factor` times the original center.
    pub fn with_scaled_centers(&self, factor: f64) -> MixingMeasure {
        let components = self
            .components
            .iter()
            .map(|c| c.translated((factor - 1.0) * c.center()))
            .collect();
        MixingMeasure {
            weights: self.weights.clone(),
            components,
        }
    }
}

/// Index of the maximum, lowest index on ties. Errors when every value is 0.
pub(crate) fn argmax_with_tie(values: &[f64]) -> Result<BayesLabel> {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    if values[best] <= 0.0 {
        return Err(Error::UnsupportedPoint);
    }
    let tie = values
        .iter()
        .enumerate()
        .any(|(k, v)| k != best && *v == values[best]);
    Ok(BayesLabel { label: best, tie })
}
