//! Gaussian-kernel clustering of samples from non-parametric mixtures.
//!
//! A Gram matrix at bandwidth `eta = 4 beta^2 + zeta` describes, entry by
//! entry, the MMD (under the kernel of bandwidth `zeta`) between the Gaussian
//! KDE components `N(x_i, beta^2 I)` of the sample. The clustering
//! algorithms here work on the Gram matrix alone; the diagnostics, estimation
//! and counterexample modules read the same quantities as distances between
//! distributions.

pub mod clustering;
pub mod counterexamples;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod kde;
pub mod kernel;
pub mod mixtures;
pub mod numeric;
pub mod partition;
pub mod transport;

pub use error::{Error, Result};
pub use kernel::{BandwidthSplit, KernelMatrix};
pub use mixtures::{Component, LabeledSample, MixingMeasure};
pub use partition::Partition;
