//! Config file format and resolution of config values against flags.

use std::path::{Path, PathBuf};

use kernclust::counterexamples::{Thm1Params, Thm3Params};
use kernclust::experiments::ExperimentConfig;
use kernclust::mixtures::MixingMeasure;
use serde::Deserialize;

use crate::error::CliError;

/// Either a fixed bandwidth or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl BetaSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        if s == "auto" {
            return Ok(BetaSpec::Auto(AutoKeyword::Auto));
        }
        s.parse()
            .map(BetaSpec::Value)
            .map_err(|_| CliError::config(format!("beta must be a number or `auto`, got `{s}`")))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            BetaSpec::Value(v) => Some(v),
            BetaSpec::Auto(_) => None,
        }
    }
}

/// Keys accepted in a `--config` TOML file. All are optional; command-line
/// flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub algorithm: Option<String>,
    pub beta: Option<BetaSpec>,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub trials: Option<u64>,
    pub threads: Option<usize>,
    pub restarts: Option<usize>,
    pub exact: Option<bool>,
    pub experiment: Option<String>,
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub separation: Option<f64>,
    pub epsilon: Option<f64>,
    pub t: Option<f64>,
    pub grid_points: Option<usize>,
    pub thm1: Option<Thm1Params>,
    pub thm3: Option<Thm3Params>,
    pub mixture: Option<MixingMeasure>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Shared settings for the experiment and sweep commands.
    pub fn experiment_config(
        &self,
        beta: Option<BetaSpec>,
        zeta: Option<f64>,
        n: Option<usize>,
    ) -> ExperimentConfig {
        let base = ExperimentConfig::default();
        ExperimentConfig {
            n: n.or(self.n).unwrap_or(base.n),
            beta: beta.or(self.beta).and_then(BetaSpec::value),
            zeta: zeta.or(self.zeta),
            separation: self.separation,
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            t: self.t.unwrap_or(base.t),
            grid_points: self.grid_points.unwrap_or(base.grid_points),
            algorithm: base.algorithm,
            thm1: self.thm1.unwrap_or(base.thm1),
            thm3: self.thm3.unwrap_or(base.thm3),
            mixture: self.mixture.clone().unwrap_or(base.mixture),
        }
    }
}

/// Parses `a..b` (half open), `a..=b` or a comma-separated list.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::config(format!("invalid seed list `{s}`"));
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (b, inclusive) = match b.strip_prefix('=') {
            Some(rest) => (rest, true),
            None => (b, false),
        };
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok(if inclusive {
            (a..=b).collect()
        } else {
            (a..b).collect()
        });
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

pub fn parse_value_list(s: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::config(format!("invalid sweep value `{t}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_list("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seed_list("7, 1,3").unwrap(), vec![7, 1, 3]);
        assert!(parse_seed_list("").unwrap().is_empty());
        assert!(parse_seed_list("a..b").is_err());
    }

    #[test]
    fn beta_spec_in_toml() {
        let c: FileConfig = toml::from_str("beta = \"auto\"").unwrap();
        assert_eq!(c.beta.unwrap().value(), None);
        let c: FileConfig = toml::from_str("beta = 0.25").unwrap();
        assert_eq!(c.beta.unwrap().value(), Some(0.25));
        assert!(toml::from_str::<FileConfig>("beta = \"wide\"").is_err());
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }
}
