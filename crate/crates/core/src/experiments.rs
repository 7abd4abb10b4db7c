//! Seeded trial batteries and parameter sweeps, producing one row of metrics
//! per (seed, parameter value).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    ffk_all_first_centers, kcenter, linkage, run_algorithm, Algorithm, FarthestRule, KcenterMode,
    Linkage,
};
use crate::counterexamples::{
    run_impossibility_trial, run_necessity_trial, Thm1Params, Thm3Params,
};
use crate::diagnostics::{check_sufficient, partition_agreement, separation_stats};
use crate::error::{Error, Result};
use crate::estimation::{bayes_agreement_scan, estimate_mixing_measure, wasserstein};
use crate::kde::{default_bandwidth, padded_range_grid};
use crate::kernel::{kernel_matrix, BandwidthSplit};
use crate::mixtures::{Component, MixingMeasure};
use crate::numeric::{fmt_f64, median};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Thm1,
    Thm3,
    Recovery,
    Bayes,
    Estimation,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Thm1,
        Experiment::Thm3,
        Experiment::Recovery,
        Experiment::Bayes,
        Experiment::Estimation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Thm1 => "thm1",
            Experiment::Thm3 => "thm3",
            Experiment::Recovery => "recovery",
            Experiment::Bayes => "bayes",
            Experiment::Estimation => "estimation",
        }
    }

    /// Metric columns of this experiment's rows, in order. Indicators are
    /// stored as 0 or 1 so their mean is a rate.
    pub fn metric_names(&self) -> &'static [&'static str] {
        match self {
            Experiment::Thm1 => &["planted_obj", "alternative_obj", "kmeans_failed"],
            Experiment::Thm3 => &["ffk_failed_fraction", "lnk_failed"],
            Experiment::Recovery => &[
                "min_pair_mmd",
                "max_radius",
                "max_diameter",
                "ratio",
                "epsilon_margin",
                "sufficient",
                "ctr_agreement",
                "ffk_failed_fraction",
                "lnk_agreement",
            ],
            Experiment::Bayes => &["bayes_agreement", "cluster_agreement"],
            Experiment::Estimation => &["wasserstein", "cluster_agreement"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    Beta,
    Zeta,
    Separation,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::Beta => "beta",
            SweepAxis::Zeta => "zeta",
            SweepAxis::Separation => "separation",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => SweepAxis::N,
            "beta" => SweepAxis::Beta,
            "zeta" => SweepAxis::Zeta,
            "separation" => SweepAxis::Separation,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown sweep axis `{other}`"
                )))
            }
        })
    }
}

/// Two tight Gaussian blobs at -10 and 10 with equal weights.
pub fn separated_blobs() -> MixingMeasure {
    let blob = |m: f64| Component::gaussian(vec![m], 0.01).expect("valid blob");
    MixingMeasure::new(vec![0.5, 0.5], vec![blob(-10.0), blob(10.0)]).expect("valid blobs")
}

fn default_n() -> usize {
    400
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_t() -> f64 {
    0.05
}

fn default_grid() -> usize {
    512
}

fn default_algorithm() -> Algorithm {
    Algorithm::LnkSingle
}

/// Settings shared by all experiments. `beta = None` selects the default
/// bandwidth for the sample size; `zeta = None` keeps each construction's own
/// value (1 for the recovery mixture). `separation` is D for thm1, K_off for
/// thm3 and a center scaling factor for the other experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub zeta: Option<f64>,
    #[serde(default)]
    pub separation: Option<f64>,
    /// Margin for the sufficient separation check.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Exceptional-set threshold of the Bayes scan.
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Clustering used by the bayes and estimation experiments.
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub thm1: Thm1Params,
    #[serde(default)]
    pub thm3: Thm3Params,
    #[serde(default = "separated_blobs")]
    pub mixture: MixingMeasure,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: default_n(),
            beta: None,
            zeta: None,
            separation: None,
            epsilon: default_epsilon(),
            t: default_t(),
            grid_points: default_grid(),
            algorithm: default_algorithm(),
            thm1: Thm1Params::default(),
            thm3: Thm3Params::default(),
            mixture: separated_blobs(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        for v in [self.beta, self.zeta].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveBandwidth(v));
            }
        }
        if let Some(s) = self.separation {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "separation must be positive, got {s}"
                )));
            }
        }
        if !(self.epsilon > 0.0) || !(self.t > 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon and t must be positive".into(),
            ));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidParameter("grid_points must be >= 1".into()));
        }
        Ok(())
    }

    /// The configuration with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match axis {
            SweepAxis::N => {
                if !(value >= 2.0 && value.fract() == 0.0 && value <= 1e9) {
                    return Err(Error::InvalidParameter(format!(
                        "sample size must be an integer >= 2, got {value}"
                    )));
                }
                c.n = value as usize;
            }
            SweepAxis::Beta => c.beta = Some(value),
            SweepAxis::Zeta => c.zeta = Some(value),
            SweepAxis::Separation => c.separation = Some(value),
        }
        c.validate()?;
        Ok(c)
    }

    pub fn resolved_beta(&self, dim: usize) -> Result<f64> {
        match self.beta {
            Some(b) => Ok(b),
            None => default_bandwidth(self.n, dim),
        }
    }

    fn thm1_params(&self) -> Result<Thm1Params> {
        let p = self.thm1;
        Thm1Params::new(
            p.r,
            p.eps,
            self.separation.unwrap_or(p.d),
            p.lambda2,
            self.zeta.unwrap_or(p.zeta),
        )
    }

    fn thm3_params(&self) -> Result<Thm3Params> {
        let p = self.thm3;
        Thm3Params::new(
            p.r,
            self.separation.unwrap_or(p.k_off),
            p.eps,
            self.zeta.unwrap_or(p.zeta),
        )
    }

    fn mixture_scaled(&self) -> MixingMeasure {
        match self.separation {
            Some(s) => self.mixture.with_scaled_centers(s),
            None => self.mixture.clone(),
        }
    }
}

/// One trial's parameters and metrics. `separation` reports the effective
/// separation parameter of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub seed: u64,
    pub n: usize,
    pub beta: f64,
    pub zeta: f64,
    pub separation: f64,
    pub metrics: Vec<f64>,
}

impl ResultRow {
    pub fn csv_header(experiment: Experiment) -> String {
        let mut cols = vec!["experiment", "seed", "n", "beta", "zeta", "separation"];
        cols.extend_from_slice(experiment.metric_names());
        cols.join(",")
    }

    pub fn csv_line(&self) -> String {
        let mut fields = vec![
            self.experiment.name().to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            fmt_f64(self.beta),
            fmt_f64(self.zeta),
            fmt_f64(self.separation),
        ];
        fields.extend(self.metrics.iter().map(|&m| fmt_f64(m)));
        fields.join(",")
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        let idx = self
            .experiment
            .metric_names()
            .iter()
            .position(|m| *m == name)?;
        self.metrics.get(idx).copied()
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Runs one trial of `experiment` at `seed`.
pub fn run_trial(experiment: Experiment, cfg: &ExperimentConfig, seed: u64) -> Result<ResultRow> {
    cfg.validate()?;
    let n = cfg.n;
    let beta = cfg.resolved_beta(1)?;
    let row = |zeta: f64, separation: f64, metrics: Vec<f64>| ResultRow {
        experiment,
        seed,
        n,
        beta,
        zeta,
        separation,
        metrics,
    };
    match experiment {
        Experiment::Thm1 => {
            let p = cfg.thm1_params()?;
            let t = run_impossibility_trial(&p, n, beta, seed)?;
            Ok(row(
                p.zeta,
                p.d,
                vec![t.planted_obj, t.alternative_obj, indicator(t.kmeans_failed)],
            ))
        }
        Experiment::Thm3 => {
            let p = cfg.thm3_params()?;
            let t = run_necessity_trial(&p, n, beta, seed)?;
            Ok(row(
                p.zeta,
                p.k_off,
                vec![t.ffk_failed_fraction, indicator(t.lnk_failed)],
            ))
        }
        Experiment::Recovery | Experiment::Bayes | Experiment::Estimation => {
            let lam = cfg.mixture_scaled();
            let zeta = cfg.zeta.unwrap_or(1.0);
            let beta = cfg.resolved_beta(lam.dim())?;
            let bw = BandwidthSplit::new(beta, zeta, lam.dim())?;
            let sample = lam.sample_labeled(n, seed)?;
            if let Some(k) = sample.planted.first_empty() {
                return Err(Error::VoidTrial(format!(
                    "component {k} drew no sample points"
                )));
            }
            let g = kernel_matrix(sample.points.view(), bw.eta())?;
            let k = lam.k();
            let metrics = match experiment {
                Experiment::Recovery => {
                    let rep = separation_stats(&sample, &lam, &bw)?;
                    let ctr = kcenter(&g, k, &bw, KcenterMode::Heuristic, seed)?;
                    let ffk_runs = ffk_all_first_centers(&g, k, &bw, FarthestRule::MinDistance)?;
                    let mut ffk_failed = 0usize;
                    for p in &ffk_runs {
                        if partition_agreement(p, &sample.planted)? < 1.0 {
                            ffk_failed += 1;
                        }
                    }
                    let lnk = linkage(&g, k, &bw, Linkage::Single)?;
                    vec![
                        rep.min_pair_mmd,
                        rep.max_radius,
                        rep.max_diameter,
                        rep.ratio,
                        rep.epsilon_margin,
                        indicator(check_sufficient(&rep, cfg.epsilon)),
                        partition_agreement(&ctr.partition, &sample.planted)?,
                        ffk_failed as f64 / ffk_runs.len() as f64,
                        partition_agreement(&lnk.partition, &sample.planted)?,
                    ]
                }
                _ => {
                    let fit = run_algorithm(&g, k, &bw, cfg.algorithm, seed)?;
                    let est = estimate_mixing_measure(sample.points.view(), &fit.partition, beta)?;
                    let cluster_agreement = partition_agreement(&fit.partition, &sample.planted)?;
                    if experiment == Experiment::Bayes {
                        if lam.dim() != 1 {
                            return Err(Error::InvalidParameter(
                                "the bayes scan grid is one-dimensional".into(),
                            ));
                        }
                        let grid = padded_range_grid(sample.points.view(), beta, cfg.grid_points);
                        let agreement =
                            bayes_agreement_scan(&est, &lam, sample.points.view(), &grid, cfg.t)?;
                        vec![agreement, cluster_agreement]
                    } else {
                        let fitted = est.to_mixing_measure(sample.points.view())?;
                        vec![wasserstein(&fitted, &lam, zeta)?, cluster_agreement]
                    }
                }
            };
            Ok(ResultRow {
                beta,
                ..row(zeta, cfg.separation.unwrap_or(1.0), metrics)
            })
        }
    }
}

/// Rows of a battery plus the seeds whose trials were void.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Battery {
    pub rows: Vec<ResultRow>,
    pub void: Vec<(u64, f64)>,
}

fn run_seeds(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    tag: f64,
) -> Result<Battery> {
    let outcomes: Vec<Result<ResultRow>> = seeds
        .par_iter()
        .map(|&s| run_trial(experiment, cfg, s))
        .collect();
    let mut battery = Battery::default();
    for (outcome, &seed) in outcomes.into_iter().zip(seeds) {
        match outcome {
            Ok(row) => battery.rows.push(row),
            Err(Error::VoidTrial(_)) => battery.void.push((seed, tag)),
            Err(e) => return Err(e),
        }
    }
    Ok(battery)
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    Ok(())
}

/// Runs `experiment` for every seed in parallel. Rows come back sorted by
/// seed; void trials are reported separately instead of failing the run.
pub fn run_experiment(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Battery> {
    require_seeds(seeds)?;
    cfg.validate()?;
    let mut b = run_seeds(experiment, cfg, seeds, f64::NAN)?;
    b.rows.sort_by_key(|r| r.seed);
    b.void.sort_by_key(|v| v.0);
    Ok(b)
}

/// Runs `experiment` for every (axis value, seed) pair. Rows are sorted by
/// seed and then by axis value.
pub fn run_sweep(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<Battery> {
    require_seeds(seeds)?;
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no values given for sweep axis {}",
            axis.name()
        )));
    }
    let configs = values
        .iter()
        .map(|&v| cfg.with_axis(axis, v))
        .collect::<Result<Vec<_>>>()?;
    let mut keyed = Vec::new();
    let mut void = Vec::new();
    for (c, &v) in configs.iter().zip(values) {
        let b = run_seeds(experiment, c, seeds, v)?;
        keyed.extend(b.rows.into_iter().map(|r| (v, r)));
        void.extend(b.void);
    }
    keyed.sort_by(|a, b| a.1.seed.cmp(&b.1.seed).then(a.0.total_cmp(&b.0)));
    void.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(Battery {
        rows: keyed.into_iter().map(|(_, r)| r).collect(),
        void,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: &'static str,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Aggregate of the rows sharing one axis value (or of a whole battery).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub axis_value: Option<f64>,
    pub trials: usize,
    pub metrics: Vec<MetricSummary>,
}

fn summarize_rows(
    experiment: Experiment,
    rows: &[&ResultRow],
    axis_value: Option<f64>,
) -> GroupSummary {
    let metrics = experiment
        .metric_names()
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let v: Vec<f64> = rows.iter().map(|r| r.metrics[i]).collect();
            MetricSummary {
                name,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                median: median(&v),
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    GroupSummary {
        axis_value,
        trials: rows.len(),
        metrics,
    }
}

pub fn summarize(experiment: Experiment, rows: &[ResultRow]) -> GroupSummary {
    summarize_rows(experiment, &rows.iter().collect::<Vec<_>>(), None)
}

/// One summary per axis value, in the order given.
pub fn summarize_sweep(
    experiment: Experiment,
    axis: SweepAxis,
    values: &[f64],
    rows: &[ResultRow],
) -> Vec<GroupSummary> {
    values
        .iter()
        .map(|&v| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| axis_value(axis, r) == v).collect();
            summarize_rows(experiment, &group, Some(v))
        })
        .collect()
}

/// The value of `axis` recorded in a row.
pub fn axis_value(axis: SweepAxis, row: &ResultRow) -> f64 {
    match axis {
        SweepAxis::N => row.n as f64,
        SweepAxis::Beta => row.beta,
        SweepAxis::Zeta => row.zeta,
        SweepAxis::Separation => row.separation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 120,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("thm2".parse::<Experiment>().is_err());
        assert!("width".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn rows_match_their_header() {
        for e in Experiment::ALL {
            let row = run_trial(e, &small(), 3).unwrap();
            let header = ResultRow::csv_header(e);
            assert_eq!(
                header.split(',').count(),
                row.csv_line().split(',').count(),
                "{e}"
            );
        }
    }

    #[test]
    fn battery_is_deterministic_and_sorted() {
        let seeds = [5, 1, 3];
        let a = run_experiment(Experiment::Thm3, &small(), &seeds).unwrap();
        let b = run_experiment(Experiment::Thm3, &small(), &seeds).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![1, 3, 5]
        );
        assert!(run_experiment(Experiment::Thm3, &small(), &[]).is_err());
    }

    #[test]
    fn single_value_sweep_matches_experiment() {
        let cfg = small();
        let seeds = [0, 1];
        let plain = run_experiment(Experiment::Recovery, &cfg, &seeds).unwrap();
        let swept = run_sweep(Experiment::Recovery, &cfg, SweepAxis::N, &[120.0], &seeds).unwrap();
        assert_eq!(plain.rows, swept.rows);
    }

    #[test]
    fn sweep_rejects_bad_values() {
        let cfg = small();
        assert!(run_sweep(Experiment::Thm1, &cfg, SweepAxis::Beta, &[0.3, -1.0], &[0]).is_err());
        assert!(run_sweep(Experiment::Thm1, &cfg, SweepAxis::Beta, &[], &[0]).is_err());
        assert!(run_sweep(Experiment::Thm1, &cfg, SweepAxis::N, &[10.5], &[0]).is_err());
    }

    #[test]
    fn separation_axis_meaning() {
        let cfg = ExperimentConfig::default();
        let r1 = run_trial(
            Experiment::Thm1,
            &cfg.with_axis(SweepAxis::Separation, 30.0).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(r1.separation, 30.0);
        let r3 = run_trial(
            Experiment::Thm3,
            &cfg.with_axis(SweepAxis::Separation, 0.15).unwrap(),
            0,
        )
        .unwrap();
        assert_eq!(r3.separation, 0.15);
        // K_off of 0.04 breaks the required ordering 2 K > 16 eps.
        let bad = cfg.with_axis(SweepAxis::Separation, 0.04).unwrap();
        assert!(run_trial(Experiment::Thm3, &bad, 0).is_err());
    }

    #[test]
    fn tiny_thm1_trials_are_void() {
        let cfg = ExperimentConfig {
            n: 3,
            ..ExperimentConfig::default()
        };
        let b = run_experiment(Experiment::Thm1, &cfg, &[0, 1, 2]).unwrap();
        assert_eq!(b.rows.len() + b.void.len(), 3);
        assert!(!b.void.is_empty());
    }

    #[test]
    fn summary_aggregates() {
        let b = run_experiment(Experiment::Thm3, &small(), &[0, 1, 2, 3]).unwrap();
        let s = summarize(Experiment::Thm3, &b.rows);
        assert_eq!(s.trials, 4);
        let lnk = &s.metrics[1];
        assert_eq!(lnk.name, "lnk_failed");
        assert!((0.0..=1.0).contains(&lnk.mean));
        let sweep = run_sweep(
            Experiment::Thm3,
            &small(),
            SweepAxis::N,
            &[100.0, 120.0],
            &[0, 1],
        )
        .unwrap();
        let groups = summarize_sweep(Experiment::Thm3, SweepAxis::N, &[100.0, 120.0], &sweep.rows);
        assert_eq!(
            groups.iter().map(|g| g.trials).collect::<Vec<_>>(),
            vec![2, 2]
        );
    }

    #[test]
    fn config_parses_from_toml() {
        let cfg: ExperimentConfig = toml::from_str(
            "n = 200\nbeta = 0.3\nalgorithm = \"ctr\"\n[thm3]\nr = 0.5\nK_off = 0.15\neps = 0.01\nzeta = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 200);
        assert_eq!(cfg.algorithm, Algorithm::Ctr);
        assert_eq!(cfg.thm3.k_off, 0.15);
        assert_eq!(cfg.thm1, Thm1Params::default());
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }
}
