use std::io::{self, Write};
use std::path::{Path, PathBuf};

use kernclust::clustering::{
    kcenter, kernel_kmeans, kernel_kmeans_exact, run_algorithm, Algorithm, ClusteringResult,
    KcenterMode,
};
use kernclust::diagnostics::{
    check_sufficient, partition_agreement, separation_stats, SeparationReport,
};
use kernclust::estimation::{estimate_mixing_measure, wasserstein};
use kernclust::experiments::{
    run_experiment, run_sweep, separated_blobs, summarize, summarize_sweep, Battery, Experiment,
    ExperimentConfig, GroupSummary, ResultRow, SweepAxis,
};
use kernclust::kde::default_bandwidth;
use kernclust::kernel::{kernel_matrix, BandwidthSplit};
use kernclust::numeric::fmt_f64;
use kernclust::{LabeledSample, Partition};

use crate::config::{parse_seed_list, parse_value_list, BetaSpec, FileConfig};
use crate::error::CliError;
use crate::io::{io_error, open_output, read_dataset, write_dataset, Dataset};
use crate::{Bandwidths, BatteryArgs, Cli, ClusterArgs};

pub struct Context {
    pub file: FileConfig,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn new(cli: &Cli, file: FileConfig) -> Self {
        Context {
            seed: cli.seed.or(file.seed),
            out: cli.out.clone().or_else(|| file.out.clone()),
            file,
        }
    }

    fn output(&self) -> Result<Box<dyn Write>, CliError> {
        open_output(self.out.as_deref())
    }

    /// Summaries go to stdout when the main output went to a file.
    fn summary(&self) -> Box<dyn Write> {
        if self.out.is_some() {
            Box::new(io::stdout())
        } else {
            Box::new(io::stderr())
        }
    }

    fn input(&self, flag: Option<&Path>) -> Result<Dataset, CliError> {
        let path = flag
            .map(Path::to_path_buf)
            .or_else(|| self.file.input.clone())
            .ok_or_else(|| CliError::config("no input dataset given (--input)"))?;
        read_dataset(&path)
    }

    fn beta_spec(&self, bw: &Bandwidths) -> Result<Option<BetaSpec>, CliError> {
        match &bw.beta {
            Some(s) => BetaSpec::parse(s).map(Some),
            None => Ok(self.file.beta),
        }
    }

    fn split(&self, bw: &Bandwidths, n: usize, d: usize) -> Result<BandwidthSplit, CliError> {
        let beta = match self.beta_spec(bw)?.and_then(BetaSpec::value) {
            Some(b) => b,
            None => default_bandwidth(n, d)?,
        };
        let zeta = bw.zeta.or(self.file.zeta).unwrap_or(1.0);
        Ok(BandwidthSplit::new(beta, zeta, d)?)
    }

    fn algorithm(&self, flag: Option<&str>) -> Result<Option<Algorithm>, CliError> {
        flag.or(self.file.algorithm.as_deref())
            .map(|s| {
                s.parse()
                    .map_err(|e: kernclust::Error| CliError::config(e.to_string()))
            })
            .transpose()
    }
}

fn cluster_dataset(
    ctx: &Context,
    args: &ClusterArgs,
    data: &Dataset,
    algorithm: Algorithm,
) -> Result<(ClusteringResult, BandwidthSplit), CliError> {
    let k = args
        .k
        .or(ctx.file.k)
        .ok_or_else(|| CliError::config("number of clusters not given (--k)"))?;
    if k == 0 {
        return Err(CliError::config("k must be >= 1"));
    }
    let (n, d) = data.points.dim();
    if k > n {
        return Err(CliError::config(format!(
            "k = {k} exceeds the {n} data points"
        )));
    }
    let bw = ctx.split(&args.bw, n, d)?;
    let seed = ctx.seed.unwrap_or(0);
    let restarts = args.restarts.or(ctx.file.restarts).unwrap_or(10);
    let exact = args.exact || ctx.file.exact.unwrap_or(false);
    let g = kernel_matrix(data.points.view(), bw.eta())?;
    let result = match (algorithm, exact) {
        (Algorithm::Kmn, true) => kernel_kmeans_exact(&g, k, &bw)?,
        (Algorithm::Ctr, true) => kcenter(&g, k, &bw, KcenterMode::Exact, seed)?,
        (_, true) => {
            return Err(CliError::config(format!(
                "--exact is not available for {algorithm}"
            )))
        }
        (Algorithm::Kmn, false) => kernel_kmeans(&g, k, &bw, restarts, seed)?,
        (other, false) => run_algorithm(&g, k, &bw, other, seed)?,
    };
    Ok((result, bw))
}

pub fn cluster(ctx: &Context, args: &ClusterArgs) -> Result<(), CliError> {
    let algorithm = ctx
        .algorithm(args.algorithm.as_deref())?
        .unwrap_or(Algorithm::Kmn);
    let data = ctx.input(args.input.as_deref())?;
    let (result, bw) = cluster_dataset(ctx, args, &data, algorithm)?;
    let mut out = ctx.output()?;
    writeln!(out, "point_id,label").map_err(io_error)?;
    for (i, &l) in result.partition.labels().iter().enumerate() {
        writeln!(out, "{},{}", i + 1, l + 1).map_err(io_error)?;
    }
    out.flush().map_err(io_error)?;

    let mut header = "algorithm,k,n,beta,zeta,objective,iterations,seed".to_string();
    let mut row = format!(
        "{},{},{},{},{},{},{},{}",
        result.algorithm,
        result.partition.k(),
        result.partition.len(),
        fmt_f64(bw.beta()),
        fmt_f64(bw.zeta()),
        fmt_f64(result.objective),
        result.iterations,
        result.seed
    );
    if let Some(planted) = &data.labels {
        header.push_str(",agreement");
        row.push_str(&format!(
            ",{}",
            fmt_f64(partition_agreement(&result.partition, planted)?)
        ));
    }
    let mut s = ctx.summary();
    writeln!(s, "{header}\n{row}").map_err(io_error)
}

pub fn diagnose(
    ctx: &Context,
    input: Option<&Path>,
    bw: &Bandwidths,
    epsilon: Option<f64>,
) -> Result<(), CliError> {
    let data = ctx.input(input)?;
    let planted = data
        .labels
        .clone()
        .ok_or_else(|| CliError::input("diagnose needs a `label` column in the input"))?;
    let lam = ctx.file.mixture.clone().ok_or_else(|| {
        CliError::config("diagnose needs the true mixture in the config ([mixture])")
    })?;
    if lam.k() != planted.k() {
        return Err(CliError::input(format!(
            "input has {} labels but the mixture has {} components",
            planted.k(),
            lam.k()
        )));
    }
    let epsilon = epsilon.or(ctx.file.epsilon).unwrap_or(0.01);
    if !(epsilon > 0.0) {
        return Err(CliError::config("epsilon must be positive"));
    }
    let (n, d) = data.points.dim();
    let split = ctx.split(bw, n, d)?;
    let sample = LabeledSample {
        points: data.points,
        planted,
        seed: 0,
    };
    let report = separation_stats(&sample, &lam, &split)?;
    let mut out = ctx.output()?;
    writeln!(out, "{},epsilon,sufficient", SeparationReport::CSV_HEADER).map_err(io_error)?;
    writeln!(
        out,
        "{},{},{}",
        report.csv_row(),
        fmt_f64(epsilon),
        check_sufficient(&report, epsilon)
    )
    .map_err(io_error)?;
    out.flush().map_err(io_error)
}

pub fn estimate(ctx: &Context, args: &ClusterArgs) -> Result<(), CliError> {
    let data = ctx.input(args.input.as_deref())?;
    let algorithm = ctx.algorithm(args.algorithm.as_deref())?;
    let (n, d) = data.points.dim();
    let (partition, bw, agreement): (Partition, BandwidthSplit, Option<f64>) = match algorithm {
        Some(a) => {
            let (r, bw) = cluster_dataset(ctx, args, &data, a)?;
            let agreement = match &data.labels {
                Some(p) => Some(partition_agreement(&r.partition, p)?),
                None => None,
            };
            (r.partition, bw, agreement)
        }
        None => {
            let p = data.labels.clone().ok_or_else(|| {
                CliError::config("estimate needs --algorithm or a `label` column")
            })?;
            (p, ctx.split(&args.bw, n, d)?, None)
        }
    };
    let est = estimate_mixing_measure(data.points.view(), &partition, bw.beta())?;
    let mut out = ctx.output()?;
    writeln!(out, "cluster,weight,size").map_err(io_error)?;
    for (k, (w, c)) in est.weights.iter().zip(&est.clusters).enumerate() {
        writeln!(out, "{},{},{}", k + 1, fmt_f64(*w), c.len()).map_err(io_error)?;
    }
    out.flush().map_err(io_error)?;

    let mut header = "k,n,beta,zeta".to_string();
    let mut row = format!(
        "{},{},{},{}",
        est.k(),
        n,
        fmt_f64(bw.beta()),
        fmt_f64(bw.zeta())
    );
    if let Some(truth) = &ctx.file.mixture {
        let fitted = est.to_mixing_measure(data.points.view())?;
        header.push_str(",wasserstein");
        row.push_str(&format!(
            ",{}",
            fmt_f64(wasserstein(&fitted, truth, bw.zeta())?)
        ));
    }
    if let Some(a) = agreement {
        header.push_str(",agreement");
        row.push_str(&format!(",{}", fmt_f64(a)));
    }
    let mut s = ctx.summary();
    writeln!(s, "{header}\n{row}").map_err(io_error)
}

struct BatterySetup {
    experiment: Experiment,
    cfg: ExperimentConfig,
    seeds: Vec<u64>,
}

fn battery_setup(ctx: &Context, args: &BatteryArgs) -> Result<BatterySetup, CliError> {
    let name = args
        .name
        .as_deref()
        .or(ctx.file.experiment.as_deref())
        .ok_or_else(|| CliError::config("no experiment name given (--name)"))?;
    let experiment: Experiment = name
        .parse()
        .map_err(|e: kernclust::Error| CliError::config(e.to_string()))?;
    let seeds = match (&args.seeds, &ctx.file.seeds) {
        (Some(s), _) => parse_seed_list(s)?,
        (None, Some(list)) => list.clone(),
        (None, None) => {
            let first = ctx.seed.unwrap_or(0);
            let trials = args.trials.or(ctx.file.trials).unwrap_or(10);
            (first..first.saturating_add(trials)).collect()
        }
    };
    if seeds.is_empty() {
        return Err(CliError::config("the seed list is empty"));
    }
    let mut cfg = ctx
        .file
        .experiment_config(ctx.beta_spec(&args.bw)?, args.bw.zeta, args.n);
    if let Some(a) = ctx.algorithm(None)? {
        cfg.algorithm = a;
    }
    cfg.validate()?;
    Ok(BatterySetup {
        experiment,
        cfg,
        seeds,
    })
}

fn write_rows(ctx: &Context, experiment: Experiment, battery: &Battery) -> Result<(), CliError> {
    let mut out = ctx.output()?;
    writeln!(out, "{}", ResultRow::csv_header(experiment)).map_err(io_error)?;
    for row in &battery.rows {
        writeln!(out, "{}", row.csv_line()).map_err(io_error)?;
    }
    out.flush().map_err(io_error)
}

fn write_summary(
    out: &mut dyn Write,
    experiment: Experiment,
    axis: Option<SweepAxis>,
    groups: &[GroupSummary],
    void: &[(u64, f64)],
) -> io::Result<()> {
    let axis_name = axis.map(|a| a.name()).unwrap_or("");
    writeln!(
        out,
        "experiment,axis,value,trials,void,metric,mean,median,min,max"
    )?;
    for g in groups {
        let value = g.axis_value.map(fmt_f64).unwrap_or_default();
        let voids = void
            .iter()
            .filter(|(_, v)| g.axis_value.is_none_or(|gv| gv == *v))
            .count();
        for m in &g.metrics {
            writeln!(
                out,
                "{experiment},{axis_name},{value},{},{voids},{},{},{},{},{}",
                g.trials,
                m.name,
                fmt_f64(m.mean),
                fmt_f64(m.median),
                fmt_f64(m.min),
                fmt_f64(m.max)
            )?;
        }
    }
    Ok(())
}

pub fn experiment(ctx: &Context, args: &BatteryArgs) -> Result<(), CliError> {
    let setup = battery_setup(ctx, args)?;
    let battery = run_experiment(setup.experiment, &setup.cfg, &setup.seeds)?;
    write_rows(ctx, setup.experiment, &battery)?;
    let groups = vec![summarize(setup.experiment, &battery.rows)];
    write_summary(
        &mut *ctx.summary(),
        setup.experiment,
        None,
        &groups,
        &battery.void,
    )
    .map_err(io_error)
}

pub fn sweep(
    ctx: &Context,
    args: &BatteryArgs,
    axis: Option<&str>,
    values: Option<&str>,
) -> Result<(), CliError> {
    let setup = battery_setup(ctx, args)?;
    let axis: SweepAxis = axis
        .or(ctx.file.axis.as_deref())
        .ok_or_else(|| CliError::config("no sweep axis given (--axis)"))?
        .parse()
        .map_err(|e: kernclust::Error| CliError::config(e.to_string()))?;
    let values = match values {
        Some(v) => parse_value_list(v)?,
        None => ctx.file.values.clone().unwrap_or_default(),
    };
    if values.is_empty() {
        return Err(CliError::config("no sweep values given (--values)"));
    }
    let battery = run_sweep(setup.experiment, &setup.cfg, axis, &values, &setup.seeds)?;
    write_rows(ctx, setup.experiment, &battery)?;
    let groups = summarize_sweep(setup.experiment, axis, &values, &battery.rows);
    write_summary(
        &mut *ctx.summary(),
        setup.experiment,
        Some(axis),
        &groups,
        &battery.void,
    )
    .map_err(io_error)
}

pub fn sample(ctx: &Context, n: Option<usize>) -> Result<(), CliError> {
    let n = n
        .or(ctx.file.n)
        .ok_or_else(|| CliError::config("sample size not given (--n)"))?;
    if n == 0 {
        return Err(CliError::config("sample size must be >= 1"));
    }
    let lam = ctx.file.mixture.clone().unwrap_or_else(separated_blobs);
    let s = lam.sample_labeled(n, ctx.seed.unwrap_or(0))?;
    let mut out = ctx.output()?;
    write_dataset(&mut *out, &s.points, Some(&s.planted)).map_err(io_error)?;
    out.flush().map_err(io_error)
}
