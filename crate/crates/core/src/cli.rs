//! Command-line surface. Each `cmd_*` function is callable from library code
//! and returns the [`RunReport`] the binary prints as JSON.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric or degenerate
//! input, 4 I/O.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::baseline::{self, SubsampleOptions};
use crate::cloud::{read_cloud_with, write_cloud, EmbeddingCloud, ReadOptions};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::ranking::{rank_single, rank_vote, Metric, MetricTable};
use crate::report::RunReport;
use crate::sd::{csid, sid_sweep, SweepConfig};
use crate::stats::compute_stats;
use crate::subspace::min_sin_theta;
use crate::synth::{scenario_with, GaussianMixtureSpec, DEFAULT_SAMPLES};

#[derive(Debug, Parser)]
#[command(name = "sidkit", version, about = "Signed distance and baseline metrics between embedding clouds")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label, size, mean norm and σ_q of a cloud.
    Info(InfoArgs),
    /// SD curve over the cube-side grid, plus CSID.
    Sid(SidArgs),
    /// Fréchet distance between Gaussian fits.
    Fid(PairArgs),
    /// Unbiased kernel distance with the cubic polynomial kernel.
    Kid(KidArgs),
    /// Davis-Kahan min-sinΘ bound (second cloud is the target).
    Sintheta(SinThetaArgs),
    /// Mean Laplacian variance of grayscale images.
    Sharpness(SharpnessArgs),
    /// Rank sources for a target from a metric table.
    Rank(RankArgs),
    /// Write a synthetic scenario's clouds as EMB1 files.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV inputs have a header row.
    #[arg(long)]
    pub csv_header: bool,
}

impl InputArgs {
    fn read(&self, path: &Path) -> Result<EmbeddingCloud> {
        read_cloud_with(path, ReadOptions { csv_header: self.csv_header })
    }
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    pub path: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelArgs {
    /// Kernel exponent p; takes precedence over --m/--n.
    #[arg(short = 'p', long = "exponent", allow_hyphen_values = true)]
    pub exponent: Option<i32>,
    /// Polyharmonic order m (p = 2m - n). Defaults to floor(n/2).
    #[arg(long)]
    pub m: Option<u32>,
    /// Dimension n; must match the clouds when given.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

impl KernelArgs {
    pub fn resolve(&self, dim: usize) -> Result<KernelSpec> {
        if let Some(n) = self.n {
            if n != dim {
                return Err(Error::InvalidParameter {
                    name: "n",
                    detail: format!("--n {n} does not match cloud dimension {dim}"),
                });
            }
        }
        let spec = match (self.exponent, self.m) {
            (Some(p), _) => KernelSpec::from_exponent(p, dim)?,
            (None, Some(m)) => KernelSpec::from_order(m, dim)?,
            (None, None) => KernelSpec::half_order(dim)?,
        };
        match self.kappa {
            Some(k) => spec.with_kappa(k),
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SidArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 1.0)]
    pub start: f64,
    #[arg(long, default_value_t = 100.0)]
    pub stop: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Test points per cube side.
    #[arg(long, default_value_t = 128)]
    pub test_points: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Curve CSV destination; the curve is embedded in the report otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
}

impl SidArgs {
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            multiplier_start: self.start,
            multiplier_stop: self.stop,
            multiplier_step: self.step,
            test_points_per_r: self.test_points,
            batch_size: self.batch_size,
            max_samples_per_cloud: self.max_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value_t = baseline::FID_MAX_SAMPLES)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KidArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value_t = baseline::KID_MAX_SAMPLES)]
    pub max_samples: usize,
    #[arg(long, default_value_t = baseline::KID_BLOCK)]
    pub block: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SinThetaArgs {
    pub source: PathBuf,
    pub target: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SharpnessArgs {
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Treat each row as a flattened HxW image, e.g. `28x28`.
    #[arg(long)]
    pub shape: Option<String>,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    /// CSV with columns source,target,metric,value[,excluded,reason].
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Single metric to rank by (fid, kid, csid, min_sin).
    #[arg(long, default_value = "csid", conflicts_with = "vote")]
    pub metric: String,
    /// Comma-separated metrics combined by Borda count.
    #[arg(long, value_delimiter = ',')]
    pub vote: Option<Vec<String>>,
    /// Ranking CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ranking JSON destination.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub count: usize,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_info(args: &InfoArgs) -> Result<RunReport> {
    let cloud = args.input.read(&args.path)?;
    let mut report = RunReport::new("info").input(path_str(&args.path), &cloud);
    let results = if cloud.count() >= 2 {
        let stats = compute_stats(&cloud, false)?;
        json!({
            "label": cloud.label(),
            "count": cloud.count(),
            "dim": cloud.dim(),
            "tags": cloud.tags(),
            "mean_norm": stats.mean.norm(),
            "sigma_q": stats.sigma_q,
        })
    } else {
        let norm = cloud.row(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        json!({
            "label": cloud.label(),
            "count": cloud.count(),
            "dim": cloud.dim(),
            "tags": cloud.tags(),
            "mean_norm": norm,
            "sigma_q": serde_json::Value::Null,
        })
    };
    report.results = results;
    Ok(report)
}

pub fn cmd_sid(args: &SidArgs) -> Result<RunReport> {
    let source = args.input.read(&args.source)?;
    let target = args.input.read(&args.target)?;
    if source.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "source dim {} != target dim {}",
            source.dim(),
            target.dim()
        )));
    }
    let kernel = args.kernel.resolve(target.dim())?;
    let config = args.sweep_config();
    let curve = sid_sweep(&source, &target, &kernel, &config)?;
    let total = csid(&curve);
    if let Some(out) = &args.out {
        curve.write_csv(out)?;
    }
    let mut report = RunReport::new("sid")
        .input(path_str(&args.source), &source)
        .input(path_str(&args.target), &target)
        .param("exponent_p", kernel.exponent())
        .param("order_m", kernel.order_m())
        .param("dim_n", kernel.dim_n())
        .param("branch", kernel.branch())
        .param("kappa", kernel.kappa())
        .param("radius_floor", kernel.radius_floor())
        .param("multiplier_start", config.multiplier_start)
        .param("multiplier_stop", config.multiplier_stop)
        .param("multiplier_step", config.multiplier_step)
        .param("test_points_per_r", config.test_points_per_r)
        .param("batch_size", config.batch_size)
        .param("max_samples_per_cloud", config.max_samples_per_cloud)
        .param("seed", config.seed);
    let mut results = json!({
        "csid": total.value,
        "entries": total.entries,
        "sigma_q": curve.sigma_q,
        "samples_used": curve.samples_used,
    });
    match &args.out {
        Some(out) => results["curve_path"] = json!(path_str(out)),
        None => results["curve"] = serde_json::to_value(&curve.entries).expect("entries serialize"),
    }
    report.results = results;
    Ok(report)
}

pub fn cmd_fid(args: &PairArgs) -> Result<RunReport> {
    let a = args.input.read(&args.a)?;
    let b = args.input.read(&args.b)?;
    let opts = SubsampleOptions {
        max_samples: args.max_samples,
        seed: args.seed,
    };
    let fid = baseline::fid_with(&a, &b, opts)?;
    let mut report = RunReport::new("fid")
        .input(path_str(&args.a), &a)
        .input(path_str(&args.b), &b)
        .param("max_samples", args.max_samples)
        .param("seed", args.seed);
    report.results = serde_json::to_value(fid).expect("fid serializes");
    Ok(report)
}

pub fn cmd_kid(args: &KidArgs) -> Result<RunReport> {
    let a = args.input.read(&args.a)?;
    let b = args.input.read(&args.b)?;
    let opts = SubsampleOptions {
        max_samples: args.max_samples,
        seed: args.seed,
    };
    let kid = baseline::kid_with(&a, &b, opts, args.block)?;
    let mut report = RunReport::new("kid")
        .input(path_str(&args.a), &a)
        .input(path_str(&args.b), &b)
        .param("max_samples", args.max_samples)
        .param("block", args.block)
        .param("seed", args.seed);
    report.results = serde_json::to_value(kid).expect("kid serializes");
    Ok(report)
}

pub fn cmd_sintheta(args: &SinThetaArgs) -> Result<RunReport> {
    let p = args.input.read(&args.source)?;
    let q = args.input.read(&args.target)?;
    let rep = min_sin_theta(&p, &q)?;
    let mut report = RunReport::new("sintheta")
        .input(path_str(&args.source), &p)
        .input(path_str(&args.target), &q)
        .param("fixed_r", rep.fixed_r)
        .param("s_max", crate::subspace::max_subspace(rep.dim_n));
    report.results = serde_json::to_value(&rep).expect("report serializes");
    Ok(report)
}

fn parse_shape(shape: &str) -> Result<(usize, usize)> {
    shape
        .split_once('x')
        .and_then(|(h, w)| Some((h.parse().ok()?, w.parse().ok()?)))
        .filter(|&(h, w)| h > 0 && w > 0)
        .ok_or_else(|| Error::InvalidParameter {
            name: "shape",
            detail: format!("expected HxW, got {shape:?}"),
        })
}

pub fn cmd_sharpness(args: &SharpnessArgs) -> Result<RunReport> {
    let shape = args.shape.as_deref().map(parse_shape).transpose()?;
    let mut report = RunReport::new("sharpness").param("shape", &args.shape);
    let mut images = Vec::new();
    for path in &args.paths {
        let mut cloud = args.input.read(path)?;
        report = report.input(path_str(path), &cloud);
        if let Some((h, w)) = shape {
            let base = cloud.label().split('@').next().unwrap_or("image").to_string();
            cloud = cloud.relabeled(format!("{base}@{h}x{w}"))?;
        }
        images.extend(baseline::images_from_cloud(&cloud)?);
    }
    let value = baseline::sharpness(&images)?;
    report.results = json!({ "sharpness": value, "images": images.len() });
    Ok(report)
}

pub fn cmd_rank(args: &RankArgs) -> Result<RunReport> {
    let table = MetricTable::from_csv_path(&args.table)?;
    let result = match &args.vote {
        Some(names) => {
            let metrics = names.iter().map(|m| m.parse()).collect::<Result<Vec<Metric>>>()?;
            rank_vote(&table, &args.target, &metrics)?
        }
        None => rank_single(&table, &args.target, args.metric.parse()?)?,
    };
    if let Some(out) = &args.out {
        write_text(out, &result.to_csv())?;
    }
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&result).expect("ranking serializes");
        write_text(path, &text)?;
    }
    let mut report = RunReport::new("rank")
        .param("table", path_str(&args.table))
        .param("target", &args.target)
        .param("method", &result.method);
    report.results = json!({
        "ranking": serde_json::to_value(&result).expect("ranking serializes"),
        "top3": result.top(3),
        "csv_path": args.out.as_deref().map(path_str),
        "json_path": args.json.as_deref().map(path_str),
    });
    Ok(report)
}

fn spec_json(spec: &GaussianMixtureSpec) -> serde_json::Value {
    let comps: Vec<_> = spec
        .components()
        .iter()
        .map(|c| {
            let cov: Vec<Vec<f64>> = c.covariance.row_iter().map(|r| r.iter().copied().collect()).collect();
            json!({
                "weight": c.weight,
                "mean": c.mean.as_slice(),
                "covariance": cov,
            })
        })
        .collect();
    json!({ "dim": spec.dim(), "components": comps })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<RunReport> {
    let s = scenario_with(&args.preset, args.seed, args.count)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let source_path = args.out_dir.join(format!("{}_source.emb", s.name));
    let target_path = args.out_dir.join(format!("{}_target.emb", s.name));
    write_cloud(&s.source, &source_path)?;
    write_cloud(&s.target, &target_path)?;
    let mut report = RunReport::new("synth")
        .param("preset", &s.name)
        .param("seed", s.seed)
        .param("count", args.count)
        .input(path_str(&source_path), &s.source)
        .input(path_str(&target_path), &s.target);
    report.results = json!({
        "expectation": s.expectation,
        "source_path": path_str(&source_path),
        "target_path": path_str(&target_path),
        "source_spec": spec_json(&s.source_spec),
        "target_spec": spec_json(&s.target_spec),
    });
    Ok(report)
}

fn dispatch(command: &Command) -> Result<RunReport> {
    match command {
        Command::Info(a) => cmd_info(a),
        Command::Sid(a) => cmd_sid(a),
        Command::Fid(a) => cmd_fid(a),
        Command::Kid(a) => cmd_kid(a),
        Command::Sintheta(a) => cmd_sintheta(a),
        Command::Sharpness(a) => cmd_sharpness(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Runs a parsed command on a pool of `cli.threads` workers and stamps the
/// wall time. Writes the report file when `--report` is set.
pub fn run(cli: &Cli) -> Result<RunReport> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "threads",
            detail: e.to_string(),
        })?;
    let mut report = pool.install(|| dispatch(&cli.command))?;
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    if let Some(path) = &cli.report {
        write_text(path, &report.to_json())?;
    }
    Ok(report)
}
