use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use stiefel_givens::{ChartConfig, HmcConfig};

#[derive(Debug, Parser)]
#[command(
    name = "stiefel-givens",
    version,
    about = "HMC over orthonormal-matrix parameters in Givens-angle coordinates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Sample uniformly from the n x p Stiefel manifold.
    Uniform(UniformArgs),
    /// Probabilistic PCA with an orthonormal loading matrix.
    Ppca(PpcaArgs),
    /// Probit network eigenmodel.
    Eigenmodel(EigenmodelArgs),
    /// Run the oracle check batteries.
    Check(CheckArgs),
    /// Operation counts and timings of the forward map.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Uniform(_) => "uniform",
            Command::Ppca(_) => "ppca",
            Command::Eigenmodel(_) => "eigenmodel",
            Command::Check(_) => "check",
            Command::Bench(_) => "bench",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Post-warmup draws per chain.
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 500)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    /// Upper bound of the jittered leapfrog step count.
    #[arg(long, default_value_t = 16)]
    pub leapfrog_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for chains (results do not depend on it).
    #[arg(long, env = "STIEFEL_GIVENS_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SamplerArgs {
    pub fn hmc(&self) -> HmcConfig {
        HmcConfig {
            chains: self.chains,
            iters: self.iters,
            warmup: self.warmup,
            target_accept: self.target_accept,
            leapfrog_steps: self.leapfrog_steps,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChartArgs {
    /// Margin kept away from the ends of half-circle ranges.
    #[arg(long, default_value_t = ChartConfig::default().epsilon)]
    pub epsilon: f64,
    /// Standard deviation of the radius prior of full-circle pairs.
    #[arg(long, default_value_t = ChartConfig::default().r_sd)]
    pub r_sd: f64,
    /// Fold leading angles into [-pi/2, pi/2] (`--mirrored false` to disable).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mirrored: Option<bool>,
}

impl ChartArgs {
    pub fn chart(&self, mirrored_default: bool) -> ChartConfig {
        ChartConfig {
            epsilon: self.epsilon,
            r_sd: self.r_sd,
            mirrored: self.mirrored.unwrap_or(mirrored_default),
            ..ChartConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct UniformArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long, default_value = "uniform")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PpcaArgs {
    /// CSV of observations, one row per observation.
    #[arg(long, required_unless_present = "simulate", conflicts_with = "simulate")]
    pub data: Option<PathBuf>,
    /// Simulate N=15 observations in 3 dimensions instead of reading data.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long, default_value = "ppca")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EigenmodelArgs {
    /// Edge list (two columns of 0-based ids) or square 0/1 adjacency CSV.
    #[arg(long, required_unless_present = "synth", conflicts_with = "synth")]
    pub graph: Option<PathBuf>,
    /// Node count for an edge list; defaults to the largest id + 1.
    #[arg(long, requires = "graph")]
    pub nodes: Option<usize>,
    /// Generate a synthetic graph on this many nodes.
    #[arg(long, value_name = "NODES")]
    pub synth: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// Constrain lambda to be strictly decreasing.
    #[arg(long)]
    pub ordered_lambda: bool,
    /// Fraction of dyads to hold out and score after fitting.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long, default_value_t = 7)]
    pub holdout_seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long, default_value = "eigenmodel")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CheckArgs {
    /// One of roundtrip, jacobian, gradient, marginals, all.
    #[arg(default_value = "all")]
    pub suite: String,
    /// Use a fresh seed instead of the fixed one.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Comma-separated `NxP` shapes.
    #[arg(long, default_value = "100x2,200x2,100x4,100x8")]
    pub grid: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

/// Parse `"100x2,200x2"`.
pub fn parse_grid(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (n, p) = t
                .split_once(['x', 'X'])
                .ok_or_else(|| format!("bad shape {t:?}, expected NxP"))?;
            let n = n.parse().map_err(|_| format!("bad n in {t:?}"))?;
            let p = p.parse().map_err(|_| format!("bad p in {t:?}"))?;
            Ok((n, p))
        })
        .collect()
}
