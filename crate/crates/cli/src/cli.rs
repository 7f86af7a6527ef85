//! Command-line flags and their overlay on the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    Family, FileConfig, FiniteRankSection, FredholmSection, MethodName, NoiseScaleName, NormName, OracleRatesSection,
    RateFitSection, RunConfig, Section, SeriesCheckSection, SpectrumSection,
};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fsreg",
    version,
    about = "Rate experiments for spectral Tikhonov regularization"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root of the output tree.
    #[arg(long, global = true, env = "FSREG_OUTPUT_DIR", default_value = "runs")]
    pub output_dir: PathBuf,
    /// Master seed from which every cell seed is derived.
    #[arg(long, global = true)]
    pub master_seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run directory name; defaults to a timestamped name.
    #[arg(long, global = true)]
    pub run_name: Option<String>,
    /// Lower end of the λ grid of the subcommand.
    #[arg(long, global = true)]
    pub lambda_lo: Option<f64>,
    /// Upper end of the λ grid of the subcommand.
    #[arg(long, global = true)]
    pub lambda_hi: Option<f64>,
    /// Number of λ grid points.
    #[arg(long, global = true)]
    pub lambda_count: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export a parametric spectrum and true function.
    Spectrum(SpectrumArgs),
    /// Oracle λ* and error rates against the predicted exponents.
    OracleRates(OracleRatesArgs),
    /// Direct sums of the error series against their leading-order terms.
    SeriesCheck(SeriesCheckArgs),
    /// Discretized Fredholm problem and the practical selector comparison.
    Fredholm(FredholmArgs),
    /// L² versus H^s regularization on a finite-rank operator.
    FiniteRank(FiniteRankArgs),
    /// Fit a log-log rate to a CSV of (sigma, value) pairs.
    RateFit(RateFitArgs),
}

#[derive(Debug, Args, Default)]
pub struct SpectrumFlags {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of modes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Eigenvalue perturbation band `a,b`.
    #[arg(long, value_delimiter = ',')]
    pub perturbation: Option<Vec<f64>>,
    /// Coefficient perturbation band `a,b`.
    #[arg(long, value_delimiter = ',')]
    pub coefficient_perturbation: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub spectrum: SpectrumFlags,
    #[arg(long)]
    pub r: Option<f64>,
    /// Null-space components `d_j`; write `--null-components=-0.1,0.2` when the first is negative.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub null_components: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OracleRatesArgs {
    #[command(flatten)]
    pub spectrum: SpectrumFlags,
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma_lo: Option<f64>,
    #[arg(long)]
    pub sigma_hi: Option<f64>,
    #[arg(long)]
    pub sigma_count: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SeriesCheckArgs {
    #[command(flatten)]
    pub spectrum: SpectrumFlags,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub slope_tolerance_a: Option<f64>,
    #[arg(long)]
    pub slope_tolerance_b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FredholmArgs {
    /// Mesh size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Relative rank threshold.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    #[arg(long)]
    pub sigma_lo: Option<f64>,
    #[arg(long)]
    pub sigma_hi: Option<f64>,
    #[arg(long)]
    pub sigma_count: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<MethodName>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_enum)]
    pub noise_scale: Option<NoiseScaleName>,
    /// Points of the L-curve and GCV grid.
    #[arg(long)]
    pub selector_count: Option<usize>,
    /// Solution-norm axis of the L-curve.
    #[arg(long, value_enum)]
    pub solution_norm: Option<NormName>,
    #[arg(long)]
    pub trace_replicate: Option<usize>,
    /// Also write every eigenvector on the mesh.
    #[arg(long)]
    pub export_eigenvectors: bool,
}

#[derive(Debug, Args)]
pub struct FiniteRankArgs {
    /// Rank of the operator.
    #[arg(long = "K", alias = "k")]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eigenvalues: Option<Vec<f64>>,
    /// ‖φ*‖.
    #[arg(long)]
    pub truth_norm: Option<f64>,
    /// ‖φ^ε‖ of the null-space perturbation.
    #[arg(long)]
    pub eps_norm: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct RateFitArgs {
    /// CSV with columns `sigma,value`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// 0-based rows left out of the fit.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    pub expected_slope: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_band(slot: &mut [f64; 2], flag: Option<Vec<f64>>, name: &str) -> Result<(), CliError> {
    match flag.as_deref() {
        None => Ok(()),
        Some([lo, hi]) => {
            *slot = [*lo, *hi];
            Ok(())
        }
        Some(v) => Err(CliError::Usage(format!(
            "--{name} takes two values `lo,hi`, got {}",
            v.len()
        ))),
    }
}

struct Parametric<'a> {
    family: &'a mut Family,
    theta: &'a mut f64,
    n: &'a mut usize,
    perturbation: &'a mut [f64; 2],
    coefficient_perturbation: &'a mut [f64; 2],
}

impl SpectrumFlags {
    fn apply(self, p: Parametric<'_>) -> Result<(), CliError> {
        set(p.family, self.family);
        set(p.theta, self.theta);
        set(p.n, self.n);
        set_band(p.perturbation, self.perturbation, "perturbation")?;
        set_band(
            p.coefficient_perturbation,
            self.coefficient_perturbation,
            "coefficient-perturbation",
        )
    }
}

macro_rules! parametric {
    ($s:expr) => {
        Parametric {
            family: &mut $s.family,
            theta: &mut $s.theta,
            n: &mut $s.n,
            perturbation: &mut $s.perturbation,
            coefficient_perturbation: &mut $s.coefficient_perturbation,
        }
    };
}

fn set_grid(g: &GlobalArgs, lo: &mut f64, hi: &mut f64, count: &mut usize) {
    set(lo, g.lambda_lo);
    set(hi, g.lambda_hi);
    set(count, g.lambda_count);
}

/// Merges flags over the file config over the defaults.
pub fn resolve(global: &GlobalArgs, command: Command, file: FileConfig) -> Result<RunConfig, CliError> {
    let master_seed = global.master_seed.or(file.master_seed).unwrap_or(0);
    let section = match command {
        Command::Spectrum(a) => {
            let mut s: SpectrumSection = file.spectrum;
            a.spectrum.apply(parametric!(s))?;
            set(&mut s.r, a.r);
            set(&mut s.null_components, a.null_components);
            Section::Spectrum(s)
        }
        Command::OracleRates(a) => {
            let mut s: OracleRatesSection = file.oracle_rates;
            a.spectrum.apply(parametric!(s))?;
            set(&mut s.r, a.r);
            set(&mut s.s, a.s);
            set(&mut s.sigma_lo, a.sigma_lo);
            set(&mut s.sigma_hi, a.sigma_hi);
            set(&mut s.sigma_count, a.sigma_count);
            set(&mut s.tolerance, a.tolerance);
            set_grid(global, &mut s.lambda_lo, &mut s.lambda_hi, &mut s.lambda_count);
            Section::OracleRates(s)
        }
        Command::SeriesCheck(a) => {
            let mut s: SeriesCheckSection = file.series_check;
            a.spectrum.apply(parametric!(s))?;
            set(&mut s.r, a.r);
            set(&mut s.s, a.s);
            set(&mut s.slope_tolerance_a, a.slope_tolerance_a);
            set(&mut s.slope_tolerance_b, a.slope_tolerance_b);
            set_grid(global, &mut s.lambda_lo, &mut s.lambda_hi, &mut s.lambda_count);
            Section::SeriesCheck(s)
        }
        Command::Fredholm(a) => {
            let mut s: FredholmSection = file.fredholm;
            set(&mut s.m, a.m);
            set(&mut s.tau, a.tau);
            set(&mut s.r, a.r);
            set(&mut s.s, a.s);
            set(&mut s.sigma_lo, a.sigma_lo);
            set(&mut s.sigma_hi, a.sigma_hi);
            set(&mut s.sigma_count, a.sigma_count);
            set(&mut s.methods, a.methods);
            set(&mut s.replicates, a.replicates);
            set(&mut s.noise_scale, a.noise_scale);
            set(&mut s.selector_count, a.selector_count);
            set(&mut s.solution_norm, a.solution_norm);
            set(&mut s.trace_replicate, a.trace_replicate);
            s.export_eigenvectors |= a.export_eigenvectors;
            set_grid(global, &mut s.lambda_lo, &mut s.lambda_hi, &mut s.lambda_count);
            Section::Fredholm(s)
        }
        Command::FiniteRank(a) => {
            let mut s: FiniteRankSection = file.finite_rank;
            set(&mut s.k, a.k);
            set(&mut s.eigenvalues, a.eigenvalues);
            set(&mut s.truth_norm, a.truth_norm);
            set(&mut s.eps_norm, a.eps_norm);
            set(&mut s.s, a.s);
            set(&mut s.sigmas, a.sigmas);
            set_grid(global, &mut s.lambda_lo, &mut s.lambda_hi, &mut s.lambda_count);
            Section::FiniteRank(s)
        }
        Command::RateFit(a) => {
            let mut s: RateFitSection = file.rate_fit;
            if a.input.is_some() {
                s.input = a.input;
            }
            set(&mut s.exclude, a.exclude);
            if a.expected_slope.is_some() {
                s.expected_slope = a.expected_slope;
            }
            if a.tolerance.is_some() {
                s.tolerance = a.tolerance;
            }
            Section::RateFit(s)
        }
    };
    Ok(RunConfig { master_seed, section })
}
