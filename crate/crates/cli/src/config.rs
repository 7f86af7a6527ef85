//! Config sections, their defaults and the file format.
//!
//! Resolution order: command-line flags, then the config file, then the
//! defaults below.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[value(alias = "exponential")]
    Exp,
    #[value(alias = "polynomial")]
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Oracle,
    Lcurve,
    Gcv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScaleName {
    White,
    PerMeshPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormName {
    Penalty,
    L2,
}

/// Parametric spectrum and true function, shared by several subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub family: Family,
    pub theta: f64,
    pub n: usize,
    /// Band `[a, b]` of the eigenvalue perturbations `p_i⁻¹`.
    pub perturbation: [f64; 2],
    /// Band of the coefficient perturbations `p̃_i⁻¹`.
    pub coefficient_perturbation: [f64; 2],
    pub r: f64,
    pub null_components: Vec<f64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            family: Family::Exp,
            theta: 1.5,
            n: 200,
            perturbation: [1.0, 1.0],
            coefficient_perturbation: [1.0, 1.0],
            r: 1.2,
            null_components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleRatesSection {
    pub family: Family,
    pub theta: f64,
    pub n: usize,
    pub perturbation: [f64; 2],
    pub coefficient_perturbation: [f64; 2],
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub sigma_count: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_count: usize,
    /// Allowed distance between fitted and predicted rates.
    pub tolerance: f64,
}

impl Default for OracleRatesSection {
    fn default() -> Self {
        OracleRatesSection {
            family: Family::Exp,
            theta: 1.5,
            n: 200,
            perturbation: [1.0, 1.0],
            coefficient_perturbation: [1.0, 1.0],
            r: vec![0.7, 1.2, 1.7],
            s: (0..=12).map(|k| 0.25 * k as f64).collect(),
            sigma_lo: 1e-7,
            sigma_hi: 1e-1,
            sigma_count: 91,
            lambda_lo: 1e-25,
            lambda_hi: 1e2,
            lambda_count: 271,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesCheckSection {
    pub family: Family,
    pub theta: f64,
    pub n: usize,
    pub perturbation: [f64; 2],
    pub coefficient_perturbation: [f64; 2],
    pub r: f64,
    pub s: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_count: usize,
    pub slope_tolerance_a: f64,
    pub slope_tolerance_b: f64,
    /// Accepted band of `direct sum / (J/θ)` for `A`.
    pub constant_band: [f64; 2],
}

impl Default for SeriesCheckSection {
    fn default() -> Self {
        SeriesCheckSection {
            family: Family::Exp,
            theta: 1.5,
            // enough modes that λ_N^(s+1) sits far below the smallest λ
            n: 400,
            perturbation: [1.0, 1.0],
            coefficient_perturbation: [1.0, 1.0],
            r: 1.2,
            s: 1.0,
            lambda_lo: 1e-10,
            lambda_hi: 1e-6,
            lambda_count: 41,
            slope_tolerance_a: 0.02,
            slope_tolerance_b: 0.05,
            constant_band: [0.9, 1.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmSection {
    pub m: usize,
    /// Eigenvalues below `tau · λ_max` are dropped.
    pub tau: f64,
    pub r: f64,
    pub s: Vec<f64>,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub sigma_count: usize,
    pub methods: Vec<MethodName>,
    pub replicates: usize,
    pub noise_scale: NoiseScaleName,
    pub coefficient_band: [f64; 2],
    /// Grid searched by the oracle.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_count: usize,
    pub selector_count: usize,
    pub solution_norm: NormName,
    pub eigen_check_count: usize,
    pub eigen_tolerance: f64,
    pub orthonormality_tolerance: f64,
    /// Largest accepted median L-curve/oracle error ratio at s = 1.
    pub ratio_limit: f64,
    /// Replicate whose selection traces are dumped.
    pub trace_replicate: usize,
    pub export_eigenvectors: bool,
}

impl Default for FredholmSection {
    fn default() -> Self {
        FredholmSection {
            m: 500,
            tau: fsreg::fredholm::DEFAULT_RANK_THRESHOLD,
            r: 1.5,
            s: vec![0.0, 1.0, 2.0],
            sigma_lo: 1e-3,
            sigma_hi: 10f64.powf(-0.5),
            sigma_count: 39,
            methods: vec![MethodName::Oracle, MethodName::Lcurve, MethodName::Gcv],
            replicates: 20,
            noise_scale: NoiseScaleName::PerMeshPoint,
            coefficient_band: [0.95, 1.05],
            lambda_lo: 1e-40,
            lambda_hi: 1e2,
            lambda_count: 421,
            selector_count: 200,
            solution_norm: NormName::Penalty,
            eigen_check_count: 10,
            eigen_tolerance: 1e-3,
            orthonormality_tolerance: 1e-8,
            ratio_limit: 10.0,
            trace_replicate: 0,
            export_eigenvectors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteRankSection {
    pub k: usize,
    /// The K positive eigenvalues; empty means `λ_i = 1/i`.
    pub eigenvalues: Vec<f64>,
    pub truth_norm: f64,
    pub eps_norm: f64,
    pub s: f64,
    pub sigmas: Vec<f64>,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_count: usize,
}

impl Default for FiniteRankSection {
    fn default() -> Self {
        FiniteRankSection {
            k: 1,
            eigenvalues: Vec::new(),
            truth_norm: 1.0,
            eps_norm: 0.1,
            s: 1.0,
            sigmas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            lambda_lo: 1e-12,
            lambda_hi: 1e2,
            lambda_count: 281,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateFitSection {
    /// CSV with columns `sigma,value`.
    pub input: Option<PathBuf>,
    /// Row indices (0-based) left out of the fit.
    pub exclude: Vec<usize>,
    pub expected_slope: Option<f64>,
    pub tolerance: Option<f64>,
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub master_seed: Option<u64>,
    pub jobs: Option<usize>,
    pub spectrum: SpectrumSection,
    pub oracle_rates: OracleRatesSection,
    pub series_check: SeriesCheckSection,
    pub fredholm: FredholmSection,
    pub finite_rank: FiniteRankSection,
    pub rate_fit: RateFitSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

/// The active section after all overrides.
#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Spectrum(SpectrumSection),
    OracleRates(OracleRatesSection),
    SeriesCheck(SeriesCheckSection),
    Fredholm(FredholmSection),
    FiniteRank(FiniteRankSection),
    RateFit(RateFitSection),
}

impl Section {
    /// Subcommand name, also used as the output subdirectory.
    pub fn subcommand(&self) -> &'static str {
        match self {
            Section::Spectrum(_) => "spectrum",
            Section::OracleRates(_) => "oracle-rates",
            Section::SeriesCheck(_) => "series-check",
            Section::Fredholm(_) => "fredholm",
            Section::FiniteRank(_) => "finite-rank",
            Section::RateFit(_) => "rate-fit",
        }
    }

    /// Key of the section in the config file.
    pub fn key(&self) -> &'static str {
        match self {
            Section::Spectrum(_) => "spectrum",
            Section::OracleRates(_) => "oracle_rates",
            Section::SeriesCheck(_) => "series_check",
            Section::Fredholm(_) => "fredholm",
            Section::FiniteRank(_) => "finite_rank",
            Section::RateFit(_) => "rate_fit",
        }
    }

    fn to_value(&self) -> Result<toml::Value, toml::ser::Error> {
        match self {
            Section::Spectrum(s) => toml::Value::try_from(s),
            Section::OracleRates(s) => toml::Value::try_from(s),
            Section::SeriesCheck(s) => toml::Value::try_from(s),
            Section::Fredholm(s) => toml::Value::try_from(s),
            Section::FiniteRank(s) => toml::Value::try_from(s),
            Section::RateFit(s) => toml::Value::try_from(s),
        }
    }
}

/// Everything that determines the artifacts of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub section: Section,
}

impl RunConfig {
    /// The resolved config as TOML. Output location, run name and thread
    /// count are left out since they do not affect the results.
    pub fn to_toml(&self) -> Result<String, CliError> {
        let mut table = toml::map::Map::new();
        table.insert(
            "subcommand".into(),
            toml::Value::String(self.section.subcommand().into()),
        );
        // TOML integers are signed 64-bit
        let seed = i64::try_from(self.master_seed)
            .map(toml::Value::Integer)
            .unwrap_or_else(|_| toml::Value::String(self.master_seed.to_string()));
        table.insert("master_seed".into(), seed);
        let section = self
            .section
            .to_value()
            .map_err(|e| CliError::Runtime(format!("cannot serialize resolved config: {e}")))?;
        table.insert(self.section.key().into(), section);
        toml::to_string(&toml::Value::Table(table))
            .map_err(|e| CliError::Runtime(format!("cannot serialize resolved config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: FileConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, FileConfig::default());
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let cfg: FileConfig = toml::from_str("[oracle_rates]\ntheta = 2.0\nr = [1.2]\n").unwrap();
        assert_eq!(cfg.oracle_rates.theta, 2.0);
        assert_eq!(cfg.oracle_rates.r, vec![1.2]);
        assert_eq!(cfg.oracle_rates.n, 200);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[fredholm]\nmesh = 3\n").is_err());
        assert!(toml::from_str::<FileConfig>("seed = 3\n").is_err());
    }

    #[test]
    fn enums_use_kebab_case() {
        let cfg: FileConfig = toml::from_str("[fredholm]\nnoise_scale = \"white\"\nmethods = [\"lcurve\"]\n").unwrap();
        assert_eq!(cfg.fredholm.noise_scale, NoiseScaleName::White);
        assert_eq!(cfg.fredholm.methods, vec![MethodName::Lcurve]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let run = RunConfig {
            master_seed: 7,
            section: Section::Fredholm(FredholmSection::default()),
        };
        let text = run.to_toml().unwrap();
        let back: FileConfig = toml::from_str(&text.replace("subcommand = \"fredholm\"\n", "")).unwrap();
        assert_eq!(back.master_seed, Some(7));
        assert_eq!(back.fredholm, FredholmSection::default());
    }
}
