//! Command line and TOML configuration. Both resolve to [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "spongelab", version, about = "Sponge symmetrization and pre-computation experiments")]
pub struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "SPONGELAB_THREADS")]
    pub threads: Option<usize>,

    /// Master seed [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Report path; standard output when unset.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Report format [default: json].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(flatten)]
    Experiment(Experiment),
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    /// Exhaustive checks: Sp of the symmetrized permutation, single-query
    /// simulator, coset census and fiber uniformity.
    Verify(VerifyArgs),
    /// Double-coset census of S_{2^n} under the sponge's Young subgroups.
    CosetCensus(CensusArgs),
    /// Indifferentiability experiment against the sponge simulator.
    Indiff(IndiffArgs),
    /// Remove the shared randomness of the sponge simulator for one
    /// distinguisher.
    RemoveSr(RemoveSrArgs),
    /// Hellman inversion against the sponge, the random function, or both.
    Tradeoff(TradeoffArgs),
    /// Trapdoor separation between reset indifferentiability and
    /// pre-computation.
    Separation(SeparationArgs),
    /// Truncated-permutation versus random-function advantage curve.
    TruncationCurve(TruncationArgs),
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::Verify(_) => "verify",
            Experiment::CosetCensus(_) => "coset-census",
            Experiment::Indiff(_) => "indiff",
            Experiment::RemoveSr(_) => "remove-sr",
            Experiment::Tradeoff(_) => "tradeoff",
            Experiment::Separation(_) => "separation",
            Experiment::TruncationCurve(_) => "truncation-curve",
        }
    }
}

/// Defaults live on the clap attributes; serde reuses them by parsing an
/// empty command line.
macro_rules! clap_default {
    ($t:ty) => {
        impl Default for $t {
            fn default() -> Self {
                <$t as Parser>::parse_from(["spongelab"])
            }
        }
    };
}

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, default_value_t = 1)]
    pub c: u32,
    /// Seeded functions for the Sp = f check.
    #[arg(long, default_value_t = 100)]
    pub functions: u64,
}
clap_default!(VerifyArgs);

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct CensusArgs {
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, default_value_t = 1)]
    pub c: u32,
}
clap_default!(CensusArgs);

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistinguisherKind {
    /// Forward/inverse round trips and priv/pub consistency.
    InverseConsistency,
    /// Likelihood test on the private truth table.
    SpongeLikelihood,
    /// Reads one public point (`--input`, `--target`).
    PublicPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackingArg {
    Dense,
    Lazy,
    Auto,
}

impl From<BackingArg> for spongelab::sponge::Backing {
    fn from(b: BackingArg) -> Self {
        match b {
            BackingArg::Dense => Self::Dense,
            BackingArg::Lazy => Self::Lazy,
            BackingArg::Auto => Self::Auto,
        }
    }
}

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct IndiffArgs {
    #[arg(long, default_value_t = 2)]
    pub r: u32,
    #[arg(long, default_value_t = 3)]
    pub c: u32,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = DistinguisherKind::InverseConsistency)]
    pub distinguisher: DistinguisherKind,
    /// Round trips made by the inverse-consistency distinguisher.
    #[arg(long, default_value_t = 10)]
    pub points: u64,
    /// Public-point distinguisher input.
    #[arg(long, default_value_t = 0)]
    pub input: u32,
    /// Public-point distinguisher expected output.
    #[arg(long, default_value_t = 0)]
    pub target: u32,
    #[arg(long, value_enum, default_value_t = BackingArg::Auto)]
    pub backing: BackingArg,
}
clap_default!(IndiffArgs);

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SrSpaceArg {
    /// All 2^16 seeds, exact acceptance probabilities.
    Enum16,
    /// `--samples` derived seeds, Monte Carlo acceptance probabilities.
    Sampled,
}

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoveSrArgs {
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    #[arg(long, default_value_t = 1)]
    pub c: u32,
    #[arg(long, value_enum, default_value_t = DistinguisherKind::PublicPoint)]
    pub distinguisher: DistinguisherKind,
    #[arg(long, default_value_t = 10)]
    pub points: u64,
    #[arg(long, default_value_t = 0)]
    pub input: u32,
    #[arg(long, default_value_t = 0)]
    pub target: u32,
    #[arg(long, value_enum, default_value_t = SrSpaceArg::Enum16)]
    pub space: SrSpaceArg,
    #[arg(long, default_value_t = 64)]
    pub samples: u64,
    /// Trials per sampled seed.
    #[arg(long, default_value_t = 1000)]
    pub sr_trials: u64,
}
clap_default!(RemoveSrArgs);

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeoffModel {
    /// Target `Sp^φ`, adversary on `(φ, φ⁻¹)`.
    Sponge,
    /// Target a random `f`, adversary on `f`.
    Function,
    /// Both, with the function side played by the composed adversary, plus
    /// the induced indifferentiability advantage.
    Transfer,
}

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeoffArgs {
    #[arg(long, default_value_t = 10)]
    pub r: u32,
    #[arg(long, default_value_t = 10)]
    pub c: u32,
    #[arg(long, default_value_t = 16)]
    pub m: u64,
    #[arg(long, default_value_t = 16)]
    pub t: u64,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = TradeoffModel::Sponge)]
    pub model: TradeoffModel,
    /// CSV grid with columns r,c,m,t,k,trials; replaces the single cell.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub sr_samples: u64,
    #[arg(long, default_value_t = 1000)]
    pub sr_trials: u64,
}
clap_default!(TradeoffArgs);

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparationArgs {
    #[arg(long, default_value_t = 12)]
    pub n: u32,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Query budgets for the hit distinguisher, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub queries: Vec<u64>,
}
clap_default!(SeparationArgs);

#[derive(Clone, Debug, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationArgs {
    #[arg(long, default_value_t = 16)]
    pub n: u32,
    #[arg(long, default_value_t = 8)]
    pub m: u32,
    /// Query counts, comma separated; defaults to 2^((n+m)/2 - j), j = 7..0.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<u64>,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
}
clap_default!(TruncationArgs);

/// Fully resolved run, echoed in every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(path: &Path) -> Result<Self, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Applies command-line overrides on top of a file or the defaults.
    pub fn resolve(cli: &Cli) -> Result<Self, String> {
        let mut config = match &cli.command {
            Command::Experiment(e) => {
                RunConfig { experiment: e.clone(), seed: 0, format: Format::Json, output: None }
            }
            Command::Run { config } => RunConfig::from_toml(config)?,
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(format) = cli.format {
            config.format = format;
        }
        if cli.output.is_some() {
            config.output = cli.output.clone();
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_fills_defaults() {
        let c: RunConfig = toml::from_str("experiment = \"tradeoff\"\nm = 8\nseed = 5\n").unwrap();
        let Experiment::Tradeoff(t) = c.experiment else { panic!() };
        assert_eq!((t.m, t.t, t.r, t.trials), (8, 16, 10, 10_000));
        assert_eq!(c.seed, 5);
        assert_eq!(c.format, Format::Json);
    }

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(toml::from_str::<RunConfig>("experiment = \"nope\"").is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let cli = Cli::parse_from(["spongelab", "--seed", "9", "verify", "--r", "1", "--c", "2"]);
        let c = RunConfig::resolve(&cli).unwrap();
        assert_eq!(c.seed, 9);
        let Experiment::Verify(v) = c.experiment else { panic!() };
        assert_eq!((v.r, v.c, v.functions), (1, 2, 100));
    }
}
