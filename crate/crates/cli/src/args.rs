use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdmd_core::metrics::Algorithm;
use pdmd_core::regression::{Extrapolation, RbfKernel, RegressorKind, RegressorSpec};

#[derive(Parser, Debug)]
#[command(name = "pdmd", version, about = "Parametric dynamic mode decomposition surrogates")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true, env = "PDMD_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// key=value file whose entries act as flags; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset and its oracle spec.
    Synth(SynthArgs),
    /// Train a model and write an archive.
    Fit(FitArgs),
    /// Evaluate an archive at a new parameter.
    Predict(PredictArgs),
    /// Score archives against held-out parameters.
    Eval(EvalArgs),
    /// Long-format error series from report files.
    Plotdata(PlotArgs),
    /// Run the benchmark suite.
    Bench(BenchArgs),
    /// Describe a dataset or model archive.
    Inspect(InspectArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    Linear,
    Exp,
    Oscillator,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pub family: FamilyArg,
    /// Full JSON spec; overrides the shape flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub nh: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub np: u32,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(2..))]
    pub nt: u32,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub dt: f64,
    /// Latent dimension of the linear family.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub modes: u32,
    #[arg(long, default_value_t = 0.2, value_parser = finite)]
    pub variation: f64,
    #[arg(long, value_parser = pair, default_value = "0,1")]
    pub param_range: (f64, f64),
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmArg {
    Roi,
    Rkoi,
    Mono,
    Part,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Roi => Algorithm::Roi,
            AlgorithmArg::Rkoi => Algorithm::Rkoi,
            AlgorithmArg::Mono => Algorithm::Monolithic,
            AlgorithmArg::Part => Algorithm::Partitioned,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegressorArg {
    Linear,
    Nearest,
    RbfGauss,
    RbfTps,
    Poly,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtrapolationArg {
    Clamp,
    Allow,
    Error,
}

#[derive(Args, Debug, Clone)]
pub struct RegressorOpts {
    /// Defaults to linear for scalar parameters, Gaussian RBF otherwise.
    #[arg(long, value_enum)]
    pub regressor: Option<RegressorArg>,
    #[arg(long, value_parser = positive)]
    pub rbf_shape: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub poly_degree: u32,
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub ridge: f64,
    #[arg(long, value_enum, default_value = "clamp")]
    pub extrapolation: ExtrapolationArg,
}

impl RegressorOpts {
    pub fn spec(&self, param_dim: usize) -> RegressorSpec {
        let base = RegressorSpec::default_for(param_dim);
        let kind = match self.regressor {
            None => base.kind,
            Some(RegressorArg::Linear) => RegressorKind::LinearInterp,
            Some(RegressorArg::Nearest) => RegressorKind::Nearest,
            Some(RegressorArg::RbfGauss) => RegressorKind::Rbf {
                kernel: RbfKernel::Gaussian,
                shape: self.rbf_shape,
            },
            Some(RegressorArg::RbfTps) => RegressorKind::Rbf {
                kernel: RbfKernel::ThinPlate,
                shape: self.rbf_shape,
            },
            Some(RegressorArg::Poly) => RegressorKind::Polynomial {
                degree: self.poly_degree,
                ridge: self.ridge,
            },
        };
        let kind = match (kind, self.rbf_shape) {
            (RegressorKind::Rbf { kernel, .. }, Some(s)) => RegressorKind::Rbf { kernel, shape: Some(s) },
            (k, _) => k,
        };
        RegressorSpec {
            kind,
            extrapolation: match self.extrapolation {
                ExtrapolationArg::Clamp => Extrapolation::Clamp,
                ExtrapolationArg::Allow => Extrapolation::Allow,
                ExtrapolationArg::Error => Extrapolation::Error,
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// PDMD1 file or manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub algorithm: AlgorithmArg,
    /// Basis rank; chosen by --energy when absent.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rank: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub op_rank: Option<u32>,
    #[arg(long, default_value_t = 0.9999, value_parser = fraction)]
    pub energy: f64,
    #[command(flatten)]
    pub regressor: RegressorOpts,
    /// Training parameter indices; defaults to all not in --test-idx.
    #[arg(long, value_delimiter = ',')]
    pub train_idx: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub test_idx: Option<Vec<usize>>,
    #[arg(long, value_parser = pair)]
    pub time_window: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub randomized_svd: bool,
    #[arg(long)]
    pub oversample: Option<u32>,
    #[arg(long)]
    pub power_iters: Option<u32>,
    /// Bagged optimized-DMD members for rkoi; 0 disables bagging.
    #[arg(long, default_value_t = 0)]
    pub bag_trials: u32,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub bag_fraction: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query parameter, comma-separated for p > 1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub mu: Vec<f64>,
    /// Lattice instants within [a, b].
    #[arg(long, value_parser = pair, conflicts_with = "count")]
    pub time_range: Option<(f64, f64)>,
    /// First n lattice instants; defaults to the training length.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub count: Option<u32>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Comma-separated archive paths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub test_idx: Vec<usize>,
    #[arg(long, value_parser = pair)]
    pub time_window: Option<(f64, f64)>,
    /// JSON-lines report output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Report files (JSON lines).
    #[arg(value_name = "REPORT")]
    pub reports: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Suite description; the built-in synthetic suite when absent.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, short, default_value = "bench-out")]
    pub out: PathBuf,
    /// Online timing repetitions; the minimum is reported.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeats: u32,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub path: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn finite(s: &str) -> Result<f64, String> {
    parse_f64(s)
}

pub fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

pub fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

pub fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie in (0, 1]"))
    }
}

pub fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let (a, b) = (parse_f64(a)?, parse_f64(b)?);
    if a <= b {
        Ok((a, b))
    } else {
        Err(format!("interval {a},{b} is reversed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn validators() {
        assert_eq!(pair("1400,2800"), Ok((1400.0, 2800.0)));
        assert!(pair("3,1").is_err());
        assert!(fraction("0").is_err() && fraction("1").is_ok());
        assert!(positive("-1").is_err());
        assert!(finite("nan").is_err());
    }

    #[test]
    fn later_flags_win() {
        let c = Cli::try_parse_from(["pdmd", "fit", "--data", "d", "--algorithm", "roi", "--rank", "3", "--rank", "5", "-o", "m"]).unwrap();
        let Command::Fit(f) = c.command else { panic!() };
        assert_eq!(f.rank, Some(5));
    }

    #[test]
    fn regressor_specs() {
        let c = Cli::try_parse_from([
            "pdmd", "fit", "--data", "d", "--algorithm", "mono", "--regressor", "rbf-tps", "--rbf-shape", "0.5", "-o", "m",
        ])
        .unwrap();
        let Command::Fit(f) = c.command else { panic!() };
        assert_eq!(
            f.regressor.spec(1).kind,
            RegressorKind::Rbf {
                kernel: RbfKernel::ThinPlate,
                shape: Some(0.5)
            }
        );
        assert!(Cli::try_parse_from(["pdmd", "fit", "--data", "d", "--algorithm", "x", "-o", "m"]).is_err());
    }
}
