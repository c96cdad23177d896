//! Command-line flags and the optional `key = value` config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "basket", version, about = "Exact operating characteristics of basket trial designs")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Basket-wise and family-wise type I error rates.
    Toer(Common),
    /// Basket-wise rejection probabilities of active baskets and the family power.
    Pow(Common),
    /// Expected number of correct decisions.
    Ecd(Common),
    /// Expected sample size per basket and in total.
    Ess(Common),
    /// Mean posterior mean and mean squared error per basket.
    Estim(Common),
    /// Smallest threshold on the grid that controls the FWER.
    AdjustLambda(Common),
    /// Default response-rate scenarios.
    Scenarios(Common),
    /// Ranks tuning parameters by mean ECD after calibrating each.
    OptDesign(Common),
    /// Sharing weight against responses in basket 2.
    PlotWeights(Common),
    /// Monte Carlo estimate of the operating characteristics.
    Simulate(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Toer(c)
            | Command::Pow(c)
            | Command::Ecd(c)
            | Command::Ess(c)
            | Command::Estim(c)
            | Command::AdjustLambda(c)
            | Command::Scenarios(c)
            | Command::OptDesign(c)
            | Command::PlotWeights(c)
            | Command::Simulate(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Cpp,
    Jsd,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterimArg {
    Posterior,
    Postpred,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResultsArg {
    Group,
    Fwer,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Plain-text file of `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub shape1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub shape2: f64,
    #[arg(long)]
    pub p0: Option<f64>,

    /// Maximum sample size per basket.
    #[arg(long)]
    pub n: Option<u32>,
    /// Interim sample size per basket; omit for a single-stage design.
    #[arg(long)]
    pub n1: Option<u32>,
    /// Interim responses of basket 1 (plot-weights).
    #[arg(long)]
    pub r1: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,

    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub prec_digits: u32,

    #[arg(long, value_enum, default_value_t = WeightsArg::Cpp)]
    pub weights: WeightsArg,
    /// CPP parameter; a list (`1,2,3`) or range (`1:3`) in opt-design and plot-weights.
    #[arg(long, default_value = "1")]
    pub a: String,
    #[arg(long, default_value = "1")]
    pub b: String,
    /// JSD exponent; a list or range in opt-design and plot-weights.
    #[arg(long, default_value = "1")]
    pub epsilon: String,
    /// JSD threshold; a list or range in opt-design and plot-weights.
    #[arg(long, default_value = "0")]
    pub tau: String,
    /// Weight the prior shapes as well (Fujikawa mode).
    #[arg(long)]
    pub share_prior: bool,

    #[arg(long, value_enum, default_value_t = InterimArg::Postpred)]
    pub interim: InterimArg,
    /// Stop for futility below this probability.
    #[arg(long)]
    pub fut: Option<f64>,
    /// Stop for efficacy above this probability.
    #[arg(long)]
    pub eff: Option<f64>,

    /// True response rates, comma separated; defaults to the global null.
    #[arg(long, value_delimiter = ',')]
    pub p_true: Option<Vec<f64>>,
    /// Response rate of active baskets in the default scenarios.
    #[arg(long)]
    pub p1: Option<f64>,

    #[arg(long, default_value_t = 100_000)]
    pub replicates: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// toer: report basket-wise rates and the FWER, or the FWER only.
    #[arg(long, value_enum, default_value_t = ResultsArg::Group)]
    pub results: ResultsArg,

    /// Also write the report as CSV to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// plot-weights: also write an SVG line chart to this path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parses the command line, first splicing in any `--config` file so that
/// explicit flags, which come later, take precedence.
pub fn parse(argv: Vec<String>) -> Result<Cli, CliError> {
    let spliced = splice_config(argv)?;
    Cli::try_parse_from(spliced).map_err(CliError::Usage)
}

fn splice_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            path = iter.next();
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let from_file = config_args(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    // program name and subcommand first, then the file, then the explicit flags
    let split = rest.len().min(2);
    let mut out: Vec<String> = rest[..split].to_vec();
    out.extend(from_file);
    out.extend(rest[split..].iter().cloned());
    Ok(out)
}

/// Turns `key = value` lines into flags. `#` starts a comment.
pub fn config_args(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(format!("line {}: nested config files are not supported", lineno + 1));
        }
        if key == "share-prior" {
            match value {
                "true" | "yes" | "1" => out.push("--share-prior".into()),
                "false" | "no" | "0" => {}
                _ => return Err(format!("line {}: share-prior must be true or false", lineno + 1)),
            }
            continue;
        }
        out.push(format!("--{key}"));
        out.push(value.to_string());
    }
    Ok(out)
}

/// A comma list of numbers or ranges `lo:hi[:step]` (inclusive, step 1 by default).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"));
        match fields.as_slice() {
            [x] => out.push(num(x)?),
            [lo, hi] | [lo, hi, _] => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                let step = if fields.len() == 3 { num(fields[2])? } else { 1.0 };
                if !(step > 0.0) || hi < lo {
                    return Err(format!("bad range `{part}`"));
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| lo + i as f64 * step));
            }
            _ => return Err(format!("bad grid entry `{part}`")),
        }
    }
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(out)
}
