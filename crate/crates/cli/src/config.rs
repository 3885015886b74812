//! Command-line flags, the flat JSON config file, and their merge into a
//! validated [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use spinlabor::ErasureParams;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "spinlabor", version, about = "Spinlabor statistics for spin-reservoir erasure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Pmf,
    Simulate,
    Bounds,
    Jarzynski,
    Semianalytic,
    Figures,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact spinlabor distribution after m cycles or at full erasure
    Pmf(Flags),
    /// Monte Carlo ensemble compared against the exact distribution
    Simulate(Flags),
    /// Violation probability with the A, B and semi-analytic bounds
    Bounds(Flags),
    /// Exponentiated-spinlabor equality check
    Jarzynski(Flags),
    /// Semi-analytic decay rates at g = ln2/b
    Semianalytic(Flags),
    /// Plot-ready data series (cost laws, violation curves, decay rates)
    Figures(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Pmf(f) => (CommandKind::Pmf, f),
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Bounds(f) => (CommandKind::Bounds, f),
            Command::Jarzynski(f) => (CommandKind::Jarzynski, f),
            Command::Semianalytic(f) => (CommandKind::Semianalytic, f),
            Command::Figures(f) => (CommandKind::Figures, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
pub enum Figure {
    #[value(name = "1a")]
    #[serde(rename = "1a")]
    OneA,
    #[value(name = "1b")]
    #[serde(rename = "1b")]
    OneB,
    #[value(name = "2a")]
    #[serde(rename = "2a")]
    TwoA,
    #[value(name = "2b")]
    #[serde(rename = "2b")]
    TwoB,
    #[value(name = "supp")]
    #[serde(rename = "supp")]
    Supp,
}

impl Figure {
    /// Illustrative polarizations for each figure.
    pub fn default_alphas(self) -> Vec<f64> {
        match self {
            Figure::OneA | Figure::OneB => vec![0.2, 0.4],
            Figure::TwoA | Figure::TwoB => vec![0.45, 0.48, 0.49],
            Figure::Supp => Vec::new(),
        }
    }
}

pub const DEFAULT_B_LIST: [u32; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Reservoir up-polarization in (0, 1)
    #[arg(long, conflicts_with = "gamma", allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Dimensionless inverse spin temperature g = γħ
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Initial probability that the memory is up
    #[arg(long = "p-init", allow_negative_numbers = true)]
    pub p_init: Option<f64>,
    /// Number of cycles (CNOTs), the first being the initial step
    #[arg(long, conflicts_with = "full")]
    pub cycles: Option<usize>,
    /// Run to full erasure
    #[arg(long)]
    pub full: bool,
    #[arg(long = "tail-tol", allow_negative_numbers = true)]
    pub tail_tol: Option<f64>,
    /// Monte Carlo trajectories
    #[arg(long)]
    pub samples: Option<u64>,
    /// Monte Carlo master seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "eps-max", allow_negative_numbers = true)]
    pub eps_max: Option<f64>,
    #[arg(long = "eps-step", allow_negative_numbers = true)]
    pub eps_step: Option<f64>,
    /// Special inverse temperatures g = ln2/b, comma separated
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    pub fig: Option<Figure>,
    /// Polarizations for figure series, comma separated
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat JSON file with the same keys as the flags; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the index-shifted cost recurrence (comparison only)
    #[arg(long = "printed-recurrence", hide = true)]
    pub printed_recurrence: bool,
}

/// List values may be given as JSON arrays or comma-separated strings.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ListValue<T> {
    Items(Vec<T>),
    One(T),
    Text(String),
}

impl<T: std::str::FromStr> ListValue<T> {
    fn into_vec(self, key: &str) -> Result<Vec<T>, CliError> {
        match self {
            ListValue::Items(v) => Ok(v),
            ListValue::One(x) => Ok(vec![x]),
            ListValue::Text(s) => s
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| CliError::invalid(format!("config key '{key}': cannot parse '{item}'")))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    gamma: Option<f64>,
    p_init: Option<f64>,
    cycles: Option<usize>,
    full: Option<bool>,
    tail_tol: Option<f64>,
    samples: Option<u64>,
    seed: Option<u64>,
    eps_max: Option<f64>,
    eps_step: Option<f64>,
    b: Option<ListValue<u32>>,
    fig: Option<Figure>,
    alphas: Option<ListValue<f64>>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

fn read_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("--config {}: {e}", path.display())))
}

/// Where the inverse spin temperature came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSource {
    Alpha(f64),
    Gamma(f64),
    /// `g = ln2/b` from a single `--b`.
    Special(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleMode {
    Finite(usize),
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub source: Option<GammaSource>,
    pub p_init: f64,
    pub tail_tol: f64,
    pub cycles: CycleMode,
    pub n_samples: u64,
    pub master_seed: u64,
    pub eps_max: Option<f64>,
    pub eps_step: f64,
    pub b_list: Vec<u32>,
    pub fig: Option<Figure>,
    pub alphas: Vec<f64>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub printed_recurrence: bool,
}

impl RunConfig {
    /// Protocol parameters; fails when no `--alpha`/`--gamma`/`--b` was given.
    pub fn params(&self) -> Result<ErasureParams, CliError> {
        let source = self
            .source
            .ok_or_else(|| CliError::invalid("one of --alpha or --gamma is required"))?;
        self.params_for(source)
    }

    pub fn params_for(&self, source: GammaSource) -> Result<ErasureParams, CliError> {
        let base = match source {
            GammaSource::Alpha(a) => ErasureParams::from_alpha(a, self.p_init),
            GammaSource::Gamma(g) => ErasureParams::from_gamma(g, self.p_init),
            GammaSource::Special(b) => {
                ErasureParams::from_gamma(std::f64::consts::LN_2 / b as f64, self.p_init)
            }
        }
        .map_err(|e| CliError::invalid(flag_hint(source, e)))?;
        base.with_tail_tol(self.tail_tol)
            .map_err(|e| CliError::invalid(format!("--tail-tol: {e}")))
    }
}

fn flag_hint(source: GammaSource, e: spinlabor::Error) -> String {
    let flag = match source {
        GammaSource::Alpha(_) => "--alpha",
        GammaSource::Gamma(_) => "--gamma",
        GammaSource::Special(_) => "--b",
    };
    format!("{flag} / --p-init: {e}")
}

/// Merges flags over the optional config file and validates the result.
pub fn resolve(command: CommandKind, flags: Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(path) => read_config(path)?,
        None => FileConfig::default(),
    };
    if file.alpha.is_some() && file.gamma.is_some() {
        return Err(CliError::invalid("config file sets both 'alpha' and 'gamma'"));
    }
    if file.cycles.is_some() && file.full == Some(true) {
        return Err(CliError::invalid("config file sets both 'cycles' and 'full'"));
    }

    // alpha/gamma act as one setting: a flag for either replaces both file keys
    let (alpha, gamma) = if flags.alpha.is_some() || flags.gamma.is_some() {
        (flags.alpha, flags.gamma)
    } else {
        (file.alpha, file.gamma)
    };
    let cycles = if flags.cycles.is_some() || flags.full {
        flags.cycles.map_or(CycleMode::Full, CycleMode::Finite)
    } else {
        file.cycles.map_or(CycleMode::Full, CycleMode::Finite)
    };
    if cycles == CycleMode::Finite(0) {
        return Err(CliError::invalid("--cycles must be >= 1"));
    }
    let b_list = match flags.b {
        Some(b) => b,
        None => match file.b {
            Some(v) => v.into_vec("b")?,
            None => Vec::new(),
        },
    };
    if b_list.contains(&0) {
        return Err(CliError::invalid("--b values must be >= 1"));
    }
    let alphas = match flags.alphas {
        Some(a) => a,
        None => match file.alphas {
            Some(v) => v.into_vec("alphas")?,
            None => Vec::new(),
        },
    };

    let mut source = match (alpha, gamma) {
        (Some(a), None) => Some(GammaSource::Alpha(a)),
        (None, Some(g)) => Some(GammaSource::Gamma(g)),
        (None, None) => None,
        (Some(_), Some(_)) => {
            return Err(CliError::invalid("--alpha and --gamma are mutually exclusive"))
        }
    };
    if command == CommandKind::Bounds && b_list.len() == 1 {
        if source.is_some() {
            return Err(CliError::invalid("--b and --alpha/--gamma are mutually exclusive"));
        }
        source = Some(GammaSource::Special(b_list[0]));
    }

    let eps_step = flags.eps_step.or(file.eps_step).unwrap_or(spinlabor::fluctuation::DEFAULT_EPS_STEP);
    if !(eps_step > 0.0 && eps_step.is_finite()) {
        return Err(CliError::invalid(format!("--eps-step must be > 0, got {eps_step}")));
    }
    let eps_max = flags.eps_max.or(file.eps_max);
    if let Some(e) = eps_max {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(CliError::invalid(format!("--eps-max must be >= 0, got {e}")));
        }
    }
    let n_samples = flags.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
    if n_samples < 1 {
        return Err(CliError::invalid("--samples must be >= 1"));
    }

    let config = RunConfig {
        command,
        source,
        p_init: flags.p_init.or(file.p_init).unwrap_or(0.5),
        tail_tol: flags.tail_tol.or(file.tail_tol).unwrap_or(spinlabor::spin::DEFAULT_TAIL_TOL),
        cycles,
        n_samples,
        master_seed: flags.seed.or(file.seed).unwrap_or(0),
        eps_max,
        eps_step,
        b_list,
        fig: flags.fig.or(file.fig),
        alphas,
        output: flags.output.or(file.output),
        format: flags.format.or(file.format).unwrap_or(Format::Csv),
        printed_recurrence: flags.printed_recurrence,
    };
    check_required(&config)?;
    Ok(config)
}

fn check_required(config: &RunConfig) -> Result<(), CliError> {
    match config.command {
        CommandKind::Pmf | CommandKind::Simulate | CommandKind::Jarzynski | CommandKind::Bounds => {
            if config.source.is_none() {
                let extra = if config.command == CommandKind::Bounds { " or a single --b" } else { "" };
                return Err(CliError::invalid(format!("one of --alpha or --gamma{extra} is required")));
            }
            // surface domain errors before any work starts
            config.params()?;
        }
        CommandKind::Semianalytic => {}
        CommandKind::Figures => {
            if config.fig.is_none() {
                return Err(CliError::invalid("--fig is required"));
            }
            for &a in &config.alphas {
                config.params_for(GammaSource::Alpha(a))?;
            }
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name) into a validated config.
pub fn parse_and_validate<I, S>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Usage)?;
    let (kind, flags) = cli.command.split();
    resolve(kind, flags)
}
