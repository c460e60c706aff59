//! The `usu` command line: upsampling, desiderata verification, the
//! synthetic benchmark and dataset generation.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use usu_core::synth::InstanceKind;
use usu_core::Method;

pub mod bench;
pub mod error;
pub mod output;
pub mod synth;
pub mod upsample;
pub mod verify;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "usu", version, about = "Mass-conserving upsampling of attribution maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upsample a coarse attribution grid to full resolution.
    Upsample(UpsampleArgs),
    /// Run the randomized desiderata battery against one method.
    Verify(VerifyArgs),
    /// Score methods on a synthetic dataset.
    Bench(BenchArgs),
    /// Write a synthetic dataset to disk.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    /// USUG binary grid.
    #[default]
    Bin,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    /// Segments from the instance image, scores from the attribution.
    None,
    /// Ground-truth scores on quad-refined segments.
    Scores,
    /// Ground-truth foreground partition and scores.
    Full,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: usu_core::UsuError| e.to_string())
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    let dims = (parse(h)?, parse(w)?);
    if dims.0 == 0 || dims.1 == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok(dims)
}

fn parse_pattern(s: &str) -> Result<String, String> {
    if s.len() == 4 && s.chars().all(|c| c == '0' || c == '1') {
        Ok(s.to_string())
    } else {
        Err(format!("expected four 0/1 flags, got '{s}'"))
    }
}

#[derive(Clone, Debug, Args)]
pub struct RefineArgs {
    /// Enable hierarchical boundary refinement (usu only).
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Comparator tolerance; defaults to 0.01 * sqrt(H * W).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    /// Directory receiving one label file per refinement depth.
    #[arg(long, value_name = "DIR")]
    pub export_hierarchy: Option<PathBuf>,
}

impl RefineArgs {
    pub fn config(&self) -> usu_core::RefineConfig {
        usu_core::RefineConfig {
            theta: self.theta,
            mu: self.mu,
            tau: self.tau,
            tolerance: self.tol,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Coarse grid, one value per neighbourhood.
    #[arg(long, value_name = "FILE")]
    pub coarse: PathBuf,
    /// Segment label file with scores (required for usu and iwmr).
    #[arg(long, value_name = "FILE")]
    pub segments: Option<PathBuf>,
    /// Neighbourhood label file; defaults to the block partition of the
    /// target into the coarse grid's shape.
    #[arg(long, value_name = "FILE")]
    pub neighbourhoods: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_lambda: f64,
    /// Output size; defaults to the segment map's size.
    #[arg(long, value_name = "HxW", value_parser = parse_dims)]
    pub target: Option<(usize, usize)>,
    /// Format of the coarse input and the output grid.
    #[arg(long, value_enum, default_value_t = FileFormat::Bin)]
    pub format: FileFormat,
    /// Also write a min-max scaled 16-bit PGM of the result.
    #[arg(long, value_name = "FILE")]
    pub export_pgm: Option<PathBuf>,
    #[command(flatten)]
    pub refine: RefineArgs,
}

#[derive(Clone, Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub max_side: usize,
    #[arg(long, default_value_t = 8)]
    pub max_blocks: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_lambda: f64,
    /// CSV report destination.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Expected D1..D4 pass flags, e.g. 1111.
    #[arg(long, value_parser = parse_pattern)]
    pub expect: Option<String>,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = ["shapes", "patterns"], default_value = "shapes")]
    pub dataset: String,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "usu,bilinear")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub resolutions: Vec<usize>,
    #[arg(long, value_enum, default_value_t = OracleMode::None)]
    pub oracle: OracleMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    /// Per-instance CSV destination.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    /// Instance kind (circle, triangle, square, zigzag, sine, spiral,
    /// concentric, moire) or a family (shapes, patterns).
    #[arg(long)]
    pub kind: String,
    /// Instances per kind.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "4,7,14")]
    pub resolutions: Vec<usize>,
    #[arg(long, value_name = "DIR")]
    pub outdir: PathBuf,
}

pub(crate) fn kinds_for(name: &str) -> CliResult<Vec<InstanceKind>> {
    if let Ok(family) = name.parse::<usu_core::synth::Family>() {
        return Ok(family.kinds());
    }
    Ok(vec![name.parse::<InstanceKind>()?])
}

/// Runs a parsed command, writing its report to `out` and warnings to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Upsample(a) => upsample::run(&a, out, err),
        Command::Verify(a) => verify::run(&a, out),
        Command::Bench(a) => bench::run_command(&a, out),
        Command::Synth(a) => synth::run(&a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return error::EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return error::EXIT_OK;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => error::EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "usu: {e}");
            e.exit_code()
        }
    }
}
