mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "scanstage", version, about = "Annotated scene scans to task-specific USD")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic choice; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log: log::LevelFilter,
    /// Print errors on stderr as one JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the descriptive or geometry-focused USD of an annotated scan.
    Flavor(FlavorArgs),
    /// Insert an object into a scene document.
    Insert(InsertArgs),
    /// Compile a simulation bundle around an articulated part.
    Simprep(SimprepArgs),
    /// Check an insertion script against the allowlist.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Descriptive,
    #[value(name = "geometry_focused", alias = "geometry-focused")]
    GeometryFocused,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Mock,
    Http,
}

#[derive(Args, Debug)]
pub struct FlavorArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Scene mesh (.obj or .ply).
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InsertArgs {
    /// Scene document to augment.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Scene mesh; found next to the annotations when omitted.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Object mesh (.obj or .ply).
    #[arg(long)]
    pub object: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub out: PathBuf,
    /// Attempt trace and model transcript, written on success and failure.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimprepArgs {
    /// Scene mesh, or a scene document whose mesh sits next to the annotations.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Articulated part id.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub structural_ratio: Option<f64>,
    #[arg(long)]
    pub static_ratio: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub script: PathBuf,
    /// One allowed callee per line; `#` starts a comment.
    #[arg(long)]
    pub allowlist: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log).format_timestamp(None).init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            f.report(cli.json_errors);
            ExitCode::from(f.code)
        }
    }
}
