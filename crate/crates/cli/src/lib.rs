//! Command-line runner: argument and config handling, run directories, commands.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

use config::{apply_config_text, Command, RunConfig};
use output::{Manifest, RunDir};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(schurloc_core::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<schurloc_core::Error> for CliError {
    fn from(e: schurloc_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

/// Flags override the config file, which overrides defaults.
#[derive(Debug, Parser)]
#[command(name = "schurloc", version, about = "Multiscale analysis of a two-layer disordered lattice model")]
pub struct Args {
    /// One of: spectrum, multiscale, follow, dos, spacing, correlator,
    /// percolation, probe-det, probe-disc, certify.
    pub command: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Energy.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long)]
    pub delta_grid: Option<String>,
    #[arg(long)]
    pub k_max: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub trial: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Disorder values, one per position.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Disorder JSON file.
    #[arg(long)]
    pub disorder: Option<String>,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub z: Option<String>,
    #[arg(long)]
    pub block_n: Option<String>,
    #[arg(long)]
    pub residual_tol: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// Worker threads; also read from SCHURLOC_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 19] = [
            ("dims", &self.dims),
            ("gamma", &self.gamma),
            ("phi", &self.phi),
            ("E", &self.energy),
            ("delta", &self.delta),
            ("delta_grid", &self.delta_grid),
            ("k_max", &self.k_max),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("trial", &self.trial),
            ("out", &self.out),
            ("u", &self.u),
            ("disorder", &self.disorder),
            ("x", &self.x),
            ("y", &self.y),
            ("z", &self.z),
            ("block_n", &self.block_n),
            ("residual_tol", &self.residual_tol),
            ("k", &self.k),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

/// Resolve the final configuration from parsed arguments.
pub fn resolve_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let mut c = RunConfig::new(Command::Spectrum);
            apply_config_text(&mut c, &text, &path.display().to_string())?;
            if args.command.is_none() && !text.lines().any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("command")) {
                return Err(CliError::Usage(format!("{}: missing `command`", path.display())));
            }
            c
        }
        None => RunConfig::new(Command::Spectrum),
    };
    match &args.command {
        Some(c) => cfg.command = c.parse().map_err(CliError::Usage)?,
        None if args.config.is_none() => return Err(CliError::Usage("a command or --config is required".into())),
        None => {}
    }
    for (key, value) in args.overrides() {
        cfg.set(key, value).map_err(|e| CliError::Usage(format!("--{key}: {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_workers(n: Option<usize>) {
    let n = n.or_else(|| std::env::var("SCHURLOC_WORKERS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunDir, CliError> {
    let manifest = Manifest::new(cfg).to_value();
    let mut out = RunDir::create(&cfg.out, manifest)?;
    commands::dispatch(cfg, &mut out)?;
    Ok(out)
}

fn write_error(cfg: Option<&RunConfig>, err: &CliError) {
    let Some(cfg) = cfg else { return };
    let doc = serde_json::json!({
        "manifest": Manifest::new(cfg).to_value(),
        "error": { "kind": err.kind(), "message": err.to_string() },
    });
    if std::fs::create_dir_all(&cfg.out).is_ok() {
        let _ = std::fs::write(cfg.out.join("error.json"), serde_json::to_string_pretty(&doc).expect("json") + "\n");
    }
}

/// Entry point shared by the binary and tests. Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_workers(args.workers);
    let cfg = match resolve_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(out) => {
            for p in out.written() {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if !matches!(&e, CliError::Io(m) if m.contains("write-once")) {
                write_error(Some(&cfg), &e);
            }
            e.exit_code()
        }
    }
}
