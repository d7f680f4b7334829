//! Command-line front end.

use crate::checks::{self, Family, Plot};
use crate::config::{ConfigError, ModelSpec, Suite, SuiteConfig};
use crate::report::Report;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const THREADS_VAR: &str = "SIGMA2LAB_THREADS";

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    Fail = 1,
    Config = 2,
    Numeric = 3,
}

#[derive(Parser, Debug)]
#[command(name = "sigma2lab", version, about = "Verify σ₂-curvature formulas against independent oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a verification suite.
    Verify(RunArgs),
    /// Sweep λ₁ over ball radii and write CSV.
    Spectrum(RunArgs),
    /// Evaluate V″ and σ₂″ along one seeded path against their oracles.
    Variation(RunArgs),
    /// Re-render a saved report.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Model kind: sphere, hyperbolic, flat or product.
    #[arg(long)]
    pub model: Option<String>,
    /// Dimension of the model.
    #[arg(long)]
    pub n: Option<usize>,
    /// Geodesic ball radius.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Base cell count of the radial eigenvalue solves.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Tolerance override `key=value`; repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VALUE")]
    pub tol_override: Vec<String>,
    /// Directory for the report, plot data and resolved configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// A report written by `verify`.
    pub path: PathBuf,
}

/// Configuration from the file (if any) and the flags.
pub fn resolve(args: &RunArgs, default_suite: Suite) -> Result<SuiteConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(p) => SuiteConfig::load(p)?,
        None => SuiteConfig::new(default_suite),
    };
    if let Some(s) = args.suite {
        cfg.suite = s;
    }
    match &args.model {
        Some(kind) => cfg.models = vec![ModelSpec { kind: kind.clone(), n: args.n.unwrap_or(3), kappa: None, radius: args.radius }],
        None if args.n.is_some() || args.radius.is_some() => {
            if cfg.models.len() != 1 {
                return Err(ConfigError("--n and --radius need --model or exactly one configured model".into()));
            }
            let m = &mut cfg.models[0];
            m.n = args.n.unwrap_or(m.n);
            m.radius = args.radius.or(m.radius);
        }
        None => {}
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.grid {
        cfg.grid.cells = c;
    }
    for o in &args.tol_override {
        cfg.override_tolerance(o)?;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Thread count requested through the environment.
pub fn threads_from_env(value: Option<&str>) -> Result<Option<usize>, ConfigError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
        },
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let var = std::env::var(THREADS_VAR).ok();
    if let Some(n) = threads_from_env(var.as_deref())? {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> ConfigError {
    ConfigError(format!("{}: {e}", path.display()))
}

/// Writes the report, the plot data and the resolved configuration; the
/// saved configuration leaves out the output directory so it can be rerun anywhere.
pub fn write_outputs(dir: &Path, cfg: &SuiteConfig, report: &Report, plots: &[Plot]) -> Result<(), ConfigError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| io_error(&p, e))
    };
    write("report.jsonl", &report.to_jsonl())?;
    write("config.toml", &SuiteConfig { output: None, ..cfg.clone() }.to_toml())?;
    for p in plots {
        write(&p.file, &p.to_csv())?;
    }
    Ok(())
}

/// Runs the command line and returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Config as i32 } else { Exit::Pass as i32 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code as i32,
        Err(Failure::Config(e)) => {
            let _ = writeln!(err, "error: {e}");
            Exit::Config as i32
        }
        Err(Failure::Numeric(e)) => {
            let _ = writeln!(err, "error: {e}");
            Exit::Numeric as i32
        }
    }
}

enum Failure {
    Config(ConfigError),
    Numeric(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<checks::RunFailure> for Failure {
    fn from(e: checks::RunFailure) -> Self {
        Failure::Numeric(e.to_string())
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<Exit, Failure> {
    if let Command::Report(a) = &cmd {
        let text = std::fs::read_to_string(&a.path).map_err(|e| io_error(&a.path, e))?;
        let report = Report::from_jsonl(&text).map_err(|e| ConfigError(format!("{}: {e}", a.path.display())))?;
        let _ = write!(out, "{}", report.to_table());
        return Ok(verdict(&report));
    }
    configure_threads()?;
    match cmd {
        Command::Verify(a) => {
            let cfg = resolve(&a, Suite::All)?;
            let checks = checks::registry(&cfg)?;
            finish(&cfg, &checks, out)
        }
        Command::Variation(a) => {
            let mut cfg = resolve(&a, Suite::Volume)?;
            if cfg.models.is_empty() {
                cfg.models.push(ModelSpec { kind: "sphere".into(), n: 3, kappa: None, radius: None });
            }
            cfg.samples.second_variation = 1;
            cfg.samples.tt_bumps = 1;
            let keep = |f: Family| matches!(f, Family::SecondVariation | Family::Volume | Family::VolumeOracle);
            let checks = checks::registry_for(&cfg, keep)?;
            finish(&cfg, &checks, out)
        }
        Command::Spectrum(a) => {
            let cfg = resolve(&a, Suite::Spectral)?;
            let spec = cfg.models.first().cloned().unwrap_or(ModelSpec { kind: "sphere".into(), n: 3, kappa: None, radius: None });
            let bg = checks::from_spec(&spec)?;
            let k = bg.model.kappa.abs();
            let max = match (spec.radius, bg.model.kind) {
                (Some(r), _) => r,
                (None, sigma2_core::models::ModelKind::Sphere) => std::f64::consts::FRAC_PI_2 / k.sqrt(),
                (None, _) => 2.0 / k.sqrt(),
            };
            let radii: Vec<f64> = (1..=checks::SWEEP_POINTS).map(|j| max * j as f64 / checks::SWEEP_POINTS as f64).collect();
            let plot = checks::sweep_plot(&bg.model, &bg.label, &radii, cfg.grid.cells)
                .map_err(|e| Failure::Numeric(format!("numerical failure in the λ₁ sweep: {e}")))?;
            match &cfg.output {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
                    let p = dir.join(&plot.file);
                    std::fs::write(&p, plot.to_csv()).map_err(|e| io_error(&p, e))?;
                }
                None => {
                    let _ = write!(out, "{}", plot.to_csv());
                }
            }
            Ok(Exit::Pass)
        }
        Command::Report(_) => unreachable!("handled above"),
    }
}

fn finish(cfg: &SuiteConfig, checks: &[checks::Check], out: &mut dyn Write) -> Result<Exit, Failure> {
    let (report, plots) = checks::run(cfg, checks)?;
    if let Some(dir) = &cfg.output {
        write_outputs(dir, cfg, &report, &plots)?;
    }
    let _ = write!(out, "{}", report.to_table());
    Ok(verdict(&report))
}

fn verdict(report: &Report) -> Exit {
    if report.all_pass() {
        Exit::Pass
    } else {
        Exit::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> RunArgs {
        let mut v = vec!["sigma2lab", "verify"];
        v.extend_from_slice(extra);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Verify(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = resolve(&args(&["--suite", "potentials", "--model", "sphere", "--n", "4", "--radius", "0.5", "--seed", "9"]), Suite::All).unwrap();
        assert_eq!(cfg.suite, Suite::Potentials);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.models[0].n, 4);
        assert_eq!(cfg.models[0].radius, Some(0.5));
    }

    #[test]
    fn bad_flags_are_config_errors() {
        assert!(resolve(&args(&["--radius", "0.5"]), Suite::All).is_err());
        assert!(resolve(&args(&["--tol-override", "bogus=1"]), Suite::All).is_err());
        assert!(resolve(&args(&["--model", "torus"]), Suite::All).is_err());
        assert!(resolve(&args(&["--grid", "2"]), Suite::All).is_err());
    }

    #[test]
    fn thread_variable() {
        assert_eq!(threads_from_env(None).unwrap(), None);
        assert_eq!(threads_from_env(Some("4")).unwrap(), Some(4));
        assert!(threads_from_env(Some("0")).is_err());
        assert!(threads_from_env(Some("many")).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["sigma2lab", "verify", "--suite", "nope"].map(OsString::from), &mut o, &mut e), 2);
        assert!(!e.is_empty());
        assert_eq!(main_with(["sigma2lab", "--help"].map(OsString::from), &mut o, &mut e), 0);
    }
}
