use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use phasekit::observables;
use phasekit::potentials::{Family, Potential};
use phasekit::radial::SolverConfig;
use phasekit::validation;
use phasekit_cli::{self as app, Format, RunConfig};

#[derive(Parser)]
#[command(name = "phasekit", version, about = "Partial-wave phase shifts by the variable phase method")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON run config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// directory for the report and its metadata sidecar; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// relative step tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// every channel × method of the config
    Compute,
    /// δ, A(k,∞) and |F| over a log-spaced k grid
    Scan {
        #[arg(long, default_value_t = 0.1)]
        k_min: f64,
        #[arg(long, default_value_t = 100.0)]
        k_max: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        ell: f64,
    },
    /// the invariant suite; exits 0 iff every check passes
    Validate,
    /// high-energy fit for g/r^m or a cut power law
    Fit {
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// S-wave scattering length
    Length,
    /// δ(0⁺) and the bound-state count
    Levinson {
        #[arg(long, default_value_t = 1e-3)]
        k_min: f64,
    },
    /// majorant Δ(k,r) against |δ(k,r)|
    Bound {
        #[arg(long, default_value_t = 1.0)]
        k: f64,
    },
    /// ℓ = −1/2 phases at small k and δ·|ln k|
    Twodim {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-4, 1e-6, 1e-8])]
        k: Vec<f64>,
    },
}

struct Ctx {
    config: Option<RunConfig>,
    solver: SolverConfig,
    format: Format,
    out: Option<PathBuf>,
}

impl Ctx {
    fn potential(&self) -> Result<Potential> {
        match &self.config {
            Some(c) => c.potential(),
            None => bail!("this command needs --config with a \"potential\" field"),
        }
    }

    /// Writes `<name>.<ext>` plus a metadata sidecar, or prints to stdout.
    fn emit(&self, name: &str, csv: Option<String>, json: serde_json::Value) -> Result<()> {
        let (body, ext) = match (self.format, csv) {
            (Format::Csv, Some(c)) => (c, "csv"),
            _ => (serde_json::to_string_pretty(&json)? + "\n", "json"),
        };
        match &self.out {
            None => print!("{body}"),
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{name}.{ext}"));
                std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                let meta = serde_json::json!({
                    "command": name,
                    "version": env!("CARGO_PKG_VERSION"),
                    "config": self.config,
                    "solver": self.solver,
                });
                let mpath = dir.join(format!("{name}.meta.json"));
                std::fs::write(&mpath, serde_json::to_string_pretty(&meta)? + "\n")
                    .with_context(|| format!("writing {}", mpath.display()))?;
                log::info!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn execute(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let solver = match &config {
        Some(c) => c.solver_config(cli.tol)?,
        None => app::SolverSection::default().resolve(cli.tol)?,
    };
    let format = match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => config.as_ref().and_then(|c| c.outputs.format).unwrap_or_default(),
    };
    let out = cli.out.or_else(|| config.as_ref().and_then(|c| c.outputs.dir.clone()).map(PathBuf::from));
    let ctx = Ctx { config, solver, format, out };

    match cli.cmd {
        Cmd::Compute => {
            let Some(cfg) = &ctx.config else { bail!("compute needs --config") };
            let report = app::run(cfg, &ctx.solver)?;
            ctx.emit("compute", Some(report.to_csv()), serde_json::to_value(&report)?)?;
            if report.any_dominated() {
                log::warn!("some rows have a tail-dominated error budget");
            }
            Ok(report.exit_code())
        }
        Cmd::Scan { k_min, k_max, points, ell } => {
            let v = ctx.potential()?;
            let rows = app::scan(&v, &app::logspace(k_min, k_max, points)?, ell, &ctx.solver);
            ctx.emit("scan", Some(app::scan_csv(&rows)), serde_json::to_value(&rows)?)?;
            Ok(if rows.iter().any(|r| r.error.is_some()) { 1 } else { 0 })
        }
        Cmd::Validate => {
            let report = validation::run_invariants(&ctx.solver)?;
            for line in report.lines() {
                eprintln!("{line}");
            }
            ctx.emit("validate", None, serde_json::to_value(&report)?)?;
            Ok(if report.passed() { 0 } else { 1 })
        }
        Cmd::Fit { k_min, k_max, points } => {
            let v = ctx.potential()?;
            let (lo, hi) = match v.family {
                Family::PowerLaw { .. } => (50.0, 500.0),
                _ => (100.0, 1000.0),
            };
            let ks = app::logspace(k_min.unwrap_or(lo), k_max.unwrap_or(hi), points)?;
            let fit = match v.family {
                Family::PowerLaw { .. } => observables::titchmarsh_fit(&v, &ks, &ctx.solver)?,
                _ => observables::high_energy_fit(&v, &ks, &ctx.solver)?,
            };
            ctx.emit("fit", None, fit.to_json())?;
            Ok(0)
        }
        Cmd::Length => {
            let v = ctx.potential()?;
            let a = observables::scattering_length(&v, &ctx.solver)?;
            ctx.emit("length", None, serde_json::to_value(&a)?)?;
            Ok(0)
        }
        Cmd::Levinson { k_min } => {
            let v = ctx.potential()?;
            let r = observables::levinson_check(&v, k_min, &ctx.solver)?;
            let nodes = observables::bound_state_count(&v, 0.0, &ctx.solver)?;
            let mut j = serde_json::to_value(&r)?;
            j["node_count"] = serde_json::json!(nodes);
            j["agrees"] = serde_json::json!(nodes as i64 == r.n_estimate);
            ctx.emit("levinson", None, j)?;
            Ok(if r.low_confidence || nodes as i64 != r.n_estimate { 1 } else { 0 })
        }
        Cmd::Bound { k } => {
            let v = ctx.potential()?;
            let rows = app::bound_table(&v, k, &ctx.solver)?;
            ctx.emit("bound", Some(app::bound_csv(&rows)), serde_json::to_value(&rows)?)?;
            Ok(if rows.iter().all(|r| r.dominates) { 0 } else { 1 })
        }
        Cmd::Twodim { k } => {
            let v = ctx.potential()?;
            let pts = observables::low_energy_2d_scan(&v, &k, &ctx.solver)?;
            ctx.emit("twodim", Some(app::twodim_csv(&pts)), serde_json::to_value(&pts)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHASEKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
