use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use pat_cli::commands::{self, RunFlags};
use pat_cli::config::{preset_names, preset_text, ExperimentConfig};
use pat_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "pat", version, about = "Photoacoustic tomography experiments with variable sound speed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file; repeat to sweep several runs.
    #[arg(short, long = "config")]
    config: Vec<PathBuf>,
    /// Built-in preset (`all` for every one); repeatable.
    #[arg(short, long)]
    preset: Vec<String>,
    /// Override a resolved key, e.g. `--set reconstruction.method=neumann`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Permit identical simulation and reconstruction meshes.
    #[arg(long)]
    allow_inverse_crime: bool,
    /// Permit time steps beyond Δt·c_max ≤ h/10.
    #[arg(long)]
    override_stability: bool,
    /// Runs executed concurrently when several configs are given.
    #[arg(short, long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Forward data on the simulation mesh.
    Simulate(ConfigArgs),
    /// Reconstruction from a trace file.
    Reconstruct {
        #[command(flatten)]
        args: ConfigArgs,
        /// Trace file (default: `<output>/trace.patr`).
        #[arg(short, long)]
        input: Option<PathBuf>,
    },
    /// Adjoint, step size and energy checks on the reconstruction setup.
    Diagnose(ConfigArgs),
    /// Rasterize a field file to a 16-bit PGM.
    Render {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        size: usize,
    },
    /// Print the T₀ estimate and the resolved observation time.
    T0(ConfigArgs),
    /// List presets, or print one in config syntax.
    Presets { name: Option<String> },
}

impl ConfigArgs {
    fn flags(&self) -> RunFlags {
        RunFlags { allow_inverse_crime: self.allow_inverse_crime, override_stability: self.override_stability }
    }

    fn configs(&self) -> CliResult<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        for path in &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            out.push(ExperimentConfig::from_text(&text, &self.set).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?);
        }
        let names: Vec<String> = if self.preset.iter().any(|p| p == "all") {
            preset_names().into_iter().map(String::from).collect()
        } else {
            self.preset.clone()
        };
        for name in names {
            preset_text(&name)?;
            out.push(ExperimentConfig::from_text(&format!("preset = {name}\n"), &self.set)?);
        }
        if out.is_empty() {
            out.push(ExperimentConfig::from_text("", &self.set)?);
        }
        if self.jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok(out)
    }
}

/// Runs `job` on every config with up to `jobs` worker threads; returns the
/// first error in config order.
fn sweep(configs: &[ExperimentConfig], jobs: usize, job: impl Fn(&ExperimentConfig) -> CliResult<()> + Sync) -> CliResult<()> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<()>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let r = job(&configs[i]);
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("no worker panicked").into_iter().flatten().collect()
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => {
            let configs = args.configs()?;
            sweep(&configs, args.jobs, |cfg| {
                let path = commands::simulate(cfg, args.flags())?;
                println!("{}: wrote {}", cfg.name, path.display());
                Ok(())
            })
        }
        Command::Reconstruct { args, input } => {
            let configs = args.configs()?;
            if input.is_some() && configs.len() > 1 {
                return Err(CliError::Config("--input needs a single config".into()));
            }
            sweep(&configs, args.jobs, |cfg| {
                let out = commands::reconstruct(cfg, input.as_deref(), args.flags())?;
                let err = out.phantom_error.map_or(String::new(), |e| format!(", phantom error {e:.4}"));
                println!(
                    "{}: {} residual {:.4e}{err}; wrote {}",
                    cfg.name,
                    cfg.method.name(),
                    out.residuals.last().expect("non-empty"),
                    out.field_path.display()
                );
                Ok(())
            })
        }
        Command::Diagnose(args) => {
            let configs = args.configs()?;
            sweep(&configs, args.jobs, |cfg| {
                let checks = commands::diagnose(cfg, args.flags())?;
                for c in &checks {
                    println!("{}: {} {} = {:.4e} (threshold {:.4e})", cfg.name, if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
                }
                let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                if failed.is_empty() {
                    Ok(())
                } else {
                    Err(CliError::Numerical(format!("{}: failed checks: {}", cfg.name, failed.join(", "))))
                }
            })
        }
        Command::Render { input, output, size } => commands::render(&input, &output, size),
        Command::T0(args) => {
            for cfg in args.configs()? {
                let speed = cfg.speed_field()?;
                let (t, t0) = commands::resolve_duration(&cfg, &speed)?;
                println!("{}: T0 = {t0:.6} T = {t:.6}", cfg.name);
            }
            Ok(())
        }
        Command::Presets { name } => {
            match name {
                Some(n) => print!("{}", ExperimentConfig::from_text(&format!("preset = {n}\n"), &[])?.to_text()),
                None => preset_names().iter().for_each(|n| println!("{n}")),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
