use clap::{Parser, Subcommand};
use slafem::error::Error;
use slafem::material::kernel_validation_suite;
use slafem::scenario::{self, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slafem", version, about = "Quasi-static viscoelastic flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value, e.g. --set geometry.nx=60. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run a built-in scenario (diapir_6_1 or incline_6_2).
    Preset {
        name: String,
        /// Output directory; defaults to the preset name.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Check the linearized kernels against finite differences.
    ValidateKernels {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the resolved configuration of a preset or config file.
    Info {
        /// Preset name or path to a TOML file.
        target: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

fn init_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("SLA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| Error::Validation(format!("SLA_THREADS must be an integer, got {raw:?}")))?;
    if n == 0 {
        return Ok(()); // 0 means let rayon pick
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

fn load_config(target: &str, sets: &[String]) -> Result<ScenarioConfig, Error> {
    let base = if target.ends_with(".toml") || std::path::Path::new(target).exists() {
        let text = std::fs::read_to_string(target)
            .map_err(|e| Error::Parse(format!("cannot read {target}: {e}")))?;
        scenario::parse_config(&text)?
    } else {
        scenario::preset(target)?
    };
    scenario::apply_overrides(&base, sets)
}

fn execute(cfg: &ScenarioConfig) -> Result<(), Error> {
    println!(
        "mesh {}x{} ({} elements), {} steps of {} Ma -> {}",
        cfg.geometry.nx,
        cfg.geometry.ny_salt + cfg.geometry.ny_sediment,
        2 * cfg.geometry.nx * (cfg.geometry.ny_salt + cfg.geometry.ny_sediment),
        cfg.time.n_steps,
        cfg.time.dt,
        cfg.output.directory,
    );
    let outcome = scenario::run_scenario(cfg)?;
    if let Some(last) = outcome.records.last() {
        println!(
            "step {}: apex {:.4} m, max |u| {:.3e} m, min area ratio {:.4}",
            last.step, last.apex_height, last.max_u, last.min_area_ratio
        );
    }
    println!(
        "max |det F - 1| = {:.3e}",
        outcome.sim.max_detf_deviation()
    );
    match outcome.error {
        Some(e) => Err(e),
        None => {
            println!("ok: {} steps completed", outcome.records.len());
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Run { config, sets } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                Error::Parse(format!("cannot read {}: {e}", config.display()))
            })?;
            let cfg = scenario::parse_config(&text)?;
            let cfg = scenario::apply_overrides(&cfg, &sets)?;
            execute(&cfg)
        }
        Command::Preset { name, out, sets } => {
            let mut cfg = scenario::preset(&name)?;
            cfg.output.directory = out
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| name.clone());
            let cfg = scenario::apply_overrides(&cfg, &sets)?;
            execute(&cfg)
        }
        Command::ValidateKernels { samples, seed } => {
            let materials = [
                scenario::preset("diapir_6_1")?.salt,
                scenario::preset("diapir_6_1")?.sediment,
            ];
            let report = kernel_validation_suite(&materials, samples, seed)?;
            println!(
                "kernel check: {} samples, max rel err elasticity {:.3e}, viscosity {:.3e}",
                report.samples, report.max_rel_err_elasticity, report.max_rel_err_viscosity
            );
            if report.max_rel_err() < 1e-5 {
                println!("ok: kernels match finite differences");
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "kernel mismatch: max rel err {:.3e} >= 1e-5",
                    report.max_rel_err()
                )))
            }
        }
        Command::Info { target, sets } => {
            let cfg = load_config(&target, &sets)?;
            print!("{}", scenario::serialize_config(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            println!("FAILED: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
