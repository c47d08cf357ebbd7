//! `pulsed-qfi`: reproducible runs of the kicked-oscillator QFI model.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numeric or consistency error, 4 oracle disagreement.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pulsed_qfi::metrology::{Quantity, SweepAxis};

use commands::{CliError, Method, NoiseArg, OracleArgs, SamplingArg, WignerArgs};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "pulsed-qfi", version, about = "QFI of a pulsed-optomechanical mechanical oscillator")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Per-key overrides; they win over the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega_m: Option<String>,
    /// rad_s or hz.
    #[arg(long, global = true)]
    omega_m_unit: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    gamma_m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    n_th: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    temperature_k: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Pulses per mechanical period: tau = T0 / k.
    #[arg(long, global = true, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    n_max: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    tau_p: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    cavity_length: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    h_rel: Option<String>,
    /// auto or n_lo:n_hi.
    #[arg(long, global = true)]
    fit_window: Option<String>,
    #[arg(long, global = true)]
    out_dir: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("omega_m", &self.omega_m),
            ("omega_m_unit", &self.omega_m_unit),
            ("gamma_m", &self.gamma_m),
            ("n_th", &self.n_th),
            ("temperature_k", &self.temperature_k),
            ("theta", &self.theta),
            ("k", &self.k),
            ("n_max", &self.n_max),
            ("kappa", &self.kappa),
            ("tau_p", &self.tau_p),
            ("cavity_length", &self.cavity_length),
            ("seed", &self.seed),
            ("h_rel", &self.h_rel),
            ("fit_window", &self.fit_window),
            ("out_dir", &self.out_dir),
        ]
        .into_iter()
        .filter_map(|(key, value)| value.clone().map(|v| (key, v)))
        .collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Regime-of-validity report (validate.json).
    Validate,
    /// Stroboscopic moments from the thermal state (evolve.csv).
    Evolve,
    /// QFI trajectory with squeezing and purity (qfi.csv).
    Qfi {
        #[arg(long, value_enum, default_value = "fd")]
        method: Method,
    },
    /// Squeezing strength and angle per pulse (squeeze.csv).
    Squeeze {
        #[arg(long, value_enum, default_value = "after")]
        sampling: SamplingArg,
    },
    /// Wigner function around the n-th kick (wigner.csv).
    Wigner {
        /// Kick index.
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Points per axis.
        #[arg(long, default_value_t = 81)]
        grid: usize,
        /// Half-width of the square window; default four standard deviations.
        #[arg(long)]
        extent: Option<f64>,
    },
    /// Power-law exponent of a qfi.csv (fit.json).
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cartesian parameter sweep in long format (sweep.csv).
    Sweep {
        /// `name=v1,v2,...`; name is k, theta, gamma_m, n_th or n_pulses.
        #[arg(long = "axis", value_parser = commands::parse_axis, required = true)]
        axes: Vec<SweepAxis>,
        /// F, F_max, F_sat, r, phi_rad, purity or alpha; default F.
        #[arg(long = "quantity", value_parser = commands::parse_quantity, value_delimiter = ',')]
        quantities: Vec<Quantity>,
        #[arg(long, value_enum, default_value = "fd")]
        method: Method,
    },
    /// Monte Carlo and Bures cross-checks (oracle.json).
    Oracle {
        /// Monte Carlo trajectories; 0 skips the Monte Carlo check.
        #[arg(long, default_value_t = 10_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 10)]
        mc_pulses: u64,
        #[arg(long, value_enum, default_value = "high-temperature")]
        noise: NoiseArg,
        #[arg(long, default_value_t = 3.0)]
        z_max: f64,
        /// Pulse counts for the Bures check.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        bures_n: Vec<u64>,
        #[arg(long, default_value_t = 1e-3)]
        bures_tol: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = cli.overrides.pairs();
    let borrowed: Vec<(&str, String)> = overrides.iter().map(|(k, v)| (*k, v.clone())).collect();
    let config = RunConfig::load(cli.config.as_deref(), &borrowed)?;
    log::info!("resolved config: {config:?}");
    match cli.command {
        Command::Validate => commands::validate(&config),
        Command::Evolve => commands::evolve(&config),
        Command::Qfi { method } => commands::qfi(&config, method),
        Command::Squeeze { sampling } => commands::squeeze(&config, sampling),
        Command::Wigner { n, grid, extent } => commands::wigner_grid(&config, &WignerArgs { n, grid, extent }),
        Command::Fit { input } => commands::fit(&config, &input),
        Command::Sweep { axes, quantities, method } => commands::run_sweep(&config, axes, quantities, method),
        Command::Oracle { trajectories, mc_pulses, noise, z_max, bures_n, bures_tol } => commands::oracle(
            &config,
            &OracleArgs { trajectories, mc_pulses, noise, z_max, bures_n, bures_tol },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
