use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gainswitch::config::{OutputFormat, StateKind};
use gainswitch::Error;

mod run;

#[derive(Parser, Debug)]
#[command(
    name = "gainswitch",
    version,
    about = "Gain-switched laser pulse and decoy-state attack simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags win over the profile file,
/// which wins over the embedded defaults.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Profile file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub profile: Option<PathBuf>,
    /// Embedded profile to start from.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<PresetArg>,
    /// Comma-separated temperatures in °C.
    #[arg(long, global = true, value_delimiter = ',')]
    pub temps: Option<Vec<f64>>,
    /// Integrator step in seconds.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Recovery band, relative to n_dc.
    #[arg(long, global = true)]
    pub band: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one pulse per temperature; writes trajectories and a metrics table.
    Pulse {
        #[arg(long, value_enum, default_value = "signal")]
        state: StateArg,
    },
    /// Signal and decoy sweep laid out against the reference pulse table.
    Table2,
    /// Pulse train at one temperature with per-cycle metrics.
    Train {
        /// Repetition frequency in Hz.
        #[arg(long)]
        freq: f64,
        #[arg(long, default_value_t = 3)]
        pulses: usize,
        /// Temperature in °C; defaults to the first entry of the temperature list.
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long, value_enum, default_value = "signal")]
        state: StateArg,
    },
    /// Distance scan of the attack balance plus a JSON summary.
    Attack(run::AttackArgs),
    /// Compare the main paths against the brute-force oracles.
    Verify,
    /// Print the effective configuration in profile format.
    DumpConfig,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PresetArg {
    Table1,
    Table2,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum StateArg {
    Signal,
    Decoy,
}

impl From<StateArg> for StateKind {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::Signal => StateKind::Signal,
            StateArg::Decoy => StateKind::Decoy,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::ClampViolation { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run::load_config(&cli.common).and_then(|cfg| match cli.command {
        Command::Pulse { state } => run::pulse(&cfg, state.into()),
        Command::Table2 => run::table2(&cfg),
        Command::Train {
            freq,
            pulses,
            temp,
            state,
        } => run::train(&cfg, freq, pulses, temp, state.into()),
        Command::Attack(args) => run::attack(&cfg, &args),
        Command::Verify => run::verify(&cfg),
        Command::DumpConfig => {
            print!("{}", gainswitch::config::dump_config(&cfg));
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
