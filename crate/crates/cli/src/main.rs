use clap::{Args, Parser, Subcommand};
use lpke::sim::Mode;
use lpke_cli::commands::{self, SweepSpec};
use lpke_cli::{CliError, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lpke", version, about = "Manipulator on an orbiting spacecraft: simulate, compare, sweep, bench")]
struct Cli {
    /// Reserved: runs are deterministic and draw no random numbers.
    #[arg(long, global = true)]
    seedless: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Propagation mode: ModeI, ModeII, ModeIII, Free or Oracle.
    #[arg(long)]
    mode: Option<String>,

    /// Step size (s).
    #[arg(long)]
    dt: Option<f64>,

    /// Horizon (s).
    #[arg(long)]
    duration: Option<f64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides { mode: self.mode.clone(), dt: self.dt, duration: self.duration }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a config and write the trajectory CSV.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Trajectory CSV path.
        #[arg(long, default_value = "trajectory.csv")]
        output: PathBuf,
    },
    /// Joint and momentum deviations between two trajectory CSVs on the same time grid.
    Compare { a: PathBuf, b: PathBuf },
    /// Grid of runs over eccentricity and perigee altitude.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value_t = 0.0)]
        ecc_min: f64,
        #[arg(long, default_value_t = 0.2)]
        ecc_max: f64,
        #[arg(long, default_value_t = 10)]
        ecc_samples: usize,
        /// Lowest perigee altitude (m).
        #[arg(long, default_value_t = 400e3)]
        alt_min: f64,
        /// Highest perigee altitude (m).
        #[arg(long, default_value_t = 35786e3)]
        alt_max: f64,
        #[arg(long, default_value_t = 10)]
        alt_samples: usize,
        /// Comma-separated modes run in every cell.
        #[arg(long, default_value = "ModeI,ModeII,ModeIII", value_delimiter = ',')]
        modes: Vec<String>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Also report the joint deviation from the oracle per cell.
        #[arg(long)]
        oracle: bool,
    },
    /// Wall-time table of Modes I, II and III on one horizon.
    Bench {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::Simulate { config, run, output } => Ok(commands::simulate(&config, &run.overrides(), Some(&output))?.lines()),
        Command::Compare { a, b } => Ok(commands::compare(&a, &b)?.lines()),
        Command::Sweep { config, run, ecc_min, ecc_max, ecc_samples, alt_min, alt_max, alt_samples, modes, threads, oracle } => {
            let modes = modes
                .iter()
                .map(|m| Mode::parse(m.trim()).ok_or_else(|| CliError::schema("sweep.modes", format!("unknown mode `{m}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = SweepSpec {
                ecc: (ecc_min, ecc_max),
                ecc_samples,
                altitude_m: (alt_min, alt_max),
                altitude_samples: alt_samples,
                modes,
                threads,
                oracle,
            };
            Ok(commands::sweep(&config, &run.overrides(), &spec)?.lines())
        }
        Command::Bench { config, run, runs } => {
            let b = commands::bench(&config, &run.overrides(), runs)?;
            if !b.mode_i_fastest() {
                eprintln!("warning: Mode I was not the fastest mode");
            }
            Ok(commands::bench_lines(&b))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
