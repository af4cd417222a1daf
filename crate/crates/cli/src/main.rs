use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lifisim::harness::{self, with_workers, Written};
use lifisim::scenario::{Activity, Direction, Scenario, Simulator};
use lifisim::Error;

#[derive(Parser)]
#[command(name = "lifisim", version, about = "Indoor optical spatial-modulation link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER versus received SNR at one location (union bound and Monte Carlo).
    BerSweep(Common),
    /// Required-SNR CDFs for a static user over the room.
    CdfMap(Common),
    /// Required-SNR CDFs along a random-waypoint trajectory of a walking user.
    OrwpRun(Common),
    /// Uplink BER and energy efficiency over a symbol-energy grid.
    UplinkEe(Common),
    /// Check a scenario file and print its hash.
    ValidateConfig(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Without it the built-in defaults are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Spacing of the position grid in metres.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Orientation draws per grid point and direction.
    #[arg(long)]
    orientations_per_point: Option<usize>,
    /// Monte-Carlo symbols per SNR point of the BER sweep.
    #[arg(long)]
    mc_symbols: Option<u64>,
}

impl Common {
    /// Scenario from the file or from defaults suited to `command`, with overrides applied.
    fn scenario(&self, command: &str) -> lifisim::Result<Scenario> {
        let mut s = match &self.config {
            Some(path) => Scenario::load(path)?,
            None => {
                let mut s = Scenario::default();
                match command {
                    "orwp-run" => s.activity = Activity::Walking,
                    "uplink-ee" => s.direction = Direction::Uplink,
                    _ => {}
                }
                s
            }
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(step) = self.grid_step {
            s.cdf.grid_step = step;
        }
        if let Some(n) = self.orientations_per_point {
            s.cdf.orientations_per_point = n;
        }
        if let Some(n) = self.mc_symbols {
            s.ber_sweep.mc_symbols = n;
        }
        s.validate()?;
        Ok(s)
    }
}

fn print_written(w: &Written) {
    for f in &w.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> lifisim::Result<()> {
    let (name, common) = match &cli.command {
        Command::BerSweep(c) => ("ber-sweep", c),
        Command::CdfMap(c) => ("cdf-map", c),
        Command::OrwpRun(c) => ("orwp-run", c),
        Command::UplinkEe(c) => ("uplink-ee", c),
        Command::ValidateConfig(c) => ("validate-config", c),
    };
    let scenario = common.scenario(name)?;
    let sim = Simulator::new(&scenario)?;
    let out = common.out.clone();
    with_workers(common.workers, || -> lifisim::Result<()> {
        match &cli.command {
            Command::ValidateConfig(_) => {
                println!("ok scenario_hash={} seed={}", scenario.hash(), scenario.seed);
                if let Some(model) = sim.nlos_model() {
                    println!(
                        "surface elements={} spectral radius of E*G <= {:.6}",
                        model.mesh().len(),
                        model.radiosity().spectral_radius()
                    );
                }
            }
            Command::CdfMap(_) | Command::OrwpRun(_) => {
                let (res, written) = if matches!(cli.command, Command::CdfMap(_)) {
                    harness::cdf_map_to_dir(&sim, &out)?
                } else {
                    harness::orwp_to_dir(&sim, &out)?
                };
                println!("scheme       n  outage  p10[dB]  median[dB]  p90[dB]");
                for s in &res.summary {
                    println!(
                        "{:<8} {:>5}  {:>6.3}  {:>7.2}  {:>10.2}  {:>7.2}",
                        s.scheme, s.realizations, s.outage_fraction, s.p10_rx_db, s.median_rx_db, s.p90_rx_db
                    );
                }
                print_written(&written);
            }
            Command::BerSweep(_) => {
                let (records, written) = harness::ber_sweep_to_dir(&sim, &out)?;
                println!("{} points", records.len());
                print_written(&written);
            }
            Command::UplinkEe(_) => {
                let (res, written) = harness::uplink_to_dir(&sim, &out)?;
                println!("{}: {} summary rows", res.config, res.summary.len());
                print_written(&written);
            }
        }
        Ok(())
    })?
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_config() => 2,
        Error::Numerical(_) | Error::NonConvergentRadiosity(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
