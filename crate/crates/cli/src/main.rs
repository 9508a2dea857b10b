use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use polariton::harness::{self, HarnessError, RunConfig};
use polariton::QubitState;

#[derive(Parser)]
#[command(name = "polariton", version, about = "Polariton bifurcation readout simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master random seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides `run.threads`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print polariton parameters and critical photon numbers.
    Params(Common),
    /// Pointer-distance map over the configured grid.
    DegMap(Common),
    /// Hysteresis map for one or both qubit states.
    BistabilityMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qubit_state: Option<QubitState>,
    },
    /// Monte-Carlo readout fidelity map.
    FidelityMap(Common),
    /// Single shot with its trajectory.
    Shot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        qubit_state: Option<QubitState>,
        /// Drive frequency, e.g. "7.508 GHz" (default: calibration point).
        #[arg(long, requires = "power")]
        freq: Option<String>,
        /// Input power, e.g. "-89 dBm".
        #[arg(long, requires = "freq", allow_hyphen_values = true)]
        power: Option<String>,
        /// Shot index within the seeded stream family.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Parameter curves versus mixing angle.
    Curves(Common),
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), HarnessError> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_point(freq: &str, power: &str) -> Result<(f64, f64), HarnessError> {
    Ok((
        harness::parse_frequency("--freq", freq)?,
        harness::parse_power_dbm("--power", power)?,
    ))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Params(common) => {
            let (cfg, out) = load(&common)?;
            let r = harness::params_report(&cfg)?;
            println!("{:<10} {:>12} {:>12} {:>12}", "MHz", "bare", "g", "e");
            for ((k, b), ((_, g), (_, e))) in r.bare.iter().zip(r.ground.iter().zip(&r.excited)) {
                println!("{k:<10} {b:>12.3} {g:>12.3} {e:>12.3}");
            }
            println!(
                "{:<10} {:>12.4} {:>12.4} {:>12.4}",
                "theta_rad", r.theta[0], r.theta[1], r.theta[2]
            );
            println!("N_crit upper {:.3}", r.n_crit_upper);
            println!("N_crit lower {:.3}", r.n_crit_lower);
            write(&out.join("params.json"), &(serde_json::to_string_pretty(&r)? + "\n"))?;
        }
        Command::DegMap(common) => {
            let (cfg, out) = load(&common)?;
            let a = harness::sweep_deg_map(&cfg)?;
            let (csv, _) = a.write(&out, "deg_map")?;
            println!("{}", csv.display());
        }
        Command::BistabilityMap { common, qubit_state } => {
            let (cfg, out) = load(&common)?;
            let states = match qubit_state.or(cfg.qubit_state) {
                Some(s) => vec![s],
                None => QubitState::BOTH.to_vec(),
            };
            for eta in states {
                let (a, map) = harness::sweep_bistability(&cfg, eta)?;
                let (csv, _) = a.write(&out, &format!("bistability_{}", eta.label()))?;
                if !map.simply_connected {
                    eprintln!("warning: bistable region for {eta} is not simply connected");
                }
                println!("{}", csv.display());
            }
        }
        Command::FidelityMap(common) => {
            let (cfg, out) = load(&common)?;
            let (a, _) = harness::sweep_fidelity(&cfg)?;
            let (csv, _) = a.write(&out, "fidelity_map")?;
            println!("{}", csv.display());
        }
        Command::Shot {
            common,
            qubit_state,
            freq,
            power,
            index,
        } => {
            let (cfg, out) = load(&common)?;
            let point = match (freq, power) {
                (Some(f), Some(p)) => Some(parse_point(&f, &p)?),
                _ => None,
            };
            let eta = qubit_state.or(cfg.qubit_state).unwrap_or(QubitState::Excited);
            let (_, traj, info) = harness::shot_trace(&cfg, eta, point, index)?;
            let stem = format!("shot_{}_{index}", eta.label());
            write(&out.join(format!("{stem}.csv")), &harness::trajectory_csv(&traj))?;
            write(
                &out.join(format!("{stem}.json")),
                &(serde_json::to_string_pretty(&info)? + "\n"),
            )?;
            println!("{}", out.join(format!("{stem}.csv")).display());
        }
        Command::Curves(common) => {
            let (cfg, out) = load(&common)?;
            let path = out.join("curves.csv");
            write(&path, &harness::curves_csv(&cfg)?)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = matches!(e.downcast_ref::<HarnessError>(), Some(HarnessError::Config(_)));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
