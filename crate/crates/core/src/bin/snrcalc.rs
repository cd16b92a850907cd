use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use snrcalc::cli::{self, exit, ScenarioConfig};
use snrcalc::sim::write_trace_csv;
use snrcalc::Error;

/// Probabilistic delay and backlog bounds for multi-hop Rayleigh-fading links.
#[derive(Parser, Debug)]
#[command(name = "snrcalc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file with `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set channel.snr_db=15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Emit CSV instead of text.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "SNRCALC_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Backlog, delay and output bounds for one scenario.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Exit with status 3 when the scenario is unstable.
        #[arg(long)]
        strict: bool,
    },
    /// Bounds over a range of one parameter, one CSV table per hop count.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Write `sweep_N<hops>.csv` files here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, env = "SNRCALC_JOBS")]
        jobs: Option<usize>,
    },
    /// Monte-Carlo simulation of the tandem.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        /// Per-slot trace CSV of the first replication.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare bounds with simulated violation frequencies.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        /// Scale the bounds before comparing (values below 1 should fail).
        #[arg(long, default_value_t = 1.0, hide = true)]
        bound_factor: f64,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config {
            key: "--config".into(),
            message: format!("{}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut cfg = ScenarioConfig::default();
    for (k, v) in cli::parse_pairs(&text)? {
        cfg.set(&k, &v)?;
    }
    for o in &common.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
            key: o.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.check()?;
    Ok(cfg)
}

fn io_err(e: io::Error) -> Error {
    Error::ResourceLimit(format!("i/o: {e}"))
}

fn pool(jobs: Option<usize>) -> Result<(), Error> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config {
                key: "--jobs".into(),
                message: "must be at least 1".into(),
            });
        }
        // a second call fails harmlessly when the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, Error> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Bound { common, strict } => {
            let cfg = load(&common)?;
            let r = cli::cmd_bound(&cfg)?;
            let text = if common.csv { r.render_csv() } else { r.render_text() };
            out.write_all(text.as_bytes()).map_err(io_err)?;
            if strict && !r.stable() {
                eprintln!("unstable: V(s) ≥ 1 for every s on the scan");
                return Ok(exit::UNSTABLE);
            }
        }
        Command::Sweep { common, out_dir, jobs } => {
            pool(jobs)?;
            let cfg = load(&common)?;
            let tables = cli::cmd_sweep(&cfg)?;
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(io_err)?;
                    for t in &tables {
                        fs::write(dir.join(format!("sweep_N{}.csv", t.hops)), &t.csv).map_err(io_err)?;
                    }
                }
                None => {
                    for t in &tables {
                        out.write_all(t.csv.as_bytes()).map_err(io_err)?;
                    }
                }
            }
        }
        Command::Simulate { common, sim, trace } => {
            let mut cfg = load(&common)?;
            if let Some(s) = sim.seed {
                cfg.sim_seed = s;
            }
            if trace.is_some() && cfg.sim_trace_slots == 0 {
                cfg.sim_trace_slots = cfg.sim_slots.min(10_000);
            }
            let r = cli::cmd_simulate(&cfg, sim.jobs)?;
            let text = if common.csv { r.render_csv() } else { r.render_text() };
            out.write_all(text.as_bytes()).map_err(io_err)?;
            if let Some(path) = trace {
                let f = fs::File::create(&path).map_err(io_err)?;
                write_trace_csv(r.trace(), io::BufWriter::new(f)).map_err(io_err)?;
            }
        }
        Command::Validate {
            common,
            sim,
            bound_factor,
        } => {
            let mut cfg = load(&common)?;
            if let Some(s) = sim.seed {
                cfg.sim_seed = s;
            }
            let r = cli::cmd_validate(&cfg, bound_factor, sim.jobs)?;
            let text = if common.csv { r.render_csv() } else { r.render_text() };
            out.write_all(text.as_bytes()).map_err(io_err)?;
            if !r.pass() {
                return Ok(exit::VALIDATION_FAIL);
            }
        }
    }
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("snrcalc: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
