use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use chanalloc::client::{load_log, replay_lines, run_sensor_emitter};
use chanalloc::scenario::Scenario;
use chanalloc::server::{query_status, serve_status, Controller, ServeOptions};
use chanalloc::sim::{simulate, RunReport};
use chanalloc::spectrum::{classify_quality, growth_model, LevelDbm};

#[derive(Parser)]
#[command(
    name = "chanalloc",
    version,
    about = "2.4 GHz dynamic channel allocation simulator and controller"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in-process and write the run report.
    Simulate {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10)]
        rounds: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Structured)]
        format: Format,
    },
    /// Run the controller on a TCP endpoint.
    Serve {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "127.0.0.1:7400")]
        listen: String,
        /// Stop after this many rounds.
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Structured)]
        format: Format,
        /// Endpoint answering each connection with one status line.
        #[arg(long)]
        status_listen: Option<String>,
        #[arg(long, default_value_t = 2000)]
        window_timeout_ms: u64,
    },
    /// Run one simulated sensor from a scenario against a controller.
    Emit {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        sensor: String,
        #[arg(long)]
        connect: SocketAddr,
        #[arg(long, default_value_t = 10)]
        rounds: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Send a recorded message log to a controller.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        connect: SocketAddr,
        /// How long to wait for replies.
        #[arg(long, default_value_t = 500)]
        linger_ms: u64,
    },
    /// Print a controller's status.
    Status {
        #[arg(long)]
        connect: SocketAddr,
    },
    /// Evaluate the access-point growth power law.
    Growth { year: i32 },
    /// Grade a signal level.
    Classify {
        #[arg(allow_negative_numbers = true)]
        level_dbm: f64,
    },
}

fn render(report: &RunReport, format: Format) -> String {
    match format {
        Format::Table => report.to_csv(),
        Format::Structured => report.to_json(),
    }
}

fn emit_report(report: &RunReport, out: Option<PathBuf>, format: Format) -> Result<(), String> {
    let text = render(report, format);
    match out {
        Some(path) => {
            std::fs::write(&path, text)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            print!("{}", report.summary());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate {
            scenario,
            rounds,
            seed,
            out,
            format,
        } => {
            let sc = Scenario::load(&scenario)
                .map_err(|e| e.to_string())?
                .with_seed(seed);
            let report = simulate(sc, rounds).map_err(|e| e.to_string())?;
            emit_report(&report, out, format)
        }
        Command::Serve {
            scenario,
            listen,
            rounds,
            seed,
            out,
            format,
            status_listen,
            window_timeout_ms,
        } => {
            let sc = Scenario::load(&scenario)
                .map_err(|e| e.to_string())?
                .with_seed(seed);
            let opts = ServeOptions {
                scenario: sc,
                max_rounds: rounds,
                window_timeout: Duration::from_millis(window_timeout_ms),
            };
            let controller = Controller::bind(&listen, opts)
                .map_err(|e| format!("cannot bind {listen}: {e}"))?;
            let handle = controller.spawn().map_err(|e| e.to_string())?;
            eprintln!("listening on {}", handle.addr());
            if let Some(addr) = status_listen {
                let l = TcpListener::bind(&addr).map_err(|e| format!("cannot bind {addr}: {e}"))?;
                serve_status(l, handle.status_cell(), handle.shutdown_flag())
                    .map_err(|e| e.to_string())?;
            }
            let flag = handle.shutdown_flag();
            ctrlc::set_handler(move || flag.store(true, std::sync::atomic::Ordering::SeqCst))
                .map_err(|e| e.to_string())?;
            let report = handle.join();
            emit_report(&report, out, format)
        }
        Command::Emit {
            scenario,
            sensor,
            connect,
            rounds,
            seed,
        } => {
            let sc = Scenario::load(&scenario)
                .map_err(|e| e.to_string())?
                .with_seed(seed);
            let summary =
                run_sensor_emitter(connect, &sc, &sensor, rounds, Duration::from_secs(60))
                    .map_err(|e| e.to_string())?;
            println!(
                "{sensor}: sent {} reports, saw {} assignments",
                summary.reports_sent,
                summary.assignments_seen.len()
            );
            Ok(())
        }
        Command::Replay {
            log,
            connect,
            linger_ms,
        } => {
            let lines = load_log(&log).map_err(|e| e.to_string())?;
            let replies = replay_lines(connect, &lines, Duration::from_millis(linger_ms))
                .map_err(|e| e.to_string())?;
            for r in replies {
                println!("{}", serde_json::to_string(&r).expect("message serializes"));
            }
            Ok(())
        }
        Command::Status { connect } => {
            let status = query_status(connect).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&status).expect("status serializes")
            );
            Ok(())
        }
        Command::Growth { year } => {
            let n = growth_model(year).map_err(|e| e.to_string())?;
            println!("{n:.2} access points at the end of {year}");
            Ok(())
        }
        Command::Classify { level_dbm } => {
            let level = LevelDbm::new(level_dbm).map_err(|e| e.to_string())?;
            println!("{level}: {}", classify_quality(level).label);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CHANALLOC_LOG")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
