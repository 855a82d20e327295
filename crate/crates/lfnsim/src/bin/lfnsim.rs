//! Command-line front end: run scenarios, drive latency×loss sweeps, find
//! the optimal total window, and regenerate plots from stored results.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lfnsim::config::{load_and_resolve, ConfigError};
use lfnsim::optimum::find_optimal_total_cwnd;
use lfnsim::report::{
    emit_run_report, emit_sweep_report, sweep_csv, sweep_svg, ReportFormat,
};
use lfnsim::sweep::{run_sweep, CellStats, SweepGrid};
use lfnsim::world::run_with_seed;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Svg => ReportFormat::Svg,
            Format::Both => ReportFormat::Both,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "lfnsim",
    about = "Deterministic simulator for guaranteed-bandwidth long fat networks"
)]
struct Cli {
    /// Seed for every random stream (overrides the scenario file)
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Artifact format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Emit the per-segment event trace CSV
    #[arg(long, global = true)]
    trace: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario file and emit its artifacts
    Run { scenario: PathBuf },
    /// Run the latency × loss grid on a scenario; emits both the
    /// new-connection and reused-connection tables
    Sweep {
        scenario: PathBuf,
        /// Comma-separated one-way latencies in milliseconds
        #[arg(long, value_delimiter = ',')]
        latencies: Vec<f64>,
        /// Comma-separated per-direction loss probabilities
        #[arg(long, value_delimiter = ',')]
        losses: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
    },
    /// Bisect for the smallest total window that saturates the circuit
    Optimum {
        scenario: PathBuf,
        #[arg(long, default_value_t = 64)]
        lo: u32,
        #[arg(long, default_value_t = 40_000)]
        hi: u32,
    },
    /// Regenerate SVG plots from a results directory
    Report { results: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Error::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(3)
        }
        Err(Error::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum Error {
    Config(ConfigError),
    Io(std::io::Error),
    Other(String),
}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => Error::Io(io),
            other => Error::Config(other),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { scenario } => {
            let resolved = load_and_resolve(scenario)?;
            let result = run_with_seed(&resolved, cli.seed, cli.trace);
            let files = emit_run_report(&result, &cli.out, cli.format.into(), cli.trace)?;
            println!("scenario {} seed {}", result.scenario, result.seed);
            println!("events processed: {}", result.events_processed);
            for f in &result.flows {
                let completion = f
                    .completion
                    .map(|t| format!("{:.6} s", t.as_secs_f64()))
                    .unwrap_or_else(|| "-".to_string());
                let steady = f
                    .steady_goodput(result.bin_width)
                    .map(|g| format!("{:.3} MB/s", g / 1e6))
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "flow {}: completion {completion}, steady {steady}, retx {}, rtos {}",
                    f.name, f.retransmits, f.rto_count
                );
            }
            for path in files {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            scenario,
            latencies,
            losses,
            reps,
        } => {
            let resolved = load_and_resolve(scenario)?;
            if resolved.flows.len() != 1 {
                return Err(Error::Other(
                    "sweep expects a single-flow scenario".to_string(),
                ));
            }
            let mut grid = SweepGrid::default();
            if !latencies.is_empty() {
                grid.one_way_ms = latencies.clone();
            }
            if !losses.is_empty() {
                grid.loss_rates = losses.clone();
            }
            grid.replicates = *reps;
            for p in &grid.loss_rates {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Other(format!("loss probability out of [0,1]: {p}")));
                }
            }
            let ramp = run_sweep(&resolved, &grid, cli.seed, false);
            let reuse = run_sweep(&resolved, &grid, cli.seed, true);
            let files = emit_sweep_report(&ramp, &reuse, &cli.out, cli.format.into())?;
            print_table("new connections (window-scaling ramp)", &ramp);
            print_table("reused connections", &reuse);
            for path in files {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Optimum { scenario, lo, hi } => {
            let resolved = load_and_resolve(scenario)?;
            let r = find_optimal_total_cwnd(&resolved, *lo, *hi, cli.seed)
                .map_err(|e| Error::Other(e.to_string()))?;
            println!(
                "optimal total cwnd: {} packets (goodput {:.3} MB/s, {:.2}% of payload rate)",
                r.optimal,
                r.goodput_at_optimal / 1e6,
                100.0 * r.goodput_at_optimal / r.payload_rate
            );
            println!("acceptance band: [{}, {}]", r.band.0, r.band.1);
            Ok(())
        }
        Command::Report { results } => {
            let mut made = false;
            for table in ["sweep_ramp", "sweep_reuse"] {
                let csv_path = results.join(format!("{table}.csv"));
                if csv_path.exists() {
                    let cells = parse_sweep_csv(&csv_path)?;
                    std::fs::write(results.join(format!("{table}.svg")), sweep_svg(&cells))?;
                    println!("wrote {}", results.join(format!("{table}.svg")).display());
                    made = true;
                }
            }
            if !made {
                return Err(Error::Other(format!(
                    "no sweep CSVs found under {}",
                    results.display()
                )));
            }
            Ok(())
        }
    }
}

fn print_table(title: &str, cells: &[CellStats]) {
    println!("== {title}");
    print!("{}", sweep_csv(cells));
}

fn parse_sweep_csv(path: &Path) -> Result<Vec<CellStats>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut cells = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Other(format!(
                "{}: malformed line {}",
                path.display(),
                i + 1
            )));
        }
        let parse = |s: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|_| Error::Other(format!("{}: bad number {s:?}", path.display())))
        };
        cells.push(CellStats {
            rtt_ms: parse(parts[0])?,
            loss: parse(parts[1])? / 100.0,
            mean_s: parse(parts[2])?,
            median_s: parse(parts[3])?,
            stddev_s: parse(parts[4])?,
            reps: parts[5]
                .parse()
                .map_err(|_| Error::Other("bad reps".to_string()))?,
            completions_s: Vec::new(),
            box_widths_s: Vec::new(),
            rto_counts: Vec::new(),
            repeat_retransmits: Vec::new(),
        });
    }
    Ok(cells)
}
