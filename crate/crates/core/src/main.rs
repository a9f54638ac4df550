use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use warp_sim::metrics;
use warp_sim::scenario::{ScenarioConfig, Traffic};
use warp_sim::sim::{run_scenario, INTERVAL};
use warp_sim::trace::{Trace, TraceLevel};

#[derive(Parser)]
#[command(name = "warp-sim", version, about = "wARP-Path over 802.11 DCF ad hoc network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceArg {
    Full,
    Summary,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write the trace and metric CSVs.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        traffic: Option<Traffic>,
        #[arg(long, value_enum, default_value = "summary")]
        trace: TraceArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Simulate { scenario, seed, out, traffic, trace } = cli.command;

    let text = match fs::read_to_string(&scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", scenario.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match ScenarioConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", scenario.display());
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = traffic {
        cfg.traffic = t;
    }

    match run(&cfg, &out, trace) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cfg: &ScenarioConfig, out: &PathBuf, trace: TraceArg) -> Result<(), Box<dyn std::error::Error>> {
    fs::create_dir_all(out)?;
    let level = match trace {
        TraceArg::Full => TraceLevel::Full,
        TraceArg::Summary => TraceLevel::Summary,
    };
    let file = fs::File::create(out.join("trace.csv"))?;
    let sink = Trace::writer(level, Box::new(BufWriter::new(file)));
    let (result, mut sink) = run_scenario(cfg, sink)?;
    sink.finish()?;
    metrics::export(out, &result.records, &result.session_rows, cfg.sim_end, INTERVAL)?;
    let s = &result.summary;
    println!(
        "seed {} {}: goodput {:.2}% avg delay {} s, {} events",
        cfg.seed,
        cfg.traffic,
        s.goodput_percent,
        s.avg_delay.map_or("n/a".to_string(), |d| format!("{d:.4}")),
        result.events
    );
    Ok(())
}
