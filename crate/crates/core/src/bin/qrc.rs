use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qrc_expressivity::experiments::{run_experiment, Experiment, ExperimentConfig};
use qrc_expressivity::expressivity::Shots;
use qrc_expressivity::Error;

/// Quantum reservoir expressivity experiments.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<Experiment>,
    /// JSON config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_qubits: Option<usize>,
    /// Encodes for the sweeps; upper end of the range for rec-vs-encodes.
    #[arg(long)]
    encodes: Option<usize>,
    /// Shot count, or `inf`.
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        format!("unknown experiment `{s}`; expected dynamics, rec-vs-encodes, eigentasks, circuit-sweep or optimize-sweep")
    })
}

fn resolve(args: &Args) -> qrc_expressivity::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if args.experiment.is_none() && args.config.is_none() {
        return Err(Error::Config("pass --experiment or --config".into()));
    }
    if let Some(e) = args.experiment {
        cfg.experiment = e;
    }
    if let Some(n) = args.n_qubits {
        cfg.n_qubits = n;
        cfg.dynamics.n_qubits = n;
    }
    if let Some(r) = args.encodes {
        cfg.sweep.encodes = r;
        cfg.expressivity.r_max = r;
        cfg.expressivity.eigentask_encodes = r;
        cfg.dynamics.encodes = r;
    }
    if let Some(s) = &args.shots {
        match s.as_str() {
            "inf" | "infinite" => {
                cfg.sweep.shots.clear();
                cfg.optimizer.shots = Shots::Infinite;
            }
            v => {
                let v: u64 = v.parse().map_err(|_| Error::Config(format!("bad shot count `{v}`")))?;
                cfg.sweep.shots = vec![v];
            }
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.resolve()
}

fn main() -> ExitCode {
    env_logger::init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let result = resolve(&args).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Invariant(_) => 3,
                _ => 1,
            })
        }
    }
}
