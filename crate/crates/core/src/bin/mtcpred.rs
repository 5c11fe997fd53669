//! Command-line front end. Settings resolve as flags, then `--config`
//! file, then built-in defaults.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtc_traffic::eval::EvalReport;
use mtc_traffic::experiment::{self as exp, ExperimentConfig, Predictor, Staged};
use mtc_traffic::lstm::Checkpoint;
use mtc_traffic::tuner::HyperParams;
use mtc_traffic::{Error, Result};

#[derive(Parser)]
#[command(name = "mtcpred", version, about = "Event-driven MTC traffic prediction experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Replace existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    seq_len: Option<usize>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    /// Event length when the record has no sidecar.
    #[arg(long, global = true)]
    event_len: Option<usize>,
}

#[derive(Args)]
struct RecordArg {
    /// Record CSV produced by `generate`.
    #[arg(long, default_value = "out/record.csv")]
    record: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Lstm,
    Di,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a transmission record.
    Generate {
        #[arg(long, value_enum, conflicts_with = "spec")]
        scenario: Option<Scenario>,
        /// Network specification JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        events: Option<usize>,
        #[arg(long)]
        p_x: Option<f64>,
        #[arg(long)]
        p_y: Option<f64>,
    },
    /// Train the LSTM on the training partition.
    Train {
        #[command(flatten)]
        record: RecordArg,
        /// Use the best known hyper-parameters.
        #[arg(long, conflicts_with_all = ["default_params", "hyperparams"])]
        best_paper_params: bool,
        /// Use the untuned baseline hyper-parameters.
        #[arg(long, conflicts_with = "hyperparams")]
        default_params: bool,
        /// Hyper-parameter JSON, e.g. `best_hyperparams.json` from `tune`.
        #[arg(long)]
        hyperparams: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Bayesian hyper-parameter search.
    Tune {
        #[command(flatten)]
        record: RecordArg,
        #[arg(long)]
        budget: Option<usize>,
        /// Concurrent trials; 1 is deterministic.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Tune once per sequence length.
    Sweep {
        #[command(flatten)]
        record: RecordArg,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Metrics of a predictor on the test partition.
    Evaluate {
        #[arg(value_enum)]
        predictor: Which,
        #[command(flatten)]
        record: RecordArg,
        /// Checkpoint for the LSTM predictor.
        #[arg(long, default_value = "out/model.json")]
        model: PathBuf,
        /// DI edge threshold in bits per step.
        #[arg(long)]
        di_threshold: Option<f64>,
        /// Calibrate the DI threshold by permutation.
        #[arg(long)]
        calibrate: bool,
    },
    /// Fast-uplink-grant simulation over the test partition.
    Simulate {
        #[arg(value_enum)]
        predictor: Which,
        #[command(flatten)]
        record: RecordArg,
        #[arg(long, default_value = "out/model.json")]
        model: PathBuf,
        #[arg(long)]
        di_threshold: Option<f64>,
        #[arg(long)]
        calibrate: bool,
    },
    /// Delta table of evaluation reports against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

fn resolve(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::default(),
    };
    fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *slot = v.clone();
        }
    }
    set(&mut cfg.seed, &common.seed);
    set(&mut cfg.seq_len, &common.seq_len);
    set(&mut cfg.train_fraction, &common.train_fraction);
    match command {
        Command::Generate { scenario, spec, events, p_x, p_y } => {
            if scenario.is_some() {
                cfg.spec = None;
            }
            if spec.is_some() {
                cfg.spec = spec.clone();
            }
            set(&mut cfg.num_events, events);
            set(&mut cfg.p_x, p_x);
            set(&mut cfg.p_y, p_y);
        }
        Command::Train { epochs, .. } => set(&mut cfg.hyperparams.epochs, epochs),
        Command::Tune { budget, jobs, .. } => {
            set(&mut cfg.tuner.budget, budget);
            set(&mut cfg.tuner.jobs, jobs);
        }
        Command::Sweep { lengths, budget, jobs, .. } => {
            set(&mut cfg.sweep_lengths, lengths);
            set(&mut cfg.tuner.budget, budget);
            set(&mut cfg.tuner.jobs, jobs);
        }
        Command::Evaluate { di_threshold, calibrate, .. } | Command::Simulate { di_threshold, calibrate, .. } => {
            set(&mut cfg.di.threshold, di_threshold);
            cfg.di.calibrate |= *calibrate;
        }
        Command::Compare { .. } => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let cfg = resolve(&cli.common, &cli.command)?;
    let record = |r: &RecordArg| exp::load_record(&r.record, cli.common.event_len);
    let staged: Staged = match &cli.command {
        Command::Generate { .. } => exp::cmd_generate(&cfg)?,
        Command::Train {
            record: r,
            best_paper_params,
            default_params,
            hyperparams,
            epochs,
        } => {
            let mut hp = if *best_paper_params {
                HyperParams::paper_best()
            } else if *default_params {
                HyperParams::untuned_default()
            } else if let Some(p) = hyperparams {
                exp::load_json::<HyperParams>(p)?.value
            } else {
                cfg.hyperparams.clone()
            };
            if let Some(e) = epochs {
                hp.epochs = *e;
            }
            let rec = record(r)?;
            let mut st = exp::cmd_train(&cfg, &rec, &hp)?;
            if let Some(p) = hyperparams {
                st.input(&exp::load_json::<HyperParams>(p)?);
            }
            st
        }
        Command::Tune { record: r, .. } => exp::cmd_tune(&cfg, &record(r)?)?,
        Command::Sweep { record: r, .. } => exp::cmd_sweep(&cfg, &record(r)?)?,
        Command::Evaluate { predictor, record: r, model, .. } | Command::Simulate { predictor, record: r, model, .. } => {
            let rec = record(r)?;
            let ck;
            let p = match predictor {
                Which::Lstm => {
                    ck = exp::load_json::<Checkpoint>(model)?;
                    Predictor::Lstm(&ck)
                }
                Which::Di => Predictor::Di,
            };
            if matches!(cli.command, Command::Evaluate { .. }) {
                exp::cmd_evaluate(&cfg, &rec, p)?
            } else {
                exp::cmd_simulate(&cfg, &rec, p)?
            }
        }
        Command::Compare { reports } => {
            let loaded = reports
                .iter()
                .map(exp::load_json::<EvalReport>)
                .collect::<Result<Vec<_>>>()?;
            exp::cmd_compare(&loaded)?
        }
    };
    let mut staged = staged;
    if let Some(p) = &cli.common.config {
        staged.inputs.insert(p.display().to_string(), exp::sha256_hex(&std::fs::read(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?));
    }
    let summary = std::mem::take(&mut staged.summary);
    let manifest = staged.commit(&cli.common.out, cli.common.force, argv, &cfg)?;
    println!("{summary}");
    for name in manifest.outputs.keys() {
        println!("wrote {}", cli.common.out.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
