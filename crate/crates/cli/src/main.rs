use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ltlearn::benchgen::{BenchSpec, Generator, RucParams};
use ltlearn::trace::load_spec;
use ltlearn_cli::{
    cmd_gen, cmd_learn, cmd_masking, cmd_ruc, corpus_benches, ensure_sound, hamming_benches, masking_spec,
    run_benches, write_csv, write_json, LearnFlags,
};

#[derive(Parser)]
#[command(name = "ltlearn", version, about = "Learn LTLf formulae from positive and negative traces")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a formula separating a trace file.
    Learn {
        file: PathBuf,
        #[command(flatten)]
        flags: LearnFlags,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the divide-and-conquer node log (JSON lines) here.
        #[arg(long)]
        trace_log: Option<PathBuf>,
    },
    /// Generate a benchmark specification.
    Gen {
        #[command(subcommand)]
        generator: GenCommand,
        #[arg(long, default_value_t = 0, global = true)]
        seed: u64,
        /// Trace file to write.
        #[arg(long, short, global = true)]
        out: Option<PathBuf>,
        /// Manifest path (default: OUT.json).
        #[arg(long, global = true)]
        manifest: Option<PathBuf>,
    },
    /// Generate and learn a sweep of benchmarks.
    Bench {
        #[command(subcommand)]
        sweep: BenchCommand,
        #[command(flatten)]
        flags: LearnFlags,
        #[arg(long, global = true)]
        csv: Option<PathBuf>,
        /// All run reports as one JSON array.
        #[arg(long, global = true)]
        json: Option<PathBuf>,
    },
    /// Masking and hash-quality experiments.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
        #[command(flatten)]
        flags: LearnFlags,
        #[arg(long, global = true)]
        csv: Option<PathBuf>,
        #[arg(long, global = true)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    Simple {
        #[arg(long, default_value_t = 2)]
        props: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lo: usize,
        #[arg(long)]
        hi: usize,
    },
    Guided {
        #[arg(long, default_value_t = 2)]
        props: usize,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lo: usize,
        #[arg(long)]
        hi: usize,
    },
    Samplebench {
        #[arg(long)]
        i: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        conservative: bool,
    },
    Hamming {
        #[arg(long, default_value_t = 2)]
        props: usize,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        delta: usize,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// One Hamming spec per l = 3, 6, ..., lmax.
    Hamming {
        #[arg(long, default_value_t = 12)]
        lmax: usize,
        #[arg(long, default_value_t = 1)]
        delta: usize,
        #[arg(long, default_value_t = 2)]
        props: usize,
    },
    /// The mixed fuzz corpus.
    Corpus {
        #[arg(long, default_value_t = 50)]
        per_generator: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Learn one spec with k = 1, 6, ..., 126 masked fingerprint bits.
    Masking {
        /// Trace file (default: a conservative SampleBench spec).
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        i: usize,
        #[arg(long, default_value_t = 24)]
        k: usize,
    },
    /// Extra cost of hashed admission on specs of known minimal cost.
    Ruc {
        #[arg(long, default_value_t = 20)]
        specs: usize,
        #[arg(long, default_value_t = 8)]
        i: usize,
        #[arg(long, default_value_t = 24)]
        k: usize,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Learn {
            file,
            flags,
            json,
            trace_log,
        } => {
            let report = cmd_learn(&file, &flags, json.as_deref(), trace_log.as_deref())?;
            if json.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else if let Some(f) = &report.formula {
                println!("{f}");
            }
            if flags.verify {
                ensure_sound([&report])?;
            }
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            Ok(report.is_ok())
        }
        Command::Gen {
            generator,
            seed,
            out,
            manifest,
        } => {
            let generator = match generator {
                GenCommand::Simple { props, k, lo, hi } => Generator::Simple { props, k, lo, hi },
                GenCommand::Guided {
                    props,
                    formula,
                    k,
                    lo,
                    hi,
                } => Generator::Guided {
                    props,
                    formula,
                    k,
                    lo,
                    hi,
                },
                GenCommand::Samplebench { i, k, conservative } => Generator::SampleBench { i, k, conservative },
                GenCommand::Hamming { props, l, delta } => Generator::Hamming { props, l, delta },
            };
            let out = out.context("--out is required")?;
            let m = cmd_gen(&BenchSpec { generator, seed }, &out, manifest.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(true)
        }
        Command::Bench { sweep, flags, csv, json } => {
            let benches = match sweep {
                BenchCommand::Hamming { lmax, delta, props } => hamming_benches(lmax, delta, props, flags.seed),
                BenchCommand::Corpus { per_generator } => corpus_benches(per_generator, flags.seed),
            };
            let (records, rows) = run_benches(&benches, &flags);
            if let Some(path) = &csv {
                write_csv(path, &rows)?;
            }
            if let Some(path) = &json {
                write_json(path, &records)?;
            }
            if csv.is_none() && json.is_none() {
                let mut w = csv::Writer::from_writer(std::io::stdout());
                for r in &rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            let reports: Vec<_> = records.iter().filter_map(|r| r.report.as_ref()).collect();
            ensure_sound(reports.iter().copied())?;
            Ok(records.iter().all(|r| r.report.as_ref().is_some_and(|r| r.is_ok())))
        }
        Command::Experiment {
            which,
            flags,
            csv,
            json,
        } => match which {
            ExperimentCommand::Masking { file, i, k } => {
                let (spec, alphabet) = match file {
                    Some(f) => load_spec(&f).with_context(|| format!("reading {}", f.display()))?,
                    None => masking_spec(i, k, flags.seed)?,
                };
                let report = cmd_masking(&spec, &alphabet, &flags)?;
                if let Some(path) = &csv {
                    write_csv(path, &report.rows)?;
                }
                match &json {
                    Some(path) => write_json(path, &report)?,
                    None => println!("{}", serde_json::to_string_pretty(&report)?),
                }
                Ok(true)
            }
            ExperimentCommand::Ruc { specs, i, k } => {
                let params = RucParams {
                    specs,
                    i,
                    k,
                    seed: flags.seed,
                };
                let report = cmd_ruc(&params, &flags)?;
                if let Some(path) = &csv {
                    write_csv(path, &report.rows)?;
                }
                match &json {
                    Some(path) => write_json(path, &report)?,
                    None => println!("{}", serde_json::to_string_pretty(&report.rows)?),
                }
                Ok(true)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = match (&cli.command, cli.threads) {
        (Command::Learn { flags, .. }, _)
        | (Command::Bench { flags, .. }, _)
        | (Command::Experiment { flags, .. }, _)
            if flags.single_thread =>
        {
            Some(1)
        }
        (_, t) => t,
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
