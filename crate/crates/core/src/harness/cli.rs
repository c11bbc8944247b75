//! `cascade` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
//! `CASCADE_LOG=debug|info|quiet` sets the log level (default `info`); logs
//! go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};

use super::{
    prepare, run_prepared, theorem_bound, write_runs, write_trace, Algo, DatasetFormat, DatasetSpec, ExperimentConfig,
    RuleKind,
};
use crate::environment::greedy_oracle;
use crate::error::{Error, Result};
use crate::features::{build_features, split_rows};
use crate::ingestion::{read_matrix_csv, select_top};

#[derive(Debug, Parser)]
#[command(name = "cascade", about = "Cascading bandits with linear generalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_algo)]
        algo: Option<Algo>,
        /// Output directory (overrides out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides master_seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Learn SVD item features from a rating file and write them as CSV.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: DatasetFormat,
        #[arg(long, value_parser = parse_rule, default_value = "presence")]
        rule: RuleKind,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(short = 'd')]
        d: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        l_max: Option<usize>,
        #[arg(long)]
        m_max: Option<usize>,
    },
    /// Greedy approximate optimal list of a 0/1 matrix CSV.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(short = 'K')]
        k: usize,
    },
    /// Confidence constant c and regret bound for CascadeLinUCB.
    Bound {
        #[arg(short = 'n')]
        n: u64,
        #[arg(short = 'K')]
        k: usize,
        #[arg(short = 'd')]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long = "theta-norm", default_value_t = 1.0)]
        theta_norm: f64,
    },
}

fn parse_algo(s: &str) -> std::result::Result<Algo, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<DatasetFormat, String> {
    match s {
        "tsv" | "tab" => Ok(DatasetFormat::Tsv),
        "csv" | "comma" => Ok(DatasetFormat::Csv),
        "movielens" | "double-colon" => Ok(DatasetFormat::Movielens),
        "matrix" => Ok(DatasetFormat::Matrix),
        _ => Err(format!("unknown format {s:?} (tsv, csv, movielens, matrix)")),
    }
}

fn parse_rule(s: &str) -> std::result::Result<RuleKind, String> {
    match s {
        "greater_than_threshold" | "threshold" => Ok(RuleKind::GreaterThanThreshold),
        "presence" => Ok(RuleKind::Presence),
        _ => Err(format!("unknown rule {s:?} (greater_than_threshold, presence)")),
    }
}

fn init_logging() {
    let level = match std::env::var("CASCADE_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("quiet") => log::LevelFilter::Off,
        _ => log::LevelFilter::Info,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let mut text = e.render().to_string();
                    if !text.contains("Usage:") {
                        text.push_str(&format!("\n{}\n", Cli::command().render_usage()));
                    }
                    let _ = write!(std::io::stderr(), "{text}");
                    1
                }
            };
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let out_err = |e: std::io::Error| Error::io("<stdout>", e);
    match command {
        Command::Run {
            config,
            algo,
            out,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            if let Some(a) = algo {
                cfg.algo = a;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let out_dir = match out {
                Some(o) => o,
                None if cfg.out_dir.is_relative() => base.join(&cfg.out_dir),
                None => cfg.out_dir.clone(),
            };
            let prepared = prepare(&cfg, Some(&base))?;
            log::info!(
                "{}: L = {}, K = {}, n = {}, runs = {}",
                cfg.algo.as_str(),
                prepared.items(),
                cfg.k,
                cfg.n_steps,
                cfg.runs
            );
            let trace = run_prepared(&cfg, &prepared)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            write_trace(&trace, &out_dir.join("trace.csv"))?;
            write_runs(&trace, &out_dir.join("runs.csv"))?;
            writeln!(
                stdout,
                "final mean regret {:.6} (stderr {:.6}), final mean reward {:.6}; wrote {}",
                trace.final_mean_regret(),
                trace.stderr.last().copied().unwrap_or(0.0),
                trace.final_mean_reward(),
                out_dir.display()
            )
            .map_err(out_err)?;
        }
        Command::Features {
            input,
            format,
            rule,
            threshold,
            d,
            out,
            split_seed,
            l_max,
            m_max,
        } => {
            let spec = DatasetSpec {
                path: input,
                format,
                rule,
                threshold,
            };
            let (mut w, mut ids) = spec.load(None)?;
            if l_max.is_some() || m_max.is_some() {
                let sel = select_top(&w, l_max.unwrap_or(usize::MAX), m_max.unwrap_or(usize::MAX))?;
                ids = sel.cols.iter().map(|&c| ids[c].clone()).collect();
                w = sel.matrix;
            }
            let split = split_rows(&w, split_seed)?;
            let feats = build_features(&split, d)?;
            feats.write_csv(&out, Some(&ids))?;
            writeln!(
                stdout,
                "{} items, d = {}, scale {:.6}; wrote {}",
                feats.items(),
                feats.dim(),
                feats.scale(),
                out.display()
            )
            .map_err(out_err)?;
        }
        Command::Oracle { input, k } => {
            let (w, ids) = read_matrix_csv(&input)?;
            let list = greedy_oracle(&w, k)?;
            let names: Vec<&str> = list.items().iter().map(|&e| ids[e].as_str()).collect();
            writeln!(stdout, "A* = {}", names.join(",")).map_err(out_err)?;
            writeln!(stdout, "coverage = {:.10}", w.coverage(&list)).map_err(out_err)?;
        }
        Command::Bound {
            n,
            k,
            d,
            sigma,
            theta_norm,
        } => {
            let b = theorem_bound(n, k, d, sigma, theta_norm)?;
            writeln!(stdout, "c = {:.10}", b.c).map_err(out_err)?;
            writeln!(stdout, "bound = {:.10}", b.bound).map_err(out_err)?;
        }
    }
    Ok(())
}
