//! `grfg`: reconstruct a tabular feature space from the command line.
//!
//! `run` executes the learned cascade (or the random baseline) and writes
//! four artifacts into the output directory: `report.json` (full transcript),
//! `features.csv` (the winning feature set plus the target, 17 significant
//! digits so values round-trip bitwise), `provenance.tsv` (name and expression
//! per feature, enough to regenerate every column from the original data),
//! and `checkpoint.bin` (the trained cascade; learned runs only).
//!
//! `eval` rebuilds a feature set from a provenance file against the original
//! data and prints its cross-validated score as JSON. With the same seed it
//! reproduces a run's reported scores exactly.
//!
//! Exit codes: 0 success, 1 usage/data/config errors, 2 internal errors.
//! `GRFG_THREADS` (default 1) caps worker threads; results do not depend on
//! it.

mod config;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use grfg::data::{format_cell, DataTable, Task};
use grfg::engine::{evaluate_feature_set, run_grfg, run_rdg, RunOutput};
use grfg::expr::{parse_provenance, render_provenance, Feature};
use grfg::rl::save_cascade;
use grfg::{Error, Result};

#[derive(Parser)]
#[command(
    name = "grfg",
    version,
    about = "Reconstruct a tabular feature space with a learned selection cascade"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the reconstruction loop and write artifacts
    Run(RunArgs),
    /// Re-score a feature set recorded in a provenance file
    Eval(EvalArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PolicyArg {
    /// Learned cascade
    Grfg,
    /// Random baseline: same loop, uniform selections, no learning
    Rdg,
}

#[derive(Args)]
struct RunArgs {
    /// CSV with a header row; all cells numeric
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column inside the data file
    #[arg(long)]
    target: String,
    /// classification or regression
    #[arg(long)]
    task: Task,
    /// Optional TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; outranks the config file's seed (default 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Grfg)]
    policy: PolicyArg,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with a header row; all cells numeric
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column inside the data file
    #[arg(long)]
    target: String,
    /// classification or regression
    #[arg(long)]
    task: Task,
    /// Provenance file (name TAB expression per line); empty means the
    /// original columns
    #[arg(long)]
    provenance: PathBuf,
    /// Optional TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; outranks the config file's seed (default 0)
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Internal(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Eval(args) => cmd_eval(args),
    }
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("GRFG_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "GRFG_THREADS must be a positive integer, got \"{s}\""
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Error::Config(format!("GRFG_THREADS: {e}"))),
    }
}

fn load_file_config(path: Option<&Path>) -> Result<Option<config::FileConfig>> {
    let Some(path) = path else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Some(config::parse_file_config(&text)?))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let threads = threads_from_env()?;
    let file = load_file_config(args.config.as_deref())?;
    let cfg = config::build_run_config(file, args.seed, threads)?;
    let table = DataTable::load_csv(&args.data, &args.target, args.task)?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let output = match args.policy {
        PolicyArg::Grfg => run_grfg(&table, &cfg)?,
        PolicyArg::Rdg => run_rdg(&table, &cfg)?,
    };
    write_artifacts(&args.out, &table, &output)?;
    println!(
        "best score {:.6} with {} features",
        output.report.best_score,
        output.best_features.len()
    );
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

fn write_artifacts(out: &Path, table: &DataTable, output: &RunOutput) -> Result<()> {
    let report = serde_json::to_string_pretty(&output.report)
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    write_file(&out.join("report.json"), &(report + "\n"))?;
    write_file(
        &out.join("features.csv"),
        &features_csv(table, &output.best_features),
    )?;
    write_file(
        &out.join("provenance.tsv"),
        &render_provenance(&output.best_features),
    )?;
    if let Some(cascade) = &output.agents {
        save_cascade(
            &out.join("checkpoint.bin"),
            &cascade.group1,
            &cascade.op,
            &cascade.group2,
        )?;
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The winning columns plus the target, at full precision. Generated names
/// never contain commas (original names are sanitized, composites only add
/// parentheses and operator symbols), so no quoting is needed.
#[allow(clippy::needless_range_loop)] // row-major emission of column-major data
fn features_csv(table: &DataTable, features: &[Feature]) -> String {
    let mut s = String::new();
    for f in features {
        s.push_str(&f.name);
        s.push(',');
    }
    s.push_str(table.target_name());
    s.push('\n');
    let y = table.target();
    for row in 0..table.n_rows() {
        for f in features {
            s.push_str(&format_cell(f.values[row]));
            s.push(',');
        }
        s.push_str(&format_cell(y[row]));
        s.push('\n');
    }
    s
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let threads = threads_from_env()?;
    let file = load_file_config(args.config.as_deref())?;
    let cfg = config::build_run_config(file, args.seed, threads)?;
    let table = DataTable::load_csv(&args.data, &args.target, args.task)?;
    let text = std::fs::read_to_string(&args.provenance).map_err(|source| Error::Io {
        path: args.provenance.clone(),
        source,
    })?;
    let known: HashSet<String> = table.columns().iter().map(|(n, _)| n.clone()).collect();
    let entries = parse_provenance(&text, &known)?;
    let features: Vec<Feature> = if entries.is_empty() {
        table
            .columns()
            .iter()
            .map(|(n, v)| Feature::original(n, v.clone()))
            .collect()
    } else {
        entries
            .into_iter()
            .map(|(name, expr)| {
                let f = Feature::from_expr(expr, &table)?;
                if f.name != name {
                    return Err(Error::Parse {
                        position: 0,
                        message: format!(
                            "provenance name \"{name}\" does not match its expression \"{}\"",
                            f.name
                        ),
                    });
                }
                Ok(f)
            })
            .collect::<Result<_>>()?
    };
    let metrics = evaluate_feature_set(&table, &features, &cfg)?;
    let json = serde_json::json!({
        "score": metrics.score,
        "fold_scores": metrics.fold_scores,
        "n_features": features.len(),
    });
    println!("{json}");
    Ok(())
}
