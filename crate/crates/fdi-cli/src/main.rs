//! `fdi` — simulate false data injection experiments on a linear state
//! estimator and summarize detector performance.

mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fdi_core::{
    ar_mle_estimate, format_matrix, mse_eval, roc_from_scores, run_experiment,
    simulate_trial_data, synthetic_jacobian, wls_estimate_sequential, Hypothesis,
    MeasurementMatrix, RocCurve, ScoreRow, ScoreTable,
};

use config::ExperimentConfig;

const SCORES_HEADER: &str = "trial,detector,hypothesis,statistic";
const ROC_HEADER: &str = "detector,threshold,pfa,pd";

/// Usage/config problems exit 2, runtime failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "fdi", version, about = "False data injection simulation and detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded standard-normal measurement matrix file.
    GenMatrix(GenMatrixArgs),
    /// Run a Monte-Carlo experiment and write the score table as CSV.
    Simulate(SimulateArgs),
    /// Compute per-detector ROC curves and AUC from a score CSV.
    Roc(RocArgs),
    /// Print state estimates for one simulated clean block.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct GenMatrixArgs {
    /// Meter count M.
    #[arg(long)]
    rows: usize,
    /// State count K (must be < M).
    #[arg(long)]
    cols: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output score CSV.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RocArgs {
    /// Input score CSV.
    #[arg(long)]
    scores: PathBuf,
    /// Output ROC CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenMatrix(args) => cmd_gen_matrix(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Roc(args) => cmd_roc(&args),
        Command::Estimate(args) => cmd_estimate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn cmd_gen_matrix(args: &GenMatrixArgs) -> Result<(), CliError> {
    if args.cols == 0 || args.rows <= args.cols {
        return Err(CliError::config(format!(
            "need --rows > --cols >= 1, got rows = {}, cols = {}",
            args.rows, args.cols
        )));
    }
    let h = synthetic_jacobian(args.rows, args.cols, args.seed);
    // Rank guard: a draw this degenerate is practically impossible, but a
    // deficient file must never be written.
    MeasurementMatrix::from_jacobian(h.clone())
        .map_err(|e| CliError::runtime(format!("generated matrix rejected ({e}); try another seed")))?;
    write_file(&args.out, &format_matrix(&h))?;
    println!("wrote {} x {} matrix to {}", args.rows, args.cols, args.out.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::load(&args.config)?;
    let scenario = config.build_scenario(args.seed)?;
    let table = match args.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
            pool.install(|| run_experiment(&scenario))
        }
        None => run_experiment(&scenario),
    }
    .map_err(|e| CliError::runtime(e.to_string()))?;

    write_file(&args.out, &render_scores(&table))?;
    println!(
        "wrote {} scores ({} trials per hypothesis) to {}",
        table.rows().len(),
        scenario.trials,
        args.out.display()
    );
    print_auc_summary(&table)?;
    Ok(())
}

fn cmd_roc(args: &RocArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scores)
        .map_err(|e| CliError::config(format!("cannot read scores {}: {e}", args.scores.display())))?;
    let table = parse_scores(&text)?;
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    let mut summaries = Vec::new();
    for detector in table.detectors() {
        let roc = roc_from_scores(&table, detector)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        for point in roc.points() {
            out.push_str(&format!(
                "{detector},{},{},{}\n",
                point.threshold, point.pfa, point.pd
            ));
        }
        summaries.push((detector, roc));
    }
    write_file(&args.out, &out)?;
    for (detector, roc) in &summaries {
        println!("AUC {detector} {}", roc.auc());
    }
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::load(&args.config)?;
    let scenario = config.build_scenario(args.seed)?;
    // One clean block: estimation under an active attack would fold the
    // attack into theta.
    let data = simulate_trial_data(&scenario, 0, Hypothesis::Null)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let variances = scenario.meter_variances();
    let gaussian = wls_estimate_sequential(scenario.mm.jacobian(), &variances, &data.observations)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let ar = ar_mle_estimate(scenario.mm.jacobian(), &scenario.noise, &data.observations)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    println!("states: {}", scenario.mm.states());
    println!("true {}", join_floats(data.theta.iter()));
    println!("gaussian-sequential {}", join_floats(gaussian.theta().iter()));
    println!("ar-mle {}", join_floats(ar.theta().iter()));
    let mse_g = mse_eval(&data.observations, &scenario.mm, &gaussian)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let mse_a = mse_eval(&data.observations, &scenario.mm, &ar)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    println!("residual gaussian-sequential {mse_g}");
    println!("residual ar-mle {mse_a}");
    Ok(())
}

fn print_auc_summary(table: &ScoreTable) -> Result<(), CliError> {
    for detector in table.detectors() {
        let roc: RocCurve =
            roc_from_scores(table, detector).map_err(|e| CliError::runtime(e.to_string()))?;
        println!("AUC {detector} {}", roc.auc());
    }
    Ok(())
}

fn render_scores(table: &ScoreTable) -> String {
    let mut out = String::with_capacity(32 * table.rows().len() + 40);
    out.push_str(SCORES_HEADER);
    out.push('\n');
    for row in table.rows() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.trial, row.detector, row.hypothesis, row.statistic
        ));
    }
    out
}

fn parse_scores(text: &str) -> Result<ScoreTable, CliError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == SCORES_HEADER => {}
        _ => {
            return Err(CliError::config(format!(
                "scores CSV must start with header `{SCORES_HEADER}`"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CliError::config(format!(
                "scores CSV line {}: expected 4 fields, found {}",
                idx + 1,
                fields.len()
            )));
        }
        let field_err = |what: &str, detail: String| {
            CliError::config(format!("scores CSV line {}: {what}: {detail}", idx + 1))
        };
        rows.push(ScoreRow {
            trial: fields[0].parse().map_err(|e| field_err("trial", format!("{e}")))?,
            detector: FromStr::from_str(fields[1])
                .map_err(|e| field_err("detector", format!("{e}")))?,
            hypothesis: FromStr::from_str(fields[2])
                .map_err(|e| field_err("hypothesis", format!("{e}")))?,
            statistic: fields[3].parse().map_err(|e| field_err("statistic", format!("{e}")))?,
        });
    }
    ScoreTable::from_rows(rows).map_err(|e| CliError::config(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn join_floats<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
