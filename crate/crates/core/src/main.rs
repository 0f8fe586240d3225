use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use sorsa::adapters::load_checkpoint;
use sorsa::analysis;
use sorsa::harness::experiment::{self, ExperimentResult, MethodSpec};
use sorsa::harness::output::{self, RunManifest};
use sorsa::harness::verify::{self, Suite};
use sorsa::harness::{make_task, TaskKind, TaskSpec};
use sorsa::linalg::{read_matrix_csv, Matrix};
use sorsa::{Method, Result, TrainConfig};

#[derive(Parser)]
#[command(
    name = "sorsa",
    version,
    about = "Singular-value split adapters on synthetic linear tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TaskSpec JSON; defaults to the 16×12 teacher-student task.
    #[arg(long)]
    task: Option<PathBuf>,
    /// TrainConfig JSON; defaults to the desk-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method and write its trace, analysis table, and checkpoints.
    Train {
        #[arg(long)]
        method: Method,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Regularized vs unregularized SORSA from the same initialization.
    Twin {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train several methods on the same task and schedule.
    Compare {
        /// Comma-separated: sorsa, sorsa-noreg, lora, pissa, full.
        #[arg(long)]
        methods: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a verification suite; exits non-zero if any check fails.
    Verify {
        #[arg(long)]
        suite: Suite,
    },
    /// Spectral drift between two weights (checkpoints or matrix CSVs).
    Analyze {
        #[arg(long = "checkpoint0")]
        checkpoint0: PathBuf,
        #[arg(long = "checkpointT")]
        checkpoint_t: PathBuf,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn load_inputs(run: &RunArgs) -> Result<(TaskSpec, TrainConfig)> {
    let config: TrainConfig = match &run.config {
        Some(p) => read_json(p)?,
        None => experiment::desk_config(0),
    };
    config.validate()?;
    let task = match &run.task {
        Some(p) => read_json(p)?,
        None => TaskSpec::default_teacher_student(config.seed),
    };
    fs::create_dir_all(&run.out)?;
    Ok((task, config))
}

fn run_methods(command: &str, methods: Vec<MethodSpec>, run: &RunArgs) -> Result<()> {
    let (spec, config) = load_inputs(run)?;
    let task = make_task(&spec)?;
    let labels = methods.iter().map(|m| m.label.clone()).collect();
    let manifest = RunManifest::new(command, labels, &spec, &config);
    let hash = manifest.hash();
    manifest.write(&run.out)?;
    let mut results = Vec::new();
    for method in &methods {
        let out = experiment::run_method(&task, &config, method)?;
        let mut result = ExperimentResult::from_run(&task, &out)?;
        result.files = output::write_run(&run.out, &hash, &out)?
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect();
        results.push(result);
    }
    let summary = serde_json::to_string_pretty(&results)?;
    fs::write(run.out.join(format!("summary-{hash}.json")), summary.clone() + "\n")?;
    println!("{summary}");
    Ok(())
}

fn twin(run: &RunArgs) -> Result<()> {
    let (spec, config) = load_inputs(run)?;
    let task = make_task(&spec)?;
    let manifest = RunManifest::new("twin", vec!["sorsa".into(), "sorsa-noreg".into()], &spec, &config);
    let hash = manifest.hash();
    manifest.write(&run.out)?;
    let twin = analysis::twin_run(&task, &config)?;
    let (reg_rows, unreg_rows) = experiment::twin_analysis(&task, &twin)?;
    let out = &run.out;
    output::write_trace(&out.join(format!("trace-reg-{hash}.csv")), &twin.reg_records)?;
    output::write_trace(&out.join(format!("trace-unreg-{hash}.csv")), &twin.unreg_records)?;
    output::write_analysis(&out.join(format!("analysis-reg-{hash}.csv")), &reg_rows)?;
    output::write_analysis(&out.join(format!("analysis-unreg-{hash}.csv")), &unreg_rows)?;
    output::write_weyl(&out.join(format!("weyl-{hash}.csv")), &twin.weyl)?;
    let violations = twin.weyl.iter().filter(|c| !c.satisfied).count();
    println!("kappa_reg_final   {}", twin.reg.last().unwrap_or(f64::NAN));
    println!("kappa_unreg_final {}", twin.unreg.last().unwrap_or(f64::NAN));
    println!("weyl_violations   {violations}/{}", twin.weyl.len());
    if spec.kind == TaskKind::Quadratic {
        let report = analysis::estimate_constants(&task, &config)?;
        output::write_convergence(&out.join(format!("convergence-{hash}.json")), &report)?;
        println!("fitted_rate       {}", report.fitted_rate);
        println!("predicted_rate    {}", report.predicted_rate);
    }
    Ok(())
}

/// A checkpoint file starts with its JSON header; anything else is read as a
/// plain matrix CSV.
fn load_weight(path: &Path) -> Result<Matrix> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    if first.trim_start().starts_with('{') {
        Ok(load_checkpoint(path)?.1.effective_weight())
    } else {
        read_matrix_csv(path)
    }
}

fn analyze(p0: &Path, pt: &Path) -> Result<()> {
    let report = analysis::drift(&load_weight(p0)?, &load_weight(pt)?, 0)?;
    println!("delta_sigma {}", report.delta_sigma);
    println!("delta_d     {}", report.delta_d);
    if report.degenerate_spectrum_flag {
        println!("flags       degenerate_spectrum");
    }
    Ok(())
}

fn verify(suite: Suite) -> Result<bool> {
    let reports = verify::run_suite(suite)?;
    for r in &reports {
        println!("{r}");
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train { method, run } => run_methods("train", vec![MethodSpec::new(*method)], run).map(|_| true),
        Command::Twin { run } => twin(run).map(|_| true),
        Command::Compare { methods, run } => experiment::parse_methods(methods)
            .and_then(|ms| run_methods("compare", ms, run))
            .map(|_| true),
        Command::Verify { suite } => verify(*suite),
        Command::Analyze {
            checkpoint0,
            checkpoint_t,
        } => analyze(checkpoint0, checkpoint_t).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
