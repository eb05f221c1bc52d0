use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpcnet_core::data::{generate_synthetic_trial, save_trial, MixingMatrix, Role, SyntheticSpec, PROCESSED_EXTENSION, TRIAL_EXTENSION};
use rpcnet_core::experiment::{derive_seed, run_ablate, run_evaluate, run_preprocess, run_train, ExperimentPlan, Sweep};
use rpcnet_core::kinematics::KinematicModel;
use rpcnet_core::metrics::{measure_inference_time, table_csv, TableRow};
use rpcnet_core::network::{load_checkpoint, RpcNet};
use rpcnet_core::{Error, Result};

/// Hand pose estimation from HD-sEMG: preprocessing, training, evaluation,
/// ablation sweeps and inference benchmarks.
#[derive(Parser)]
#[command(name = "rpcnet", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment plan (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the plan seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the plan's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic raw trials and a plan that uses them.
    Synth {
        #[arg(long, default_value_t = 1)]
        subjects: usize,
        /// Trials per subject; the last one is tagged for testing.
        #[arg(long, default_value_t = 6)]
        trials: usize,
        /// Trial length in seconds.
        #[arg(long, default_value_t = 450.0)]
        duration: f64,
    },
    /// Turn raw trials into processed envelope/angle containers.
    Preprocess {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Train every plan variant for every subject.
    Train,
    /// Score trained variants and the oracle and rest baselines.
    Evaluate,
    /// Train and score one sweep of conditions, then run its statistics.
    Ablate {
        /// variants, angle-length, emg-length, width, electrodes or monolithic.
        #[arg(long, default_value = "variants")]
        sweep: String,
    },
    /// Time single forward passes.
    Bench {
        /// Checkpoint to time.
        #[arg(long, conflicts_with = "variant")]
        checkpoint: Option<PathBuf>,
        /// Variant codes to time with fresh weights.
        #[arg(long, default_values_t = vec!["full".to_string()])]
        variant: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        iterations: usize,
        /// Repeat each measurement this many times.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
}

fn load_plan(global: &Global) -> Result<ExperimentPlan> {
    let path = global
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <plan.toml>".into()))?;
    let mut plan = ExperimentPlan::load(path)?;
    if let Some(seed) = global.seed {
        plan.seed = seed;
    }
    if let Some(out) = &global.out {
        plan.output_dir = out.clone();
    }
    plan.validate()?;
    Ok(plan)
}

fn synth(global: &Global, subjects: usize, trials: usize, duration: f64, log: &(dyn Fn(&str) + Sync)) -> Result<()> {
    if subjects == 0 || trials < 2 {
        return Err(Error::Config("need at least one subject and two trials per subject".into()));
    }
    let out = global.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
    let seed = global.seed.unwrap_or(0);
    let model = KinematicModel::default();
    let mut plan = ExperimentPlan { name: "synthetic".into(), seed, output_dir: "results".into(), ..Default::default() };
    plan.variants = vec!["full".into(), "B".into()];
    for s in 0..subjects {
        let id = format!("S{s}");
        let mixing = MixingMatrix::random(derive_seed(seed, &["mixing", &id]), 4);
        let mut processed = Vec::new();
        for t in 0..trials {
            let trial_id = format!("t{t}");
            let mut spec = SyntheticSpec::new(duration, derive_seed(seed, &["trial", &id, &trial_id]), mixing.clone());
            spec.subject_id = id.clone();
            spec.trial_id = trial_id.clone();
            spec.role = if t + 1 == trials { Role::Test } else { Role::Train };
            let path = out.join(format!("{id}_{trial_id}.{TRIAL_EXTENSION}"));
            log(&format!("generating {}", path.display()));
            save_trial(&path, &generate_synthetic_trial(&spec, &model)?)?;
            processed.push(PathBuf::from(format!("processed/{id}_{trial_id}.{PROCESSED_EXTENSION}")));
        }
        plan.subjects.push(rpcnet_core::experiment::SubjectPlan { id, trials: processed, test_trial: None });
    }
    let text = toml::to_string_pretty(&plan).map_err(|e| Error::Config(e.to_string()))?;
    let plan_path = out.join("plan.toml");
    rpcnet_core::data::container::write_file(&plan_path, text.as_bytes())?;
    println!("wrote {} trials and {}", subjects * trials, plan_path.display());
    println!("next: rpcnet preprocess {}/*.{TRIAL_EXTENSION} --out {}/processed", out.display(), out.display());
    Ok(())
}

fn preprocess(global: &Global, inputs: &[PathBuf], log: &(dyn Fn(&str) + Sync)) -> Result<()> {
    let (model, pipeline, default_out) = match &global.config {
        Some(_) => {
            let plan = load_plan(global)?;
            (plan.kinematic_model()?, plan.pipeline, plan.output_dir.join("processed"))
        }
        None => (KinematicModel::default(), Default::default(), PathBuf::from("processed")),
    };
    let out = global.out.clone().unwrap_or(default_out);
    let manifest = run_preprocess(inputs, &out, &model, &pipeline, log)?;
    for e in &manifest.trials {
        println!(
            "{} -> {} ({} samples{})",
            e.input,
            out.join(&e.output).display(),
            e.envelope_len,
            if e.aligned { "" } else { ", NOT aligned" }
        );
    }
    Ok(())
}

fn print_table(name: &str, rows: &[TableRow]) {
    println!("# {name}");
    print!("{}", table_csv(rows));
}

fn bench(checkpoint: Option<&Path>, variants: &[String], iterations: usize, runs: usize, seed: u64) -> Result<()> {
    let nets: Vec<RpcNet> = match checkpoint {
        Some(path) => vec![load_checkpoint(path)?.0],
        None => variants.iter().map(|c| RpcNet::from_code(c, seed)).collect::<Result<_>>()?,
    };
    let mut reports = Vec::new();
    for net in &nets {
        for _ in 0..runs.max(1) {
            reports.push(measure_inference_time(net, iterations, seed)?);
        }
    }
    println!("{}", serde_json::to_string_pretty(&reports)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    let quiet = cli.global.quiet;
    let log = move |m: &str| {
        if !quiet {
            eprintln!("{m}");
        }
    };
    let g = &cli.global;
    match &cli.command {
        Command::Synth { subjects, trials, duration } => synth(g, *subjects, *trials, *duration, &log),
        Command::Preprocess { inputs } => preprocess(g, inputs, &log),
        Command::Train => {
            let plan = load_plan(g)?;
            for t in run_train(&plan, &log)? {
                let last = t.report.epoch_loss.last().copied().unwrap_or(f64::NAN);
                println!("{} {}: final epoch loss {last:.6e} -> {}", t.subject, t.variant, plan.output_dir.join(&t.checkpoint).display());
            }
            Ok(())
        }
        Command::Evaluate => {
            let plan = load_plan(g)?;
            let summaries = run_evaluate(&plan, &log)?;
            let mut names: Vec<&str> = Vec::new();
            for s in &summaries {
                if !names.contains(&s.estimator.as_str()) {
                    names.push(&s.estimator);
                }
            }
            for name in names {
                let rows: Vec<TableRow> = summaries.iter().filter(|s| s.estimator == name).map(|s| s.row.clone()).collect();
                print_table(name, &rows);
            }
            Ok(())
        }
        Command::Ablate { sweep } => {
            let plan = load_plan(g)?;
            let outcome = run_ablate(&plan, sweep.parse::<Sweep>()?, &log)?;
            for s in &outcome.statistics {
                println!("{}", s.text);
            }
            Ok(())
        }
        Command::Bench { checkpoint, variant, iterations, runs } => {
            bench(checkpoint.as_deref(), variant, *iterations, *runs, g.seed.unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
