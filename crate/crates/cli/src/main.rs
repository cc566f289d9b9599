use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use wvflang::gridworld::Attribute;
use wvflang::harness::{
    aggregate, all_points, check_gates, read_config, read_metrics, run_experiment,
    suite_for_seed, write_aggregate, write_outputs, ExperimentConfig, ExperimentKind, ModelKind,
};
use wvflang::tasksuite::export_json;
use wvflang::wvf::{
    basis_success_rate, layout_pool, BackendKind, CheckpointHeader, TabularBackend,
    TabularCheckpoint,
};
use wvflang::{denotation, expr_length, parse, split_tasks, SimRng, SymbolMap};

#[derive(Parser)]
#[command(name = "wvflang", version, about = "Language-conditioned WVF composition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 162-task suite for a seed's symbol map as JSON.
    GenTasks {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also list the train/test split for this seed.
        #[arg(long)]
        split: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train tabular max/min WVFs on a layout pool and report basis success.
    TrainWvf(TrainArgs),
    /// Learn on all 162 tasks.
    RunExpA(RunArgs),
    /// Learn on a random half of the tasks, evaluate on both halves.
    RunExpB(RunArgs),
    /// Compose ground-truth expressions directly.
    Oracle(RunArgs),
    /// Parse an expression and show its canonical form and denotation.
    ParseCheck {
        expr: String,
        /// Seed of the symbol map used to name symbols.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean and 95% interval across seeds at each evaluation tick.
    Aggregate {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    grid_width: i32,
    #[arg(long, default_value_t = 6)]
    grid_height: i32,
    #[arg(long, default_value_t = 4)]
    n_distractors: usize,
    #[arg(long, default_value_t = 100)]
    step_limit: u32,
    #[arg(long, default_value_t = 5)]
    layout_pool_size: usize,
    #[arg(long, default_value_t = 20_000)]
    tabular_episodes: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Greedy episodes per attribute when measuring basis success.
    #[arg(long, default_value_t = 100)]
    eval_episodes: usize,
    /// Directory for checkpoints and basis_success.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Every flag overrides the matching key of `--config` (or the default).
#[derive(Args)]
struct RunArgs {
    /// Flat JSON config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics, verdicts, stores and transcripts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero if any acceptance gate fails.
    #[arg(long)]
    check: bool,

    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Comma-separated list, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eval_every_steps: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    total_step_budget: Option<u64>,
    #[arg(long)]
    pretrain_step_offset: Option<u64>,
    #[arg(long)]
    max_learn_steps: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    #[arg(long)]
    resample_layouts: Option<bool>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    retrieval_k: Option<usize>,
    #[arg(long)]
    verify_rollouts: Option<usize>,
    #[arg(long)]
    accept_threshold: Option<f64>,
    #[arg(long)]
    train_temperature: Option<f64>,
    #[arg(long)]
    eval_temperature: Option<f64>,
    #[arg(long)]
    eval_candidates: Option<usize>,
    #[arg(long)]
    verify_all: Option<bool>,
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    grid_width: Option<i32>,
    #[arg(long)]
    grid_height: Option<i32>,
    #[arg(long)]
    n_distractors: Option<usize>,
    #[arg(long)]
    step_limit: Option<u32>,
    #[arg(long)]
    layout_pool_size: Option<usize>,
    #[arg(long)]
    tabular_episodes: Option<usize>,
}

// Flag values use the same names as the JSON config.
fn parse_model(s: &str) -> Result<ModelKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|e| e.to_string())
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunArgs {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = kind;
        let a = self;
        apply!(
            cfg, a, model, seeds, eval_every_steps, eval_episodes, total_step_budget,
            pretrain_step_offset, max_learn_steps, noise_rate, backend, resample_layouts,
            beam_width, retrieval_k, verify_rollouts, accept_threshold, train_temperature,
            eval_temperature, eval_candidates, verify_all, max_retries, grid_width, grid_height,
            n_distractors, step_limit, layout_pool_size, tabular_episodes
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen_tasks(seed: u64, split: bool, out: Option<PathBuf>) -> Result<()> {
    let (_, tasks) = suite_for_seed(seed);
    let mut w = output(out.as_ref())?;
    if split {
        let s = split_tasks(&tasks, seed);
        let ids = |v: &[wvflang::TaskSpec]| v.iter().map(|t| t.task_id).collect::<Vec<_>>();
        let doc = serde_json::json!({
            "seed": seed,
            "tasks": serde_json::from_str::<serde_json::Value>(&export_json(&tasks)?)?,
            "train": ids(&s.train),
            "test": ids(&s.test),
        });
        writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    } else {
        writeln!(w, "{}", export_json(&tasks)?)?;
    }
    w.flush()?;
    Ok(())
}

fn train_wvf(a: TrainArgs) -> Result<()> {
    let env = wvflang::EnvConfig::default()
        .with_grid(a.grid_width, a.grid_height)
        .with_distractors(a.n_distractors)
        .with_step_limit(a.step_limit);
    env.validate()?;
    let params = wvflang::wvf::QLearnParams {
        episodes: a.tabular_episodes,
        layout_pool_size: a.layout_pool_size,
        learning_rate: a.learning_rate,
        ..Default::default()
    };
    let mut rng = SimRng::seed_from_u64(a.seed);
    let pool = layout_pool(&env, params.layout_pool_size, &mut rng)?;
    let (backend, lo, hi) = TabularBackend::train(&env, &pool, &params, &mut rng)?;
    println!(
        "pretraining: {} environment steps ({} min-task, {} max-task)",
        lo.env_steps + hi.env_steps,
        lo.env_steps,
        hi.env_steps
    );
    let mut rows = Vec::new();
    for attr in Attribute::all() {
        let r = basis_success_rate(&backend, attr, a.eval_episodes, &mut rng)?;
        println!("basis {:<7} {r:.3}", attr.name());
        rows.push((attr.name(), r));
    }
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        for (task, table) in [("max", backend.q_max()), ("min", backend.q_min())] {
            let header = CheckpointHeader {
                backend: BackendKind::Tabular,
                task: task.into(),
                attribute: None,
                seed: a.seed,
            };
            let f = File::create(dir.join(format!("q_{task}.json")))?;
            TabularCheckpoint::from_table(table, header).write(BufWriter::new(f))?;
        }
        let mut w = BufWriter::new(File::create(dir.join("basis_success.csv"))?);
        writeln!(w, "attribute,success_rate")?;
        for (name, r) in rows {
            writeln!(w, "{name},{r}")?;
        }
        w.flush()?;
        println!("checkpoints written to {}", dir.display());
    }
    Ok(())
}

fn run(kind: ExperimentKind, a: RunArgs) -> Result<ExitCode> {
    let cfg = a.config(kind)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
    }
    let results = run_experiment(&cfg, a.out.as_deref())?;
    if let Some(dir) = &a.out {
        write_outputs(dir, &cfg, &results)?;
        write_aggregate(&aggregate(&all_points(&results)), File::create(dir.join("aggregate.csv"))?)?;
        println!("outputs written to {}", dir.display());
    }
    for r in &results {
        let last = r.points.last().expect("every run has a point");
        println!(
            "seed {}: {} points, {} learn steps, {} tasks solved, last success {:.3} at {} steps",
            r.seed,
            r.points.len(),
            r.learn_steps,
            last.tasks_solved,
            last.mean_success,
            last.env_steps
        );
    }
    let gates = check_gates(&cfg, &results);
    for g in &gates {
        println!("{} {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    if a.check && gates.iter().any(|g| !g.passed) {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_check(text: &str, seed: u64) -> Result<ExitCode> {
    match parse(text) {
        Ok(e) => {
            let map = SymbolMap::shuffled(seed);
            println!("canonical: {e}");
            println!("length: {}", expr_length(&e));
            let named: Vec<String> = e
                .symbols()
                .iter()
                .map(|i| format!("Symbol_{i}={}", map.attribute(*i).name()))
                .collect();
            println!("symbols: {}", named.join(" "));
            let d = denotation(&e, &map);
            let objs: Vec<String> = d.iter().map(|o| o.to_string()).collect();
            println!("denotation ({}): {}", d.len(), objs.join(", "));
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            eprintln!("invalid expression: {err}");
            Ok(ExitCode::from(2))
        }
    }
}

fn aggregate_cmd(paths: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    let mut points = Vec::new();
    for p in paths {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        points.extend(read_metrics(f).with_context(|| format!("reading {}", p.display()))?);
    }
    if points.is_empty() {
        bail!("no curve points in the given files");
    }
    write_aggregate(&aggregate(&points), output(out.as_ref())?)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTasks { seed, split, out } => gen_tasks(seed, split, out).map(|_| ExitCode::SUCCESS),
        Command::TrainWvf(a) => train_wvf(a).map(|_| ExitCode::SUCCESS),
        Command::RunExpA(a) => run(ExperimentKind::ExpA, a),
        Command::RunExpB(a) => run(ExperimentKind::ExpB, a),
        Command::Oracle(a) => run(ExperimentKind::Oracle, a),
        Command::ParseCheck { expr, seed } => parse_check(&expr, seed),
        Command::Aggregate { csv, out } => aggregate_cmd(&csv, out).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        // a closed downstream pipe is not a failure of the command
        let pipe = e
            .downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe);
        if pipe {
            return ExitCode::SUCCESS;
        }
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
