use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, ModelKind};
use super::metrics::{final_window_mean, write_metrics, CurvePoint, Split};
use crate::agent::{
    Agent, ChatModel, ExampleStore, HeuristicMock, OracleMock, RemoteChatModel, VerdictRecord,
};
use crate::boolexpr::SymbolMap;
use crate::composer::{rollout_expr, RolloutContext};
use crate::error::HarnessError;
use crate::rng::SimRng;
use crate::tasksuite::{generate_tasks, sample_task, split_tasks, TaskSpec};
use crate::wvf::{layout_pool, BackendKind, ExactBackend, TabularBackend, WvfBackend};

/// Points averaged at the end of a curve when judging convergence.
pub const FINAL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAudit {
    pub task_id: usize,
    pub instruction: String,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAudit {
    pub per_task: Vec<TaskAudit>,
    pub overall: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    /// Every verification and evaluation verdict, in order.
    pub verdicts: Vec<VerdictRecord>,
    /// `verdicts.len()` at the moment each point was emitted.
    pub marks: Vec<usize>,
    pub store: ExampleStore,
    pub attempted: BTreeSet<usize>,
    pub learn_steps: usize,
    pub audit: Option<OracleAudit>,
}

impl RunResult {
    /// Logged episode steps up to each point match its `env_steps`.
    pub fn steps_audited(&self, offset: u64) -> bool {
        self.points.iter().zip(&self.marks).all(|(p, &m)| {
            let logged: u64 = self.verdicts[..m].iter().map(|v| v.env_steps_consumed).sum();
            p.env_steps == offset + logged
        })
    }

    pub fn solved_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].tasks_solved <= w[1].tasks_solved)
    }
}

/// Symbol assignment and task suite used by the run with `seed`.
pub fn suite_for_seed(seed: u64) -> (SymbolMap, Vec<TaskSpec>) {
    let map = SymbolMap::shuffled(seed);
    let tasks = generate_tasks(&map);
    (map, tasks)
}

pub fn make_backend(config: &ExperimentConfig, seed: u64) -> Result<Box<dyn WvfBackend>, HarnessError> {
    let env = config.env();
    Ok(match config.backend {
        BackendKind::ExactDp => Box::new(ExactBackend::new(env)?),
        BackendKind::Tabular => {
            let mut rng = SimRng::seed_from_u64(seed ^ 0x7ab1e);
            let params = config.qlearn();
            let pool = layout_pool(&env, params.layout_pool_size, &mut rng)?;
            let (b, lo, hi) = TabularBackend::train(&env, &pool, &params, &mut rng)?;
            log::info!(
                "seed {seed}: tabular pretraining used {} environment steps",
                lo.env_steps + hi.env_steps
            );
            Box::new(b)
        }
    })
}

pub fn make_model(
    config: &ExperimentConfig,
    tasks: &[TaskSpec],
    transcript: Option<&Path>,
) -> Result<Box<dyn ChatModel>, HarnessError> {
    Ok(match config.model {
        ModelKind::OracleMock => Box::new(OracleMock::new(tasks, config.noise_rate)),
        ModelKind::HeuristicMock => Box::new(HeuristicMock),
        ModelKind::Remote => {
            let mut m = RemoteChatModel::from_env()?;
            if let Some(p) = transcript {
                m = m.with_transcript(Box::new(BufWriter::new(File::create(p)?)));
            }
            Box::new(m)
        }
    })
}

struct Recorder {
    offset: u64,
    steps: u64,
    points: Vec<CurvePoint>,
    verdicts: Vec<VerdictRecord>,
    marks: Vec<usize>,
    seed: u64,
}

impl Recorder {
    fn new(offset: u64, seed: u64) -> Self {
        Self {
            offset,
            steps: 0,
            points: Vec::new(),
            verdicts: Vec::new(),
            marks: Vec::new(),
            seed,
        }
    }

    fn log(&mut self, rec: VerdictRecord) {
        self.steps += rec.env_steps_consumed;
        self.verdicts.push(rec);
    }

    /// A point stamped with the steps logged before `pending` verdicts.
    fn point(&mut self, pending: usize, mean_success: f64, tasks_solved: usize, split: Split) {
        let mark = self.verdicts.len() - pending;
        let logged: u64 = self.verdicts[mark..].iter().map(|v| v.env_steps_consumed).sum();
        self.points.push(CurvePoint {
            env_steps: self.offset + self.steps - logged,
            mean_success,
            tasks_solved,
            split,
            seed: self.seed,
        });
        self.marks.push(mark);
    }
}

/// Learning run for the parser experiments (all tasks, or a train/test
/// split). Each point's `env_steps` counts the steps spent before its own
/// evaluation rollouts.
pub fn run_agent(
    config: &ExperimentConfig,
    seed: u64,
    model: Box<dyn ChatModel>,
    backend: &dyn WvfBackend,
) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let (map, tasks) = suite_for_seed(seed);
    let (learn, evals): (Vec<TaskSpec>, Vec<(Split, Vec<TaskSpec>)>) = match config.experiment {
        ExperimentKind::ExpA => (tasks.clone(), vec![(Split::All, tasks)]),
        ExperimentKind::ExpB => {
            let s = split_tasks(&tasks, seed);
            (s.train.clone(), vec![(Split::Train, s.train), (Split::Test, s.test)])
        }
        ExperimentKind::Oracle => {
            return Err(HarnessError::Config("oracle runs bypass the parser".into()))
        }
    };
    if learn.is_empty() || evals.iter().any(|(_, s)| s.is_empty()) {
        return Err(HarnessError::Config("empty task set".into()));
    }
    let ctx = RolloutContext {
        backend,
        map: &map,
        resample_layouts: config.resample_layouts,
    };
    let mut rng = SimRng::seed_from_u64(seed);
    let mut agent = Agent::new(config.agent(), model)?;
    let mut rec = Recorder::new(config.pretrain_step_offset, seed);
    let mut attempted = BTreeSet::new();

    let evaluate = |agent: &Agent, rec: &mut Recorder, rng: &mut SimRng| -> Result<(), HarnessError> {
        let mut rates = Vec::new();
        for (split, set) in &evals {
            let task = sample_task(set, rng);
            let e = agent.eval_task(task, config.eval_episodes, ctx, rng)?;
            rec.log(VerdictRecord::new(
                &task.instruction,
                e.candidate.as_deref().unwrap_or(""),
                &e.verdict,
            ));
            rates.push((*split, e.rate()));
        }
        let n = rates.len();
        for (split, rate) in rates {
            rec.point(n, rate, agent.store.len(), split);
        }
        Ok(())
    };

    evaluate(&agent, &mut rec, &mut rng)?;
    let every = config.eval_every_steps;
    let mut next_tick = every;
    let mut learn_steps = 0;
    let mut dirty = false;
    while rec.steps < config.total_step_budget && learn_steps < config.max_learn_steps {
        let task = sample_task(&learn, &mut rng).clone();
        attempted.insert(task.task_id);
        let report = agent.learn_step(&task, ctx, &mut rng)?;
        learn_steps += 1;
        dirty = true;
        for o in &report.outcomes {
            if let Some(v) = &o.verdict {
                rec.log(VerdictRecord::new(&task.instruction, &o.candidate, v));
            }
        }
        if rec.steps >= next_tick {
            evaluate(&agent, &mut rec, &mut rng)?;
            dirty = false;
            next_tick = (rec.steps / every + 1) * every;
        }
    }
    if dirty {
        evaluate(&agent, &mut rec, &mut rng)?;
    }
    Ok(RunResult {
        seed,
        points: rec.points,
        verdicts: rec.verdicts,
        marks: rec.marks,
        store: agent.store,
        attempted,
        learn_steps,
        audit: None,
    })
}

/// Ground-truth expressions composed directly. The first point summarizes
/// a pass over every task; later points each evaluate one random task.
pub fn run_oracle(
    config: &ExperimentConfig,
    seed: u64,
    backend: &dyn WvfBackend,
) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let (map, tasks) = suite_for_seed(seed);
    let ctx = RolloutContext {
        backend,
        map: &map,
        resample_layouts: config.resample_layouts,
    };
    let mut rng = SimRng::seed_from_u64(seed);
    let mut rec = Recorder::new(config.pretrain_step_offset, seed);
    let mut per_task = Vec::with_capacity(tasks.len());
    for t in &tasks {
        let v = rollout_expr(&t.truth_expr, t.denotation, config.eval_episodes, ctx, &mut rng)?;
        rec.log(VerdictRecord::new(&t.instruction, &t.truth_expr.to_string(), &v));
        per_task.push(TaskAudit {
            task_id: t.task_id,
            instruction: t.instruction.clone(),
            success_rate: v.rate(),
        });
    }
    let overall = per_task.iter().map(|a| a.success_rate).sum::<f64>() / per_task.len() as f64;
    let solved = per_task
        .iter()
        .filter(|a| a.success_rate >= config.accept_threshold)
        .count();
    rec.point(tasks.len(), overall, solved, Split::All);
    while rec.steps < config.total_step_budget {
        let t = sample_task(&tasks, &mut rng);
        let v = rollout_expr(&t.truth_expr, t.denotation, config.eval_episodes, ctx, &mut rng)?;
        rec.log(VerdictRecord::new(&t.instruction, &t.truth_expr.to_string(), &v));
        rec.point(1, v.rate(), solved, Split::All);
    }
    Ok(RunResult {
        seed,
        points: rec.points,
        verdicts: rec.verdicts,
        marks: rec.marks,
        store: ExampleStore::new(),
        attempted: tasks.iter().map(|t| t.task_id).collect(),
        learn_steps: 0,
        audit: Some(OracleAudit { per_task, overall }),
    })
}

/// One seed of `config`, building its own backend and model.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    transcript: Option<&Path>,
) -> Result<RunResult, HarnessError> {
    let backend = make_backend(config, seed)?;
    match config.experiment {
        ExperimentKind::Oracle => run_oracle(config, seed, backend.as_ref()),
        _ => {
            let (_, tasks) = suite_for_seed(seed);
            let model = make_model(config, &tasks, transcript)?;
            run_agent(config, seed, model, backend.as_ref())
        }
    }
}

/// All seeds in parallel; results are in seed order.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<RunResult>, HarnessError> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let transcript = out_dir.map(|d| d.join(format!("chat_seed{seed}.jsonl")));
            run_seed(config, seed, transcript.as_deref())
        })
        .collect()
}

pub fn all_points(results: &[RunResult]) -> Vec<CurvePoint> {
    results.iter().flat_map(|r| r.points.iter().cloned()).collect()
}

/// Metrics, verdict logs, stores and audits under `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    results: &[RunResult],
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    super::config::write_config(config, &dir.join("config.json"))?;
    write_metrics(&all_points(results), File::create(dir.join("metrics.csv"))?)?;
    for r in results {
        let mut w = BufWriter::new(File::create(dir.join(format!("verdicts_seed{}.jsonl", r.seed)))?);
        for v in &r.verdicts {
            serde_json::to_writer(&mut w, v)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        if !r.store.is_empty() {
            let f = File::create(dir.join(format!("store_seed{}.jsonl", r.seed)))?;
            r.store.save_jsonl(BufWriter::new(f))?;
        }
        if let Some(a) = &r.audit {
            let mut csv = csv::Writer::from_path(dir.join(format!("oracle_audit_seed{}.csv", r.seed)))?;
            for t in &a.per_task {
                csv.serialize(t)?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gate(name: &'static str, passed: bool, detail: String) -> Gate {
    Gate { name, passed, detail }
}

/// Acceptance gates for the experiment kind.
pub fn check_gates(config: &ExperimentConfig, results: &[RunResult]) -> Vec<Gate> {
    let pts = all_points(results);
    let mut gates = vec![
        gate(
            "step_audit",
            results.iter().all(|r| r.steps_audited(config.pretrain_step_offset)),
            "logged episode steps match every curve point".into(),
        ),
        gate(
            "tasks_solved_monotone",
            results.iter().all(RunResult::solved_monotone),
            "tasks_solved never decreases".into(),
        ),
    ];
    match config.experiment {
        ExperimentKind::Oracle => {
            let audits: Vec<&OracleAudit> = results.iter().filter_map(|r| r.audit.as_ref()).collect();
            let overall = audits.iter().map(|a| a.overall).sum::<f64>() / audits.len().max(1) as f64;
            let worst = audits
                .iter()
                .flat_map(|a| a.per_task.iter().map(|t| t.success_rate))
                .fold(1.0, f64::min);
            gates.push(gate("oracle_overall", overall >= 0.92, format!("mean {overall:.4} >= 0.92")));
            gates.push(gate("oracle_worst_task", worst >= 0.85, format!("min {worst:.2} >= 0.85")));
        }
        ExperimentKind::ExpA => {
            let m = final_window_mean(&pts, Split::All, FINAL_WINDOW).unwrap_or(0.0);
            gates.push(gate("final_success", m >= 0.92, format!("final mean {m:.4} >= 0.92")));
        }
        ExperimentKind::ExpB => {
            let train = final_window_mean(&pts, Split::Train, FINAL_WINDOW).unwrap_or(0.0);
            let test = final_window_mean(&pts, Split::Test, FINAL_WINDOW).unwrap_or(0.0);
            gates.push(gate("test_success", test > 0.5, format!("final test mean {test:.4} > 0.5")));
            gates.push(gate(
                "train_test_gap",
                (train - test).abs() < 0.1,
                format!("|{train:.4} - {test:.4}| < 0.1"),
            ));
        }
    }
    gates
}
