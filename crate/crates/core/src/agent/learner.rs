use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::chat::ChatModel;
use super::prompt::{build_prompt, ChatPrompt, MAX_PROMPT_EXAMPLES};
use super::store::{ExampleStore, Retention};
use crate::boolexpr::parse;
use crate::composer::{rollout_expr, RolloutContext, Verdict, VerdictKind};
use crate::error::WvfError;
use crate::rng::SimRng;
use crate::tasksuite::TaskSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub beam_width: usize,
    pub retrieval_k: usize,
    pub verify_rollouts: usize,
    pub accept_threshold: f64,
    pub train_temperature: f64,
    pub eval_temperature: f64,
    /// Candidates requested at evaluation; the first that parses is used.
    pub eval_candidates: usize,
    /// Verify the whole beam and offer every passing candidate in beam
    /// order, instead of stopping at the first pass.
    pub verify_all: bool,
    /// Extra attempts after a failed model call.
    pub max_retries: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            beam_width: 10,
            retrieval_k: 10,
            verify_rollouts: 100,
            accept_threshold: 0.92,
            train_temperature: 1.0,
            eval_temperature: 0.0,
            eval_candidates: 1,
            verify_all: false,
            max_retries: 2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), WvfError> {
        if !(self.accept_threshold > 0.0 && self.accept_threshold <= 1.0) {
            return Err(WvfError::Param("accept_threshold must be in (0, 1]".into()));
        }
        if self.beam_width == 0 || self.eval_candidates == 0 || self.verify_rollouts == 0 {
            return Err(WvfError::Param(
                "beam_width, eval_candidates and verify_rollouts must be positive".into(),
            ));
        }
        if self.retrieval_k > MAX_PROMPT_EXAMPLES {
            return Err(WvfError::Param(format!(
                "retrieval_k above {MAX_PROMPT_EXAMPLES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Ask the model for candidates, retrying failed calls; gives up with an
/// empty list.
pub fn propose(
    model: &dyn ChatModel,
    prompt: &ChatPrompt,
    config: &AgentConfig,
    mode: Mode,
    rng: &mut SimRng,
) -> Vec<String> {
    let (n, temperature) = match mode {
        Mode::Train => (config.beam_width, config.train_temperature),
        Mode::Eval => (config.eval_candidates, config.eval_temperature),
    };
    for attempt in 0..=config.max_retries {
        match model.complete(prompt, n, temperature, rng) {
            Ok(c) => return c,
            Err(e) => log::warn!("model call {} failed: {e}", attempt + 1),
        }
    }
    Vec::new()
}

/// What happened to one beam candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOutcome {
    pub candidate: String,
    /// `None` when verification stopped before reaching this candidate.
    pub verdict: Option<Verdict>,
    /// Index of an earlier candidate with the same parse, whose verdict
    /// was reused without new rollouts.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub instruction: String,
    pub outcomes: Vec<CandidateOutcome>,
    /// Beam index and store decision of each offered candidate.
    pub retained: Vec<(usize, Retention)>,
    pub env_steps: u64,
    /// Lengths of every verification episode, in order.
    pub episode_lengths: Vec<u32>,
}

impl StepReport {
    pub fn solved(&self) -> bool {
        !self.retained.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub candidate: Option<String>,
    pub verdict: Verdict,
}

impl EvalReport {
    pub fn rate(&self) -> f64 {
        self.verdict.rate()
    }
}

/// The semantic parser: a chat model plus the verified example store.
pub struct Agent {
    pub config: AgentConfig,
    pub store: ExampleStore,
    model: Box<dyn ChatModel>,
}

impl Agent {
    pub fn new(config: AgentConfig, model: Box<dyn ChatModel>) -> Result<Self, WvfError> {
        config.validate()?;
        Ok(Self {
            config,
            store: ExampleStore::new(),
            model,
        })
    }

    pub fn prompt_for(&self, instruction: &str) -> ChatPrompt {
        let examples = self.store.retrieve(instruction, self.config.retrieval_k);
        build_prompt(instruction, &examples)
    }

    /// Propose a beam for `task`, verify candidates by rollouts and offer
    /// passing ones to the store.
    pub fn learn_step(
        &mut self,
        task: &TaskSpec,
        ctx: RolloutContext<'_>,
        rng: &mut SimRng,
    ) -> Result<StepReport, WvfError> {
        let prompt = self.prompt_for(&task.instruction);
        let beam = propose(self.model.as_ref(), &prompt, &self.config, Mode::Train, rng);
        let mut report = StepReport {
            instruction: task.instruction.clone(),
            outcomes: Vec::with_capacity(beam.len()),
            retained: Vec::new(),
            env_steps: 0,
            episode_lengths: Vec::new(),
        };
        let mut first_seen: HashMap<String, usize> = HashMap::new();
        let mut passed = false;
        for (i, cand) in beam.into_iter().enumerate() {
            if passed && !self.config.verify_all {
                report.outcomes.push(CandidateOutcome {
                    candidate: cand,
                    verdict: None,
                    duplicate_of: None,
                });
                continue;
            }
            let Ok(expr) = parse(&cand) else {
                report.outcomes.push(CandidateOutcome {
                    candidate: cand,
                    verdict: Some(Verdict::invalid()),
                    duplicate_of: None,
                });
                continue;
            };
            let key = expr.to_string();
            if let Some(&j) = first_seen.get(&key) {
                let mut v = report.outcomes[j].verdict.clone().expect("verified earlier");
                v.env_steps = 0;
                v.episode_lengths.clear();
                report.outcomes.push(CandidateOutcome {
                    candidate: cand,
                    verdict: Some(v),
                    duplicate_of: Some(j),
                });
                continue;
            }
            first_seen.insert(key, i);
            let v = rollout_expr(&expr, task.denotation, self.config.verify_rollouts, ctx, rng)?;
            report.env_steps += v.env_steps;
            report.episode_lengths.extend_from_slice(&v.episode_lengths);
            if v.passes(self.config.accept_threshold) {
                passed = true;
                let r = self.store.offer(&task.instruction, &expr);
                report.retained.push((i, r));
            }
            report.outcomes.push(CandidateOutcome {
                candidate: cand,
                verdict: Some(v),
                duplicate_of: None,
            });
        }
        Ok(report)
    }

    /// Greedy single-candidate parse of `task`, scored over `n` episodes.
    pub fn eval_task(
        &self,
        task: &TaskSpec,
        n: usize,
        ctx: RolloutContext<'_>,
        rng: &mut SimRng,
    ) -> Result<EvalReport, WvfError> {
        let prompt = self.prompt_for(&task.instruction);
        let cands = propose(self.model.as_ref(), &prompt, &self.config, Mode::Eval, rng);
        let Some((cand, expr)) = cands
            .iter()
            .find_map(|c| parse(c).ok().map(|e| (c.clone(), e)))
        else {
            return Ok(EvalReport {
                candidate: cands.into_iter().next(),
                verdict: Verdict::invalid(),
            });
        };
        let verdict = rollout_expr(&expr, task.denotation, n, ctx, rng)?;
        Ok(EvalReport {
            candidate: Some(cand),
            verdict,
        })
    }
}

/// One verification or evaluation verdict as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub instruction: String,
    pub candidate: String,
    pub kind: VerdictKind,
    pub success_rate: Option<f64>,
    pub episodes: usize,
    pub env_steps_consumed: u64,
}

impl VerdictRecord {
    pub fn new(instruction: &str, candidate: &str, v: &Verdict) -> Self {
        Self {
            instruction: instruction.to_string(),
            candidate: candidate.to_string(),
            kind: v.kind,
            success_rate: v.success_rate,
            episodes: v.episodes,
            env_steps_consumed: v.env_steps,
        }
    }
}
