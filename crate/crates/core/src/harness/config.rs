use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::error::HarnessError;
use crate::gridworld::EnvConfig;
use crate::wvf::{BackendKind, QLearnParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    /// Learn on all 162 tasks.
    #[serde(rename = "exp_a_162")]
    ExpA,
    /// Learn on a random half, evaluate on both halves.
    #[serde(rename = "exp_b_split")]
    ExpB,
    /// Ground-truth expressions, no parser.
    #[serde(rename = "oracle")]
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    OracleMock,
    HeuristicMock,
    Remote,
}

/// Flat experiment description. Every key is optional in JSON; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelKind,
    pub seeds: Vec<u64>,
    pub eval_every_steps: u64,
    pub eval_episodes: usize,
    pub total_step_budget: u64,
    pub pretrain_step_offset: u64,
    /// Safety stop for models that never produce a parseable candidate.
    pub max_learn_steps: usize,
    pub noise_rate: f64,
    pub backend: BackendKind,
    pub resample_layouts: bool,

    pub beam_width: usize,
    pub retrieval_k: usize,
    pub verify_rollouts: usize,
    pub accept_threshold: f64,
    pub train_temperature: f64,
    pub eval_temperature: f64,
    pub eval_candidates: usize,
    pub verify_all: bool,
    pub max_retries: usize,

    pub grid_width: i32,
    pub grid_height: i32,
    pub n_distractors: usize,
    pub step_limit: u32,

    /// Tabular backend only.
    pub layout_pool_size: usize,
    pub tabular_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let agent = AgentConfig::default();
        let env = EnvConfig::default();
        let q = QLearnParams::default();
        Self {
            experiment: ExperimentKind::ExpA,
            model: ModelKind::OracleMock,
            seeds: (0..10).collect(),
            eval_every_steps: 5_000,
            eval_episodes: 100,
            total_step_budget: 200_000,
            pretrain_step_offset: 0,
            max_learn_steps: 100_000,
            noise_rate: 0.1,
            backend: BackendKind::ExactDp,
            resample_layouts: true,
            beam_width: agent.beam_width,
            retrieval_k: agent.retrieval_k,
            verify_rollouts: agent.verify_rollouts,
            accept_threshold: agent.accept_threshold,
            train_temperature: agent.train_temperature,
            eval_temperature: agent.eval_temperature,
            eval_candidates: agent.eval_candidates,
            verify_all: agent.verify_all,
            max_retries: agent.max_retries,
            grid_width: env.width,
            grid_height: env.height,
            n_distractors: env.n_distractors,
            step_limit: env.step_limit,
            layout_pool_size: q.layout_pool_size,
            tabular_episodes: q.episodes,
        }
    }
}

impl ExperimentConfig {
    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            beam_width: self.beam_width,
            retrieval_k: self.retrieval_k,
            verify_rollouts: self.verify_rollouts,
            accept_threshold: self.accept_threshold,
            train_temperature: self.train_temperature,
            eval_temperature: self.eval_temperature,
            eval_candidates: self.eval_candidates,
            verify_all: self.verify_all,
            max_retries: self.max_retries,
        }
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig::default()
            .with_grid(self.grid_width, self.grid_height)
            .with_distractors(self.n_distractors)
            .with_step_limit(self.step_limit)
    }

    pub fn qlearn(&self) -> QLearnParams {
        QLearnParams {
            episodes: self.tabular_episodes,
            layout_pool_size: self.layout_pool_size,
            ..QLearnParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required");
        }
        if self.eval_every_steps == 0 {
            return bad("eval_every_steps must be positive");
        }
        if self.total_step_budget > 0 && self.eval_every_steps > self.total_step_budget {
            return bad("eval_every_steps exceeds total_step_budget");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad("noise_rate must lie in [0, 1]");
        }
        self.agent()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.env().validate()?;
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn write_config(config: &ExperimentConfig, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, serde_json::to_string_pretty(config)?)?;
    Ok(())
}
