use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BackendKind, LayoutSolution, LayoutWvf, MinMaxPair, ValueFn, WvfBackend};
use crate::error::WvfError;
use crate::gridworld::{
    extended_reward, reset, Action, Attribute, Dir, EnvConfig, EpisodeState, GoalId,
    GoalRewardFn, ObjectSet, ObjectSpec, Pos, Pose,
};
use crate::rng::SimRng;

const N_GOALS: usize = ObjectSpec::COUNT;
const N_ACTIONS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearnParams {
    pub learning_rate: f64,
    pub epsilon_init: f64,
    pub epsilon_final: f64,
    pub epsilon_decay_steps: u64,
    /// Training episodes per task (max or min).
    pub episodes: usize,
    pub layout_pool_size: usize,
}

impl Default for QLearnParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epsilon_init: 0.5,
            epsilon_final: 0.1,
            epsilon_decay_steps: 100_000,
            episodes: 20_000,
            layout_pool_size: 5,
        }
    }
}

impl QLearnParams {
    /// Linear decay from `epsilon_init` to `epsilon_final`.
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_final;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_init + (self.epsilon_final - self.epsilon_init) * frac
    }

    fn validate(&self) -> Result<(), WvfError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.learning_rate) {
            return Err(WvfError::Param(format!(
                "learning_rate {} outside [0, 1]",
                self.learning_rate
            )));
        }
        if !unit.contains(&self.epsilon_init) || !unit.contains(&self.epsilon_final) {
            return Err(WvfError::Param("epsilon outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Q-table over `(layout, pose, goal, action)` for one task reward.
#[derive(Debug, Clone)]
pub struct TabularQ {
    pub(super) layouts: Vec<EpisodeState>,
    pub(super) width: i32,
    pub(super) poses: usize,
    pub(super) values: Vec<f64>,
    pub(super) visits: Vec<u32>,
}

impl TabularQ {
    pub(super) fn zeros(layouts: Vec<EpisodeState>) -> Self {
        let width = layouts[0].width;
        let poses = layouts[0].pose_count();
        let n = layouts.len() * poses;
        Self {
            layouts,
            width,
            poses,
            values: vec![0.0; n * N_GOALS * N_ACTIONS],
            visits: vec![0; n * N_ACTIONS],
        }
    }

    pub fn layouts(&self) -> &[EpisodeState] {
        &self.layouts
    }

    fn row(&self, layout: usize, pose: Pose, goal: GoalId) -> usize {
        ((layout * self.poses + pose.index(self.width)) * N_GOALS + goal.index()) * N_ACTIONS
    }

    pub fn get(&self, layout: usize, pose: Pose, goal: GoalId, action: Action) -> f64 {
        self.values[self.row(layout, pose, goal) + action.index()]
    }

    pub(super) fn set(&mut self, layout: usize, pose: Pose, goal: GoalId, action: Action, v: f64) {
        let i = self.row(layout, pose, goal) + action.index();
        self.values[i] = v;
    }

    fn actions(&self, layout: usize, pose: Pose, goal: GoalId) -> &[f64] {
        let r = self.row(layout, pose, goal);
        &self.values[r..r + N_ACTIONS]
    }

    /// How often `action` was taken at `pose` during training.
    pub fn visits(&self, layout: usize, pose: Pose, action: Action) -> u32 {
        self.visits[(layout * self.poses + pose.index(self.width)) * N_ACTIONS + action.index()]
    }

    pub fn layout_index(&self, state: &EpisodeState) -> Option<usize> {
        self.layouts.iter().position(|l| l.same_layout(state))
    }
}

/// A trained table viewed through one pool layout.
#[derive(Debug, Clone)]
/// Goals absent from the layout are never trained; they read as the
/// wrong-pickup penalty, a lower bound that min, max and negation preserve.
pub struct TabularView {
    table: Arc<TabularQ>,
    layout: usize,
    present: ObjectSet,
    floor: f64,
}

impl ValueFn for TabularView {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        if !self.present.contains(goal) {
            return self.floor;
        }
        self.table.get(self.layout, state.agent, goal, action)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainReport {
    pub episodes: usize,
    pub env_steps: u64,
    /// Greedy success per goal, over every start pose of every pool layout
    /// where the goal is present.
    pub per_goal_success: Vec<(ObjectSpec, f64)>,
    /// `(layout, goal)` pairs that were skipped because the goal cannot be
    /// reached.
    pub skipped: Vec<(usize, ObjectSpec)>,
}

fn free_cells(layout: &EpisodeState) -> Vec<Pos> {
    (0..layout.height)
        .flat_map(|y| (0..layout.width).map(move |x| Pos::new(x, y)))
        .filter(|p| layout.is_free(*p))
        .collect()
}

fn random_start(layout: &EpisodeState, rng: &mut SimRng) -> EpisodeState {
    let cells = free_cells(layout);
    let mut s = layout.clone();
    s.agent = Pose {
        pos: *cells.choose(rng).expect("layout has a free cell"),
        dir: Dir::ALL[rng.gen_range(0..4)],
    };
    s.steps_elapsed = 0;
    s.picked = None;
    s
}

fn argmax_random_ties(values: &[f64], rng: &mut SimRng) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|i| values[*i] == best).collect();
    ties[rng.gen_range(0..ties.len())]
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Random layouts whose union covers every attribute.
pub fn layout_pool(
    config: &EnvConfig,
    size: usize,
    rng: &mut SimRng,
) -> Result<Vec<EpisodeState>, WvfError> {
    if size == 0 {
        return Err(WvfError::Param("layout pool must be nonempty".into()));
    }
    for _ in 0..1000 {
        let pool: Vec<EpisodeState> = (0..size)
            .map(|_| reset(config, ObjectSet::full(), rng))
            .collect::<Result<_, _>>()?;
        let covered = pool
            .iter()
            .fold(ObjectSet::empty(), |acc, l| acc.union(l.present()));
        if Attribute::all().all(|a| !covered.intersection(a.objects()).is_empty()) {
            return Ok(pool);
        }
    }
    Err(WvfError::Param(format!(
        "could not cover all attributes with {size} layouts"
    )))
}

/// Goal-conditioned Q-learning on a fixed pool of layouts.
///
/// Each episode conditions on one goal present in a random pool layout and
/// acts epsilon-greedily for it; every transition then updates the values of
/// all goals present in that layout, since dynamics are goal-independent.
pub fn train_tabular_wvf(
    pool: &[EpisodeState],
    goal_rewards: &GoalRewardFn,
    config: &EnvConfig,
    params: &QLearnParams,
    rng: &mut SimRng,
) -> Result<(TabularQ, TrainReport), WvfError> {
    params.validate()?;
    config.validate()?;
    if pool.is_empty() {
        return Err(WvfError::Param("layout pool is empty".into()));
    }
    if pool
        .iter()
        .any(|l| l.width != pool[0].width || l.height != pool[0].height)
    {
        return Err(WvfError::Param("pool layouts differ in size".into()));
    }

    let mut table = TabularQ::zeros(pool.to_vec());
    let mut report = TrainReport::default();
    let mut present: Vec<Vec<ObjectSpec>> = Vec::with_capacity(pool.len());
    let mut trainable: Vec<Vec<ObjectSpec>> = Vec::with_capacity(pool.len());
    for (li, layout) in pool.iter().enumerate() {
        let sol = LayoutSolution::new(layout);
        let cells = free_cells(layout);
        let goals: Vec<ObjectSpec> = layout.present().iter().collect();
        let mut ok = Vec::new();
        for &g in &goals {
            let reachable = cells.iter().any(|&pos| {
                Dir::ALL
                    .iter()
                    .any(|&dir| sol.goal_distance(Pose { pos, dir }, g).is_some())
            });
            if reachable {
                ok.push(g);
            } else {
                log::warn!("goal {g} unreachable in pool layout {li}; skipped");
                report.skipped.push((li, g));
            }
        }
        present.push(goals);
        trainable.push(ok);
    }

    let alpha = params.learning_rate;
    let mut step: u64 = 0;
    for _ in 0..params.episodes {
        let li = rng.gen_range(0..pool.len());
        let Some(&goal) = trainable[li].choose(rng) else {
            continue;
        };
        report.episodes += 1;
        let mut state = random_start(&pool[li], rng);
        while !state.is_terminal() {
            let pose = state.agent;
            let a = if rng.gen::<f64>() < params.epsilon(step) {
                rng.gen_range(0..N_ACTIONS)
            } else {
                argmax_random_ties(table.actions(li, pose, goal), rng)
            };
            let action = Action::ALL[a];
            let out = state.step(action)?;
            let next = state.agent;
            for &g in &present[li] {
                let r = extended_reward(out.picked, g, goal_rewards, config);
                let bootstrap = if out.picked.is_some() {
                    0.0
                } else {
                    table
                        .actions(li, next, g)
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let old = table.get(li, pose, g, action);
                table.set(li, pose, g, action, old + alpha * (r + bootstrap - old));
            }
            let vi = (li * table.poses + pose.index(table.width)) * N_ACTIONS + a;
            table.visits[vi] += 1;
            step += 1;
        }
    }
    report.env_steps = step;
    report.per_goal_success = greedy_goal_success(&table, &trainable);
    Ok((table, report))
}

fn greedy_goal_success(table: &TabularQ, goals: &[Vec<ObjectSpec>]) -> Vec<(ObjectSpec, f64)> {
    let mut hits = [0usize; N_GOALS];
    let mut runs = [0usize; N_GOALS];
    for (li, layout) in table.layouts.iter().enumerate() {
        for pos in free_cells(layout) {
            for dir in Dir::ALL {
                for &g in &goals[li] {
                    let mut s = layout.clone();
                    s.agent = Pose { pos, dir };
                    s.steps_elapsed = 0;
                    while !s.is_terminal() {
                        let a = argmax_first(table.actions(li, s.agent, g));
                        s.step(Action::ALL[a]).expect("non-terminal");
                    }
                    runs[g.index()] += 1;
                    if s.picked == Some(g) {
                        hits[g.index()] += 1;
                    }
                }
            }
        }
    }
    ObjectSpec::all()
        .filter(|g| runs[g.index()] > 0)
        .map(|g| (g, hits[g.index()] as f64 / runs[g.index()] as f64))
        .collect()
}

/// Max-task and min-task tables trained on the same pool.
#[derive(Debug, Clone)]
pub struct TabularBackend {
    config: EnvConfig,
    q_min: Arc<TabularQ>,
    q_max: Arc<TabularQ>,
}

impl TabularBackend {
    pub fn train(
        config: &EnvConfig,
        pool: &[EpisodeState],
        params: &QLearnParams,
        rng: &mut SimRng,
    ) -> Result<(Self, TrainReport, TrainReport), WvfError> {
        let (q_min, min_report) =
            train_tabular_wvf(pool, &GoalRewardFn::min_task(config), config, params, rng)?;
        let (q_max, max_report) =
            train_tabular_wvf(pool, &GoalRewardFn::max_task(config), config, params, rng)?;
        Ok((Self::from_tables(config.clone(), q_min, q_max)?, min_report, max_report))
    }

    pub fn from_tables(config: EnvConfig, q_min: TabularQ, q_max: TabularQ) -> Result<Self, WvfError> {
        let same_pool = q_min.layouts.len() == q_max.layouts.len()
            && q_min
                .layouts
                .iter()
                .zip(&q_max.layouts)
                .all(|(a, b)| a.same_layout(b));
        if !same_pool {
            return Err(WvfError::Param("min and max tables use different pools".into()));
        }
        Ok(Self {
            config,
            q_min: Arc::new(q_min),
            q_max: Arc::new(q_max),
        })
    }

    pub fn pool(&self) -> &[EpisodeState] {
        &self.q_max.layouts
    }

    pub fn q_min(&self) -> &TabularQ {
        &self.q_min
    }

    pub fn q_max(&self) -> &TabularQ {
        &self.q_max
    }
}

impl WvfBackend for TabularBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Tabular
    }

    fn env_config(&self) -> &EnvConfig {
        &self.config
    }

    fn sample_layout(
        &self,
        required: ObjectSet,
        rng: &mut SimRng,
    ) -> Result<EpisodeState, WvfError> {
        let candidates: Vec<&EpisodeState> = self
            .pool()
            .iter()
            .filter(|l| !l.present().intersection(required).is_empty())
            .collect();
        let layout = candidates.choose(rng).ok_or(WvfError::NoLayout)?;
        Ok(random_start(layout, rng))
    }

    fn bind(&self, layout: &EpisodeState) -> Result<MinMaxPair, WvfError> {
        let li = self.q_max.layout_index(layout).ok_or(WvfError::UnknownLayout)?;
        let view = |table: &Arc<TabularQ>| {
            LayoutWvf::Tabular(TabularView {
                table: table.clone(),
                layout: li,
                present: layout.present(),
                floor: self.config.wrong_goal_penalty,
            })
        };
        Ok(MinMaxPair {
            q_min: view(&self.q_min),
            q_max: view(&self.q_max),
        })
    }
}
