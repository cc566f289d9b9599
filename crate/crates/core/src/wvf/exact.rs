use std::collections::VecDeque;
use std::sync::Arc;

use super::{BackendKind, LayoutWvf, MinMaxPair, ValueFn, WvfBackend};
use crate::error::WvfError;
use crate::gridworld::{
    reset, transition, Action, EnvConfig, EpisodeState, GoalId, GoalRewardFn, ObjectSet,
    ObjectSpec, Pose,
};
use crate::rng::SimRng;

const UNREACHABLE: u16 = u16::MAX;
const MOVES: [Action; 3] = [Action::TurnLeft, Action::TurnRight, Action::Forward];

/// Shortest action counts (including the final pickup) from every pose to
/// picking up each kind of object in a fixed layout.
///
/// With a constant negative step reward and deterministic moves, the
/// finite-horizon optimum from a pose is the best of three terminal modes:
/// the nearest conditioned-goal pickup, the nearest wrong pickup, or running
/// out the clock. These distances are all the solver needs.
#[derive(Debug)]
pub struct LayoutSolution {
    layout: EpisodeState,
    succ: Vec<[u32; 3]>,
    ahead: Vec<Option<ObjectSpec>>,
    dists: Vec<Vec<u16>>,
    goal_slot: [Option<usize>; ObjectSpec::COUNT],
    wrong_slot: [usize; ObjectSpec::COUNT],
}

impl LayoutSolution {
    pub fn new(layout: &EpisodeState) -> Self {
        let n = layout.pose_count();
        let w = layout.width;
        let mut succ = vec![[0u32; 3]; n];
        let mut ahead = vec![None; n];
        let mut free = vec![false; n];
        for (i, slot) in succ.iter_mut().enumerate() {
            let pose = Pose::from_index(i, w);
            if !layout.is_free(pose.pos) {
                continue;
            }
            free[i] = true;
            ahead[i] = layout.object_at(pose.ahead());
            for (k, a) in MOVES.iter().enumerate() {
                slot[k] = transition(layout, pose, *a).index(w) as u32;
            }
        }
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in (0..n).filter(|i| free[*i]) {
            for &j in &succ[i] {
                if j as usize != i {
                    preds[j as usize].push(i as u32);
                }
            }
        }

        let bfs = |targets: ObjectSet| -> Vec<u16> {
            let mut dist = vec![UNREACHABLE; n];
            let mut queue = VecDeque::new();
            for i in 0..n {
                if ahead[i].is_some_and(|o| targets.contains(o)) {
                    dist[i] = 1;
                    queue.push_back(i);
                }
            }
            while let Some(i) = queue.pop_front() {
                for &p in &preds[i] {
                    let p = p as usize;
                    if dist[p] == UNREACHABLE {
                        dist[p] = dist[i] + 1;
                        queue.push_back(p);
                    }
                }
            }
            dist
        };

        let present = layout.present();
        let mut dists = vec![bfs(present)];
        let mut goal_slot = [None; ObjectSpec::COUNT];
        let mut wrong_slot = [0; ObjectSpec::COUNT];
        for g in present.iter() {
            let only = ObjectSet::empty().with(g);
            dists.push(bfs(only));
            goal_slot[g.index()] = Some(dists.len() - 1);
            dists.push(bfs(present.intersection(only.complement())));
            wrong_slot[g.index()] = dists.len() - 1;
        }
        Self {
            layout: layout.clone(),
            succ,
            ahead,
            dists,
            goal_slot,
            wrong_slot,
        }
    }

    pub fn layout(&self) -> &EpisodeState {
        &self.layout
    }

    /// Actions needed to pick up `goal` from `pose`, if reachable.
    pub fn goal_distance(&self, pose: Pose, goal: GoalId) -> Option<u32> {
        let slot = self.goal_slot[goal.index()]?;
        let d = self.dists[slot][pose.index(self.layout.width)];
        (d != UNREACHABLE).then_some(d as u32)
    }

    /// Actions needed to pick up any object in the layout.
    pub fn any_distance(&self, pose: Pose) -> Option<u32> {
        let d = self.dists[0][pose.index(self.layout.width)];
        (d != UNREACHABLE).then_some(d as u32)
    }
}

/// Exact finite-horizon WVF for one layout and one task reward.
#[derive(Debug, Clone)]
pub struct ExactWvf {
    solution: Arc<LayoutSolution>,
    rewards: GoalRewardFn,
    step_penalty: f64,
    wrong_goal_penalty: f64,
}

impl ExactWvf {
    pub fn new(solution: Arc<LayoutSolution>, rewards: GoalRewardFn, config: &EnvConfig) -> Self {
        Self {
            solution,
            rewards,
            step_penalty: config.step_penalty,
            wrong_goal_penalty: config.wrong_goal_penalty,
        }
    }

    pub fn solution(&self) -> &LayoutSolution {
        &self.solution
    }

    /// Optimal return from pose index `p` with `k` steps left.
    fn value(&self, p: usize, goal: GoalId, k: u32) -> f64 {
        let sol = &*self.solution;
        let r0 = self.step_penalty;
        let mut best = k as f64 * r0;
        if let Some(slot) = sol.goal_slot[goal.index()] {
            let d = sol.dists[slot][p];
            if d != UNREACHABLE && d as u32 <= k {
                best = best.max(d as f64 * r0 + self.rewards.get(goal));
            }
        }
        let d = sol.dists[sol.wrong_slot[goal.index()]][p];
        if d != UNREACHABLE && d as u32 <= k {
            best = best.max((d - 1) as f64 * r0 + self.wrong_goal_penalty);
        }
        best
    }

    /// State value `max_a q`.
    pub fn state_value(&self, state: &EpisodeState, goal: GoalId) -> f64 {
        self.value(state.agent.index(state.width), goal, state.remaining())
    }
}

impl ValueFn for ExactWvf {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        debug_assert!(state.same_layout(&self.solution.layout));
        let sol = &*self.solution;
        let p = state.agent.index(state.width);
        let k = state.remaining();
        if k == 0 {
            return 0.0;
        }
        if action == Action::Pickup {
            if let Some(obj) = sol.ahead[p] {
                return if obj == goal {
                    self.step_penalty + self.rewards.get(goal)
                } else {
                    self.wrong_goal_penalty
                };
            }
        }
        let next = match action {
            Action::TurnLeft => sol.succ[p][0] as usize,
            Action::TurnRight => sol.succ[p][1] as usize,
            Action::Forward => sol.succ[p][2] as usize,
            _ => p,
        };
        self.step_penalty + self.value(next, goal, k - 1)
    }
}

/// Exact max-task and min-task WVFs for `layout`.
pub fn min_max_for_layout(layout: &EpisodeState, config: &EnvConfig) -> MinMaxPair {
    let solution = Arc::new(LayoutSolution::new(layout));
    MinMaxPair {
        q_min: LayoutWvf::Exact(ExactWvf::new(
            solution.clone(),
            GoalRewardFn::min_task(config),
            config,
        )),
        q_max: LayoutWvf::Exact(ExactWvf::new(
            solution,
            GoalRewardFn::max_task(config),
            config,
        )),
    }
}

/// Solves every freshly sampled layout exactly.
#[derive(Debug, Clone)]
pub struct ExactBackend {
    config: EnvConfig,
}

impl ExactBackend {
    pub fn new(config: EnvConfig) -> Result<Self, WvfError> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl WvfBackend for ExactBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::ExactDp
    }

    fn env_config(&self) -> &EnvConfig {
        &self.config
    }

    fn sample_layout(
        &self,
        required: ObjectSet,
        rng: &mut SimRng,
    ) -> Result<EpisodeState, WvfError> {
        Ok(reset(&self.config, required, rng)?)
    }

    fn bind(&self, layout: &EpisodeState) -> Result<MinMaxPair, WvfError> {
        Ok(min_max_for_layout(layout, &self.config))
    }
}
