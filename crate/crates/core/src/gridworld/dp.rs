use super::{extended_reward, transition, Action, EnvConfig, EpisodeState, GoalId, GoalRewardFn, Pose};

/// Finite-horizon action values for one layout and one conditioned goal,
/// indexed by remaining steps, pose and action.
#[derive(Debug, Clone)]
pub struct DpTable {
    horizon: u32,
    width: i32,
    poses: usize,
    q: Vec<[f64; 7]>,
}

impl DpTable {
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Q-values for `pose` with `remaining` steps left (1..=horizon).
    pub fn q(&self, pose: Pose, remaining: u32) -> &[f64; 7] {
        assert!(
            (1..=self.horizon).contains(&remaining),
            "remaining {remaining} outside 1..={}",
            self.horizon
        );
        &self.q[(remaining as usize - 1) * self.poses + pose.index(self.width)]
    }

    /// Values at the layout's own pose and progress.
    pub fn q_at(&self, state: &EpisodeState) -> &[f64; 7] {
        self.q(state.agent, state.remaining())
    }

    pub fn value(&self, pose: Pose, remaining: u32) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        self.q(pose, remaining)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax with ties broken by the fixed action order.
    pub fn best_action(&self, pose: Pose, remaining: u32) -> Action {
        let q = self.q(pose, remaining);
        let mut best = 0;
        for a in 1..7 {
            if q[a] > q[best] {
                best = a;
            }
        }
        Action::ALL[best]
    }
}

/// Backward induction over poses for the goal-conditioned extended reward.
/// Values are undiscounted returns up to the remaining step budget.
pub fn solve_episode_dp(
    layout: &EpisodeState,
    conditioned_goal: GoalId,
    goal_rewards: &GoalRewardFn,
    config: &EnvConfig,
) -> DpTable {
    assert!(!layout.is_terminal(), "cannot solve a terminal layout");
    let horizon = layout.remaining();
    let poses = layout.pose_count();
    let free: Vec<bool> = (0..poses)
        .map(|i| layout.is_free(Pose::from_index(i, layout.width).pos))
        .collect();

    let mut q = vec![[0.0; 7]; horizon as usize * poses];
    let mut prev_v = vec![0.0; poses];
    let mut v = vec![0.0; poses];
    for h in 0..horizon as usize {
        for p in 0..poses {
            if !free[p] {
                continue;
            }
            let pose = Pose::from_index(p, layout.width);
            let ahead = layout.object_at(pose.ahead());
            let row = &mut q[h * poses + p];
            for a in Action::ALL {
                row[a.index()] = match (a, ahead) {
                    (Action::Pickup, Some(obj)) => {
                        extended_reward(Some(obj), conditioned_goal, goal_rewards, config)
                    }
                    _ => {
                        let next = transition(layout, pose, a);
                        config.step_penalty + prev_v[next.index(layout.width)]
                    }
                };
            }
            v[p] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        std::mem::swap(&mut prev_v, &mut v);
    }
    DpTable {
        horizon,
        width: layout.width,
        poses,
        q,
    }
}
