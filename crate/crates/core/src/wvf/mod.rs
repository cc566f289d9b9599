//! World value functions.
//!
//! A WVF maps `(state, goal, action)` to the return of reaching `goal` under
//! the extended reward. Two backends exist: an exact solver that is bound to
//! one layout at a time, and tabular Q-learning over a fixed layout pool.
//! Basis WVFs for the nine attributes are assembled per goal from the
//! max-task and min-task WVFs.

mod checkpoint;
mod exact;
mod tabular;

pub use checkpoint::{CheckpointHeader, TabularCheckpoint};
pub use exact::{min_max_for_layout, ExactBackend, ExactWvf, LayoutSolution};
pub use tabular::{
    layout_pool, train_tabular_wvf, QLearnParams, TabularBackend, TabularQ, TabularView,
    TrainReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composer::run_greedy_episode;
use crate::error::WvfError;
use crate::gridworld::{Action, Attribute, EnvConfig, EpisodeState, GoalId, ObjectSet};
use crate::rng::{episode_rng, SimRng};
use rand::RngCore;

/// Anything that can be queried for goal-conditioned action values.
pub trait ValueFn: Send + Sync {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64;
}

impl<V: ValueFn + ?Sized> ValueFn for &V {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        (**self).q(state, goal, action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ExactDp,
    Tabular,
}

/// A WVF restricted to one layout.
#[derive(Debug, Clone)]
pub enum LayoutWvf {
    Exact(ExactWvf),
    Tabular(TabularView),
}

impl ValueFn for LayoutWvf {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        match self {
            LayoutWvf::Exact(w) => w.q(state, goal, action),
            LayoutWvf::Tabular(w) => w.q(state, goal, action),
        }
    }
}

/// Max-task and min-task WVFs for the same layout.
#[derive(Debug, Clone)]
pub struct MinMaxPair {
    pub q_min: LayoutWvf,
    pub q_max: LayoutWvf,
}

/// Basis WVF: the max-task slice for goals in `goals`, the min-task slice
/// for every other goal.
#[derive(Debug, Clone, Copy)]
pub struct BasisWvf<'a> {
    pair: &'a MinMaxPair,
    goals: ObjectSet,
}

impl<'a> BasisWvf<'a> {
    pub fn goals(&self) -> ObjectSet {
        self.goals
    }

    pub fn pair(&self) -> &'a MinMaxPair {
        self.pair
    }
}

impl ValueFn for BasisWvf<'_> {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        if self.goals.contains(goal) {
            self.pair.q_max.q(state, goal, action)
        } else {
            self.pair.q_min.q(state, goal, action)
        }
    }
}

pub fn build_basis(pair: &MinMaxPair, attribute: Attribute) -> BasisWvf<'_> {
    basis_for_goals(pair, attribute.objects())
}

/// Basis over an arbitrary goal set.
pub fn basis_for_goals(pair: &MinMaxPair, goals: ObjectSet) -> BasisWvf<'_> {
    BasisWvf { pair, goals }
}

/// Source of per-layout WVF pairs and of layouts to evaluate them on.
pub trait WvfBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn env_config(&self) -> &EnvConfig;

    /// A fresh episode containing at least one object from `required`.
    fn sample_layout(&self, required: ObjectSet, rng: &mut SimRng)
        -> Result<EpisodeState, WvfError>;

    fn bind(&self, layout: &EpisodeState) -> Result<MinMaxPair, WvfError>;
}

/// Fraction of `n_episodes` greedy rollouts of the basis WVF for `attribute`
/// that pick up an object with that attribute.
pub fn basis_success_rate(
    backend: &dyn WvfBackend,
    attribute: Attribute,
    n_episodes: usize,
    rng: &mut SimRng,
) -> Result<f64, WvfError> {
    if n_episodes == 0 {
        return Err(WvfError::Param("n_episodes must be at least 1".into()));
    }
    let base = rng.next_u64();
    let goals = attribute.objects();
    let hits = (0..n_episodes)
        .into_par_iter()
        .map(|i| -> Result<bool, WvfError> {
            let mut erng = episode_rng(base, i as u64);
            let mut state = backend.sample_layout(goals, &mut erng)?;
            let pair = backend.bind(&state)?;
            let basis = build_basis(&pair, attribute);
            let out = run_greedy_episode(&basis, &mut state);
            Ok(out.picked.is_some_and(|p| goals.contains(p)))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|h| *h)
        .count();
    Ok(hits as f64 / n_episodes as f64)
}
