//! World value functions over a pickup gridworld, Boolean composition of
//! those functions, and a semantic parser that learns language-to-expression
//! mappings from verified rollouts.

pub mod agent;
pub mod boolexpr;
pub mod composer;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod rng;
pub mod tasksuite;
pub mod wvf;

pub use boolexpr::{denotation, expr_length, parse, BoolExpr, SymbolMap};
pub use composer::{
    compose, greedy_action, rollout_expr, rollout_success, CompositeWvf, RolloutContext, Verdict,
    VerdictKind,
};
pub use error::{ChatError, EnvError, HarnessError, StoreError, WvfError};
pub use gridworld::{
    Action, Attribute, Color, EnvConfig, EpisodeState, ObjectSet, ObjectSpec, Shape,
};
pub use rng::SimRng;
pub use tasksuite::{generate_tasks, sample_task, split_tasks, TaskSpec, TaskSplit};
pub use wvf::{ExactBackend, MinMaxPair, TabularBackend, ValueFn, WvfBackend};
