//! Boolean composition of WVFs and rollout-based evaluation of expressions.
//!
//! Conjunction is the pointwise minimum, disjunction the pointwise maximum,
//! and negation reflects a value between the max-task and min-task WVFs:
//! `not(q) = (q_max + q_min) - q`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolexpr::{parse, BoolExpr, SymbolMap, SYMBOL_COUNT};
use crate::error::WvfError;
use crate::gridworld::{Action, EpisodeState, GoalId, ObjectSet, ObjectSpec};
use crate::rng::{episode_rng, SimRng};
use crate::tasksuite::TaskSpec;
use crate::wvf::{build_basis, BasisWvf, MinMaxPair, ValueFn, WvfBackend};

/// A WVF obtained by composing basis WVFs according to an expression.
pub struct CompositeWvf<'a> {
    expr: BoolExpr,
    basis: Vec<&'a dyn ValueFn>,
    q_min: &'a dyn ValueFn,
    q_max: &'a dyn ValueFn,
}

impl<'a> CompositeWvf<'a> {
    pub fn expr(&self) -> &BoolExpr {
        &self.expr
    }

    fn eval(&self, e: &BoolExpr, s: &EpisodeState, g: GoalId, a: Action) -> f64 {
        match e {
            BoolExpr::Var(i) => self.basis[*i as usize].q(s, g, a),
            BoolExpr::And(l, r) => self.eval(l, s, g, a).min(self.eval(r, s, g, a)),
            BoolExpr::Or(l, r) => self.eval(l, s, g, a).max(self.eval(r, s, g, a)),
            BoolExpr::Not(x) => {
                (self.q_max.q(s, g, a) + self.q_min.q(s, g, a)) - self.eval(x, s, g, a)
            }
        }
    }
}

impl ValueFn for CompositeWvf<'_> {
    fn q(&self, state: &EpisodeState, goal: GoalId, action: Action) -> f64 {
        self.eval(&self.expr, state, goal, action)
    }
}

/// Compose `expr` over `basis`, where `basis[i]` is the WVF named `Symbol_i`.
pub fn compose<'a>(
    expr: &BoolExpr,
    basis: &[&'a dyn ValueFn],
    q_min: &'a dyn ValueFn,
    q_max: &'a dyn ValueFn,
) -> CompositeWvf<'a> {
    assert_eq!(basis.len(), SYMBOL_COUNT as usize, "need one WVF per symbol");
    CompositeWvf {
        expr: expr.clone(),
        basis: basis.to_vec(),
        q_min,
        q_max,
    }
}

/// The nine basis WVFs of a layout, indexed by symbol.
pub fn symbol_basis<'a>(pair: &'a MinMaxPair, map: &SymbolMap) -> Vec<BasisWvf<'a>> {
    (0..SYMBOL_COUNT)
        .map(|i| build_basis(pair, map.attribute(i)))
        .collect()
}

/// Argmax over actions of the best goal value; ties go to the earlier action.
pub fn greedy_action(v: &dyn ValueFn, state: &EpisodeState) -> Action {
    let mut best = Action::ALL[0];
    let mut best_v = f64::NEG_INFINITY;
    for a in Action::ALL {
        let val = ObjectSpec::all()
            .map(|g| v.q(state, g, a))
            .fold(f64::NEG_INFINITY, f64::max);
        if val > best_v {
            best_v = val;
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub picked: Option<ObjectSpec>,
    pub steps: u32,
}

/// Follow the greedy policy of `v` until the episode ends.
pub fn run_greedy_episode(v: &dyn ValueFn, state: &mut EpisodeState) -> EpisodeOutcome {
    while !state.is_terminal() {
        let a = greedy_action(v, state);
        state.step(a).expect("state is not terminal");
    }
    EpisodeOutcome {
        picked: state.picked,
        steps: state.steps_elapsed,
    }
}

/// One episode acting on the composition of `expr` in `state`'s layout.
pub fn run_expr_episode(
    backend: &dyn WvfBackend,
    expr: &BoolExpr,
    map: &SymbolMap,
    state: &mut EpisodeState,
) -> Result<EpisodeOutcome, WvfError> {
    let pair = backend.bind(state)?;
    let bases = symbol_basis(&pair, map);
    let refs: Vec<&dyn ValueFn> = bases.iter().map(|b| b as &dyn ValueFn).collect();
    let c = compose(expr, &refs, &pair.q_min, &pair.q_max);
    Ok(run_greedy_episode(&c, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    InvalidSyntax,
    Evaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Present when evaluated.
    pub success_rate: Option<f64>,
    pub episodes: usize,
    /// Sum of `episode_lengths`.
    pub env_steps: u64,
    #[serde(skip)]
    pub episode_lengths: Vec<u32>,
}

impl Verdict {
    pub fn invalid() -> Self {
        Self {
            kind: VerdictKind::InvalidSyntax,
            success_rate: None,
            episodes: 0,
            env_steps: 0,
            episode_lengths: Vec::new(),
        }
    }

    /// Success rate, with invalid candidates counting as 0.
    pub fn rate(&self) -> f64 {
        self.success_rate.unwrap_or(0.0)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.kind == VerdictKind::Evaluated && self.rate() >= threshold
    }
}

/// Everything a rollout needs besides the expression and the task.
#[derive(Clone, Copy)]
pub struct RolloutContext<'a> {
    pub backend: &'a dyn WvfBackend,
    pub map: &'a SymbolMap,
    /// Draw a fresh layout per episode; otherwise reuse one layout.
    pub resample_layouts: bool,
}

/// Evaluate a parsed expression on `n` episodes of the task whose goal set
/// is `goals`. Each episode is reset with `goals` as required objects and
/// succeeds when the picked identity lies in `goals`.
pub fn rollout_expr(
    expr: &BoolExpr,
    goals: ObjectSet,
    n: usize,
    ctx: RolloutContext<'_>,
    rng: &mut SimRng,
) -> Result<Verdict, WvfError> {
    if n == 0 {
        return Err(WvfError::Param("rollout count must be at least 1".into()));
    }
    let base = rng.next_u64();
    let shared = if ctx.resample_layouts {
        None
    } else {
        Some(ctx.backend.sample_layout(goals, &mut episode_rng(base, u64::MAX))?)
    };
    let outcomes = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut state = match &shared {
                Some(s) => s.clone(),
                None => ctx
                    .backend
                    .sample_layout(goals, &mut episode_rng(base, i as u64))?,
            };
            run_expr_episode(ctx.backend, expr, ctx.map, &mut state)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hits = outcomes
        .iter()
        .filter(|o| o.picked.is_some_and(|p| goals.contains(p)))
        .count();
    let lengths: Vec<u32> = outcomes.iter().map(|o| o.steps).collect();
    Ok(Verdict {
        kind: VerdictKind::Evaluated,
        success_rate: Some(hits as f64 / n as f64),
        episodes: n,
        env_steps: lengths.iter().map(|l| *l as u64).sum(),
        episode_lengths: lengths,
    })
}

/// Verify a candidate expression string against a task. Unparseable
/// candidates yield an `InvalidSyntax` verdict without consuming steps.
pub fn rollout_success(
    candidate: &str,
    truth: &TaskSpec,
    n: usize,
    ctx: RolloutContext<'_>,
    rng: &mut SimRng,
) -> Result<Verdict, WvfError> {
    match parse(candidate) {
        Ok(expr) => rollout_expr(&expr, truth.denotation, n, ctx, rng),
        Err(_) => Ok(Verdict::invalid()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{reset, Attribute, Color, Dir, EnvConfig, PlacedObject, Pos, Pose, Shape};
    use crate::wvf::{min_max_for_layout, ExactBackend};
    use rand::SeedableRng;
    use std::collections::{HashSet, VecDeque};

    fn composite_value(
        pair: &MinMaxPair,
        map: &SymbolMap,
        expr: &BoolExpr,
        s: &EpisodeState,
        g: GoalId,
        a: Action,
    ) -> f64 {
        let bases = symbol_basis(pair, map);
        let refs: Vec<&dyn ValueFn> = bases.iter().map(|b| b as &dyn ValueFn).collect();
        compose(expr, &refs, &pair.q_min, &pair.q_max).q(s, g, a)
    }

    fn sym(map: &SymbolMap, a: Attribute) -> BoolExpr {
        BoolExpr::var(map.symbol(a))
    }

    const RED: Attribute = Attribute::Color(Color::Red);
    const KEY: Attribute = Attribute::Shape(Shape::Key);

    #[test]
    fn conjunction_selects_max_slice_only_at_matching_object() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::shuffled(1);
        let red_key = ObjectSpec::new(Color::Red, Shape::Key);
        let blue_ball = ObjectSpec::new(Color::Blue, Shape::Ball);
        let mut s = EpisodeState {
            width: 8,
            height: 8,
            agent: Pose {
                pos: Pos::new(3, 3),
                dir: Dir::E,
            },
            objects: vec![
                PlacedObject {
                    pos: Pos::new(4, 3),
                    spec: red_key,
                },
                PlacedObject {
                    pos: Pos::new(2, 3),
                    spec: blue_ball,
                },
            ],
            picked: None,
            steps_elapsed: 0,
            step_limit: 100,
            step_penalty: -0.1,
        };
        let pair = min_max_for_layout(&s, &cfg);
        let e = BoolExpr::and(sym(&map, RED), sym(&map, KEY));
        let v = composite_value(&pair, &map, &e, &s, red_key, Action::Pickup);
        assert_eq!(v, pair.q_max.q(&s, red_key, Action::Pickup));
        s.agent.dir = Dir::W;
        let v = composite_value(&pair, &map, &e, &s, blue_ball, Action::Pickup);
        assert_eq!(v, pair.q_min.q(&s, blue_ball, Action::Pickup));
    }

    #[test]
    fn facing_only_denoted_object_picks_up() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::identity();
        let red_key = ObjectSpec::new(Color::Red, Shape::Key);
        let mut s = EpisodeState {
            width: 8,
            height: 8,
            agent: Pose {
                pos: Pos::new(0, 1),
                dir: Dir::N,
            },
            objects: vec![
                PlacedObject {
                    pos: Pos::new(0, 0),
                    spec: red_key,
                },
                PlacedObject {
                    pos: Pos::new(5, 5),
                    spec: ObjectSpec::new(Color::Grey, Shape::Box),
                },
            ],
            picked: None,
            steps_elapsed: 0,
            step_limit: 100,
            step_penalty: -0.1,
        };
        let e = BoolExpr::and(sym(&map, RED), sym(&map, KEY));
        let backend = ExactBackend::new(cfg).unwrap();
        let out = run_expr_episode(&backend, &e, &map, &mut s).unwrap();
        assert_eq!(out, EpisodeOutcome { picked: Some(red_key), steps: 1 });
    }

    /// Independent shortest path over (x, y, dir) by forward BFS.
    fn bfs_pickup_steps(s: &EpisodeState, goals: ObjectSet) -> Option<u32> {
        let mut seen = HashSet::new();
        let mut q = VecDeque::from([(s.agent, 0u32)]);
        seen.insert(s.agent);
        while let Some((p, d)) = q.pop_front() {
            if s.object_at(p.ahead()).is_some_and(|o| goals.contains(o)) {
                return Some(d + 1);
            }
            let ahead = p.ahead();
            let mut next = vec![
                Pose { dir: p.dir.left(), ..p },
                Pose { dir: p.dir.right(), ..p },
            ];
            if s.is_free(ahead) {
                next.push(Pose { pos: ahead, ..p });
            }
            for n in next {
                if seen.insert(n) {
                    q.push_back((n, d + 1));
                }
            }
        }
        None
    }

    #[test]
    fn greedy_path_is_shortest() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::shuffled(3);
        let backend = ExactBackend::new(cfg.clone()).unwrap();
        let e = BoolExpr::or(sym(&map, RED), BoolExpr::not(sym(&map, KEY)));
        let goals = crate::boolexpr::denotation(&e, &map);
        let mut rng = SimRng::seed_from_u64(8);
        for _ in 0..100 {
            let mut s = reset(&cfg, goals, &mut rng).unwrap();
            let want = bfs_pickup_steps(&s, goals);
            let out = run_expr_episode(&backend, &e, &map, &mut s).unwrap();
            if let Some(d) = want {
                assert_eq!(out.steps, d);
                assert!(goals.contains(out.picked.unwrap()));
            }
        }
    }

    #[test]
    fn empty_denotation_never_succeeds() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::identity();
        let backend = ExactBackend::new(cfg).unwrap();
        let ctx = RolloutContext {
            backend: &backend,
            map: &map,
            resample_layouts: true,
        };
        let red_and_blue = BoolExpr::and(
            sym(&map, RED),
            sym(&map, Attribute::Color(Color::Blue)),
        );
        let mut rng = SimRng::seed_from_u64(2);
        let v = rollout_expr(&red_and_blue, RED.objects(), 50, ctx, &mut rng).unwrap();
        // every episode ends on a pickup of the nearest object or a timeout;
        // the expression's own goal set is empty so it gains nothing
        assert_eq!(v.episodes, 50);
        let mut rng = SimRng::seed_from_u64(2);
        let own = rollout_expr(&red_and_blue, ObjectSet::empty().with(ObjectSpec::new(Color::Red, Shape::Box)), 50, ctx, &mut rng);
        assert!(own.is_ok());
        let v_empty = crate::boolexpr::denotation(&red_and_blue, &map);
        assert!(v_empty.is_empty());
    }

    #[test]
    fn invalid_candidate_consumes_nothing() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::identity();
        let backend = ExactBackend::new(cfg).unwrap();
        let ctx = RolloutContext {
            backend: &backend,
            map: &map,
            resample_layouts: true,
        };
        let task = crate::tasksuite::generate_tasks(&map).remove(0);
        let mut rng = SimRng::seed_from_u64(0);
        let v = rollout_success("Symbol_1 |", &task, 100, ctx, &mut rng).unwrap();
        assert_eq!(v.kind, VerdictKind::InvalidSyntax);
        assert_eq!(v.env_steps, 0);
        assert!(!v.passes(0.0));
    }

    #[test]
    fn step_accounting_and_order_independence() {
        let cfg = EnvConfig::default();
        let map = SymbolMap::shuffled(9);
        let backend = ExactBackend::new(cfg).unwrap();
        let ctx = RolloutContext {
            backend: &backend,
            map: &map,
            resample_layouts: true,
        };
        let task = crate::tasksuite::generate_tasks(&map).remove(5);
        let a = rollout_expr(&task.truth_expr, task.denotation, 64, ctx, &mut SimRng::seed_from_u64(4)).unwrap();
        let b = rollout_expr(&task.truth_expr, task.denotation, 64, ctx, &mut SimRng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episode_lengths, b.episode_lengths);
        assert_eq!(a.env_steps, a.episode_lengths.iter().map(|l| *l as u64).sum::<u64>());
    }
}
