#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use wvflang::boolexpr::SYMBOL_COUNT;
use wvflang::composer::symbol_basis;
use wvflang::wvf::min_max_for_layout;
use wvflang::{compose, Action, BoolExpr, EnvConfig, EpisodeState, ExactBackend, MinMaxPair};
use wvflang::{ObjectSet, ObjectSpec, SimRng, SymbolMap, ValueFn, WvfBackend};

/// One `(state, goal, action)` query point with its layout's exact WVFs.
pub struct Probe {
    pub state: EpisodeState,
    pub pair: MinMaxPair,
    pub goal: ObjectSpec,
    pub action: Action,
}

/// Random layouts, poses, elapsed steps, goals and actions.
pub fn probes(n: usize, seed: u64) -> Vec<Probe> {
    let config = EnvConfig::default();
    let backend = ExactBackend::new(config.clone()).unwrap();
    let mut rng = SimRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let required = ObjectSet::empty().with(ObjectSpec::from_index(rng.gen_range(0..18)));
            let mut state = backend.sample_layout(required, &mut rng).unwrap();
            state.steps_elapsed = rng.gen_range(0..config.step_limit);
            let pair = min_max_for_layout(&state, &config);
            Probe {
                state,
                pair,
                goal: ObjectSpec::from_index(rng.gen_range(0..18)),
                action: Action::ALL[rng.gen_range(0..7)],
            }
        })
        .collect()
}

pub fn value(p: &Probe, e: &BoolExpr, map: &SymbolMap) -> f64 {
    let basis = symbol_basis(&p.pair, map);
    let refs: Vec<&dyn ValueFn> = basis.iter().map(|b| b as &dyn ValueFn).collect();
    compose(e, &refs, &p.pair.q_min, &p.pair.q_max).q(&p.state, p.goal, p.action)
}

pub fn random_expr(rng: &mut SimRng, depth: u32) -> BoolExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return BoolExpr::var(rng.gen_range(0..SYMBOL_COUNT));
    }
    match rng.gen_range(0..3) {
        0 => BoolExpr::not(random_expr(rng, depth - 1)),
        1 => BoolExpr::and(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
        _ => BoolExpr::or(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
    }
}
