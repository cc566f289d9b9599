use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use wvflang::gridworld::{
    extended_reward, reset, solve_episode_dp, Color, Dir, GoalRewardFn, LayoutSnapshot,
    ObjectSnapshot, PoseSnapshot, Pose, Pos, Shape,
};
use wvflang::wvf::{ExactWvf, LayoutSolution};
use wvflang::{Action, EnvConfig, EpisodeState, ObjectSet, ObjectSpec, SimRng};

const DEPTH: u32 = 12;

fn hand_layout(config: &EnvConfig) -> EpisodeState {
    let obj = |x, y, color, shape| ObjectSnapshot { x, y, color, shape };
    LayoutSnapshot {
        width: 6,
        height: 6,
        agent: PoseSnapshot { x: 1, y: 4, dir: Dir::N },
        objects: vec![
            obj(4, 1, Color::Red, Shape::Key),
            obj(2, 2, Color::Blue, Shape::Ball),
            obj(4, 4, Color::Red, Shape::Box),
        ],
    }
    .to_state(config)
    .unwrap()
}

/// Best return over every action sequence of length at most `depth`, by
/// expanding the whole rollout tree through the simulator. Nodes that reach
/// the same pose at the same depth are merged, keeping the best prefix.
fn brute_force_best(start: &EpisodeState, goal: ObjectSpec, rewards: &GoalRewardFn, config: &EnvConfig) -> f64 {
    let mut frontier: HashMap<Pose, (f64, EpisodeState)> = HashMap::new();
    frontier.insert(start.agent, (0.0, start.clone()));
    let mut best = f64::NEG_INFINITY;
    for _ in 0..DEPTH {
        let mut next: HashMap<Pose, (f64, EpisodeState)> = HashMap::new();
        for (acc, state) in frontier.values() {
            for a in Action::ALL {
                let mut s = state.clone();
                let out = s.step(a).unwrap();
                let ret = acc + extended_reward(out.picked, goal, rewards, config);
                if s.is_terminal() {
                    best = best.max(ret);
                } else {
                    let e = next.entry(s.agent).or_insert((f64::NEG_INFINITY, s.clone()));
                    if ret > e.0 {
                        *e = (ret, s);
                    }
                }
            }
        }
        frontier = next;
    }
    best
}

fn greedy_return(start: &EpisodeState, goal: ObjectSpec, rewards: &GoalRewardFn, config: &EnvConfig) -> f64 {
    let dp = solve_episode_dp(start, goal, rewards, config);
    let mut s = start.clone();
    let mut ret = 0.0;
    while !s.is_terminal() {
        let a = dp.best_action(s.agent, s.remaining());
        let out = s.step(a).unwrap();
        ret += extended_reward(out.picked, goal, rewards, config);
    }
    ret
}

#[test]
fn dp_matches_rollout_tree_on_hand_layout() {
    let config = EnvConfig::default().with_grid(6, 6).with_step_limit(DEPTH);
    let base = hand_layout(&config);
    let solution = std::sync::Arc::new(LayoutSolution::new(&base));
    let goals: Vec<ObjectSpec> = ObjectSet::full().iter().collect();
    let tasks = [GoalRewardFn::max_task(&config), GoalRewardFn::min_task(&config)];
    let mut checked = 0;
    for y in 0..6 {
        for x in 0..6 {
            if !base.is_free(Pos::new(x, y)) {
                continue;
            }
            for dir in Dir::ALL {
                let mut start = base.clone();
                start.agent = Pose { pos: Pos::new(x, y), dir };
                for rewards in &tasks {
                    let exact = ExactWvf::new(solution.clone(), *rewards, &config);
                    for &g in &goals {
                        let brute = brute_force_best(&start, g, rewards, &config);
                        let dp = solve_episode_dp(&start, g, rewards, &config);
                        let v = dp.value(start.agent, DEPTH);
                        assert!((v - brute).abs() < 1e-9, "dp {v} brute {brute} at {x},{y} {dir:?} goal {g}");
                        assert!((exact.state_value(&start, g) - brute).abs() < 1e-9);
                        let greedy = greedy_return(&start, g, rewards, &config);
                        assert!((greedy - brute).abs() < 1e-9);
                        checked += 1;
                    }
                }
            }
        }
    }
    assert_eq!(checked, (36 - 3) * 4 * 2 * 18);
}

#[test]
fn enclosed_goal_value_is_timeout_or_penalty() {
    // Objects wall off the corner; the enclosed box cannot be faced.
    let config = EnvConfig::default().with_grid(6, 6).with_step_limit(DEPTH);
    let obj = |x, y, color, shape| ObjectSnapshot { x, y, color, shape };
    let start = LayoutSnapshot {
        width: 6,
        height: 6,
        agent: PoseSnapshot { x: 3, y: 3, dir: Dir::E },
        objects: vec![
            obj(0, 0, Color::Green, Shape::Box),
            obj(1, 0, Color::Grey, Shape::Key),
            obj(0, 1, Color::Grey, Shape::Ball),
        ],
    }
    .to_state(&config)
    .unwrap();
    let rewards = GoalRewardFn::max_task(&config);
    let g = ObjectSpec::new(Color::Green, Shape::Box);
    let brute = brute_force_best(&start, g, &rewards, &config);
    assert!((brute - DEPTH as f64 * config.step_penalty).abs() < 1e-9);
    let dp = solve_episode_dp(&start, g, &rewards, &config);
    assert!((dp.value(start.agent, DEPTH) - brute).abs() < 1e-9);
}

fn action_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..7, 0..150)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn episodes_are_deterministic_and_bounded(seed in any::<u64>(), actions in action_strategy()) {
        let config = EnvConfig::default();
        let goal = ObjectSpec::from_index((seed % 18) as usize);
        let a = reset(&config, ObjectSet::empty().with(goal), &mut SimRng::seed_from_u64(seed)).unwrap();
        let b = reset(&config, ObjectSet::empty().with(goal), &mut SimRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let rewards = GoalRewardFn::max_task(&config);
        let allowed = [
            config.step_penalty,
            config.step_penalty + config.goal_reward,
            config.wrong_goal_penalty,
            config.step_penalty + config.min_task_reward(),
        ];
        let (mut s, mut t) = (a, b);
        for &i in &actions {
            if s.is_terminal() {
                break;
            }
            let ahead = s.object_ahead();
            let out = s.step(Action::ALL[i]).unwrap();
            let out2 = t.step(Action::ALL[i]).unwrap();
            prop_assert_eq!(out, out2);
            prop_assert_eq!(&s, &t);
            if let Some(p) = out.picked {
                prop_assert_eq!(Some(p), ahead);
                prop_assert_eq!(Action::ALL[i], Action::Pickup);
            }
            let r = extended_reward(out.picked, goal, &rewards, &config);
            prop_assert!(allowed.iter().any(|x| (x - r).abs() < 1e-12), "reward {}", r);
            prop_assert!(s.steps_elapsed <= config.step_limit);
        }
        // Finish with no-ops: the limit always ends the episode.
        while !s.is_terminal() {
            s.step(Action::Done).unwrap();
        }
        prop_assert!(s.steps_elapsed <= config.step_limit);
    }
}
