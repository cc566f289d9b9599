use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    Action, Dir, EnvConfig, EpisodeState, GoalId, GoalRewardFn, ObjectSet, ObjectSpec,
    PlacedObject, Pos, Pose,
};
use crate::error::EnvError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub picked: Option<ObjectSpec>,
}

/// Sample a fresh layout containing at least one object from `required_goals`
/// plus `n_distractors` uniformly drawn identities.
pub fn reset<R: Rng + ?Sized>(
    config: &EnvConfig,
    required_goals: ObjectSet,
    rng: &mut R,
) -> Result<EpisodeState, EnvError> {
    config.validate()?;
    if required_goals.is_empty() {
        return Err(EnvError::Config("required goal set is empty".into()));
    }
    let required: Vec<ObjectSpec> = required_goals.iter().collect();

    let mut cells: Vec<Pos> = (0..config.height)
        .flat_map(|y| (0..config.width).map(move |x| Pos::new(x, y)))
        .collect();
    let n_objects = 1 + config.n_distractors;
    let (chosen, _) = cells.partial_shuffle(rng, n_objects + 1);

    let mut objects = Vec::with_capacity(n_objects);
    objects.push(PlacedObject {
        pos: chosen[0],
        spec: *required.choose(rng).expect("nonempty"),
    });
    for &pos in &chosen[1..n_objects] {
        objects.push(PlacedObject {
            pos,
            spec: ObjectSpec::from_index(rng.gen_range(0..ObjectSpec::COUNT)),
        });
    }
    let agent = Pose {
        pos: chosen[n_objects],
        dir: Dir::ALL[rng.gen_range(0..4)],
    };
    Ok(EpisodeState {
        width: config.width,
        height: config.height,
        agent,
        objects,
        picked: None,
        steps_elapsed: 0,
        step_limit: config.step_limit,
        step_penalty: config.step_penalty,
    })
}

/// Pose after a non-terminating action. Pickup facing an object terminates
/// the episode and is not a pose transition; it maps to the same pose here.
pub fn transition(layout: &EpisodeState, pose: Pose, action: Action) -> Pose {
    match action {
        Action::TurnLeft => Pose {
            dir: pose.dir.left(),
            ..pose
        },
        Action::TurnRight => Pose {
            dir: pose.dir.right(),
            ..pose
        },
        Action::Forward => {
            let next = pose.ahead();
            if layout.is_free(next) {
                Pose { pos: next, ..pose }
            } else {
                pose
            }
        }
        Action::Pickup | Action::Drop | Action::Toggle | Action::Done => pose,
    }
}

pub(super) fn step(state: &mut EpisodeState, action: Action) -> Result<StepOutcome, EnvError> {
    if state.is_terminal() {
        return Err(EnvError::Terminal);
    }
    state.steps_elapsed += 1;
    let mut picked = None;
    if action == Action::Pickup {
        picked = state.object_ahead();
    }
    if picked.is_some() {
        state.picked = picked;
    } else {
        state.agent = transition(state, state.agent, action);
    }
    Ok(StepOutcome {
        reward: state.step_penalty,
        terminal: state.is_terminal(),
        picked,
    })
}

/// Goal-conditioned reward: the wrong-goal penalty for picking any identity
/// other than `conditioned_goal`, the step penalty plus the task reward for
/// picking it, and the step penalty alone otherwise.
pub fn extended_reward(
    picked: Option<ObjectSpec>,
    conditioned_goal: GoalId,
    goal_rewards: &GoalRewardFn,
    config: &EnvConfig,
) -> f64 {
    match picked {
        Some(p) if p != conditioned_goal => config.wrong_goal_penalty,
        Some(p) => config.step_penalty + goal_rewards.get(p),
        None => config.step_penalty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Color, Shape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn facing(objects: Vec<PlacedObject>, agent: Pose) -> EpisodeState {
        EpisodeState {
            width: 6,
            height: 6,
            agent,
            objects,
            picked: None,
            steps_elapsed: 0,
            step_limit: 100,
            step_penalty: -0.1,
        }
    }

    const GREY_BALL: ObjectSpec = ObjectSpec::new(Color::Grey, Shape::Ball);
    const RED_KEY: ObjectSpec = ObjectSpec::new(Color::Red, Shape::Key);

    #[test]
    fn reset_places_required_and_distractors() {
        let cfg = EnvConfig::default();
        let yellow_box = ObjectSpec::new(Color::Yellow, Shape::Box);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = reset(&cfg, ObjectSet::empty().with(yellow_box), &mut rng).unwrap();
            assert_eq!(s.objects.len(), 5);
            assert!(s.objects.iter().any(|o| o.spec == yellow_box));
            let mut cells: Vec<_> = s.objects.iter().map(|o| o.pos).collect();
            cells.push(s.agent.pos);
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), 6);
            assert!(s.objects.iter().all(|o| s.in_bounds(o.pos)));
        }
    }

    #[test]
    fn reset_without_distractors() {
        let cfg = EnvConfig::default().with_distractors(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = reset(&cfg, ObjectSet::empty().with(RED_KEY), &mut rng).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.objects[0].spec, RED_KEY);
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let cfg = EnvConfig::default();
        let goals = ObjectSet::full();
        let a = reset(&cfg, goals, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = reset(&cfg, goals, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reset_rejects_tiny_grid_and_empty_goals() {
        let cfg = EnvConfig::default().with_grid(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            reset(&cfg, ObjectSet::full(), &mut rng),
            Err(EnvError::Config(_))
        ));
        assert!(reset(&EnvConfig::default(), ObjectSet::empty(), &mut rng).is_err());
    }

    #[test]
    fn pickup_facing_object_terminates() {
        let mut s = facing(
            vec![PlacedObject {
                pos: Pos::new(2, 1),
                spec: GREY_BALL,
            }],
            Pose {
                pos: Pos::new(2, 2),
                dir: Dir::N,
            },
        );
        let out = s.step(Action::Pickup).unwrap();
        assert!(out.terminal);
        assert_eq!(out.picked, Some(GREY_BALL));
        assert_eq!(out.reward, -0.1);
        assert!(matches!(s.step(Action::Forward), Err(EnvError::Terminal)));
    }

    #[test]
    fn forward_into_wall_or_object_is_blocked() {
        let mut s = facing(
            vec![PlacedObject {
                pos: Pos::new(1, 0),
                spec: RED_KEY,
            }],
            Pose {
                pos: Pos::new(0, 0),
                dir: Dir::N,
            },
        );
        s.step(Action::Forward).unwrap();
        assert_eq!(s.agent.pos, Pos::new(0, 0));
        assert_eq!(s.steps_elapsed, 1);
        s.step(Action::TurnRight).unwrap();
        s.step(Action::Forward).unwrap();
        assert_eq!(s.agent.pos, Pos::new(0, 0));
        assert_eq!(s.agent.dir, Dir::E);
        // drop/toggle/done and empty pickups only consume a step
        for a in [Action::Drop, Action::Toggle, Action::Done] {
            let before = s.agent;
            assert!(!s.step(a).unwrap().terminal);
            assert_eq!(s.agent, before);
        }
        assert_eq!(s.steps_elapsed, 6);
    }

    #[test]
    fn step_limit_terminates_without_pickup() {
        let mut s = facing(
            vec![],
            Pose {
                pos: Pos::new(3, 3),
                dir: Dir::S,
            },
        );
        let mut steps = 0;
        loop {
            let out = s.step(Action::Done).unwrap();
            steps += 1;
            if out.terminal {
                assert_eq!(out.picked, None);
                break;
            }
        }
        assert_eq!(steps, 100);
        assert!(s.picked.is_none());
    }

    #[test]
    fn extended_reward_branches() {
        let cfg = EnvConfig::default();
        let max = GoalRewardFn::max_task(&cfg);
        let min = GoalRewardFn::min_task(&cfg);
        let blue_ball = ObjectSpec::new(Color::Blue, Shape::Ball);
        assert!((extended_reward(Some(RED_KEY), RED_KEY, &max, &cfg) - 1.9).abs() < 1e-12);
        assert_eq!(extended_reward(Some(blue_ball), RED_KEY, &max, &cfg), -10.0);
        assert!((extended_reward(Some(RED_KEY), RED_KEY, &min, &cfg) + 0.1).abs() < 1e-12);
        assert_eq!(extended_reward(None, RED_KEY, &max, &cfg), -0.1);
    }
}
