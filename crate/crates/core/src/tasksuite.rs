//! The 162 language tasks, their ground-truth expressions, and splits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::boolexpr::{denotation, BoolExpr, SymbolMap};
use crate::gridworld::{Attribute, Color, ObjectSet, ObjectSpec, Shape};
use crate::rng::SimRng;

pub const SUITE_SIZE: usize = 162;

/// Instruction templates. The first eight combine a color `c` and a shape
/// `s`; the last four mention a single attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    CAndS,
    NotCAndS,
    CAndNotS,
    NotCAndNotS,
    COrS,
    NotCOrS,
    COrNotS,
    NotCOrNotS,
    Shape,
    NotShape,
    Color,
    NotColor,
}

impl Template {
    pub const PAIR: [Template; 8] = [
        Template::CAndS,
        Template::NotCAndS,
        Template::CAndNotS,
        Template::NotCAndNotS,
        Template::COrS,
        Template::NotCOrS,
        Template::COrNotS,
        Template::NotCOrNotS,
    ];

    fn pair_instruction(self, c: &str, s: &str) -> String {
        match self {
            Template::CAndS => format!("pick up a {c} {s}"),
            Template::NotCAndS => format!("pick up a {s} that is not {c}"),
            Template::CAndNotS => format!("pick up a {c} object that is not a {s}"),
            Template::NotCAndNotS => format!("pick up an object that is not {c} and not a {s}"),
            Template::COrS => format!("pick up a {s} or a {c} object"),
            Template::NotCOrS => format!("pick up a {s} or an object that is not {c}"),
            Template::COrNotS => format!("pick up a {c} object or not a {s}"),
            Template::NotCOrNotS => format!("pick up an object that is not {c} or not a {s}"),
            _ => unreachable!("single-attribute template"),
        }
    }

    fn pair_expr(self, c: BoolExpr, s: BoolExpr) -> BoolExpr {
        use BoolExpr as E;
        match self {
            Template::CAndS => E::and(c, s),
            Template::NotCAndS => E::and(E::not(c), s),
            Template::CAndNotS => E::and(c, E::not(s)),
            Template::NotCAndNotS => E::and(E::not(c), E::not(s)),
            Template::COrS => E::or(c, s),
            Template::NotCOrS => E::or(E::not(c), s),
            Template::COrNotS => E::or(c, E::not(s)),
            Template::NotCOrNotS => E::or(E::not(c), E::not(s)),
            _ => unreachable!("single-attribute template"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: usize,
    pub instruction: String,
    pub truth_expr: BoolExpr,
    pub denotation: ObjectSet,
    pub template: Template,
    /// Attributes substituted into the template, color first.
    pub attributes: Vec<Attribute>,
}

/// The full suite: 8 templates for each of the 18 color/shape pairs, then
/// the positive and negated form of each of the 9 attributes.
pub fn generate_tasks(map: &SymbolMap) -> Vec<TaskSpec> {
    let var = |a: Attribute| BoolExpr::var(map.symbol(a));
    let mut out = Vec::with_capacity(SUITE_SIZE);
    let mut push = |instruction: String, expr: BoolExpr, template, attributes| {
        let den = denotation(&expr, map);
        out.push(TaskSpec {
            task_id: out.len(),
            instruction,
            truth_expr: expr,
            denotation: den,
            template,
            attributes,
        });
    };
    for color in Color::ALL {
        for shape in Shape::ALL {
            let (ca, sa) = (Attribute::Color(color), Attribute::Shape(shape));
            for t in Template::PAIR {
                push(
                    t.pair_instruction(color.name(), shape.name()),
                    t.pair_expr(var(ca), var(sa)),
                    t,
                    vec![ca, sa],
                );
            }
        }
    }
    for shape in Shape::ALL {
        let a = Attribute::Shape(shape);
        let s = shape.name();
        push(format!("pick up a {s}"), var(a), Template::Shape, vec![a]);
        push(
            format!("pick up an object that is not a {s}"),
            BoolExpr::not(var(a)),
            Template::NotShape,
            vec![a],
        );
    }
    for color in Color::ALL {
        let a = Attribute::Color(color);
        let c = color.name();
        push(format!("pick up a {c} object"), var(a), Template::Color, vec![a]);
        push(
            format!("pick up an object that is not {c}"),
            BoolExpr::not(var(a)),
            Template::NotColor,
            vec![a],
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub train: Vec<TaskSpec>,
    pub test: Vec<TaskSpec>,
    pub seed: u64,
}

/// Uniformly random halving of `suite`, fixed by `seed`.
pub fn split_tasks(suite: &[TaskSpec], seed: u64) -> TaskSplit {
    assert!(suite.len().is_multiple_of(2), "suite size must be even");
    let mut rng = SimRng::seed_from_u64(seed);
    let mut shuffled = suite.to_vec();
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(suite.len() / 2);
    TaskSplit {
        train: shuffled,
        test,
        seed,
    }
}

pub fn sample_task<'a, R: Rng + ?Sized>(set: &'a [TaskSpec], rng: &mut R) -> &'a TaskSpec {
    assert!(!set.is_empty(), "cannot sample from an empty task set");
    &set[rng.gen_range(0..set.len())]
}

/// JSON form of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: usize,
    pub instruction: String,
    pub expression: String,
    pub denotation: Vec<ObjectSpec>,
}

impl From<&TaskSpec> for TaskRecord {
    fn from(t: &TaskSpec) -> Self {
        Self {
            task_id: t.task_id,
            instruction: t.instruction.clone(),
            expression: t.truth_expr.to_string(),
            denotation: t.denotation.iter().collect(),
        }
    }
}

pub fn export_json(suite: &[TaskSpec]) -> serde_json::Result<String> {
    let records: Vec<TaskRecord> = suite.iter().map(TaskRecord::from).collect();
    serde_json::to_string_pretty(&records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolexpr::parse;
    use std::collections::{HashMap, HashSet};

    fn find<'a>(suite: &'a [TaskSpec], instruction: &str) -> &'a TaskSpec {
        suite.iter().find(|t| t.instruction == instruction).unwrap()
    }

    #[test]
    fn table_rows_map_to_expected_expressions() {
        let map = SymbolMap::identity();
        let suite = generate_tasks(&map);
        let y = map.symbol(Attribute::Color(Color::Yellow));
        let b = map.symbol(Attribute::Shape(Shape::Box));
        let t = find(&suite, "pick up a yellow object that is not a box");
        assert_eq!(t.truth_expr.to_string(), format!("Symbol_{y} & ~Symbol_{b}"));
        let t = find(&suite, "pick up an object that is not yellow");
        assert_eq!(t.truth_expr.to_string(), format!("~Symbol_{y}"));
        let t = find(&suite, "pick up an object that is not yellow and not a box");
        assert_eq!(t.denotation.len(), 10);
    }

    #[test]
    fn suite_counts_and_uniqueness() {
        let suite = generate_tasks(&SymbolMap::shuffled(5));
        assert_eq!(suite.len(), SUITE_SIZE);
        let pair = suite.iter().filter(|t| t.attributes.len() == 2).count();
        assert_eq!(pair, 18 * 8);
        let names: HashSet<_> = suite.iter().map(|t| &t.instruction).collect();
        assert_eq!(names.len(), SUITE_SIZE);
        let bindings: HashSet<_> = suite.iter().map(|t| (t.template, t.attributes.clone())).collect();
        assert_eq!(bindings.len(), SUITE_SIZE);
        for (i, t) in suite.iter().enumerate() {
            assert_eq!(t.task_id, i);
            assert!(!t.denotation.is_empty());
        }
    }

    #[test]
    fn denotations_match_enumeration() {
        let map = SymbolMap::shuffled(2);
        for t in generate_tasks(&map) {
            let reparsed = parse(&t.truth_expr.to_string()).unwrap();
            let mut want = ObjectSet::empty();
            for o in ObjectSpec::all() {
                let holds = |a: Attribute| o.satisfies(a);
                let ok = match t.template {
                    Template::CAndS => holds(t.attributes[0]) && holds(t.attributes[1]),
                    Template::NotCAndS => !holds(t.attributes[0]) && holds(t.attributes[1]),
                    Template::CAndNotS => holds(t.attributes[0]) && !holds(t.attributes[1]),
                    Template::NotCAndNotS => !holds(t.attributes[0]) && !holds(t.attributes[1]),
                    Template::COrS => holds(t.attributes[0]) || holds(t.attributes[1]),
                    Template::NotCOrS => !holds(t.attributes[0]) || holds(t.attributes[1]),
                    Template::COrNotS => holds(t.attributes[0]) || !holds(t.attributes[1]),
                    Template::NotCOrNotS => !holds(t.attributes[0]) || !holds(t.attributes[1]),
                    Template::Shape | Template::Color => holds(t.attributes[0]),
                    Template::NotShape | Template::NotColor => !holds(t.attributes[0]),
                };
                if ok {
                    want = want.with(o);
                }
            }
            assert_eq!(t.denotation, want, "{}", t.instruction);
            assert_eq!(denotation(&reparsed, &map), want);
        }
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let suite = generate_tasks(&SymbolMap::identity());
        let a = split_tasks(&suite, 0);
        assert_eq!(a, split_tasks(&suite, 0));
        assert_eq!((a.train.len(), a.test.len()), (81, 81));
        let train: HashSet<_> = a.train.iter().map(|t| t.task_id).collect();
        assert!(a.test.iter().all(|t| !train.contains(&t.task_id)));
        assert_ne!(a.train, split_tasks(&suite, 1).train);
    }

    #[test]
    fn split_membership_is_balanced() {
        let suite = generate_tasks(&SymbolMap::identity());
        let mut in_train = vec![0usize; SUITE_SIZE];
        // 2000 splits keep the +-5% band beyond four binomial deviations
        for seed in 0..2000 {
            for t in split_tasks(&suite, seed).train {
                in_train[t.task_id] += 1;
            }
        }
        for c in in_train {
            assert!((900..=1100).contains(&c), "{c}");
        }
    }

    #[test]
    fn sampling_is_uniform_and_reproducible() {
        let suite = generate_tasks(&SymbolMap::identity());
        let mut rng = SimRng::seed_from_u64(1);
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for _ in 0..16_200 {
            *counts.entry(sample_task(&suite, &mut rng).task_id).or_default() += 1;
        }
        assert_eq!(counts.len(), SUITE_SIZE);
        assert!(counts.values().all(|c| (70..=130).contains(c)));
        let one = &suite[7..8];
        assert_eq!(sample_task(one, &mut rng).task_id, 7);
        let seq = |seed| {
            let mut r = SimRng::seed_from_u64(seed);
            (0..20).map(|_| sample_task(&suite, &mut r).task_id).collect::<Vec<_>>()
        };
        assert_eq!(seq(3), seq(3));
    }

    #[test]
    fn export_lists_denotation_objects() {
        let suite = generate_tasks(&SymbolMap::identity());
        let json = export_json(&suite[..1]).unwrap();
        let back: Vec<TaskRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[0].instruction, "pick up a red key");
        assert_eq!(back[0].denotation, vec![ObjectSpec::new(Color::Red, Shape::Key)]);
    }
}
