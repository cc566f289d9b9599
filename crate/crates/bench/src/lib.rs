//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use wvflang::agent::ExampleStore;
use wvflang::harness::suite_for_seed;
use wvflang::{EpisodeState, ExactBackend, SimRng, SymbolMap, TaskSpec, WvfBackend};

pub struct Fixture {
    pub backend: ExactBackend,
    pub map: SymbolMap,
    pub tasks: Vec<TaskSpec>,
    /// A fresh layout for the first task.
    pub layout: EpisodeState,
}

pub fn fixture(seed: u64) -> Fixture {
    let backend = ExactBackend::new(Default::default()).expect("default config is valid");
    let (map, tasks) = suite_for_seed(seed);
    let layout = backend
        .sample_layout(tasks[0].denotation, &mut SimRng::seed_from_u64(seed))
        .expect("layout");
    Fixture { backend, map, tasks, layout }
}

/// A store holding the ground truth for every task.
pub fn full_store(tasks: &[TaskSpec]) -> ExampleStore {
    let mut store = ExampleStore::new();
    for t in tasks {
        store.offer(&t.instruction, &t.truth_expr);
    }
    store
}
