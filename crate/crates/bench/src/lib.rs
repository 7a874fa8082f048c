//! Workload builders shared by the benchmarks.

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use scenact_core::llm::VerbTable;
use scenact_core::{compile_activity, load_scene, Activity, OccupancyGrid, Scene, Vec2};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

pub fn apartment() -> Scene {
    load_scene(fixture("apartment.json")).expect("apartment fixture loads")
}

pub fn golden_activity() -> Activity {
    let text = std::fs::read_to_string(fixture("golden_activity.json")).expect("activity fixture");
    Activity::from_json_str(&text).expect("activity fixture parses")
}

pub type Constraints = Vec<std::collections::BTreeMap<String, Vec<scenact_core::llm::InteractionConstraintSpec>>>;

pub fn golden_constraints(activity: &Activity) -> Constraints {
    compile_activity(activity, &VerbTable::builtin())
}

/// Square grid of unit cells with random obstacles; both far corners stay free.
pub fn random_grid(n: usize, density: f64, seed: u64) -> OccupancyGrid {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut g = OccupancyGrid::new(Vec2::zeros(), 1.0, n, n);
    for y in 0..n {
        for x in 0..n {
            g.set_blocked((x, y), rng.random_bool(density));
        }
    }
    g.set_blocked((0, 0), false);
    g.set_blocked((n - 1, n - 1), false);
    g
}
