//! Browser bindings for the rover demo page. Every export takes plain
//! numbers or JSON text and returns JSON text.

use std::collections::BTreeMap;

use metacrisp::cycle::{run_experiment, CycleConfig};
use metacrisp::world::{run_episode, GridWorld, Pos, RoverParams};
use metacrisp::Policy;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// FAST/CAREFUL failure probabilities per terrain, as edited on the page.
#[derive(Debug, Clone, Copy)]
pub struct Hazards {
    pub sand: (f64, f64),
    pub rock: (f64, f64),
    pub ice: (f64, f64),
}

impl Default for Hazards {
    fn default() -> Self {
        Self {
            sand: (0.6, 0.1),
            rock: (0.1, 0.15),
            ice: (0.7, 0.2),
        }
    }
}

fn params(size: u32, h: Hazards) -> RoverParams {
    let mut p = RoverParams {
        width: size,
        height: size,
        max_steps: 4 * (size - 1),
        ..RoverParams::default()
    };
    for (t, (fast, careful)) in [("sand", h.sand), ("rock", h.rock), ("ice", h.ice)] {
        p.hazards.insert(
            t.to_owned(),
            BTreeMap::from([("FAST".to_owned(), fast), ("CAREFUL".to_owned(), careful)]),
        );
    }
    p
}

fn build_world(seed: u32, size: u32, h: Hazards) -> Result<GridWorld, String> {
    if !(2..=24).contains(&size) {
        return Err("grid size must be between 2 and 24".into());
    }
    GridWorld::generate(&params(size, h), u64::from(seed)).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct WorldView {
    width: u32,
    height: u32,
    cells: Vec<Vec<String>>,
    start: Pos,
    goal: Pos,
    max_steps: u32,
}

pub fn world_json(seed: u32, size: u32) -> Result<String, String> {
    let w = build_world(seed, size, Hazards::default())?;
    let cells = (0..w.height())
        .map(|y| (0..w.width()).map(|x| w.terrain(Pos::new(x, y)).to_owned()).collect())
        .collect();
    let view = WorldView {
        width: w.width(),
        height: w.height(),
        cells,
        start: w.start(),
        goal: w.goal(),
        max_steps: w.max_steps(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Move {
    x: u32,
    y: u32,
    terrain: String,
    strategy: String,
    outcome: &'static str,
}

#[derive(Serialize)]
struct EpisodeView {
    moves: Vec<Move>,
    reached_goal: bool,
    total_reward: f64,
}

/// One greedy episode; an empty `policy` means the default policy.
pub fn episode_json(seed: u32, size: u32, h: Hazards, policy: &str, episode_seed: u32) -> Result<String, String> {
    let w = build_world(seed, size, h)?;
    let policy = if policy.trim().is_empty() {
        Policy::default_for(&w.schema())
    } else {
        Policy::from_json(policy).map_err(|e| e.to_string())?
    };
    let trace = run_episode(&w, &policy, u64::from(episode_seed)).map_err(|e| e.to_string())?;
    let moves = trace
        .records
        .iter()
        .map(|r| Move {
            x: r.cell.x,
            y: r.cell.y,
            terrain: w.terrain(w.next_cell(r.cell)).to_owned(),
            strategy: r.strategy.clone(),
            outcome: r.outcome.as_str(),
        })
        .collect();
    let view = EpisodeView {
        moves,
        reached_goal: trace.reached_goal,
        total_reward: trace.total_reward,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CycleView {
    index: u32,
    decision: &'static str,
    reason: String,
    cv_accuracy: Option<f64>,
    incumbent_rate: Option<f64>,
    candidate_rate: Option<f64>,
}

#[derive(Serialize)]
struct ExperimentView {
    baseline_rate: f64,
    cycles: Vec<CycleView>,
    rules: Vec<String>,
    default_action: String,
    policy: String,
}

/// Learns a policy over `cycles` augmented cycles.
pub fn experiment_json(
    seed: u32,
    size: u32,
    h: Hazards,
    cycles: u32,
    training_episodes: usize,
    exploration: f64,
    min_cv_accuracy: f64,
) -> Result<String, String> {
    let w = build_world(seed, size, h)?;
    let mut cfg = CycleConfig {
        training_episodes,
        evaluation_episodes: 200,
        exploration,
        master_seed: u64::from(seed),
        ..CycleConfig::default()
    };
    cfg.acceptance.min_cv_accuracy = min_cv_accuracy;
    let report = run_experiment(&w, &cfg, cycles.min(10)).map_err(|e| e.to_string())?;
    let view = ExperimentView {
        baseline_rate: report.baseline.success_rate,
        cycles: report
            .cycles
            .iter()
            .map(|c| CycleView {
                index: c.index,
                decision: c.decision.as_str(),
                reason: c.reason.clone(),
                cv_accuracy: c.cv_accuracy,
                incumbent_rate: c.heldout.map(|h| h.incumbent_rate),
                candidate_rate: c.heldout.map(|h| h.candidate_rate),
            })
            .collect(),
        rules: report.final_policy.rules().map(|r| r.text()).collect(),
        default_action: report.final_policy.default_action.clone(),
        policy: report.final_policy.to_json(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn world(seed: u32, size: u32) -> Result<String, JsError> {
    js(world_json(seed, size))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn episode(
    seed: u32,
    size: u32,
    sand_fast: f64,
    rock_fast: f64,
    ice_fast: f64,
    policy: &str,
    episode_seed: u32,
) -> Result<String, JsError> {
    let h = Hazards {
        sand: (sand_fast, 0.1),
        rock: (rock_fast, 0.15),
        ice: (ice_fast, 0.2),
    };
    js(episode_json(seed, size, h, policy, episode_seed))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn experiment(
    seed: u32,
    size: u32,
    sand_fast: f64,
    rock_fast: f64,
    ice_fast: f64,
    cycles: u32,
    training_episodes: u32,
    exploration: f64,
    min_cv_accuracy: f64,
) -> Result<String, JsError> {
    let h = Hazards {
        sand: (sand_fast, 0.1),
        rock: (rock_fast, 0.15),
        ice: (ice_fast, 0.2),
    };
    js(experiment_json(
        seed,
        size,
        h,
        cycles,
        training_episodes as usize,
        exploration,
        min_cv_accuracy,
    ))
}
