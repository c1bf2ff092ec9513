//! The object level: a seeded grid world ("Reactive Rover") and the
//! episode runner that drives it with a strategy controller.
//!
//! The rover always moves by greedy Manhattan descent toward the goal.
//! What the controller decides is the *strategy* used for each move, and
//! each (terrain, strategy) pair has a failure probability. A failed move
//! wastes the step and leaves the rover where it was.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::io;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{define_schema, AttributeDef, Domain, InformationState, Schema, Scope, Value};
use crate::seed;

/// Terrain of the cell the next move enters.
pub const TERRAIN: &str = "terrain";
/// Terrain of the cell the rover stands on.
pub const TERRAIN_HERE: &str = "terrain_here";
/// Remaining Manhattan distance to the goal.
pub const DISTANCE: &str = "distance";
pub const LAST_OUTCOME: &str = "last_outcome";
/// Steps used so far in the episode.
pub const STEPS: &str = "steps";
pub const STRATEGY: &str = "strategy";
pub const OUTCOME: &str = "outcome";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: u32,
    pub y: u32,
}

impl Pos {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Pos) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    East,
    West,
    South,
    North,
}

impl Direction {
    fn delta(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
            Direction::South => (0, 1),
            Direction::North => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveOutcome {
    Success,
    Failure,
}

impl MoveOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveOutcome::Success => "success",
            MoveOutcome::Failure => "failure",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "success" => Ok(MoveOutcome::Success),
            "failure" => Ok(MoveOutcome::Failure),
            other => Err(Error::Parse(format!("unknown move outcome `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub step_cost: f64,
    pub failure_penalty: f64,
    pub goal_reward: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            step_cost: 1.0,
            failure_penalty: 1.0,
            goal_reward: 20.0,
        }
    }
}

/// On-disk form of a world. Each entry of `cells` is one grid row with
/// space-separated terrain names; `hazards[terrain][strategy]` is the
/// failure probability of entering that terrain with that strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub width: u32,
    pub height: u32,
    pub terrains: Vec<String>,
    pub strategies: Vec<String>,
    pub cells: Vec<String>,
    pub start: Pos,
    pub goal: Pos,
    pub hazards: BTreeMap<String, BTreeMap<String, f64>>,
    pub rewards: Rewards,
    pub max_steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldFile", into = "WorldFile")]
pub struct GridWorld {
    width: u32,
    height: u32,
    terrains: Vec<String>,
    strategies: Vec<String>,
    cells: Vec<usize>,
    start: Pos,
    goal: Pos,
    /// Row-major `[terrain][strategy]` failure probabilities.
    hazard: Vec<f64>,
    rewards: Rewards,
    max_steps: u32,
    seed: Option<u64>,
}

impl TryFrom<WorldFile> for GridWorld {
    type Error = Error;

    fn try_from(f: WorldFile) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidWorld(msg));
        if f.width == 0 || f.height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if f.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if f.terrains.is_empty() || f.strategies.is_empty() {
            return bad("terrain and strategy lists must be non-empty".into());
        }
        for list in [&f.terrains, &f.strategies] {
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != list.len() {
                return bad("duplicate terrain or strategy name".into());
            }
        }
        if f.cells.len() != f.height as usize {
            return bad(format!("expected {} rows, found {}", f.height, f.cells.len()));
        }
        let mut cells = Vec::with_capacity((f.width * f.height) as usize);
        for (y, row) in f.cells.iter().enumerate() {
            let names: Vec<&str> = row.split_whitespace().collect();
            if names.len() != f.width as usize {
                return bad(format!("row {y} has {} cells, expected {}", names.len(), f.width));
            }
            for name in names {
                match f.terrains.iter().position(|t| t == name) {
                    Some(i) => cells.push(i),
                    None => return bad(format!("unknown terrain `{name}` in row {y}")),
                }
            }
        }
        for p in [f.start, f.goal] {
            if p.x >= f.width || p.y >= f.height {
                return bad(format!("({}, {}) lies outside the grid", p.x, p.y));
            }
        }
        if f.start == f.goal {
            return bad("start and goal coincide".into());
        }
        let mut hazard = Vec::with_capacity(f.terrains.len() * f.strategies.len());
        for t in &f.terrains {
            for s in &f.strategies {
                let p = f.hazards.get(t).and_then(|row| row.get(s));
                match p {
                    Some(&p) if (0.0..=1.0).contains(&p) => hazard.push(p),
                    Some(p) => return bad(format!("hazard ({t}, {s}) = {p} is not a probability")),
                    None => return bad(format!("hazard ({t}, {s}) missing")),
                }
            }
        }
        let r = f.rewards;
        if !(r.step_cost >= 0.0 && r.failure_penalty >= 0.0 && r.goal_reward > 0.0) {
            return bad("rewards need step_cost >= 0, failure_penalty >= 0, goal_reward > 0".into());
        }
        Ok(GridWorld {
            width: f.width,
            height: f.height,
            terrains: f.terrains,
            strategies: f.strategies,
            cells,
            start: f.start,
            goal: f.goal,
            hazard,
            rewards: f.rewards,
            max_steps: f.max_steps,
            seed: f.seed,
        })
    }
}

impl From<GridWorld> for WorldFile {
    fn from(w: GridWorld) -> Self {
        let cells = (0..w.height)
            .map(|y| {
                (0..w.width)
                    .map(|x| w.terrains[w.cells[(y * w.width + x) as usize]].as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let mut hazards = BTreeMap::new();
        for (ti, t) in w.terrains.iter().enumerate() {
            let row: BTreeMap<String, f64> = w
                .strategies
                .iter()
                .enumerate()
                .map(|(si, s)| (s.clone(), w.hazard[ti * w.strategies.len() + si]))
                .collect();
            hazards.insert(t.clone(), row);
        }
        WorldFile {
            width: w.width,
            height: w.height,
            terrains: w.terrains,
            strategies: w.strategies,
            cells,
            start: w.start,
            goal: w.goal,
            hazards,
            rewards: w.rewards,
            max_steps: w.max_steps,
            seed: w.seed,
        }
    }
}

/// Parameters for randomly generated rover worlds.
#[derive(Debug, Clone, PartialEq)]
pub struct RoverParams {
    pub width: u32,
    pub height: u32,
    pub terrains: Vec<String>,
    pub strategies: Vec<String>,
    pub hazards: BTreeMap<String, BTreeMap<String, f64>>,
    pub rewards: Rewards,
    pub max_steps: u32,
}

impl Default for RoverParams {
    fn default() -> Self {
        let table = [("sand", 0.6, 0.1), ("rock", 0.1, 0.15), ("ice", 0.7, 0.2)];
        let hazards = table
            .iter()
            .map(|&(t, fast, careful)| {
                let row = BTreeMap::from([("FAST".to_owned(), fast), ("CAREFUL".to_owned(), careful)]);
                (t.to_owned(), row)
            })
            .collect();
        Self {
            width: 8,
            height: 8,
            terrains: table.iter().map(|t| t.0.to_owned()).collect(),
            strategies: vec!["FAST".into(), "CAREFUL".into()],
            hazards,
            rewards: Rewards::default(),
            max_steps: 28,
        }
    }
}

impl GridWorld {
    pub fn from_file(file: WorldFile) -> Result<Self> {
        Self::try_from(file)
    }

    /// Uniformly random terrain, start in the top-left corner and goal in
    /// the bottom-right corner.
    pub fn generate(params: &RoverParams, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed::derive(seed, seed::WORLD, &[]));
        let cells = (0..params.height)
            .map(|_| {
                (0..params.width)
                    .map(|_| params.terrains[rng.gen_range(0..params.terrains.len())].as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        GridWorld::try_from(WorldFile {
            width: params.width,
            height: params.height,
            terrains: params.terrains.clone(),
            strategies: params.strategies.clone(),
            cells,
            start: Pos::new(0, 0),
            goal: Pos::new(params.width.saturating_sub(1), params.height.saturating_sub(1)),
            hazards: params.hazards.clone(),
            rewards: params.rewards,
            max_steps: params.max_steps,
            seed: Some(seed),
        })
    }

    pub fn to_file(&self) -> WorldFile {
        self.clone().into()
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn goal(&self) -> Pos {
        self.goal
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn rewards(&self) -> Rewards {
        self.rewards
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn terrains(&self) -> &[String] {
        &self.terrains
    }

    pub fn strategies(&self) -> &[String] {
        &self.strategies
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn terrain(&self, p: Pos) -> &str {
        &self.terrains[self.cells[(p.y * self.width + p.x) as usize]]
    }

    pub fn hazard(&self, terrain: &str, strategy: &str) -> Option<f64> {
        let t = self.terrains.iter().position(|x| x == terrain)?;
        let s = self.strategies.iter().position(|x| x == strategy)?;
        Some(self.hazard[t * self.strategies.len() + s])
    }

    fn check_pos(&self, p: Pos) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfGrid {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Greedy Manhattan descent: move along the axis with the larger
    /// remaining distance, x first on ties. `None` at the goal.
    pub fn direction(&self, p: Pos) -> Option<Direction> {
        let dx = self.goal.x as i64 - p.x as i64;
        let dy = self.goal.y as i64 - p.y as i64;
        if dx == 0 && dy == 0 {
            None
        } else if dx.abs() >= dy.abs() {
            Some(if dx > 0 { Direction::East } else { Direction::West })
        } else {
            Some(if dy > 0 { Direction::South } else { Direction::North })
        }
    }

    fn neighbour(&self, p: Pos, d: Direction) -> Option<Pos> {
        let (dx, dy) = d.delta();
        let x = p.x as i64 + dx;
        let y = p.y as i64 + dy;
        (x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height).then(|| Pos::new(x as u32, y as u32))
    }

    /// The cell the greedy move from `p` enters, or `p` itself at the goal.
    pub fn next_cell(&self, p: Pos) -> Pos {
        self.direction(p).and_then(|d| self.neighbour(p, d)).unwrap_or(p)
    }

    /// Rover schema: world observations, self observations, the control
    /// attribute `strategy` (class) and the move `outcome`.
    pub fn schema(&self) -> Schema {
        let span = (self.width + self.height - 2) as f64;
        define_schema(
            vec![
                AttributeDef::new(TERRAIN, Scope::World, Domain::categorical(self.terrains.clone())),
                AttributeDef::new(TERRAIN_HERE, Scope::World, Domain::categorical(self.terrains.clone())),
                AttributeDef::new(DISTANCE, Scope::World, Domain::Numeric { low: 0.0, high: span }),
                AttributeDef::new(
                    LAST_OUTCOME,
                    Scope::Modeller,
                    Domain::categorical(["none", "success", "failure"]),
                ),
                AttributeDef::new(
                    STEPS,
                    Scope::Modeller,
                    Domain::Numeric {
                        low: 0.0,
                        high: self.max_steps as f64,
                    },
                ),
                AttributeDef::new(STRATEGY, Scope::Modeller, Domain::categorical(self.strategies.clone())),
                AttributeDef::new(OUTCOME, Scope::Modeller, Domain::categorical(["success", "failure"])),
            ],
            STRATEGY,
        )
        .expect("rover schema is well formed")
    }

    /// Decision-time information state at `p`.
    pub fn observe(&self, p: Pos, steps: u32, last: Option<MoveOutcome>) -> InformationState {
        InformationState::new(steps as u64)
            .with(TERRAIN, Value::cat(self.terrain(self.next_cell(p))))
            .with(TERRAIN_HERE, Value::cat(self.terrain(p)))
            .with(DISTANCE, Value::Num(p.manhattan(self.goal) as f64))
            .with(LAST_OUTCOME, Value::cat(last.map_or("none", MoveOutcome::as_str)))
            .with(STEPS, Value::Num(steps as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub position: Pos,
    pub outcome: MoveOutcome,
    pub reward: f64,
}

/// One greedy move with `strategy`. Exactly one uniform variate is drawn.
pub fn step(world: &GridWorld, position: Pos, strategy: &str, rng: &mut impl Rng) -> Result<StepResult> {
    world.check_pos(position)?;
    match world.direction(position) {
        Some(d) => step_towards(world, position, d, strategy, rng),
        None => {
            // already at the goal: nothing to do but pay for the step
            if world.hazard(world.terrain(position), strategy).is_none() {
                return Err(Error::UnknownStrategy(strategy.to_owned()));
            }
            let _: f64 = rng.gen();
            Ok(StepResult {
                position,
                outcome: MoveOutcome::Success,
                reward: -world.rewards.step_cost,
            })
        }
    }
}

/// A move in an explicit direction. Moves leaving the grid are clamped:
/// the position is unchanged and the move counts as a success.
pub fn step_towards(
    world: &GridWorld,
    position: Pos,
    direction: Direction,
    strategy: &str,
    rng: &mut impl Rng,
) -> Result<StepResult> {
    world.check_pos(position)?;
    if !world.strategies.iter().any(|s| s == strategy) {
        return Err(Error::UnknownStrategy(strategy.to_owned()));
    }
    let u: f64 = rng.gen();
    let r = world.rewards;
    let Some(target) = world.neighbour(position, direction) else {
        return Ok(StepResult {
            position,
            outcome: MoveOutcome::Success,
            reward: -r.step_cost,
        });
    };
    let p = world
        .hazard(world.terrain(target), strategy)
        .expect("strategy and terrain validated");
    if u < p {
        Ok(StepResult {
            position,
            outcome: MoveOutcome::Failure,
            reward: -r.step_cost - r.failure_penalty,
        })
    } else {
        let bonus = if target == world.goal { r.goal_reward } else { 0.0 };
        Ok(StepResult {
            position: target,
            outcome: MoveOutcome::Success,
            reward: -r.step_cost + bonus,
        })
    }
}

/// Anything that picks a strategy from an information state.
pub trait Controller {
    fn choose(&self, state: &InformationState) -> Cow<'_, str>;
}

impl<F> Controller for F
where
    F: Fn(&InformationState) -> String,
{
    fn choose(&self, state: &InformationState) -> Cow<'_, str> {
        Cow::Owned(self(state))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub epoch: u64,
    pub cell: Pos,
    /// Decision-time observations.
    pub state: InformationState,
    pub strategy: String,
    pub outcome: MoveOutcome,
    pub reward: f64,
}

impl DecisionRecord {
    /// Observations plus the chosen strategy and the resulting outcome.
    pub fn full_state(&self) -> InformationState {
        let mut s = self.state.clone();
        s.set(STRATEGY, Value::cat(self.strategy.clone()));
        s.set(OUTCOME, Value::cat(self.outcome.as_str()));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub records: Vec<DecisionRecord>,
    pub reached_goal: bool,
    pub steps_used: u32,
    pub total_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub reached_goal: bool,
    pub total_reward: f64,
    pub steps_used: u32,
}

impl EpisodeTrace {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            reached_goal: self.reached_goal,
            total_reward: self.total_reward,
            steps_used: self.steps_used,
        }
    }

    pub fn recomputed_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }
}

pub fn run_episode(world: &GridWorld, controller: &impl Controller, seed: u64) -> Result<EpisodeTrace> {
    run_episode_exploring(world, controller, seed, 0.0)
}

/// Runs one episode. With probability `exploration` a decision is replaced
/// by a uniformly random strategy; those draws come from a separate stream
/// so the environment's randomness is the same for every exploration rate.
pub fn run_episode_exploring(
    world: &GridWorld,
    controller: &impl Controller,
    seed: u64,
    exploration: f64,
) -> Result<EpisodeTrace> {
    let mut env: ChaCha8Rng = seed::rng(seed);
    let mut explore: ChaCha8Rng = seed::rng(seed);
    explore.set_stream(1);

    let mut pos = world.start;
    let mut last = None;
    let mut steps = 0u32;
    let mut total = 0.0;
    let mut records = Vec::new();
    while steps < world.max_steps && pos != world.goal {
        let state = world.observe(pos, steps, last);
        let mut strategy = controller.choose(&state).into_owned();
        if !world.strategies.contains(&strategy) {
            return Err(Error::UnknownStrategy(strategy));
        }
        if exploration > 0.0 && explore.gen::<f64>() < exploration {
            strategy = world.strategies[explore.gen_range(0..world.strategies.len())].clone();
        }
        let res = step(world, pos, &strategy, &mut env)?;
        records.push(DecisionRecord {
            epoch: steps as u64,
            cell: pos,
            state,
            strategy,
            outcome: res.outcome,
            reward: res.reward,
        });
        total += res.reward;
        pos = res.position;
        last = Some(res.outcome);
        steps += 1;
    }
    Ok(EpisodeTrace {
        seed,
        records,
        reached_goal: pos == world.goal,
        steps_used: steps,
        total_reward: total,
    })
}

/// Runs one episode per seed; results come back in seed order.
pub fn run_batch(
    world: &GridWorld,
    controller: &(impl Controller + Sync),
    seeds: &[u64],
    exploration: f64,
) -> Result<Vec<EpisodeTrace>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|&s| run_episode_exploring(world, controller, s, exploration))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds
            .iter()
            .map(|&s| run_episode_exploring(world, controller, s, exploration))
            .collect()
    }
}

const TRACE_PREFIX: [&str; 5] = ["episode", "seed", "epoch", "x", "y"];
const TRACE_SUFFIX: [&str; 2] = ["reward", "reached_goal"];

/// One CSV row per decision record. Columns: episode, seed, epoch, x, y,
/// every schema attribute in schema order, reward, and `reached_goal`
/// (true only on the move that entered the goal).
pub fn write_traces_csv<W: io::Write>(schema: &Schema, traces: &[EpisodeTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TRACE_PREFIX.to_vec();
    header.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    header.extend(TRACE_SUFFIX);
    w.write_record(&header)?;
    for (i, t) in traces.iter().enumerate() {
        let last = t.records.len().saturating_sub(1);
        for (j, r) in t.records.iter().enumerate() {
            let full = r.full_state();
            let mut row = vec![
                i.to_string(),
                t.seed.to_string(),
                r.epoch.to_string(),
                r.cell.x.to_string(),
                r.cell.y.to_string(),
            ];
            for a in schema.attributes() {
                row.push(full.get(&a.name).map(|v| v.label().into_owned()).unwrap_or_default());
            }
            row.push(r.reward.to_string());
            row.push((t.reached_goal && j == last).to_string());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub(crate) fn parse_value(def: &AttributeDef, text: &str) -> Result<Value> {
    let v = match def.domain {
        Domain::Numeric { .. } => Value::Num(
            text.parse()
                .map_err(|_| Error::Parse(format!("`{text}` is not a number ({})", def.name)))?,
        ),
        Domain::Boolean => Value::Bool(
            text.parse()
                .map_err(|_| Error::Parse(format!("`{text}` is not a boolean ({})", def.name)))?,
        ),
        Domain::Categorical { .. } => Value::cat(text),
    };
    if !def.domain.contains(&v) {
        return Err(Error::OutOfDomainValue {
            attribute: def.name.clone(),
            value: text.to_owned(),
        });
    }
    Ok(v)
}

/// Reads traces written by [`write_traces_csv`].
pub fn read_traces_csv<R: io::Read>(schema: &Schema, input: R) -> Result<Vec<EpisodeTrace>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    };
    let fixed: Vec<usize> = TRACE_PREFIX
        .iter()
        .chain(TRACE_SUFFIX.iter())
        .map(|n| col(n))
        .collect::<Result<_>>()?;
    let attr_cols: Vec<(usize, &AttributeDef)> = schema
        .attributes()
        .iter()
        .filter_map(|a| header.iter().position(|h| h == a.name).map(|i| (i, a)))
        .collect();
    for required in [STRATEGY, OUTCOME] {
        col(required)?;
    }
    let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Parse(format!("`{s}` is not an integer"))) };

    let mut traces: Vec<(u64, EpisodeTrace)> = Vec::new();
    for row in r.records() {
        let row = row?;
        let episode = num(&row[fixed[0]])?;
        let seed = num(&row[fixed[1]])?;
        let epoch = num(&row[fixed[2]])?;
        let cell = Pos::new(num(&row[fixed[3]])? as u32, num(&row[fixed[4]])? as u32);
        let reward: f64 = row[fixed[5]]
            .parse()
            .map_err(|_| Error::Parse(format!("bad reward `{}`", &row[fixed[5]])))?;
        let reached: bool = row[fixed[6]]
            .parse()
            .map_err(|_| Error::Parse(format!("bad flag `{}`", &row[fixed[6]])))?;
        let mut state = InformationState::new(epoch);
        let mut strategy = None;
        let mut outcome = None;
        for &(i, def) in &attr_cols {
            let text = &row[i];
            if text.is_empty() {
                continue;
            }
            match def.name.as_str() {
                STRATEGY => strategy = Some(text.to_owned()),
                OUTCOME => outcome = Some(MoveOutcome::parse(text)?),
                _ => state.set(def.name.clone(), parse_value(def, text)?),
            }
        }
        let record = DecisionRecord {
            epoch,
            cell,
            state,
            strategy: strategy.ok_or_else(|| Error::Parse("row without strategy".into()))?,
            outcome: outcome.ok_or_else(|| Error::Parse("row without outcome".into()))?,
            reward,
        };
        if traces.last().map(|(e, _)| *e) != Some(episode) {
            traces.push((
                episode,
                EpisodeTrace {
                    seed,
                    records: Vec::new(),
                    reached_goal: false,
                    steps_used: 0,
                    total_reward: 0.0,
                },
            ));
        }
        let t = &mut traces.last_mut().expect("pushed above").1;
        t.records.push(record);
        t.reached_goal |= reached;
        t.steps_used += 1;
        t.total_reward += reward;
    }
    Ok(traces.into_iter().map(|(_, t)| t).collect())
}
