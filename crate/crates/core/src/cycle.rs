//! The augmented mining life cycle: data understanding, preparation,
//! modelling, evaluation, automatic operationalisation and a deployment
//! gate, chained across cycles so each deployed policy generates the data
//! for the next.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::introspection::{collect_report, featurise, Dataset, LabelRule, MetadataProvider};
use crate::knowledge::Schema;
use crate::mining::{mine_rules, mine_tree, MetaModel, MiningConfig, ModelPayload, ModelScope};
use crate::policy::{
    compile_policy, filter_association_rules, integrate_policies, tree_to_rules, ControlAttribute, IntegrationMode,
    Policy, RuleSet,
};
use crate::seed;
use crate::world::{run_batch, EpisodeTrace, GridWorld, STRATEGY, TERRAIN, TERRAIN_HERE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Rules,
    Both,
}

/// Which model's cross-validated accuracy the accuracy gate reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateModel {
    /// Outcome predicted from the decision context and chosen strategy:
    /// does the meta-level describe how the world responds?
    Performance,
    /// Strategy predicted from the context over successful decisions.
    Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Acceptance {
    pub min_cv_accuracy: f64,
    pub min_heldout_delta: f64,
}

impl Default for Acceptance {
    fn default() -> Self {
        Self {
            min_cv_accuracy: 0.65,
            min_heldout_delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub training_episodes: usize,
    pub evaluation_episodes: usize,
    pub mining: MiningConfig,
    pub model_kind: ModelKind,
    pub integration: IntegrationMode,
    pub acceptance: Acceptance,
    /// Per-decision probability of a uniformly random strategy during
    /// training episodes. Held-out evaluation never explores.
    pub exploration: f64,
    /// Equal-width bins for numeric attributes.
    pub bins: usize,
    /// Report columns for the decision model (labelled by strategy).
    pub decision_attributes: Vec<String>,
    /// Report columns for the performance model (labelled by outcome).
    pub performance_attributes: Vec<String>,
    pub gate_model: GateModel,
    pub master_seed: u64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            training_episodes: 300,
            evaluation_episodes: 200,
            mining: MiningConfig {
                max_depth: 2,
                min_leaf_instances: 10,
                min_support: 0.05,
                min_confidence: 0.55,
                cv_folds: 5,
                seed: 0,
            },
            model_kind: ModelKind::Tree,
            integration: IntegrationMode::Override,
            acceptance: Acceptance::default(),
            exploration: 0.8,
            bins: 3,
            decision_attributes: vec![TERRAIN.into(), TERRAIN_HERE.into()],
            performance_attributes: vec![TERRAIN.into(), STRATEGY.into()],
            gate_model: GateModel::Performance,
            master_seed: 0,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.training_episodes < 1 || self.evaluation_episodes < 1 {
            return bad("episode counts must be at least 1");
        }
        self.mining.validate()?;
        if !(0.0..=1.0).contains(&self.acceptance.min_cv_accuracy) {
            return bad("min_cv_accuracy must lie in [0, 1]");
        }
        if !(-1.0..=1.0).contains(&self.acceptance.min_heldout_delta) {
            return bad("min_heldout_delta must lie in [-1, 1]");
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return bad("exploration must lie in [0, 1]");
        }
        if self.bins < 1 {
            return bad("bins must be at least 1");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateDecision {
    Deployed,
    RejectedAccuracy,
    RejectedHeldout,
    InsufficientData,
}

impl GateDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            GateDecision::Deployed => "deployed",
            GateDecision::RejectedAccuracy => "rejected-accuracy",
            GateDecision::RejectedHeldout => "rejected-heldout",
            GateDecision::InsufficientData => "insufficient-data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseStatus {
    Completed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub status: PhaseStatus,
    pub summary: String,
}

impl PhaseRecord {
    fn done(summary: impl Into<String>) -> Self {
        Self {
            status: PhaseStatus::Completed,
            summary: summary.into(),
        }
    }

    fn skipped(reason: impl Into<String>) -> Self {
        Self {
            status: PhaseStatus::Skipped,
            summary: reason.into(),
        }
    }
}

/// One record per life-cycle phase, in life-cycle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub data_understanding: PhaseRecord,
    pub data_preparation: PhaseRecord,
    pub modelling: PhaseRecord,
    pub evaluation: PhaseRecord,
    pub operationalisation: PhaseRecord,
    pub deployment: PhaseRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub kind: String,
    pub class_attribute: String,
    pub scope: ModelScope,
    pub training_size: usize,
    pub cv_accuracy: Option<f64>,
}

impl From<&MetaModel> for ModelSummary {
    fn from(m: &MetaModel) -> Self {
        let kind = match m.payload {
            ModelPayload::Tree(_) => "tree",
            ModelPayload::Rules(_) => "rules",
            ModelPayload::Itemsets(_) => "itemsets",
        };
        Self {
            id: m.id.clone(),
            kind: kind.into(),
            class_attribute: m.class_attribute.clone(),
            scope: m.scope,
            training_size: m.evaluation.training_size,
            cv_accuracy: m.cv_accuracy(),
        }
    }
}

/// Paired held-out comparison on identical evaluation seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub incumbent_rate: f64,
    pub candidate_rate: f64,
    pub delta: f64,
    pub incumbent_mean_reward: f64,
    pub candidate_mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub index: u32,
    pub phases: Phases,
    pub training_episodes: usize,
    pub training_success_rate: f64,
    /// Decision rows collected from the training traces.
    pub rows_mined: usize,
    /// Rows in the decision dataset that gets operationalised.
    pub dataset_size: usize,
    pub performance_dataset_size: usize,
    pub models: Vec<ModelSummary>,
    /// The accuracy the gate compared against `min_cv_accuracy`.
    pub cv_accuracy: Option<f64>,
    pub candidate_rules: Vec<String>,
    pub heldout: Option<HeldOut>,
    pub decision: GateDecision,
    pub reason: String,
    pub pre_policy: String,
    pub post_policy: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
}

impl Metrics {
    pub fn of(traces: &[EpisodeTrace]) -> Self {
        let n = traces.len().max(1) as f64;
        Self {
            episodes: traces.len(),
            success_rate: traces.iter().filter(|t| t.reached_goal).count() as f64 / n,
            mean_reward: traces.iter().map(|t| t.total_reward).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: CycleConfig,
    /// The default policy on the held-out evaluation seeds.
    pub baseline: Metrics,
    pub cycles: Vec<CycleReport>,
    pub final_policy: Policy,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        for (i, c) in r.cycles.iter().enumerate() {
            if c.index as usize != i + 1 {
                return Err(Error::Parse(format!("cycle {} found at position {}", c.index, i + 1)));
            }
        }
        Ok(r)
    }

    /// One row per cycle: index, dataset_size, cv_accuracy, incumbent_rate,
    /// candidate_rate, delta, decision. Absent values are empty cells.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "dataset_size",
            "cv_accuracy",
            "incumbent_rate",
            "candidate_rate",
            "delta",
            "decision",
        ])?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for c in &self.cycles {
            let h = c.heldout;
            w.write_record([
                c.index.to_string(),
                c.dataset_size.to_string(),
                opt(c.cv_accuracy),
                opt(h.map(|h| h.incumbent_rate)),
                opt(h.map(|h| h.candidate_rate)),
                opt(h.map(|h| h.delta)),
                c.decision.as_str().to_owned(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Seeds of the held-out evaluation episodes: one set per experiment,
/// shared by every cycle and disjoint from the training namespace.
pub fn evaluation_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| seed::derive(master_seed, seed::EVALUATION, &[i])).collect()
}

/// Seeds of the training episodes of one cycle.
pub fn training_seeds(master_seed: u64, cycle: u32, n: usize) -> Vec<u64> {
    (0..n as u64)
        .map(|i| seed::derive(master_seed, seed::TRAINING, &[u64::from(cycle), i]))
        .collect()
}

/// Runs both policies greedily on the same `n` evaluation seeds.
pub fn evaluate_candidate(
    world: &GridWorld,
    incumbent: &Policy,
    candidate: &Policy,
    n: usize,
    seed: u64,
) -> Result<HeldOut> {
    if n < 1 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let seeds = evaluation_seeds(seed, n);
    let a = Metrics::of(&run_batch(world, incumbent, &seeds, 0.0)?);
    let b = if candidate == incumbent {
        a
    } else {
        Metrics::of(&run_batch(world, candidate, &seeds, 0.0)?)
    };
    Ok(HeldOut {
        incumbent_rate: a.success_rate,
        candidate_rate: b.success_rate,
        delta: b.success_rate - a.success_rate,
        incumbent_mean_reward: a.mean_reward,
        candidate_mean_reward: b.mean_reward,
    })
}

/// Everything one cycle produced, including the raw training traces.
#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub policy: Policy,
    pub report: CycleReport,
    pub traces: Vec<EpisodeTrace>,
}

fn dataset(
    traces: &[EpisodeTrace],
    attributes: &[String],
    rule: LabelRule,
    schema: &Arc<Schema>,
    bins: usize,
) -> Result<Option<Dataset>> {
    let provider = MetadataProvider::new(attributes.iter().cloned(), rule);
    let reports = traces
        .iter()
        .map(|t| collect_report(t, &provider, schema))
        .collect::<Result<Vec<_>>>()?;
    match featurise(&reports, bins) {
        Ok(ds) => Ok(Some(ds)),
        Err(Error::EmptyDataset) => Ok(None),
        Err(e) => Err(e),
    }
}



fn insufficiency(name: &str, ds: Option<&Dataset>, folds: usize) -> Option<String> {
    match ds {
        None => Some(format!("{name} dataset is empty")),
        Some(d) if d.classes_present() < 2 => Some(format!("{name} dataset has fewer than two classes")),
        Some(d) if d.len() < folds => Some(format!("{name} dataset has {} rows, fewer than {folds} folds", d.len())),
        Some(_) => None,
    }
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.4}")
}

/// One pass of the augmented life cycle starting from `incumbent`.
pub fn run_cycle(world: &GridWorld, incumbent: &Policy, config: &CycleConfig, cycle_index: u32) -> Result<(Policy, CycleReport)> {
    run_cycle_traced(world, incumbent, config, cycle_index).map(|o| (o.policy, o.report))
}

pub fn run_cycle_traced(
    world: &GridWorld,
    incumbent: &Policy,
    config: &CycleConfig,
    cycle_index: u32,
) -> Result<CycleOutcome> {
    config.validate()?;
    let schema = Arc::new(world.schema());
    let control = ControlAttribute::from_schema(&schema);
    if incumbent.control != control {
        return Err(Error::ControlMismatch(control.name, incumbent.control.name.clone()));
    }
    let master = config.master_seed;
    let pre_id = incumbent.id();

    // data understanding
    let seeds = training_seeds(master, cycle_index, config.training_episodes);
    let traces = run_batch(world, incumbent, &seeds, config.exploration)?;
    let training = Metrics::of(&traces);
    let rows_mined: usize = traces.iter().map(|t| t.records.len()).sum();
    let data_understanding = PhaseRecord::done(format!(
        "{} training episodes, {rows_mined} decisions, success rate {}",
        traces.len(),
        fmt_rate(training.success_rate)
    ));

    // data preparation
    let decision_ds = dataset(&traces, &config.decision_attributes, LabelRule::StrategyAsClass, &schema, config.bins)?;
    let perf_ds = dataset(&traces, &config.performance_attributes, LabelRule::OutcomeAsClass, &schema, config.bins)?;
    let dataset_size = decision_ds.as_ref().map_or(0, Dataset::len);
    let performance_dataset_size = perf_ds.as_ref().map_or(0, Dataset::len);
    let data_preparation = PhaseRecord::done(format!(
        "decision dataset {dataset_size} rows, performance dataset {performance_dataset_size} rows"
    ));

    let mut report = CycleReport {
        index: cycle_index,
        phases: Phases {
            data_understanding,
            data_preparation,
            modelling: PhaseRecord::skipped(""),
            evaluation: PhaseRecord::skipped(""),
            operationalisation: PhaseRecord::skipped(""),
            deployment: PhaseRecord::skipped(""),
        },
        training_episodes: traces.len(),
        training_success_rate: training.success_rate,
        rows_mined,
        dataset_size,
        performance_dataset_size,
        models: Vec::new(),
        cv_accuracy: None,
        candidate_rules: Vec::new(),
        heldout: None,
        decision: GateDecision::InsufficientData,
        reason: String::new(),
        pre_policy: pre_id.clone(),
        post_policy: pre_id,
    };
    let keep = |mut report: CycleReport, decision: GateDecision, reason: String, traces: Vec<EpisodeTrace>| {
        report.decision = decision;
        report.phases.deployment = PhaseRecord::skipped(format!("{}: incumbent kept", decision.as_str()));
        report.reason = reason;
        Ok(CycleOutcome {
            policy: incumbent.clone(),
            report,
            traces,
        })
    };

    let folds = config.mining.cv_folds;
    let lacking = insufficiency("decision", decision_ds.as_ref(), folds)
        .or_else(|| insufficiency("performance", perf_ds.as_ref(), folds));
    if let Some(reason) = lacking {
        for p in [
            &mut report.phases.modelling,
            &mut report.phases.evaluation,
            &mut report.phases.operationalisation,
        ] {
            *p = PhaseRecord::skipped(reason.clone());
        }
        return keep(report, GateDecision::InsufficientData, reason, traces);
    }
    let (decision_ds, perf_ds) = (decision_ds.unwrap(), perf_ds.unwrap());

    // modelling
    let mining = MiningConfig {
        seed: seed::derive(master, seed::FOLDS, &[u64::from(cycle_index)]),
        ..config.mining
    };
    let perf_model = mine_tree(&perf_ds, &mining, format!("c{cycle_index}-performance-tree"))?;
    let mut decision_models = Vec::new();
    if matches!(config.model_kind, ModelKind::Tree | ModelKind::Both) {
        decision_models.push(mine_tree(&decision_ds, &mining, format!("c{cycle_index}-decision-tree"))?);
    }
    if matches!(config.model_kind, ModelKind::Rules | ModelKind::Both) {
        decision_models.push(mine_rules(&decision_ds, &mining, format!("c{cycle_index}-decision-rules"))?);
    }
    report.models = std::iter::once(&perf_model).chain(&decision_models).map(ModelSummary::from).collect();
    let mut modelling = String::new();
    for m in &report.models {
        let cv = m.cv_accuracy.map_or_else(|| "n/a".to_owned(), fmt_rate);
        let _ = write!(modelling, "{}{} (cv {cv})", if modelling.is_empty() { "" } else { ", " }, m.id);
    }
    report.phases.modelling = PhaseRecord::done(modelling);

    // evaluation, part one: does the meta-level describe its data well enough?
    let cv = match config.gate_model {
        GateModel::Performance => perf_model.cv_accuracy(),
        GateModel::Decision => decision_models
            .iter()
            .filter_map(MetaModel::cv_accuracy)
            .fold(None, |best: Option<f64>, x| Some(best.map_or(x, |b| b.max(x)))),
    };
    report.cv_accuracy = cv;
    let cv = cv.unwrap_or(0.0);
    if cv < config.acceptance.min_cv_accuracy {
        let reason = format!(
            "cv accuracy {} below {}",
            fmt_rate(cv),
            config.acceptance.min_cv_accuracy
        );
        report.phases.evaluation = PhaseRecord::done(reason.clone());
        report.phases.operationalisation = PhaseRecord::skipped("accuracy gate failed");
        return keep(report, GateDecision::RejectedAccuracy, reason, traces);
    }

    // operationalisation
    let mut ruleset = RuleSet::default();
    for m in &decision_models {
        let rs = match &m.payload {
            ModelPayload::Tree(t) => tree_to_rules(t, &control)?,
            ModelPayload::Rules(r) => filter_association_rules(r, &schema, mining.min_confidence, &m.binnings),
            ModelPayload::Itemsets(_) => RuleSet::default(),
        };
        ruleset = ruleset.merged(rs);
    }
    report.candidate_rules = ruleset.rules().iter().map(|r| r.text()).collect();
    let mut candidate = compile_policy(ruleset, &control, &incumbent.default_action)?;
    candidate.provenance.cycle = cycle_index;
    candidate.provenance.sources = decision_models.iter().map(|m| m.id.clone()).collect();
    let merged = integrate_policies(incumbent, &candidate, config.integration)?;
    report.phases.operationalisation = PhaseRecord::done(format!(
        "{} candidate rules, {:?} integration gives {} rules",
        report.candidate_rules.len(),
        config.integration,
        merged.rules().count()
    ));

    // evaluation, part two: paired held-out episodes
    let held = evaluate_candidate(world, incumbent, &merged, config.evaluation_episodes, master)?;
    report.heldout = Some(held);
    let summary = format!(
        "cv accuracy {}; held-out incumbent {} candidate {} delta {}",
        fmt_rate(cv),
        fmt_rate(held.incumbent_rate),
        fmt_rate(held.candidate_rate),
        fmt_rate(held.delta)
    );
    report.phases.evaluation = PhaseRecord::done(summary);
    if held.delta < config.acceptance.min_heldout_delta {
        let reason = format!(
            "held-out delta {} below {}",
            fmt_rate(held.delta),
            config.acceptance.min_heldout_delta
        );
        return keep(report, GateDecision::RejectedHeldout, reason, traces);
    }

    // deployment
    report.decision = GateDecision::Deployed;
    report.post_policy = merged.id();
    report.reason = "both gates passed".into();
    report.phases.deployment = PhaseRecord::done(format!("deployed policy {}", report.post_policy));
    Ok(CycleOutcome {
        policy: merged,
        report,
        traces,
    })
}

/// Chains `n_cycles` cycles from the default policy.
pub fn run_experiment(world: &GridWorld, config: &CycleConfig, n_cycles: u32) -> Result<ExperimentReport> {
    run_experiment_traced(world, config, n_cycles, |_, _| Ok(()))
}

/// Like [`run_experiment`], handing each cycle's training traces to
/// `on_traces` as soon as the cycle finishes.
pub fn run_experiment_traced(
    world: &GridWorld,
    config: &CycleConfig,
    n_cycles: u32,
    mut on_traces: impl FnMut(u32, &[EpisodeTrace]) -> Result<()>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let mut policy = Policy::default_for(&world.schema());
    let seeds = evaluation_seeds(config.master_seed, config.evaluation_episodes);
    let baseline = Metrics::of(&run_batch(world, &policy, &seeds, 0.0)?);
    let mut cycles = Vec::with_capacity(n_cycles as usize);
    for index in 1..=n_cycles {
        let outcome = run_cycle_traced(world, &policy, config, index)?;
        on_traces(index, &outcome.traces)?;
        policy = outcome.policy;
        cycles.push(outcome.report);
    }
    Ok(ExperimentReport {
        config: config.clone(),
        baseline,
        cycles,
        final_policy: policy,
    })
}

/// Rules of `policy` as display lines, grouped by tier.
pub fn describe_policy(policy: &Policy) -> BTreeMap<usize, Vec<String>> {
    policy
        .tiers
        .iter()
        .enumerate()
        .map(|(i, t)| (i, t.rules().iter().map(ToString::to_string).collect()))
        .collect()
}
