//! Closed-loop metacognitive control: an object-level rover acts in a grid
//! world, its decisions are logged as introspective reports, a meta-level
//! miner learns decision trees and association rules from them, and the
//! learned models are compiled into executable policies that are deployed
//! behind an accuracy and held-out performance gate.

pub mod cycle;
pub mod error;
pub mod introspection;
pub mod knowledge;
pub mod mining;
pub mod policy;
pub mod seed;
pub mod world;

pub use cycle::{
    evaluate_candidate, run_cycle, run_experiment, CycleConfig, CycleReport, ExperimentReport, GateDecision, HeldOut,
};
pub use error::{Error, ErrorClass, Result};
pub use knowledge::{define_schema, AttributeDef, Domain, InformationState, Schema, Scope, Value};
pub use policy::{compile_policy, integrate_policies, tree_to_rules, IntegrationMode, Policy, Rule, RuleSet};
pub use world::{run_episode, GridWorld, RoverParams};

/// Pretty-printed JSON with a trailing newline. Struct fields serialise in
/// declaration order and maps are ordered, so equal values give equal bytes.
pub fn to_canonical_json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable value");
    s.push('\n');
    s
}
