//! Meta-level learners: decision trees, association rules and their
//! cross-validated evaluation, packaged as [`MetaModel`]s.

mod apriori;
mod cv;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use apriori::{apriori, derive_rules, transactions, AssociationRule, FrequentItemset, Item};
pub use cv::{cross_validate, cross_validate_with, stratified_folds, CvResult};
pub use tree::{entropy, entropy_of_counts, induce_tree, info_gain, Branch, DecisionTree, Node};

use crate::error::{Error, Result};
use crate::introspection::{Binning, Dataset, Instance};
use crate::knowledge::Scope;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub max_depth: usize,
    pub min_leaf_instances: usize,
    pub min_support: f64,
    pub min_confidence: f64,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_leaf_instances: 2,
            min_support: 0.05,
            min_confidence: 0.5,
            cv_folds: 2,
            seed: 0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.min_leaf_instances < 1 {
            return bad("min_leaf_instances must be at least 1");
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return bad("min_support must lie in (0, 1]");
        }
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return bad("min_confidence must lie in (0, 1]");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2");
        }
        Ok(())
    }
}

/// Which knowledge layer a model describes: world-only conditions give a
/// model of world knowledge, any self attribute makes it (partly) a model
/// of the running system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelScope {
    World,
    #[serde(rename = "self")]
    Modeller,
    Mixed,
}

impl ModelScope {
    /// Scope of a model whose conditions test `used` attributes of `ds`.
    pub fn of(ds: &Dataset, used: &[String]) -> Self {
        let scopes: Vec<Scope> = used
            .iter()
            .filter_map(|u| ds.attributes.iter().find(|a| &a.name == u).map(|a| a.scope))
            .collect();
        if scopes.iter().all(|&s| s == Scope::World) {
            ModelScope::World
        } else if scopes.iter().all(|&s| s == Scope::Modeller) {
            ModelScope::Modeller
        } else {
            ModelScope::Mixed
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cv: Option<CvResult>,
    pub training_size: usize,
    pub config: MiningConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum ModelPayload {
    Tree(DecisionTree),
    Rules(Vec<AssociationRule<Item>>),
    Itemsets(Vec<FrequentItemset<Item>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub id: String,
    pub class_attribute: String,
    pub class_values: Vec<String>,
    pub scope: ModelScope,
    pub evaluation: Evaluation,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub binnings: BTreeMap<String, Binning>,
    #[serde(flatten)]
    pub payload: ModelPayload,
}

impl MetaModel {
    pub fn cv_accuracy(&self) -> Option<f64> {
        self.evaluation.cv.as_ref().map(|c| c.mean_accuracy)
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn cv_if_possible(ds: &Dataset, config: &MiningConfig, run: impl FnOnce() -> Result<CvResult>) -> Result<Option<CvResult>> {
    if ds.classes_present() < 2 || config.cv_folds > ds.len() {
        return Ok(None);
    }
    run().map(Some)
}

pub fn mine_tree(ds: &Dataset, config: &MiningConfig, id: impl Into<String>) -> Result<MetaModel> {
    let tree = induce_tree(ds, config)?;
    let cv = cv_if_possible(ds, config, || cross_validate(ds, config))?;
    Ok(MetaModel {
        id: id.into(),
        class_attribute: ds.class.name.clone(),
        class_values: ds.class.values.clone(),
        scope: ModelScope::of(ds, &tree.attributes_used()),
        evaluation: Evaluation {
            cv,
            training_size: ds.len(),
            config: *config,
        },
        binnings: ds.binnings.clone(),
        payload: ModelPayload::Tree(tree),
    })
}

fn class_rules(ds: &Dataset, config: &MiningConfig) -> Result<Vec<AssociationRule<Item>>> {
    let frequent = apriori(&transactions(ds), config.min_support)?;
    Ok(derive_rules(&frequent, config.min_confidence, ds.len()))
}

/// First matching class rule in priority order, else the majority class.
fn rule_classifier(ds: &Dataset, rules: Vec<AssociationRule<Item>>) -> impl Fn(&Dataset, &Instance) -> Result<String> {
    let class = ds.class.name.clone();
    let mut counts = vec![0usize; ds.class.values.len()];
    for i in &ds.instances {
        counts[i.class as usize] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .fold(0, |b, (i, &c)| if c > counts[b] { i } else { b });
    let fallback = ds.class.values[best].clone();
    let rules: Vec<_> = rules.into_iter().filter(|r| r.consequent.attribute == class).collect();
    move |test: &Dataset, inst: &Instance| {
        for r in &rules {
            let holds = r.antecedent.iter().all(|item| {
                test.column(&item.attribute)
                    .is_some_and(|c| test.value_label(inst, c) == item.value)
            });
            if holds {
                return Ok(r.consequent.value.clone());
            }
        }
        Ok(fallback.clone())
    }
}

pub fn mine_rules(ds: &Dataset, config: &MiningConfig, id: impl Into<String>) -> Result<MetaModel> {
    config.validate()?;
    let rules = class_rules(ds, config)?;
    let cv = cv_if_possible(ds, config, || {
        cross_validate_with(ds, config.cv_folds, config.seed, |train| {
            Ok(rule_classifier(train, class_rules(train, config)?))
        })
    })?;
    let mut used: Vec<String> = rules
        .iter()
        .filter(|r| r.consequent.attribute == ds.class.name)
        .flat_map(|r| r.antecedent.iter().map(|i| i.attribute.clone()))
        .collect();
    used.sort();
    used.dedup();
    Ok(MetaModel {
        id: id.into(),
        class_attribute: ds.class.name.clone(),
        class_values: ds.class.values.clone(),
        scope: ModelScope::of(ds, &used),
        evaluation: Evaluation {
            cv,
            training_size: ds.len(),
            config: *config,
        },
        binnings: ds.binnings.clone(),
        payload: ModelPayload::Rules(rules),
    })
}

pub fn mine_itemsets(ds: &Dataset, config: &MiningConfig, id: impl Into<String>) -> Result<MetaModel> {
    config.validate()?;
    let sets = apriori(&transactions(ds), config.min_support)?;
    let mut used: Vec<String> = sets
        .iter()
        .flat_map(|s| s.items.iter().map(|i| i.attribute.clone()))
        .filter(|a| *a != ds.class.name)
        .collect();
    used.sort();
    used.dedup();
    Ok(MetaModel {
        id: id.into(),
        class_attribute: ds.class.name.clone(),
        class_values: ds.class.values.clone(),
        scope: ModelScope::of(ds, &used),
        evaluation: Evaluation {
            cv: None,
            training_size: ds.len(),
            config: *config,
        },
        binnings: ds.binnings.clone(),
        payload: ModelPayload::Itemsets(sets),
    })
}
