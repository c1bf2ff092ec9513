//! Entropy-gain decision tree induction over symbolic datasets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MiningConfig;
use crate::error::{Error, Result};
use crate::introspection::{symbolic_label, Binning, Dataset, Instance};
use crate::knowledge::InformationState;

/// Shannon entropy in bits of a class histogram.
pub fn entropy_of_counts(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Shannon entropy in bits of a multiset of labels; 0 for no labels.
pub fn entropy<T: Ord>(labels: &[T]) -> f64 {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    entropy_of_counts(&counts.into_values().collect::<Vec<_>>())
}

fn class_counts(ds: &Dataset, rows: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; ds.class.values.len()];
    for &r in rows {
        counts[ds.instances[r].class as usize] += 1;
    }
    counts
}

fn gain_on(ds: &Dataset, rows: &[usize], column: usize) -> f64 {
    let k = ds.class.values.len();
    let mut per_value = vec![vec![0usize; k]; ds.attributes[column].values.len()];
    for &r in rows {
        let inst = &ds.instances[r];
        per_value[inst.values[column] as usize][inst.class as usize] += 1;
    }
    let n = rows.len() as f64;
    let parent = entropy_of_counts(&class_counts(ds, rows));
    let children: f64 = per_value
        .iter()
        .map(|c| {
            let m: usize = c.iter().sum();
            m as f64 / n * entropy_of_counts(c)
        })
        .sum();
    parent - children
}

/// Parent entropy minus the size-weighted entropy of the partition induced
/// by `attribute`.
pub fn info_gain(dataset: &Dataset, attribute: &str) -> Result<f64> {
    if attribute == dataset.class.name {
        return Err(Error::ClassAttributeNotAllowed(attribute.to_owned()));
    }
    let column = dataset
        .column(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_owned()))?;
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let rows: Vec<usize> = (0..dataset.len()).collect();
    Ok(gain_on(dataset, &rows, column))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub value: String,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: String,
        support: usize,
        /// Fraction of the leaf's instances carrying `label`. Empty leaves
        /// inherit their parent's fraction.
        majority: f64,
    },
    Split {
        attribute: String,
        majority: String,
        branches: Vec<Branch>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub class_attribute: String,
    pub class_values: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub binnings: BTreeMap<String, Binning>,
    pub root: Node,
}

/// Majority label, ties broken by class-domain order.
fn majority(counts: &[usize]) -> (usize, usize) {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    (best, counts.get(best).copied().unwrap_or(0))
}

struct Inducer<'a> {
    ds: &'a Dataset,
    config: &'a MiningConfig,
}

impl Inducer<'_> {
    fn build(&self, rows: &[usize], available: &mut Vec<usize>, depth: usize, fallback: (usize, f64)) -> Node {
        let ds = self.ds;
        let counts = class_counts(ds, rows);
        if rows.is_empty() {
            return Node::Leaf {
                label: ds.class.values[fallback.0].clone(),
                support: 0,
                majority: fallback.1,
            };
        }
        let (label, top) = majority(&counts);
        let fraction = top as f64 / rows.len() as f64;
        let pure = top == rows.len();
        if pure || available.is_empty() || depth >= self.config.max_depth || rows.len() < self.config.min_leaf_instances
        {
            return Node::Leaf {
                label: ds.class.values[label].clone(),
                support: rows.len(),
                majority: fraction,
            };
        }

        // strict `>` keeps the earliest attribute on ties
        let mut best = available[0];
        let mut best_gain = f64::NEG_INFINITY;
        for &c in available.iter() {
            let g = gain_on(ds, rows, c);
            if g > best_gain {
                best_gain = g;
                best = c;
            }
        }

        let mut parts = vec![Vec::new(); ds.attributes[best].values.len()];
        for &r in rows {
            parts[ds.instances[r].values[best] as usize].push(r);
        }
        available.retain(|&c| c != best);
        let branches = parts
            .iter()
            .enumerate()
            .map(|(v, part)| Branch {
                value: ds.attributes[best].values[v].clone(),
                node: self.build(part, available, depth + 1, (label, fraction)),
            })
            .collect();
        let pos = available.partition_point(|&c| c < best);
        available.insert(pos, best);
        Node::Split {
            attribute: ds.attributes[best].name.clone(),
            majority: ds.class.values[label].clone(),
            branches,
        }
    }
}

/// Greedy recursive induction. Splits on the attribute with the highest
/// information gain (earliest attribute on ties) and stops on purity, when
/// attributes run out, at `max_depth`, or below `min_leaf_instances`.
pub fn induce_tree(dataset: &Dataset, config: &MiningConfig) -> Result<DecisionTree> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows: Vec<usize> = (0..dataset.len()).collect();
    let mut available: Vec<usize> = (0..dataset.attributes.len()).collect();
    let root = Inducer { ds: dataset, config }.build(&rows, &mut available, 0, (0, 0.0));
    Ok(DecisionTree {
        class_attribute: dataset.class.name.clone(),
        class_values: dataset.class.values.clone(),
        binnings: dataset.binnings.clone(),
        root,
    })
}

impl DecisionTree {
    /// Classifies an information state. A value without a branch falls
    /// back to the split's majority label.
    pub fn classify(&self, instance: &InformationState) -> Result<&str> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return Ok(label),
                Node::Split {
                    attribute,
                    majority,
                    branches,
                } => {
                    let v = instance
                        .get(attribute)
                        .ok_or_else(|| Error::MissingRequiredAttribute(attribute.clone()))?;
                    let label = symbolic_label(&self.binnings, attribute, v);
                    match branches.iter().find(|b| b.value == label) {
                        Some(b) => node = &b.node,
                        None => return Ok(majority),
                    }
                }
            }
        }
    }

    /// Classifies a coded instance of a dataset with the same columns.
    pub fn classify_instance(&self, ds: &Dataset, inst: &Instance) -> Result<&str> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return Ok(label),
                Node::Split {
                    attribute,
                    majority,
                    branches,
                } => {
                    let c = ds
                        .column(attribute)
                        .ok_or_else(|| Error::MissingRequiredAttribute(attribute.clone()))?;
                    let label = ds.value_label(inst, c);
                    match branches.iter().find(|b| b.value == label) {
                        Some(b) => node = &b.node,
                        None => return Ok(majority),
                    }
                }
            }
        }
    }

    /// Attributes tested anywhere in the tree, in first-visit order.
    pub fn attributes_used(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            if let Node::Split { attribute, branches, .. } = n {
                if !out.contains(attribute) {
                    out.push(attribute.clone());
                }
                for b in branches {
                    walk(&b.node, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { branches, .. } => 1 + branches.iter().map(|b| d(&b.node)).max().unwrap_or(0),
            }
        }
        d(&self.root)
    }

    /// Leaves with their root-to-leaf paths of `(attribute, value)` tests.
    pub fn paths(&self) -> Vec<(Vec<(String, String)>, &Node)> {
        fn walk<'a>(n: &'a Node, path: &mut Vec<(String, String)>, out: &mut Vec<(Vec<(String, String)>, &'a Node)>) {
            match n {
                Node::Leaf { .. } => out.push((path.clone(), n)),
                Node::Split { attribute, branches, .. } => {
                    for b in branches {
                        path.push((attribute.clone(), b.value.clone()));
                        walk(&b.node, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    pub fn training_accuracy(&self, ds: &Dataset) -> Result<f64> {
        if ds.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for inst in &ds.instances {
            if self.classify_instance(ds, inst)? == ds.class_label(inst) {
                correct += 1;
            }
        }
        Ok(correct as f64 / ds.len() as f64)
    }
}
