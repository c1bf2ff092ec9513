//! Operationalisation: compiling meta-models into ordered, total
//! condition-action policies and merging them with the incumbent policy.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::introspection::{symbolic_label, Binning};
use crate::knowledge::{InformationState, Schema};
use crate::mining::{AssociationRule, DecisionTree, Item, Node};
use crate::world::Controller;

/// The attribute a policy sets, with its admissible values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlAttribute {
    pub name: String,
    pub values: Vec<String>,
}

impl ControlAttribute {
    pub fn from_schema(schema: &Schema) -> Self {
        Self {
            name: schema.class_attribute().to_owned(),
            values: schema.class_values(),
        }
    }

    fn check(&self, value: &str) -> Result<()> {
        if self.values.iter().any(|v| v == value) {
            Ok(())
        } else {
            Err(Error::OutOfDomainValue {
                attribute: self.name.clone(),
                value: value.to_owned(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Tree,
    Association,
    Default,
    Manual,
}

/// `conditions => attribute=value`, conditions conjunctive and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Item>,
    pub action: Item,
    pub confidence: f64,
    pub origin: Origin,
}

impl Rule {
    pub fn new(mut conditions: Vec<Item>, action: Item, confidence: f64, origin: Origin) -> Result<Self> {
        if !(confidence > 0.0 && confidence <= 1.0) {
            return Err(Error::InvalidConfig(format!("rule confidence {confidence} outside (0, 1]")));
        }
        if conditions.iter().any(|c| c.attribute == action.attribute) {
            return Err(Error::InvalidConfig(format!(
                "rule conditions mention the control attribute `{}`",
                action.attribute
            )));
        }
        conditions.sort();
        conditions.dedup();
        Ok(Self {
            conditions,
            action,
            confidence,
            origin,
        })
    }

    /// A user-authored rule.
    pub fn manual(conditions: Vec<Item>, action: Item, confidence: f64) -> Result<Self> {
        Self::new(conditions, action, confidence, Origin::Manual)
    }

    pub fn specificity(&self) -> usize {
        self.conditions.len()
    }

    pub fn text(&self) -> String {
        let lhs: Vec<String> = self.conditions.iter().map(ToString::to_string).collect();
        format!("{} => {}", lhs.join(" & "), self.action)
    }

    /// Priority order: confidence desc, specificity desc, text asc.
    pub fn priority_cmp(&self, other: &Rule) -> Ordering {
        other
            .confidence
            .total_cmp(&self.confidence)
            .then(other.specificity().cmp(&self.specificity()))
            .then_with(|| self.text().cmp(&other.text()))
    }

    fn same_behaviour(&self, other: &Rule) -> bool {
        self.conditions == other.conditions && self.action == other.action
    }

    fn holds(&self, state: &InformationState, binnings: &BTreeMap<String, Binning>) -> bool {
        self.conditions.iter().all(|c| {
            state
                .get(&c.attribute)
                .is_some_and(|v| symbolic_label(binnings, &c.attribute, v) == c.value)
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{:.3}, {:?}]", self.text(), self.confidence, self.origin)
    }
}

#[derive(Deserialize)]
struct RawRuleSet {
    rules: Vec<Rule>,
    #[serde(default)]
    binnings: BTreeMap<String, Binning>,
}

/// Rules in strict priority order, without duplicate (conditions, action)
/// pairs. `binnings` discretise numeric state values before matching.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawRuleSet")]
pub struct RuleSet {
    rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    binnings: BTreeMap<String, Binning>,
}

impl TryFrom<RawRuleSet> for RuleSet {
    type Error = Error;

    fn try_from(raw: RawRuleSet) -> Result<Self> {
        Self::from_ordered(raw.rules, raw.binnings)
    }
}

impl RuleSet {
    /// Sorts into priority order, keeping the higher-ranked copy of duplicates.
    pub fn new(mut rules: Vec<Rule>, binnings: BTreeMap<String, Binning>) -> Self {
        rules.sort_by(Rule::priority_cmp);
        let mut kept: Vec<Rule> = Vec::with_capacity(rules.len());
        for r in rules {
            if !kept.iter().any(|k| k.same_behaviour(&r)) {
                kept.push(r);
            }
        }
        Self { rules: kept, binnings }
    }

    /// Accepts rules that are already in strict priority order.
    pub fn from_ordered(rules: Vec<Rule>, binnings: BTreeMap<String, Binning>) -> Result<Self> {
        let set = Self { rules, binnings };
        set.check_order()?;
        Ok(set)
    }

    fn check_order(&self) -> Result<()> {
        for (i, w) in self.rules.windows(2).enumerate() {
            if w[0].priority_cmp(&w[1]) != Ordering::Less {
                return Err(Error::RuleOrder(i + 1));
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            if self.rules[..i].iter().any(|k| k.same_behaviour(r)) {
                return Err(Error::RuleOrder(i));
            }
        }
        Ok(())
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn binnings(&self) -> &BTreeMap<String, Binning> {
        &self.binnings
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Concatenates two sets and re-sorts them as one.
    pub fn merged(self, other: RuleSet) -> RuleSet {
        let mut binnings = other.binnings;
        binnings.extend(self.binnings);
        let mut rules = self.rules;
        rules.extend(other.rules);
        RuleSet::new(rules, binnings)
    }

    fn first_match(&self, state: &InformationState) -> Option<&Rule> {
        self.rules.iter().find(|r| r.holds(state, &self.binnings))
    }
}

/// One rule per leaf: the root-to-leaf tests as conditions, the leaf label
/// as action and the leaf's majority fraction as confidence.
pub fn tree_to_rules(tree: &DecisionTree, control: &ControlAttribute) -> Result<RuleSet> {
    if tree.class_attribute != control.name {
        return Err(Error::NotControlAttribute {
            expected: control.name.clone(),
            found: tree.class_attribute.clone(),
        });
    }
    let mut rules = Vec::new();
    for (path, leaf) in tree.paths() {
        let Node::Leaf { label, majority, .. } = leaf else { unreachable!("paths end in leaves") };
        control.check(label)?;
        let conditions = path.into_iter().map(|(a, v)| Item::new(a, v)).collect();
        // empty-branch leaves may carry 0; clamp into the valid range
        let confidence = majority.clamp(f64::MIN_POSITIVE, 1.0);
        rules.push(Rule::new(conditions, Item::new(control.name.clone(), label.clone()), confidence, Origin::Tree)?);
    }
    Ok(RuleSet::new(rules, tree.binnings.clone()))
}

/// Keeps the decision-oriented rules: those that set the control attribute
/// with confidence at least `min_confidence`.
pub fn filter_association_rules(
    rules: &[AssociationRule<Item>],
    schema: &Schema,
    min_confidence: f64,
    binnings: &BTreeMap<String, Binning>,
) -> RuleSet {
    let control = schema.class_attribute();
    let kept = rules
        .iter()
        .filter(|r| r.consequent.attribute == control && r.confidence >= min_confidence)
        .filter_map(|r| Rule::new(r.antecedent.clone(), r.consequent.clone(), r.confidence, Origin::Association).ok())
        .collect();
    RuleSet::new(kept, binnings.clone())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub cycle: u32,
    pub sources: Vec<String>,
}

/// An executable, total policy. Tiers are consulted in order, each in its
/// own priority order; the first rule whose conditions all hold fires, and
/// `default_action` answers when none does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub control: ControlAttribute,
    pub tiers: Vec<RuleSet>,
    pub default_action: String,
    pub provenance: Provenance,
}

/// Wraps a rule set into a single-tier policy.
pub fn compile_policy(ruleset: RuleSet, control: &ControlAttribute, default_action: &str) -> Result<Policy> {
    control.check(default_action)?;
    ruleset.check_order()?;
    for r in ruleset.rules() {
        if r.action.attribute != control.name {
            return Err(Error::NotControlAttribute {
                expected: control.name.clone(),
                found: r.action.attribute.clone(),
            });
        }
        control.check(&r.action.value)?;
    }
    let tiers = if ruleset.is_empty() { Vec::new() } else { vec![ruleset] };
    Ok(Policy {
        control: control.clone(),
        tiers,
        default_action: default_action.to_owned(),
        provenance: Provenance::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationMode {
    /// Candidate rules rank before the incumbent's.
    Override,
    /// Incumbent rules rank before the candidate's.
    Append,
    /// The candidate alone.
    Replace,
}

/// Combines an incumbent and a candidate policy. Duplicate
/// (conditions, action) pairs keep only the higher-ranked copy.
pub fn integrate_policies(incumbent: &Policy, candidate: &Policy, mode: IntegrationMode) -> Result<Policy> {
    if incumbent.control != candidate.control {
        return Err(Error::ControlMismatch(
            incumbent.control.name.clone(),
            candidate.control.name.clone(),
        ));
    }
    let (first, second) = match mode {
        IntegrationMode::Replace => return Ok(candidate.clone()),
        IntegrationMode::Override => (candidate, incumbent),
        IntegrationMode::Append => (incumbent, candidate),
    };
    let mut tiers: Vec<RuleSet> = Vec::new();
    for tier in first.tiers.iter().chain(&second.tiers) {
        let rules: Vec<Rule> = tier
            .rules
            .iter()
            .filter(|r| !tiers.iter().flat_map(|t| &t.rules).any(|k| k.same_behaviour(r)))
            .cloned()
            .collect();
        if !rules.is_empty() {
            tiers.push(RuleSet {
                rules,
                binnings: tier.binnings.clone(),
            });
        }
    }
    let mut sources = candidate.provenance.sources.clone();
    for s in &incumbent.provenance.sources {
        if !sources.contains(s) {
            sources.push(s.clone());
        }
    }
    Ok(Policy {
        control: incumbent.control.clone(),
        tiers,
        default_action: incumbent.default_action.clone(),
        provenance: Provenance {
            cycle: candidate.provenance.cycle,
            sources,
        },
    })
}

impl Policy {
    /// Pre-learning baseline: one unconditional rule selecting the first
    /// control value.
    pub fn default_for(schema: &Schema) -> Self {
        let control = ControlAttribute::from_schema(schema);
        let first = control.values[0].clone();
        let rule = Rule::new(Vec::new(), Item::new(control.name.clone(), first.clone()), 1.0, Origin::Default)
            .expect("unconditional rule is valid");
        Policy {
            tiers: vec![RuleSet::new(vec![rule], BTreeMap::new())],
            default_action: first,
            control,
            provenance: Provenance {
                cycle: 0,
                sources: vec!["default".into()],
            },
        }
    }

    pub fn decide(&self, state: &InformationState) -> &str {
        self.matching_rule(state)
            .map_or(self.default_action.as_str(), |r| r.action.value.as_str())
    }

    /// The rule that fires for `state`, if any.
    pub fn matching_rule(&self, state: &InformationState) -> Option<&Rule> {
        self.tiers.iter().find_map(|t| t.first_match(state))
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.tiers.iter().flat_map(|t| t.rules.iter())
    }

    pub fn to_json(&self) -> String {
        crate::to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Policy = serde_json::from_str(text)?;
        p.control.check(&p.default_action)?;
        Ok(p)
    }

    /// Short content hash of the canonical serialisation.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

impl Controller for Policy {
    fn choose(&self, state: &InformationState) -> Cow<'_, str> {
        Cow::Borrowed(self.decide(state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::introspection::Dataset;
    use crate::knowledge::{define_schema, AttributeDef, Domain, Scope, Value};
    use crate::mining::{induce_tree, Branch, MiningConfig};

    fn control() -> ControlAttribute {
        ControlAttribute {
            name: "strategy".into(),
            values: vec!["FAST".into(), "CAREFUL".into()],
        }
    }

    fn act(v: &str) -> Item {
        Item::new("strategy", v)
    }

    fn leaf(label: &str) -> Node {
        Node::Leaf {
            label: label.into(),
            support: 1,
            majority: 1.0,
        }
    }

    fn tree(root: Node) -> DecisionTree {
        DecisionTree {
            class_attribute: "strategy".into(),
            class_values: control().values,
            binnings: BTreeMap::new(),
            root,
        }
    }

    fn state(pairs: &[(&str, &str)]) -> InformationState {
        pairs
            .iter()
            .fold(InformationState::new(0), |s, (k, v)| s.with(*k, Value::cat(*v)))
    }

    #[test]
    fn single_leaf_gives_unconditional_rule() {
        let rs = tree_to_rules(&tree(leaf("CAREFUL")), &control()).unwrap();
        assert_eq!(rs.len(), 1);
        assert!(rs.rules()[0].conditions.is_empty());
        assert_eq!(rs.rules()[0].action, act("CAREFUL"));
    }

    #[test]
    fn depth_one_tree_enumerates_paths() {
        let t = tree(Node::Split {
            attribute: "a".into(),
            majority: "FAST".into(),
            branches: vec![
                Branch { value: "x".into(), node: leaf("FAST") },
                Branch { value: "y".into(), node: leaf("CAREFUL") },
            ],
        });
        let texts: Vec<String> = tree_to_rules(&t, &control()).unwrap().rules().iter().map(Rule::text).collect();
        assert_eq!(texts, vec!["a=x => strategy=FAST", "a=y => strategy=CAREFUL"]);
    }

    #[test]
    fn xor_tree_has_four_two_literal_rules() {
        let ds = Dataset::from_rows(
            &[("p", &["0", "1"]), ("q", &["0", "1"])],
            ("strategy", &["FAST", "CAREFUL"]),
            &[
                (vec!["0", "0"], "FAST"),
                (vec!["0", "1"], "CAREFUL"),
                (vec!["1", "0"], "CAREFUL"),
                (vec!["1", "1"], "FAST"),
            ],
        )
        .unwrap();
        let cfg = MiningConfig {
            min_leaf_instances: 1,
            ..MiningConfig::default()
        };
        let t = induce_tree(&ds, &cfg).unwrap();
        let rs = tree_to_rules(&t, &control()).unwrap();
        assert_eq!(rs.len(), 4);
        assert!(rs.rules().iter().all(|r| r.specificity() == 2));

        // the compiled policy agrees with the tree on the whole 2x2 grid
        let policy = compile_policy(rs, &control(), "FAST").unwrap();
        for p in ["0", "1"] {
            for q in ["0", "1"] {
                let s = state(&[("p", p), ("q", q)]);
                assert_eq!(policy.decide(&s), t.classify(&s).unwrap());
            }
        }
    }

    #[test]
    fn tree_over_other_attribute_is_rejected() {
        let mut t = tree(leaf("success"));
        t.class_attribute = "outcome".into();
        assert!(matches!(tree_to_rules(&t, &control()), Err(Error::NotControlAttribute { .. })));
    }

    fn schema() -> Schema {
        define_schema(
            vec![
                AttributeDef::new("terrain", Scope::World, Domain::categorical(["sand", "ice"])),
                AttributeDef::new("strategy", Scope::Modeller, Domain::categorical(["FAST", "CAREFUL"])),
                AttributeDef::new("outcome", Scope::Modeller, Domain::categorical(["success", "failure"])),
            ],
            "strategy",
        )
        .unwrap()
    }

    fn assoc(lhs: (&str, &str), rhs: (&str, &str), confidence: f64) -> AssociationRule<Item> {
        AssociationRule {
            antecedent: vec![Item::new(lhs.0, lhs.1)],
            consequent: Item::new(rhs.0, rhs.1),
            support: 0.3,
            confidence,
        }
    }

    #[test]
    fn association_filter() {
        let s = schema();
        let none = BTreeMap::new();
        let kept = filter_association_rules(&[assoc(("terrain", "sand"), ("strategy", "CAREFUL"), 0.9)], &s, 0.8, &none);
        assert_eq!(kept.len(), 1);
        let dropped = filter_association_rules(&[assoc(("strategy", "FAST"), ("outcome", "success"), 0.95)], &s, 0.8, &none);
        assert!(dropped.is_empty());
        let weak = filter_association_rules(&[assoc(("terrain", "ice"), ("strategy", "FAST"), 0.5)], &s, 0.8, &none);
        assert!(weak.is_empty());
    }

    #[test]
    fn empty_policy_is_its_default() {
        let p = compile_policy(RuleSet::default(), &control(), "CAREFUL").unwrap();
        assert_eq!(p.decide(&state(&[("terrain", "sand")])), "CAREFUL");
        assert_eq!(p.decide(&InformationState::new(0)), "CAREFUL");
        assert!(compile_policy(RuleSet::default(), &control(), "TURBO").is_err());
    }

    #[test]
    fn higher_confidence_fires_first() {
        let rules = vec![
            Rule::new(vec![Item::new("terrain", "sand")], act("FAST"), 0.7, Origin::Association).unwrap(),
            Rule::new(vec![Item::new("terrain", "sand")], act("CAREFUL"), 0.9, Origin::Association).unwrap(),
        ];
        let p = compile_policy(RuleSet::new(rules, BTreeMap::new()), &control(), "FAST").unwrap();
        assert_eq!(p.decide(&state(&[("terrain", "sand")])), "CAREFUL");
    }

    #[test]
    fn out_of_order_rules_are_rejected() {
        let rules = vec![
            Rule::new(vec![], act("FAST"), 0.5, Origin::Manual).unwrap(),
            Rule::new(vec![], act("CAREFUL"), 0.9, Origin::Manual).unwrap(),
        ];
        assert!(matches!(RuleSet::from_ordered(rules.clone(), BTreeMap::new()), Err(Error::RuleOrder(1))));
        let sorted = RuleSet::new(rules, BTreeMap::new());
        assert_eq!(sorted.rules()[0].confidence, 0.9);
        assert!(RuleSet::from_ordered(sorted.rules().to_vec(), BTreeMap::new()).is_ok());
    }

    #[test]
    fn ordering_is_confidence_then_specificity_then_text() {
        let a = Rule::new(vec![Item::new("t", "x")], act("FAST"), 0.8, Origin::Tree).unwrap();
        let b = Rule::new(vec![Item::new("t", "x"), Item::new("u", "y")], act("FAST"), 0.8, Origin::Tree).unwrap();
        let c = Rule::new(vec![Item::new("t", "y")], act("FAST"), 0.8, Origin::Tree).unwrap();
        let rs = RuleSet::new(vec![c.clone(), a.clone(), b.clone()], BTreeMap::new());
        assert_eq!(rs.rules(), &[b, a, c]);
    }

    fn single(rule: Rule, cycle: u32) -> Policy {
        let mut p = compile_policy(RuleSet::new(vec![rule], BTreeMap::new()), &control(), "FAST").unwrap();
        p.provenance = Provenance {
            cycle,
            sources: vec![format!("c{cycle}")],
        };
        p
    }

    #[test]
    fn integration_modes() {
        let sand = vec![Item::new("terrain", "sand")];
        let incumbent = single(Rule::new(sand.clone(), act("FAST"), 0.9, Origin::Tree).unwrap(), 1);
        let candidate = single(Rule::new(sand, act("CAREFUL"), 0.6, Origin::Tree).unwrap(), 2);
        let s = state(&[("terrain", "sand")]);

        let replaced = integrate_policies(&incumbent, &candidate, IntegrationMode::Replace).unwrap();
        assert_eq!(replaced, candidate);

        let over = integrate_policies(&incumbent, &candidate, IntegrationMode::Override).unwrap();
        assert_eq!(over.decide(&s), "CAREFUL");
        assert_eq!(over.default_action, incumbent.default_action);

        let app = integrate_policies(&incumbent, &candidate, IntegrationMode::Append).unwrap();
        assert_eq!(app.decide(&s), "FAST");
    }

    #[test]
    fn integration_deduplicates_and_checks_control() {
        let r = Rule::new(vec![Item::new("terrain", "ice")], act("CAREFUL"), 0.8, Origin::Tree).unwrap();
        let a = single(r.clone(), 1);
        let b = single(r, 2);
        let merged = integrate_policies(&a, &b, IntegrationMode::Override).unwrap();
        assert_eq!(merged.rules().count(), 1);

        let mut other = b.clone();
        other.control.name = "speed".into();
        assert!(matches!(integrate_policies(&a, &other, IntegrationMode::Append), Err(Error::ControlMismatch(..))));
    }

    #[test]
    fn default_policy_picks_first_strategy() {
        let p = Policy::default_for(&schema());
        assert_eq!(p.decide(&state(&[("terrain", "ice")])), "FAST");
        assert_eq!(p.rules().count(), 1);
        assert_eq!(p.rules().next().unwrap().origin, Origin::Default);
    }

    #[test]
    fn numeric_conditions_use_recorded_bins() {
        let bins = BTreeMap::from([("steps".to_owned(), Binning { min: 0.0, max: 10.0, bins: 2 })]);
        let r = Rule::new(vec![Item::new("steps", "bin_1")], act("CAREFUL"), 0.9, Origin::Tree).unwrap();
        let p = compile_policy(RuleSet::new(vec![r], bins), &control(), "FAST").unwrap();
        assert_eq!(p.decide(&InformationState::new(0).with("steps", Value::Num(7.0))), "CAREFUL");
        assert_eq!(p.decide(&InformationState::new(0).with("steps", Value::Num(2.0))), "FAST");
    }

    #[test]
    fn policy_file_roundtrip() {
        let p = Policy::default_for(&schema());
        let text = p.to_json();
        let back = Policy::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.id(), p.id());
    }
}
