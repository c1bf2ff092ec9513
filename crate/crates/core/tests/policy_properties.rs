use std::collections::BTreeMap;

use metacrisp::introspection::Dataset;
use metacrisp::knowledge::{InformationState, Value};
use metacrisp::mining::{induce_tree, Item, MiningConfig};
use metacrisp::policy::{compile_policy, tree_to_rules, ControlAttribute, Origin, Rule, RuleSet};
use proptest::prelude::*;

const VALUES: [&str; 3] = ["a", "b", "c"];
const NAMES: [&str; 4] = ["p", "q", "r", "s"];

fn control() -> ControlAttribute {
    ControlAttribute {
        name: "strategy".into(),
        values: vec!["FAST".into(), "CAREFUL".into()],
    }
}

fn dataset(arity: &[usize], rows: &[(Vec<usize>, usize)]) -> Dataset {
    let attrs: Vec<(&str, &[&str])> = arity.iter().enumerate().map(|(i, &k)| (NAMES[i], &VALUES[..k])).collect();
    let rows: Vec<(Vec<&str>, &str)> = rows
        .iter()
        .map(|(vs, c)| {
            let vals = vs.iter().zip(arity).map(|(v, k)| VALUES[v % k]).collect();
            (vals, ["FAST", "CAREFUL"][*c])
        })
        .collect();
    Dataset::from_rows(&attrs, ("strategy", &["FAST", "CAREFUL"]), &rows).unwrap()
}

/// Every complete instance over the attributes' domains.
fn grid(arity: &[usize]) -> Vec<InformationState> {
    let mut states = vec![InformationState::new(0)];
    for (i, &k) in arity.iter().enumerate() {
        states = states
            .into_iter()
            .flat_map(|s| (0..k).map(move |v| s.clone().with(NAMES[i], Value::cat(VALUES[v]))))
            .collect();
    }
    states
}

/// (attribute arities, labelled rows, max depth, min leaf size)
type Case = (Vec<usize>, Vec<(Vec<usize>, usize)>, usize, usize);

fn case() -> impl Strategy<Value = Case> {
    prop::collection::vec(2usize..=3, 1..=4).prop_flat_map(|arity| {
        let n = arity.len();
        let rows = prop::collection::vec((prop::collection::vec(0usize..3, n), 0usize..2), 1..=40);
        (Just(arity), rows, 1usize..=4, 1usize..=3)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compiled_tree_agrees_with_tree_on_full_grid((arity, rows, depth, leaf) in case()) {
        let ds = dataset(&arity, &rows);
        let cfg = MiningConfig { max_depth: depth, min_leaf_instances: leaf, ..MiningConfig::default() };
        let tree = induce_tree(&ds, &cfg).unwrap();
        let policy = compile_policy(tree_to_rules(&tree, &control()).unwrap(), &control(), "FAST").unwrap();
        for s in grid(&arity) {
            prop_assert_eq!(policy.decide(&s), tree.classify(&s).unwrap());
            // the fallback is never needed on complete instances
            prop_assert!(policy.matching_rule(&s).is_some());
        }
    }

    #[test]
    fn rule_order_is_strict_and_input_order_free(
        specs in prop::collection::vec((prop::collection::vec((0usize..4, 0usize..3), 0..3), 0usize..2, 1u32..=4), 1..12),
        rotate in 0usize..12,
    ) {
        let rules: Vec<Rule> = specs
            .iter()
            .map(|(conds, a, c)| {
                let mut conds: Vec<Item> = conds.iter().map(|&(n, v)| Item::new(NAMES[n], VALUES[v])).collect();
                conds.sort();
                conds.dedup_by(|x, y| x.attribute == y.attribute);
                Rule::new(conds, Item::new("strategy", ["FAST", "CAREFUL"][*a]), f64::from(*c) / 4.0, Origin::Manual).unwrap()
            })
            .collect();
        let mut rotated = rules.clone();
        rotated.rotate_left(rotate % rules.len());
        let a = RuleSet::new(rules, BTreeMap::new());
        let b = RuleSet::new(rotated, BTreeMap::new());
        prop_assert_eq!(&a, &b);
        for w in a.rules().windows(2) {
            prop_assert_eq!(w[0].priority_cmp(&w[1]), std::cmp::Ordering::Less);
        }
        prop_assert!(RuleSet::from_ordered(a.rules().to_vec(), BTreeMap::new()).is_ok());

        // total and pure on arbitrary (even empty or unrelated) states
        let p = compile_policy(a, &control(), "CAREFUL").unwrap();
        for s in grid(&[3, 3]).into_iter().chain([InformationState::new(0), InformationState::new(1).with("zzz", Value::Num(1.0))]) {
            let first = p.decide(&s).to_owned();
            prop_assert!(control().values.contains(&first));
            prop_assert_eq!(p.decide(&s), first.as_str());
        }
    }
}
