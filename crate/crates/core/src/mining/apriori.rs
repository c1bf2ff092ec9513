//! Level-wise frequent itemset mining and single-consequent rule derivation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::introspection::Dataset;

/// An `attribute=value` proposition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Item {
    pub attribute: String,
    pub value: String,
}

impl Item {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attribute, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequentItemset<T> {
    /// Sorted, duplicate-free.
    pub items: Vec<T>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule<T> {
    pub antecedent: Vec<T>,
    pub consequent: T,
    pub support: f64,
    pub confidence: f64,
}

impl<T: fmt::Display> AssociationRule<T> {
    pub fn text(&self) -> String {
        let lhs: Vec<String> = self.antecedent.iter().map(ToString::to_string).collect();
        format!("{} => {}", lhs.join(" & "), self.consequent)
    }
}

fn is_subset<T: Ord>(small: &[T], big: &[T]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.by_ref().any(|y| y == x))
}

fn meets(count: usize, n: usize, min_support: f64) -> bool {
    count as f64 / n as f64 >= min_support
}

/// Every itemset whose support (fraction of transactions containing it)
/// is at least `min_support`. Output is ordered by size, then items.
pub fn apriori<T: Ord + Clone>(transactions: &[Vec<T>], min_support: f64) -> Result<Vec<FrequentItemset<T>>> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidConfig(format!("min_support {min_support} outside (0, 1]")));
    }
    if transactions.is_empty() {
        return Err(Error::NoTransactions);
    }
    let n = transactions.len();
    let txs: Vec<Vec<T>> = transactions
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.sort();
            t.dedup();
            t
        })
        .collect();

    let mut singles: BTreeMap<&T, usize> = BTreeMap::new();
    for t in &txs {
        for item in t {
            *singles.entry(item).or_default() += 1;
        }
    }
    let mut level: Vec<FrequentItemset<T>> = singles
        .into_iter()
        .filter(|&(_, c)| meets(c, n, min_support))
        .map(|(i, c)| FrequentItemset {
            items: vec![i.clone()],
            count: c,
        })
        .collect();

    let mut out = Vec::new();
    while !level.is_empty() {
        let known: BTreeSet<&[T]> = level.iter().map(|f| f.items.as_slice()).collect();
        let mut candidates = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                let k = a.items.len();
                if a.items[..k - 1] != b.items[..k - 1] {
                    // level is sorted, so no later b shares the prefix
                    break;
                }
                let mut cand = a.items.clone();
                cand.push(b.items[k - 1].clone());
                // every (k)-subset must itself be frequent
                let pruned = (0..cand.len()).all(|skip| {
                    let sub: Vec<T> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, x)| x.clone())
                        .collect();
                    known.contains(sub.as_slice())
                });
                if pruned {
                    candidates.push(cand);
                }
            }
        }
        let next: Vec<FrequentItemset<T>> = candidates
            .into_iter()
            .filter_map(|items| {
                let count = txs.iter().filter(|t| is_subset(&items, t)).count();
                meets(count, n, min_support).then_some(FrequentItemset { items, count })
            })
            .collect();
        out.append(&mut level);
        level = next;
    }
    Ok(out)
}

/// Rules `itemset \ {c} => c` for every frequent itemset of size two or
/// more and every member `c`, kept when confidence reaches
/// `min_confidence`. Sorted by confidence desc, support desc, rule text.
pub fn derive_rules<T: Ord + Clone + fmt::Display>(
    frequent: &[FrequentItemset<T>],
    min_confidence: f64,
    n_transactions: usize,
) -> Vec<AssociationRule<T>> {
    let counts: BTreeMap<&[T], usize> = frequent.iter().map(|f| (f.items.as_slice(), f.count)).collect();
    let mut rules = Vec::new();
    for f in frequent.iter().filter(|f| f.items.len() >= 2) {
        for (i, consequent) in f.items.iter().enumerate() {
            let antecedent: Vec<T> = f
                .items
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, x)| x.clone())
                .collect();
            let Some(&a_count) = counts.get(antecedent.as_slice()) else {
                continue;
            };
            let confidence = f.count as f64 / a_count as f64;
            if confidence >= min_confidence {
                rules.push(AssociationRule {
                    antecedent,
                    consequent: consequent.clone(),
                    support: f.count as f64 / n_transactions as f64,
                    confidence,
                });
            }
        }
    }
    let mut keyed: Vec<(String, AssociationRule<T>)> = rules.into_iter().map(|r| (r.text(), r)).collect();
    keyed.sort_by(|(ta, a), (tb, b)| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.total_cmp(&a.support))
            .then_with(|| ta.cmp(tb))
    });
    keyed.into_iter().map(|(_, r)| r).collect()
}

/// One transaction per instance: every `attribute=value` pair, class included.
pub fn transactions(ds: &Dataset) -> Vec<Vec<Item>> {
    ds.instances
        .iter()
        .map(|inst| {
            let mut t: Vec<Item> = ds
                .attributes
                .iter()
                .enumerate()
                .map(|(c, a)| Item::new(a.name.clone(), ds.value_label(inst, c)))
                .collect();
            t.push(Item::new(ds.class.name.clone(), ds.class_label(inst)));
            t.sort();
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Vec<Vec<char>> {
        vec![vec!['a', 'b'], vec!['a', 'c'], vec!['a', 'b', 'c']]
    }

    fn set(items: &[char], count: usize) -> FrequentItemset<char> {
        FrequentItemset { items: items.to_vec(), count }
    }

    #[test]
    fn two_thirds_support() {
        let got = apriori(&example(), 2.0 / 3.0).unwrap();
        // brute force over all 7 non-empty subsets of {a,b,c}: abc has count 1
        assert_eq!(
            got,
            vec![set(&['a'], 3), set(&['b'], 2), set(&['c'], 2), set(&['a', 'b'], 2), set(&['a', 'c'], 2)]
        );
    }

    #[test]
    fn full_support_thresholds() {
        assert!(apriori(&[vec!['a'], vec!['b']], 1.0).unwrap().is_empty());
        assert_eq!(apriori(&[vec!['a']], 1.0).unwrap(), vec![set(&['a'], 1)]);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(apriori::<char>(&[], 0.5), Err(Error::NoTransactions)));
        assert!(matches!(apriori(&example(), 0.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(apriori(&example(), 1.5), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rule_confidences() {
        let freq = apriori(&example(), 2.0 / 3.0).unwrap();
        let rules = derive_rules(&freq, 0.0, 3);
        let find = |a: char, c: char| rules.iter().find(|r| r.antecedent == vec![a] && r.consequent == c).unwrap();
        assert_eq!(find('b', 'a').confidence, 1.0);
        assert_eq!(find('a', 'b').confidence, 2.0 / 3.0);

        let strict = derive_rules(&freq, 1.0, 3);
        assert!(strict.iter().all(|r| r.confidence == 1.0));
        assert!(!strict.iter().any(|r| r.antecedent == vec!['a']));
        assert!(derive_rules::<char>(&[], 0.5, 3).is_empty());
    }

    #[test]
    fn rules_sorted_by_priority() {
        let freq = apriori(&example(), 1.0 / 3.0).unwrap();
        let rules = derive_rules(&freq, 0.0, 3);
        assert!(!rules.is_empty());
        for w in rules.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            assert!(
                x.confidence > y.confidence
                    || (x.confidence == y.confidence && x.support > y.support)
                    || (x.confidence == y.confidence && x.support == y.support && x.text() < y.text())
            );
        }
    }
}
