//! Seeded stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::induce_tree;
use super::MiningConfig;
use crate::error::{Error, Result};
use crate::introspection::{Dataset, Instance};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Test-fold indices. Instances are shuffled with `seed`, then dealt
/// class by class round-robin, so each fold's count of any class is within
/// one of every other fold's.
pub fn stratified_folds(dataset: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("cv_folds must be at least 2".into()));
    }
    if folds > dataset.len() {
        return Err(Error::TooManyFolds {
            folds,
            instances: dataset.len(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, seed::FOLDS, &[])));
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in 0..dataset.class.values.len() as u32 {
        for &i in order.iter().filter(|&&i| dataset.instances[i].class == class) {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Cross-validates an arbitrary learner. `fit` trains on the k-1 training
/// folds and returns a predictor of class labels.
pub fn cross_validate_with<F, P>(dataset: &Dataset, folds: usize, seed: u64, fit: F) -> Result<CvResult>
where
    F: Fn(&Dataset) -> Result<P>,
    P: Fn(&Dataset, &Instance) -> Result<String>,
{
    if dataset.classes_present() < 2 {
        return Err(Error::FewerThanTwoClasses);
    }
    let test_folds = stratified_folds(dataset, folds, seed)?;
    let mut in_test = vec![usize::MAX; dataset.len()];
    for (f, idx) in test_folds.iter().enumerate() {
        for &i in idx {
            in_test[i] = f;
        }
    }
    let mut fold_accuracies = Vec::with_capacity(folds);
    for (f, test) in test_folds.iter().enumerate() {
        let train: Vec<usize> = (0..dataset.len()).filter(|&i| in_test[i] != f).collect();
        let model = fit(&dataset.subset(&train))?;
        let mut correct = 0;
        for &i in test {
            let inst = &dataset.instances[i];
            if model(dataset, inst)? == dataset.class_label(inst) {
                correct += 1;
            }
        }
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(CvResult {
        fold_accuracies,
        mean_accuracy,
    })
}

/// Cross-validated accuracy of [`induce_tree`] under `config`.
pub fn cross_validate(dataset: &Dataset, config: &MiningConfig) -> Result<CvResult> {
    config.validate()?;
    cross_validate_with(dataset, config.cv_folds, config.seed, |train| {
        let tree = induce_tree(train, config)?;
        Ok(move |ds: &Dataset, inst: &Instance| tree.classify_instance(ds, inst).map(str::to_owned))
    })
}
