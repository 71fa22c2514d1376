use std::cell::RefCell;
use std::collections::BTreeSet;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Partition of the training ids into labeled and unlabeled pools.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolState {
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
    iteration: usize,
}

impl PoolState {
    /// `labeled` must be a subset of `train`; the rest of `train` is unlabeled.
    pub fn new(train: &[usize], labeled: &[usize]) -> Result<Self> {
        let mut unlabeled: BTreeSet<usize> = train.iter().copied().collect();
        if unlabeled.len() != train.len() {
            return Err(Error::invalid("duplicate train ids"));
        }
        let mut lab = BTreeSet::new();
        for &id in labeled {
            if !unlabeled.remove(&id) {
                return Err(Error::invalid(format!("initial id {id} is not an unlabeled train id")));
            }
            lab.insert(id);
        }
        Ok(PoolState {
            labeled: lab,
            unlabeled,
            iteration: 0,
        })
    }

    pub fn labeled(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn labeled_ids(&self) -> Vec<usize> {
        self.labeled.iter().copied().collect()
    }

    pub fn unlabeled_ids(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn is_labeled(&self, id: usize) -> bool {
        self.labeled.contains(&id)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.labeled.len() as f64 / self.total() as f64
    }

    /// Moves `ids` to the labeled pool and advances the iteration. All ids
    /// are checked before anything moves.
    pub fn oracle_label(&mut self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::invalid("oracle_label needs at least one id"));
        }
        let mut seen = BTreeSet::new();
        for &id in ids {
            if self.labeled.contains(&id) {
                return Err(Error::invalid(format!("id {id} is already labeled")));
            }
            if !self.unlabeled.contains(&id) || !seen.insert(id) {
                return Err(Error::invalid(format!("id {id} is not in the unlabeled pool")));
            }
        }
        for &id in ids {
            self.unlabeled.remove(&id);
            self.labeled.insert(id);
        }
        self.iteration += 1;
        Ok(())
    }
}

/// Simulated annotator. Hands out training labels only for ids in the
/// labeled pool and records every read.
#[derive(Debug)]
pub struct Oracle<'a> {
    dataset: &'a Dataset,
    reads: RefCell<Vec<usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(dataset: &'a Dataset) -> Result<Self> {
        if dataset.labels().is_none() {
            return Err(Error::invalid("active learning needs a labeled dataset"));
        }
        Ok(Oracle {
            dataset,
            reads: RefCell::new(Vec::new()),
        })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    /// Labels of `ids`; fails with [`Error::LabelLeak`] if any is unlabeled.
    pub fn labels(&self, pool: &PoolState, ids: &[usize]) -> Result<Vec<usize>> {
        let all = self.dataset.labels().expect("checked in new");
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            if !pool.is_labeled(id) {
                return Err(Error::LabelLeak(id));
            }
            out.push(all[id]);
        }
        self.reads.borrow_mut().extend_from_slice(ids);
        Ok(out)
    }

    /// Labels of the held-out test split, for evaluation only.
    pub fn test_labels(&self) -> Vec<usize> {
        let all = self.dataset.labels().expect("checked in new");
        self.dataset.test_ids().iter().map(|&i| all[i]).collect()
    }

    /// Every training id whose label has been read so far.
    pub fn reads(&self) -> Vec<usize> {
        self.reads.borrow().clone()
    }
}
