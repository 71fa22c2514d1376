use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pool::PoolState;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kcenter::{farthest_first, EmbeddingSet};
use crate::nets::{SraalParams, TargetParams};
use crate::oui::{entropy_indicator, Indicator, ProbVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Sraal,
    /// Unlabeled samples keep the fixed state 1.
    SraalNoOui,
    /// Label-decoder weight forced to zero.
    SraalNoStl,
    SraalEntropyIndicator,
    SraalSdIndicator,
    Random,
    EntropyTopk,
    KcenterCoreset,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Sraal,
        Strategy::SraalNoOui,
        Strategy::SraalNoStl,
        Strategy::SraalEntropyIndicator,
        Strategy::SraalSdIndicator,
        Strategy::Random,
        Strategy::EntropyTopk,
        Strategy::KcenterCoreset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Sraal => "sraal",
            Strategy::SraalNoOui => "sraal-no-oui",
            Strategy::SraalNoStl => "sraal-no-stl",
            Strategy::SraalEntropyIndicator => "sraal-entropy-indicator",
            Strategy::SraalSdIndicator => "sraal-sd-indicator",
            Strategy::Random => "random",
            Strategy::EntropyTopk => "entropy-topk",
            Strategy::KcenterCoreset => "kcenter-coreset",
        }
    }

    /// Strategies that train the generator and discriminator.
    pub fn is_adversarial(self) -> bool {
        matches!(
            self,
            Strategy::Sraal
                | Strategy::SraalNoOui
                | Strategy::SraalNoStl
                | Strategy::SraalEntropyIndicator
                | Strategy::SraalSdIndicator
        )
    }

    /// Indicator used to relabel unlabeled states; `None` means state 1.
    pub fn indicator(self) -> Option<Indicator> {
        match self {
            Strategy::Sraal | Strategy::SraalNoStl => Some(Indicator::Oui),
            Strategy::SraalEntropyIndicator => Some(Indicator::Entropy),
            Strategy::SraalSdIndicator => Some(Indicator::Sd),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Models available to a selection step.
#[derive(Clone, Copy, Debug)]
pub struct Models<'a> {
    pub target: &'a TargetParams,
    pub sraal: Option<&'a SraalParams>,
}

/// `k` ids ordered by score (ascending or descending), ties by smallest id.
pub fn top_k(ids: &[usize], scores: &[f64], k: usize, ascending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        let c = if ascending { c } else { c.reverse() };
        c.then(ids[a].cmp(&ids[b]))
    });
    order.into_iter().take(k).map(|i| ids[i]).collect()
}

/// The `k` ids with the highest normalized prediction entropy.
pub fn entropy_topk(table: &[(usize, ProbVector)], k: usize) -> Vec<usize> {
    let ids: Vec<usize> = table.iter().map(|(id, _)| *id).collect();
    let scores: Vec<f64> = table.iter().map(|(_, v)| entropy_indicator(v)).collect();
    top_k(&ids, &scores, k, false)
}

/// Chooses `k` unlabeled ids to send to the oracle.
///
/// Adversarial strategies take the `k` smallest discriminator outputs at
/// the posterior-mean unified representation: the discriminator is trained
/// toward 1 on labeled samples, so low outputs are the least labeled-like.
pub fn select<R: Rng + ?Sized>(
    strategy: Strategy,
    ds: &Dataset,
    pool: &PoolState,
    models: Models<'_>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let unl = pool.unlabeled_ids();
    if k > unl.len() {
        return Err(Error::invalid(format!("K = {k} exceeds {} unlabeled samples", unl.len())));
    }
    if k == unl.len() {
        return Ok(unl);
    }
    match strategy {
        s if s.is_adversarial() => {
            let params = models
                .sraal
                .ok_or_else(|| Error::invalid(format!("{s} selection needs trained adversarial models")))?;
            let scores = params.state_scores(&ds.batch(&unl))?;
            Ok(top_k(&unl, &scores, k, true))
        }
        Strategy::Random => Ok(sample(rng, unl.len(), k).into_iter().map(|i| unl[i]).collect()),
        Strategy::EntropyTopk => {
            let preds = models.target.predict(&ds.batch(&unl))?;
            let table: Vec<(usize, ProbVector)> = unl.iter().copied().zip(preds).collect();
            Ok(entropy_topk(&table, k))
        }
        Strategy::KcenterCoreset => {
            let lab = pool.labeled_ids();
            let ids: Vec<usize> = lab.iter().chain(&unl).copied().collect();
            let feats = models.target.penultimate(&ds.batch(&ids))?;
            let width = feats.shape()[1];
            let points = feats.data().chunks(width).map(<[f64]>::to_vec).collect();
            let emb = EmbeddingSet::new(points, ids.clone())?;
            let initial: Vec<usize> = (0..lab.len()).collect();
            let (chosen, _) = farthest_first(&emb, &initial, lab.len() + k);
            Ok(chosen[lab.len()..].iter().map(|&i| ids[i]).collect())
        }
        _ => unreachable!("adversarial strategies handled above"),
    }
}
