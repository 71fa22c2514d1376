use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pool::{Oracle, PoolState};
use super::strategy::{select, Models, Strategy};
use super::train::{accuracy, pretrain_reconstructor, train_sraal, train_target, StateLabels};
use super::{AlConfig, InitMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kcenter::{greedy_kcenter, EmbeddingSet};
use crate::oui::Indicator;

/// Independent random stream for one `(purpose, iteration)` of a trial.
pub fn stream(seed: u64, purpose: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose << 32 | iteration);
    rng
}

const STREAM_INIT: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_SRAAL: u64 = 3;
const STREAM_SELECT: u64 = 4;

/// Seed of trial `trial` under `master` (SplitMix64 finalizer).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial labeled pool of size `m` drawn from the train split.
pub fn init_pools<R: Rng + ?Sized>(ds: &Dataset, m: usize, config: &AlConfig, rng: &mut R) -> Result<PoolState> {
    let train = ds.train_ids();
    if m > train.len() {
        return Err(Error::invalid(format!("M = {m} exceeds {} training samples", train.len())));
    }
    let chosen: Vec<usize> = match config.init {
        InitMode::Random => sample(rng, train.len(), m).into_iter().map(|i| train[i]).collect(),
        InitMode::Kcenter => {
            if m == 0 {
                Vec::new()
            } else {
                let emb = reconstructor_embeddings(ds, config, rng)?;
                greedy_kcenter(&emb, m, config.kcenter_seeds.min(m), rng)?.ids
            }
        }
    };
    PoolState::new(train, &chosen)
}

/// UIR posterior means of every training sample after unsupervised
/// pretraining on the whole training split.
pub fn reconstructor_embeddings<R: Rng + ?Sized>(ds: &Dataset, config: &AlConfig, rng: &mut R) -> Result<EmbeddingSet> {
    let train = ds.train_ids();
    let params = pretrain_reconstructor(ds, train, &config.arch, &config.schedule, rng)?;
    let (means, _) = params.posterior_means(&ds.batch(train))?;
    let dz = params.latent_dim();
    let points = means.data().chunks(dz).map(<[f64]>::to_vec).collect();
    EmbeddingSet::new(points, train.to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub iteration: usize,
    pub labeled_fraction: f64,
    pub test_accuracy: f64,
    pub mean_indicator: f64,
    pub disc_loss: Option<f64>,
    pub seconds: f64,
}

/// One trial's accuracy-versus-labels trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub seed: u64,
    pub records: Vec<CurveRecord>,
}

impl LearningCurve {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.test_accuracy)
    }
}

fn indicator_scores(
    indicator: Option<Indicator>,
    target: &crate::nets::TargetParams,
    ds: &Dataset,
    ids: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    if ids.is_empty() {
        return Ok(BTreeMap::new());
    }
    Ok(match indicator {
        None => ids.iter().map(|&id| (id, 1.0)).collect(),
        Some(ind) => {
            let preds = target.predict(&ds.batch(ids))?;
            ids.iter().copied().zip(preds.iter().map(|v| ind.score(v))).collect()
        }
    })
}

/// Runs one trial: initialize, then alternate target training, evaluation,
/// selection and labeling until the labeling budget is spent.
pub fn run_experiment(ds: &Dataset, config: &AlConfig, strategy: Strategy, seed: u64) -> Result<LearningCurve> {
    let oracle = Oracle::new(ds)?;
    run_experiment_with(&oracle, config, strategy, seed)
}

/// [`run_experiment`] against a caller-owned oracle, whose read log can be
/// audited afterwards.
pub fn run_experiment_with(oracle: &Oracle<'_>, config: &AlConfig, strategy: Strategy, seed: u64) -> Result<LearningCurve> {
    config.validate()?;
    let ds = oracle.dataset();
    let plan = config.plan(ds.train_ids().len())?;
    let test_labels = oracle.test_labels();
    let mut pool = init_pools(ds, plan.initial, config, &mut stream(seed, STREAM_INIT, 0))?;
    let mut records = Vec::with_capacity(plan.rounds + 1);
    let indicator = strategy.indicator().or(if strategy.is_adversarial() { None } else { Some(Indicator::Oui) });
    let weights = match strategy {
        Strategy::SraalNoStl => crate::losses::LossWeights {
            lambda2: 0.0,
            ..config.weights
        },
        _ => config.weights,
    };

    for it in 0..=plan.rounds {
        let started = Instant::now();
        let target = train_target(oracle, &pool, &config.arch, &config.schedule, &mut stream(seed, STREAM_TARGET, it as u64))?;
        let test_accuracy = accuracy(&target, ds, ds.test_ids(), &test_labels)?;
        let unl = pool.unlabeled_ids();
        let scores = indicator_scores(indicator, &target, ds, &unl)?;
        let mean_indicator = if scores.is_empty() {
            0.0
        } else {
            scores.values().sum::<f64>() / scores.len() as f64
        };

        let mut disc_loss = None;
        let mut chosen = None;
        if it < plan.rounds {
            let trained = if strategy.is_adversarial() {
                let states = if config.binary_state_loss && strategy == Strategy::SraalNoOui {
                    StateLabels::Binary
                } else {
                    StateLabels::Relabeled(scores)
                };
                let mut rng = stream(seed, STREAM_SRAAL, it as u64);
                let t = train_sraal(oracle, &pool, &states, &weights, &config.arch, &config.schedule, &mut rng)?;
                disc_loss = t.disc_loss;
                Some(t.params)
            } else {
                None
            };
            let models = Models {
                target: &target,
                sraal: trained.as_ref(),
            };
            let mut rng = stream(seed, STREAM_SELECT, it as u64);
            chosen = Some(select(strategy, ds, &pool, models, plan.step, &mut rng)?);
        }

        records.push(CurveRecord {
            iteration: it,
            labeled_fraction: pool.labeled_fraction(),
            test_accuracy,
            mean_indicator,
            disc_loss,
            seconds: if config.record_timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        if let Some(ids) = chosen {
            pool.oracle_label(&ids)?;
        }
    }
    Ok(LearningCurve { strategy, seed, records })
}
