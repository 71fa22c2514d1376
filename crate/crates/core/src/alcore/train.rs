use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::pool::{Oracle, PoolState};
use super::Schedule;
use crate::data::Dataset;
use crate::diffcore::{OptimKind, OptimState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::losses::{
    binary_disc_loss, disc_loss, encode_batch, gen_adv_loss, gen_total_loss, stl_loss, uir_loss, EncodedBatch,
    LossWeights,
};
use crate::nets::{discriminate_vars, Architecture, SraalParams, TargetParams};

/// What the discriminator is told about unlabeled samples.
#[derive(Clone, Debug, PartialEq)]
pub enum StateLabels {
    /// Per-id indicator scores in `[0, 1)` (or exactly 1 for the plain
    /// adversarial ablation) used by the relabeled loss.
    Relabeled(BTreeMap<usize, f64>),
    /// Fixed binary state, trained with `-log(1 - D_U)`.
    Binary,
}

/// Cross-entropy training of a fresh target classifier on the labeled pool.
pub fn train_target<R: Rng + ?Sized>(
    oracle: &Oracle<'_>,
    pool: &PoolState,
    arch: &Architecture,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<TargetParams> {
    let ds = oracle.dataset();
    let mut ids = pool.labeled_ids();
    if ids.is_empty() {
        return Err(Error::invalid("cannot train the target model on an empty labeled pool"));
    }
    let labels: BTreeMap<usize, usize> = ids.iter().copied().zip(oracle.labels(pool, &ids)?).collect();
    let mut target = TargetParams::new(arch, ds.dim(), ds.classes(), rng);
    let mut opt = OptimState::new(OptimKind::adam(schedule.learning_rate));
    let classes = ds.classes();
    for _ in 0..schedule.target_epochs {
        ids.shuffle(rng);
        for chunk in ids.chunks(schedule.batch_size) {
            let mut tape = Tape::new();
            let x = tape.leaf(ds.batch(chunk));
            let bound = target.net.bind(&mut tape);
            let logits = bound.forward(&mut tape, x)?;
            let mut onehot = Tensor::zeros(&[chunk.len(), classes]);
            for (i, id) in chunk.iter().enumerate() {
                onehot.data_mut()[i * classes + labels[id]] = 1.0;
            }
            let onehot = tape.leaf(onehot);
            let logp = tape.log_softmax(logits)?;
            let picked = tape.mul(logp, onehot)?;
            let total = tape.sum(picked);
            let loss = tape.scale(total, -1.0 / chunk.len() as f64);
            let grads = tape.backward(loss)?.collect(&bound.vars());
            opt.step(&mut target.net.tensors_mut(), &grads)?;
        }
    }
    Ok(target)
}

/// Fraction of `ids` whose argmax prediction matches `labels`.
pub fn accuracy(target: &TargetParams, ds: &Dataset, ids: &[usize], labels: &[usize]) -> Result<f64> {
    if ids.is_empty() {
        return Ok(0.0);
    }
    let logits = target.logits(&ds.batch(ids))?;
    let correct = (0..ids.len())
        .filter(|&i| {
            let row = logits.row(i);
            let arg = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            arg == labels[i]
        })
        .count();
    Ok(correct as f64 / ids.len() as f64)
}

/// Result of one round of adversarial training.
#[derive(Clone, Debug)]
pub struct SraalTraining {
    pub params: SraalParams,
    /// Mean discriminator loss over the final epoch (`None` if no step ran).
    pub disc_loss: Option<f64>,
}

fn noise<R: Rng + ?Sized>(tape: &mut Tape, rows: usize, dz: usize, rng: &mut R) -> Var {
    tape.leaf(Tensor::randn(&[rows, dz], 1.0, rng))
}

fn encode<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &SraalParams,
    gen: &crate::nets::BoundGenerator,
    x: Tensor,
    rng: &mut R,
) -> Result<EncodedBatch> {
    let rows = x.shape()[0];
    let dz = params.latent_dim();
    let xv = tape.leaf(x);
    let nu = noise(tape, rows, dz, rng);
    let ns = noise(tape, rows, dz, rng);
    encode_batch(tape, gen, xv, nu, ns)
}

/// Alternating generator / discriminator optimization on minibatch pairs.
///
/// One epoch is `ceil(|U| / batch)` pairs; the labeled pool is cycled to
/// fill its side of each pair. Each pair takes a generator step on
/// `λ1·uir + λ2·stl + λ3·adv` followed by a discriminator step on the
/// state loss with the generator held fixed.
#[allow(clippy::too_many_arguments)]
pub fn train_sraal<R: Rng + ?Sized>(
    oracle: &Oracle<'_>,
    pool: &PoolState,
    states: &StateLabels,
    weights: &LossWeights,
    arch: &Architecture,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<SraalTraining> {
    let ds = oracle.dataset();
    let mut params = SraalParams::new(arch, ds.dim(), ds.classes(), rng);
    train_sraal_from(oracle, pool, states, weights, schedule, &mut params, rng).map(|disc_loss| SraalTraining {
        params,
        disc_loss,
    })
}

/// [`train_sraal`] starting from existing parameters; returns the final
/// epoch's mean discriminator loss.
pub fn train_sraal_from<R: Rng + ?Sized>(
    oracle: &Oracle<'_>,
    pool: &PoolState,
    states: &StateLabels,
    weights: &LossWeights,
    schedule: &Schedule,
    params: &mut SraalParams,
    rng: &mut R,
) -> Result<Option<f64>> {
    weights.validate()?;
    let ds = oracle.dataset();
    let mut lab = pool.labeled_ids();
    let mut unl = pool.unlabeled_ids();
    if let StateLabels::Relabeled(scores) = states {
        if let Some(id) = unl.iter().find(|id| !scores.contains_key(id)) {
            return Err(Error::invalid(format!("no indicator score for unlabeled id {id}")));
        }
    }
    if lab.is_empty() || unl.is_empty() || schedule.sraal_epochs == 0 {
        return Ok(None);
    }
    let labels: BTreeMap<usize, usize> = lab.iter().copied().zip(oracle.labels(pool, &lab)?).collect();
    let bs = schedule.batch_size;
    let lbs = bs.min(lab.len());
    let mut gen_opt = OptimState::new(OptimKind::adam(schedule.learning_rate));
    let mut disc_opt = OptimState::new(OptimKind::adam(schedule.learning_rate));
    let mut last_epoch = Vec::new();
    let mut cursor = lab.len();

    for _ in 0..schedule.sraal_epochs {
        unl.shuffle(rng);
        last_epoch.clear();
        for u_ids in unl.chunks(bs) {
            let mut l_ids = Vec::with_capacity(lbs);
            for _ in 0..lbs {
                if cursor == lab.len() {
                    lab.shuffle(rng);
                    cursor = 0;
                }
                l_ids.push(lab[cursor]);
                cursor += 1;
            }
            let l_labels: Vec<Option<usize>> = l_ids.iter().map(|id| Some(labels[id])).collect();

            // Generator step.
            {
                let mut tape = Tape::new();
                let gen = params.generator.bind(&mut tape);
                let l = encode(&mut tape, params, &gen, ds.batch(&l_ids), rng)?;
                let u = encode(&mut tape, params, &gen, ds.batch(u_ids), rng)?;
                let zero = tape.leaf(Tensor::scalar(0.0));
                let uir = if weights.lambda1 > 0.0 { uir_loss(&mut tape, &gen, &l, &u)? } else { zero };
                let stl = if weights.lambda2 > 0.0 {
                    stl_loss(&mut tape, &gen, &l, &l_labels)?
                } else {
                    zero
                };
                let adv = if weights.lambda3 > 0.0 {
                    let disc = params.discriminator.bind(&mut tape);
                    let ul = l.unified(&mut tape)?;
                    let uu = u.unified(&mut tape)?;
                    let dl = discriminate_vars(&mut tape, &disc, ul)?;
                    let du = discriminate_vars(&mut tape, &disc, uu)?;
                    gen_adv_loss(&mut tape, dl, du)?
                } else {
                    zero
                };
                let total = gen_total_loss(&mut tape, weights, uir, stl, adv)?;
                let grads = tape.backward(total)?.collect(&gen.vars());
                gen_opt.step(&mut params.generator.tensors_mut(), &grads)?;
            }

            // Discriminator step on detached representations.
            let (rep_l, rep_u) = {
                let mut tape = Tape::new();
                let gen = params.generator.bind(&mut tape);
                let l = encode(&mut tape, params, &gen, ds.batch(&l_ids), rng)?;
                let u = encode(&mut tape, params, &gen, ds.batch(u_ids), rng)?;
                let ul = l.unified(&mut tape)?;
                let uu = u.unified(&mut tape)?;
                (tape.value(ul).clone(), tape.value(uu).clone())
            };
            let mut tape = Tape::new();
            let disc = params.discriminator.bind(&mut tape);
            let ul = tape.leaf(rep_l);
            let uu = tape.leaf(rep_u);
            let dl = discriminate_vars(&mut tape, &disc, ul)?;
            let du = discriminate_vars(&mut tape, &disc, uu)?;
            let loss = match states {
                StateLabels::Relabeled(scores) => {
                    let s: Vec<f64> = u_ids.iter().map(|id| scores[id]).collect();
                    disc_loss(&mut tape, dl, du, &s)?
                }
                StateLabels::Binary => binary_disc_loss(&mut tape, dl, du)?,
            };
            last_epoch.push(tape.value(loss).item());
            let grads = tape.backward(loss)?.collect(&disc.vars());
            disc_opt.step(&mut params.discriminator.tensors_mut(), &grads)?;
        }
    }
    Ok(Some(last_epoch.iter().sum::<f64>() / last_epoch.len() as f64))
}

/// Trains only the reconstruction branch (trunk, UIR head and decoder) on
/// `ids` without labels.
pub fn pretrain_reconstructor<R: Rng + ?Sized>(
    ds: &Dataset,
    ids: &[usize],
    arch: &Architecture,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<SraalParams> {
    let mut params = SraalParams::new(arch, ds.dim(), ds.classes().max(2), rng);
    let mut opt = OptimState::new(OptimKind::adam(schedule.learning_rate));
    let mut order = ids.to_vec();
    for _ in 0..schedule.pretrain_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(schedule.batch_size) {
            let mut tape = Tape::new();
            let gen = params.generator.bind(&mut tape);
            let empty = encode(&mut tape, &params, &gen, Tensor::zeros(&[0, ds.dim()]), rng)?;
            let b = encode(&mut tape, &params, &gen, ds.batch(chunk), rng)?;
            let loss = uir_loss(&mut tape, &gen, &empty, &b)?;
            let grads = tape.backward(loss)?.collect(&gen.vars());
            opt.step(&mut params.generator.tensors_mut(), &grads)?;
        }
    }
    Ok(params)
}
