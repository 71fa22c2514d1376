//! Training objectives.
//!
//! The reconstruction and label objectives are written as likelihoods to
//! maximize; here every loss is the quantity to *minimize*, i.e. the
//! negated evidence lower bound. The reconstruction likelihood is a
//! unit-variance Gaussian, so its negative log is `0.5 · Σ (x̂ - x)²` up to
//! a constant.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nets::{reparameterize_vars, BoundGenerator, CodeVars, LatentCode};

/// Weights of the reconstruction, label and adversarial terms in the
/// generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = LossWeights { lambda1, lambda2, lambda3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Closed-form `KL(N(mean, exp(log_variance)) || N(0, I))`.
pub fn kl_gaussian(code: &LatentCode) -> f64 {
    0.5 * code
        .mean
        .iter()
        .zip(&code.log_variance)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

/// Per-row KL against the standard normal prior, `[n]`.
pub fn kl_per_sample(tape: &mut Tape, code: CodeVars) -> Result<Var> {
    let m2 = tape.mul(code.mean, code.mean)?;
    let var = tape.exp(code.log_variance);
    let t = tape.add(m2, var)?;
    let t = tape.sub(t, code.log_variance)?;
    let t = tape.add_scalar(t, -1.0);
    let t = tape.row_sum(t)?;
    Ok(tape.scale(t, 0.5))
}

/// One batch pushed through the encoder with reparameterized samples.
#[derive(Clone, Copy, Debug)]
pub struct EncodedBatch {
    pub x: Var,
    pub uir: CodeVars,
    pub stl: CodeVars,
    pub z_uir: Var,
    pub z_stl: Var,
    pub rows: usize,
}

impl EncodedBatch {
    /// Concatenated `(z_uir, z_stl)` samples, `[n, 2·latent]`.
    pub fn unified(&self, tape: &mut Tape) -> Result<Var> {
        tape.concat(self.z_uir, self.z_stl)
    }
}

/// Encodes `x` and draws `z = mean + σ ∘ noise` for both heads. The noise
/// tensors are `[n, latent]` standard-normal constants.
pub fn encode_batch(
    tape: &mut Tape,
    gen: &BoundGenerator,
    x: Var,
    noise_uir: Var,
    noise_stl: Var,
) -> Result<EncodedBatch> {
    let rows = tape.value(x).shape()[0];
    let (uir, stl) = gen.encode(tape, x)?;
    let z_uir = reparameterize_vars(tape, uir, noise_uir)?;
    let z_stl = reparameterize_vars(tape, stl, noise_stl)?;
    Ok(EncodedBatch {
        x,
        uir,
        stl,
        z_uir,
        z_stl,
        rows,
    })
}

fn zero(tape: &mut Tape) -> Var {
    tape.leaf(Tensor::scalar(0.0))
}

/// Batch mean of `0.5·‖x̂ - x‖² + KL`, or `None` for an empty batch.
pub fn reconstruction_term(tape: &mut Tape, gen: &BoundGenerator, b: &EncodedBatch) -> Result<Option<Var>> {
    if b.rows == 0 {
        return Ok(None);
    }
    let xhat = gen.decode_uir(tape, b.z_uir)?;
    let diff = tape.sub(xhat, b.x)?;
    let sq = tape.mul(diff, diff)?;
    let sq = tape.row_sum(sq)?;
    let sq = tape.scale(sq, 0.5);
    let kl = kl_per_sample(tape, b.uir)?;
    let per = tape.add(sq, kl)?;
    Ok(Some(tape.mean(per)?))
}

/// Negative reconstruction ELBO of the labeled batch plus that of the
/// unlabeled batch. Either batch may be empty.
pub fn uir_loss(tape: &mut Tape, gen: &BoundGenerator, labeled: &EncodedBatch, unlabeled: &EncodedBatch) -> Result<Var> {
    let l = reconstruction_term(tape, gen, labeled)?;
    let u = reconstruction_term(tape, gen, unlabeled)?;
    match (l, u) {
        (Some(l), Some(u)) => tape.add(l, u),
        (Some(t), None) | (None, Some(t)) => Ok(t),
        (None, None) => Ok(zero(tape)),
    }
}

/// Cross-entropy of the label decoder on `z_stl` plus the STL code's KL,
/// averaged over the labeled batch. Every row must carry a label.
pub fn stl_loss(tape: &mut Tape, gen: &BoundGenerator, labeled: &EncodedBatch, labels: &[Option<usize>]) -> Result<Var> {
    if labels.len() != labeled.rows {
        return Err(Error::shape(
            "stl_loss",
            format!("{} labels for {} rows", labels.len(), labeled.rows),
        ));
    }
    if let Some(i) = labels.iter().position(Option::is_none) {
        return Err(Error::invalid(format!("stl_loss: row {i} has no label")));
    }
    if labeled.rows == 0 {
        return Ok(zero(tape));
    }
    let logits = gen.decode_stl(tape, labeled.z_stl)?;
    let classes = tape.value(logits).shape()[1];
    let mut onehot = Tensor::zeros(&[labeled.rows, classes]);
    for (i, y) in labels.iter().enumerate() {
        let y = y.unwrap();
        if y >= classes {
            return Err(Error::invalid(format!("label {y} >= class count {classes}")));
        }
        onehot.data_mut()[i * classes + y] = 1.0;
    }
    let onehot = tape.leaf(onehot);
    let logp = tape.log_softmax(logits)?;
    let picked = tape.mul(logp, onehot)?;
    let nll = tape.row_sum(picked)?;
    let nll = tape.scale(nll, -1.0);
    let kl = kl_per_sample(tape, labeled.stl)?;
    let per = tape.add(nll, kl)?;
    tape.mean(per)
}

fn neg_mean_log(tape: &mut Tape, x: Var) -> Result<Var> {
    let l = tape.log(x);
    let m = tape.mean(l)?;
    Ok(tape.scale(m, -1.0))
}

fn sum_present(tape: &mut Tape, a: Option<Var>, b: Option<Var>) -> Result<Var> {
    match (a, b) {
        (Some(a), Some(b)) => tape.add(a, b),
        (Some(t), None) | (None, Some(t)) => Ok(t),
        (None, None) => Ok(zero(tape)),
    }
}

fn nonempty(tape: &Tape, v: Var) -> bool {
    !tape.value(v).is_empty()
}

/// State-relabeled discriminator loss:
/// `-mean log D_L - mean log max(s_U - D_U, 1e-12)`.
pub fn disc_loss(tape: &mut Tape, d_labeled: Var, d_unlabeled: Var, scores: &[f64]) -> Result<Var> {
    if tape.value(d_unlabeled).len() != scores.len() {
        return Err(Error::shape(
            "disc_loss",
            format!("{} unlabeled outputs vs {} scores", tape.value(d_unlabeled).len(), scores.len()),
        ));
    }
    let l = if nonempty(tape, d_labeled) {
        Some(neg_mean_log(tape, d_labeled)?)
    } else {
        None
    };
    let u = if nonempty(tape, d_unlabeled) {
        let shape = tape.value(d_unlabeled).shape().to_vec();
        let s = tape.leaf(Tensor::new(shape, scores.to_vec())?);
        let gap = tape.sub(s, d_unlabeled)?;
        Some(neg_mean_log(tape, gap)?)
    } else {
        None
    };
    sum_present(tape, l, u)
}

/// Binary-state discriminator loss `-mean log D_L - mean log(1 - D_U)`.
pub fn binary_disc_loss(tape: &mut Tape, d_labeled: Var, d_unlabeled: Var) -> Result<Var> {
    let l = if nonempty(tape, d_labeled) {
        Some(neg_mean_log(tape, d_labeled)?)
    } else {
        None
    };
    let u = if nonempty(tape, d_unlabeled) {
        let flipped = tape.rsub_scalar(1.0, d_unlabeled);
        Some(neg_mean_log(tape, flipped)?)
    } else {
        None
    };
    sum_present(tape, l, u)
}

/// Generator adversarial loss `-mean log D_L - mean log D_U`.
pub fn gen_adv_loss(tape: &mut Tape, d_labeled: Var, d_unlabeled: Var) -> Result<Var> {
    let l = if nonempty(tape, d_labeled) {
        Some(neg_mean_log(tape, d_labeled)?)
    } else {
        None
    };
    let u = if nonempty(tape, d_unlabeled) {
        Some(neg_mean_log(tape, d_unlabeled)?)
    } else {
        None
    };
    sum_present(tape, l, u)
}

/// `λ1·uir + λ2·stl + λ3·adv`.
pub fn gen_total_loss(tape: &mut Tape, w: &LossWeights, uir: Var, stl: Var, adv: Var) -> Result<Var> {
    let a = tape.scale(uir, w.lambda1);
    let b = tape.scale(stl, w.lambda2);
    let c = tape.scale(adv, w.lambda3);
    let ab = tape.add(a, b)?;
    tape.add(ab, c)
}

fn vector_leaf(tape: &mut Tape, v: &[f64]) -> Result<Var> {
    Ok(tape.leaf(Tensor::vector(v.to_vec())?))
}

/// [`disc_loss`] on plain values.
pub fn disc_loss_value(d_labeled: &[f64], d_unlabeled: &[f64], scores: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let l = vector_leaf(&mut tape, d_labeled)?;
    let u = vector_leaf(&mut tape, d_unlabeled)?;
    let loss = disc_loss(&mut tape, l, u, scores)?;
    Ok(tape.value(loss).item())
}

/// [`binary_disc_loss`] on plain values.
pub fn binary_disc_loss_value(d_labeled: &[f64], d_unlabeled: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let l = vector_leaf(&mut tape, d_labeled)?;
    let u = vector_leaf(&mut tape, d_unlabeled)?;
    let loss = binary_disc_loss(&mut tape, l, u)?;
    Ok(tape.value(loss).item())
}

/// [`gen_adv_loss`] on plain values.
pub fn gen_adv_loss_value(d_labeled: &[f64], d_unlabeled: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let l = vector_leaf(&mut tape, d_labeled)?;
    let u = vector_leaf(&mut tape, d_unlabeled)?;
    let loss = gen_adv_loss(&mut tape, l, u)?;
    Ok(tape.value(loss).item())
}

/// [`gen_total_loss`] on plain values.
pub fn gen_total_loss_value(w: &LossWeights, uir: f64, stl: f64, adv: f64) -> Result<f64> {
    w.validate()?;
    for v in [uir, stl, adv] {
        if !v.is_finite() {
            return Err(Error::invalid("component losses must be finite"));
        }
    }
    let mut tape = Tape::new();
    let (a, b, c) = (
        tape.leaf(Tensor::scalar(uir)),
        tape.leaf(Tensor::scalar(stl)),
        tape.leaf(Tensor::scalar(adv)),
    );
    let loss = gen_total_loss(&mut tape, w, a, b, c)?;
    Ok(tape.value(loss).item())
}
