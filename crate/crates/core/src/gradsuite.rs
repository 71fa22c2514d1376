//! Finite-difference verification of every training objective at random
//! parameters.

use rand::Rng;

use crate::alcore::stream;
use crate::diffcore::{analytic_gradient, max_relative_error, numeric_gradient, Tape, Tensor, Var};
use crate::error::Result;
use crate::losses::{disc_loss, encode_batch, gen_adv_loss, gen_total_loss, stl_loss, uir_loss, LossWeights};
use crate::nets::{discriminate_vars, Activation, Architecture, Generator, Mlp, SraalParams};

/// Relative-error threshold a loss must stay under.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LossCheck {
    pub name: &'static str,
    /// Largest relative error over all trials.
    pub max_rel_error: f64,
    pub trials: usize,
}

impl LossCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

pub const LOSS_NAMES: [&str; 5] = ["uir", "stl", "disc", "gen_adv", "gen_total"];

/// Smooth activations keep central differences away from ReLU kinks.
fn check_arch() -> Architecture {
    Architecture {
        latent_dim: 3,
        trunk_hidden: vec![6],
        decoder_hidden: vec![5],
        stl_hidden: vec![],
        disc_hidden: vec![6],
        target_hidden: vec![4],
        activation: Activation::Tanh,
    }
}

struct Fixture {
    params: SraalParams,
    x_l: Tensor,
    x_u: Tensor,
    labels: Vec<Option<usize>>,
    noise: [Tensor; 4],
    rep_l: Tensor,
    rep_u: Tensor,
    scores: Vec<f64>,
    weights: LossWeights,
}

const INPUT: usize = 5;
const CLASSES: usize = 3;
const HALF_BATCH: usize = 4;

fn fixture<R: Rng>(rng: &mut R) -> Fixture {
    let arch = check_arch();
    let params = SraalParams::new(&arch, INPUT, CLASSES, rng);
    let dz = arch.latent_dim;
    let x_l = Tensor::randn(&[HALF_BATCH, INPUT], 1.0, rng);
    let x_u = Tensor::randn(&[HALF_BATCH, INPUT], 1.0, rng);
    let labels = (0..HALF_BATCH).map(|_| Some(rng.random_range(0..CLASSES))).collect();
    let noise = std::array::from_fn(|_| Tensor::randn(&[HALF_BATCH, dz], 1.0, rng));
    let rep_l = Tensor::randn(&[HALF_BATCH, 2 * dz], 1.0, rng);
    let rep_u = Tensor::randn(&[HALF_BATCH, 2 * dz], 1.0, rng);
    // Indicators strictly above the current outputs keep every term off the
    // clamp, where the loss is not differentiable.
    let d_u = params.discriminate(&rep_u).expect("fixture shapes agree");
    let scores = d_u.iter().map(|d| d + (1.0 - d) * rng.random_range(0.2..0.9)).collect();
    let weights = LossWeights::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0))
        .expect("positive weights");
    Fixture {
        params,
        x_l,
        x_u,
        labels,
        noise,
        rep_l,
        rep_u,
        scores,
        weights,
    }
}

fn generator_loss(f: &Fixture, which: &str, tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let gen = f.params.generator.bind_from(&mut vars.iter().copied());
    let xl = tape.leaf(f.x_l.clone());
    let xu = tape.leaf(f.x_u.clone());
    let n: Vec<Var> = f.noise.iter().map(|t| tape.leaf(t.clone())).collect();
    let l = encode_batch(tape, &gen, xl, n[0], n[1])?;
    let u = encode_batch(tape, &gen, xu, n[2], n[3])?;
    let adv = |tape: &mut Tape| -> Result<Var> {
        let disc = f.params.discriminator.bind(tape);
        let ul = l.unified(tape)?;
        let uu = u.unified(tape)?;
        let dl = discriminate_vars(tape, &disc, ul)?;
        let du = discriminate_vars(tape, &disc, uu)?;
        gen_adv_loss(tape, dl, du)
    };
    match which {
        "uir" => uir_loss(tape, &gen, &l, &u),
        "stl" => stl_loss(tape, &gen, &l, &f.labels),
        "gen_adv" => adv(tape),
        _ => {
            let a = uir_loss(tape, &gen, &l, &u)?;
            let b = stl_loss(tape, &gen, &l, &f.labels)?;
            let c = adv(tape)?;
            gen_total_loss(tape, &f.weights, a, b, c)
        }
    }
}

fn discriminator_loss(f: &Fixture, disc: &Mlp, tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let bound = disc.bind_from(&mut vars.iter().copied());
    let ul = tape.leaf(f.rep_l.clone());
    let uu = tape.leaf(f.rep_u.clone());
    let dl = discriminate_vars(tape, &bound, ul)?;
    let du = discriminate_vars(tape, &bound, uu)?;
    disc_loss(tape, dl, du, &f.scores)
}

fn params_of(gen: &Generator) -> Vec<Tensor> {
    gen.tensors().into_iter().cloned().collect()
}

/// Relative error of one loss at one random initialization. `corrupt`
/// perturbs the analytic gradient as a negative control.
type LossFn<'a> = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var> + 'a>;

pub fn check_loss(name: &str, seed: u64, trial: usize, corrupt: bool) -> Result<f64> {
    let mut rng = stream(seed, 0x6772_6164, trial as u64);
    let f = fixture(&mut rng);
    let (params, closure): (Vec<Tensor>, LossFn<'_>) = match name {
        "disc" => (
            f.params.discriminator.tensors().into_iter().cloned().collect(),
            Box::new(|t: &mut Tape, v: &[Var]| discriminator_loss(&f, &f.params.discriminator, t, v)),
        ),
        other => (
            params_of(&f.params.generator),
            Box::new(move |t: &mut Tape, v: &[Var]| generator_loss(&f, other, t, v)),
        ),
    };
    let (_, mut analytic) = analytic_gradient(&params, &closure)?;
    if corrupt {
        let g = &mut analytic[0].data_mut()[0];
        *g += 1e-2 * g.abs().max(1.0);
    }
    let numeric = numeric_gradient(&params, GRADCHECK_STEP, &closure)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Checks all five objectives over `trials` random initializations.
pub fn run_gradcheck(seed: u64, trials: usize, corrupt: bool) -> Result<Vec<LossCheck>> {
    LOSS_NAMES
        .iter()
        .map(|&name| {
            let mut worst: f64 = 0.0;
            for t in 0..trials {
                worst = worst.max(check_loss(name, seed, t, corrupt)?);
            }
            Ok(LossCheck {
                name,
                max_rel_error: worst,
                trials,
            })
        })
        .collect()
}
