//! Parameter containers and forward passes for the generator (shared trunk,
//! two latent heads, reconstruction and label decoders), the state
//! discriminator and the target classifier.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{softmax, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::oui::ProbVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// Network sizes. Input width and class count come from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub latent_dim: usize,
    pub trunk_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub stl_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub target_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            latent_dim: 8,
            trunk_hidden: vec![64],
            decoder_hidden: vec![64],
            stl_hidden: Vec::new(),
            disc_hidden: vec![64, 64],
            target_hidden: vec![64],
            activation: Activation::Relu,
        }
    }
}

/// Affine map `x · weight + bias` with `weight: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Glorot-normal weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        Linear {
            weight: Tensor::randn(&[inputs, outputs], std, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    fn bind_from(&self, vars: &mut impl Iterator<Item = Var>) -> BoundLinear {
        BoundLinear {
            weight: vars.next().expect("too few vars for linear layer"),
            bias: vars.next().expect("too few vars for linear layer"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundLinear {
    weight: Var,
    bias: Var,
}

impl BoundLinear {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul(x, self.weight)?;
        tape.add_bias(y, self.bias)
    }

    fn vars(&self) -> [Var; 2] {
        [self.weight, self.bias]
    }
}

/// Stack of [`Linear`] layers with an activation between them (and after
/// the last one when `activate_output` is set). Zero layers is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Linear>,
    activation: Activation,
    activate_output: bool,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        activate_output: bool,
        rng: &mut R,
    ) -> Self {
        let layers = sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Mlp {
            layers,
            activation,
            activate_output,
        }
    }

    pub fn from_layers(layers: Vec<Linear>, activation: Activation, activate_output: bool) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::shape(
                    "mlp",
                    format!("layer widths {} -> {} do not chain", w[0].outputs(), w[1].inputs()),
                ));
            }
        }
        Ok(Mlp {
            layers,
            activation,
            activate_output,
        })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(Linear::inputs)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(Linear::outputs)
    }

    /// Sets every parameter to zero.
    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.data_mut().fill(0.0);
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        let vars: Vec<Var> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        self.bind_from(&mut vars.into_iter())
    }

    /// Uses existing tape nodes (in [`Mlp::tensors`] order) as parameters.
    pub fn bind_from(&self, vars: &mut impl Iterator<Item = Var>) -> BoundMlp {
        BoundMlp {
            layers: self.layers.iter().map(|l| l.bind_from(vars)).collect(),
            activation: self.activation,
            activate_output: self.activate_output,
        }
    }

    /// Tape-free forward pass on a `[n, in]` batch.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let bound = self.bind(&mut tape);
        let y = bound.forward(&mut tape, xv)?;
        Ok(tape.value(y).clone())
    }
}

#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<BoundLinear>,
    activation: Activation,
    activate_output: bool,
}

impl BoundMlp {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let last = self.layers.len().saturating_sub(1);
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i < last || self.activate_output {
                h = self.activation.apply(tape, h);
            }
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(BoundLinear::vars).collect()
    }
}

/// Gaussian posterior for one sample from one encoder head.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl LatentCode {
    pub fn new(mean: Vec<f64>, log_variance: Vec<f64>) -> Result<Self> {
        if mean.len() != log_variance.len() {
            return Err(Error::shape(
                "latent_code",
                format!("mean {} vs log_variance {}", mean.len(), log_variance.len()),
            ));
        }
        if mean.iter().chain(&log_variance).any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent code must be finite"));
        }
        Ok(LatentCode { mean, log_variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Two linear maps from trunk features to posterior mean and log-variance.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentHead {
    pub mean: Linear,
    pub log_variance: Linear,
}

impl LatentHead {
    pub fn new<R: Rng + ?Sized>(inputs: usize, latent: usize, rng: &mut R) -> Self {
        LatentHead {
            mean: Linear::new(inputs, latent, rng),
            log_variance: Linear::new(inputs, latent, rng),
        }
    }

    pub fn zeros(inputs: usize, latent: usize) -> Self {
        LatentHead {
            mean: Linear::zeros(inputs, latent),
            log_variance: Linear::zeros(inputs, latent),
        }
    }

    fn bind_from(&self, vars: &mut impl Iterator<Item = Var>) -> BoundHead {
        BoundHead {
            mean: self.mean.bind_from(vars),
            log_variance: self.log_variance.bind_from(vars),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct BoundHead {
    mean: BoundLinear,
    log_variance: BoundLinear,
}

/// Posterior parameters as tape nodes, each `[n, latent_dim]`.
#[derive(Clone, Copy, Debug)]
pub struct CodeVars {
    pub mean: Var,
    pub log_variance: Var,
}

/// Encoder trunk, the two latent heads and both decoders.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub trunk: Mlp,
    pub head_uir: LatentHead,
    pub head_stl: LatentHead,
    pub decoder_uir: Mlp,
    pub decoder_stl: Mlp,
}

/// Every trainable parameter of the method. The target classifier is kept
/// separately in [`TargetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct SraalParams {
    pub generator: Generator,
    pub discriminator: Mlp,
    input_dim: usize,
    latent_dim: usize,
}

impl Generator {
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.trunk.tensors();
        for head in [&self.head_uir, &self.head_stl] {
            out.extend([
                &head.mean.weight,
                &head.mean.bias,
                &head.log_variance.weight,
                &head.log_variance.bias,
            ]);
        }
        out.extend(self.decoder_uir.tensors());
        out.extend(self.decoder_stl.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.trunk.tensors_mut();
        for head in [&mut self.head_uir, &mut self.head_stl] {
            out.extend([
                &mut head.mean.weight,
                &mut head.mean.bias,
                &mut head.log_variance.weight,
                &mut head.log_variance.bias,
            ]);
        }
        out.extend(self.decoder_uir.tensors_mut());
        out.extend(self.decoder_stl.tensors_mut());
        out
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundGenerator {
        let vars: Vec<Var> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        self.bind_from(&mut vars.into_iter())
    }

    /// Uses existing tape nodes (in [`Generator::tensors`] order) as parameters.
    pub fn bind_from(&self, vars: &mut impl Iterator<Item = Var>) -> BoundGenerator {
        BoundGenerator {
            trunk: self.trunk.bind_from(vars),
            head_uir: self.head_uir.bind_from(vars),
            head_stl: self.head_stl.bind_from(vars),
            decoder_uir: self.decoder_uir.bind_from(vars),
            decoder_stl: self.decoder_stl.bind_from(vars),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundGenerator {
    trunk: BoundMlp,
    head_uir: BoundHead,
    head_stl: BoundHead,
    decoder_uir: BoundMlp,
    decoder_stl: BoundMlp,
}

impl BoundGenerator {
    /// Same order as [`Generator::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.trunk.vars();
        for head in [&self.head_uir, &self.head_stl] {
            out.extend(head.mean.vars());
            out.extend(head.log_variance.vars());
        }
        out.extend(self.decoder_uir.vars());
        out.extend(self.decoder_stl.vars());
        out
    }

    /// `(uir, stl)` posterior parameters for a `[n, d]` batch.
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<(CodeVars, CodeVars)> {
        let h = self.trunk.forward(tape, x)?;
        let code = |tape: &mut Tape, head: &BoundHead| -> Result<CodeVars> {
            Ok(CodeVars {
                mean: head.mean.forward(tape, h)?,
                log_variance: head.log_variance.forward(tape, h)?,
            })
        };
        Ok((code(tape, &self.head_uir)?, code(tape, &self.head_stl)?))
    }

    /// Decodes latent samples to reconstructed features.
    pub fn decode_uir(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        self.decoder_uir.forward(tape, z)
    }

    /// Decodes latent samples to class logits.
    pub fn decode_stl(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        self.decoder_stl.forward(tape, z)
    }
}

/// `z = mean + exp(log_variance / 2) ∘ noise`; the noise is a constant leaf
/// so gradients reach only the posterior parameters.
pub fn reparameterize_vars(tape: &mut Tape, code: CodeVars, noise: Var) -> Result<Var> {
    let half = tape.scale(code.log_variance, 0.5);
    let sigma = tape.exp(half);
    let scaled = tape.mul(sigma, noise)?;
    tape.add(code.mean, scaled)
}

/// Discriminator state probabilities `[n]` for unified representations `[n, 2·latent]`.
pub fn discriminate_vars(tape: &mut Tape, disc: &BoundMlp, u: Var) -> Result<Var> {
    let logits = disc.forward(tape, u)?;
    let p = tape.sigmoid(logits);
    let n = tape.value(p).shape()[0];
    tape.reshape(p, vec![n])
}

impl SraalParams {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, input_dim: usize, classes: usize, rng: &mut R) -> Self {
        let act = arch.activation;
        let dz = arch.latent_dim;
        let trunk_sizes: Vec<usize> = std::iter::once(input_dim).chain(arch.trunk_hidden.iter().copied()).collect();
        let trunk = Mlp::new(&trunk_sizes, act, true, rng);
        let h = *trunk_sizes.last().unwrap();
        let head_uir = LatentHead::new(h, dz, rng);
        let head_stl = LatentHead::new(h, dz, rng);
        let chain = |first: usize, mid: &[usize], last: usize| -> Vec<usize> {
            std::iter::once(first).chain(mid.iter().copied()).chain(std::iter::once(last)).collect()
        };
        let decoder_uir = Mlp::new(&chain(dz, &arch.decoder_hidden, input_dim), act, false, rng);
        let decoder_stl = Mlp::new(&chain(dz, &arch.stl_hidden, classes), act, false, rng);
        let discriminator = Mlp::new(&chain(2 * dz, &arch.disc_hidden, 1), act, false, rng);
        SraalParams {
            generator: Generator {
                trunk,
                head_uir,
                head_stl,
                decoder_uir,
                decoder_stl,
            },
            discriminator,
            input_dim,
            latent_dim: dz,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        match x.shape() {
            [n, d] if *d == self.input_dim => Ok(*n),
            s => Err(Error::shape(
                "encode",
                format!("expected [n, {}], got {s:?}", self.input_dim),
            )),
        }
    }

    /// Posterior `(uir, stl)` codes for every row of `x`, in row order.
    pub fn encode(&self, x: &Tensor) -> Result<Vec<(LatentCode, LatentCode)>> {
        let n = self.check_input(x)?;
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let g = self.generator.bind(&mut tape);
        let (uir, stl) = g.encode(&mut tape, xv)?;
        let dz = self.latent_dim;
        let row = |v: Var, i: usize| tape.value(v).data()[i * dz..(i + 1) * dz].to_vec();
        Ok((0..n)
            .map(|i| {
                (
                    LatentCode {
                        mean: row(uir.mean, i),
                        log_variance: row(uir.log_variance, i),
                    },
                    LatentCode {
                        mean: row(stl.mean, i),
                        log_variance: row(stl.log_variance, i),
                    },
                )
            })
            .collect())
    }

    /// Posterior means as `[n, latent]` matrices `(uir, stl)`.
    pub fn posterior_means(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_input(x)?;
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let g = self.generator.bind(&mut tape);
        let (uir, stl) = g.encode(&mut tape, xv)?;
        Ok((tape.value(uir.mean).clone(), tape.value(stl.mean).clone()))
    }

    /// Discriminator output at the posterior-mean unified representation of
    /// each row of `x`.
    pub fn state_scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let g = self.generator.bind(&mut tape);
        let d = self.discriminator.bind(&mut tape);
        let (uir, stl) = g.encode(&mut tape, xv)?;
        let u = tape.concat(uir.mean, stl.mean)?;
        let p = discriminate_vars(&mut tape, &d, u)?;
        Ok(tape.value(p).data().to_vec())
    }

    /// Discriminator output for explicit unified representations `[n, 2·latent]`.
    pub fn discriminate(&self, u: &Tensor) -> Result<Vec<f64>> {
        match u.shape() {
            [_, w] if *w == 2 * self.latent_dim => {}
            s => {
                return Err(Error::shape(
                    "discriminate",
                    format!("expected [n, {}], got {s:?}", 2 * self.latent_dim),
                ))
            }
        }
        let mut tape = Tape::new();
        let uv = tape.leaf(u.clone());
        let d = self.discriminator.bind(&mut tape);
        let p = discriminate_vars(&mut tape, &d, uv)?;
        Ok(tape.value(p).data().iter().map(|v| v.clamp(1e-12, 1.0 - 1e-12)).collect())
    }
}

/// `mean + exp(log_variance / 2) ∘ noise`.
pub fn reparameterize(code: &LatentCode, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != code.dim() {
        return Err(Error::shape(
            "reparameterize",
            format!("code dim {} vs noise {}", code.dim(), noise.len()),
        ));
    }
    Ok(code
        .mean
        .iter()
        .zip(&code.log_variance)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// UIR part first, then STL.
pub fn unified_representation(z_uir: &[f64], z_stl: &[f64]) -> Result<Vec<f64>> {
    if z_uir.len() != z_stl.len() {
        return Err(Error::shape(
            "unified_representation",
            format!("{} vs {}", z_uir.len(), z_stl.len()),
        ));
    }
    Ok(z_uir.iter().chain(z_stl).copied().collect())
}

/// MLP classifier from features to class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetParams {
    pub net: Mlp,
}

impl TargetParams {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, input_dim: usize, classes: usize, rng: &mut R) -> Self {
        let sizes: Vec<usize> = std::iter::once(input_dim)
            .chain(arch.target_hidden.iter().copied())
            .chain(std::iter::once(classes))
            .collect();
        TargetParams {
            net: Mlp::new(&sizes, arch.activation, false, rng),
        }
    }

    pub fn classes(&self) -> usize {
        self.net.output_dim().unwrap_or(0)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.net.apply(x)
    }

    /// Class probabilities `[n, C]`.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        Ok(softmax(&self.logits(x)?))
    }

    /// One probability vector per row of `x`.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<ProbVector>> {
        let p = self.probabilities(x)?;
        let (n, _) = p.dims2().unwrap_or((0, 0));
        (0..n).map(|i| ProbVector::new(p.row(i).to_vec())).collect()
    }

    /// Activations of the last hidden layer (the input itself when there is none).
    pub fn penultimate(&self, x: &Tensor) -> Result<Tensor> {
        let layers = self.net.layers();
        if layers.len() <= 1 {
            return Ok(x.clone());
        }
        let body = Mlp::from_layers(layers[..layers.len() - 1].to_vec(), self.net.activation, true)?;
        body.apply(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> (SraalParams, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let arch = Architecture {
            latent_dim: 3,
            trunk_hidden: vec![5],
            decoder_hidden: vec![4],
            stl_hidden: vec![],
            disc_hidden: vec![6],
            target_hidden: vec![5],
            activation: Activation::Tanh,
        };
        (SraalParams::new(&arch, 4, 3, &mut rng), rng)
    }

    #[test]
    fn zero_heads_give_standard_codes() {
        let (mut p, _) = small();
        p.generator.head_uir = LatentHead::zeros(5, 3);
        p.generator.head_stl = LatentHead::zeros(5, 3);
        for (a, b) in p.encode(&Tensor::zeros(&[2, 4])).unwrap() {
            assert_eq!(a.mean, vec![0.0; 3]);
            assert_eq!(a.log_variance, vec![0.0; 3]);
            assert_eq!(b.mean, vec![0.0; 3]);
        }
    }

    #[test]
    fn encode_preserves_batch_order_and_width() {
        let (p, mut rng) = small();
        let x = Tensor::randn(&[5, 4], 1.0, &mut rng);
        let batch = p.encode(&x).unwrap();
        assert_eq!(batch.len(), 5);
        for (i, (u, s)) in batch.iter().enumerate() {
            assert_eq!((u.dim(), s.dim()), (3, 3));
            let single = Tensor::from_rows([x.row(i)], 4).unwrap();
            assert_eq!(&p.encode(&single).unwrap()[0].0, u);
        }
        assert!(p.encode(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn reparameterize_cases() {
        let c = LatentCode::new(vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(reparameterize(&c, &[0.0, 0.0]).unwrap(), c.mean);
        assert_eq!(reparameterize(&c, &[0.5, 2.0]).unwrap(), vec![1.5, 1.0]);
        let c = LatentCode::new(vec![0.0; 3], vec![4f64.ln(); 3]).unwrap();
        let z = reparameterize(&c, &[1.0; 3]).unwrap();
        assert!(z.iter().all(|v| (v - 2.0).abs() < 1e-15));
        assert!(reparameterize(&c, &[1.0]).is_err());
    }

    #[test]
    fn unified_representation_order() {
        assert_eq!(unified_representation(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unified_representation(&[0.0; 2], &[0.0; 2]).unwrap(), vec![0.0; 4]);
        assert_ne!(unified_representation(&[1.0], &[2.0]).unwrap(), unified_representation(&[2.0], &[1.0]).unwrap());
    }

    #[test]
    fn zero_discriminator_is_one_half() {
        let (mut p, mut rng) = small();
        p.discriminator.zero();
        let u = Tensor::randn(&[7, 6], 3.0, &mut rng);
        assert!(p.discriminate(&u).unwrap().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn discriminator_range_fuzz() {
        let (p, mut rng) = small();
        let u = Tensor::randn(&[1000, 6], 2.0, &mut rng);
        let d = p.discriminate(&u).unwrap();
        assert_eq!(d.len(), 1000);
        assert!(d.iter().all(|v| *v > 0.0 && *v < 1.0));
        let first = p.discriminate(&Tensor::from_rows([u.row(0)], 6).unwrap()).unwrap();
        assert_eq!(first[0], d[0]);
    }

    #[test]
    fn target_outputs_are_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = TargetParams::new(&Architecture::default(), 4, 5, &mut rng);
        let x = Tensor::randn(&[50, 4], 3.0, &mut rng);
        for v in t.predict(&x).unwrap() {
            assert!((v.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        t.net.zero();
        for v in t.predict(&x).unwrap() {
            assert!(v.probs().iter().all(|p| (p - 0.2).abs() < 1e-15));
        }
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = Tensor::randn(&[20, 4], 2.0, &mut rng);
        let shifted = Tensor::new(vec![20, 4], logits.data().iter().map(|v| v + 17.0).collect()).unwrap();
        let (a, b) = (softmax(&logits), softmax(&shifted));
        let argmax = |t: &Tensor, i: usize| {
            t.row(i).iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0
        };
        for i in 0..20 {
            assert_eq!(argmax(&a, i), argmax(&b, i));
        }
    }

    #[test]
    fn forward_is_pure() {
        let (p, mut rng) = small();
        let x = Tensor::randn(&[9, 4], 1.0, &mut rng);
        let a = p.state_scores(&x).unwrap();
        let b = p.state_scores(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
