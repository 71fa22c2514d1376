use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Builds a tape with one leaf per parameter, runs `f`, and differentiates.
pub fn analytic_gradient<F>(params: &[Tensor], f: &F) -> Result<(f64, Vec<Tensor>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), grads.collect(&vars)))
}

fn evaluate<F>(params: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let v = tape.value(loss);
    if !v.is_scalar() {
        return Err(Error::shape("grad_check", "loss must be scalar"));
    }
    Ok(v.item())
}

/// Central differences `(f(p + h) - f(p - h)) / 2h`, one element at a time.
pub fn numeric_gradient<F>(params: &[Tensor], h: f64, f: &F) -> Result<Vec<Tensor>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut g = Tensor::zeros(params[pi].shape());
        for ei in 0..params[pi].len() {
            let orig = work[pi].data()[ei];
            work[pi].data_mut()[ei] = orig + h;
            let plus = evaluate(&work, f)?;
            work[pi].data_mut()[ei] = orig - h;
            let minus = evaluate(&work, f)?;
            work[pi].data_mut()[ei] = orig;
            g.data_mut()[ei] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// `max |a - n| / max(1, |n|)` over all elements.
pub fn max_relative_error(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compares the tape gradient of `f` with central differences of step `h`
/// and returns the largest relative error.
pub fn grad_check<F>(params: &[Tensor], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::invalid(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let (_, analytic) = analytic_gradient(params, &f)?;
    let numeric = numeric_gradient(params, h, &f)?;
    Ok(max_relative_error(&analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::randn(&[4, 4], 1.0, &mut rng);
        let x = Tensor::randn(&[4, 1], 1.0, &mut rng);
        // f(x) = sum((A x) ∘ (A x)) + 3 sum(x)
        let err = grad_check(&[x], 1e-4, |tape, v| {
            let av = tape.leaf(a.clone());
            let y = tape.matmul(av, v[0])?;
            let sq = tape.mul(y, y)?;
            let s1 = tape.sum(sq);
            let s2 = tape.sum(v[0]);
            let s2 = tape.scale(s2, 3.0);
            tape.add(s1, s2)
        })
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn step_outside_range_rejected() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(std::slice::from_ref(&x), 1e-2, |t, v| Ok(t.exp(v[0]))).is_err());
        assert!(grad_check(&[x], 1e-9, |t, v| Ok(t.exp(v[0]))).is_err());
    }
}
