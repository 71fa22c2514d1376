//! Online uncertainty indicator and the alternative indicators it is
//! compared against. All functions are pure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this variance a probability vector is treated as uniform.
pub const UNIFORM_VARIANCE: f64 = 1e-15;

/// A point on the probability simplex with at least two classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts vectors whose entries sum to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, 1e-9)
    }

    pub fn with_tolerance(probs: Vec<f64>, tolerance: f64) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tolerance {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(ProbVector(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

/// Indicator value in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct UncertaintyScore(f64);

impl UncertaintyScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Population variance around the simplex mean `1/C`.
pub fn variance(v: &ProbVector) -> f64 {
    let c = v.classes() as f64;
    v.probs().iter().map(|p| (p - 1.0 / c).powi(2)).sum::<f64>() / c
}

/// Smallest variance of any C-class probability vector whose largest entry
/// is `max`: the vector with `max` once and `(1 - max) / (C - 1)` elsewhere.
pub fn min_var(classes: usize, max: f64) -> Result<f64> {
    if classes < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
    }
    let c = classes as f64;
    // Allow the rounding error of a softmax maximum that sits at 1/C.
    if !(max >= 1.0 / c - 1e-12 && max <= 1.0) {
        return Err(Error::invalid(format!("max probability {max} outside [1/{classes}, 1]")));
    }
    let rest = (1.0 - max) / (c - 1.0);
    Ok(((max - 1.0 / c).powi(2) + (c - 1.0) * (rest - 1.0 / c).powi(2)) / c)
}

/// `1 - min_var(C, max V) / var(V) · max V`. A uniform `V` (variance below
/// [`UNIFORM_VARIANCE`]) takes the ratio as 1, so the score is `1 - 1/C`.
pub fn oui_score(v: &ProbVector) -> UncertaintyScore {
    let max = v.max();
    let var = variance(v);
    let ratio = if var < UNIFORM_VARIANCE {
        1.0
    } else {
        min_var(v.classes(), max).expect("max of a probability vector is in [1/C, 1]") / var
    };
    // ratio <= 1 exactly; rounding can push it a hair above for one-hot V.
    UncertaintyScore((1.0 - ratio * max).max(0.0))
}

/// Shannon entropy divided by `ln C`, with `0 · ln 0 = 0`.
pub fn entropy_indicator(v: &ProbVector) -> f64 {
    let h: f64 = v
        .probs()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    (h / (v.classes() as f64).ln()).clamp(0.0, 1.0)
}

/// `1 - sd(V) / sd_max` where `sd_max = sqrt(C - 1) / C` is the one-hot value.
pub fn sd_indicator(v: &ProbVector) -> f64 {
    let c = v.classes() as f64;
    let sd_max = (c - 1.0).sqrt() / c;
    (1.0 - variance(v).sqrt() / sd_max).clamp(0.0, 1.0)
}

/// Which scoring rule relabels unlabeled samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Indicator {
    Oui,
    Entropy,
    Sd,
}

impl Indicator {
    pub fn score(self, v: &ProbVector) -> f64 {
        match self {
            Indicator::Oui => oui_score(v).value(),
            Indicator::Entropy => entropy_indicator(v),
            Indicator::Sd => sd_indicator(v),
        }
    }
}
