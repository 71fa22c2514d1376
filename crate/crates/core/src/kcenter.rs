//! Greedy farthest-first k-center selection and an exhaustive oracle for
//! small instances.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Points to cover, each tagged with its dataset id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    points: Vec<Vec<f64>>,
    ids: Vec<usize>,
}

impl EmbeddingSet {
    pub fn new(points: Vec<Vec<f64>>, ids: Vec<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("embedding set is empty"));
        }
        if points.len() != ids.len() {
            return Err(Error::invalid(format!("{} points but {} ids", points.len(), ids.len())));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::shape("embedding_set", format!("point {i} has dim {}, expected {dim}", p.len())));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("point {i} is not finite")));
            }
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate ids in embedding set"));
        }
        Ok(EmbeddingSet { points, ids })
    }

    /// Ids `0..n` in row order.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..points.len()).collect();
        Self::new(points, ids)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn position(&self, id: usize) -> Result<usize> {
        self.ids
            .iter()
            .position(|&x| x == id)
            .ok_or_else(|| Error::invalid(format!("unknown id {id}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterSelection {
    /// Chosen ids in selection order.
    pub ids: Vec<usize>,
    pub radius: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Extends `initial` (row positions) by farthest-first steps until `total`
/// positions are chosen. Returns positions in selection order plus the
/// final squared distance of every point to its nearest chosen point.
/// Ties go to the smallest id.
pub(crate) fn farthest_first(emb: &EmbeddingSet, initial: &[usize], total: usize) -> (Vec<usize>, Vec<f64>) {
    let n = emb.len();
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = Vec::with_capacity(total);
    let mut taken = vec![false; n];
    let absorb = |c: usize, nearest: &mut [f64]| {
        for (i, p) in emb.points.iter().enumerate() {
            let d = sq_dist(p, &emb.points[c]);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    };
    for &c in initial {
        if !taken[c] {
            taken[c] = true;
            chosen.push(c);
            absorb(c, &mut nearest);
        }
    }
    while chosen.len() < total {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = nearest[i] > nearest[b] || (nearest[i] == nearest[b] && emb.ids[i] < emb.ids[b]);
                    Some(if better { i } else { b })
                }
            };
        }
        let Some(u) = best else { break };
        taken[u] = true;
        chosen.push(u);
        absorb(u, &mut nearest);
    }
    (chosen, nearest)
}

/// Farthest-first selection of `m` centers starting from the given ids.
pub fn greedy_kcenter_from(emb: &EmbeddingSet, m: usize, start: &[usize]) -> Result<CenterSelection> {
    if m > emb.len() {
        return Err(Error::invalid(format!("M = {m} exceeds {} points", emb.len())));
    }
    if start.is_empty() || start.len() > m {
        return Err(Error::invalid(format!("need 1 <= start size ({}) <= M ({m})", start.len())));
    }
    let initial = start.iter().map(|&id| emb.position(id)).collect::<Result<Vec<_>>>()?;
    let (chosen, nearest) = farthest_first(emb, &initial, m);
    Ok(CenterSelection {
        ids: chosen.iter().map(|&i| emb.ids[i]).collect(),
        radius: nearest.iter().cloned().fold(0.0, f64::max).sqrt(),
    })
}

/// Picks `seeds` uniformly random points, then adds farthest points until
/// `m` are chosen. Distances are Euclidean.
pub fn greedy_kcenter<R: Rng + ?Sized>(emb: &EmbeddingSet, m: usize, seeds: usize, rng: &mut R) -> Result<CenterSelection> {
    if !(1 <= seeds && seeds <= m) {
        return Err(Error::invalid(format!("need 1 <= I ({seeds}) <= M ({m})")));
    }
    if m > emb.len() {
        return Err(Error::invalid(format!("M = {m} exceeds {} points", emb.len())));
    }
    let mut start: Vec<usize> = sample(rng, emb.len(), seeds).into_iter().map(|i| emb.ids[i]).collect();
    start.sort_unstable();
    greedy_kcenter_from(emb, m, &start)
}

/// Largest distance from any point to its nearest center.
pub fn covering_radius(emb: &EmbeddingSet, centers: &[usize]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::invalid("no centers"));
    }
    let pos = centers.iter().map(|&id| emb.position(id)).collect::<Result<Vec<_>>>()?;
    Ok(radius_of(emb, &pos))
}

fn radius_of(emb: &EmbeddingSet, positions: &[usize]) -> f64 {
    emb.points
        .iter()
        .map(|p| {
            positions
                .iter()
                .map(|&c| sq_dist(p, &emb.points[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Largest instance [`brute_force_optimal_radius`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 16;

/// Minimum covering radius over every `m`-subset of the points.
pub fn brute_force_optimal_radius(emb: &EmbeddingSet, m: usize) -> Result<f64> {
    let n = emb.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::invalid(format!("{n} points exceeds brute-force limit {BRUTE_FORCE_LIMIT}")));
    }
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= M ({m}) <= n ({n})")));
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        best = best.min(radius_of(emb, &subset));
    }
    Ok(best)
}
