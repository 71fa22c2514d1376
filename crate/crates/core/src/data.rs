//! Synthetic feature-vector datasets and CSV ingestion.
//!
//! CSV layout: a header `f0,f1,...,f{d-1}` optionally followed by `label`
//! (and optionally preceded by `id`), then one row per sample. Lines
//! starting with `#` are comments.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    GaussianBlobs,
    TwoMoons,
    Rings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    /// Standard deviation of the per-sample Gaussian noise.
    pub dispersion: f64,
    /// Radius of the sphere holding blob centers, or the ring/moon scale.
    pub radius: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            kind: SyntheticKind::GaussianBlobs,
            n: 2000,
            d: 32,
            classes: 8,
            dispersion: 1.0,
            radius: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid(format!("classes = {} must be >= 2", self.classes)));
        }
        if self.n < self.classes {
            return Err(Error::invalid(format!("n = {} must be >= classes = {}", self.n, self.classes)));
        }
        if self.d < 2 {
            return Err(Error::invalid(format!("d = {} must be >= 2", self.d)));
        }
        if !(self.dispersion > 0.0 && self.dispersion.is_finite()) {
            return Err(Error::invalid(format!("dispersion = {} must be > 0", self.dispersion)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("radius = {} must be > 0", self.radius)));
        }
        if self.kind == SyntheticKind::TwoMoons && self.classes != 2 {
            return Err(Error::invalid("two-moons needs exactly 2 classes"));
        }
        Ok(())
    }
}

/// Feature matrix with ground-truth labels and a fixed train/test split.
///
/// The labels stand for the annotator: active-learning code reads them only
/// through [`crate::alcore::Oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
    classes: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    /// `features` is row-major `[n, dim]`; every id lands in exactly one of
    /// `train` / `test`.
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Option<Vec<usize>>,
        classes: usize,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 || !features.len().is_multiple_of(dim) {
            return Err(Error::shape("dataset", format!("{} values with dim {dim}", features.len())));
        }
        let n = features.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::invalid(format!("{} labels for {n} rows", l.len())));
            }
            if let Some(bad) = l.iter().find(|&&y| y >= classes) {
                return Err(Error::invalid(format!("label {bad} >= class count {classes}")));
            }
        }
        let mut seen = vec![false; n];
        for &id in train.iter().chain(&test) {
            if id >= n || seen[id] {
                return Err(Error::invalid(format!("split id {id} out of range or repeated")));
            }
            seen[id] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("split does not cover every id"));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            classes,
            train,
            test,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn train_ids(&self) -> &[usize] {
        &self.train
    }

    pub fn test_ids(&self) -> &[usize] {
        &self.test
    }

    pub fn features(&self, id: usize) -> &[f64] {
        &self.features[id * self.dim..(id + 1) * self.dim]
    }

    /// Ground truth for every row, if the dataset has labels.
    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Feature rows for `ids` as a `[ids.len(), dim]` matrix.
    pub fn batch(&self, ids: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            data.extend_from_slice(self.features(id));
        }
        Tensor::new(vec![ids.len(), self.dim], data).expect("dataset features are finite")
    }

    /// Redraws a stratified split with `train_fraction` of each class in train.
    pub fn stratified_split(&mut self, train_fraction: f64, seed: u64) -> Result<()> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("stratified split needs labels"))?;
        let (train, test) = stratify(labels, self.classes, train_fraction, &mut ChaCha8Rng::seed_from_u64(seed));
        self.train = train;
        self.test = test;
        Ok(())
    }

    /// Shifts and scales every column to zero mean and unit (population)
    /// variance measured over `reference` rows.
    pub fn standardize_with(&mut self, reference: &[usize]) {
        if reference.is_empty() {
            return;
        }
        let d = self.dim;
        let m = reference.len() as f64;
        for j in 0..d {
            let mean = reference.iter().map(|&i| self.features[i * d + j]).sum::<f64>() / m;
            let var = reference
                .iter()
                .map(|&i| (self.features[i * d + j] - mean).powi(2))
                .sum::<f64>()
                / m;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.len() {
                let v = &mut self.features[i * d + j];
                *v = (*v - mean) / sd;
            }
        }
    }
}

fn stratify<R: Rng + ?Sized>(labels: &[usize], classes: usize, frac: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        ids.shuffle(rng);
        let k = (frac * ids.len() as f64).round() as usize;
        train.extend_from_slice(&ids[..k]);
        test.extend_from_slice(&ids[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Builds a synthetic dataset. Deterministic per `spec.seed`; standardized
/// with train statistics; stratified 80/20 split.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d, c) = (spec.n, spec.d, spec.classes);
    let labels: Vec<usize> = (0..c).flat_map(|k| std::iter::repeat_n(k, n / c + usize::from(k < n % c))).collect();
    let mut features = Vec::with_capacity(n * d);

    match spec.kind {
        SyntheticKind::GaussianBlobs => {
            let centers: Vec<Vec<f64>> = (0..c)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| spec.radius * x / norm).collect()
                })
                .collect();
            for &y in &labels {
                for &c in &centers[y][..d] {
                    features.push(c + spec.dispersion * normal(&mut rng));
                }
            }
        }
        SyntheticKind::TwoMoons | SyntheticKind::Rings => {
            for &y in &labels {
                let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let (x0, x1) = match spec.kind {
                    SyntheticKind::TwoMoons if y == 0 => (t.cos(), t.sin()),
                    SyntheticKind::TwoMoons => (1.0 - t.cos(), 0.5 - t.sin()),
                    _ => {
                        let r = (y + 1) as f64;
                        let a = 2.0 * t;
                        (r * a.cos(), r * a.sin())
                    }
                };
                features.push(spec.radius * x0 + spec.dispersion * normal(&mut rng));
                features.push(spec.radius * x1 + spec.dispersion * normal(&mut rng));
                for _ in 2..d {
                    features.push(spec.dispersion * normal(&mut rng));
                }
            }
        }
    }

    let (train, test) = stratify(&labels, c, 0.8, &mut rng);
    let mut ds = Dataset::new(features, d, Some(labels), c, train, test)?;
    let reference = ds.train.clone();
    ds.standardize_with(&reference);
    Ok(ds)
}

/// Parsed CSV contents before any standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub ids: Option<Vec<usize>>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    /// Source line of each row.
    pub lines: Vec<usize>,
}

fn data_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Data {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Parses the feature CSV layout. `has_labels` requires a trailing `label`
/// column; a leading `id` column is accepted either way.
pub fn read_csv(path: &Path, has_labels: bool) -> Result<CsvTable> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    // The reader has already advanced past the header record.
    let header_line = reader.position().line().saturating_sub(1).max(1);
    let mut cols: Vec<&str> = header.iter().collect();
    let has_ids = cols.first() == Some(&"id");
    if has_ids {
        cols.remove(0);
    }
    if has_labels {
        if cols.last() != Some(&"label") {
            return Err(data_err(header_line, "expected a trailing `label` column"));
        }
        cols.pop();
    }
    if cols.is_empty() {
        return Err(data_err(header_line, "no feature columns"));
    }
    for (j, name) in cols.iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(data_err(header_line, format!("column {j} is `{name}`, expected `f{j}`")));
        }
    }
    let d = cols.len();
    let width = d + usize::from(has_ids) + usize::from(has_labels);

    let mut table = CsvTable {
        ids: has_ids.then(Vec::new),
        rows: Vec::new(),
        labels: has_labels.then(Vec::new),
        lines: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(data_err(line, format!("expected {width} fields, got {}", record.len())));
        }
        let mut fields = record.iter();
        if let Some(ids) = &mut table.ids {
            let s = fields.next().unwrap();
            ids.push(s.parse().map_err(|_| data_err(line, format!("bad id `{s}`")))?);
        }
        let mut row = Vec::with_capacity(d);
        for _ in 0..d {
            let s = fields.next().unwrap();
            let v: f64 = s.parse().map_err(|_| data_err(line, format!("non-numeric cell `{s}`")))?;
            if !v.is_finite() {
                return Err(data_err(line, format!("non-finite cell `{s}`")));
            }
            row.push(v);
        }
        table.rows.push(row);
        table.lines.push(line as usize);
        if let Some(labels) = &mut table.labels {
            let s = fields.next().unwrap();
            labels.push(s.parse().map_err(|_| data_err(line, format!("bad label `{s}`")))?);
        }
    }
    if table.rows.is_empty() {
        return Err(data_err(header_line, "no data rows"));
    }
    Ok(table)
}

/// Loads a feature CSV into a [`Dataset`] standardized over all rows. With
/// labels, `classes` bounds them (inferred as `max + 1` when `None`) and the
/// split is stratified 80/20 with `split_seed`; otherwise every row is train.
pub fn load_csv(path: &Path, has_labels: bool, classes: Option<usize>, split_seed: u64) -> Result<Dataset> {
    let table = read_csv(path, has_labels)?;
    let d = table.rows[0].len();
    let n = table.rows.len();
    let classes = match &table.labels {
        Some(labels) => {
            let c = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
            if let Some(i) = labels.iter().position(|&y| y >= c) {
                return Err(Error::Data {
                    line: table.lines[i],
                    msg: format!("label {} >= class count {c}", labels[i]),
                });
            }
            c
        }
        None => 0,
    };
    let features = table.rows.concat();
    let mut ds = Dataset::new(features, d, table.labels, classes, (0..n).collect(), Vec::new())?;
    ds.standardize_with(&(0..n).collect::<Vec<_>>());
    if ds.labels.is_some() {
        ds.stratified_split(0.8, split_seed)?;
    }
    Ok(ds)
}

/// Writes rows in the CSV layout read by [`read_csv`], with `{:?}` floats
/// (shortest round-trip representation).
pub fn write_csv(path: &Path, rows: &[Vec<f64>], labels: Option<&[usize]>) -> Result<()> {
    let d = rows.first().map_or(0, Vec::len);
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
