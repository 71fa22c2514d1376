use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{hex_digest, Failure, InitArgs, RunConfig};
use crate::alcore::{run_experiment, trial_seed, LearningCurve, Strategy};
use crate::data::read_csv;
use crate::error::{Error, Result};
use crate::kcenter::{greedy_kcenter, greedy_kcenter_from, EmbeddingSet};
use crate::oui::{entropy_indicator, oui_score, sd_indicator, ProbVector};

/// Row-sum tolerance of the `score` input.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

pub fn curve_file_name(strategy: Strategy, trial: usize) -> String {
    format!("curve_{}_trial{trial}.csv", strategy.name())
}

/// Curve CSV with a `#` provenance line ahead of the column header.
pub fn curve_csv(curve: &LearningCurve, config_hash: &str, master_seed: u64, trial: usize) -> String {
    let mut s = format!(
        "# config_hash={config_hash} seed={master_seed} strategy={} trial={trial} trial_seed={}\n",
        curve.strategy.name(),
        curve.seed
    );
    s.push_str("iteration,labeled_fraction,test_accuracy,mean_indicator,disc_loss,seconds\n");
    for r in &curve.records {
        let disc = r.disc_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{disc},{}",
            r.iteration, r.labeled_fraction, r.test_accuracy, r.mean_indicator, r.seconds
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySummary {
    pub labeled_fraction: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std_accuracy: Vec<f64>,
    pub final_accuracies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub master_seed: u64,
    pub trials: usize,
    pub strategies: BTreeMap<String, StrategySummary>,
    #[serde(skip)]
    pub cells: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-strategy mean and standard deviation at every budget point. Curves
/// of one strategy must share their labeled fractions.
pub fn summarize(curves: &[LearningCurve], config_hash: &str, master_seed: u64, trials: usize) -> Summary {
    let mut by_strategy: BTreeMap<String, Vec<&LearningCurve>> = BTreeMap::new();
    for c in curves {
        by_strategy.entry(c.strategy.name().to_string()).or_default().push(c);
    }
    let strategies = by_strategy
        .into_iter()
        .map(|(name, cs)| {
            let points = cs.iter().map(|c| c.records.len()).min().unwrap_or(0);
            let mut s = StrategySummary {
                labeled_fraction: Vec::with_capacity(points),
                mean_accuracy: Vec::with_capacity(points),
                std_accuracy: Vec::with_capacity(points),
                final_accuracies: cs.iter().filter_map(|c| c.final_accuracy()).collect(),
            };
            for i in 0..points {
                let accs: Vec<f64> = cs.iter().map(|c| c.records[i].test_accuracy).collect();
                let (m, sd) = mean_std(&accs);
                s.labeled_fraction.push(cs[0].records[i].labeled_fraction);
                s.mean_accuracy.push(m);
                s.std_accuracy.push(sd);
            }
            (name, s)
        })
        .collect();
    Summary {
        config_hash: config_hash.to_string(),
        master_seed,
        trials,
        strategies,
        cells: curves.len(),
        out: PathBuf::new(),
    }
}

/// Runs every `(strategy, trial)` cell on `workers` threads. Each cell
/// writes its own curve file; the summary is written after all finish.
pub(super) fn run_trials(cfg: &RunConfig, workers: usize) -> Result<Summary, Failure> {
    let ds = cfg.dataset.load(cfg.seed)?;
    let al = cfg.al_config();
    al.plan(ds.train_ids().len())?;
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.out).map_err(Error::from)?;
    let cells: Vec<(Strategy, usize)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let curves: Vec<LearningCurve> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(strategy, trial)| -> Result<LearningCurve> {
                let curve = run_experiment(&ds, &al, strategy, trial_seed(cfg.seed, trial))?;
                let path = cfg.out.join(curve_file_name(strategy, trial));
                fs::write(path, curve_csv(&curve, &hash, cfg.seed, trial))?;
                Ok(curve)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summary = summarize(&curves, &hash, cfg.seed, cfg.trials);
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    fs::write(cfg.out.join("summary.json"), json).map_err(Error::from)?;
    summary.out = cfg.out.clone();
    Ok(summary)
}

fn data_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Data {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Appends `oui,entropy,sd` columns to a CSV of probability vectors.
pub fn score_table(text: &str) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(data_err(1, "need at least two probability columns"));
    }
    let mut out = format!("# input_sha256={}\n", hex_digest(text.as_bytes()));
    let names: Vec<&str> = header.iter().collect();
    writeln!(out, "{},oui,entropy,sd", names.join(",")).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| data_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(data_err(line, format!("expected {} fields, got {}", header.len(), record.len())));
        }
        let probs = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| data_err(line, format!("non-numeric cell `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let v = ProbVector::with_tolerance(probs, SIMPLEX_TOLERANCE).map_err(|e| data_err(line, e.to_string()))?;
        let fields: Vec<&str> = record.iter().collect();
        writeln!(
            out,
            "{},{},{},{}",
            fields.join(","),
            oui_score(&v).value(),
            entropy_indicator(&v),
            sd_indicator(&v)
        )
        .unwrap();
        rows += 1;
    }
    if rows == 0 {
        return Err(data_err(1, "no data rows"));
    }
    Ok(out)
}

pub(super) fn init_table(args: &InitArgs) -> Result<String> {
    let bytes = fs::read(&args.embeddings)?;
    let table = read_csv(&args.embeddings, false)?;
    let n = table.rows.len();
    let ids = table.ids.clone().unwrap_or_else(|| (0..n).collect());
    let emb = EmbeddingSet::new(table.rows, ids)?;
    let selection = match &args.start {
        Some(start) => greedy_kcenter_from(&emb, args.m, start)?,
        None => greedy_kcenter(&emb, args.m, args.seeds, &mut ChaCha8Rng::seed_from_u64(args.seed))?,
    };
    let params = format!("m={} seeds={} start={:?}", args.m, args.seeds, args.start);
    let mut hashed = bytes;
    hashed.extend_from_slice(params.as_bytes());
    let mut out = format!("# config_hash={} seed={}\n", hex_digest(&hashed), args.seed);
    writeln!(out, "# covering_radius={}", selection.radius).unwrap();
    out.push_str("rank,id\n");
    for (rank, id) in selection.ids.iter().enumerate() {
        writeln!(out, "{rank},{id}").unwrap();
    }
    Ok(out)
}
