//! Training data sources: three synthetic samplers and city-population
//! CSV ingestion with log scaling and min-max normalization to `[-1, 1]`.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

/// Size of the fixed per-run training set.
pub const TRAINING_SET_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Sawtooth,
    Discrete,
    Mixture,
    Cities,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DataKind::Sawtooth => "sawtooth",
            DataKind::Discrete => "discrete",
            DataKind::Mixture => "mixture",
            DataKind::Cities => "cities",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sawtooth" => Ok(DataKind::Sawtooth),
            "discrete" => Ok(DataKind::Discrete),
            "mixture" => Ok(DataKind::Mixture),
            "cities" => Ok(DataKind::Cities),
            other => Err(Error::invalid(format!("unknown data source '{other}'"))),
        }
    }
}

/// A fixed training set plus the seed that produced it.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub kind: DataKind,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl DataSource {
    /// Generate the 10,000-sample training set for a synthetic source.
    pub fn synthetic(kind: DataKind, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, streams::DATA);
        let samples = match kind {
            DataKind::Sawtooth => sample_sawtooth(&mut rng, TRAINING_SET_SIZE),
            DataKind::Discrete => sample_discrete(&mut rng, TRAINING_SET_SIZE),
            DataKind::Mixture => sample_mixture(&mut rng, TRAINING_SET_SIZE),
            DataKind::Cities => {
                return Err(Error::invalid(
                    "cities data comes from a CSV file; use DataSource::cities",
                ))
            }
        };
        Ok(DataSource { kind, samples, seed })
    }

    /// Load a cities CSV and subsample the training set uniformly (with
    /// replacement) using the run seed.
    pub fn cities(path: &Path, population_column: Option<usize>, seed: u64) -> Result<Self> {
        let ingest = load_cities(path, population_column)?;
        let mut rng = stream_rng(seed, streams::DATA);
        let samples = (0..TRAINING_SET_SIZE)
            .map(|_| ingest.values[rng.gen_range(0..ingest.values.len())])
            .collect();
        Ok(DataSource {
            kind: DataKind::Cities,
            samples,
            seed,
        })
    }
}

/// `√U − 1` with `U` uniform on `[0, 1)`: support `[-1, 0]`, CDF `(x+1)²`.
pub fn sample_sawtooth<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.gen::<f64>().sqrt() - 1.0).collect()
}

/// Three atoms `{-0.5, 0, 0.5}` with probabilities `{0.25, 0.5, 0.25}`.
pub fn sample_discrete<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let y: f64 = rng.gen();
            if y < 0.25 {
                -0.5
            } else if y > 0.75 {
                0.5
            } else {
                0.0
            }
        })
        .collect()
}

/// Equal-weight mixture of `Normal(±0.5, 0.05)`, clamped to `[-1, 1]`
/// (the clamp touches a vanishing fraction of the mass).
pub fn sample_mixture<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let center = if rng.gen::<bool>() { 0.5 } else { -0.5 };
            let z: f64 = rng.sample(StandardNormal);
            (center + 0.05 * z).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Outcome of a cities CSV ingestion: normalized values plus row-level
/// diagnostics for everything that was skipped.
#[derive(Debug, Clone)]
pub struct CitiesIngest {
    /// Log populations affinely mapped onto `[-1, 1]`.
    pub values: Vec<f64>,
    /// `(1-based data row, reason)` for every skipped row.
    pub skipped: Vec<(usize, String)>,
}

/// Parse a cities CSV, keep strictly positive populations, take logs, and
/// min-max normalize the logs to `[-1, 1]`.
///
/// The population column is found by a case-insensitive `population`
/// header; `population_column` overrides that lookup.
pub fn load_cities(path: &Path, population_column: Option<usize>) -> Result<CitiesIngest> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;

    let col = match population_column {
        Some(idx) => idx,
        None => {
            let headers = reader
                .headers()
                .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case("population"))
                .ok_or_else(|| {
                    Error::Ingestion(format!(
                        "{}: no 'population' column in header [{}]; pass a column index",
                        path.display(),
                        headers.iter().collect::<Vec<_>>().join(", ")
                    ))
                })?
        }
    };

    let mut logs = Vec::new();
    let mut skipped = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                skipped.push((row, format!("unparseable record: {e}")));
                continue;
            }
        };
        let field = match record.get(col) {
            Some(f) => f.trim(),
            None => {
                skipped.push((row, format!("missing column {col}")));
                continue;
            }
        };
        if field.is_empty() {
            skipped.push((row, "empty population".to_string()));
            continue;
        }
        match field.parse::<f64>() {
            Ok(p) if p > 0.0 && p.is_finite() => logs.push(p.ln()),
            Ok(p) => skipped.push((row, format!("nonpositive population {p}"))),
            Err(_) => skipped.push((row, format!("non-numeric population '{field}'"))),
        }
    }

    if logs.len() < 2 {
        return Err(Error::Ingestion(format!(
            "{}: only {} usable rows ({} skipped); need at least 2",
            path.display(),
            logs.len(),
            skipped.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &logs {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(Error::Ingestion(format!(
            "{}: all log-populations equal ({lo}); cannot normalize",
            path.display()
        )));
    }
    let scale = 2.0 / (hi - lo);
    let values = logs.into_iter().map(|v| (v - lo) * scale - 1.0).collect();
    Ok(CitiesIngest { values, skipped })
}
