//! Observation generation, origin-destination table ingestion, and chain
//! persistence.
//!
//! Synthetic observations follow the solve-perturb-clip-renormalize recipe:
//! solve the forward problem at a known truth, add i.i.d. Gaussian noise to
//! every entry, set negative entries to zero, and renormalize onto the
//! simplex. Chain files are a single JSON header line followed by
//! line-oriented float records, so long runs can stream-append and the files
//! stay greppable.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::CostStructure;
use crate::error::{Error, Result};
use crate::mcmc::{forward_map, BlockAccept, ChainConfig, ChainOutput, LatentState};
use crate::simplex::ProbMatrix;
use crate::transport::SolverChoice;

/// Where an observation came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        truth: LatentState,
        sigma: f64,
        seed: u64,
        solver: SolverChoice,
    },
    Ingested {
        source: String,
    },
}

/// A normalized observation plus provenance. `structure` is present for
/// synthetic data (the cost model that generated it) and absent for ingested
/// tables, where the model is chosen at inference time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub n: usize,
    pub observation: ProbMatrix,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<CostStructure>,
}

impl ObservationRecord {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)
            .map_err(|e| Error::Ingest(format!("cannot write observation: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(&path)?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            Error::Ingest(format!(
                "cannot read observation {}: {e}",
                path.as_ref().display()
            ))
        })
    }
}

/// Solve, perturb, clip, renormalize. Deterministic given `seed`: the noise
/// matrix is drawn row-major from a ChaCha8 stream seeded with it.
pub fn generate_synthetic(
    truth: &LatentState,
    structure: &CostStructure,
    sigma: f64,
    seed: u64,
    solver: &SolverChoice,
) -> Result<ObservationRecord> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    if !truth.in_unit_box() {
        return Err(Error::Config("truth state lies outside the unit box".into()));
    }
    let clean = forward_map(truth, structure, solver)?;
    let n = clean.n();

    let observation = if sigma == 0.0 {
        clean
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noisy = clean.as_array().clone();
        for x in noisy.iter_mut() {
            let eta: f64 = rng.sample(StandardNormal);
            *x = (*x + sigma * eta).max(0.0);
        }
        let total = noisy.sum();
        if total <= 0.0 {
            return Err(Error::DegenerateObservation);
        }
        ProbMatrix::new(&noisy / total)?
    };

    Ok(ObservationRecord {
        n,
        observation,
        provenance: Provenance::Synthetic {
            truth: truth.clone(),
            sigma,
            seed,
            solver: solver.clone(),
        },
        structure: Some(structure.clone()),
    })
}

/// Which side reported a flow count.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reporter {
    Receiving,
    Sending,
}

/// How to pick between the two reported tables.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    Receiving,
    Sending,
    /// Cell-by-cell choice, indexed `[origin][destination]`.
    PerPair(Vec<Vec<Reporter>>),
}

/// An assembled origin-destination table: selected counts plus, per cell,
/// which side reported them. Diagonals are zero (no self-flows).
#[derive(Clone, Debug, PartialEq)]
pub struct MigrationTable {
    pub country_codes: Vec<String>,
    pub reported: Array2<f64>,
    pub reporter: Vec<Vec<Reporter>>,
}

impl MigrationTable {
    /// Parse the flow CSV format: header `origin,reporter,<code>,...` where
    /// the trailing header fields fix the country order, then one row per
    /// `(origin, R|S)` holding nonnegative integer counts toward each
    /// destination in header order.
    pub fn from_csv_reader(reader: impl Read, selection: &Selection) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::Ingest(format!("bad header: {e}")))?
            .clone();
        if headers.len() < 3 {
            return Err(Error::Ingest(
                "header must be `origin,reporter,<code>,...` with at least one country".into(),
            ));
        }
        let codes: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let n = codes.len();
        let index_of = |code: &str| codes.iter().position(|c| c == code);

        let mut receiving: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut sending: Vec<Option<Vec<f64>>> = vec![None; n];
        for (line, record) in csv.records().enumerate() {
            let record = record.map_err(|e| Error::Ingest(format!("row {}: {e}", line + 2)))?;
            if record.len() != 2 + n {
                return Err(Error::Ingest(format!(
                    "row {}: expected {} fields, got {}",
                    line + 2,
                    2 + n,
                    record.len()
                )));
            }
            let origin = record.get(0).unwrap_or("");
            let Some(row_idx) = index_of(origin) else {
                return Err(Error::Ingest(format!(
                    "row {}: unknown origin {origin:?}",
                    line + 2
                )));
            };
            let table = match record.get(1).unwrap_or("") {
                "R" => &mut receiving,
                "S" => &mut sending,
                other => {
                    return Err(Error::Ingest(format!(
                        "row {}: reporter must be R or S, got {other:?}",
                        line + 2
                    )))
                }
            };
            if table[row_idx].is_some() {
                return Err(Error::Ingest(format!(
                    "row {}: duplicate entry for origin {origin}",
                    line + 2
                )));
            }
            let mut counts = Vec::with_capacity(n);
            for (k, field) in record.iter().skip(2).enumerate() {
                let count: u64 = field.parse().map_err(|_| {
                    Error::Ingest(format!(
                        "row {}, column {}: count {field:?} is not a nonnegative integer",
                        line + 2,
                        codes[k]
                    ))
                })?;
                counts.push(count as f64);
            }
            table[row_idx] = Some(counts);
        }

        let fetch = |table: &[Option<Vec<f64>>], i: usize, j: usize, side: &str| -> Result<f64> {
            table[i].as_ref().map(|row| row[j]).ok_or_else(|| {
                Error::Ingest(format!(
                    "missing {side} row for origin {} (needed for pair {} -> {})",
                    codes[i], codes[i], codes[j]
                ))
            })
        };

        let mut reported = Array2::zeros((n, n));
        let mut reporter = vec![vec![Reporter::Receiving; n]; n];
        for i in 0..n {
            for j in 0..n {
                let side = match selection {
                    Selection::Receiving => Reporter::Receiving,
                    Selection::Sending => Reporter::Sending,
                    Selection::PerPair(cells) => {
                        let row = cells.get(i).ok_or_else(|| {
                            Error::Ingest(format!("per-pair selection missing row {i}"))
                        })?;
                        *row.get(j).ok_or_else(|| {
                            Error::Ingest(format!("per-pair selection missing cell ({i}, {j})"))
                        })?
                    }
                };
                reporter[i][j] = side;
                // Origin-destination tables have no self-flows.
                if i == j {
                    continue;
                }
                reported[[i, j]] = match side {
                    Reporter::Receiving => fetch(&receiving, i, j, "R")?,
                    Reporter::Sending => fetch(&sending, i, j, "S")?,
                };
            }
        }
        Ok(Self {
            country_codes: codes,
            reported,
            reporter,
        })
    }

    pub fn from_csv(path: impl AsRef<Path>, selection: &Selection) -> Result<Self> {
        let file = std::fs::File::open(&path)?;
        Self::from_csv_reader(BufReader::new(file), selection)
    }

    /// Normalize the selected counts into an observation.
    pub fn to_observation(&self, source: String) -> Result<ObservationRecord> {
        let total = self.reported.sum();
        if total <= 0.0 {
            return Err(Error::Ingest(
                "selected table has zero total flow, cannot normalize".into(),
            ));
        }
        Ok(ObservationRecord {
            n: self.country_codes.len(),
            observation: ProbMatrix::new(&self.reported / total)?,
            provenance: Provenance::Ingested { source },
            structure: None,
        })
    }
}

/// Read a flow CSV and normalize it into an observation in one step.
pub fn ingest_migration_csv(
    path: impl AsRef<Path>,
    selection: &Selection,
) -> Result<ObservationRecord> {
    let table = MigrationTable::from_csv(&path, selection)?;
    table.to_observation(path.as_ref().display().to_string())
}

const CHAIN_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ChainHeader {
    version: u32,
    config: ChainConfig,
    n_u: usize,
    n_v: usize,
    n_theta: usize,
    n_samples: usize,
    n_iterations: usize,
    n_components: usize,
    accept: BlockAccept,
    solver_failures: u64,
}

fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}")) // shortest round-trip decimal
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_floats(line: &str, what: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Corrupt(format!("bad float {tok:?} in {what} record")))
        })
        .collect()
}

/// Write a finished chain and its configuration.
///
/// Format: one JSON header line (version, config, dimensions, acceptance
/// counters) followed by `S,` sample rows, `R,` running-mean rows, and `M,`
/// misfit rows, all in shortest round-trip decimal so floats reload
/// bit-identically.
pub fn persist_chain(
    output: &ChainOutput,
    config: &ChainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let (n_u, n_v, n_theta) = output
        .samples
        .first()
        .map(|s| (s.u.len(), s.v.len(), s.theta.len()))
        .unwrap_or((0, 0, 0));
    let header = ChainHeader {
        version: CHAIN_FILE_VERSION,
        config: config.clone(),
        n_u,
        n_v,
        n_theta,
        n_samples: output.samples.len(),
        n_iterations: output.misfit_trace.len(),
        n_components: output.running_means.first().map_or(0, Vec::len),
        accept: output.accept,
        solver_failures: output.solver_failures,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut file, &header)
        .map_err(|e| Error::Corrupt(format!("cannot encode header: {e}")))?;
    file.write_all(b"\n")?;
    for sample in &output.samples {
        let mut row = Vec::with_capacity(n_u + n_v + n_theta);
        row.extend_from_slice(&sample.u);
        row.extend_from_slice(&sample.v);
        row.extend_from_slice(&sample.theta);
        writeln!(file, "S,{}", fmt_floats(&row))?;
    }
    for means in &output.running_means {
        writeln!(file, "R,{}", fmt_floats(means))?;
    }
    for phi in &output.misfit_trace {
        writeln!(file, "M,{phi:?}")?;
    }
    file.flush()?;
    Ok(())
}

/// Load a chain written by [`persist_chain`]. Rejects unknown versions and
/// reports truncated or inconsistent bodies as corrupt.
pub fn load_chain(path: impl AsRef<Path>) -> Result<(ChainOutput, ChainConfig)> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Corrupt("empty chain file".into()))??;
    let value: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| Error::Corrupt(format!("bad header line: {e}")))?;
    let found = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt("header has no version field".into()))?;
    if found != CHAIN_FILE_VERSION as u64 {
        return Err(Error::Version {
            found: found as u32,
            expected: CHAIN_FILE_VERSION,
        });
    }
    let header: ChainHeader = serde_json::from_value(value)
        .map_err(|e| Error::Corrupt(format!("bad header contents: {e}")))?;

    let mut samples = Vec::with_capacity(header.n_samples);
    let mut running_means = Vec::with_capacity(header.n_samples);
    let mut misfit_trace = Vec::with_capacity(header.n_iterations);
    let state_len = header.n_u + header.n_v + header.n_theta;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("S,") {
            let row = parse_floats(rest, "sample")?;
            if row.len() != state_len {
                return Err(Error::Corrupt(format!(
                    "sample row has {} values, expected {state_len}",
                    row.len()
                )));
            }
            samples.push(LatentState {
                u: row[..header.n_u].to_vec(),
                v: row[header.n_u..header.n_u + header.n_v].to_vec(),
                theta: row[header.n_u + header.n_v..].to_vec(),
            });
        } else if let Some(rest) = line.strip_prefix("R,") {
            let row = parse_floats(rest, "running-mean")?;
            if row.len() != header.n_components {
                return Err(Error::Corrupt(format!(
                    "running-mean row has {} values, expected {}",
                    row.len(),
                    header.n_components
                )));
            }
            running_means.push(row);
        } else if let Some(rest) = line.strip_prefix("M,") {
            misfit_trace.push(
                rest.parse::<f64>()
                    .map_err(|_| Error::Corrupt(format!("bad misfit value {rest:?}")))?,
            );
        } else {
            return Err(Error::Corrupt(format!(
                "unrecognized record prefix in line {line:?}"
            )));
        }
    }
    if samples.len() != header.n_samples {
        return Err(Error::Corrupt(format!(
            "expected {} samples, found {}",
            header.n_samples,
            samples.len()
        )));
    }
    if running_means.len() != header.n_samples {
        return Err(Error::Corrupt(format!(
            "expected {} running-mean rows, found {}",
            header.n_samples,
            running_means.len()
        )));
    }
    if misfit_trace.len() != header.n_iterations {
        return Err(Error::Corrupt(format!(
            "expected {} misfit values, found {}",
            header.n_iterations,
            misfit_trace.len()
        )));
    }
    Ok((
        ChainOutput {
            samples,
            accept: header.accept,
            misfit_trace,
            running_means,
            solver_failures: header.solver_failures,
        },
        header.config,
    ))
}
