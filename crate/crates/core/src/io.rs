//! Prediction-matrix files and tabular experiment output.
//!
//! CSV: header `label,<model ids...>`, one row per point.
//! JSON: `{"model_ids": [...], "labels": [...], "probabilities": [[...], ...]}`.
//! Row numbers in errors are 1-based data rows (the header is row 0).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{AdversarialStudy, SelectionTrace};
use crate::game::{default_model_ids, PredictionDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` means JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn load_predictions(path: &Path, format: Option<Format>) -> Result<PredictionDataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Csv => read_csv(file),
        Format::Json => read_json(file),
    }
}

pub fn save_predictions(dataset: &PredictionDataset, path: &Path, format: Option<Format>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Csv => write_csv(dataset, file),
        Format::Json => write_json(dataset, file),
    }
}

pub fn read_csv(reader: impl Read) -> Result<PredictionDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(Error::MalformedHeader(format!(
            "first column must be `label`, found `{}`",
            header.get(0).unwrap_or("")
        )));
    }
    let model_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if model_ids.is_empty() {
        return Err(Error::MalformedHeader("no probability columns".into()));
    }
    if let Some(pos) = model_ids.iter().position(String::is_empty) {
        return Err(Error::MalformedHeader(format!("column {} has an empty name", pos + 2)));
    }
    let m = model_ids.len();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != m + 1 {
            return Err(Error::RaggedRow {
                row,
                expected: m,
                found: record.len().saturating_sub(1),
            });
        }
        let label = match &record[0] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::NonBinaryLabel {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let probs = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, field)| {
                let p: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ProbabilityOutOfRange {
                        row,
                        column: c + 1,
                        value: p,
                    });
                }
                Ok(p)
            })
            .collect::<Result<Vec<f64>>>()?;
        labels.push(label);
        rows.push(probs);
    }
    PredictionDataset::new(rows, labels, model_ids)
}

pub fn write_csv(dataset: &PredictionDataset, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Io(e.to_string());
    let header = std::iter::once("label".to_string()).chain(dataset.model_ids().iter().cloned());
    wtr.write_record(header).map_err(to_err)?;
    for (row, label) in dataset.probabilities().iter().zip(dataset.labels()) {
        let fields = std::iter::once(label.to_string()).chain(row.iter().map(|p| p.to_string()));
        wtr.write_record(fields).map_err(to_err)?;
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Deserialize)]
struct JsonDataset {
    #[serde(default)]
    model_ids: Option<Vec<String>>,
    labels: Vec<serde_json::Value>,
    probabilities: Vec<Vec<f64>>,
}

pub fn read_json(reader: impl Read) -> Result<PredictionDataset> {
    let raw: JsonDataset = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        row: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let labels = raw
        .labels
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_u64() {
            Some(y @ (0 | 1)) => Ok(y as u8),
            _ => Err(Error::NonBinaryLabel {
                row: i + 1,
                value: v.to_string(),
            }),
        })
        .collect::<Result<Vec<u8>>>()?;
    let m = raw.probabilities.first().map_or(0, Vec::len);
    let model_ids = raw.model_ids.unwrap_or_else(|| default_model_ids(m));
    PredictionDataset::new(raw.probabilities, labels, model_ids)
}

pub fn write_json(dataset: &PredictionDataset, writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, dataset).map_err(|e| Error::Io(e.to_string()))
}

/// Writes flat rows as CSV with a header derived from the field names.
pub fn write_table<T: Serialize>(rows: &[T], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialCsvRow {
    pub ratio: f64,
    pub adversarial_mean: f64,
    pub adversarial_se: f64,
    pub honest_mean: f64,
    pub honest_se: f64,
    pub pooled_se: f64,
    pub separation: f64,
    pub n_positive: usize,
}

pub fn adversarial_rows(study: &AdversarialStudy) -> Vec<AdversarialCsvRow> {
    study
        .rows
        .iter()
        .map(|r| AdversarialCsvRow {
            ratio: r.ratio,
            adversarial_mean: r.adversarial.mean,
            adversarial_se: r.adversarial.standard_error,
            honest_mean: r.honest.mean,
            honest_se: r.honest.standard_error,
            pooled_se: r.pooled_standard_error,
            separation: r.separation(),
            n_positive: r.n_positive,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionCsvRow {
    pub k: usize,
    pub model_added: usize,
    pub shapley: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

pub fn selection_rows(trace: &SelectionTrace) -> Vec<SelectionCsvRow> {
    trace
        .ordering
        .iter()
        .zip(&trace.subensemble_scores)
        .enumerate()
        .map(|(k, (&j, score))| SelectionCsvRow {
            k: k + 1,
            model_added: j,
            shapley: trace.shapley[j],
            accuracy: score.accuracy,
            auc: score.auc,
        })
        .collect()
}
