//! Per-run metric rows, their CSV form, and the per-cell table built from them.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::path::Path;

use gridx::{aggregate_runs, MetricsRow};
use serde::{Deserialize, Serialize};

use crate::variant::Variant;
use crate::HarnessError;

pub const TEST_CSV: &str = "test.csv";
pub const TRAIN_CSV: &str = "train.csv";
pub const FAILURES_CSV: &str = "failures.csv";

/// One CSV record: a run's identity and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub head: String,
    pub representation: String,
    pub n_train: usize,
    pub seed: u64,
    pub completion: f64,
    pub over_min: Option<f64>,
    pub trivially_wrong: f64,
    pub imbalance: Option<f64>,
}

impl RunRecord {
    pub fn new(variant: Variant, n_train: usize, seed: u64, m: &MetricsRow) -> Self {
        Self {
            method: variant.method_label().to_string(),
            head: variant.head().name().to_string(),
            representation: variant.representation().name().to_string(),
            n_train,
            seed,
            completion: m.completion_rate,
            over_min: m.over_minimum,
            trivially_wrong: m.trivially_wrong,
            imbalance: m.imbalance,
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        Variant::from_columns(&self.method, &self.head, &self.representation)
    }

    pub fn metrics(&self) -> MetricsRow {
        MetricsRow {
            completion_rate: self.completion,
            over_minimum: self.over_min,
            trivially_wrong: self.trivially_wrong,
            imbalance: self.imbalance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub method: String,
    pub head: String,
    pub representation: String,
    pub n_train: usize,
    pub seed: u64,
    pub kind: String,
    pub detail: String,
}

/// Reads every record of a CSV file; a missing file reads as empty.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Appends one record, writing the header first when the file is new or empty.
pub fn append_csv<T: Serialize>(path: &Path, record: &T) -> Result<(), HarnessError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file: File = OpenOptions::new().create(true).append(true).open(path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    writer.serialize(record)?;
    writer.flush()?;
    writer.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?.sync_data()?;
    Ok(())
}

/// Overwrites `path` with `records` behind a header.
pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Raw per-seed rows for one (variant, n_train) cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cell {
    pub test: BTreeMap<u64, MetricsRow>,
    pub train: BTreeMap<u64, MetricsRow>,
}

impl Cell {
    pub fn test_mean(&self) -> Option<MetricsRow> {
        aggregate_runs(&self.test.values().copied().collect::<Vec<_>>()).ok()
    }

    pub fn train_mean(&self) -> Option<MetricsRow> {
        aggregate_runs(&self.train.values().copied().collect::<Vec<_>>()).ok()
    }

    /// Seeds with both a test and a train row.
    pub fn finished_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        self.test.keys().copied().filter(|s| self.train.contains_key(s))
    }
}

/// All persisted results, keyed by (variant, n_train).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub cells: BTreeMap<(Variant, usize), Cell>,
}

impl ResultsTable {
    pub fn insert_test(&mut self, variant: Variant, n_train: usize, seed: u64, row: MetricsRow) {
        self.cells.entry((variant, n_train)).or_default().test.insert(seed, row);
    }

    pub fn insert_train(&mut self, variant: Variant, n_train: usize, seed: u64, row: MetricsRow) {
        self.cells.entry((variant, n_train)).or_default().train.insert(seed, row);
    }

    pub fn cell(&self, variant: Variant, n_train: usize) -> Option<&Cell> {
        self.cells.get(&(variant, n_train))
    }

    pub fn is_done(&self, variant: Variant, n_train: usize, seed: u64) -> bool {
        self.cell(variant, n_train)
            .is_some_and(|c| c.test.contains_key(&seed) && c.train.contains_key(&seed))
    }

    /// Loads `test.csv` and `train.csv` from `dir`. Rows naming an unknown
    /// variant are rejected; a repeated (variant, n, seed) keeps the last row.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let mut table = ResultsTable::default();
        for (file, is_test) in [(TEST_CSV, true), (TRAIN_CSV, false)] {
            for rec in read_csv::<RunRecord>(&dir.join(file))? {
                let v = rec.variant().ok_or_else(|| {
                    HarnessError::Config(format!(
                        "{file}: unknown method/head/representation {}/{}/{}",
                        rec.method, rec.head, rec.representation
                    ))
                })?;
                if is_test {
                    table.insert_test(v, rec.n_train, rec.seed, rec.metrics());
                } else {
                    table.insert_train(v, rec.n_train, rec.seed, rec.metrics());
                }
            }
        }
        Ok(table)
    }

    /// Test rows and train rows in a stable order.
    pub fn records(&self) -> (Vec<RunRecord>, Vec<RunRecord>) {
        let mut test = Vec::new();
        let mut train = Vec::new();
        for (&(v, n), cell) in &self.cells {
            test.extend(cell.test.iter().map(|(&s, m)| RunRecord::new(v, n, s, m)));
            train.extend(cell.train.iter().map(|(&s, m)| RunRecord::new(v, n, s, m)));
        }
        (test, train)
    }

    /// Writes `test.csv` and `train.csv` into `dir`, replacing existing files.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let (test, train) = self.records();
        write_csv(&dir.join(TEST_CSV), &test)?;
        write_csv(&dir.join(TRAIN_CSV), &train)
    }
}
