//! Deterministic CSV emission and trajectory CSV scoring input.
//!
//! All floats are printed with 17 significant digits so two runs of the same
//! experiment are byte-comparable and every value round-trips exactly.
//! Wall-clock timings go to a separate `timing.csv`, never into the
//! deterministic files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fl::{RoundRecord, RoundSink};
use crate::metrics::AccuracyTrajectory;

/// 17-significant-digit float formatting (`round,0.5,...` stays bit-exact).
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    ))
}

fn write_line(w: &mut BufWriter<File>, path: &Path, line: &str) -> Result<()> {
    w.write_all(line.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Streams rounds into `rounds.csv`, `weights.csv`, and `timing.csv`,
/// flushing after every round so partial logs survive failures.
pub struct CsvSink {
    rounds_path: PathBuf,
    weights_path: PathBuf,
    timing_path: PathBuf,
    rounds: BufWriter<File>,
    weights: BufWriter<File>,
    timing: BufWriter<File>,
    client_count: usize,
    cumulative_secs: f64,
    headers_written: bool,
}

impl CsvSink {
    pub fn create(dir: &Path, client_count: usize) -> Result<Self> {
        let rounds_path = dir.join("rounds.csv");
        let weights_path = dir.join("weights.csv");
        let timing_path = dir.join("timing.csv");
        Ok(CsvSink {
            rounds: create(&rounds_path)?,
            weights: create(&weights_path)?,
            timing: create(&timing_path)?,
            rounds_path,
            weights_path,
            timing_path,
            client_count,
            cumulative_secs: 0.0,
            headers_written: false,
        })
    }

    fn write_headers(&mut self) -> Result<()> {
        let mut header = String::from("round,global_acc,mean_local_acc");
        for k in 0..self.client_count {
            header.push_str(&format!(",client_{k}"));
        }
        for k in 0..self.client_count {
            header.push_str(&format!(",sampled_{k}"));
        }
        write_line(&mut self.rounds, &self.rounds_path, &header)?;
        write_line(
            &mut self.weights,
            &self.weights_path,
            "round,client,train_accuracy,diversity,weight",
        )?;
        write_line(
            &mut self.timing,
            &self.timing_path,
            "round,duration_secs,cumulative_secs,global_acc",
        )?;
        self.headers_written = true;
        Ok(())
    }
}

impl RoundSink for CsvSink {
    fn record(&mut self, r: &RoundRecord) -> Result<()> {
        if !self.headers_written {
            self.write_headers()?;
        }
        let mut line = format!(
            "{},{},{}",
            r.round,
            format_float(r.global_test_accuracy),
            format_float(r.mean_local_accuracy())
        );
        for v in &r.local_test_accuracy {
            line.push(',');
            line.push_str(&format_float(*v));
        }
        for k in 0..self.client_count {
            line.push(',');
            line.push(if r.sampled.contains(&k) { '1' } else { '0' });
        }
        write_line(&mut self.rounds, &self.rounds_path, &line)?;

        for (entry, &acc) in r.weights.entries.iter().zip(&r.train_accuracies) {
            let line = format!(
                "{},{},{},{},{}",
                r.round,
                entry.client_id,
                format_float(acc),
                format_float(entry.diversity),
                format_float(entry.weight)
            );
            write_line(&mut self.weights, &self.weights_path, &line)?;
        }

        self.cumulative_secs += r.duration_secs;
        let line = format!(
            "{},{},{},{}",
            r.round,
            format_float(r.duration_secs),
            format_float(self.cumulative_secs),
            format_float(r.global_test_accuracy)
        );
        write_line(&mut self.timing, &self.timing_path, &line)
    }
}

/// A parsed trajectory CSV: the accuracy column plus optional per-client
/// history columns (`client_<k>` paired with `sampled_<k>`).
#[derive(Debug, Clone)]
pub struct TrajectoryCsv {
    pub trajectory: AccuracyTrajectory,
    /// `client id → (row index, accuracy)` for rows where the client was
    /// sampled.
    pub sampled_history: BTreeMap<usize, Vec<(usize, f64)>>,
    /// `client id → accuracy` in the final row.
    pub final_accuracy: BTreeMap<usize, f64>,
}

/// Parse a trajectory CSV. The header must contain an `accuracy` column (the
/// name `global_acc` is accepted as an alias); malformed rows report their
/// 1-based line number.
pub fn parse_trajectory_csv(text: &str) -> Result<TrajectoryCsv> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Parse { line: 1, message: "empty file".to_string() })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let acc_col = columns
        .iter()
        .position(|&c| c == "accuracy" || c == "global_acc")
        .ok_or(Error::Parse {
            line: 1,
            message: "missing `accuracy` column".to_string(),
        })?;

    let mut client_cols: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sampled_cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &c) in columns.iter().enumerate() {
        if let Some(id) = c.strip_prefix("client_").and_then(|s| s.parse().ok()) {
            client_cols.insert(id, i);
        } else if let Some(id) = c.strip_prefix("sampled_").and_then(|s| s.parse().ok()) {
            sampled_cols.insert(id, i);
        }
    }

    let mut values = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{} fields, expected {}", fields.len(), columns.len()),
            });
        }
        let v: f64 = fields[acc_col].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad accuracy value {:?}", fields[acc_col]),
        })?;
        values.push(v);
        rows.push(fields.iter().map(|s| s.to_string()).collect());
    }
    let trajectory = AccuracyTrajectory::new(values)
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;

    let mut sampled_history: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut final_accuracy: BTreeMap<usize, f64> = BTreeMap::new();
    let last_row = rows.len() - 1;
    for (&id, &col) in &client_cols {
        let parse_at = |row: usize| -> Result<f64> {
            rows[row][col].parse().map_err(|_| Error::Parse {
                line: row + 2,
                message: format!("bad value {:?} in column client_{id}", rows[row][col]),
            })
        };
        final_accuracy.insert(id, parse_at(last_row)?);
        if let Some(&scol) = sampled_cols.get(&id) {
            for (row, fields) in rows.iter().enumerate().take(last_row) {
                if fields[scol] == "1" {
                    sampled_history.entry(id).or_default().push((row, parse_at(row)?));
                }
            }
        }
    }
    Ok(TrajectoryCsv { trajectory, sampled_history, final_accuracy })
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryCsv> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_trajectory_csv(&text)
}
