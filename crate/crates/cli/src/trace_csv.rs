//! Trace CSV schema: one file per run, one row per recorded round.
//!
//! The header is fixed byte-for-byte; numbers use the shortest decimal form
//! that round-trips to the same double, so re-parsing a file reconstructs the
//! in-memory records exactly. The sync flag is written as `1`/`0` and the
//! optimality gap is an empty cell when the minimum is unknown.

use std::path::Path;

use permlab_core::engine::{RunRecord, RunTrace};

use crate::CliError;

/// Exact column set of every trace file.
pub const TRACE_HEADER: [&str; 13] = [
    "run_id",
    "method",
    "compressor",
    "n",
    "d",
    "seed",
    "round",
    "theta",
    "cum_floats_per_node",
    "cum_bits_per_node",
    "grad_norm_sq",
    "f_value",
    "f_gap",
];

/// A trace file parsed back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRun {
    pub run_id: String,
    pub method: String,
    pub compressor: String,
    pub n: u32,
    pub d: u32,
    pub seed: u64,
    pub records: Vec<RunRecord>,
}

impl CsvRun {
    /// Fingerprint tokens embedded in the id: `(config, task)`.
    pub fn fingerprints(&self) -> Result<(String, String), CliError> {
        let mut parts = self.run_id.split('-');
        match (parts.next(), parts.next()) {
            (Some(cfg), Some(task)) if cfg.len() == 16 && task.len() == 16 => {
                Ok((cfg.to_string(), task.to_string()))
            }
            _ => Err(CliError::config(format!(
                "run id `{}` does not start with config/task fingerprints",
                self.run_id
            ))),
        }
    }

    /// Smallest squared gradient norm among rounds whose cumulative bits fit
    /// the budget, with the round and bits where it was reached.
    pub fn best_within_bits(&self, budget: u64) -> Option<(f64, u64, u64)> {
        self.records
            .iter()
            .take_while(|r| r.cum_bits_per_node <= budget)
            .map(|r| (r.grad_norm_sq, r.round, r.cum_bits_per_node))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(format!("{}: {e}", path.display()))
}

/// Write one run's trace. The writer is this file's single owner.
pub fn write_trace(path: &Path, run_id: &str, trace: &RunTrace) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| io_err(path, e))?;
    let meta = &trace.meta;
    for r in &trace.records {
        w.write_record([
            run_id,
            &meta.method,
            &meta.compressor,
            &meta.n.to_string(),
            &meta.d.to_string(),
            &meta.master_seed.to_string(),
            &r.round.to_string(),
            if r.theta { "1" } else { "0" },
            &r.cum_floats_per_node.to_string(),
            &r.cum_bits_per_node.to_string(),
            &r.grad_norm_sq.to_string(),
            &r.f_value.to_string(),
            &r.f_gap.map(|g| g.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Parse a trace file, checking the header and per-run field constancy.
pub fn parse_trace(path: &Path) -> Result<CsvRun, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    {
        let header = reader.headers().map_err(|e| io_err(path, e))?;
        let got: Vec<&str> = header.iter().collect();
        if got != TRACE_HEADER {
            return Err(CliError::config(format!(
                "{}: header mismatch: expected {:?}, found {:?}",
                path.display(),
                TRACE_HEADER,
                got
            )));
        }
    }
    let mut run: Option<CsvRun> = None;
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| io_err(path, e))?;
        let field = |i: usize| -> Result<&str, CliError> {
            row.get(i).ok_or_else(|| {
                CliError::config(format!(
                    "{}: row {} is missing column `{}`",
                    path.display(),
                    line + 2,
                    TRACE_HEADER[i]
                ))
            })
        };
        let parse_num = |i: usize| -> Result<f64, CliError> {
            let text = field(i)?;
            text.parse().map_err(|_| {
                CliError::config(format!(
                    "{}: row {}: `{text}` is not a number in column `{}`",
                    path.display(),
                    line + 2,
                    TRACE_HEADER[i]
                ))
            })
        };
        let parse_u64 = |i: usize| -> Result<u64, CliError> {
            let text = field(i)?;
            text.parse().map_err(|_| {
                CliError::config(format!(
                    "{}: row {}: `{text}` is not an integer in column `{}`",
                    path.display(),
                    line + 2,
                    TRACE_HEADER[i]
                ))
            })
        };
        let theta = match field(7)? {
            "1" => true,
            "0" => false,
            other => {
                return Err(CliError::config(format!(
                    "{}: row {}: sync flag must be 1 or 0, found `{other}`",
                    path.display(),
                    line + 2
                )))
            }
        };
        let gap_text = field(12)?;
        let record = RunRecord {
            round: parse_u64(6)?,
            theta,
            cum_floats_per_node: parse_u64(8)?,
            cum_bits_per_node: parse_u64(9)?,
            grad_norm_sq: parse_num(10)?,
            f_value: parse_num(11)?,
            f_gap: if gap_text.is_empty() {
                None
            } else {
                Some(parse_num(12)?)
            },
        };
        match &mut run {
            None => {
                run = Some(CsvRun {
                    run_id: field(0)?.to_string(),
                    method: field(1)?.to_string(),
                    compressor: field(2)?.to_string(),
                    n: parse_u64(3)? as u32,
                    d: parse_u64(4)? as u32,
                    seed: parse_u64(5)?,
                    records: vec![record],
                });
            }
            Some(run) => {
                if run.run_id != field(0)? {
                    return Err(CliError::config(format!(
                        "{}: row {}: one trace file holds one run, but ids differ",
                        path.display(),
                        line + 2
                    )));
                }
                run.records.push(record);
            }
        }
    }
    run.ok_or_else(|| CliError::config(format!("{}: no data rows", path.display())))
}
