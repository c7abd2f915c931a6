//! Rank finished runs at a shared communication budget.
//!
//! Every trace must come from the same experiment (config fingerprint) on
//! the same problem instance (task fingerprint); mixing is refused. For the
//! given cumulative-bit budget the report shows each run's smallest squared
//! gradient norm reachable within budget, and a gnuplot-ready two-column
//! file (`cum_bits_per_node grad_norm_sq`) is written next to each trace.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::trace_csv::{parse_trace, CsvRun};
use crate::CliError;

pub struct CompareOutcome {
    /// Rendered ranking table.
    pub table: String,
    /// Written .dat files.
    pub dat_paths: Vec<PathBuf>,
}

struct Ranked {
    run: CsvRun,
    best: f64,
    at_round: u64,
    at_bits: u64,
}

pub fn compare(
    trace_paths: &[PathBuf],
    budget_bits: u64,
    out_dir: Option<&Path>,
) -> Result<CompareOutcome, CliError> {
    if trace_paths.is_empty() {
        return Err(CliError::config("compare needs at least one trace file"));
    }
    let mut runs = Vec::new();
    for path in trace_paths {
        runs.push((path.clone(), parse_trace(path)?));
    }

    // One experiment, one task.
    let (cfg0, task0) = runs[0].1.fingerprints()?;
    for (path, run) in &runs {
        let (cfg, task) = run.fingerprints()?;
        if task != task0 {
            return Err(CliError::config(format!(
                "{}: task fingerprint {task} does not match {task0}; \
                 these runs solved different problems",
                path.display()
            )));
        }
        if cfg != cfg0 {
            return Err(CliError::config(format!(
                "{}: config fingerprint {cfg} does not match {cfg0}; \
                 these runs came from different experiment definitions",
                path.display()
            )));
        }
    }

    let mut ranked = Vec::new();
    let mut dat_paths = Vec::new();
    for (path, run) in runs {
        let (best, at_round, at_bits) = run
            .best_within_bits(budget_bits)
            .expect("every trace has a zero-cost round-0 row");
        let dat_path = match out_dir {
            Some(dir) => dir.join(format!(
                "{}.dat",
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| run.run_id.clone())
            )),
            None => path.with_extension("dat"),
        };
        write_dat(&dat_path, &run)?;
        dat_paths.push(dat_path);
        ranked.push(Ranked {
            run,
            best,
            at_round,
            at_bits,
        });
    }
    ranked.sort_by(|a, b| a.best.total_cmp(&b.best));

    let mut table = String::new();
    let _ = writeln!(
        table,
        "budget: {budget_bits} bits per node; smallest grad_norm_sq within budget"
    );
    let _ = writeln!(
        table,
        "{:<5} {:<7} {:>14} {:>8} {:>14}  {}",
        "rank", "tie", "grad_norm_sq", "round", "bits", "run_id"
    );
    let mut prev: Option<f64> = None;
    let mut rank = 0usize;
    for (i, r) in ranked.iter().enumerate() {
        let tied = prev.is_some_and(|p| p == r.best);
        if !tied {
            rank = i + 1;
        }
        let _ = writeln!(
            table,
            "{:<5} {:<7} {:>14.6e} {:>8} {:>14}  {}",
            rank,
            if tied { "tie" } else { "" },
            r.best,
            r.at_round,
            r.at_bits,
            r.run.run_id
        );
        prev = Some(r.best);
    }
    Ok(CompareOutcome { table, dat_paths })
}

/// Two columns per row: cumulative bits, squared gradient norm.
fn write_dat(path: &Path, run: &CsvRun) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
        }
    }
    let io = |e: &dyn std::fmt::Display| CliError::io(format!("{}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(|e| io(&e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# cum_bits_per_node grad_norm_sq ({})", run.run_id).map_err(|e| io(&e))?;
    for r in &run.records {
        writeln!(w, "{} {}", r.cum_bits_per_node, r.grad_norm_sq).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}
