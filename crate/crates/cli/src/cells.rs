//! Expand a config into independent (method, stepsize, seed) cells, run them
//! in parallel, and assemble the summary.
//!
//! Each cell owns exactly one output file. The summary is written once, after
//! every cell has finished, and marks diverged runs plus the best stepsize
//! per method (smallest final squared gradient norm, or smallest final gap
//! when the run targets the growth-condition objective).

use std::path::Path;

use rayon::prelude::*;

use permlab_core::analysis::{
    ef21_params, marina_stepsize, Objective, SmoothnessConstants,
};
use permlab_core::compressors::CompressorSpec;
use permlab_core::engine::{
    run_ef21, run_gd, run_marina, MeterConfig, RunSettings, RunTrace,
};
use permlab_core::problems::TaskArtifact;

use crate::config::{
    default_sync_probability, resolve_compressor, ExperimentConfig, GammaSpec, MethodConfig,
    MethodKind,
};
use crate::trace_csv::write_trace;
use crate::CliError;

/// One fully resolved unit of work.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method_index: usize,
    pub method: MethodKind,
    pub spec: Option<CompressorSpec>,
    pub p: f64,
    pub gamma: f64,
    /// `x{m}` for theory-derived stepsizes, `g{value}` for explicit ones.
    pub gamma_label: String,
    pub seed: u64,
    pub run_id: String,
}

/// Outcome of one cell, feeding the summary.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub diverged: bool,
    pub completed_rounds: u64,
    pub final_grad_norm_sq: f64,
    pub final_f_gap: Option<f64>,
    pub final_cum_bits: u64,
}

/// Resolve the per-method parameters against the task shape and constants.
fn resolve_method(
    m: &MethodConfig,
    index: usize,
    n: u32,
    d: u32,
    constants: &SmoothnessConstants,
    objective: Objective,
) -> Result<(Option<CompressorSpec>, f64, Vec<(f64, String)>), CliError> {
    let spec = resolve_compressor(m, n, d)?;
    let p = match (m.method, m.p) {
        (MethodKind::Marina, Some(p)) => p,
        (MethodKind::Marina, None) => {
            let spec = spec.as_ref().expect("marina always has a compressor");
            default_sync_probability(m.compressor, spec, n, d)
        }
        _ => 1.0,
    };
    let theory = || -> Result<f64, CliError> {
        let describe = |e: &dyn std::fmt::Display| {
            CliError::config(format!(
                "method[{index}]: no theory stepsize for this configuration: {e}"
            ))
        };
        match m.method {
            MethodKind::Marina => {
                let spec = spec.as_ref().expect("marina always has a compressor");
                let ab = spec.ab_constants(n, d).map_err(|e| describe(&e))?;
                marina_stepsize(constants, &ab, p, objective).map_err(|e| describe(&e))
            }
            MethodKind::Ef21 => {
                let spec = spec.as_ref().expect("ef21 always has a compressor");
                let alpha = spec.contraction_alpha(d).map_err(|e| describe(&e))?;
                ef21_params(alpha, constants, objective)
                    .map(|par| par.gamma)
                    .map_err(|e| describe(&e))
            }
            MethodKind::Gd => {
                if constants.l_minus > 0.0 {
                    Ok(1.0 / constants.l_minus)
                } else {
                    Err(CliError::config(format!(
                        "method[{index}]: zero smoothness leaves the descent step unbounded"
                    )))
                }
            }
        }
    };
    let gammas = match &m.gamma {
        GammaSpec::Explicit(g) => vec![(*g, format!("g{g}"))],
        GammaSpec::TheoryTimes(ms) => {
            let base = theory()?;
            ms.iter().map(|&mult| (base * mult, format!("x{mult}"))).collect()
        }
    };
    Ok((spec, p, gammas))
}

/// Expand every (method, multiplier, seed) combination.
pub fn expand_cells(
    config: &ExperimentConfig,
    artifact: &TaskArtifact,
) -> Result<Vec<Cell>, CliError> {
    let task = artifact.as_task();
    let n = task.workers() as u32;
    let d = task.dim() as u32;
    let constants = task.smoothness();
    let task_fp = artifact.fingerprint();
    let mut cells = Vec::new();
    for (index, m) in config.methods.iter().enumerate() {
        let (spec, p, gammas) = resolve_method(m, index, n, d, &constants, config.run.objective)?;
        for (gamma, gamma_label) in &gammas {
            for &seed in &config.run.seeds {
                let comp_label = spec
                    .as_ref()
                    .map(|s| s.label())
                    .unwrap_or_else(|| "none".into());
                let run_id = format!(
                    "{}-{}-{}-{}-{}-{}-s{}",
                    config.fingerprint,
                    task_fp,
                    index,
                    m.method.label(),
                    comp_label,
                    gamma_label,
                    seed
                );
                cells.push(Cell {
                    method_index: index,
                    method: m.method,
                    spec: spec.clone(),
                    p,
                    gamma: *gamma,
                    gamma_label: gamma_label.clone(),
                    seed,
                    run_id,
                });
            }
        }
    }
    Ok(cells)
}

/// Run one cell.
pub fn run_cell(cell: &Cell, artifact: &TaskArtifact, config: &ExperimentConfig) -> Result<RunTrace, CliError> {
    let task = artifact.as_task();
    let settings = RunSettings {
        rounds: config.run.rounds,
        master_seed: cell.seed,
        meter: MeterConfig {
            bits_per_coord: config.run.bits_per_coord,
            count_selection_indices: config.run.count_selection_indices,
        },
        f_star: task.f_star(1e-12),
    };
    let describe =
        |e: &dyn std::fmt::Display| CliError::config(format!("run {}: {e}", cell.run_id));
    match cell.method {
        MethodKind::Marina => {
            let spec = cell.spec.as_ref().expect("marina always has a compressor");
            run_marina(task, spec, cell.p, cell.gamma, &settings).map_err(|e| describe(&e))
        }
        MethodKind::Ef21 => {
            let spec = cell.spec.as_ref().expect("ef21 always has a compressor");
            run_ef21(task, spec, cell.gamma, &settings).map_err(|e| describe(&e))
        }
        MethodKind::Gd => run_gd(task, cell.gamma, &settings).map_err(|e| describe(&e)),
    }
}

/// Run every cell in parallel, write one CSV per cell, and return outcomes in
/// cell order.
pub fn run_all(
    cells: &[Cell],
    artifact: &TaskArtifact,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<CellOutcome>, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("{}: {e}", out_dir.display())))?;
    cells
        .par_iter()
        .map(|cell| {
            let trace = run_cell(cell, artifact, config)?;
            let last = trace
                .records
                .last()
                .expect("every run records at least round 0");
            if config.output.csv {
                let path = out_dir.join(format!("{}.csv", cell.run_id));
                write_trace(&path, &cell.run_id, &trace)?;
            }
            Ok(CellOutcome {
                cell: cell.clone(),
                diverged: trace.diverged.is_some(),
                completed_rounds: trace.completed_rounds(),
                final_grad_norm_sq: last.grad_norm_sq,
                final_f_gap: last.f_gap,
                final_cum_bits: last.cum_bits_per_node,
            })
        })
        .collect()
}

/// Write `summary.csv`: per-run outcomes, divergence flags, and a `is_best`
/// mark on the winning stepsize of each method (mean final metric across
/// seeds; any diverged seed disqualifies the stepsize).
pub fn write_summary(
    path: &Path,
    outcomes: &[CellOutcome],
    objective: Objective,
) -> Result<(), CliError> {
    let metric = |o: &CellOutcome| -> f64 {
        match objective {
            Objective::Pl => o.final_f_gap.unwrap_or(o.final_grad_norm_sq),
            Objective::Nonconvex => o.final_grad_norm_sq,
        }
    };

    // Mean metric per (method, stepsize label) over seeds.
    let mut groups: Vec<((usize, &str), (f64, usize, bool))> = Vec::new();
    for o in outcomes {
        let key = (o.cell.method_index, o.cell.gamma_label.as_str());
        let entry = match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, entry)) => entry,
            None => {
                groups.push((key, (0.0, 0, false)));
                &mut groups.last_mut().unwrap().1
            }
        };
        entry.0 += metric(o);
        entry.1 += 1;
        entry.2 |= o.diverged;
    }
    let mut best: Vec<(usize, &str)> = Vec::new();
    let methods: std::collections::BTreeSet<usize> =
        outcomes.iter().map(|o| o.cell.method_index).collect();
    for mi in methods {
        let winner = groups
            .iter()
            .filter(|((i, _), (_, _, diverged))| *i == mi && !diverged)
            .min_by(|(_, (a, ca, _)), (_, (b, cb, _))| {
                (a / *ca as f64).total_cmp(&(b / *cb as f64))
            });
        if let Some(((i, label), _)) = winner {
            best.push((*i, label));
        }
    }

    let io = |e: &dyn std::fmt::Display| CliError::io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record([
        "run_id",
        "method",
        "compressor",
        "gamma",
        "gamma_label",
        "seed",
        "diverged",
        "completed_rounds",
        "final_grad_norm_sq",
        "final_f_gap",
        "final_cum_bits_per_node",
        "is_best",
    ])
    .map_err(|e| io(&e))?;
    for o in outcomes {
        let comp_label = o
            .cell
            .spec
            .as_ref()
            .map(|s| s.label())
            .unwrap_or_else(|| "none".into());
        let is_best = best
            .iter()
            .any(|(i, l)| *i == o.cell.method_index && *l == o.cell.gamma_label);
        w.write_record([
            o.cell.run_id.as_str(),
            o.cell.method.label(),
            &comp_label,
            &o.cell.gamma.to_string(),
            &o.cell.gamma_label,
            &o.cell.seed.to_string(),
            if o.diverged { "1" } else { "0" },
            &o.completed_rounds.to_string(),
            &o.final_grad_norm_sq.to_string(),
            &o.final_f_gap.map(|g| g.to_string()).unwrap_or_default(),
            &o.final_cum_bits.to_string(),
            if is_best { "1" } else { "0" },
        ])
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}
