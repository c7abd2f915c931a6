//! Build the problem instance a config describes, and summarize its
//! smoothness constants and predicted communication budgets.

use std::fmt::Write as _;
use std::path::Path;

use permlab_core::analysis::{
    optimal_params, ComplexityQuery, MethodFamily, Objective, Regime, SmoothnessConstants,
};
use permlab_core::problems::{load_idx_images, AutoencoderTask, QuadraticTask, TaskArtifact};

use crate::config::TaskConfig;
use crate::CliError;

/// Build the task described by the config. When the config points at an
/// artifact file, the file is the source of truth and must exist (write it
/// with `generate`); otherwise the task is generated in memory, which is
/// deterministic in the config's seed.
pub fn build_task(task: &TaskConfig) -> Result<TaskArtifact, CliError> {
    if let Some(path) = task.artifact_path() {
        if path.exists() {
            return TaskArtifact::load(path).map_err(|e| {
                CliError::config(format!("artifact {}: {e}", path.display()))
            });
        }
        return Err(CliError::config(format!(
            "task artifact {} does not exist; run `permlab generate` first or drop `task.artifact`",
            path.display()
        )));
    }
    generate_task(task)
}

/// Generate the task from its parameters, ignoring any artifact path.
pub fn generate_task(task: &TaskConfig) -> Result<TaskArtifact, CliError> {
    match task {
        TaskConfig::Quadratic {
            n,
            d,
            lambda,
            noise_scale,
            seed,
            ..
        } => QuadraticTask::generate(*n, *d, *lambda, *noise_scale, *seed)
            .map(TaskArtifact::Quadratic)
            .map_err(|e| CliError::config(format!("task generation failed: {e}"))),
        TaskConfig::Autoencoder {
            n,
            d_f,
            d_e,
            lambda,
            p_hat,
            seed,
            idx_path,
            items,
            ..
        } => {
            let built = match idx_path {
                Some(path) => {
                    let images = load_idx_images(path).map_err(|e| {
                        CliError::config(format!("image file {}: {e}", path.display()))
                    })?;
                    let width = images.rows * images.cols;
                    if let Some(d_f) = d_f {
                        if *d_f != width {
                            return Err(CliError::config(format!(
                                "field `task.d_f`: {d_f} contradicts the {width}-pixel images in {}",
                                path.display()
                            )));
                        }
                    }
                    let mut rows = images.normalized_rows();
                    if *items > 0 {
                        rows.truncate(*items);
                    }
                    AutoencoderTask::from_dataset(&rows, *n, *d_e, *lambda, *p_hat, *seed)
                }
                None => AutoencoderTask::synthetic(
                    *n,
                    d_f.expect("validated: d_f present without idx_path"),
                    *d_e,
                    *lambda,
                    *p_hat,
                    *seed,
                    *items,
                ),
            };
            built
                .map(TaskArtifact::Autoencoder)
                .map_err(|e| CliError::config(format!("task generation failed: {e}")))
        }
    }
}

/// Target gap and accuracy used for the predicted budgets.
pub struct ReportInputs {
    pub eps: f64,
    pub objective: Objective,
}

/// Human-readable constants report plus predicted per-family budgets.
pub fn constants_report(
    artifact: &TaskArtifact,
    inputs: &ReportInputs,
) -> Result<String, CliError> {
    let task = artifact.as_task();
    let c: SmoothnessConstants = task.smoothness();
    let n = task.workers() as u32;
    let d = task.dim() as u32;
    let f0 = task.value(task.x0());
    // When the minimum is not computable the objective's nonnegativity makes
    // f(x0) itself an upper bound on the initial gap.
    let (delta0, delta0_note) = match task.f_star(1e-12) {
        Some(f_star) => (f0 - f_star, String::new()),
        None => (f0, " (upper bound: minimum unknown, objective >= 0)".into()),
    };

    let mut out = String::new();
    let _ = writeln!(out, "task        {} ({} workers, dimension {})", task.kind_label(), n, d);
    let _ = writeln!(out, "fingerprint {}", artifact.fingerprint());
    let _ = writeln!(out, "constants   {}", if c.exact { "closed-form" } else { "estimated" });
    let _ = writeln!(out, "  L-  = {}", c.l_minus);
    let _ = writeln!(out, "  L+  = {}", c.l_plus);
    let _ = writeln!(out, "  L+- = {}", c.l_pm);
    match c.mu {
        Some(mu) => {
            let _ = writeln!(out, "  mu  = {mu}");
        }
        None => {
            let _ = writeln!(out, "  mu  = unknown");
        }
    }
    let _ = writeln!(out, "  f(x0)   = {f0}");
    let _ = writeln!(out, "  delta0  = {delta0}{delta0_note}");
    let _ = writeln!(
        out,
        "predicted floats per node to reach eps = {} ({:?} objective):",
        inputs.eps, inputs.objective
    );

    let query = ComplexityQuery {
        regime: if d >= n { Regime::DGeN } else { Regime::DLeN },
        objective: inputs.objective,
        constants: c,
        d,
        n,
        delta0,
        eps: inputs.eps,
    };
    for (family, label) in [
        (MethodFamily::MarinaPermK, "marina+permk"),
        (MethodFamily::MarinaRandK, "marina+randk"),
        (MethodFamily::Ef21TopK, "ef21+topk"),
    ] {
        match optimal_params(&query, family) {
            Ok(choice) => {
                let mut params = String::new();
                if let Some(p) = choice.p {
                    let _ = write!(params, "p = {p}");
                }
                if let Some(k) = choice.k {
                    if !params.is_empty() {
                        params.push_str(", ");
                    }
                    let _ = write!(params, "k = {k}");
                }
                let approx = if choice.complexity.approximate {
                    "  [divisibility approximation]"
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    "  {label:<13} {:>14.6e}  at {params}{approx}",
                    choice.complexity.floats_per_node
                );
            }
            Err(e) => {
                let _ = writeln!(out, "  {label:<13} unavailable: {e}");
            }
        }
    }
    Ok(out)
}

/// Save an artifact, creating parent directories.
pub fn save_artifact(artifact: &TaskArtifact, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
        }
    }
    artifact
        .save(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
