//! End-to-end tests of the `permlab` binary: config diagnostics, artifact
//! determinism, the run grid, CSV schema and round-trip, comparison, exit
//! codes, and the image-file task path.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use permlab_core::analysis::{
    marina_stepsize, optimal_params, ComplexityQuery, MethodFamily, Objective, Regime,
};
use permlab_core::compressors::CompressorSpec;
use permlab_core::engine::{run_marina, RunSettings};
use permlab_core::problems::{DistributedTask, QuadraticTask};

fn permlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name().is_some_and(|f| f != "summary.csv")
        })
        .collect();
    files.sort();
    files
}

const QUAD_FLAT: &str = r#"
[task]
kind = "quadratic"
n = 4
d = 16
lambda = 1e-6
noise_scale = 0.0
seed = 11

[[method]]
method = "marina"
compressor = "permk"

[run]
rounds = 40
seeds = [1]

[output]
directory = "out"
"#;

#[test]
fn generate_is_deterministic_and_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "exp.toml", QUAD_FLAT);

    let a = permlab(
        &[
            "generate",
            cfg.to_str().unwrap(),
            "--artifact",
            "task_a.bin",
        ],
        dir.path(),
    );
    assert!(a.status.success(), "{}", stderr(&a));
    let b = permlab(
        &[
            "generate",
            cfg.to_str().unwrap(),
            "--artifact",
            "task_b.bin",
        ],
        dir.path(),
    );
    assert!(b.status.success(), "{}", stderr(&b));
    let bytes_a = std::fs::read(dir.path().join("task_a.bin")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("task_b.bin")).unwrap();
    assert_eq!(bytes_a, bytes_b, "same config must yield identical artifacts");

    // The zero-heterogeneity task has L+- = 0, and the report's permutation
    // budget matches the closed-form optimum computed directly.
    let text = stdout(&a);
    assert!(text.contains("L+- = 0"), "{text}");
    let task = QuadraticTask::generate(4, 16, 1e-6, 0.0, 11).unwrap();
    let c = task.smoothness();
    let f0 = task.value(task.x0());
    let f_star = task.f_star(1e-12).unwrap();
    let q = ComplexityQuery {
        regime: Regime::DGeN,
        objective: Objective::Nonconvex,
        constants: c,
        d: 16,
        n: 4,
        delta0: f0 - f_star,
        eps: 1e-3,
    };
    let choice = optimal_params(&q, MethodFamily::MarinaPermK).unwrap();
    assert_eq!(choice.p, Some(0.25), "flat task prefers rare syncs at p = 1/n");
    let expected_line = format!("{:>14.6e}", choice.complexity.floats_per_node);
    assert!(
        text.contains(expected_line.trim()),
        "report should contain {expected_line}, got:\n{text}"
    );
    assert!(text.contains("p = 0.25"), "{text}");
}

#[test]
fn missing_lambda_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let broken = QUAD_FLAT.replace("lambda = 1e-6\n", "");
    let cfg = write_config(dir.path(), "exp.toml", &broken);
    let out = permlab(&["generate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("task.lambda"), "{}", stderr(&out));
}

#[test]
fn run_grid_expands_and_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = QUAD_FLAT
        .replace("noise_scale = 0.0", "noise_scale = 0.3")
        .replace(
            "compressor = \"permk\"",
            "compressor = \"permk\"\ngamma = \"theory×{1, 0.5}\"",
        )
        .replace("seeds = [1]", "seeds = [1, 2]");
    let cfg = write_config(dir.path(), "exp.toml", &text);
    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let out_dir = dir.path().join("out");
    let files = csv_files(&out_dir);
    assert_eq!(files.len(), 4, "2 multipliers x 2 seeds: {files:?}");
    let ids: std::collections::BTreeSet<String> = files
        .iter()
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(ids.len(), 4, "run ids must be distinct");

    // Exact header bytes on every trace.
    let expected_header = "run_id,method,compressor,n,d,seed,round,theta,\
         cum_floats_per_node,cum_bits_per_node,grad_norm_sq,f_value,f_gap";
    for file in &files {
        let content = std::fs::read_to_string(file).unwrap();
        assert_eq!(content.lines().next().unwrap(), expected_header, "{file:?}");
        assert_eq!(content.lines().count(), 1 + 41, "header + 41 records");
    }

    // Re-run the x1/seed-1 cell through the library and demand the parsed
    // CSV reproduce it record-for-record.
    let task = QuadraticTask::generate(4, 16, 1e-6, 0.3, 11).unwrap();
    let c = task.smoothness();
    let spec = CompressorSpec::PermKBigD;
    let ab = spec.ab_constants(4, 16).unwrap();
    let gamma = marina_stepsize(&c, &ab, 0.25, Objective::Nonconvex).unwrap();
    let mut settings = RunSettings::new(40, 1);
    settings.f_star = task.f_star(1e-12);
    let trace = run_marina(&task, &spec, 0.25, gamma, &settings).unwrap();
    let target = files
        .iter()
        .find(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            name.contains("-x1-s1.")
        })
        .expect("x1/seed-1 trace exists");
    let content = std::fs::read_to_string(target).unwrap();
    let mut rows = content.lines().skip(1);
    for record in &trace.records {
        let row = rows.next().expect("row per record");
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[6], record.round.to_string());
        assert_eq!(cols[7], if record.theta { "1" } else { "0" });
        assert_eq!(cols[8], record.cum_floats_per_node.to_string());
        assert_eq!(cols[9], record.cum_bits_per_node.to_string());
        assert_eq!(cols[10].parse::<f64>().unwrap(), record.grad_norm_sq);
        assert_eq!(cols[11].parse::<f64>().unwrap(), record.f_value);
        assert_eq!(
            cols[12].parse::<f64>().unwrap(),
            record.f_gap.expect("quadratic minimum is known")
        );
    }

    // Summary: one winning stepsize per method, marked on both its seeds.
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let best_rows: Vec<&str> = summary
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .collect();
    assert_eq!(best_rows.len(), 2, "one best label x two seeds:\n{summary}");
    let mark: std::collections::BTreeSet<&str> = best_rows
        .iter()
        .map(|l| l.split(',').nth(4).unwrap())
        .collect();
    assert_eq!(mark.len(), 1, "both marked rows share the winning label");
}

#[test]
fn always_sync_matches_plain_descent_and_compare_ties() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[task]
kind = "quadratic"
n = 3
d = 12
lambda = 1e-5
noise_scale = 0.4
seed = 5

[[method]]
method = "marina"
compressor = "permk"
p = 1.0

[[method]]
method = "gd"

[run]
rounds = 50
seeds = [3]

[output]
directory = "out"
"#;
    let cfg = write_config(dir.path(), "exp.toml", text);
    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let files = csv_files(&dir.path().join("out"));
    assert_eq!(files.len(), 2);

    // Equal theory stepsizes (no compression noise at p = 1), so the curves
    // coincide column-for-column.
    let column = |path: &Path, idx: usize| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(idx).unwrap().to_string())
            .collect()
    };
    assert_eq!(column(&files[0], 10), column(&files[1], 10), "grad_norm_sq");
    assert_eq!(column(&files[0], 11), column(&files[1], 11), "f_value");

    let out = permlab(
        &[
            "compare",
            "--budget",
            "100000",
            files[0].to_str().unwrap(),
            files[1].to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("tie"), "equal runs must tie:\n{table}");
    for file in &files {
        let dat = file.with_extension("dat");
        let content = std::fs::read_to_string(&dat).unwrap();
        assert_eq!(
            content.lines().filter(|l| !l.starts_with('#')).count(),
            51,
            "one dat row per record"
        );
        let first = content
            .lines()
            .find(|l| !l.starts_with('#'))
            .unwrap()
            .to_string();
        assert!(first.starts_with("0 "), "round 0 costs nothing: {first}");
    }

    // Comparing a run against itself is also a tie.
    let out = permlab(
        &[
            "compare",
            "--budget",
            "100000",
            files[0].to_str().unwrap(),
            files[0].to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("tie"));
}

#[test]
fn compare_refuses_runs_from_different_tasks() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed, outdir) in [("a.toml", 11, "out_a"), ("b.toml", 12, "out_b")] {
        let text = QUAD_FLAT
            .replace("seed = 11", &format!("seed = {seed}"))
            .replace("directory = \"out\"", &format!("directory = \"{outdir}\""));
        let cfg = write_config(dir.path(), name, &text);
        let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = csv_files(&dir.path().join("out_a"));
    let b = csv_files(&dir.path().join("out_b"));
    let out = permlab(
        &[
            "compare",
            "--budget",
            "1000000",
            a[0].to_str().unwrap(),
            b[0].to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("fingerprint"), "{}", stderr(&out));
}

#[test]
fn divergence_is_reported_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = QUAD_FLAT.replace(
        "compressor = \"permk\"",
        "compressor = \"permk\"\ngamma = 1e6",
    );
    let cfg = write_config(dir.path(), "exp.toml", &text);
    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stdout(&out).contains("DIVERGED"), "{}", stdout(&out));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(6).unwrap(), "1", "diverged flag: {row}");
}

#[test]
fn image_file_task_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();

    // Rank-3 unsigned-byte IDX container: 6 images of 3x3 pixels.
    let mut idx: Vec<u8> = Vec::new();
    idx.extend(0x0000_0803u32.to_be_bytes());
    idx.extend(6u32.to_be_bytes());
    idx.extend(3u32.to_be_bytes());
    idx.extend(3u32.to_be_bytes());
    idx.extend((0..54).map(|i| (40 * (i % 7)) as u8));
    std::fs::write(dir.path().join("digits.idx"), &idx).unwrap();

    let text = r#"
[task]
kind = "autoencoder"
n = 2
d_e = 2
lambda = 1e-3
p_hat = 0.5
seed = 9
idx_path = "digits.idx"
items = 0

[[method]]
method = "ef21"
compressor = "topk"
k = 4

[run]
rounds = 6
seeds = [1]

[output]
directory = "out"
"#;
    let cfg = write_config(dir.path(), "exp.toml", text);

    let constants = permlab(&["constants", cfg.to_str().unwrap()], dir.path());
    assert!(constants.status.success(), "{}", stderr(&constants));
    let report = stdout(&constants);
    assert!(report.contains("estimated"), "{report}");
    assert!(report.contains("dimension 36"), "two 9x2 factors: {report}");

    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let files = csv_files(&dir.path().join("out"));
    assert_eq!(files.len(), 1);
    let content = std::fs::read_to_string(&files[0]).unwrap();
    for line in content.lines().skip(1) {
        assert!(line.ends_with(','), "f_gap must be empty (minimum unknown): {line}");
    }

    // A wrong declared width is caught against the image file.
    let clash = text.replace("idx_path = \"digits.idx\"", "idx_path = \"digits.idx\"\nd_f = 25");
    let cfg2 = write_config(dir.path(), "clash.toml", &clash);
    let out = permlab(&["constants", cfg2.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("d_f"), "{}", stderr(&out));
}

#[test]
fn artifact_flow_feeds_run_and_missing_artifact_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let text = QUAD_FLAT.replace(
        "seed = 11",
        "seed = 11\nartifact = \"task.bin\"",
    );
    let cfg = write_config(dir.path(), "exp.toml", &text);

    // Run before generate: the declared artifact does not exist yet.
    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("generate"), "{}", stderr(&out));

    let out = permlab(&["generate", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("task.bin").exists());

    let out = permlab(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(csv_files(&dir.path().join("out")).len(), 1);
}
