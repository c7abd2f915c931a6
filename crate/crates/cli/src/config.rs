//! Experiment configuration: a single TOML file with `[task]`, one or more
//! `[[method]]` tables, `[run]`, and `[output]`.
//!
//! Parsing is strict: unknown keys are rejected, missing required keys are
//! reported by their full dotted path, and every value is range-checked
//! against the preconditions of the module it feeds. The parsed config also
//! carries a fingerprint — a hash of a canonical rendering of the scientific
//! content (`[task]`, `[[method]]`, `[run]`) — that is embedded in every
//! `run_id` so downstream tools can refuse to mix experiments.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use permlab_core::analysis::Objective;
use permlab_core::compressors::{CompressorSpec, Quantizer};
use permlab_core::problems::fingerprint_bytes;

use crate::CliError;

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub methods: Vec<MethodConfig>,
    pub run: RunConfig,
    pub output: OutputConfig,
    /// Hash of the canonical rendering of task + methods + run.
    pub fingerprint: String,
}

/// Which problem instance to build.
#[derive(Debug, Clone)]
pub enum TaskConfig {
    Quadratic {
        n: u32,
        d: u32,
        lambda: f64,
        noise_scale: f64,
        seed: u64,
        artifact: Option<PathBuf>,
    },
    Autoencoder {
        n: u32,
        /// Feature dimension; derived from the image file when one is given.
        d_f: Option<u32>,
        d_e: u32,
        lambda: f64,
        p_hat: f64,
        seed: u64,
        idx_path: Option<PathBuf>,
        /// Synthetic dataset size when no image file is given.
        items: usize,
        artifact: Option<PathBuf>,
    },
}

impl TaskConfig {
    pub fn artifact_path(&self) -> Option<&Path> {
        match self {
            TaskConfig::Quadratic { artifact, .. } => artifact.as_deref(),
            TaskConfig::Autoencoder { artifact, .. } => artifact.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Marina,
    Ef21,
    Gd,
}

impl MethodKind {
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Marina => "marina",
            MethodKind::Ef21 => "ef21",
            MethodKind::Gd => "gd",
        }
    }
}

/// Compressor family named in the config; `k` defaults are resolved against
/// the task shape later.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    Permk,
    Randk,
    RandkShared,
    Topk,
    None,
}

/// Stepsize grammar: an explicit positive number, `"theory"`, or
/// `"theory×{m1,m2,…}"` (ASCII `x` accepted in place of `×`).
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSpec {
    Explicit(f64),
    TheoryTimes(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub method: MethodKind,
    pub compressor: CompressorKind,
    pub p: Option<f64>,
    pub k: Option<u32>,
    pub gamma: GammaSpec,
    /// Wrap the compressor in power-of-two stochastic quantization.
    pub quantize: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rounds: u64,
    pub seeds: Vec<u64>,
    pub objective: Objective,
    pub bits_per_coord: u32,
    pub count_selection_indices: bool,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub csv: bool,
}

// ---------------------------------------------------------------------------
// Strict table reader
// ---------------------------------------------------------------------------

/// Wraps one TOML table with its dotted path for diagnostics and tracks key
/// consumption so unknown fields are reported.
struct Section<'a> {
    path: String,
    table: &'a toml::Table,
    consumed: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a toml::Table) -> Self {
        Section {
            path: path.into(),
            table,
            consumed: BTreeSet::new(),
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a toml::Value> {
        if let Some((stored, value)) = self.table.get_key_value(key) {
            self.consumed.insert(stored.as_str());
            Some(value)
        } else {
            None
        }
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::config(format!("missing required field `{}.{key}`", self.path))
    }

    fn type_err(&self, key: &str, want: &str, got: &toml::Value) -> CliError {
        CliError::config(format!(
            "field `{}.{key}`: expected {want}, found {}",
            self.path,
            got.type_str()
        ))
    }

    fn f64(&mut self, key: &str) -> Result<f64, CliError> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(self.type_err(key, "a number", other)),
        }
    }

    fn u64_field(&mut self, key: &str) -> Result<u64, CliError> {
        self.opt_u64(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(self.type_err(key, "a nonnegative integer", other)),
        }
    }

    fn u32_field(&mut self, key: &str) -> Result<u32, CliError> {
        self.opt_u32(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_u32(&mut self, key: &str) -> Result<Option<u32>, CliError> {
        match self.opt_u64(key)? {
            None => Ok(None),
            Some(v) if v <= u32::MAX as u64 => Ok(Some(v as u32)),
            Some(v) => Err(CliError::config(format!(
                "field `{}.{key}`: {v} does not fit in 32 bits",
                self.path
            ))),
        }
    }

    fn str_field(&mut self, key: &str) -> Result<&'a str, CliError> {
        self.opt_str(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<&'a str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.as_str())),
            Some(other) => Err(self.type_err(key, "a string", other)),
        }
    }

    fn opt_bool(&mut self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(self.type_err(key, "a boolean", other)),
        }
    }

    /// Error on any key that was never consumed.
    fn deny_unknown(self) -> Result<(), CliError> {
        for key in self.table.keys() {
            if !self.consumed.contains(key.as_str()) {
                return Err(CliError::config(format!(
                    "unknown field `{}.{key}`",
                    self.path
                )));
            }
        }
        Ok(())
    }
}

fn positive(path: &str, key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "field `{path}.{key}`: {v} must be a positive finite number"
        )))
    }
}

fn nonnegative(path: &str, key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "field `{path}.{key}`: {v} must be a nonnegative finite number"
        )))
    }
}

fn unit_interval(path: &str, key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "field `{path}.{key}`: {v} must lie in [0, 1]"
        )))
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse and validate a config file's text. `origin` names the file in
/// diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    let root: toml::Value = text
        .parse()
        .map_err(|e| CliError::config(format!("{origin}: {e}")))?;
    let root = root
        .as_table()
        .ok_or_else(|| CliError::config(format!("{origin}: top level must be a table")))?;

    for key in root.keys() {
        if !matches!(key.as_str(), "task" | "method" | "run" | "output") {
            return Err(CliError::config(format!("unknown section `[{key}]`")));
        }
    }

    let task_table = root
        .get("task")
        .ok_or_else(|| CliError::config("missing section `[task]`"))?
        .as_table()
        .ok_or_else(|| CliError::config("`task` must be a table"))?;
    let task = parse_task(task_table)?;

    let methods_value = root
        .get("method")
        .ok_or_else(|| CliError::config("missing section `[[method]]` (at least one)"))?;
    let method_tables = methods_value
        .as_array()
        .ok_or_else(|| CliError::config("`method` must be an array of tables (`[[method]]`)"))?;
    if method_tables.is_empty() {
        return Err(CliError::config("need at least one `[[method]]` entry"));
    }
    let mut methods = Vec::new();
    for (i, entry) in method_tables.iter().enumerate() {
        let table = entry
            .as_table()
            .ok_or_else(|| CliError::config(format!("`method[{i}]` must be a table")))?;
        methods.push(parse_method(table, i)?);
    }

    let run = match root.get("run") {
        None => default_run(),
        Some(v) => parse_run(
            v.as_table()
                .ok_or_else(|| CliError::config("`run` must be a table"))?,
        )?,
    };

    let output = match root.get("output") {
        None => OutputConfig {
            directory: PathBuf::from("out"),
            csv: true,
        },
        Some(v) => parse_output(
            v.as_table()
                .ok_or_else(|| CliError::config("`output` must be a table"))?,
        )?,
    };

    let mut config = ExperimentConfig {
        task,
        methods,
        run,
        output,
        fingerprint: String::new(),
    };
    config.fingerprint = fingerprint_bytes(canonical_form(&config).as_bytes());
    Ok(config)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

fn parse_task(table: &toml::Table) -> Result<TaskConfig, CliError> {
    let mut s = Section::new("task", table);
    let kind = s.str_field("kind")?;
    let task = match kind {
        "quadratic" => {
            let n = s.u32_field("n")?;
            let d = s.u32_field("d")?;
            let lambda = positive("task", "lambda", s.f64("lambda")?)?;
            let noise_scale = nonnegative("task", "noise_scale", s.f64("noise_scale")?)?;
            let seed = s.u64_field("seed")?;
            let artifact = s.opt_str("artifact")?.map(PathBuf::from);
            if n == 0 {
                return Err(CliError::config("field `task.n`: need at least one worker"));
            }
            if d < 2 {
                return Err(CliError::config(
                    "field `task.d`: the tridiagonal stencil needs d >= 2",
                ));
            }
            TaskConfig::Quadratic {
                n,
                d,
                lambda,
                noise_scale,
                seed,
                artifact,
            }
        }
        "autoencoder" => {
            let n = s.u32_field("n")?;
            let d_f = s.opt_u32("d_f")?;
            let d_e = s.u32_field("d_e")?;
            let lambda = nonnegative("task", "lambda", s.f64("lambda")?)?;
            let p_hat = unit_interval("task", "p_hat", s.f64("p_hat")?)?;
            let seed = s.u64_field("seed")?;
            let idx_path = s.opt_str("idx_path")?.map(PathBuf::from);
            let items = s.opt_u64("items")?.unwrap_or(64) as usize;
            let artifact = s.opt_str("artifact")?.map(PathBuf::from);
            if n == 0 {
                return Err(CliError::config("field `task.n`: need at least one worker"));
            }
            if idx_path.is_none() && d_f.is_none() {
                return Err(CliError::config(
                    "field `task.d_f` is required when no `task.idx_path` is given",
                ));
            }
            TaskConfig::Autoencoder {
                n,
                d_f,
                d_e,
                lambda,
                p_hat,
                seed,
                idx_path,
                items,
                artifact,
            }
        }
        other => {
            return Err(CliError::config(format!(
                "field `task.kind`: unknown task kind `{other}` (expected `quadratic` or `autoencoder`)"
            )))
        }
    };
    s.deny_unknown()?;
    Ok(task)
}

fn parse_method(table: &toml::Table, index: usize) -> Result<MethodConfig, CliError> {
    let path = format!("method[{index}]");
    let mut s = Section::new(path.clone(), table);
    let method = match s.str_field("method")? {
        "marina" => MethodKind::Marina,
        "ef21" => MethodKind::Ef21,
        "gd" => MethodKind::Gd,
        other => {
            return Err(CliError::config(format!(
                "field `{path}.method`: unknown method `{other}` (expected `marina`, `ef21`, or `gd`)"
            )))
        }
    };
    let compressor = match s.opt_str("compressor")? {
        None => match method {
            MethodKind::Marina => CompressorKind::Permk,
            MethodKind::Ef21 => CompressorKind::Topk,
            MethodKind::Gd => CompressorKind::None,
        },
        Some("permk") => CompressorKind::Permk,
        Some("randk") => CompressorKind::Randk,
        Some("randk_shared") => CompressorKind::RandkShared,
        Some("topk") => CompressorKind::Topk,
        Some("none") => CompressorKind::None,
        Some(other) => {
            return Err(CliError::config(format!(
                "field `{path}.compressor`: unknown compressor `{other}` \
                 (expected `permk`, `randk`, `randk_shared`, `topk`, or `none`)"
            )))
        }
    };
    let p = s.opt_f64("p")?;
    if let Some(p) = p {
        if !(p.is_finite() && 0.0 < p && p <= 1.0) {
            return Err(CliError::config(format!(
                "field `{path}.p`: {p} must lie in (0, 1]"
            )));
        }
    }
    let k = s.opt_u32("k")?;
    if k == Some(0) {
        return Err(CliError::config(format!(
            "field `{path}.k`: sparsifiers keep at least one coordinate"
        )));
    }
    let gamma = match s.get("gamma") {
        None => GammaSpec::TheoryTimes(vec![1.0]),
        Some(toml::Value::Float(f)) => GammaSpec::Explicit(positive(&path, "gamma", *f)?),
        Some(toml::Value::Integer(i)) => GammaSpec::Explicit(positive(&path, "gamma", *i as f64)?),
        Some(toml::Value::String(text)) => parse_gamma_grammar(text, &path)?,
        Some(other) => {
            return Err(CliError::config(format!(
                "field `{path}.gamma`: expected a number or a theory expression, found {}",
                other.type_str()
            )))
        }
    };
    let quantize = s.opt_bool("quantize")?.unwrap_or(false);
    s.deny_unknown()?;

    // Cross-field structure.
    match method {
        MethodKind::Gd => {
            if compressor != CompressorKind::None {
                return Err(CliError::config(format!(
                    "`{path}`: gd sends exact gradients; drop the compressor field"
                )));
            }
            if p.is_some() || k.is_some() || quantize {
                return Err(CliError::config(format!(
                    "`{path}`: gd takes no compression parameters"
                )));
            }
        }
        MethodKind::Ef21 => {
            if compressor != CompressorKind::Topk {
                return Err(CliError::config(format!(
                    "`{path}`: the memory method needs the contractive `topk` compressor"
                )));
            }
            if p.is_some() {
                return Err(CliError::config(format!(
                    "`{path}`: the memory method has no sync probability; drop `p`"
                )));
            }
            if quantize {
                return Err(CliError::config(format!(
                    "`{path}`: quantization breaks the contraction guarantee; drop `quantize`"
                )));
            }
        }
        MethodKind::Marina => {
            if compressor == CompressorKind::None {
                return Err(CliError::config(format!(
                    "`{path}`: marina needs a compressor (use p = 1.0 for dense rounds)"
                )));
            }
            if compressor == CompressorKind::Topk && matches!(gamma, GammaSpec::TheoryTimes(_)) {
                return Err(CliError::config(format!(
                    "`{path}`: topk is biased, so no theory stepsize exists for marina; \
                     give an explicit gamma"
                )));
            }
            if compressor == CompressorKind::Permk && k.is_some() {
                return Err(CliError::config(format!(
                    "`{path}`: the permutation compressor derives its payload from the \
                     shape; drop `k`"
                )));
            }
        }
    }

    Ok(MethodConfig {
        method,
        compressor,
        p,
        k,
        gamma,
        quantize,
    })
}

/// `"theory"` or `"theory×{m1,m2,…}"` (also ASCII `theoryx{…}`).
fn parse_gamma_grammar(text: &str, path: &str) -> Result<GammaSpec, CliError> {
    let text = text.trim();
    if text == "theory" {
        return Ok(GammaSpec::TheoryTimes(vec![1.0]));
    }
    let rest = text
        .strip_prefix("theory×")
        .or_else(|| text.strip_prefix("theoryx"));
    let bad = || {
        CliError::config(format!(
            "field `{path}.gamma`: `{text}` is not a number, `theory`, or `theory×{{m1,m2,…}}`"
        ))
    };
    let rest = rest.ok_or_else(bad)?.trim();
    let inner = rest
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(bad)?;
    let mut multipliers = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        let m: f64 = part.parse().map_err(|_| {
            CliError::config(format!(
                "field `{path}.gamma`: `{part}` is not a stepsize multiplier"
            ))
        })?;
        if !(m.is_finite() && m > 0.0) {
            return Err(CliError::config(format!(
                "field `{path}.gamma`: multiplier {m} must be positive and finite"
            )));
        }
        multipliers.push(m);
    }
    if multipliers.is_empty() {
        return Err(bad());
    }
    Ok(GammaSpec::TheoryTimes(multipliers))
}

fn default_run() -> RunConfig {
    RunConfig {
        rounds: 1000,
        seeds: vec![1],
        objective: Objective::Nonconvex,
        bits_per_coord: 32,
        count_selection_indices: false,
    }
}

fn parse_run(table: &toml::Table) -> Result<RunConfig, CliError> {
    let mut s = Section::new("run", table);
    let rounds = s.opt_u64("rounds")?.unwrap_or(1000);
    if rounds == 0 {
        return Err(CliError::config("field `run.rounds`: need at least one round"));
    }
    let seeds = match s.get("seeds") {
        None => vec![1],
        Some(toml::Value::Array(items)) => {
            let mut seeds = Vec::new();
            for item in items {
                match item {
                    toml::Value::Integer(i) if *i >= 0 => seeds.push(*i as u64),
                    other => {
                        return Err(CliError::config(format!(
                            "field `run.seeds`: expected nonnegative integers, found {}",
                            other.type_str()
                        )))
                    }
                }
            }
            if seeds.is_empty() {
                return Err(CliError::config("field `run.seeds`: need at least one seed"));
            }
            let mut dedup = seeds.clone();
            dedup.sort_unstable();
            dedup.dedup();
            if dedup.len() != seeds.len() {
                return Err(CliError::config("field `run.seeds`: seeds must be distinct"));
            }
            seeds
        }
        Some(other) => {
            return Err(CliError::config(format!(
                "field `run.seeds`: expected an array of integers, found {}",
                other.type_str()
            )))
        }
    };
    let objective = match s.opt_str("objective")? {
        None | Some("nonconvex") => Objective::Nonconvex,
        Some("pl") => Objective::Pl,
        Some(other) => {
            return Err(CliError::config(format!(
                "field `run.objective`: unknown objective `{other}` (expected `nonconvex` or `pl`)"
            )))
        }
    };
    let bits_per_coord = s.opt_u32("bits_per_coord")?.unwrap_or(32);
    if bits_per_coord == 0 {
        return Err(CliError::config(
            "field `run.bits_per_coord`: coordinates cost at least one bit",
        ));
    }
    let count_selection_indices = s.opt_bool("count_selection_indices")?.unwrap_or(false);
    s.deny_unknown()?;
    Ok(RunConfig {
        rounds,
        seeds,
        objective,
        bits_per_coord,
        count_selection_indices,
    })
}

fn parse_output(table: &toml::Table) -> Result<OutputConfig, CliError> {
    let mut s = Section::new("output", table);
    let directory = PathBuf::from(s.opt_str("directory")?.unwrap_or("out"));
    let csv = s.opt_bool("csv")?.unwrap_or(true);
    s.deny_unknown()?;
    Ok(OutputConfig { directory, csv })
}

// ---------------------------------------------------------------------------
// Canonical form & fingerprint
// ---------------------------------------------------------------------------

/// Deterministic rendering of the scientific content. Field order is fixed,
/// floats are rendered with the shortest round-trip form, defaults are
/// materialized, and `[output]` is excluded (where results land does not
/// change what was computed).
pub fn canonical_form(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    match &config.task {
        TaskConfig::Quadratic {
            n,
            d,
            lambda,
            noise_scale,
            seed,
            artifact: _,
        } => {
            let _ = write!(
                out,
                "task=quadratic;n={n};d={d};lambda={lambda};noise_scale={noise_scale};seed={seed}\n"
            );
        }
        TaskConfig::Autoencoder {
            n,
            d_f,
            d_e,
            lambda,
            p_hat,
            seed,
            idx_path,
            items,
            artifact: _,
        } => {
            let _ = write!(
                out,
                "task=autoencoder;n={n};d_f={:?};d_e={d_e};lambda={lambda};p_hat={p_hat};seed={seed};idx={:?};items={items}\n",
                d_f,
                idx_path.as_ref().map(|p| p.display().to_string()),
            );
        }
    }
    for m in &config.methods {
        let gamma = match &m.gamma {
            GammaSpec::Explicit(g) => format!("={g}"),
            GammaSpec::TheoryTimes(ms) => {
                let list: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                format!("=theory*{{{}}}", list.join(","))
            }
        };
        let _ = write!(
            out,
            "method={};compressor={:?};p={:?};k={:?};gamma{};quantize={}\n",
            m.method.label(),
            m.compressor,
            m.p,
            m.k,
            gamma,
            m.quantize
        );
    }
    let seeds: Vec<String> = config.run.seeds.iter().map(|s| s.to_string()).collect();
    let _ = write!(
        out,
        "run:rounds={};seeds=[{}];objective={:?};bits_per_coord={};count_selection_indices={}\n",
        config.run.rounds,
        seeds.join(","),
        config.run.objective,
        config.run.bits_per_coord,
        config.run.count_selection_indices
    );
    out
}

/// Wrap the compressor choice into a concrete spec for a task shape.
/// `k_default` is the balanced payload `ceil(d/n)` clamped to `[1, d]`.
pub fn resolve_compressor(
    m: &MethodConfig,
    n: u32,
    d: u32,
) -> Result<Option<CompressorSpec>, CliError> {
    let k_default = d.div_ceil(n.max(1)).clamp(1, d);
    let base = match m.compressor {
        CompressorKind::None => return Ok(None),
        CompressorKind::Permk => {
            if d >= n {
                CompressorSpec::PermKBigD
            } else {
                CompressorSpec::PermKBigN
            }
        }
        CompressorKind::Randk => CompressorSpec::RandK {
            k: m.k.unwrap_or(k_default),
            shared: false,
        },
        CompressorKind::RandkShared => CompressorSpec::RandK {
            k: m.k.unwrap_or(k_default),
            shared: true,
        },
        CompressorKind::Topk => CompressorSpec::TopK {
            k: m.k.unwrap_or(k_default),
        },
    };
    let spec = if m.quantize {
        CompressorSpec::Composed {
            inner: Box::new(base),
            quantizer: Quantizer::Pow2Stochastic,
        }
    } else {
        base
    };
    spec.validate(n, d)
        .map_err(|e| CliError::config(format!("compressor does not fit the task shape: {e}")))?;
    Ok(Some(spec))
}

/// Default sync probability for the variance-reduced method: the balanced
/// choice equating dense and compressed expected payloads.
pub fn default_sync_probability(kind: CompressorKind, spec: &CompressorSpec, n: u32, d: u32) -> f64 {
    match kind {
        CompressorKind::Permk => {
            if d >= n {
                1.0 / n as f64
            } else {
                1.0 / d as f64
            }
        }
        CompressorKind::Randk | CompressorKind::RandkShared => {
            let k = match spec {
                CompressorSpec::RandK { k, .. } => *k,
                CompressorSpec::Composed { inner, .. } => match **inner {
                    CompressorSpec::RandK { k, .. } => k,
                    _ => 1,
                },
                _ => 1,
            };
            k as f64 / d as f64
        }
        _ => 1.0,
    }
}
