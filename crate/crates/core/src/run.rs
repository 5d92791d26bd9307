//! End-to-end runs in the three execution modes, with per-step timing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rusqlite::Connection;
use serde::Serialize;

use crate::constraints::{extract_constraints, ConstraintSet};
use crate::engine::{AdapterRegistry, EngineInput, ResultSet, REFERENCE};
use crate::error::{Error, Result};
use crate::frontends::{
    parse_mapping_with, parse_metadata, parse_query, read_source, scan_header, serialize_mapping, write_source, Query,
};
use crate::functions::FunctionRegistry;
use crate::model::{FunctionArg, MappingDocument, MetadataDocument, ObjectMap, TabularSource, VirtualTabularDataset};
use crate::pipeline::{project, select_annotations, Policy, SelectionPlan, Workspace};
use crate::schema::{
    decide_indexes, load, synthesize_schema, translate_mappings, IndexDecision, LoadManifest, RelationalArtifacts,
    SchemaOptions, DEFAULT_TAU,
};
use crate::validate::validate_vtd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Enhanced,
    Baseline,
    Noselect,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Enhanced, Mode::Baseline, Mode::Noselect];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Enhanced => "enhanced",
            Mode::Baseline => "baseline",
            Mode::Noselect => "noselect",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub mapping_path: PathBuf,
    pub metadata_path: Option<PathBuf>,
    pub query_path: PathBuf,
    pub mode: Mode,
    /// `sqlite://path`, a plain path, or `:memory:`. Defaults to a file in
    /// the working directory.
    pub db_url: Option<String>,
    pub workdir: Option<PathBuf>,
    pub tau: f64,
    pub range_violation: Policy,
    pub keep_intermediate: bool,
    pub engine: String,
    pub repetitions: usize,
    pub no_fk: bool,
    pub no_index: bool,
    /// 0 means the global thread pool.
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(
        data_dir: impl Into<PathBuf>,
        mapping_path: impl Into<PathBuf>,
        metadata_path: Option<PathBuf>,
        query_path: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            data_dir: data_dir.into(),
            mapping_path: mapping_path.into(),
            metadata_path,
            query_path: query_path.into(),
            mode: Mode::Enhanced,
            db_url: None,
            workdir: None,
            tau: DEFAULT_TAU,
            range_violation: Policy::Error,
            keep_intermediate: false,
            engine: REFERENCE.to_string(),
            repetitions: 1,
            no_fk: false,
            no_index: false,
            jobs: 0,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        RunConfig { mode, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Invalid("repetitions must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Invalid(format!(
                "index threshold {} is outside [0, 1]",
                self.tau
            )));
        }
        if !self.data_dir.is_dir() {
            return Err(Error::Invalid(format!(
                "{} is not a directory",
                self.data_dir.display()
            )));
        }
        Ok(())
    }
}

/// Wall times in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepTimes {
    pub selection: f64,
    pub normalization: f64,
    pub preparation: f64,
    pub creation_load: f64,
    pub mapping_translation: f64,
    pub query_execution: f64,
    pub total: f64,
}

impl StepTimes {
    pub const KEYS: [&'static str; 7] = [
        "selection",
        "normalization",
        "preparation",
        "creation_load",
        "mapping_translation",
        "query_execution",
        "total",
    ];

    pub fn step_sum(&self) -> f64 {
        self.selection
            + self.normalization
            + self.preparation
            + self.creation_load
            + self.mapping_translation
            + self.query_execution
    }

    /// Time spent outside the named steps (parsing, bookkeeping).
    pub fn residue(&self) -> f64 {
        self.total - self.step_sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Repetition {
    pub steps: StepTimes,
    pub residue: f64,
    pub answer_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub query: String,
    /// Breakdown of the repetition with the median total.
    pub steps: StepTimes,
    pub residue: f64,
    pub aggregation: &'static str,
    pub answer_count: usize,
    pub bytes_read: u64,
    pub rows_loaded: usize,
    pub repetitions: Vec<Repetition>,
    pub selection: Option<SelectionPlan>,
    pub indexes: Vec<IndexDecision>,
    pub manifest: LoadManifest,
    #[serde(skip)]
    pub results: ResultSet,
    #[serde(skip)]
    pub ddl: String,
    #[serde(skip)]
    pub translated_mapping: String,
    #[serde(skip)]
    pub constraints: ConstraintSet,
    /// Set when intermediate files were kept.
    pub workdir: Option<PathBuf>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned step table, one row per step.
    pub fn to_table(&self) -> String {
        let s = &self.steps;
        let rows = [
            ("Selection", s.selection),
            ("Normalization", s.normalization),
            ("Preparation", s.preparation),
            ("Creation & Load", s.creation_load),
            ("M. Translation", s.mapping_translation),
            ("Query execution", s.query_execution),
            ("Total", s.total),
        ];
        let mut out = format!("{:<18}{:>12}\n", self.mode, "seconds");
        for (name, t) in rows {
            out.push_str(&format!("{name:<18}{t:>12.6}\n"));
        }
        out.push_str(&format!("{:<18}{:>12}\n", "Answers", self.answer_count));
        out
    }
}

/// Parsed inputs shared by every repetition.
struct Inputs {
    query: Query,
    query_name: String,
    mapping: MappingDocument,
    metadata: MetadataDocument,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_inputs(cfg: &RunConfig, registry: &FunctionRegistry) -> Result<Inputs> {
    let query = parse_query(&read_text(&cfg.query_path)?)?;
    let mapping = parse_mapping_with(&read_text(&cfg.mapping_path)?, registry)?;
    let metadata = match &cfg.metadata_path {
        Some(p) => {
            let (md, warnings) = parse_metadata(&read_text(p)?)?;
            for w in warnings {
                log::warn!("{w}");
            }
            md
        }
        None => MetadataDocument::default(),
    };
    let query_name = cfg
        .query_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Inputs {
        query,
        query_name,
        mapping,
        metadata,
    })
}

/// Header-only dataset for validation. Returns the bytes the scan read.
fn validate(cfg: &RunConfig, inputs: &Inputs, registry: &FunctionRegistry) -> Result<u64> {
    let mut sources = Vec::new();
    let mut bytes = 0;
    for path in inputs.mapping.source_paths() {
        let scan = scan_header(&cfg.data_dir, &path, &inputs.metadata)?;
        bytes += scan.bytes;
        sources.push(TabularSource::new(path, scan.columns, Vec::new())?);
    }
    let vtd = VirtualTabularDataset {
        sources,
        ontology_terms: Default::default(),
        mapping: inputs.mapping.clone(),
        metadata: inputs.metadata.clone(),
    };
    let errors: Vec<String> = validate_vtd(&vtd, registry)
        .into_iter()
        .inspect(|d| {
            if !d.is_error() {
                log::warn!("{d}");
            }
        })
        .filter(|d| d.is_error())
        .map(|d| d.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(Error::Invalid(errors.join("; ")));
    }
    Ok(bytes)
}

fn read_all(cfg: &RunConfig, paths: &[String], md: &MetadataDocument) -> Result<(Vec<TabularSource>, u64)> {
    let mut out = Vec::new();
    let mut bytes = 0;
    for p in paths {
        let (s, b) = read_source(&cfg.data_dir, p, md)?;
        bytes += b;
        out.push(s);
    }
    Ok((out, bytes))
}

/// The constraint-free mapping: function objects fall back to their first
/// column argument, or are dropped.
fn baseline_mapping(m: &MappingDocument) -> MappingDocument {
    let mut out = m.clone();
    for tm in &mut out.triples_maps {
        tm.poms.retain_mut(|p| {
            let ObjectMap::Function(call) = &p.object else {
                return true;
            };
            let first = call.args.iter().find_map(|a| match a {
                FunctionArg::Column(c) => Some(c.clone()),
                _ => None,
            });
            match first {
                Some(c) => {
                    p.object = ObjectMap::Reference(c);
                    true
                }
                None => false,
            }
        });
    }
    out
}

fn open_db(url: &str) -> Result<Connection> {
    let path = url.strip_prefix("sqlite://").unwrap_or(url);
    if path.contains("://") {
        return Err(Error::Adapter(format!("unsupported connection string `{url}`")));
    }
    if path == ":memory:" {
        return Connection::open_in_memory().map_err(|e| Error::engine(e, "open"));
    }
    // Cold mode: every repetition starts from an empty database.
    for suffix in ["", "-journal", "-wal", "-shm"] {
        let f = format!("{path}{suffix}");
        if Path::new(&f).exists() {
            std::fs::remove_file(&f).map_err(|e| Error::io(&f, e))?;
        }
    }
    Connection::open(path).map_err(|e| Error::engine(e, "open"))
}

struct Outcome {
    steps: StepTimes,
    results: ResultSet,
    bytes_read: u64,
    plan: Option<SelectionPlan>,
    indexes: Vec<IndexDecision>,
    manifest: LoadManifest,
    ddl: String,
    mapping: String,
    constraints: ConstraintSet,
}

fn timed<T>(slot: &mut f64, step: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let r = f().map_err(|e| Error::AtStep {
        step,
        source: Box::new(e),
    });
    *slot += t.elapsed().as_secs_f64();
    r
}

fn repetition(
    cfg: &RunConfig,
    inputs: &Inputs,
    registry: &FunctionRegistry,
    adapters: &AdapterRegistry,
    db_url: &str,
    workdir: &Path,
) -> Result<Outcome> {
    let start = Instant::now();
    let mut steps = StepTimes::default();
    let mut bytes_read = timed(&mut steps.selection, "validation", || validate(cfg, inputs, registry))?;
    let all_paths = inputs.mapping.source_paths();

    let (sources, mapping, constraints, plan) = match cfg.mode {
        Mode::Enhanced => {
            let (m, md, plan, sources, bytes) = timed(&mut steps.selection, "selection", || {
                let (m, md, plan) = select_annotations(&inputs.query, &inputs.mapping, &inputs.metadata)?;
                let kept: Vec<String> = plan.kept_columns.keys().cloned().collect();
                let (full, bytes) = read_all(cfg, &kept, &inputs.metadata)?;
                let sources = full
                    .iter()
                    .map(|s| project(s, &plan.kept_columns[&s.path]))
                    .collect::<Result<Vec<_>>>()?;
                Ok((m, md, plan, sources, bytes))
            })?;
            bytes_read += bytes;
            let cs = timed(&mut steps.normalization, "constraint extraction", || {
                extract_constraints(&m, &md)
            })?;
            (sources, m, cs, Some(plan))
        }
        Mode::Noselect => {
            let (sources, bytes) = timed(&mut steps.selection, "reading sources", || {
                read_all(cfg, &all_paths, &inputs.metadata)
            })?;
            bytes_read += bytes;
            let cs = timed(&mut steps.normalization, "constraint extraction", || {
                extract_constraints(&inputs.mapping, &inputs.metadata)
            })?;
            (sources, inputs.mapping.clone(), cs, None)
        }
        Mode::Baseline => {
            let (sources, bytes) = timed(&mut steps.creation_load, "reading sources", || {
                read_all(cfg, &all_paths, &MetadataDocument::default())
            })?;
            bytes_read += bytes;
            (
                sources,
                baseline_mapping(&inputs.mapping),
                ConstraintSet::default(),
                None,
            )
        }
    };
    let extracted = constraints.clone();
    let mut ws = Workspace::new(sources, mapping, constraints);
    if cfg.mode != Mode::Baseline {
        timed(&mut steps.normalization, "normalization", || ws.normalize())?;
        timed(&mut steps.preparation, "preparation", || {
            ws.prepare(registry, cfg.range_violation, cfg.jobs)
        })?;
    }
    if cfg.keep_intermediate {
        let dir = workdir.join("intermediate").join(cfg.mode.name());
        for s in &ws.sources {
            write_source(&dir, s)?;
        }
    }

    let (conn, ddl, indexes, manifest) = timed(&mut steps.creation_load, "creation and load", || {
        let options = SchemaOptions { no_fk: cfg.no_fk };
        let mut ddl = synthesize_schema(&ws.sources, &ws.constraints, options)?;
        let enabled = cfg.mode != Mode::Baseline && !cfg.no_index;
        let indexes = decide_indexes(&ws.sources, &ws.constraints, cfg.tau, enabled);
        ddl.add_indexes(&indexes);
        let mut conn = open_db(db_url)?;
        let manifest = load(&mut conn, &ddl, &ws.sources, &ws.constraints, cfg.range_violation)?;
        Ok((conn, ddl, indexes, manifest))
    })?;

    let translated = timed(&mut steps.mapping_translation, "mapping translation", || {
        translate_mappings(&ws.mapping, &ddl)
    })?;

    let artifacts = RelationalArtifacts {
        ddl,
        indexes,
        manifest,
        mapping: translated,
    };
    let results = timed(&mut steps.query_execution, "query execution", || {
        let input = EngineInput {
            artifacts: &artifacts,
            conn: &conn,
            db_url,
        };
        adapters.run_external(&cfg.engine, &inputs.query, &input)
    })?;
    drop(conn);
    steps.total = start.elapsed().as_secs_f64();

    Ok(Outcome {
        steps,
        results,
        bytes_read,
        plan,
        ddl: artifacts.ddl.to_sql(),
        mapping: serialize_mapping(&artifacts.mapping),
        indexes: artifacts.indexes,
        manifest: artifacts.manifest,
        constraints: extracted,
    })
}

/// Runs one mode with the default engines and function registry.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    run_with(cfg, &FunctionRegistry::default(), &AdapterRegistry::default())
}

pub fn run_with(cfg: &RunConfig, registry: &FunctionRegistry, adapters: &AdapterRegistry) -> Result<RunReport> {
    cfg.check()?;
    let inputs = parse_inputs(cfg, registry)?;
    let temp;
    let workdir = match &cfg.workdir {
        Some(w) => {
            std::fs::create_dir_all(w).map_err(|e| Error::io(w, e))?;
            w.clone()
        }
        None => {
            temp = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            temp.path().to_path_buf()
        }
    };
    let db_url = cfg
        .db_url
        .clone()
        .unwrap_or_else(|| workdir.join(format!("{}.sqlite", cfg.mode)).display().to_string());

    let mut outcomes = Vec::with_capacity(cfg.repetitions);
    for i in 0..cfg.repetitions {
        log::info!("{} repetition {}/{}", cfg.mode, i + 1, cfg.repetitions);
        outcomes.push(repetition(cfg, &inputs, registry, adapters, &db_url, &workdir)?);
    }
    let repetitions: Vec<Repetition> = outcomes
        .iter()
        .map(|o| Repetition {
            steps: o.steps,
            residue: o.steps.residue(),
            answer_count: o.results.len(),
        })
        .collect();
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| outcomes[a].steps.total.total_cmp(&outcomes[b].steps.total));
    let median = order[(order.len() - 1) / 2];
    let o = outcomes.swap_remove(median);

    let kept = cfg.keep_intermediate.then(|| match &cfg.workdir {
        Some(w) => w.clone(),
        None => {
            let dest = std::env::temp_dir().join(format!("tabular-obda-{}", std::process::id()));
            let _ = copy_dir(&workdir, &dest);
            dest
        }
    });

    Ok(RunReport {
        mode: cfg.mode,
        query: inputs.query_name,
        steps: o.steps,
        residue: o.steps.residue(),
        aggregation: "median",
        answer_count: o.results.len(),
        bytes_read: o.bytes_read,
        rows_loaded: o.manifest.rows_loaded(),
        repetitions,
        selection: o.plan,
        indexes: o.indexes,
        manifest: o.manifest,
        results: o.results,
        ddl: o.ddl,
        translated_mapping: o.mapping,
        constraints: o.constraints,
        workdir: kept,
    })
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub query: String,
    pub enhanced: RunReport,
    /// Absent when the constraint-free instance cannot evaluate the query.
    pub baseline: Option<RunReport>,
    pub baseline_error: Option<String>,
    pub baseline_answers: usize,
    pub noselect: RunReport,
    /// Baseline total over enhanced total.
    pub speedup_vs_baseline: f64,
    /// No-selection total over enhanced total.
    pub speedup_vs_noselect: f64,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs all three modes and checks that enforcing constraints never loses
/// answers. Each mode gets its own database.
pub fn compare_modes(cfg: &RunConfig) -> Result<CompareReport> {
    compare_modes_with(cfg, &FunctionRegistry::default(), &AdapterRegistry::default())
}

pub fn compare_modes_with(
    cfg: &RunConfig,
    registry: &FunctionRegistry,
    adapters: &AdapterRegistry,
) -> Result<CompareReport> {
    let per_mode = |mode: Mode| {
        let mut c = cfg.with_mode(mode);
        if let Some(url) = &cfg.db_url {
            if url != ":memory:" {
                c.db_url = Some(format!("{url}.{mode}"));
            }
        }
        run_with(&c, registry, adapters)
    };
    let enhanced = per_mode(Mode::Enhanced)?;
    // Untyped columns can make the query itself unanswerable; that counts
    // as no answers rather than a failed comparison.
    let (baseline, baseline_error) = match per_mode(Mode::Baseline) {
        Ok(r) => (Some(r), None),
        Err(e) if matches!(e.root(), Error::UntypedComparison(_) | Error::UnsupportedFeature(_)) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let noselect = per_mode(Mode::Noselect)?;
    let baseline_answers = baseline.as_ref().map_or(0, |b| b.answer_count);
    if enhanced.answer_count < baseline_answers {
        return Err(Error::MonotonicityViolation {
            query: enhanced.query.clone(),
            baseline: baseline_answers,
            enhanced: enhanced.answer_count,
        });
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(CompareReport {
        query: enhanced.query.clone(),
        speedup_vs_baseline: baseline
            .as_ref()
            .map_or(0.0, |b| ratio(b.steps.total, enhanced.steps.total)),
        speedup_vs_noselect: ratio(noselect.steps.total, enhanced.steps.total),
        enhanced,
        baseline,
        baseline_error,
        baseline_answers,
        noselect,
    })
}
