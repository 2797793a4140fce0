//! Experiment runner behind the `giem` binary.

mod compare;
mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use compare::{compare_runs, ColumnDiff, DiffReport, FileDiff};
pub use config::{
    CombinatoricsSection, ConvergenceSection, DenjoySection, DiagnosticsSection, ExperimentConfig, ExperimentKind,
    MapSpec, MartingaleSection, PrecisionSpec,
};

use crate::error::{Error, Result};
use crate::giem::Giem;
use crate::numerics::{ArithmeticMode, BigFloat, PrecisionContext, Rational, Real};
use experiments::{Outcome, Outputs};

/// A named pass/fail verdict produced by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }
}

/// Everything written to `run.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub mode: ArithmeticMode,
    pub float_bits: Option<u32>,
    pub wall_ms: f64,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub result: Value,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join("run.json") } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", file.display())))
    }
}

fn dispatch<T: Real>(f: Arc<Giem<T>>, cfg: &ExperimentConfig, ctx: &PrecisionContext, out: &mut Outputs) -> Result<Outcome> {
    match cfg.kind {
        ExperimentKind::Convergence => experiments::convergence(f, cfg, ctx, out),
        ExperimentKind::Martingale => experiments::martingale(f, cfg, ctx, out),
        ExperimentKind::Denjoy => experiments::denjoy(f, cfg, out),
        ExperimentKind::Combinatorics => experiments::combinatorics(f, cfg, out),
        ExperimentKind::Diagnostics => experiments::diagnostics(f, cfg, ctx, out),
    }
}

/// Runs the experiment and writes `run.json` plus its tables into `out` (or the configured directory).
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunRecord> {
    cfg.validate()?;
    let dir: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", cfg.kind.name())));
    fs::create_dir_all(&dir)?;
    let ctx = cfg.precision.context()?;
    let desc = cfg.map.descriptor()?;
    let mut outputs = Outputs { dir: dir.clone(), files: Vec::new() };
    let start = Instant::now();
    let outcome = match ctx.mode {
        ArithmeticMode::ExactRational => dispatch(desc.build_arc::<Rational>(&())?, cfg, &ctx, &mut outputs),
        ArithmeticMode::ExtendedFloat => {
            dispatch(desc.build_arc::<BigFloat>(&ctx.float_bits)?, cfg, &ctx, &mut outputs)
        }
    }?;
    let record = RunRecord {
        tool: "giem".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        mode: ctx.mode,
        float_bits: (ctx.mode == ArithmeticMode::ExtendedFloat).then_some(ctx.float_bits),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        files: outputs.files,
        checks: outcome.checks,
        result: outcome.result,
    };
    let body = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("run.json"), body)?;
    Ok(record)
}

/// Process exit code for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::InvalidFamilyParams(_) | Error::BadPrecision(_) => 2,
        Error::NotRenormalizable { .. } => 3,
        Error::TilingViolation(_)
        | Error::NonConvergent(_)
        | Error::GridInadequate(_)
        | Error::SignConventionViolation(_)
        | Error::OutOfDomain(_) => 4,
        _ => 1,
    }
}

/// Machine-readable description of a failure.
pub fn failure_report(e: &Error) -> Value {
    let code = exit_code(e);
    let mut v = json!({ "exit_code": code, "error": e.to_string() });
    if let Error::NotRenormalizable { depth, .. } = e {
        v["depth"] = json!(depth);
    }
    if let Error::NonConvergent(_) = e {
        v["hint"] = json!("raise precision.max_quad_panels or loosen precision.quad_tol");
    } else if code == 3 || code == 4 {
        v["hint"] = json!("raise float_bits (or lower depth)");
    }
    v
}
