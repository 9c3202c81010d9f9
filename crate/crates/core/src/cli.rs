//! The `jumpset` command-line interface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 data error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classify::{ClassifyConfig, Classifier, PointClass};
use crate::decompose::{cone_from_params, cover_with_graphs, sweep, verify_cone_property, SweepConfig, SweepResult};
use crate::error::Error;
use crate::extended::{extended_config, phi_apply};
use crate::gf1::{read_grid, write_grid};
use crate::grid::{Ball, GridFunction};
use crate::report::{class_counts, class_pgm, point_records, SCHEMA_VERSION};
use crate::synth::{corpus_spec, generate, list_corpus, CorpusSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jumpset", version, about = "Blowup analysis of jump sets in sampled functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate corpus grids with ground-truth sidecars.
    Gen(GenArgs),
    /// Classify every grid point by its blowup.
    Classify(ClassifyArgs),
    /// Extract E-sets over a grid of (delta, r0, ball) parameters.
    Esets(EsetArgs),
    /// Check the cone property of a point set.
    Verify(CheckArgs),
    /// Cover a point set by Lipschitz graphs.
    Cover(CheckArgs),
    /// Classification plus decomposition summary.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Corpus names (e.g. disk_256) or paths to spec JSON files.
    pub specs: Vec<String>,
    /// Generate the whole corpus.
    #[arg(long)]
    pub all: bool,
    /// List corpus names and exit.
    #[arg(long)]
    pub list: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ToleranceArgs {
    #[arg(long)]
    pub tol_cauchy: Option<f64>,
    #[arg(long)]
    pub tol_const: Option<f64>,
    #[arg(long)]
    pub tol_jump: Option<f64>,
    #[arg(long)]
    pub sep_min: Option<f64>,
    /// Ratio between consecutive radii.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Largest radius as a fraction of the distance to the boundary.
    #[arg(long)]
    pub boundary_fraction: Option<f64>,
    /// Largest radius in cells.
    #[arg(long)]
    pub max_radius_cells: Option<f64>,
    /// Smallest radius in cells.
    #[arg(long)]
    pub min_radius_cells: Option<f64>,
    /// Lattice points per axis of the unit-ball sample.
    #[arg(long)]
    pub lattice: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// GF1 header of the input grid.
    pub input: PathBuf,
    /// Analyse arctan(u) so that infinite values are allowed.
    #[arg(long)]
    pub extended: bool,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DecompositionArgs {
    /// Oscillation thresholds (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Rational ball family depth.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Truncation scales (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub r0: Vec<f64>,
    /// Pairs closer than this many cells are ignored.
    #[arg(long)]
    pub guard_cells: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EsetArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub extended: bool,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// E-set JSON written by `esets`, or a hand-built point file.
    pub input: PathBuf,
    /// Pairs at most this far apart are ignored (overrides the file).
    #[arg(long)]
    pub guard: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub extended: bool,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Fully resolved settings, embedded in every JSON output.
///
/// The output directory and worker count are omitted so that outputs do
/// not depend on them.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<String>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: usize,
    pub extended: bool,
    pub classify: ClassifyConfig,
    pub decomposition: SweepConfig,
    pub guard: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(m) => CliError::Usage(m),
            other => CliError::Data(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl RunConfig {
    fn base(subcommand: &str, inputs: Vec<String>, output: &OutputArgs) -> CliResult<Self> {
        let workers = match output.workers {
            Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(Self {
            subcommand: subcommand.into(),
            inputs,
            out: output.out.clone(),
            workers,
            extended: false,
            classify: ClassifyConfig::default(),
            decomposition: SweepConfig::default(),
            guard: None,
        })
    }

    fn apply_tolerances(&mut self, t: &ToleranceArgs) -> CliResult<()> {
        let c = &mut self.classify;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.tol_cauchy, t.tol_cauchy);
        set(&mut c.tol_const, t.tol_const);
        set(&mut c.tol_jump, t.tol_jump);
        set(&mut c.sep_min, t.sep_min);
        set(&mut c.sigma, t.sigma);
        set(&mut c.boundary_fraction, t.boundary_fraction);
        set(&mut c.max_radius_cells, t.max_radius_cells);
        set(&mut c.min_radius_cells, t.min_radius_cells);
        if let Some(m) = t.lattice {
            c.lattice_resolution = m;
        }
        let d = &mut self.decomposition;
        d.sigma = c.sigma;
        d.min_radius_cells = c.min_radius_cells;
        d.lattice_resolution = c.lattice_resolution;
        c.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    fn apply_decomposition(&mut self, a: &DecompositionArgs) -> CliResult<()> {
        let d = &mut self.decomposition;
        if !a.delta.is_empty() {
            d.deltas = a.delta.clone();
        }
        if !a.r0.is_empty() {
            d.r0s = a.r0.clone();
        }
        if let Some(t) = a.tau {
            d.tau = t;
        }
        if let Some(k) = a.depth {
            d.depth = k;
        }
        if let Some(g) = a.guard_cells {
            d.guard_cells = g;
        }
        d.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    fn json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Esets(a) => cmd_esets(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Cover(a) => cmd_cover(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// File stem without the `.gf1.json` / `.json` suffix.
fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("input");
    name.strip_suffix(".gf1.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name)
        .to_string()
}

fn resolve_spec(name: &str) -> CliResult<CorpusSpec> {
    if let Some(spec) = corpus_spec(name) {
        return Ok(spec);
    }
    let path = Path::new(name);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return serde_json::from_str(&text).map_err(|e| CliError::Data(Error::InvalidSpec(e.to_string())));
    }
    Err(CliError::Usage(format!("unknown corpus entry {name:?}; see `jumpset gen --list`")))
}

pub fn cmd_gen_specs(specs: &[CorpusSpec], out: &Path) -> crate::error::Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for spec in specs {
        let (u, truth) = generate(spec)?;
        let header = out.join(format!("{}.gf1.json", spec.name));
        write_grid(&u, &header)?;
        let truth_path = out.join(format!("{}.truth.json", spec.name));
        let mut text = serde_json::to_string_pretty(&truth.to_json(spec)?)?;
        text.push('\n');
        fs::write(&truth_path, text).map_err(|e| Error::io(&truth_path, e))?;
        written.push(header);
    }
    Ok(written)
}

fn cmd_gen(a: &GenArgs) -> CliResult<i32> {
    if a.list {
        for s in list_corpus() {
            println!("{}", s.name);
        }
        return Ok(EXIT_OK);
    }
    let specs = if a.all {
        list_corpus()
    } else if a.specs.is_empty() {
        return Err(CliError::Usage("name at least one corpus entry or pass --all".into()));
    } else {
        a.specs.iter().map(|s| resolve_spec(s)).collect::<CliResult<Vec<_>>>()?
    };
    for path in cmd_gen_specs(&specs, &a.output.out)? {
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}

/// Reads the input grid, mapping through `Φ` when requested.
fn load_grid(path: &Path, extended: bool) -> CliResult<GridFunction> {
    let u = read_grid(path)?;
    if extended {
        return Ok(phi_apply(&u));
    }
    if u.values().iter().any(|v| v.is_infinite()) {
        return Err(CliError::Data(Error::NonFiniteValues));
    }
    Ok(u)
}

fn grid_json(u: &GridFunction) -> Value {
    json!({"shape": u.shape(), "spacing": u.spacing(), "origin": u.origin()})
}

fn classify_grid_value(u: &GridFunction, cfg: &RunConfig) -> CliResult<(Vec<PointClass>, Value)> {
    let ccfg = if cfg.extended {
        extended_config(&cfg.classify)
    } else {
        cfg.classify.clone()
    };
    let classifier = Classifier::new(u, &ccfg)?;
    let classes = pool(cfg.workers)?.install(|| classifier.classify_all());
    let value = json!({
        "schema": SCHEMA_VERSION,
        "config": cfg.json(),
        "input": cfg.inputs[0],
        "grid": grid_json(u),
        "value_space": if cfg.extended { "phi" } else { "identity" },
        "value_range": classifier.range(),
        "counts": class_counts(&classes),
        "points": point_records(u, &classes, cfg.extended),
    });
    Ok((classes, value))
}

fn cmd_classify(a: &ClassifyArgs) -> CliResult<i32> {
    let mut cfg = RunConfig::base("classify", vec![a.input.display().to_string()], &a.output)?;
    cfg.extended = a.extended;
    cfg.apply_tolerances(&a.tolerances)?;
    let u = load_grid(&a.input, a.extended)?;
    let (classes, value) = classify_grid_value(&u, &cfg)?;
    ensure_dir(&cfg.out)?;
    let s = stem(&a.input);
    write_json(&cfg.out.join(format!("{s}.classify.json")), &value)?;
    let pgm = cfg.out.join(format!("{s}.classes.pgm"));
    fs::write(&pgm, class_pgm(u.shape(), &classes)).map_err(|e| Error::io(&pgm, e))?;
    println!("{}", serde_json::to_string(&value["counts"]).map_err(Error::from)?);
    Ok(EXIT_OK)
}

fn run_sweep(u: &GridFunction, cfg: &RunConfig) -> CliResult<SweepResult> {
    let result = pool(cfg.workers)?.install(|| sweep(u, &cfg.decomposition))?;
    Ok(result)
}

fn cmd_esets(a: &EsetArgs) -> CliResult<i32> {
    let mut cfg = RunConfig::base("esets", vec![a.input.display().to_string()], &a.output)?;
    cfg.extended = a.extended;
    cfg.apply_tolerances(&a.tolerances)?;
    cfg.apply_decomposition(&a.decomposition)?;
    let u = load_grid(&a.input, a.extended)?;
    let result = run_sweep(&u, &cfg)?;
    ensure_dir(&cfg.out)?;
    let s = stem(&a.input);
    let mut index = Vec::new();
    for (k, entry) in result.entries.iter().enumerate() {
        let file = format!("{s}.eset.{k:04}.json");
        let value = json!({
            "schema": SCHEMA_VERSION,
            "config": cfg.json(),
            "input": cfg.inputs[0],
            "grid": grid_json(&u),
            "guard": result.guard,
            "ball_id": entry.ball_id,
            "params": serde_json::to_value(&entry.eset.params).map_err(Error::from)?,
            "points": entry.eset.points,
            "indices": entry.eset.indices,
            "excluded": entry.eset.excluded,
            "cone": serde_json::to_value(&entry.cone).map_err(Error::from)?,
        });
        write_json(&cfg.out.join(&file), &value)?;
        index.push(json!({
            "file": file,
            "ball_id": entry.ball_id,
            "delta": entry.eset.params.delta,
            "r0": entry.eset.params.r0,
            "points": entry.eset.points.len(),
            "violations": entry.violations.len(),
            "cover_pass": entry.cover.as_ref().map(|c| c.all_pass()),
        }));
    }
    let value = json!({
        "schema": SCHEMA_VERSION,
        "config": cfg.json(),
        "input": cfg.inputs[0],
        "family_size": result.family.len(),
        "esets": index,
    });
    write_json(&cfg.out.join(format!("{s}.esets.json")), &value)?;
    println!("{} nonempty E-sets", result.entries.len());
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
struct ConeParams {
    ball: Ball,
    tau: f64,
    r0: f64,
}

/// A point set with the parameters of its cone.
#[derive(Debug, Deserialize)]
struct PointFile {
    points: Vec<Vec<f64>>,
    params: ConeParams,
    #[serde(default)]
    guard: Option<f64>,
}

fn read_point_file(path: &Path) -> CliResult<PointFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PointFile = serde_json::from_str(&text).map_err(Error::from)?;
    let n = file.params.ball.dim();
    if file.points.iter().any(|p| p.len() != n) {
        return Err(CliError::Data(Error::DimensionMismatch {
            expected: n,
            got: file.points.iter().map(|p| p.len()).find(|&l| l != n).unwrap_or(n),
        }));
    }
    Ok(file)
}

fn check_setup(a: &CheckArgs, name: &str) -> CliResult<(RunConfig, PointFile, crate::decompose::ConeSpec, f64)> {
    let mut cfg = RunConfig::base(name, vec![a.input.display().to_string()], &a.output)?;
    let file = read_point_file(&a.input)?;
    let p = &file.params;
    let cone = cone_from_params(&p.ball, p.tau, p.r0, p.ball.dim()).map_err(|e| match e {
        Error::InvalidParams(m) => CliError::Data(Error::InvalidInput(m)),
        other => CliError::Data(other),
    })?;
    let guard = a.guard.or(file.guard).unwrap_or(0.0);
    cfg.guard = Some(guard);
    cfg.decomposition.tau = p.tau;
    cfg.decomposition.r0s = vec![p.r0];
    Ok((cfg, file, cone, guard))
}

fn cmd_verify(a: &CheckArgs) -> CliResult<i32> {
    let (cfg, file, cone, guard) = check_setup(a, "verify")?;
    let violations = pool(cfg.workers)?.install(|| verify_cone_property(&file.points, &cone, guard));
    let records: Vec<Value> = violations
        .iter()
        .map(|v| {
            json!({
                "i": v.i,
                "j": v.j,
                "x_i": file.points[v.i],
                "x_j": file.points[v.j],
                "witness_r": v.witness,
                "reversed": v.reversed,
            })
        })
        .collect();
    let value = json!({
        "schema": SCHEMA_VERSION,
        "config": cfg.json(),
        "input": cfg.inputs[0],
        "cone": serde_json::to_value(&cone).map_err(Error::from)?,
        "guard": guard,
        "points": file.points.len(),
        "violation_count": violations.len(),
        "violations": records,
    });
    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join(format!("{}.verify.json", stem(&a.input))), &value)?;
    println!("{} violations", violations.len());
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_cover(a: &CheckArgs) -> CliResult<i32> {
    let (cfg, file, cone, guard) = check_setup(a, "cover")?;
    let guard = (guard > 0.0).then_some(guard);
    let report = pool(cfg.workers)?.install(|| cover_with_graphs(&file.points, &cone, guard));
    let failing = report.cells.iter().filter(|c| !c.pass).count();
    let value = json!({
        "schema": SCHEMA_VERSION,
        "config": cfg.json(),
        "input": cfg.inputs[0],
        "report": serde_json::to_value(&report).map_err(Error::from)?,
        "cells": report.cells.len(),
        "failing_cells": failing,
        "worst_slope": report.worst_slope(),
        "lipschitz": cone.lipschitz,
    });
    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join(format!("{}.cover.json", stem(&a.input))), &value)?;
    println!("{} of {} cells pass", report.cells.len() - failing, report.cells.len());
    Ok(if failing == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_report(a: &ReportArgs) -> CliResult<i32> {
    let mut cfg = RunConfig::base("report", vec![a.input.display().to_string()], &a.output)?;
    cfg.extended = a.extended;
    cfg.apply_tolerances(&a.tolerances)?;
    cfg.apply_decomposition(&a.decomposition)?;
    let u = load_grid(&a.input, a.extended)?;
    let (classes, classified) = classify_grid_value(&u, &cfg)?;
    let result = run_sweep(&u, &cfg)?;
    let with_cone: Vec<_> = result.entries.iter().filter(|e| e.cone.is_some()).collect();
    let violations: usize = with_cone.iter().map(|e| e.violations.len()).sum();
    let cells: usize = with_cone.iter().filter_map(|e| e.cover.as_ref()).map(|c| c.cells.len()).sum();
    let failing: usize = with_cone
        .iter()
        .filter_map(|e| e.cover.as_ref())
        .map(|c| c.cells.iter().filter(|x| !x.pass).count())
        .sum();
    let worst = with_cone
        .iter()
        .filter_map(|e| e.cover.as_ref().and_then(|c| c.worst_slope()))
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    let value = json!({
        "schema": SCHEMA_VERSION,
        "config": cfg.json(),
        "input": cfg.inputs[0],
        "grid": grid_json(&u),
        "classification": {
            "counts": classified["counts"],
            "value_range": classified["value_range"],
        },
        "decomposition": {
            "family_size": result.family.len(),
            "nonempty_esets": result.entries.len(),
            "checked_esets": with_cone.len(),
            "violations": violations,
            "cells": cells,
            "failing_cells": failing,
            "worst_slope": worst,
            "guard": result.guard,
        },
    });
    ensure_dir(&cfg.out)?;
    let s = stem(&a.input);
    write_json(&cfg.out.join(format!("{s}.report.json")), &value)?;
    let pgm = cfg.out.join(format!("{s}.classes.pgm"));
    fs::write(&pgm, class_pgm(u.shape(), &classes)).map_err(|e| Error::io(&pgm, e))?;
    println!("{}", serde_json::to_string(&value["decomposition"]).map_err(Error::from)?);
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(stem(Path::new("a/disk_128.gf1.json")), "disk_128");
        assert_eq!(stem(Path::new("pairs.json")), "pairs");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["jumpset", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["jumpset", "gen"]), EXIT_USAGE);
        assert_eq!(run(["jumpset", "gen", "no_such_entry"]), EXIT_USAGE);
    }

    #[test]
    fn missing_input_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.gf1.json");
        let out = dir.path().join("o");
        let code = run([
            "jumpset".into(),
            "classify".into(),
            missing.into_os_string(),
            "--out".into(),
            out.into_os_string(),
        ] as [OsString; 5]);
        assert_eq!(code, EXIT_DATA);
    }
}
