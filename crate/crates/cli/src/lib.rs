//! Command-line front end: config ingestion, dispatch, certificate
//! re-verification and JSON/CSV reporting.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use solgap_core::criterion::{corollary1_verdict, verify_verdict, GapVerdict, Verdict};
use solgap_core::dual::{group_norm_lower, orbit_ball, solenoid_gap_estimate, stabilizer_gens, BoundPoint, SpectralEstimate};
use solgap_core::heisenberg::{corollary3_bound, lab_report, BoundReport, LabParams, LabReport};
use solgap_core::matgroup::{GroupSpecDoc, Word};
use thiserror::Error;

use crate::config::{load_config, load_group_file, Loaded};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_GAP: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_NO_GAP: i32 = 10;
pub const EXIT_UNKNOWN: i32 = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// `group_norm` or `orbit`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<String>>,
    pub estimate: SpectralEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNormDetail {
    pub return_probabilities: Vec<(usize, String)>,
    pub root_bounds: Vec<BoundPoint>,
    pub ratio_bounds: Vec<BoundPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergSection {
    pub lab: LabReport,
    pub within_tolerance: bool,
    /// Lower bounds from an estimate report plugged into the combiner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plug_in_bound: Option<BoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub threads: usize,
    pub config: Option<Value>,
    pub overrides: Value,
    pub started_unix: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub group: Option<GroupSpecDoc>,
    pub verdict: Option<GapVerdict>,
    pub estimates: Vec<EstimateRecord>,
    /// Supremum of the per-orbit bounds, a lower bound only.
    pub kappa1_lower_bound: Option<f64>,
    pub group_norm: Option<GroupNormDetail>,
    pub heisenberg: Option<HeisenbergSection>,
    pub provenance: Provenance,
}

impl Report {
    fn empty(command: &str) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            group: None,
            verdict: None,
            estimates: Vec::new(),
            kappa1_lower_bound: None,
            group_norm: None,
            heisenberg: None,
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                threads: 0,
                config: None,
                overrides: Value::Null,
                started_unix: 0,
                elapsed_ms: 0,
            },
        }
    }

    /// The report as JSON with the provenance block removed.
    pub fn without_provenance(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("provenance");
        v
    }

    pub fn group_norm_bound(&self) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == "group_norm").and_then(|e| e.estimate.last())
    }
}

#[derive(Parser, Debug)]
#[command(name = "solgap", version, about = "Spectral-gap decisions and estimates for automorphism groups of S-adic solenoids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide the gap property; exit 0 Gap, 10 NoGap, 20 Unknown.
    Analyze(RunArgs),
    /// Lower-bound sequences for the orbit and group operator norms.
    Estimate(RunArgs),
    /// Re-check every certificate in a report.
    Verify { report: PathBuf },
    /// Finite Heisenberg model checks.
    HeisenbergDemo(HeisenbergArgs),
    /// Dump the orbit graphs of the configured seeds.
    Orbit(RunArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct HeisenbergArgs {
    #[arg(long = "N", default_value_t = 5)]
    pub modulus: u64,
    #[arg(long = "n", default_value_t = 1)]
    pub n: usize,
    #[arg(long = "t", default_value_t = 1)]
    pub t: u64,
    #[arg(long = "group-file")]
    pub group_file: Option<PathBuf>,
    /// Estimate report whose bounds feed the combiner.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub random: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive(name: &str, v: Option<usize>) -> Result<Option<usize>, CliError> {
    match v {
        Some(0) => Err(CliError::Input(format!("--{name} must be positive"))),
        other => Ok(other),
    }
}

/// Loads the config and applies command-line overrides.
pub fn prepare(args: &RunArgs) -> Result<Loaded, CliError> {
    let mut loaded = load_config(&args.config, args.seed)?;
    let b = &mut loaded.config.budgets;
    if let Some(r) = positive("radius", args.radius)? {
        b.radius = r;
    }
    if let Some(k) = positive("max-steps", args.max_steps)? {
        b.max_steps = k;
    }
    if let Some(c) = positive("cap", args.cap)? {
        b.orbit_cap = c;
        b.group_cap = c;
    }
    positive("threads", args.threads)?;
    Ok(loaded)
}

fn overrides(args: &RunArgs) -> Value {
    serde_json::json!({ "radius": args.radius, "max_steps": args.max_steps, "cap": args.cap, "seed": args.seed })
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<(T, usize), CliError> {
    let n = threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Compute(e.to_string()))?;
    Ok((pool.install(f), n))
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn add_estimates(report: &mut Report, loaded: &Loaded) -> Result<(), CliError> {
    let b = &loaded.config.budgets;
    let g = group_norm_lower(&loaded.spec, b.max_steps, b.group_cap);
    report.estimates.push(EstimateRecord { name: "group_norm".into(), seed: None, estimate: g.estimate });
    report.group_norm =
        Some(GroupNormDetail { return_probabilities: g.return_probabilities, root_bounds: g.root_bounds, ratio_bounds: g.ratio_bounds });
    if !loaded.seeds.is_empty() {
        let sol = solenoid_gap_estimate(&loaded.spec, &loaded.seeds, &b.markov()).map_err(|e| CliError::Compute(e.to_string()))?;
        for (seed, est) in sol.per_seed {
            report.estimates.push(EstimateRecord { name: "orbit".into(), seed: Some(seed), estimate: est });
        }
        report.kappa1_lower_bound = Some(sol.kappa1_lower_bound);
    }
    Ok(())
}

fn base_report(command: &str, loaded: &Loaded, args: &RunArgs) -> Report {
    let mut r = Report::empty(command);
    r.group = Some(loaded.spec.to_doc());
    r.provenance.config = Some(loaded.raw.clone());
    r.provenance.overrides = overrides(args);
    r
}

/// Verdict plus, when the config asks for it, the estimates.
pub fn cmd_analyze(args: &RunArgs) -> Result<Report, CliError> {
    let started = Instant::now();
    let loaded = prepare(args)?;
    let mut report = base_report("analyze", &loaded, args);
    let (res, threads) = with_pool(args.threads, || -> Result<Report, CliError> {
        let v = corollary1_verdict(&loaded.spec, &loaded.config.budgets.search).map_err(|e| CliError::Compute(e.to_string()))?;
        report.verdict = Some(v);
        if loaded.config.run_estimates {
            add_estimates(&mut report, &loaded)?;
        }
        Ok(report)
    })?;
    let mut report = res?;
    report.provenance.threads = threads;
    report.provenance.started_unix = now_unix();
    report.provenance.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

pub fn cmd_estimate(args: &RunArgs) -> Result<Report, CliError> {
    let started = Instant::now();
    let loaded = prepare(args)?;
    let mut report = base_report("estimate", &loaded, args);
    let (res, threads) = with_pool(args.threads, || add_estimates(&mut report, &loaded).map(|_| report))?;
    let mut report = res?;
    report.provenance.threads = threads;
    report.provenance.started_unix = now_unix();
    report.provenance.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

/// Re-runs every certificate check from the report alone; the error names
/// the first failing check.
pub fn verify_report(report: &Report) -> Result<(), String> {
    let doc = report.group.as_ref().ok_or("report carries no group")?;
    let spec = doc.to_spec().map_err(|e| format!("group: {e}"))?;
    let verdict = report.verdict.as_ref().ok_or("report carries no verdict")?;
    verify_verdict(&spec, verdict)
}

pub fn read_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    config::from_value(&text).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn cmd_verify(path: &Path) -> Result<Result<(), String>, CliError> {
    Ok(verify_report(&read_report(path)?))
}

pub fn cmd_heisenberg(args: &HeisenbergArgs) -> Result<Report, CliError> {
    let started = Instant::now();
    let mut report = Report::empty("heisenberg-demo");
    let group = args.group_file.as_deref().map(load_group_file).transpose()?;
    if let Some(g) = &group {
        if g.dim() != 2 * args.n {
            return Err(CliError::Input(format!("group file: dimension {} is not 2n = {}", g.dim(), 2 * args.n)));
        }
        report.group = Some(g.to_doc());
    }
    let params =
        LabParams { modulus: args.modulus, n: args.n, t: args.t, samples: args.samples, random_symplectic: args.random, seed: args.seed };
    let (lab, threads) = with_pool(args.threads, || lab_report(&params, group.as_ref()))?;
    let lab = lab.map_err(|e| CliError::Input(e.to_string()))?;
    let plug_in_bound = match &args.estimates {
        Some(p) => {
            let est = read_report(p)?;
            let lambda = est.group_norm_bound().ok_or_else(|| CliError::Input(format!("{}: no group_norm estimate", p.display())))?;
            let kappa = est.kappa1_lower_bound.ok_or_else(|| CliError::Input(format!("{}: no orbit estimates", p.display())))?;
            Some(corollary3_bound(lambda, kappa, args.n).map_err(|e| CliError::Input(e.to_string()))?)
        }
        None => None,
    };
    let within_tolerance = lab.representation_residual < 1e-12
        && lab.central_character_residual < 1e-12
        && lab.commutant_dimension == 1
        && lab.max_intertwiner_residual < 1e-10
        && lab.max_cocycle_modulus_defect < 1e-10
        && lab.tensor.as_ref().is_none_or(|t| t.discrepancy < 1e-8 && t.cauchy_schwarz);
    report.heisenberg = Some(HeisenbergSection { lab, within_tolerance, plug_in_bound });
    report.provenance.threads = threads;
    report.provenance.overrides = serde_json::json!({ "N": args.modulus, "n": args.n, "t": args.t, "seed": args.seed });
    report.provenance.started_unix = now_unix();
    report.provenance.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterEdges {
    pub letter: i32,
    pub targets: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDump {
    pub seed: Vec<String>,
    pub vertices: Vec<Vec<String>>,
    pub words: Vec<Word>,
    pub edges: Vec<LetterEdges>,
    pub radius: usize,
    pub truncated: bool,
    pub closed: bool,
    pub stabilizer_generators: Vec<Word>,
}

pub fn cmd_orbit(args: &RunArgs) -> Result<Vec<OrbitDump>, CliError> {
    let loaded = prepare(args)?;
    if loaded.seeds.is_empty() {
        return Err(CliError::Input("orbit: config has no seeds".into()));
    }
    let b = &loaded.config.budgets;
    loaded
        .seeds
        .iter()
        .map(|s| {
            let g = orbit_ball(&loaded.spec, s, b.radius, b.orbit_cap).map_err(|e| CliError::Compute(e.to_string()))?;
            Ok(OrbitDump {
                seed: s.to_strings(),
                vertices: g.vertices.iter().map(|v| v.to_strings()).collect(),
                words: g.words.clone(),
                edges: g.alphabet.iter().zip(&g.edges).map(|(&letter, t)| LetterEdges { letter, targets: t.clone() }).collect(),
                radius: g.radius,
                truncated: g.truncated,
                closed: g.closed,
                stabilizer_generators: stabilizer_gens(&g),
            })
        })
        .collect()
}

/// `series,seed,parameter,bound` rows for every bound sequence.
pub fn bounds_csv(report: &Report) -> String {
    let mut out = String::from("series,seed,parameter,bound\n");
    let mut push = |series: &str, seed: &str, pts: &[BoundPoint]| {
        for p in pts {
            out.push_str(&format!("{series},{seed},{},{}\n", p.parameter, p.value));
        }
    };
    for e in &report.estimates {
        let seed = e.seed.as_ref().map(|s| s.join(";")).unwrap_or_default();
        push(&e.name, &seed, &e.estimate.lower_bounds);
    }
    if let Some(g) = &report.group_norm {
        push("group_norm_root", "", &g.root_bounds);
        push("group_norm_ratio", "", &g.ratio_bounds);
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializes");
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn output_path(args: &RunArgs) -> Result<Option<PathBuf>, CliError> {
    if args.out.is_some() {
        return Ok(args.out.clone());
    }
    let loaded = load_config(&args.config, None)?;
    Ok(loaded.config.output.map(PathBuf::from))
}

fn emit_report(report: &Report, args: &RunArgs) -> Result<(), CliError> {
    emit_json(report, output_path(args)?.as_deref())?;
    if let Some(csv) = &args.csv {
        write_atomic(csv, bounds_csv(report).as_bytes())?;
    }
    Ok(())
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Gap => EXIT_GAP,
        Verdict::NoGap => EXIT_NO_GAP,
        Verdict::Unknown => EXIT_UNKNOWN,
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze(args) => {
            let report = cmd_analyze(&args)?;
            emit_report(&report, &args)?;
            let v = report.verdict.as_ref().map_or(Verdict::Unknown, |v| v.verdict);
            eprintln!("verdict: {v:?}");
            Ok(verdict_exit_code(v))
        }
        Command::Estimate(args) => {
            let report = cmd_estimate(&args)?;
            emit_report(&report, &args)?;
            Ok(0)
        }
        Command::Verify { report } => match cmd_verify(&report)? {
            Ok(()) => {
                println!("verified");
                Ok(0)
            }
            Err(msg) => {
                println!("verification failed: {msg}");
                Ok(EXIT_CHECK_FAILED)
            }
        },
        Command::HeisenbergDemo(args) => {
            let report = cmd_heisenberg(&args)?;
            emit_json(&report, args.out.as_deref())?;
            let ok = report.heisenberg.as_ref().is_some_and(|h| h.within_tolerance);
            Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::Orbit(args) => {
            let dumps = cmd_orbit(&args)?;
            emit_json(&dumps, output_path(&args)?.as_deref())?;
            Ok(0)
        }
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
