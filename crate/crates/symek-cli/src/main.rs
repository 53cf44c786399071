//! `symek` — command-line driver for the symmetrization and variational
//! toolkit.
//!
//! Every run is described by a [`config::RunConfig`]: either assembled
//! from flags, or loaded from a JSON file (`--config`) with explicit
//! flags overriding the file's fields. Seeds are always explicit, so a
//! config determines its data artifact byte-for-byte; the run receipt
//! (config hash, tool version, timestamps, summary, exit status) goes to
//! a separate `<out>.manifest.json` so timestamps never leak into the
//! reproducible artifact.
//!
//! Exit codes: `0` — the command ran and every asserted check passed;
//! `1` — the command ran but a mathematical check failed (an axiom, a
//! monotonicity probe, a certificate conclusion, a stage contract);
//! `2` — the request itself was invalid (unknown functional, malformed
//! schedule, missing flag, unreadable file).
//!
//! `SYMEK_LOG` (`off`, `error`, `warn`, `info`, `debug`) controls stderr
//! logging only; it never changes what a run computes or writes.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{
    parse_functional, parse_model, parse_schedule, CommandKind, ConfigError, OutputFormat,
    RunConfig, RunManifest,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{SystemTime, UNIX_EPOCH};
use symek::{
    check_polarization_monotone, ekeland_point, extract_minimizer, sps_sequence,
    symmetric_ekeland, verify_framework, BuiltFunctional, EkelandParams, FunctionElement,
    Functional, PolarizationSchedule, SweepStrategy, VariationalError,
};
use thiserror::Error;

// ---------------------------------------------------------------------------
// command line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "symek",
    version,
    about = "Polarization, symmetrization, and symmetric variational descent on discrete models"
)]
struct Cli {
    /// JSON run configuration to start from; explicit flags override its
    /// fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the structural axioms of a model by seeded random sampling.
    VerifyAxioms(CommonOpts),
    /// Probe an energy's polarization monotonicity claim.
    CheckMonotone(CommonOpts),
    /// Run the perturbed descent iteration from a seeded start.
    Ekeland(CommonOpts),
    /// Produce an almost-critical, almost-symmetric point with a full
    /// certificate.
    SymmetricEkeland(CommonOpts),
    /// Drive a staged run down a scale schedule, emitting the stage table.
    Sps(CommonOpts),
    /// Execute a configuration file verbatim (requires --config).
    Run(CommonOpts),
}

impl Command {
    /// The config command this subcommand pins, if any; `run` defers to
    /// the file.
    fn kind(&self) -> Option<CommandKind> {
        match self {
            Command::VerifyAxioms(_) => Some(CommandKind::VerifyAxioms),
            Command::CheckMonotone(_) => Some(CommandKind::CheckMonotone),
            Command::Ekeland(_) => Some(CommandKind::Ekeland),
            Command::SymmetricEkeland(_) => Some(CommandKind::SymmetricEkeland),
            Command::Sps(_) => Some(CommandKind::Sps),
            Command::Run(_) => None,
        }
    }

    fn opts(&self) -> &CommonOpts {
        match self {
            Command::VerifyAxioms(o)
            | Command::CheckMonotone(o)
            | Command::Ekeland(o)
            | Command::SymmetricEkeland(o)
            | Command::Sps(o)
            | Command::Run(o) => o,
        }
    }
}

/// The full flag set. Every subcommand shares it so `--config` overriding
/// works uniformly; flags a command does not consume are rejected, not
/// ignored.
#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Model, as kind:n (vector:16) or kind:n:h (grid1d:17:0.5).
    #[arg(long)]
    model: Option<String>,
    /// Energy, as name or name:key=value,... (e.g. quadratic:amp=0.3).
    #[arg(long)]
    functional: Option<String>,
    /// Symmetry scale for the descent commands.
    #[arg(long)]
    rho: Option<f64>,
    /// Slope scale for the descent commands.
    #[arg(long)]
    sigma: Option<f64>,
    /// Stage scales: geometric:<ratio>:<count> or list:<v1,v2,...>.
    #[arg(long)]
    schedule: Option<String>,
    /// Also extract a limit candidate at this resolution (sps only).
    #[arg(long = "conv-tol")]
    conv_tol: Option<f64>,
    /// Seed for every random draw in the run. Required: runs are
    /// reproducible by construction, never accidentally random.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample count for randomized checks and certificate probes.
    #[arg(long)]
    samples: Option<usize>,
    /// Write the data artifact here (and the receipt to <out>.manifest.json)
    /// instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Artifact encoding: json (default) or csv (sps only).
    #[arg(long)]
    format: Option<String>,
}

// ---------------------------------------------------------------------------
// errors and exit codes
// ---------------------------------------------------------------------------

/// Anything that stops a run, tagged with how it maps to an exit code.
#[derive(Debug, Error)]
enum RunError {
    /// The request was malformed — exit 2.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The run executed but a mathematical check failed — exit 1.
    #[error("{0}")]
    Check(String),
    /// The filesystem refused an artifact — exit 2.
    #[error("cannot write {path}: {detail}")]
    Write { path: String, detail: String },
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Write { .. } => 2,
            RunError::Check(_) => 1,
        }
    }
}

impl From<symek::FunctionalError> for RunError {
    /// Building an energy only fails on bad names or parameters, which
    /// are request problems.
    fn from(e: symek::FunctionalError) -> Self {
        RunError::Config(ConfigError::Invalid(e.to_string()))
    }
}

impl From<VariationalError> for RunError {
    fn from(e: VariationalError) -> Self {
        match e {
            // Malformed numeric requests are config problems...
            VariationalError::InvalidParams(_) | VariationalError::InvalidSchedule(_) => {
                RunError::Config(ConfigError::Invalid(e.to_string()))
            }
            // ...everything else is the mathematics refusing the run.
            other => RunError::Check(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// logging (stderr only; never part of any artifact)
// ---------------------------------------------------------------------------

const LOG_OFF: u8 = 0;
const LOG_ERROR: u8 = 1;
const LOG_WARN: u8 = 2;
const LOG_INFO: u8 = 3;
const LOG_DEBUG: u8 = 4;

fn log_threshold() -> u8 {
    static LEVEL: OnceLock<u8> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("SYMEK_LOG").as_deref() {
        Ok("off") => LOG_OFF,
        Ok("error") => LOG_ERROR,
        Ok("info") => LOG_INFO,
        Ok("debug") => LOG_DEBUG,
        // warn is the default; unknown values fall back to it rather
        // than failing the run over a logging knob.
        _ => LOG_WARN,
    })
}

fn log(level: u8, tag: &str, message: &str) {
    if log_threshold() >= level {
        eprintln!("symek [{tag}] {message}");
    }
}

// ---------------------------------------------------------------------------
// config assembly
// ---------------------------------------------------------------------------

fn load_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::ConfigFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::ConfigJson(e.to_string()))
}

/// Builds the effective config: file base (if any), then explicit flags
/// on top, then cross-field validation.
fn effective_config(
    file: Option<&Path>,
    kind: Option<CommandKind>,
    opts: &CommonOpts,
) -> Result<RunConfig, RunError> {
    let base = match file {
        Some(path) => Some(load_config_file(path)?),
        None => None,
    };

    let command = match (kind, &base) {
        (Some(k), _) => k,
        (None, Some(b)) => b.command,
        (None, None) => {
            return Err(ConfigError::Invalid("run requires --config <file>".into()).into())
        }
    };
    let model = match (&opts.model, &base) {
        (Some(spec), _) => parse_model(spec)?,
        (None, Some(b)) => b.model,
        (None, None) => return Err(ConfigError::Invalid("--model is required".into()).into()),
    };
    let seed = match (opts.seed, &base) {
        (Some(s), _) => s,
        (None, Some(b)) => b.seed,
        (None, None) => return Err(ConfigError::Invalid("--seed is required".into()).into()),
    };

    let base = base.unwrap_or(RunConfig {
        command,
        model,
        functional: None,
        rho: None,
        sigma: None,
        schedule: None,
        conv_tol: None,
        seed,
        samples: 1000,
        output_path: None,
        format: OutputFormat::Json,
    });

    let config = RunConfig {
        command,
        model,
        functional: match &opts.functional {
            Some(spec) => Some(parse_functional(spec)?),
            None => base.functional,
        },
        rho: opts.rho.or(base.rho),
        sigma: opts.sigma.or(base.sigma),
        schedule: match &opts.schedule {
            Some(spec) => Some(parse_schedule(spec)?),
            None => base.schedule,
        },
        conv_tol: opts.conv_tol.or(base.conv_tol),
        seed,
        samples: opts.samples.unwrap_or(base.samples),
        output_path: opts.out.clone().or(base.output_path),
        format: match &opts.format {
            Some(spec) => spec.parse()?,
            None => base.format,
        },
    };
    config.validate()?;
    reject_unused_flags(&config, opts)?;
    Ok(config)
}

/// A flag the command never reads is a misunderstanding; refuse it
/// rather than silently computing something other than what was asked.
/// (Unused *file* fields are fine — config files may serve several
/// commands.)
fn reject_unused_flags(config: &RunConfig, opts: &CommonOpts) -> Result<(), RunError> {
    let cmd = config.command;
    let mut unused: Vec<&str> = Vec::new();
    let functional_cmds = cmd != CommandKind::VerifyAxioms;
    let descent_cmds = matches!(cmd, CommandKind::Ekeland | CommandKind::SymmetricEkeland);
    let sampling_cmds = !matches!(cmd, CommandKind::Ekeland);
    if opts.functional.is_some() && !functional_cmds {
        unused.push("--functional");
    }
    if (opts.rho.is_some() || opts.sigma.is_some()) && !descent_cmds {
        unused.push("--rho/--sigma");
    }
    if opts.schedule.is_some() && cmd != CommandKind::Sps {
        unused.push("--schedule");
    }
    if opts.conv_tol.is_some() && cmd != CommandKind::Sps {
        unused.push("--conv-tol");
    }
    if opts.samples.is_some() && !sampling_cmds {
        unused.push("--samples");
    }
    if unused.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{cmd} does not use {}", unused.join(", "))).into())
    }
}

// ---------------------------------------------------------------------------
// command execution
// ---------------------------------------------------------------------------

/// What a completed run hands back: the data artifact, a manifest
/// summary, and the verdict of every check the command asserts.
struct Outcome {
    artifact: String,
    summary: serde_json::Value,
    failures: Vec<String>,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn json_artifact<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

/// The seeded start every descent command uses: uniform per-slot draws
/// inside the energy's box (or `[0, 1.5)` without one), then the
/// energy's own cone reduction. Part of the reproducibility contract —
/// the draw depends only on the seed, the model, and the box.
fn seeded_start(f: &dyn Functional, seed: u64) -> FunctionElement {
    let model = f.model();
    let (lo, hi) = match f.box_bounds() {
        Some((a, b)) => (a.max(0.0), b),
        None => (0.0, 1.5),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..model.len()).map(|_| rng.gen_range(lo..hi)).collect();
    let raw = FunctionElement::new(model, values).expect("sampled values are finite");
    f.cone_reduce(&raw)
}

fn build_functional(config: &RunConfig) -> Result<BuiltFunctional, RunError> {
    let spec = config
        .functional
        .as_ref()
        .expect("validated: command requires a functional");
    Ok(symek::build_by_name(&spec.name, config.model, &spec.params)?)
}

fn descent_params(config: &RunConfig, rho: f64, sigma: f64) -> EkelandParams {
    let mut params = EkelandParams::for_scales(rho, sigma);
    params.cert_samples = config.samples;
    params.cert_seed = config.seed;
    params
}

fn full_sweep(config: &RunConfig) -> PolarizationSchedule {
    let n = config.model.len();
    PolarizationSchedule {
        strategy: SweepStrategy::DeterministicSweep,
        max_steps: (4 * n * n).max(64),
    }
}

/// Artifact of the plain descent command: the start, the end, and the
/// bookkeeping that makes its two inequalities auditable.
#[derive(Serialize)]
struct DescentArtifact {
    model: String,
    functional: String,
    rho: f64,
    sigma: f64,
    seed: u64,
    start: FunctionElement,
    f_start: f64,
    point: FunctionElement,
    f_point: f64,
    /// `||point - start||_X`.
    displacement: f64,
    /// Sum of accepted step lengths; dominates the displacement.
    path_length: f64,
    /// `sigma * path_length <= f_start - f_point` (within rounding).
    descent_pays_for_distance: bool,
    diagnostics: symek::EkelandDiagnostics,
}

fn run_verify_axioms(config: &RunConfig) -> Result<Outcome, RunError> {
    let report = verify_framework(config.model, config.samples, config.seed);
    let failures: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("axiom check '{}' failed (worst residual {})", c.name, c.worst_residual))
        .collect();
    let summary = serde_json::json!({
        "model": config.model.to_string(),
        "samples": report.samples,
        "checks": report.checks.len(),
        "all_pass": report.all_pass,
    });
    Ok(Outcome {
        artifact: json_artifact(&report),
        summary,
        failures,
    })
}

fn run_check_monotone(config: &RunConfig) -> Result<Outcome, RunError> {
    let built = build_functional(config)?;
    let f = built.functional.as_ref();
    let report = check_polarization_monotone(f, config.samples, config.seed);
    let mut failures = Vec::new();
    if !report.pass {
        failures.push(format!(
            "polarization raised the energy by {} (claimed monotone: {})",
            report.max_rise, report.claimed
        ));
    }
    let summary = serde_json::json!({
        "functional": report.functional,
        "model": config.model.to_string(),
        "claimed": report.claimed,
        "max_rise": report.max_rise,
        "pass": report.pass,
    });
    Ok(Outcome {
        artifact: json_artifact(&report),
        summary,
        failures,
    })
}

fn run_ekeland(config: &RunConfig) -> Result<Outcome, RunError> {
    let built = build_functional(config)?;
    let f = built.functional.as_ref();
    let (rho, sigma) = (config.rho.unwrap(), config.sigma.unwrap());
    let start = seeded_start(f, config.seed);
    let f_start = f.eval(&start);
    let (point, diagnostics) = ekeland_point(f, &start, &descent_params(config, rho, sigma))?;
    let f_point = f.eval(&point);
    let displacement = point.dist_x(&start).expect("same model");

    let mut failures = Vec::new();
    if !(f_point <= f_start + symek::tol::CHAIN) {
        failures.push(format!("energy rose along the descent: {f_start} -> {f_point}"));
    }
    if !(sigma * diagnostics.path_length <= (f_start - f_point) + symek::tol::CHAIN) {
        failures.push(format!(
            "distance travelled is not paid for by descent: sigma * {} > {} - {}",
            diagnostics.path_length, f_start, f_point
        ));
    }
    if !(displacement <= diagnostics.path_length + symek::tol::CHAIN) {
        failures.push(format!(
            "displacement {displacement} exceeds the accepted path length {}",
            diagnostics.path_length
        ));
    }
    for warning in &diagnostics.warnings {
        log(LOG_WARN, "warn", warning);
    }

    let artifact = DescentArtifact {
        model: config.model.to_string(),
        functional: f.name().to_string(),
        rho,
        sigma,
        seed: config.seed,
        start,
        f_start,
        point,
        f_point,
        displacement,
        path_length: diagnostics.path_length,
        descent_pays_for_distance: failures.is_empty(),
        diagnostics,
    };
    let summary = serde_json::json!({
        "functional": artifact.functional,
        "f_start": artifact.f_start,
        "f_point": artifact.f_point,
        "accepted_steps": artifact.diagnostics.accepted_steps,
        "displacement": artifact.displacement,
    });
    Ok(Outcome {
        artifact: json_artifact(&artifact),
        summary,
        failures,
    })
}

fn run_symmetric_ekeland(config: &RunConfig) -> Result<Outcome, RunError> {
    let built = build_functional(config)?;
    let f = built.functional.as_ref();
    let (rho, sigma) = (config.rho.unwrap(), config.sigma.unwrap());
    let start = seeded_start(f, config.seed);
    let cert = symmetric_ekeland(f, &start, &descent_params(config, rho, sigma), full_sweep(config))?;

    // The symmetry and displacement conclusions are guaranteed only when
    // the start sits within rho * sigma of the infimum. Assert them when
    // the known lower bound confirms that premise; otherwise they are
    // measured and reported, but a miss is the hypothesis failing, not
    // the implementation.
    let premise_confirmed = cert.diagnostics.premise_vs_bound_ok == Some(true);
    let mut failures = Vec::new();
    if premise_confirmed {
        if !cert.conclusion_a_ok {
            failures.push(format!(
                "asymmetry {} exceeds C_used * rho = {}",
                cert.asymmetry,
                cert.c_used * cert.rho
            ));
        }
        if !cert.conclusion_b_ok {
            failures.push(format!(
                "displacement {} exceeds rho + polarization displacement {}",
                cert.displacement,
                cert.rho + cert.trho_displacement
            ));
        }
    } else {
        log(
            LOG_WARN,
            "warn",
            &format!(
                "start premise not confirmed; symmetry/displacement conclusions reported but \
                 not asserted (measured: asymmetry bound {}, displacement bound {})",
                cert.conclusion_a_ok, cert.conclusion_b_ok
            ),
        );
    }
    if !cert.descent_ok {
        failures.push(format!("energy rose: f(v) = {} > f(u) = {}", cert.f_v, cert.f_u));
    }
    if !(cert.d_residual <= symek::tol::CERT_RESIDUAL) {
        failures.push(format!(
            "perturbed minimality violated by {} over {} probes",
            cert.d_residual, cert.sampled_w_count
        ));
    }
    for warning in &cert.diagnostics.warnings {
        log(LOG_WARN, "warn", warning);
    }

    let summary = serde_json::json!({
        "functional": f.name().to_string(),
        "f_v": cert.f_v,
        "asymmetry": cert.asymmetry,
        "asymmetry_bound": cert.c_used * cert.rho,
        "displacement": cert.displacement,
        "d_residual": cert.d_residual,
        "probes": cert.sampled_w_count,
        "premise_confirmed": premise_confirmed,
    });
    Ok(Outcome {
        artifact: json_artifact(&cert),
        summary,
        failures,
    })
}

fn run_sps(config: &RunConfig) -> Result<Outcome, RunError> {
    let built = build_functional(config)?;
    let f = built.functional.as_ref();
    let schedule = config.schedule.as_ref().expect("validated: sps has a schedule");
    let template = descent_params(config, schedule[0], schedule[0]);
    let start = seeded_start(f, config.seed);
    let mut trace = sps_sequence(f, &start, schedule, &template)?;

    let mut failures = Vec::new();
    for (j, entry) in trace.entries.iter().enumerate() {
        // The stage contract, re-checked from the artifact itself.
        if !(entry.asymmetry <= 3.0 * entry.eps + symek::tol::CHAIN) {
            failures.push(format!(
                "stage {} asymmetry {} exceeds 3 * {}",
                j + 1,
                entry.asymmetry,
                entry.eps
            ));
        }
        if j > 0 && !(entry.f_v <= trace.entries[j - 1].f_v + symek::tol::CHAIN) {
            failures.push(format!(
                "stage {} energy {} rose above stage {} energy {}",
                j + 1,
                entry.f_v,
                j,
                trace.entries[j - 1].f_v
            ));
        }
    }
    let mut extracted = false;
    if let Some(conv_tol) = config.conv_tol {
        match extract_minimizer(&trace, conv_tol) {
            Ok((limit, report)) => {
                extracted = true;
                trace.limit_value = Some(report.f_z);
                trace.limit_symmetric_residual = Some(report.asymmetry);
                trace.limit = Some(limit);
            }
            Err(VariationalError::NotConverged { distances }) => {
                failures.push(format!(
                    "stage points have not settled to within {conv_tol}: trailing distances {distances:?}"
                ));
            }
            Err(other) => return Err(other.into()),
        }
    }

    let last = trace.entries.last().expect("schedule is nonempty");
    let summary = serde_json::json!({
        "functional": f.name().to_string(),
        "stages": trace.entries.len(),
        "final_eps": last.eps,
        "final_f": last.f_v,
        "final_asymmetry": last.asymmetry,
        "extracted": extracted,
    });
    let artifact = match config.format {
        OutputFormat::Json => json_artifact(&trace),
        OutputFormat::Csv => stage_csv(&trace),
    };
    Ok(Outcome {
        artifact,
        summary,
        failures,
    })
}

/// The stage table as CSV: one row per scale, columns
/// `j,eps,f,slope_bound,asymmetry`. Values print in shortest round-trip
/// form, so the file is as reproducible as the JSON artifact.
fn stage_csv(trace: &symek::SpsTrace) -> String {
    let mut out = String::from("j,eps,f,slope_bound,asymmetry\n");
    for (j, entry) in trace.entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            j + 1,
            entry.eps,
            entry.f_v,
            entry.slope_bound,
            entry.asymmetry
        ));
    }
    out
}

fn execute(config: &RunConfig) -> Result<Outcome, RunError> {
    log(
        LOG_INFO,
        "info",
        &format!("running {} on {} (seed {})", config.command, config.model, config.seed),
    );
    match config.command {
        CommandKind::VerifyAxioms => run_verify_axioms(config),
        CommandKind::CheckMonotone => run_check_monotone(config),
        CommandKind::Ekeland => run_ekeland(config),
        CommandKind::SymmetricEkeland => run_symmetric_ekeland(config),
        CommandKind::Sps => run_sps(config),
    }
}

// ---------------------------------------------------------------------------
// artifact and manifest plumbing
// ---------------------------------------------------------------------------

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_file(path: &str, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|e| RunError::Write {
        path: path.to_string(),
        detail: e.to_string(),
    })
}

fn manifest_path(out: &str) -> String {
    format!("{out}.manifest.json")
}

/// Delivers the artifact (file or stdout) and the manifest (file next to
/// the artifact, or stderr at debug level), returning the exit code.
fn deliver(
    config: &RunConfig,
    outcome: &Outcome,
    started_unix: u64,
) -> Result<i32, RunError> {
    let exit_status = if outcome.passed() { 0 } else { 1 };
    for failure in &outcome.failures {
        log(LOG_ERROR, "fail", failure);
    }

    match &config.output_path {
        Some(path) => {
            write_file(path, &outcome.artifact)?;
            log(LOG_INFO, "info", &format!("artifact written to {path}"));
        }
        None => print!("{}", outcome.artifact),
    }

    let manifest = RunManifest {
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        command: config.command,
        summary: outcome.summary.clone(),
        exit_status,
    };
    let manifest_json = json_artifact(&manifest);
    match &config.output_path {
        Some(path) => write_file(&manifest_path(path), &manifest_json)?,
        None => log(LOG_DEBUG, "debug", manifest_json.trim_end()),
    }
    Ok(exit_status)
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    let started_unix = unix_now();
    let config = match effective_config(cli.config.as_deref(), cli.command.kind(), cli.command.opts())
    {
        Ok(config) => config,
        Err(e) => {
            log(LOG_ERROR, "error", &e.to_string());
            return e.exit_code();
        }
    };
    match execute(&config).and_then(|outcome| deliver(&config, &outcome, started_unix)) {
        Ok(code) => code,
        Err(e) => {
            log(LOG_ERROR, "error", &e.to_string());
            // Leave a receipt for failed runs too, when there is a place
            // for one; a missing receipt should mean "never ran".
            if let Some(path) = &config.output_path {
                let manifest = RunManifest {
                    config_hash: config.hash(),
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    started_unix,
                    finished_unix: unix_now(),
                    command: config.command,
                    summary: serde_json::json!({ "error": e.to_string() }),
                    exit_status: e.exit_code(),
                };
                let _ = write_file(&manifest_path(path), &json_artifact(&manifest));
            }
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(real_main());
}
