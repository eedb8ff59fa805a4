//! The subcommands. Each `check_*`/`compute_*` function is pure and returns a
//! serializable report; the `*_cmd` wrappers write artifacts and print a
//! short summary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;

use isomon_core::dynamics::{conserved_report, integrate, IntegratorConfig, PathSpec, Trajectory};
use isomon_core::elliptic::{heat_residual, identity_check, EllipticContext, Identity, PeriodScale, Variant};
use isomon_core::models::{
    describe, inozemtsev_hamiltonian, inozemtsev_map, lattice_distance, lax_residual_with, lax_translation_residual_ctx,
    Flow, ModelKind, ModelSpec, PhaseState, Renormalized, ResidualOptions,
};
use isomon_core::monodromy::{
    drift_with_flow, monodromy_data, singular_census, CensusConfig, DriftReport, MonodromyConfig, SpectralInvariants,
};
use isomon_core::rootsys::{build_root_system, structure_constants, Family};
use isomon_core::C64;

use crate::config::{
    complex, merge, Cli, Command, CouplingsArgs, EvolveArgs, IdentitiesArgs, LaxCheckArgs, Mode, ModelArgs, MonodromyArgs,
    ReportArgs, StateArgs,
};
use crate::formats::{
    flow_name, num, pair, pairs, poles, ConservedFile, DriftFile, ModelFile, MonodromyFile, Pair, PoleFile, RenormalizedFile,
    RootSystemFile, StateFile, TrajectoryFile,
};
use crate::literal::{format_complex, parse_polyline, parse_range};
use crate::plot::{log_plot, Series};
use crate::sampling::{identity_triple, random_state, random_tau, random_z, stream_rng};
use crate::{write_file, write_json, CliError, Envelope, Status};

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match run(cli.command, out) {
        Ok(s) => s.exit_code(),
        Err(e) => {
            let _ = writeln!(err, "isomon: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command, out: &mut dyn Write) -> Result<Status, CliError> {
    match cmd {
        Command::Identities(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            identities_cmd(&a, out)
        }
        Command::LaxCheck(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            lax_check_cmd(&a, out)
        }
        Command::Evolve(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            evolve_cmd(&a, out)
        }
        Command::Monodromy(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            monodromy_cmd(&a, out)
        }
        Command::Couplings(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            couplings_cmd(&a, out)
        }
        Command::Report(a) => {
            let mut a = merge(&a, a.common.config.as_deref())?;
            a.resolve()?;
            report_cmd(&a, out)
        }
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

/// Comparison that treats NaN as a failure.
fn below(x: f64, tol: f64) -> bool {
    x < tol
}

fn fmax(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

// ---------------------------------------------------------------- identities

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRow {
    pub id: &'static str,
    pub formula: &'static str,
    pub points: usize,
    pub max_relative: f64,
    pub worst_u: Pair,
    pub worst_v: Pair,
    pub worst_z: Pair,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatRow {
    pub kernel: &'static str,
    pub points: usize,
    pub step: f64,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentitiesReport {
    pub tau: Pair,
    pub identities: Vec<IdentityRow>,
    pub heat: Vec<HeatRow>,
    pub passed: bool,
}

/// Heat equations sample away from the half-period lattice by this much.
const HEAT_GAP: f64 = 0.1;

pub fn check_identities(a: &IdentitiesArgs) -> Result<IdentitiesReport, CliError> {
    let tau = complex(&a.tau);
    if tau.im <= 0.0 || !tau.im.is_finite() {
        return Err(CliError::Usage(format!("tau = {} must lie in the upper half plane", format_complex(tau))));
    }
    let ctx = EllipticContext::new(tau)?;
    let seed = a.common.seed();
    let n = a.points.unwrap_or(100);
    let tol = a.tolerance.unwrap_or(1e-10);
    let gap = a.gap.unwrap_or(0.02);
    let identities = Identity::ALL
        .par_iter()
        .enumerate()
        .map(|(k, &id)| -> Result<IdentityRow, CliError> {
            let mut r = stream_rng(seed, k as u64);
            let mut worst = (0.0f64, [C64::default(); 3]);
            for _ in 0..n {
                let (u, v, z) = identity_triple(&mut r, tau, gap);
                let e = identity_check(&ctx, id, u, v, z)?.relative();
                if !(e <= worst.0) {
                    worst = (e, [u, v, z]);
                }
            }
            Ok(IdentityRow {
                id: id.name(),
                formula: id.formula(),
                points: n,
                max_relative: worst.0,
                worst_u: pair(worst.1[0]),
                worst_v: pair(worst.1[1]),
                worst_z: pair(worst.1[2]),
                passed: below(worst.0, tol),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hn = a.heat_points.unwrap_or(50);
    let htol = a.heat_tolerance.unwrap_or(1e-7);
    let h = a.heat_step.unwrap_or(1e-5);
    let kernels = [(Variant::Plain, "plain"), (Variant::Half, "half"), (Variant::Double, "double")];
    let heat = kernels
        .par_iter()
        .enumerate()
        .map(|(k, &(variant, kernel))| -> Result<HeatRow, CliError> {
            let mut r = stream_rng(seed, 1000 + k as u64);
            let mut worst = 0.0f64;
            for _ in 0..hn {
                let (u, _, z) = identity_triple(&mut r, tau, HEAT_GAP);
                worst = fmax(worst, heat_residual(&ctx, variant, u, z, h)?.norm());
            }
            Ok(HeatRow { kernel, points: hn, step: h, max_residual: worst, passed: below(worst, htol) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let passed = identities.iter().all(|r| r.passed) && heat.iter().all(|r| r.passed);
    Ok(IdentitiesReport { tau: pair(tau), identities, heat, passed })
}

fn identities_cmd(a: &IdentitiesArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    if a.list {
        for id in Identity::ALL {
            writeln!(out, "{:<26} arity {}  {}", id.name(), id.arity(), id.formula())?;
        }
        return Ok(Status::Passed);
    }
    let rep = check_identities(a)?;
    let dir = a.common.out_dir();
    write_json(&dir.join("identities.json"), &Envelope::new("identities", a, &rep))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "name", "points", "max_residual", "tolerance", "passed"])?;
    let tol = num(a.tolerance.unwrap_or_default());
    for r in &rep.identities {
        w.write_record(["identity", r.id, &r.points.to_string(), &num(r.max_relative), &tol, &r.passed.to_string()])?;
    }
    let htol = num(a.heat_tolerance.unwrap_or_default());
    for r in &rep.heat {
        w.write_record(["heat", r.kernel, &r.points.to_string(), &num(r.max_residual), &htol, &r.passed.to_string()])?;
    }
    write_file(&dir.join("identities.csv"), &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    writeln!(out, "identities at tau = {}", a.tau.as_deref().unwrap_or_default())?;
    for r in &rep.identities {
        writeln!(out, "  {:<26} {:>10.3e}  {}", r.id, r.max_relative, mark(r.passed))?;
    }
    for r in &rep.heat {
        writeln!(out, "  heat {:<21} {:>10.3e}  {}", r.kernel, r.max_residual, mark(r.passed))?;
    }
    writeln!(out, "{}", if rep.passed { "all identities hold" } else { "some identities FAILED" })?;
    Ok(Status::of(rep.passed))
}

// ---------------------------------------------------------------- lax-check

#[derive(Clone, Debug, Serialize)]
pub struct LaxRow {
    pub model: String,
    pub sample: usize,
    pub seed: u64,
    pub stream: u64,
    pub tau: Pair,
    pub z: Pair,
    pub isospectral: Option<f64>,
    pub isomonodromic: Option<f64>,
    /// Largest translation residual relative to the largest entry of
    /// `L` and `M` at `z` and `z + τ` (at least 1).
    pub translation: f64,
    pub lax_norm: f64,
    /// Largest diagonal entry of the spin velocity; the flow must keep `diag F = 0`.
    pub constraint: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LaxSummary {
    pub model: String,
    pub kind: &'static str,
    pub rank: usize,
    pub lax_dim: usize,
    pub samples: usize,
    pub max_isospectral: Option<f64>,
    pub max_isomonodromic: Option<f64>,
    pub max_translation: f64,
    pub max_constraint: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LaxReport {
    pub summaries: Vec<LaxSummary>,
    pub rows: Vec<LaxRow>,
    pub passed: bool,
}

/// One model of each family at rank ≤ 3 with generic complex couplings.
pub fn default_models() -> Vec<ModelSpec> {
    let c = C64::new;
    let a2 = || build_root_system(Family::A, 2).expect("A2");
    vec![
        ModelSpec::a_vector(3, c(0.7, 0.2)),
        ModelSpec::simply_laced(a2(), c(0.8, -0.1)),
        ModelSpec::bc_short(2, c(0.7, 0.0), c(0.5, 0.1), c(0.6, 0.0)),
        ModelSpec::twisted_bc(2, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.1), c(0.6, 0.0), c(0.4, -0.2)),
        ModelSpec::spin_sl(3),
        ModelSpec::spin_simply_laced(a2()),
    ]
    .into_iter()
    .map(|m| m.expect("default models are valid"))
    .collect()
}

pub fn check_lax(a: &LaxCheckArgs) -> Result<LaxReport, CliError> {
    let models = if a.model.model.is_some() { vec![a.model.build()?] } else { default_models() };
    let seed = a.common.seed();
    let n = a.samples.unwrap_or(20);
    let mode = a.mode.unwrap_or(Mode::Both);
    let tol = a.tolerance.unwrap_or(1e-6);
    let ttol = a.translation_tolerance.unwrap_or(1e-10);
    let gap = a.gap.unwrap_or(0.1);
    let opts = ResidualOptions { step: a.step.unwrap_or(1e-4), ..Default::default() };
    let flows: Vec<Flow> = match mode {
        Mode::Isospectral => vec![Flow::Isospectral],
        Mode::Isomonodromic => vec![Flow::Isomonodromic],
        Mode::Both => vec![Flow::Isospectral, Flow::Isomonodromic],
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (mi, m) in models.iter().enumerate() {
        let label = describe(m);
        let model_rows = (0..n)
            .into_par_iter()
            .map(|i| -> Result<LaxRow, CliError> {
                let stream = ((mi as u64) << 32) | i as u64;
                let mut r = stream_rng(seed, stream);
                let tau = random_tau(&mut r);
                let ctx = EllipticContext::new(tau)?;
                let s = random_state(m, tau, &mut r, gap)
                    .ok_or_else(|| CliError::Numerical(format!("{label}: no state with pole gap {gap}")))?;
                let z = random_z(m, &ctx, &mut r, gap);
                let mut res = [None, None];
                for &f in &flows {
                    let v = lax_residual_with(m, &s, z, &ctx, f, opts)?;
                    res[(f == Flow::Isomonodromic) as usize] = Some(v);
                }
                let (ra, rl, rm) = lax_translation_residual_ctx(m, &s, z, &ctx)?;
                let here = m.lax(&s, z, &ctx)?;
                let there = m.lax(&s, z + tau, &ctx)?;
                let lax_norm = here.l.max_norm();
                let scale = [&here.l, &here.m, &there.l, &there.m].iter().map(|x| x.max_norm()).fold(1.0, f64::max);
                let translation = fmax(fmax(ra, rl), rm) / scale;
                let constraint = m.eom(&s, &ctx, Flow::Isospectral)?.spin_diagonal_norm();
                let passed = res.iter().flatten().all(|&v| below(v, tol)) && below(translation, ttol) && below(constraint, tol);
                Ok(LaxRow {
                    model: label.clone(),
                    sample: i,
                    seed,
                    stream,
                    tau: pair(tau),
                    z: pair(z),
                    isospectral: res[0],
                    isomonodromic: res[1],
                    translation,
                    lax_norm,
                    constraint,
                    passed,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let worst = |f: fn(&LaxRow) -> Option<f64>| model_rows.iter().filter_map(f).reduce(fmax);
        summaries.push(LaxSummary {
            model: label.clone(),
            kind: m.kind().name(),
            rank: m.rank(),
            lax_dim: m.lax_dim(),
            samples: n,
            max_isospectral: worst(|r| r.isospectral),
            max_isomonodromic: worst(|r| r.isomonodromic),
            max_translation: worst(|r| Some(r.translation)).unwrap_or(0.0),
            max_constraint: worst(|r| Some(r.constraint)).unwrap_or(0.0),
            passed: model_rows.iter().all(|r| r.passed),
        });
        rows.extend(model_rows);
    }
    let passed = summaries.iter().all(|s| s.passed);
    Ok(LaxReport { summaries, rows, passed })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| num(x)).unwrap_or_default()
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
}

fn lax_check_cmd(a: &LaxCheckArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let rep = check_lax(a)?;
    let dir = a.common.out_dir();
    write_json(&dir.join("lax-check.json"), &Envelope::new("lax-check", a, &rep))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model", "sample", "seed", "stream", "tau_re", "tau_im", "z_re", "z_im", "isospectral", "isomonodromic",
        "translation", "lax_norm", "constraint", "passed",
    ])?;
    for r in &rep.rows {
        w.write_record([
            r.model.clone(),
            r.sample.to_string(),
            r.seed.to_string(),
            r.stream.to_string(),
            num(r.tau[0]),
            num(r.tau[1]),
            num(r.z[0]),
            num(r.z[1]),
            opt(r.isospectral),
            opt(r.isomonodromic),
            num(r.translation),
            num(r.lax_norm),
            num(r.constraint),
            r.passed.to_string(),
        ])?;
    }
    write_file(&dir.join("lax-check.csv"), &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    writeln!(out, "{:<26} {:>11} {:>11} {:>11} {:>11}", "model", "isospectral", "isomonodr.", "translation", "constraint")?;
    for s in &rep.summaries {
        writeln!(
            out,
            "{:<26} {:>11} {:>11} {:>11.3e} {:>11.3e}  {}",
            s.model,
            opt_sci(s.max_isospectral),
            opt_sci(s.max_isomonodromic),
            s.max_translation,
            s.max_constraint,
            mark(s.passed)
        )?;
    }
    Ok(Status::of(rep.passed))
}

// ---------------------------------------------------------------- evolve

fn initial_state(m: &ModelSpec, args: &StateArgs, tau: C64, seed: u64) -> Result<PhaseState, CliError> {
    let s = match &args.state {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let file: StateFile =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            file.build().map_err(CliError::Usage)?
        }
        None => {
            let gap = args.state_gap.unwrap_or(0.15);
            random_state(m, tau, &mut stream_rng(seed, 0), gap)
                .ok_or_else(|| CliError::Numerical(format!("no random state with pole gap {gap}")))?
        }
    };
    m.validate(&s)?;
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct AbortFile {
    pub reason: String,
    pub s: Option<f64>,
    pub last_state: Option<StateFile>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveReport {
    pub model: ModelFile,
    pub description: String,
    pub initial_state: StateFile,
    pub summary: Option<ConservedFile>,
    pub abort: Option<AbortFile>,
    pub trajectory: Option<TrajectoryFile>,
    pub passed: bool,
}

pub struct EvolveOutcome {
    pub report: EvolveReport,
    pub trajectory: Option<Trajectory>,
    /// Set when the integration aborted; the report still describes the abort.
    pub error: Option<CliError>,
}

pub fn compute_evolve(a: &EvolveArgs) -> Result<EvolveOutcome, CliError> {
    let m = a.model.build()?;
    let (flow, path, tau) = match a.mode.unwrap_or(Mode::Isospectral) {
        Mode::Isomonodromic => {
            let v = parse_polyline(a.tau_path.as_deref().unwrap_or(crate::config::DEFAULT_TAU_PATH)).map_err(CliError::Usage)?;
            let tau0 = v[0];
            (Flow::Isomonodromic, PathSpec::Polyline(v), tau0)
        }
        _ => {
            let (t0, t1) = parse_range(a.t.as_deref().unwrap_or("0..1")).map_err(CliError::Usage)?;
            (Flow::Isospectral, PathSpec::Line { start: t0, end: t1 }, complex(&a.tau))
        }
    };
    if tau.im <= 0.0 {
        return Err(CliError::Usage(format!("modulus {} is not in the upper half plane", format_complex(tau))));
    }
    let s0 = initial_state(&m, &a.initial, tau, a.common.seed())?;
    let probe = complex(&a.probe);
    let probes = vec![(probe, 2), (probe, 3)];
    let cfg = IntegratorConfig {
        ode: a.ode.options(),
        n_samples: a.samples.unwrap_or(11),
        collision_guard: a.collision_guard.unwrap_or(1e-4),
        tau,
        probes: probes.clone(),
    };
    let mut report = EvolveReport {
        model: ModelFile::of(&m),
        description: describe(&m),
        initial_state: StateFile::of(&s0),
        summary: None,
        abort: None,
        trajectory: None,
        passed: false,
    };
    let traj = match integrate(&m, &s0, &path, flow, &cfg) {
        Ok(t) => t,
        Err(e) => {
            let err = CliError::from(e.clone());
            if !matches!(err, CliError::Numerical(_)) {
                return Err(err);
            }
            report.abort = Some(match e {
                isomon_core::Error::Collision { s, ref last } => {
                    AbortFile { reason: e.to_string(), s: Some(s), last_state: Some(StateFile::of(&last)) }
                }
                isomon_core::Error::StepUnderflow { s } => AbortFile { reason: e.to_string(), s: Some(s), last_state: None },
                _ => AbortFile { reason: e.to_string(), s: None, last_state: None },
            });
            return Ok(EvolveOutcome { report, trajectory: None, error: Some(err) });
        }
    };
    let summary = conserved_report(&traj, &m, &probes)?;
    let tol = a.tolerance.unwrap_or(1e-8);
    let etol = a.eigen_tolerance.unwrap_or(1e-7);
    let spin_ok = below(summary.max_spin_diagonal, tol);
    report.passed = if summary.conservation_expected {
        spin_ok
            && below(summary.hamiltonian_drift, tol)
            && below(summary.max_trace_drift(), tol)
            && below(summary.max_eigen_drift(), etol)
    } else {
        spin_ok
    };
    report.summary = Some(ConservedFile::of(&summary));
    report.trajectory = Some(TrajectoryFile::of(&traj));
    Ok(EvolveOutcome { report, trajectory: Some(traj), error: None })
}

fn evolve_cmd(a: &EvolveArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let oc = compute_evolve(a)?;
    let dir = a.common.out_dir();
    write_json(&dir.join("evolve.json"), &Envelope::new("evolve", a, &oc.report))?;
    if let Some(t) = &oc.trajectory {
        let mut buf = Vec::new();
        TrajectoryFile::write_csv(t, &mut buf)?;
        write_file(&dir.join("evolve.csv"), &buf)?;
    }
    if let Some(e) = oc.error {
        return Err(e);
    }
    let rep = &oc.report;
    let s = rep.summary.as_ref().expect("summary of a finished run");
    writeln!(out, "{} {} flow", rep.description, s.flow)?;
    writeln!(out, "  H drift            {:.3e}", s.hamiltonian_drift)?;
    for t in &s.traces {
        writeln!(out, "  tr L(z*)^{} drift   {:.3e}", t.power, t.max_drift)?;
    }
    for e in &s.eigenvalue_drift {
        writeln!(out, "  eig L(z*) drift    {:.3e}", e.max_drift)?;
    }
    if rep.initial_state.f.is_some() {
        writeln!(out, "  max |diag F|       {:.3e}", s.max_spin_diagonal)?;
    }
    let verdict = match (s.conservation_expected, rep.passed) {
        (true, true) => "conserved",
        (true, false) => "conservation FAILED",
        (false, true) => "modulus flow: drifts reported, nothing is conserved",
        (false, false) => "spin constraint FAILED",
    };
    writeln!(out, "  {verdict}")?;
    Ok(Status::of(rep.passed))
}

// ---------------------------------------------------------------- monodromy

#[derive(Clone, Debug, Serialize)]
pub struct ControlFile {
    pub flow: &'static str,
    pub max_drift: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyReport {
    pub model: ModelFile,
    pub description: String,
    pub initial_state: StateFile,
    pub tolerance: f64,
    pub monodromy: MonodromyFile,
    pub drift: DriftFile,
    pub control: Option<ControlFile>,
    pub census: Vec<PoleFile>,
    pub passed: bool,
}

pub struct MonodromyOutcome {
    pub report: MonodromyReport,
    pub drift: DriftReport,
    pub control: Option<DriftReport>,
}

pub fn monodromy_config(a: &MonodromyArgs) -> MonodromyConfig {
    let d = MonodromyConfig::default();
    let ode = a.ode.options();
    MonodromyConfig {
        ode,
        clearance: a.clearance.unwrap_or(d.clearance),
        loop_r: a.loop_r.unwrap_or(d.loop_r),
        checkpoints: a.checkpoints.unwrap_or(d.checkpoints),
        flow: IntegratorConfig { ode, ..d.flow },
    }
}

pub fn compute_monodromy(a: &MonodromyArgs) -> Result<MonodromyOutcome, CliError> {
    let m = a.model.build()?;
    let vertices =
        parse_polyline(a.tau_path.as_deref().unwrap_or(crate::config::DEFAULT_TAU_PATH)).map_err(CliError::Usage)?;
    let tau0 = vertices[0];
    let path = PathSpec::Polyline(vertices);
    path.validate_modulus()?;
    let s0 = initial_state(&m, &a.initial, tau0, a.common.seed())?;
    let z0 = complex(&a.z0);
    let cfg = monodromy_config(a);
    let ctx = EllipticContext::new(tau0)?;
    let data = monodromy_data(&m, &s0, &ctx, z0, &cfg)?;
    let inv = SpectralInvariants::of(&data)?;
    let census = singular_census(&m, &s0, &ctx, &CensusConfig::default())?;
    let drift = drift_with_flow(&m, &s0, &path, z0, Flow::Isomonodromic, &cfg)?;
    let tol = a.tolerance.unwrap_or(1e-5);
    let threshold = a.control_threshold.unwrap_or(1e-3);
    let control = if a.control { Some(drift_with_flow(&m, &s0, &path, z0, Flow::Isospectral, &cfg)?) } else { None };
    let control_file = control.as_ref().map(|c| ControlFile {
        flow: flow_name(c.flow),
        max_drift: c.max_drift,
        threshold,
        passed: c.max_drift > threshold,
    });
    let passed = below(drift.max_drift, tol) && control_file.as_ref().map_or(true, |c| c.passed);
    let report = MonodromyReport {
        model: ModelFile::of(&m),
        description: describe(&m),
        initial_state: StateFile::of(&s0),
        tolerance: tol,
        monodromy: MonodromyFile::of(&data, &inv),
        drift: DriftFile::of(&drift),
        control: control_file,
        census: poles(&census),
        passed,
    };
    Ok(MonodromyOutcome { report, drift, control })
}

/// Drift of every invariant at each checkpoint, relative to the first.
fn checkpoint_drifts(r: &DriftReport) -> Vec<Vec<(String, f64)>> {
    let base = &r.checkpoints[0].invariants;
    r.checkpoints.iter().map(|c| c.invariants.drift_from(base)).collect()
}

fn max_of(v: &[(String, f64)]) -> f64 {
    v.iter().map(|d| d.1).fold(0.0, fmax)
}

fn monodromy_cmd(a: &MonodromyArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let oc = compute_monodromy(a)?;
    let dir = a.common.out_dir();
    write_json(&dir.join("monodromy.json"), &Envelope::new("monodromy", a, &oc.report))?;

    let per = checkpoint_drifts(&oc.drift);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head: Vec<String> = ["s", "tau_re", "tau_im", "liouville_residual", "max_drift"].map(String::from).to_vec();
    head.extend(per[0].iter().map(|d| d.0.clone()));
    w.write_record(&head)?;
    for (c, d) in oc.drift.checkpoints.iter().zip(&per) {
        let mut row =
            vec![num(c.s), num(c.tau.re), num(c.tau.im), num(c.liouville_residual), num(max_of(d))];
        row.extend(d.iter().map(|x| num(x.1)));
        w.write_record(&row)?;
    }
    write_file(&dir.join("monodromy-drift.csv"), &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;

    let tol = oc.report.tolerance;
    let s_of = |r: &DriftReport| r.checkpoints.iter().map(|c| c.s).collect::<Vec<_>>();
    let mut series = vec![Series {
        name: "isomonodromic".into(),
        color: "#1f77b4",
        points: s_of(&oc.drift).into_iter().zip(per.iter().map(|d| max_of(d))).collect(),
        dashed: false,
    }];
    if let Some(c) = &oc.control {
        let pc = checkpoint_drifts(c);
        series.push(Series {
            name: "isospectral control".into(),
            color: "#d62728",
            points: s_of(c).into_iter().zip(pc.iter().map(|d| max_of(d))).collect(),
            dashed: false,
        });
    }
    let (s_lo, s_hi) = (oc.drift.checkpoints[0].s, oc.drift.checkpoints.last().map_or(1.0, |c| c.s));
    series.push(Series { name: "tolerance".into(), color: "#7f7f7f", points: vec![(s_lo, tol), (s_hi, tol)], dashed: true });
    let title = format!("{}: monodromy invariant drift", oc.report.description);
    let svg = log_plot(&title, "modulus path parameter s", "max relative drift", &series, 1e-17);
    write_file(&dir.join("monodromy-drift.svg"), svg.as_bytes())?;

    let rep = &oc.report;
    writeln!(out, "{} along tau path {}", rep.description, a.tau_path.as_deref().unwrap_or_default())?;
    writeln!(out, "  Liouville residual   {:.3e}", rep.monodromy.liouville_residual)?;
    writeln!(out, "  singular points      {}", rep.census.len())?;
    writeln!(out, "  max invariant drift  {:.3e}  (tolerance {tol:.0e})", rep.drift.max_drift)?;
    if let Some(c) = &rep.control {
        writeln!(out, "  isospectral control  {:.3e}  (must exceed {:.0e}) {}", c.max_drift, c.threshold, mark(c.passed))?;
    }
    writeln!(out, "  {}", if rep.passed { "isomonodromic" } else { "isomonodromy check FAILED" })?;
    Ok(Status::of(rep.passed))
}

// ---------------------------------------------------------------- couplings

#[derive(Clone, Debug, Serialize)]
pub struct CouplingsReport {
    pub model: ModelFile,
    pub renormalized: RenormalizedFile,
    /// Squared Inozemtsev couplings at the half periods `0, 1/2, (1+τ)/2, τ/2`.
    pub inozemtsev: Option<Vec<Pair>>,
}

pub fn compute_couplings(a: &ModelArgs) -> Result<CouplingsReport, CliError> {
    let m = a.build()?;
    let inozemtsev = match m.kind() {
        ModelKind::TwistedBcShort => Some(pairs(&inozemtsev_map(m.couplings())?)),
        _ => None,
    };
    Ok(CouplingsReport { model: ModelFile::of(&m), renormalized: RenormalizedFile::of(m.renormalized()), inozemtsev })
}

fn couplings_cmd(a: &CouplingsArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let rep = compute_couplings(&a.model)?;
    write_json(&a.common.out_dir().join("couplings.json"), &Envelope::new("couplings", a, &rep))?;
    let m = a.model.build()?;
    let f = format_complex;
    writeln!(out, "{}", describe(&m))?;
    match *m.renormalized() {
        Renormalized::Unchanged => writeln!(out, "  couplings enter the Hamiltonian unchanged")?,
        Renormalized::Bc { gs_sq } => writeln!(out, "  g̃_s² = {}", f(gs_sq))?,
        Renormalized::Twisted { gl2_sq, gs1_sq, gs2_sq } => {
            writeln!(out, "  g̃_l2² = {}", f(gl2_sq))?;
            writeln!(out, "  g̃_s1² = {}", f(gs1_sq))?;
            writeln!(out, "  g̃_s2² = {}", f(gs2_sq))?;
        }
    }
    if let Some(g) = &rep.inozemtsev {
        writeln!(out, "  Inozemtsev couplings at half periods 0, 1/2, (1+τ)/2, τ/2:")?;
        for (k, v) in g.iter().enumerate() {
            writeln!(out, "    g_{k}² = {}", f(C64::new(v[0], v[1])))?;
        }
    }
    Ok(Status::Passed)
}

// ---------------------------------------------------------------- shared checks

#[derive(Clone, Debug, Serialize)]
pub struct InozemtsevRow {
    pub rank: usize,
    pub tau: Pair,
    /// `|ΔH(s₁) − ΔH(s₂)| / max(1, |H(s₁)|)` for two random states.
    pub spread: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InozemtsevReport {
    pub rows: Vec<InozemtsevRow>,
    pub max_spread: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Twisted-BC Hamiltonian minus its Inozemtsev form, compared between random
/// state pairs at random moduli and couplings.
pub fn check_inozemtsev(seed: u64, points: usize, tolerance: f64) -> Result<InozemtsevReport, CliError> {
    let rows = (0..points)
        .into_par_iter()
        .map(|k| -> Result<InozemtsevRow, CliError> {
            let mut r = stream_rng(seed, 2000 + k as u64);
            let rank = 1 + k % 2;
            let g: Vec<C64> = (0..5).map(|_| crate::sampling::cell_point(&mut r, C64::new(0.0, 2.0))).collect();
            let m = ModelSpec::twisted_bc(rank, g[0], g[1], g[2], g[3], g[4])?;
            let tau = random_tau(&mut r);
            let ctx = EllipticContext::new(tau)?;
            let gs = inozemtsev_map(m.couplings())?;
            let diff = |s: &PhaseState| -> Result<C64, CliError> {
                Ok(m.hamiltonian(s, &ctx)? - inozemtsev_hamiltonian(g[0], &gs, s, &ctx)?)
            };
            let state = |r: &mut _| random_state(&m, tau, r, 0.05).ok_or_else(|| CliError::Numerical("no state".into()));
            let s1 = state(&mut r)?;
            let s2 = state(&mut r)?;
            let scale = m.hamiltonian(&s1, &ctx)?.norm().max(1.0);
            Ok(InozemtsevRow { rank, tau: pair(tau), spread: (diff(&s1)? - diff(&s2)?).norm() / scale })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max_spread = rows.iter().map(|r| r.spread).fold(0.0, fmax);
    Ok(InozemtsevReport { rows, max_spread, tolerance, passed: below(max_spread, tolerance) })
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusRow {
    pub model: String,
    pub tau: Pair,
    pub expected: Vec<Pair>,
    pub found: Vec<PoleFile>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub rows: Vec<CensusRow>,
    pub passed: bool,
}

/// Pole census of `L(z)` for every family: root-type pairs must show the
/// four half periods and nothing else, the others only the origin.
pub fn check_census(seed: u64) -> Result<CensusReport, CliError> {
    let rows = default_models()
        .into_par_iter()
        .enumerate()
        .map(|(k, m)| -> Result<CensusRow, CliError> {
            let mut r = stream_rng(seed, 3000 + k as u64);
            let tau = random_tau(&mut r);
            let ctx = EllipticContext::new(tau)?;
            let s = random_state(&m, tau, &mut r, 0.15).ok_or_else(|| CliError::Numerical("no state".into()))?;
            let found = singular_census(&m, &s, &ctx, &CensusConfig::default())?;
            let expected: Vec<C64> =
                if m.kind().is_root_type() { ctx.half_periods().to_vec() } else { vec![C64::default()] };
            let hit = |w: C64| found.iter().filter(|p| lattice_distance(p.location - w, PeriodScale::Full, tau) < 1e-6).count();
            let passed = found.len() == expected.len() && expected.iter().all(|&w| hit(w) == 1);
            Ok(CensusRow { model: describe(&m), tau: pair(tau), expected: pairs(&expected), found: poles(&found), passed })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let passed = rows.iter().all(|r| r.passed);
    Ok(CensusReport { rows, passed })
}

// ---------------------------------------------------------------- report

#[derive(Clone, Debug, Serialize)]
pub struct Part {
    pub name: String,
    pub dir: String,
    pub exit_code: i32,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
struct ReportBody {
    parts: Vec<Part>,
    passed: bool,
}

fn sub_out(a: &ReportArgs, rel: &str) -> crate::config::CommonArgs {
    let mut c = a.common.clone();
    c.out = Some(a.common.out_dir().join(rel));
    c
}

fn part(name: &str, dir: &str, r: Result<Status, CliError>) -> Part {
    let (exit_code, detail) = match r {
        Ok(s) => (s.exit_code(), if s == Status::Passed { "passed".into() } else { "check failed".into() }),
        Err(e) => (e.exit_code(), e.to_string()),
    };
    Part { name: name.into(), dir: dir.into(), exit_code, detail }
}

fn model_args(model: &str, rank: usize) -> ModelArgs {
    ModelArgs { model: Some(model.into()), rank: Some(rank), ..Default::default() }
}

fn report_cmd(a: &ReportArgs, out: &mut dyn Write) -> Result<Status, CliError> {
    let mut sink = std::io::sink();
    let mut parts = Vec::new();
    let root = a.common.out_dir().to_path_buf();

    for (tau, rel) in [("0+1i", "identities/i"), ("0.3+0.8i", "identities/0.3+0.8i")] {
        let mut args = IdentitiesArgs { common: sub_out(a, rel), tau: Some(tau.into()), points: a.points, ..Default::default() };
        let r = args.resolve().and_then(|_| identities_cmd(&args, &mut sink));
        parts.push(part(&format!("identities (tau = {tau})"), rel, r));
    }

    let mut lax = LaxCheckArgs { common: sub_out(a, "lax-check"), samples: a.samples, ..Default::default() };
    let r = lax.resolve().and_then(|_| lax_check_cmd(&lax, &mut sink));
    parts.push(part("lax equations and translations", "lax-check", r));

    for (model, rank) in [("a-vector", 3), ("twisted-bc", 2)] {
        let rel = format!("evolve/{model}-{rank}");
        let mut args = EvolveArgs { common: sub_out(a, &rel), model: model_args(model, rank), ..Default::default() };
        let r = args.resolve().and_then(|_| evolve_cmd(&args, &mut sink));
        parts.push(part(&format!("conservation {model}({rank})"), &rel, r));
    }

    for (model, rank) in [("a-vector", 2), ("twisted-bc", 1)] {
        let rel = format!("monodromy/{model}-{rank}");
        let mut args = MonodromyArgs {
            common: sub_out(a, &rel),
            model: model_args(model, rank),
            checkpoints: a.checkpoints,
            control: true,
            ..Default::default()
        };
        let r = args.resolve().and_then(|_| monodromy_cmd(&args, &mut sink));
        parts.push(part(&format!("isomonodromy {model}({rank})"), &rel, r));
    }

    let mut cpl = CouplingsArgs { common: sub_out(a, "couplings"), model: model_args("twisted-bc", 1) };
    let r = cpl.resolve().and_then(|_| couplings_cmd(&cpl, &mut sink));
    parts.push(part("couplings", "couplings", r));

    let r = check_inozemtsev(a.common.seed(), 10, 1e-9).and_then(|rep| {
        write_json(&root.join("inozemtsev.json"), &Envelope::new("report", a, &rep))?;
        Ok(Status::of(rep.passed))
    });
    parts.push(part("inozemtsev equivalence", "inozemtsev.json", r));

    let r = export_root_systems(&root.join("root-systems"));
    parts.push(part("root systems and structure constants", "root-systems", r));

    let r = check_census(a.common.seed()).and_then(|rep| {
        write_json(&root.join("census.json"), &Envelope::new("report", a, &rep))?;
        Ok(Status::of(rep.passed))
    });
    parts.push(part("singular point census", "census.json", r));

    let worst = parts.iter().map(|p| p.exit_code).max().unwrap_or(0);
    let body = ReportBody { passed: worst == 0, parts };
    write_json(&root.join("report.json"), &Envelope::new("report", a, &body))?;
    for p in &body.parts {
        writeln!(out, "{:<40} {:<24} {}", p.name, p.dir, if p.exit_code == 0 { "ok".into() } else { p.detail.clone() })?;
    }
    writeln!(out, "report written to {}", root.display())?;
    match worst {
        0 => Ok(Status::Passed),
        3 => Err(CliError::Numerical("a report part aborted; see report.json".into())),
        1 => Err(CliError::Usage("a report part could not run; see report.json".into())),
        _ => Ok(Status::Failed),
    }
}

#[derive(Clone, Debug, Serialize)]
struct RootSystemEntry {
    #[serde(flatten)]
    system: RootSystemFile,
    structure_constants: Option<String>,
}

/// Root systems used by the models, one JSON file each.
pub fn export_root_systems(dir: &Path) -> Result<Status, CliError> {
    let systems = [
        (Family::A, 2),
        (Family::A, 3),
        (Family::D, 4),
        (Family::D, 5),
        (Family::E6, 6),
        (Family::E7, 7),
        (Family::E8, 8),
        (Family::BC, 1),
        (Family::BC, 2),
        (Family::BC, 3),
    ];
    let mut ok = true;
    for (family, rank) in systems {
        let rs = build_root_system(family, rank)?;
        let sc = if rs.is_simply_laced() {
            let v = structure_constants(&rs).map_err(CliError::from).and_then(|sc| sc.verify().map_err(CliError::Numerical));
            ok &= v.is_ok();
            Some(match v {
                Ok(()) => "verified".to_string(),
                Err(e) => e.to_string(),
            })
        } else {
            None
        };
        let label = if matches!(family, Family::E6 | Family::E7 | Family::E8) { family.to_string() } else { format!("{family}{rank}") };
        let name: PathBuf = format!("{label}.json").into();
        write_json(&dir.join(name), &RootSystemEntry { system: RootSystemFile::of(&rs), structure_constants: sc })?;
    }
    Ok(Status::of(ok))
}
