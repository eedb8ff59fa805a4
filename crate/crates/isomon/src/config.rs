//! Command-line arguments, JSON config files and default resolution.
//!
//! Every argument struct doubles as the resolved run configuration: after
//! merging a config file under the flags and filling defaults, it is
//! serialized verbatim into the header of each report.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::formats::ModelFile;
use crate::literal::{format_complex, parse_complex};
use crate::CliError;
use isomon_core::models::{ModelKind, ModelSpec};
use isomon_core::C64;

pub const OUT_DIR_ENV: &str = "ISOMON_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "isomon-out";
pub const DEFAULT_TAU_PATH: &str = "i:0.05+1.1i";
pub const DEFAULT_Z0: &str = "0.23+0.31i";

#[derive(Parser, Debug)]
#[command(name = "isomon", version, about = "Elliptic Calogero-Moser Lax pairs: identity checks, flows and monodromy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check every elliptic function identity and the heat equations at random points.
    Identities(IdentitiesArgs),
    /// Sweep Lax equation and translation residuals over random states.
    LaxCheck(LaxCheckArgs),
    /// Integrate the isospectral or isomonodromic flow and monitor conserved quantities.
    Evolve(EvolveArgs),
    /// Compute monodromy matrices and their drift along a modulus path.
    Monodromy(MonodromyArgs),
    /// Print renormalized couplings and the Inozemtsev map.
    Couplings(CouplingsArgs),
    /// Run every check and bundle the outputs into one directory.
    Report(ReportArgs),
}

/// Options shared by every command.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct CommonArgs {
    /// JSON file with option values; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [env: ISOMON_OUT_DIR] [default: isomon-out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    fn resolve(&mut self, seed: u64) {
        if self.out.is_none() {
            self.out = Some(std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT_DIR.into()));
        }
        self.seed.get_or_insert(seed);
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT_DIR))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Model selection. Couplings are complex literals.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct ModelArgs {
    /// a-vector, simply-laced, bc, twisted-bc, spin-sl or spin-simply-laced.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Root system of simply-laced models: A, D, E6, E7 or E8.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Middle-root coupling.
    #[arg(long, allow_hyphen_values = true)]
    pub gm: Option<String>,
    /// Long-root coupling (bc).
    #[arg(long, allow_hyphen_values = true)]
    pub gl: Option<String>,
    /// Short-root coupling (bc).
    #[arg(long, allow_hyphen_values = true)]
    pub gs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gl1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gl2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gs1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gs2: Option<String>,
}

const COUPLING_DEFAULTS: [(&str, f64); 8] =
    [("g", 1.0), ("gm", 1.0), ("gl", 0.5), ("gs", 0.6), ("gl1", 0.5), ("gl2", 0.3), ("gs1", 0.6), ("gs2", 0.4)];

fn coupling_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::AVector | ModelKind::SimplyLacedRoot => &["g"],
        ModelKind::BcShort => &["gm", "gl", "gs"],
        ModelKind::TwistedBcShort => &["gm", "gl1", "gl2", "gs1", "gs2"],
        ModelKind::SpinSl | ModelKind::SpinSimplyLaced => &[],
    }
}

fn file_key(flag: &str) -> &'static str {
    match flag {
        "g" => "g",
        "gm" => "g_m",
        "gl" => "g_l",
        "gs" => "g_s",
        "gl1" => "g_l1",
        "gl2" => "g_l2",
        "gs1" => "g_s1",
        _ => "g_s2",
    }
}

impl ModelArgs {
    fn slot(&mut self, name: &str) -> &mut Option<String> {
        match name {
            "g" => &mut self.g,
            "gm" => &mut self.gm,
            "gl" => &mut self.gl,
            "gs" => &mut self.gs,
            "gl1" => &mut self.gl1,
            "gl2" => &mut self.gl2,
            "gs1" => &mut self.gs1,
            _ => &mut self.gs2,
        }
    }

    fn get(&self, name: &str) -> Option<&str> {
        match name {
            "g" => self.g.as_deref(),
            "gm" => self.gm.as_deref(),
            "gl" => self.gl.as_deref(),
            "gs" => self.gs.as_deref(),
            "gl1" => self.gl1.as_deref(),
            "gl2" => self.gl2.as_deref(),
            "gs1" => self.gs1.as_deref(),
            _ => self.gs2.as_deref(),
        }
    }

    pub fn kind(&self) -> Result<ModelKind, CliError> {
        let name = self.model.as_deref().unwrap_or("a-vector");
        ModelKind::from_name(name).ok_or_else(|| {
            let all: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Usage(format!("unknown model `{name}` (expected one of {})", all.join(", ")))
        })
    }

    /// Fill the model name, rank, family and the couplings the model uses.
    pub fn resolve(&mut self, model: &str, rank: usize) -> Result<(), CliError> {
        self.model.get_or_insert_with(|| model.into());
        self.rank.get_or_insert(rank);
        let kind = self.kind()?;
        if matches!(kind, ModelKind::SimplyLacedRoot | ModelKind::SpinSimplyLaced) {
            self.family.get_or_insert_with(|| "A".into());
        }
        for &name in coupling_names(kind) {
            let default = COUPLING_DEFAULTS.iter().find(|(n, _)| *n == name).map_or(1.0, |d| d.1);
            let slot = self.slot(name);
            let value = match slot.as_deref() {
                Some(s) => parse_complex(s).map_err(CliError::Usage)?,
                None => C64::new(default, 0.0),
            };
            *slot = Some(format_complex(value));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let kind = self.kind()?;
        let mut couplings = std::collections::BTreeMap::new();
        for &name in coupling_names(kind) {
            let text = self.get(name).ok_or_else(|| CliError::Usage(format!("missing coupling --{name}")))?;
            let z = parse_complex(text).map_err(CliError::Usage)?;
            couplings.insert(file_key(name).to_string(), [z.re, z.im]);
        }
        let file = ModelFile { kind: kind.name().into(), rank: self.rank.unwrap_or(2), family: self.family.clone(), couplings };
        file.build().map_err(CliError::Usage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Isospectral,
    Isomonodromic,
    Both,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct IdentitiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Modulus, e.g. 0+1i.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Random points per identity.
    #[arg(long)]
    pub points: Option<usize>,
    /// Bound on the relative residual of each identity.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Minimum distance of every argument combination from the half-period lattice.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Random points per heat-equation kernel.
    #[arg(long)]
    pub heat_points: Option<usize>,
    #[arg(long)]
    pub heat_tolerance: Option<f64>,
    /// Finite-difference step of the heat-equation check.
    #[arg(long)]
    pub heat_step: Option<f64>,
    /// Print the identity registry and exit.
    #[arg(long)]
    #[serde(default)]
    pub list: bool,
}

impl IdentitiesArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        resolve_complex(&mut self.tau, "0+1i")?;
        self.points.get_or_insert(100);
        self.tolerance.get_or_insert(1e-10);
        self.gap.get_or_insert(0.02);
        self.heat_points.get_or_insert(50);
        self.heat_tolerance.get_or_insert(1e-7);
        self.heat_step.get_or_insert(1e-5);
        Ok(())
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct LaxCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Model to sweep; every family at rank ≤ 3 when omitted.
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Random (state, z, τ) samples per model.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Bound on translation residuals relative to the size of L and M at z and z+τ.
    #[arg(long)]
    pub translation_tolerance: Option<f64>,
    /// Minimum distance of states and spectral parameters from poles.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Step of the finite-difference stencils.
    #[arg(long)]
    pub step: Option<f64>,
}

impl LaxCheckArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        if self.model.model.is_some() {
            self.model.resolve("a-vector", 2)?;
        }
        self.mode.get_or_insert(Mode::Both);
        self.samples.get_or_insert(20);
        self.tolerance.get_or_insert(1e-6);
        self.translation_tolerance.get_or_insert(1e-10);
        self.gap.get_or_insert(0.1);
        self.step.get_or_insert(1e-4);
        Ok(())
    }
}

/// Options of the adaptive integrator.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct OdeArgs {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
}

impl OdeArgs {
    fn resolve(&mut self) {
        let d = isomon_core::dynamics::OdeOptions::default();
        self.rel_tol.get_or_insert(d.rel_tol);
        self.abs_tol.get_or_insert(d.abs_tol);
    }

    pub fn options(&self) -> isomon_core::dynamics::OdeOptions {
        let mut o = isomon_core::dynamics::OdeOptions::default();
        o.rel_tol = self.rel_tol.unwrap_or(o.rel_tol);
        o.abs_tol = self.abs_tol.unwrap_or(o.abs_tol);
        o
    }
}

/// Initial state: a JSON file, or a seeded random state.
#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct StateArgs {
    /// JSON state file `{q, p, F?, F_roots?}`.
    #[arg(long, value_name = "FILE")]
    pub state: Option<PathBuf>,
    /// Minimum pole distance of a random initial state.
    #[arg(long)]
    pub state_gap: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct EvolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub initial: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub ode: OdeArgs,
    /// isospectral (time flow) or isomonodromic (modulus flow).
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Complex time range of the isospectral flow, e.g. 0..1.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Fixed modulus of the isospectral flow.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Modulus polyline of the isomonodromic flow, e.g. i:0.05+1.1i.
    #[arg(long, allow_hyphen_values = true)]
    pub tau_path: Option<String>,
    /// Evenly spaced samples, endpoints included.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Spectral parameter of the trace and eigenvalue monitors.
    #[arg(long, allow_hyphen_values = true)]
    pub probe: Option<String>,
    /// Bound on Hamiltonian and trace drifts.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Bound on the eigenvalue drift of L at the probe.
    #[arg(long)]
    pub eigen_tolerance: Option<f64>,
    /// Integration stops when a pole argument comes this close to its lattice.
    #[arg(long)]
    pub collision_guard: Option<f64>,
}

impl EvolveArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        self.model.resolve("a-vector", 2)?;
        self.initial.state_gap.get_or_insert(0.15);
        self.ode.resolve();
        let mode = *self.mode.get_or_insert(Mode::Isospectral);
        match mode {
            Mode::Isospectral => {
                let t = self.t.get_or_insert_with(|| "0..1".into());
                crate::literal::parse_range(t).map_err(CliError::Usage)?;
                resolve_complex(&mut self.tau, "0+1i")?;
            }
            Mode::Isomonodromic => {
                let p = self.tau_path.get_or_insert_with(|| DEFAULT_TAU_PATH.into());
                crate::literal::parse_polyline(p).map_err(CliError::Usage)?;
            }
            Mode::Both => return Err(CliError::Usage("evolve runs one flow: isospectral or isomonodromic".into())),
        }
        self.samples.get_or_insert(11);
        resolve_complex(&mut self.probe, DEFAULT_Z0)?;
        self.tolerance.get_or_insert(1e-8);
        self.eigen_tolerance.get_or_insert(1e-7);
        self.collision_guard.get_or_insert(1e-4);
        Ok(())
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct MonodromyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub initial: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub ode: OdeArgs,
    /// Modulus polyline, e.g. i:0.05+1.1i.
    #[arg(long, allow_hyphen_values = true)]
    pub tau_path: Option<String>,
    /// Base point; its lattice coordinates are kept along the path.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<String>,
    /// Monodromy evaluations along the path, endpoints included.
    #[arg(long)]
    pub checkpoints: Option<usize>,
    /// Radius of the loops around singular points.
    #[arg(long)]
    pub loop_r: Option<f64>,
    /// Minimum distance of every contour from the singular points.
    #[arg(long)]
    pub clearance: Option<f64>,
    /// Bound on the drift of every spectral invariant.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also run the isospectral flow along the same path, which must drift.
    #[arg(long)]
    #[serde(default)]
    pub control: bool,
    /// Minimum drift the control has to show.
    #[arg(long)]
    pub control_threshold: Option<f64>,
}

impl MonodromyArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        self.model.resolve("a-vector", 2)?;
        self.initial.state_gap.get_or_insert(0.15);
        self.ode.resolve();
        let p = self.tau_path.get_or_insert_with(|| DEFAULT_TAU_PATH.into());
        crate::literal::parse_polyline(p).map_err(CliError::Usage)?;
        resolve_complex(&mut self.z0, DEFAULT_Z0)?;
        self.checkpoints.get_or_insert(5);
        let d = isomon_core::monodromy::MonodromyConfig::default();
        self.loop_r.get_or_insert(d.loop_r);
        self.clearance.get_or_insert(d.clearance);
        self.tolerance.get_or_insert(1e-5);
        self.control_threshold.get_or_insert(1e-3);
        Ok(())
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct CouplingsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

impl CouplingsArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        self.model.resolve("twisted-bc", 2)
    }
}

#[derive(Args, Serialize, Deserialize, Clone, Debug, Default, PartialEq)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Random points per identity and modulus.
    #[arg(long)]
    pub points: Option<usize>,
    /// Random samples per model in the Lax sweeps.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Monodromy evaluations along each modulus path.
    #[arg(long)]
    pub checkpoints: Option<usize>,
}

impl ReportArgs {
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.common.resolve(7);
        self.points.get_or_insert(100);
        self.samples.get_or_insert(20);
        self.checkpoints.get_or_insert(5);
        Ok(())
    }
}

fn resolve_complex(slot: &mut Option<String>, default: &str) -> Result<C64, CliError> {
    let z = parse_complex(slot.as_deref().unwrap_or(default)).map_err(CliError::Usage)?;
    *slot = Some(format_complex(z));
    Ok(z)
}

pub fn complex(slot: &Option<String>) -> C64 {
    slot.as_deref().and_then(|s| parse_complex(s).ok()).unwrap_or_default()
}

/// Lay the flags over the config file: options left unset on the command
/// line take the file's values. Keys the command does not know are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = file else {
        return serde_json::from_value(to_value(flags)?).map_err(|e| CliError::Usage(e.to_string()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let Value::Object(mut base) = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    else {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    };
    let Value::Object(over) = to_value(flags)? else { unreachable!("argument structs serialize to objects") };
    if let Some(k) = base.keys().find(|k| !over.contains_key(*k)) {
        return Err(CliError::Usage(format!("{}: unknown option `{k}`", path.display())));
    }
    for (k, v) in over {
        if !(v.is_null() || v == Value::Bool(false)) {
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Usage(e.to_string()))
}
