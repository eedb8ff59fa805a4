//! JSON and CSV shapes of models, states, root systems, trajectories and
//! monodromy data. Complex numbers are `[re, im]` pairs and matrices are
//! arrays of rows.

use std::collections::BTreeMap;

use isomon_core::dynamics::{ConservedReport, Trajectory};
use isomon_core::linalg::Matrix;
use isomon_core::models::{Couplings, ModelKind, ModelSpec, PhaseState, Renormalized, Spin};
use isomon_core::monodromy::{DetectedPole, DriftReport, MonodromyData, SpectralInvariants};
use isomon_core::rootsys::{build_root_system, Family, Orbit, RootSystem};
use isomon_core::C64;
use serde::{Deserialize, Serialize};

pub type Pair = [f64; 2];

pub fn pair(z: C64) -> Pair {
    [z.re, z.im]
}

pub fn unpair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

/// Shortest round-trip decimal; exponent form for tiny or huge magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().copied().map(pair).collect()
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<Pair>> {
    (0..m.dim()).map(|i| pairs(m.row(i))).collect()
}

pub fn parse_family(s: &str) -> Result<Family, String> {
    [Family::A, Family::D, Family::E6, Family::E7, Family::E8, Family::BC]
        .into_iter()
        .find(|f| f.to_string().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown root system family `{s}` (A, D, E6, E7, E8, BC)"))
}

/// `{kind, rank, family?, couplings{...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default)]
    pub couplings: BTreeMap<String, Pair>,
}

impl ModelFile {
    pub fn of(m: &ModelSpec) -> ModelFile {
        let mut couplings = BTreeMap::new();
        match *m.couplings() {
            Couplings::Single { g } => {
                couplings.insert("g".into(), pair(g));
            }
            Couplings::Bc { g_m, g_l, g_s } => {
                couplings.insert("g_m".into(), pair(g_m));
                couplings.insert("g_l".into(), pair(g_l));
                couplings.insert("g_s".into(), pair(g_s));
            }
            Couplings::Twisted { g_m, g_l1, g_l2, g_s1, g_s2 } => {
                for (k, v) in [("g_m", g_m), ("g_l1", g_l1), ("g_l2", g_l2), ("g_s1", g_s1), ("g_s2", g_s2)] {
                    couplings.insert(k.into(), pair(v));
                }
            }
            Couplings::Spin => {}
        }
        let family = match m.kind() {
            ModelKind::SimplyLacedRoot | ModelKind::SpinSimplyLaced => m.root_system().map(|r| r.family().to_string()),
            _ => None,
        };
        ModelFile { kind: m.kind().name().into(), rank: m.rank(), family, couplings }
    }

    pub fn build(&self) -> Result<ModelSpec, String> {
        let kind = ModelKind::from_name(&self.kind).ok_or_else(|| format!("unknown model `{}`", self.kind))?;
        let get = |k: &str| -> Result<C64, String> {
            self.couplings.get(k).copied().map(unpair).ok_or_else(|| format!("{} needs coupling `{k}`", self.kind))
        };
        let family = || -> Result<Family, String> { self.family.as_deref().map(parse_family).unwrap_or(Ok(Family::A)) };
        let rs = || -> Result<RootSystem, String> { build_root_system(family()?, self.rank).map_err(|e| e.to_string()) };
        let m = match kind {
            ModelKind::AVector => ModelSpec::a_vector(self.rank, get("g")?),
            ModelKind::SimplyLacedRoot => ModelSpec::simply_laced(rs()?, get("g")?),
            ModelKind::BcShort => ModelSpec::bc_short(self.rank, get("g_m")?, get("g_l")?, get("g_s")?),
            ModelKind::TwistedBcShort => {
                ModelSpec::twisted_bc(self.rank, get("g_m")?, get("g_l1")?, get("g_l2")?, get("g_s1")?, get("g_s2")?)
            }
            ModelKind::SpinSl => ModelSpec::spin_sl(self.rank),
            ModelKind::SpinSimplyLaced => ModelSpec::spin_simply_laced(rs()?),
        };
        m.map_err(|e| e.to_string())
    }
}

/// `{q[], p[], F[][]?, F_roots[]?}`; `F_roots` follows the sorted root order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub q: Vec<Pair>,
    pub p: Vec<Pair>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Vec<Pair>>>,
    #[serde(rename = "F_roots", default, skip_serializing_if = "Option::is_none")]
    pub f_roots: Option<Vec<Pair>>,
}

impl StateFile {
    pub fn of(s: &PhaseState) -> StateFile {
        let (f, f_roots) = match &s.spin {
            Spin::None => (None, None),
            Spin::Matrix(m) => (Some(matrix_rows(m)), None),
            Spin::Roots(v) => (None, Some(pairs(v))),
        };
        StateFile { q: pairs(&s.q), p: pairs(&s.p), f, f_roots }
    }

    pub fn build(&self) -> Result<PhaseState, String> {
        let q: Vec<C64> = self.q.iter().copied().map(unpair).collect();
        let p: Vec<C64> = self.p.iter().copied().map(unpair).collect();
        let s = match (&self.f, &self.f_roots) {
            (None, None) => PhaseState::new(q, p),
            (Some(rows), None) => {
                let flat: Vec<C64> = rows.iter().flatten().copied().map(unpair).collect();
                if rows.iter().any(|r| r.len() != rows.len()) {
                    return Err("F must be square".into());
                }
                PhaseState::with_spin_matrix(q, p, Matrix::from_row_major(flat).map_err(|e| e.to_string())?)
            }
            (None, Some(v)) => PhaseState::with_spin_roots(q, p, v.iter().copied().map(unpair).collect()),
            _ => return Err("give either F or F_roots".into()),
        };
        s.map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSystemFile {
    pub family: String,
    pub rank: usize,
    pub dim: usize,
    pub roots: Vec<Vec<String>>,
    pub orbits: Vec<String>,
    pub simple_roots: Vec<Vec<String>>,
}

impl RootSystemFile {
    pub fn of(rs: &RootSystem) -> RootSystemFile {
        let orbit = |o: Orbit| match o {
            Orbit::Long => "long",
            Orbit::Middle => "middle",
            Orbit::Short => "short",
            Orbit::Single => "single",
        };
        RootSystemFile {
            family: rs.family().to_string(),
            rank: rs.rank(),
            dim: rs.dim(),
            roots: rs.roots().iter().map(|r| r.to_rational_strings()).collect(),
            orbits: (0..rs.roots().len()).map(|i| orbit(rs.orbit_of(i)).to_string()).collect(),
            simple_roots: rs.simple_roots().iter().map(|r| r.to_rational_strings()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormalizedFile {
    pub kind: &'static str,
    pub values: BTreeMap<&'static str, Pair>,
}

impl RenormalizedFile {
    pub fn of(r: &Renormalized) -> RenormalizedFile {
        let mut values = BTreeMap::new();
        let kind = match *r {
            Renormalized::Unchanged => "unchanged",
            Renormalized::Bc { gs_sq } => {
                values.insert("gs_sq", pair(gs_sq));
                "bc"
            }
            Renormalized::Twisted { gl2_sq, gs1_sq, gs2_sq } => {
                values.insert("gl2_sq", pair(gl2_sq));
                values.insert("gs1_sq", pair(gs1_sq));
                values.insert("gs2_sq", pair(gs2_sq));
                "twisted"
            }
        };
        RenormalizedFile { kind, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRow {
    pub s: f64,
    pub time: Pair,
    pub modulus: Pair,
    pub state: StateFile,
    pub hamiltonian: Pair,
    pub traces: Vec<Pair>,
    pub spin_diagonal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryFile {
    pub flow: String,
    pub role: String,
    pub path: Vec<Pair>,
    pub samples: Vec<MonitorRow>,
    pub steps: usize,
    pub rejections: usize,
    pub evaluations: usize,
    pub max_error_estimate: f64,
}

pub fn flow_name(f: isomon_core::models::Flow) -> &'static str {
    match f {
        isomon_core::models::Flow::Isospectral => "isospectral",
        isomon_core::models::Flow::Isomonodromic => "isomonodromic",
    }
}

impl TrajectoryFile {
    pub fn of(t: &Trajectory) -> TrajectoryFile {
        let samples = t
            .samples
            .iter()
            .zip(&t.monitors)
            .enumerate()
            .map(|(i, (s, m))| MonitorRow {
                s: s.s,
                time: pair(s.time),
                modulus: pair(t.modulus_at(i)),
                state: StateFile::of(&s.state),
                hamiltonian: pair(m.hamiltonian),
                traces: pairs(&m.traces),
                spin_diagonal: m.spin_diagonal,
            })
            .collect();
        TrajectoryFile {
            flow: flow_name(t.flow).into(),
            role: format!("{:?}", t.role).to_lowercase(),
            path: pairs(&t.path.vertices()),
            samples,
            steps: t.stats.steps,
            rejections: t.stats.rejections,
            evaluations: t.stats.evaluations,
            max_error_estimate: t.stats.max_error,
        }
    }

    /// One CSV row per sample: `s`, time, modulus, coordinates, monitors.
    pub fn write_csv<W: std::io::Write>(t: &Trajectory, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let Some(first) = t.samples.first() else { return out.flush().map_err(Into::into) };
        let n = first.state.q.len();
        let spin_len = first.state.flatten().len() - 2 * n;
        let traces = t.monitors.first().map_or(0, |m| m.traces.len());
        let mut head: Vec<String> = ["s", "time_re", "time_im", "tau_re", "tau_im"].map(String::from).to_vec();
        for j in 0..n {
            head.push(format!("q{j}_re"));
            head.push(format!("q{j}_im"));
        }
        for j in 0..n {
            head.push(format!("p{j}_re"));
            head.push(format!("p{j}_im"));
        }
        for j in 0..spin_len {
            head.push(format!("f{j}_re"));
            head.push(format!("f{j}_im"));
        }
        head.extend(["h_re", "h_im"].map(String::from));
        for k in 0..traces {
            head.push(format!("trace{k}_re"));
            head.push(format!("trace{k}_im"));
        }
        head.push("spin_diagonal".into());
        out.write_record(&head)?;
        for (i, (s, m)) in t.samples.iter().zip(&t.monitors).enumerate() {
            let mut row = vec![num(s.s)];
            let mut push = |z: C64| {
                row.push(num(z.re));
                row.push(num(z.im));
            };
            push(s.time);
            push(t.modulus_at(i));
            for v in s.state.flatten() {
                push(v);
            }
            push(m.hamiltonian);
            for v in &m.traces {
                push(*v);
            }
            row.push(num(m.spin_diagonal));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservedFile {
    pub flow: String,
    pub conservation_expected: bool,
    pub hamiltonian_drift: f64,
    pub traces: Vec<ProbeFile>,
    pub eigenvalue_drift: Vec<EigenFile>,
    pub max_spin_diagonal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeFile {
    pub z: Pair,
    pub power: u32,
    pub max_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenFile {
    pub z: Pair,
    pub max_drift: f64,
}

impl ConservedFile {
    pub fn of(r: &ConservedReport) -> ConservedFile {
        ConservedFile {
            flow: flow_name(r.flow).into(),
            conservation_expected: r.conservation_expected,
            hamiltonian_drift: r.hamiltonian_drift,
            traces: r.traces.iter().map(|t| ProbeFile { z: pair(t.z), power: t.k, max_drift: t.max_drift }).collect(),
            eigenvalue_drift: r.eigenvalues.iter().map(|e| EigenFile { z: pair(e.z), max_drift: e.max_drift }).collect(),
            max_spin_diagonal: r.max_spin_diagonal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonodromyFile {
    pub z0: Pair,
    pub tau: Pair,
    pub singular_points: Vec<Pair>,
    pub gamma_local: Vec<Vec<Vec<Pair>>>,
    pub gamma_alpha: Vec<Vec<Pair>>,
    pub gamma_beta: Vec<Vec<Pair>>,
    pub liouville_residual: f64,
    pub invariants: InvariantsFile,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantsFile {
    pub alpha_eigenvalues: Vec<Pair>,
    pub beta_eigenvalues: Vec<Pair>,
    pub product_eigenvalues: Vec<Pair>,
    pub local_eigenvalues: Vec<Vec<Pair>>,
    pub alpha_trace: Pair,
    pub beta_trace: Pair,
    pub product_trace: Pair,
    pub local_traces: Vec<Pair>,
}

impl InvariantsFile {
    pub fn of(s: &SpectralInvariants) -> InvariantsFile {
        InvariantsFile {
            alpha_eigenvalues: pairs(&s.alpha_eigenvalues),
            beta_eigenvalues: pairs(&s.beta_eigenvalues),
            product_eigenvalues: pairs(&s.product_eigenvalues),
            local_eigenvalues: s.local_eigenvalues.iter().map(|v| pairs(v)).collect(),
            alpha_trace: pair(s.alpha_trace),
            beta_trace: pair(s.beta_trace),
            product_trace: pair(s.product_trace),
            local_traces: pairs(&s.local_traces),
        }
    }
}

impl MonodromyFile {
    pub fn of(d: &MonodromyData, inv: &SpectralInvariants) -> MonodromyFile {
        MonodromyFile {
            z0: pair(d.z0),
            tau: pair(d.tau),
            singular_points: pairs(&d.singular_points),
            gamma_local: d.gamma_local.iter().map(matrix_rows).collect(),
            gamma_alpha: matrix_rows(&d.gamma_alpha),
            gamma_beta: matrix_rows(&d.gamma_beta),
            liouville_residual: d.liouville_residual,
            invariants: InvariantsFile::of(inv),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointFile {
    pub s: f64,
    pub tau: Pair,
    pub z0: Pair,
    pub state: StateFile,
    pub liouville_residual: f64,
    pub invariants: InvariantsFile,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftFile {
    pub flow: String,
    pub max_drift: f64,
    pub drifts: BTreeMap<String, f64>,
    pub checkpoints: Vec<CheckpointFile>,
    pub flow_steps: usize,
}

impl DriftFile {
    pub fn of(r: &DriftReport) -> DriftFile {
        DriftFile {
            flow: flow_name(r.flow).into(),
            max_drift: r.max_drift,
            drifts: r.drifts.iter().cloned().collect(),
            checkpoints: r
                .checkpoints
                .iter()
                .map(|c| CheckpointFile {
                    s: c.s,
                    tau: pair(c.tau),
                    z0: pair(c.z0),
                    state: StateFile::of(&c.state),
                    liouville_residual: c.liouville_residual,
                    invariants: InvariantsFile::of(&c.invariants),
                })
                .collect(),
            flow_steps: r.flow_stats.steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleFile {
    pub location: Pair,
    pub residue: f64,
}

pub fn poles(v: &[DetectedPole]) -> Vec<PoleFile> {
    v.iter().map(|p| PoleFile { location: pair(p.location), residue: p.residue }).collect()
}
