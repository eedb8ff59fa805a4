//! Adaptive integration of the isospectral (time) and isomonodromic
//! (modulus) flows along complex paths, with monitors of conserved
//! quantities.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Float, Zero};

use crate::elliptic::EllipticContext;
use crate::linalg::{multiset_distance, Matrix};
use crate::models::{Flow, ModelSpec, PhaseState};
use crate::{Error, Result, C64};

/// A piecewise-linear complex path, parametrized by arclength fraction
/// `s ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum PathSpec {
    Line { start: C64, end: C64 },
    Polyline(Vec<C64>),
}

impl PathSpec {
    pub fn vertices(&self) -> Vec<C64> {
        match self {
            PathSpec::Line { start, end } => vec![*start, *end],
            PathSpec::Polyline(p) => p.clone(),
        }
    }

    fn checked(&self) -> Result<(Vec<C64>, Vec<f64>)> {
        let v = self.vertices();
        if v.len() < 2 {
            return Err(Error::Path("a path needs at least two points".into()));
        }
        if v.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut cum = vec![0.0];
        for w in v.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *cum.last().unwrap();
        if total == 0.0 {
            return Err(Error::Path("path has zero length".into()));
        }
        Ok((v, cum.iter().map(|c| c / total).collect()))
    }

    /// Parameter values of the vertices.
    pub fn breakpoints(&self) -> Result<Vec<f64>> {
        Ok(self.checked()?.1)
    }

    pub fn length(&self) -> f64 {
        self.vertices().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    fn segment(&self, s: f64) -> Result<(C64, C64)> {
        let (v, b) = self.checked()?;
        let s = s.clamp(0.0, 1.0);
        let mut k = b.partition_point(|&x| x <= s).saturating_sub(1);
        k = k.min(v.len() - 2);
        while k + 1 < b.len() - 1 && b[k + 1] - b[k] == 0.0 {
            k += 1;
        }
        let ds = b[k + 1] - b[k];
        let slope = (v[k + 1] - v[k]) / ds;
        Ok((v[k] + slope * (s - b[k]), slope))
    }

    pub fn point(&self, s: f64) -> Result<C64> {
        Ok(self.segment(s)?.0)
    }

    /// `d(point)/ds` on the segment containing `s`.
    pub fn derivative(&self, s: f64) -> Result<C64> {
        Ok(self.segment(s)?.1)
    }

    pub fn reversed(&self) -> PathSpec {
        let mut v = self.vertices();
        v.reverse();
        PathSpec::Polyline(v)
    }

    /// A modulus path must stay in the upper half plane; segments are convex,
    /// so checking the vertices suffices.
    pub fn validate_modulus(&self) -> Result<()> {
        let (v, _) = self.checked()?;
        if let Some(p) = v.iter().find(|p| p.im <= 0.0) {
            return Err(Error::Path(format!("modulus path leaves the upper half plane at {p}")));
        }
        Ok(())
    }
}

/// Tolerances of the embedded Runge–Kutta pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rel_tol: 1e-11, abs_tol: 1e-13, initial_step: 1e-3, min_step: 1e-14, max_steps: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejections: usize,
    pub evaluations: usize,
    /// Largest accepted error estimate, in units of the tolerance.
    pub max_error: f64,
}

impl OdeStats {
    pub fn merge(&mut self, o: &OdeStats) {
        self.steps += o.steps;
        self.rejections += o.rejections;
        self.evaluations += o.evaluations;
        self.max_error = self.max_error.max(o.max_error);
    }
}

/// An accepted step with end values and slopes, for dense output.
pub struct Step<'a> {
    pub s0: f64,
    pub s1: f64,
    pub y0: &'a [C64],
    pub y1: &'a [C64],
    pub f0: &'a [C64],
    pub f1: &'a [C64],
}

impl Step<'_> {
    /// Cubic Hermite interpolant at `s ∈ [s0, s1]`.
    pub fn interpolate(&self, s: f64) -> Vec<C64> {
        let h = self.s1 - self.s0;
        let t = (s - self.s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (0..self.y0.len())
            .map(|i| self.y0[i] * h00 + self.f0[i] * (h10 * h) + self.y1[i] * h01 + self.f1[i] * (h11 * h))
            .collect()
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth minus fourth order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Dormand–Prince 5(4) on `[s0, s1]` for a complex system `y′ = f(s, y)`.
/// `on_step` sees every accepted step and may abort. Returns the end value
/// and the last step size.
pub fn solve<F, G>(
    mut f: F,
    s0: f64,
    s1: f64,
    y0: Vec<C64>,
    opts: &OdeOptions,
    h_init: f64,
    mut on_step: G,
    stats: &mut OdeStats,
) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    G: FnMut(&Step) -> Result<()>,
{
    let n = y0.len();
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let span = (s1 - s0).abs();
    if span == 0.0 {
        return Ok((y0, h_init));
    }
    let mut s = s0;
    let mut y = y0;
    let mut fy = f(s, &y)?;
    stats.evaluations += 1;
    let mut h = h_init.abs().min(span).max(opts.min_step);
    let mut k: [Vec<C64>; 7] = Default::default();
    let mut count = 0usize;
    loop {
        let remaining = (s1 - s) * dir;
        if remaining <= span * 1e-15 {
            return Ok((y, h));
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let step = hs * dir;
        k[0] = fy.clone();
        let mut stage_err = None;
        for i in 1..7 {
            let yi: Vec<C64> =
                (0..n).map(|m| y[m] + (0..i).map(|j| k[j][m] * A[i][j]).sum::<C64>() * step).collect();
            match f(s + C[i] * step, &yi) {
                Ok(v) => k[i] = v,
                Err(e) => {
                    stage_err = Some(e);
                    break;
                }
            }
            stats.evaluations += 1;
        }
        if let Some(e) = stage_err {
            // a stage landed on a singularity: retry smaller, give up at the floor
            if hs <= opts.min_step {
                return Err(e);
            }
            h = hs * 0.25;
            stats.rejections += 1;
            continue;
        }
        let y_new: Vec<C64> =
            (0..n).map(|m| y[m] + (0..6).map(|j| k[j][m] * A[6][j]).sum::<C64>() * step).collect();
        let mut err: f64 = 0.0;
        for m in 0..n {
            let e = (0..7).map(|j| k[j][m] * E[j]).sum::<C64>() * step;
            let sc = opts.abs_tol + opts.rel_tol * y[m].norm().max(y_new[m].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            let s_new = if last { s1 } else { s + step };
            count += 1;
            stats.steps += 1;
            stats.max_error = stats.max_error.max(err);
            on_step(&Step { s0: s, s1: s_new, y0: &y, y1: &y_new, f0: &k[0], f1: &k[6] })?;
            s = s_new;
            y = y_new;
            fy = k[6].clone();
            let grow = if err == 0.0 { 5.0 } else { (0.9 * Float::powf(err, -0.2)).clamp(0.2, 5.0) };
            if !last {
                h = hs * grow;
            } else {
                h = h.max(hs);
            }
            if count >= opts.max_steps {
                return Err(Error::StepUnderflow { s });
            }
        } else {
            stats.rejections += 1;
            h = hs * (0.9 * Float::powf(err, -0.2)).clamp(0.1, 0.9);
            if h < opts.min_step {
                return Err(Error::StepUnderflow { s });
            }
        }
    }
}

/// Settings for [`integrate`].
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub ode: OdeOptions,
    /// Number of evenly spaced samples in `s`, endpoints included.
    pub n_samples: usize,
    /// Integration stops when some `α·q` comes this close to a pole.
    pub collision_guard: f64,
    /// Modulus for flows whose path is the time variable.
    pub tau: C64,
    /// Spectral parameters and powers `(z*, k)` whose traces are monitored.
    pub probes: Vec<(C64, u32)>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            ode: OdeOptions::default(),
            n_samples: 11,
            collision_guard: 1e-4,
            tau: C64::new(0.0, 1.0),
            probes: Vec::new(),
        }
    }
}

/// What the integration path parametrizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathRole {
    /// Complex time at fixed modulus.
    Time,
    /// The modulus τ itself; all elliptic functions follow the path.
    Modulus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub s: f64,
    /// Path value: time or modulus.
    pub time: C64,
    pub state: PhaseState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monitor {
    pub hamiltonian: C64,
    /// `Tr L(z*)^k` per configured probe.
    pub traces: Vec<C64>,
    pub spin_diagonal: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub flow: Flow,
    pub role: PathRole,
    pub path: PathSpec,
    /// Modulus used for time paths.
    pub tau: C64,
    pub samples: Vec<Sample>,
    pub monitors: Vec<Monitor>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        &self.samples.last().unwrap().state
    }

    /// Modulus at a sample.
    pub fn modulus_at(&self, i: usize) -> C64 {
        match self.role {
            PathRole::Time => self.tau,
            PathRole::Modulus => self.samples[i].time,
        }
    }
}

fn ctx_for(tau: C64) -> Result<EllipticContext> {
    EllipticContext::new(tau)
}

fn trace_power(l: &Matrix, k: u32) -> C64 {
    l.pow(k).trace()
}

/// Integrate a flow along a path. Isomonodromic flows take the path as the
/// modulus; isospectral flows take it as time at modulus `cfg.tau`.
pub fn integrate(
    model: &ModelSpec,
    state0: &PhaseState,
    path: &PathSpec,
    flow: Flow,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let role = match flow {
        Flow::Isospectral => PathRole::Time,
        Flow::Isomonodromic => PathRole::Modulus,
    };
    integrate_with_role(model, state0, path, flow, role, cfg)
}

/// General form of [`integrate`]: any flow along a time or a modulus path.
/// With [`PathRole::Modulus`] the state moves by the chosen vector field
/// times `dτ/ds` while every elliptic function is evaluated at `τ(s)`.
pub fn integrate_with_role(
    model: &ModelSpec,
    state0: &PhaseState,
    path: &PathSpec,
    flow: Flow,
    role: PathRole,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    model.validate(state0)?;
    if role == PathRole::Modulus {
        path.validate_modulus()?;
    } else {
        ctx_for(cfg.tau)?;
    }
    if cfg.n_samples < 2 {
        return Err(Error::Path("at least two samples are required".into()));
    }
    let modulus = |s: f64| -> Result<C64> {
        match role {
            PathRole::Time => Ok(cfg.tau),
            PathRole::Modulus => path.point(s),
        }
    };
    let tau0 = modulus(0.0)?;
    if model.collision_distance(state0, tau0) < cfg.collision_guard {
        return Err(Error::Collision { s: 0.0, last: Box::new(state0.clone()) });
    }
    let fixed_ctx = match role {
        PathRole::Time => Some(ctx_for(cfg.tau)?),
        PathRole::Modulus => None,
    };
    // `mid` picks the segment, so the slope stays right at its endpoints
    let rhs = |s: f64, mid: f64, y: &[C64]| -> Result<Vec<C64>> {
        let st = state0.unflatten(y);
        let d = path.derivative(mid)?;
        let v = match &fixed_ctx {
            Some(ctx) => model.eom(&st, ctx, flow)?,
            None => model.eom(&st, &ctx_for(path.point(s)?)?, flow)?,
        };
        Ok(v.flatten().into_iter().map(|x| x * d).collect())
    };
    let grid: Vec<f64> = (0..cfg.n_samples).map(|i| i as f64 / (cfg.n_samples - 1) as f64).collect();
    // steps end exactly on every sample and every path vertex
    let mut cuts: Vec<f64> = grid.iter().copied().chain(path.breakpoints()?).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut samples = vec![Sample { s: 0.0, time: path.point(0.0)?, state: state0.clone() }];
    let mut stats = OdeStats::default();
    let mut y = state0.flatten();
    let mut h = cfg.ode.initial_step;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let rhs_seg = |s: f64, y: &[C64]| -> Result<Vec<C64>> {
            let st = state0.unflatten(y);
            if !st.is_finite() || model.collision_distance(&st, modulus(s)?) < cfg.collision_guard {
                return Err(Error::Collision { s, last: Box::new(st) });
            }
            rhs(s, mid, y)
        };
        let mut last_good = (w[0], y.clone());
        let res = solve(
            rhs_seg,
            w[0],
            w[1],
            y,
            &cfg.ode,
            h,
            |st: &Step| {
                last_good = (st.s1, st.y1.to_vec());
                Ok(())
            },
            &mut stats,
        );
        match res {
            Ok((yn, hn)) => {
                y = yn;
                h = hn;
            }
            Err(Error::Pole { .. } | Error::Singular { .. } | Error::Collision { .. } | Error::StepUnderflow { .. }) => {
                let last = state0.unflatten(&last_good.1);
                let near = model.collision_distance(&last, modulus(last_good.0)?) < 10.0 * cfg.collision_guard;
                if near || !last.is_finite() {
                    return Err(Error::Collision { s: last_good.0, last: Box::new(last) });
                }
                return Err(Error::StepUnderflow { s: last_good.0 });
            }
            Err(e) => return Err(e),
        }
        if grid.iter().any(|g| (g - w[1]).abs() < 1e-12) {
            samples.push(Sample { s: w[1], time: path.point(w[1])?, state: state0.unflatten(&y) });
        }
    }
    let mut monitors = Vec::with_capacity(samples.len());
    for smp in &samples {
        let ctx = ctx_for(modulus(smp.s)?)?;
        let traces = cfg
            .probes
            .iter()
            .map(|&(z, k)| Ok(trace_power(&model.lax(&smp.state, z, &ctx)?.l, k)))
            .collect::<Result<Vec<_>>>()?;
        monitors.push(Monitor {
            hamiltonian: model.hamiltonian(&smp.state, &ctx)?,
            traces,
            spin_diagonal: smp.state.spin_diagonal_norm(),
        });
    }
    Ok(Trajectory { flow, role, path: path.clone(), tau: cfg.tau, samples, monitors, stats })
}

/// `|a − b| / max(1, |b|)`.
pub fn relative_drift(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeDrift {
    pub z: C64,
    pub k: u32,
    pub max_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenDrift {
    pub z: C64,
    pub max_drift: f64,
}

/// Drift of conserved quantities along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedReport {
    pub flow: Flow,
    /// Conservation is expected only for time flows at fixed modulus.
    pub conservation_expected: bool,
    pub hamiltonian_drift: f64,
    pub traces: Vec<ProbeDrift>,
    pub eigenvalues: Vec<EigenDrift>,
    pub max_spin_diagonal: f64,
}

/// Max relative drift of `H` and of each `Tr L(z*)^k`, and the drift of the
/// spectrum of `L(z*)` as a multiset, along a trajectory.
pub fn conserved_report(traj: &Trajectory, model: &ModelSpec, probes: &[(C64, u32)]) -> Result<ConservedReport> {
    let ctxs =
        (0..traj.samples.len()).map(|i| ctx_for(traj.modulus_at(i))).collect::<Result<Vec<EllipticContext>>>()?;
    let hs = traj
        .samples
        .iter()
        .zip(&ctxs)
        .map(|(s, c)| model.hamiltonian(&s.state, c))
        .collect::<Result<Vec<_>>>()?;
    let hamiltonian_drift = hs.iter().map(|h| relative_drift(*h, hs[0])).fold(0.0, f64::max);
    let mut zs: Vec<C64> = Vec::new();
    for &(z, _) in probes {
        if !zs.contains(&z) {
            zs.push(z);
        }
    }
    let mut ls: Vec<Vec<Matrix>> = Vec::new();
    for &z in &zs {
        ls.push(
            traj.samples
                .iter()
                .zip(&ctxs)
                .map(|(s, c)| Ok(model.lax(&s.state, z, c)?.l))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let traces = probes
        .iter()
        .map(|&(z, k)| {
            let li = &ls[zs.iter().position(|w| *w == z).unwrap()];
            let t: Vec<C64> = li.iter().map(|l| trace_power(l, k)).collect();
            ProbeDrift { z, k, max_drift: t.iter().map(|v| relative_drift(*v, t[0])).fold(0.0, f64::max) }
        })
        .collect();
    let mut eigenvalues = Vec::new();
    for (z, li) in zs.iter().zip(&ls) {
        let ev0 = li[0].eigenvalues()?;
        let scale = ev0.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let mut worst: f64 = 0.0;
        for l in &li[1..] {
            worst = worst.max(multiset_distance(&l.eigenvalues()?, &ev0) / scale);
        }
        eigenvalues.push(EigenDrift { z: *z, max_drift: worst });
    }
    Ok(ConservedReport {
        flow: traj.flow,
        conservation_expected: traj.flow == Flow::Isospectral && traj.role == PathRole::Time,
        hamiltonian_drift,
        traces,
        eigenvalues,
        max_spin_diagonal: traj.samples.iter().map(|s| s.state.spin_diagonal_norm()).fold(0.0, f64::max),
    })
}

impl ConservedReport {
    /// Largest drift among `H` and all probe traces.
    pub fn max_trace_drift(&self) -> f64 {
        self.traces.iter().map(|t| t.max_drift).fold(self.hamiltonian_drift, f64::max)
    }

    pub fn max_eigen_drift(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.max_drift).fold(0.0, f64::max)
    }
}

/// Fixed-modulus Hamiltonian flow from `t = 0` to `t = t_end` along a
/// straight line.
pub fn evolve_time(
    model: &ModelSpec,
    state0: &PhaseState,
    t_end: C64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate(model, state0, &PathSpec::Line { start: C64::zero(), end: t_end }, Flow::Isospectral, cfg)
}
