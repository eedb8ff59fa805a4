//! Monodromy of the linear problem `dY/dz = L(z) Y` on the torus.
//!
//! Fundamental solutions are normalized to the identity at a base point
//! `z₀` and continued along contours built from straight segments and
//! circular arcs. Segments that pass within the clearance radius of a
//! singular point are deformed by a circular detour that keeps the point on
//! the same side as the straight path; a point lying on the segment itself
//! is passed on the left of the direction of travel.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::ComplexFloat;
use num_traits::{Float, Zero};

use crate::dynamics::{integrate_with_role, solve, IntegratorConfig, OdeOptions, OdeStats, PathRole, PathSpec};
use crate::elliptic::EllipticContext;
use crate::linalg::{multiset_distance_by, Matrix};
use crate::models::{Flow, ModelSpec, PhaseState};
use crate::{Error, Result, C64};

/// One piece of a contour in the spectral plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Line { start: C64, end: C64 },
    /// `center + radius·e^{i(angle + t·sweep)}`, `t ∈ [0, 1]`.
    Arc { center: C64, radius: f64, angle: f64, sweep: f64 },
}

impl Piece {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { start, end } => start + (end - start) * t,
            Piece::Arc { center, radius, angle, sweep } => center + C64::from_polar(radius, angle + t * sweep),
        }
    }

    pub fn derivative(&self, t: f64) -> C64 {
        match *self {
            Piece::Line { start, end } => end - start,
            Piece::Arc { radius, angle, sweep, .. } => {
                C64::new(0.0, sweep) * C64::from_polar(radius, angle + t * sweep)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Line { start, end } => (end - start).norm(),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn reversed(&self) -> Piece {
        match *self {
            Piece::Line { start, end } => Piece::Line { start: end, end: start },
            Piece::Arc { center, radius, angle, sweep } => Piece::Arc { center, radius, angle: angle + sweep, sweep: -sweep },
        }
    }

    /// Distance from `w` to the piece.
    pub fn distance_to(&self, w: C64) -> f64 {
        match *self {
            Piece::Line { start, end } => {
                let d = end - start;
                let len2 = d.norm_sqr();
                let t = if len2 == 0.0 { 0.0 } else { ((w - start) * d.conj()).re / len2 };
                (w - (start + d * t.clamp(0.0, 1.0))).norm()
            }
            Piece::Arc { center, radius, angle, sweep } => {
                let v = w - center;
                let (lo, hi) = if sweep >= 0.0 { (angle, angle + sweep) } else { (angle + sweep, angle) };
                let phi = v.arg();
                let inside = (0..3).any(|k| {
                    let a = phi + 2.0 * PI * (k as f64 - 1.0);
                    (lo..=hi).contains(&a)
                });
                let ends = (w - self.point(0.0)).norm().min((w - self.point(1.0)).norm());
                if inside {
                    (v.norm() - radius).abs().min(ends)
                } else {
                    ends
                }
            }
        }
    }
}

/// Piecewise smooth contour.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Contour {
    pub pieces: Vec<Piece>,
}

impl Contour {
    pub fn line(start: C64, end: C64) -> Contour {
        Contour { pieces: vec![Piece::Line { start, end }] }
    }

    /// Counterclockwise circle starting at `center + radius·e^{i·angle}`.
    pub fn circle(center: C64, radius: f64, angle: f64) -> Contour {
        Contour { pieces: vec![Piece::Arc { center, radius, angle, sweep: 2.0 * PI }] }
    }

    pub fn from_path(path: &PathSpec) -> Contour {
        let v = path.vertices();
        Contour { pieces: v.windows(2).map(|w| Piece::Line { start: w[0], end: w[1] }).collect() }
    }

    pub fn then(mut self, other: Contour) -> Contour {
        self.pieces.extend(other.pieces);
        self
    }

    pub fn reversed(&self) -> Contour {
        Contour { pieces: self.pieces.iter().rev().map(Piece::reversed).collect() }
    }

    pub fn start(&self) -> Option<C64> {
        self.pieces.first().map(|p| p.point(0.0))
    }

    pub fn end(&self) -> Option<C64> {
        self.pieces.last().map(|p| p.point(1.0))
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(Piece::length).sum()
    }

    /// Smallest distance from the contour to any lattice translate of the
    /// given points, with the nearest such translate.
    pub fn clearance(&self, points: &[C64], tau: C64) -> (f64, C64) {
        let mut best = (f64::INFINITY, C64::zero());
        for piece in &self.pieces {
            for w in lattice_translates_near(piece, points, tau) {
                let d = piece.distance_to(w);
                if d < best.0 {
                    best = (d, w);
                }
            }
        }
        best
    }
}

/// Lattice coordinates `(a, b)` with `z = a + b·τ`.
pub fn lattice_coords(z: C64, tau: C64) -> (f64, f64) {
    let b = z.im / tau.im;
    (z.re - b * tau.re, b)
}

fn lattice_translates_near(piece: &Piece, points: &[C64], tau: C64) -> Vec<C64> {
    let probe = [piece.point(0.0), piece.point(0.5), piece.point(1.0)];
    let pad = piece.length() + 1.0;
    let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in probe {
        let (a, b) = lattice_coords(z, tau);
        a_lo = a_lo.min(a);
        a_hi = a_hi.max(a);
        b_lo = b_lo.min(b);
        b_hi = b_hi.max(b);
    }
    let db = pad / tau.im + 1.0;
    let da = pad + db * tau.re.abs() + 1.0;
    let mut out = Vec::new();
    for w in points {
        let (wa, wb) = lattice_coords(*w, tau);
        let n_lo = Float::floor(b_lo - db - wb) as i64;
        let n_hi = Float::ceil(b_hi + db - wb) as i64;
        let m_lo = Float::floor(a_lo - da - wa) as i64;
        let m_hi = Float::ceil(a_hi + da - wa) as i64;
        for n in n_lo..=n_hi {
            for m in m_lo..=m_hi {
                out.push(*w + m as f64 + n as f64 * tau);
            }
        }
    }
    out
}

/// Straight segment with circular detours of radius `clearance` around
/// every singular point closer than `clearance`.
pub fn deformed_segment(start: C64, end: C64, points: &[C64], tau: C64, clearance: f64) -> Result<Contour> {
    let seg = Piece::Line { start, end };
    let d = end - start;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::Path(String::from("degenerate segment")));
    }
    let dir = d / len;
    for z in [start, end] {
        for w in lattice_translates_near(&seg, points, tau) {
            if (z - w).norm() < clearance {
                return Err(Error::Singular { point: w, distance: (z - w).norm() });
            }
        }
    }
    let mut hits: Vec<(f64, f64, C64)> = Vec::new();
    for w in lattice_translates_near(&seg, points, tau) {
        if seg.distance_to(w) >= clearance {
            continue;
        }
        let rel = (w - start) * dir.conj();
        let half = Float::sqrt(clearance * clearance - rel.im * rel.im);
        hits.push((rel.re - half, rel.re + half, w));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pieces = Vec::new();
    let mut cursor = 0.0;
    for (t0, t1, w) in hits {
        if t0 < cursor {
            return Err(Error::Path(format!("singular points near {w} are closer than twice the clearance")));
        }
        let p0 = start + dir * t0;
        let p1 = start + dir * t1;
        if t0 > cursor {
            pieces.push(Piece::Line { start: start + dir * cursor, end: p0 });
        }
        let a0 = (p0 - w).arg();
        let a1 = (p1 - w).arg();
        // the point lies left of the segment when its offset is positive
        let offset = ((w - start) * dir.conj()).im;
        let ccw = offset > 1e-12 * (1.0 + len);
        let mut sweep = a1 - a0;
        if ccw {
            while sweep <= 0.0 {
                sweep += 2.0 * PI;
            }
        } else {
            while sweep >= 0.0 {
                sweep -= 2.0 * PI;
            }
        }
        pieces.push(Piece::Arc { center: w, radius: clearance, angle: a0, sweep });
        cursor = t1;
    }
    if cursor < len {
        pieces.push(Piece::Line { start: start + dir * cursor, end });
    }
    let c = Contour { pieces };
    let (dist, w) = c.clearance(points, tau);
    if dist < clearance * (1.0 - 1e-9) {
        return Err(Error::Singular { point: w, distance: dist });
    }
    Ok(c)
}

/// Settings for transport and monodromy.
#[derive(Clone, Debug, PartialEq)]
pub struct MonodromyConfig {
    pub ode: OdeOptions,
    /// Minimum distance between contours and singular points.
    pub clearance: f64,
    /// Radius of the local loops.
    pub loop_r: f64,
    /// Number of monodromy evaluations along a modulus path, endpoints included.
    pub checkpoints: usize,
    /// Settings of the modulus flow between checkpoints.
    pub flow: IntegratorConfig,
}

impl Default for MonodromyConfig {
    fn default() -> Self {
        MonodromyConfig {
            ode: OdeOptions::default(),
            clearance: 1e-2,
            loop_r: 0.05,
            checkpoints: 5,
            flow: IntegratorConfig::default(),
        }
    }
}

/// Continue `y0` along the contour. Returns the end value.
pub fn transport(
    model: &ModelSpec,
    state: &PhaseState,
    ctx: &EllipticContext,
    contour: &Contour,
    y0: &Matrix,
    cfg: &MonodromyConfig,
    stats: &mut OdeStats,
) -> Result<Matrix> {
    model.validate(state)?;
    let n = model.lax_dim();
    if y0.dim() != n {
        return Err(Error::Model(format!("initial matrix must be {n}×{n}")));
    }
    let (dist, w) = contour.clearance(&model.singular_points(ctx), ctx.tau());
    if dist < cfg.clearance * (1.0 - 1e-9) {
        return Err(Error::Singular { point: w, distance: dist });
    }
    let mut y = y0.as_slice().to_vec();
    for piece in &contour.pieces {
        let rhs = |t: f64, v: &[C64]| -> Result<Vec<C64>> {
            let l = model.lax(state, piece.point(t), ctx)?.l.scale(piece.derivative(t));
            let ym = Matrix::from_row_major(v.to_vec())?;
            Ok((&l * &ym).as_slice().to_vec())
        };
        let h = (0.05 / piece.length().max(1e-3)).min(0.5);
        y = solve(rhs, 0.0, 1.0, y, &cfg.ode, h, |_| Ok(()), stats)?.0;
    }
    Matrix::from_row_major(y)
}

/// `∫ Tr L dz` along the contour by composite Gauss–Legendre quadrature.
pub fn trace_integral(model: &ModelSpec, state: &PhaseState, ctx: &EllipticContext, contour: &Contour) -> Result<C64> {
    let (nodes, weights) = gauss_legendre(16);
    let mut acc = C64::zero();
    for piece in &contour.pieces {
        let panels = (Float::ceil(piece.length() / 0.05) as usize).max(1);
        for k in 0..panels {
            let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
            for (x, wt) in nodes.iter().zip(&weights) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let l = model.lax(state, piece.point(t), ctx)?.l;
                acc += l.trace() * piece.derivative(t) * (0.5 * (b - a) * wt);
            }
        }
    }
    Ok(acc)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut r = Float::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, r);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * r * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (r * p1 - p0) / (r * r - 1.0);
            let dr = p1 / dp;
            r -= dr;
            if dr.abs() < 1e-16 {
                break;
            }
        }
        x[i] = r;
        w[i] = 2.0 / ((1.0 - r * r) * dp * dp);
    }
    (x, w)
}

/// `|det y − want|` relative to the Hadamard bound `Π‖row‖ ≥ |det y|`, the
/// scale at which entry errors of `y` show up in its determinant.
pub fn liouville_gap(y: &Matrix, want: C64) -> f64 {
    let n = y.dim();
    let hadamard: f64 = (0..n).map(|i| Float::sqrt(y.row(i).iter().map(|v| v.norm_sqr()).sum::<f64>())).product();
    (y.det() - want).norm() / hadamard.max(want.norm()).max(f64::MIN_POSITIVE)
}

/// Monodromy matrices with the solution normalized to the identity at `z0`,
/// read on the right: `Y(z+1) = Y(z)Γ_α`, `Y(z+τ) = e^{2πiQ}Y(z)Γ_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonodromyData {
    pub z0: C64,
    pub tau: C64,
    /// Loop matrices at the singular points, in the `z0` frame.
    pub gamma_local: Vec<Matrix>,
    /// Centres of the local loops.
    pub singular_points: Vec<C64>,
    pub gamma_alpha: Matrix,
    pub gamma_beta: Matrix,
    /// Largest [`liouville_gap`] over the transported contours.
    pub liouville_residual: f64,
    pub stats: OdeStats,
}

/// Contours used by [`monodromy_data`].
#[derive(Clone, Debug, PartialEq)]
pub struct CycleContours {
    pub alpha: Contour,
    pub beta: Contour,
    /// Connecting path from `z0` and the loop around each singular point.
    pub local: Vec<(Contour, Contour)>,
}

pub fn cycle_contours(model: &ModelSpec, ctx: &EllipticContext, z0: C64, cfg: &MonodromyConfig) -> Result<CycleContours> {
    if !(cfg.clearance > 0.0 && cfg.loop_r > cfg.clearance) {
        return Err(Error::Path(String::from("need 0 < clearance < loop radius")));
    }
    let tau = ctx.tau();
    let pts = model.singular_points(ctx);
    let alpha = deformed_segment(z0, z0 + 1.0, &pts, tau, cfg.clearance)?;
    let beta = deformed_segment(z0, z0 + tau, &pts, tau, cfg.clearance)?;
    let mut local = Vec::new();
    for (i, &w) in pts.iter().enumerate() {
        let others: Vec<C64> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
        let v = z0 - w;
        if v.norm() <= cfg.loop_r + cfg.clearance {
            return Err(Error::Singular { point: w, distance: v.norm() });
        }
        let angle = v.arg();
        let entry = w + C64::from_polar(cfg.loop_r, angle);
        let connect = deformed_segment(z0, entry, &pts, tau, cfg.clearance)?;
        let circle = Contour::circle(w, cfg.loop_r, angle);
        // the loop may enclose only its own centre
        let mut own = w;
        for t in lattice_translates_near(&circle.pieces[0], &[w], tau) {
            if (t - w).norm() > 1e-12 && (t - w).norm() < cfg.loop_r + cfg.clearance {
                own = t;
            }
        }
        let (dist, near) = circle.clearance(&others, tau);
        if own != w || dist < cfg.clearance {
            return Err(Error::Path(format!("loop radius too large near {near}")));
        }
        local.push((connect, circle));
    }
    Ok(CycleContours { alpha, beta, local })
}

/// Local and global monodromy matrices at base point `z0`.
pub fn monodromy_data(
    model: &ModelSpec,
    state: &PhaseState,
    ctx: &EllipticContext,
    z0: C64,
    cfg: &MonodromyConfig,
) -> Result<MonodromyData> {
    let contours = cycle_contours(model, ctx, z0, cfg)?;
    let n = model.lax_dim();
    let id = Matrix::identity(n);
    let mut stats = OdeStats::default();
    let mut liouville: f64 = 0.0;
    let mut check = |y: &Matrix, c: &Contour, base: C64| -> Result<()> {
        let want = (trace_integral(model, state, ctx, c)? + base.ln()).exp();
        liouville = liouville.max(liouville_gap(y, want));
        Ok(())
    };
    let ya = transport(model, state, ctx, &contours.alpha, &id, cfg, &mut stats)?;
    check(&ya, &contours.alpha, C64::new(1.0, 0.0))?;
    let yb = transport(model, state, ctx, &contours.beta, &id, cfg, &mut stats)?;
    check(&yb, &contours.beta, C64::new(1.0, 0.0))?;
    let (qd, _) = model.cartan_diagonals(state);
    let twist: Vec<C64> = qd.iter().map(|q| (-C64::new(0.0, 2.0 * PI) * q).exp()).collect();
    let gamma_beta = &Matrix::from_diag(&twist) * &yb;
    let mut gamma_local = Vec::new();
    for (connect, circle) in &contours.local {
        let c = transport(model, state, ctx, connect, &id, cfg, &mut stats)?;
        check(&c, connect, C64::new(1.0, 0.0))?;
        let tc = transport(model, state, ctx, circle, &c, cfg, &mut stats)?;
        check(&tc, circle, c.det())?;
        gamma_local.push(&c.inverse()? * &tc);
    }
    Ok(MonodromyData {
        z0,
        tau: ctx.tau(),
        gamma_local,
        singular_points: model.singular_points(ctx),
        gamma_alpha: ya,
        gamma_beta,
        liouville_residual: liouville,
        stats,
    })
}

/// Conjugation-invariant summary of [`MonodromyData`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralInvariants {
    pub alpha_eigenvalues: Vec<C64>,
    pub beta_eigenvalues: Vec<C64>,
    pub product_eigenvalues: Vec<C64>,
    pub local_eigenvalues: Vec<Vec<C64>>,
    pub alpha_trace: C64,
    pub beta_trace: C64,
    pub product_trace: C64,
    pub local_traces: Vec<C64>,
    /// Largest entry of `Γ_α`, `Γ_β`, `Γ_αΓ_β` and each local matrix.
    pub scales: Vec<f64>,
}

impl SpectralInvariants {
    pub fn of(data: &MonodromyData) -> Result<SpectralInvariants> {
        let product = &data.gamma_alpha * &data.gamma_beta;
        Ok(SpectralInvariants {
            alpha_eigenvalues: data.gamma_alpha.eigenvalues()?,
            beta_eigenvalues: data.gamma_beta.eigenvalues()?,
            product_eigenvalues: product.eigenvalues()?,
            local_eigenvalues: data.gamma_local.iter().map(Matrix::eigenvalues).collect::<Result<_>>()?,
            alpha_trace: data.gamma_alpha.trace(),
            beta_trace: data.gamma_beta.trace(),
            product_trace: product.trace(),
            local_traces: data.gamma_local.iter().map(Matrix::trace).collect(),
            scales: [&data.gamma_alpha, &data.gamma_beta, &product]
                .into_iter()
                .chain(&data.gamma_local)
                .map(Matrix::max_norm)
                .collect(),
        })
    }

    /// Named drifts of every invariant from `base`, each measured as
    /// `|Δ| / max(1, ‖Γ‖)` with `‖Γ‖` the largest entry of the base matrix
    /// (eigenvalues under the best pairing). Eigenvalues far below `‖Γ‖`
    /// are only determined to about `ε‖Γ‖`.
    pub fn drift_from(&self, base: &SpectralInvariants) -> Vec<(String, f64)> {
        let gap = |k: usize| {
            let sc = base.scales.get(k).copied().unwrap_or(1.0).max(1.0);
            move |a: C64, b: C64| (a - b).norm() / sc
        };
        let ev = |k: usize, a: &[C64], b: &[C64]| multiset_distance_by(a, b, gap(k));
        let mut out = vec![
            (String::from("eig(alpha)"), ev(0, &self.alpha_eigenvalues, &base.alpha_eigenvalues)),
            (String::from("eig(beta)"), ev(1, &self.beta_eigenvalues, &base.beta_eigenvalues)),
            (String::from("eig(alpha*beta)"), ev(2, &self.product_eigenvalues, &base.product_eigenvalues)),
            (String::from("tr(alpha)"), gap(0)(self.alpha_trace, base.alpha_trace)),
            (String::from("tr(beta)"), gap(1)(self.beta_trace, base.beta_trace)),
            (String::from("tr(alpha*beta)"), gap(2)(self.product_trace, base.product_trace)),
        ];
        for (i, (a, b)) in self.local_eigenvalues.iter().zip(&base.local_eigenvalues).enumerate() {
            out.push((format!("eig(local{i})"), ev(3 + i, a, b)));
        }
        for (i, (a, b)) in self.local_traces.iter().zip(&base.local_traces).enumerate() {
            out.push((format!("tr(local{i})"), gap(3 + i)(*a, *b)));
        }
        out
    }
}

/// Spectral data at one point of a modulus path.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub s: f64,
    pub tau: C64,
    pub z0: C64,
    pub state: PhaseState,
    pub invariants: SpectralInvariants,
    pub liouville_residual: f64,
}

/// Result of [`isomonodromy_drift`].
#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub flow: Flow,
    pub checkpoints: Vec<Checkpoint>,
    /// Largest drift of each named invariant over all checkpoints.
    pub drifts: Vec<(String, f64)>,
    pub max_drift: f64,
    pub flow_stats: OdeStats,
}

/// Evolve along a modulus path with the isomonodromic flow and measure how
/// far the monodromy spectral data move. The base point keeps its lattice
/// coordinates.
pub fn isomonodromy_drift(
    model: &ModelSpec,
    state0: &PhaseState,
    tau_path: &PathSpec,
    z0: C64,
    cfg: &MonodromyConfig,
) -> Result<DriftReport> {
    drift_with_flow(model, state0, tau_path, z0, Flow::Isomonodromic, cfg)
}

/// [`isomonodromy_drift`] with a chosen vector field; the isospectral field
/// serves as a negative control.
pub fn drift_with_flow(
    model: &ModelSpec,
    state0: &PhaseState,
    tau_path: &PathSpec,
    z0: C64,
    flow: Flow,
    cfg: &MonodromyConfig,
) -> Result<DriftReport> {
    if cfg.checkpoints < 2 {
        return Err(Error::Path(String::from("need at least two checkpoints")));
    }
    tau_path.validate_modulus()?;
    let tau0 = tau_path.point(0.0)?;
    let (a, b) = lattice_coords(z0, tau0);
    let icfg = IntegratorConfig { n_samples: cfg.checkpoints, ..cfg.flow.clone() };
    let traj = integrate_with_role(model, state0, tau_path, flow, PathRole::Modulus, &icfg)?;
    let mut checkpoints = Vec::with_capacity(traj.samples.len());
    for (i, sample) in traj.samples.iter().enumerate() {
        let tau = traj.modulus_at(i);
        let ctx = EllipticContext::new(tau)?;
        let z = a + b * tau;
        let data = monodromy_data(model, &sample.state, &ctx, z, cfg)?;
        checkpoints.push(Checkpoint {
            s: sample.s,
            tau,
            z0: z,
            state: sample.state.clone(),
            invariants: SpectralInvariants::of(&data)?,
            liouville_residual: data.liouville_residual,
        });
    }
    let mut drifts: Vec<(String, f64)> = checkpoints[0].invariants.drift_from(&checkpoints[0].invariants);
    for cp in &checkpoints[1..] {
        for (acc, (_, d)) in drifts.iter_mut().zip(cp.invariants.drift_from(&checkpoints[0].invariants)) {
            acc.1 = acc.1.max(d);
        }
    }
    let max_drift = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(DriftReport { flow, checkpoints, drifts, max_drift, flow_stats: traj.stats })
}

/// A pole of `L(z)` found by contour integration.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectedPole {
    /// Location reduced to the cell `{a + bτ : 0 ≤ a, b < 1}`.
    pub location: C64,
    /// Largest entry of the residue matrix.
    pub residue: f64,
}

/// Settings for [`singular_census`].
#[derive(Clone, Debug, PartialEq)]
pub struct CensusConfig {
    /// Cells per lattice direction.
    pub cells: usize,
    /// Shift of the cell grid in lattice coordinates.
    pub offset: (f64, f64),
    /// Entries of `∮L dz / 2πi` below this count as zero.
    pub threshold: f64,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig { cells: 8, offset: (0.0371, 0.0529), threshold: 1e-6 }
    }
}

/// Tile a fundamental cell with small parallelograms, integrate `L` around
/// each and report those with a nonzero residue, located by `∮zL / ∮L`.
pub fn singular_census(
    model: &ModelSpec,
    state: &PhaseState,
    ctx: &EllipticContext,
    cfg: &CensusConfig,
) -> Result<Vec<DetectedPole>> {
    let tau = ctx.tau();
    let n = cfg.cells.max(1);
    let h = 1.0 / n as f64;
    let (nodes, weights) = gauss_legendre(20);
    let at = |a: f64, b: f64| a + b * tau;
    let mut found = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (a0, b0) = (cfg.offset.0 + i as f64 * h, cfg.offset.1 + j as f64 * h);
            let corners = [at(a0, b0), at(a0 + h, b0), at(a0 + h, b0 + h), at(a0, b0 + h)];
            let dim = model.lax_dim();
            let mut m0 = Matrix::zeros(dim);
            let mut m1 = Matrix::zeros(dim);
            for e in 0..4 {
                let (p, q) = (corners[e], corners[(e + 1) % 4]);
                for panel in 0..4 {
                    let (ta, tb) = (panel as f64 / 4.0, (panel + 1) as f64 / 4.0);
                    for (x, wt) in nodes.iter().zip(&weights) {
                        let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * x;
                        let z = p + (q - p) * t;
                        let dz = (q - p) * (0.5 * (tb - ta) * wt);
                        let l = model.lax(state, z, ctx)?.l;
                        for (k, v) in l.as_slice().iter().enumerate() {
                            m0.as_mut_slice()[k] += v * dz;
                            m1.as_mut_slice()[k] += v * z * dz;
                        }
                    }
                }
            }
            let res = m0.scale(C64::new(0.0, -0.5 / PI));
            let (k, big) = res
                .as_slice()
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.norm()))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if big > cfg.threshold {
                let z = m1.as_slice()[k] / m0.as_slice()[k];
                let (a, b) = lattice_coords(z, tau);
                let (a, b) = (a - Float::floor(a + 1e-9), b - Float::floor(b + 1e-9));
                let (a, b) = (if a > 1.0 - 1e-9 { 0.0 } else { a }, if b > 1.0 - 1e-9 { 0.0 } else { b });
                found.push(DetectedPole { location: at(a, b), residue: big });
            }
        }
    }
    Ok(found)
}
