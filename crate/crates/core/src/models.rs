//! Calogero–Moser type models: Hamiltonians, equations of motion, Lax pairs
//! `L(z)`, `M(z)` and the residuals of the Lax and translation relations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::{Float, Zero};

use crate::elliptic::{EllipticContext, PeriodScale, Variant, POLE_GUARD};
use crate::linalg::Matrix;
use crate::rootsys::{
    build_root_system, e_pairs, matrix_unit, matrix_unit_signs, structure_constants, Family, Orbit, Root, RootSystem,
    StructureConstants,
};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

fn two_pi_i() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

/// The six model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    AVector,
    SimplyLacedRoot,
    BcShort,
    TwistedBcShort,
    SpinSl,
    SpinSimplyLaced,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::AVector,
        ModelKind::SimplyLacedRoot,
        ModelKind::BcShort,
        ModelKind::TwistedBcShort,
        ModelKind::SpinSl,
        ModelKind::SpinSimplyLaced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::AVector => "a-vector",
            ModelKind::SimplyLacedRoot => "simply-laced",
            ModelKind::BcShort => "bc",
            ModelKind::TwistedBcShort => "twisted-bc",
            ModelKind::SpinSl => "spin-sl",
            ModelKind::SpinSimplyLaced => "spin-simply-laced",
        }
    }

    pub fn from_name(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_spin(self) -> bool {
        matches!(self, ModelKind::SpinSl | ModelKind::SpinSimplyLaced)
    }

    /// Root-type pairs use `2z` and have singular points at every half period.
    pub fn is_root_type(self) -> bool {
        matches!(self, ModelKind::SimplyLacedRoot | ModelKind::BcShort | ModelKind::TwistedBcShort)
    }
}

/// Bare coupling constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Couplings {
    Single { g: C64 },
    Bc { g_m: C64, g_l: C64, g_s: C64 },
    Twisted { g_m: C64, g_l1: C64, g_l2: C64, g_s1: C64, g_s2: C64 },
    Spin,
}

/// Squares of the effective couplings that enter the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Renormalized {
    Unchanged,
    Bc { gs_sq: C64 },
    Twisted { gl2_sq: C64, gs1_sq: C64, gs2_sq: C64 },
}

/// Effective couplings from bare ones.
pub fn renormalize(c: &Couplings) -> Renormalized {
    match *c {
        Couplings::Bc { g_l, g_s, .. } => Renormalized::Bc { gs_sq: g_s * g_s + g_s * g_l / 2.0 },
        Couplings::Twisted { g_l1, g_l2, g_s1, g_s2, .. } => Renormalized::Twisted {
            gl2_sq: g_l2 * g_l2 + 2.0 * g_l1 * g_l2,
            gs1_sq: g_s1 * g_s1 + 2.0 * g_s1 * g_s2 + (g_s1 * g_l1 + g_s1 * g_l2 + g_s2 * g_l2) / 2.0,
            gs2_sq: g_s2 * g_s2 + g_s2 * g_l1 / 2.0,
        },
        _ => Renormalized::Unchanged,
    }
}

/// Squared couplings `[g₀², g₁², g₂², g₃²]` of the equivalent Inozemtsev
/// Hamiltonian, attached to the half periods `0, 1/2, (1+τ)/2, τ/2`.
pub fn inozemtsev_map(c: &Couplings) -> Result<[C64; 4]> {
    let Couplings::Twisted { g_l1, .. } = *c else {
        return Err(Error::Model("Inozemtsev map needs twisted couplings".into()));
    };
    let Renormalized::Twisted { gl2_sq, gs1_sq, gs2_sq } = renormalize(c) else { unreachable!() };
    let l1 = g_l1 * g_l1 / 8.0;
    Ok([l1 + gl2_sq / 8.0 + 2.0 * (gs1_sq + gs2_sq), l1 + 2.0 * gs2_sq, l1, l1 + gl2_sq / 8.0])
}

/// `½p·p + (g_m²/2)Σ_{Δ_m}℘(α·q) + Σ_j Σ_a g_a² ℘(q_j + ω_a)`.
pub fn inozemtsev_hamiltonian(g_m: C64, g_sq: &[C64; 4], state: &PhaseState, ctx: &EllipticContext) -> Result<C64> {
    let l = state.q.len();
    let rs = build_root_system(Family::BC, l)?;
    let mut h = kinetic(&state.p);
    for a in rs.orbit(Orbit::Middle) {
        h += g_m * g_m / 2.0 * ctx.wp(a.pair(&state.q), PeriodScale::Full, 0)?;
    }
    let w = ctx.half_periods();
    for q in &state.q {
        for a in 0..4 {
            h += g_sq[a] * ctx.wp(*q + w[a], PeriodScale::Full, 0)?;
        }
    }
    Ok(h)
}

/// Spin variables carried alongside `(q, p)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Spin {
    None,
    /// `ℓ×ℓ` matrix `F` with vanishing diagonal.
    Matrix(Matrix),
    /// Coefficients `F_α` in the root order of the model's root system; the
    /// Cartan components are constrained to zero and not stored.
    Roots(Vec<C64>),
}

/// A point of complex phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub q: Vec<C64>,
    pub p: Vec<C64>,
    pub spin: Spin,
}

impl PhaseState {
    pub fn new(q: Vec<C64>, p: Vec<C64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Model(format!("q has length {}, p has {}", q.len(), p.len())));
        }
        Ok(PhaseState { q, p, spin: Spin::None })
    }

    /// Spin state for `SPIN_SL`; the diagonal of `F` must vanish.
    pub fn with_spin_matrix(q: Vec<C64>, p: Vec<C64>, f: Matrix) -> Result<Self> {
        let mut s = Self::new(q, p)?;
        if f.dim() != s.q.len() {
            return Err(Error::Model("spin matrix dimension mismatch".into()));
        }
        if f.diag().iter().any(|d| !d.is_zero()) {
            return Err(Error::Model("spin matrix must have zero diagonal".into()));
        }
        s.spin = Spin::Matrix(f);
        Ok(s)
    }

    pub fn with_spin_roots(q: Vec<C64>, p: Vec<C64>, f: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(q, p)?;
        s.spin = Spin::Roots(f);
        Ok(s)
    }

    /// All coordinates as one vector: `q`, `p`, then spin entries.
    pub fn flatten(&self) -> Vec<C64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        match &self.spin {
            Spin::None => {}
            Spin::Matrix(f) => v.extend_from_slice(f.as_slice()),
            Spin::Roots(f) => v.extend_from_slice(f),
        }
        v
    }

    /// A state of the same shape as `self` from flattened coordinates.
    pub fn unflatten(&self, v: &[C64]) -> PhaseState {
        let n = self.q.len();
        let spin = match &self.spin {
            Spin::None => Spin::None,
            Spin::Matrix(f) => {
                let mut m = f.clone();
                m.as_mut_slice().copy_from_slice(&v[2 * n..]);
                Spin::Matrix(m)
            }
            Spin::Roots(_) => Spin::Roots(v[2 * n..].to_vec()),
        };
        PhaseState { q: v[..n].to_vec(), p: v[n..2 * n].to_vec(), spin }
    }

    /// `self + h·d` coordinatewise.
    pub fn add_scaled(&self, d: &PhaseState, h: C64) -> PhaseState {
        let a = self.flatten();
        let b = d.flatten();
        self.unflatten(&a.iter().zip(&b).map(|(x, y)| x + h * y).collect::<Vec<_>>())
    }

    /// Largest `|F_jj|`; zero for models without a spin matrix.
    pub fn spin_diagonal_norm(&self) -> f64 {
        match &self.spin {
            Spin::Matrix(f) => f.diag().iter().map(|d| d.norm()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `F_jk = i g b_j a_k` off the diagonal, zero on it.
pub fn spin_minimal_orbit(a: &[C64], b: &[C64], g: C64) -> Result<Matrix> {
    if a.len() != b.len() {
        return Err(Error::Model("a and b differ in length".into()));
    }
    let n = a.len();
    let mut f = Matrix::zeros(n);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                f[(j, k)] = I * g * b[j] * a[k];
            }
        }
    }
    Ok(f)
}

/// Flow whose vector field `eom` returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flow {
    /// Hamiltonian flow in real or complex time `t`.
    Isospectral,
    /// The same vector field divided by `2πi`, as a flow in the modulus `τ`.
    Isomonodromic,
}

/// `L(z)` and `M(z)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct LaxSample {
    pub l: Matrix,
    pub m: Matrix,
    pub z: C64,
    pub tau: C64,
}

impl LaxSample {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }
}

/// `coef · ℘_scale(arg · q)`.
#[derive(Clone, Debug, PartialEq)]
struct WpTerm {
    arg: Root,
    scale: PeriodScale,
    coef: C64,
}

/// A kernel contribution `ig·x_variant(u, zmul·z)` to `L` (times `l_factor`)
/// and `ig·y_variant(u, zmul·z)` to `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct KernelPart {
    variant: Variant,
    zmul: f64,
    coupling: C64,
    l_factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct OffDiagonal {
    arg: Root,
    pairs: Vec<(usize, usize)>,
    parts: Vec<KernelPart>,
}

/// Lax data of the spinless models over a root-indexed basis.
#[derive(Clone, Debug, PartialEq)]
struct Assembly {
    index: Vec<Root>,
    diag: Vec<Vec<WpTerm>>,
    off: Vec<OffDiagonal>,
    potential: Vec<WpTerm>,
}

#[derive(Clone, Debug, PartialEq)]
struct SpinRoots {
    rs: RootSystem,
    sc: StructureConstants,
    signs: Vec<i8>,
    units: Vec<(usize, usize)>,
    neg: Vec<usize>,
    /// For each α: `(β, α−β, N_{α,−β})` over β with `α−β` a root.
    chains: Vec<Vec<(usize, usize, f64)>>,
}

#[derive(Clone, Debug, PartialEq)]
enum Structure {
    Scalar(Assembly),
    SpinMatrix,
    SpinRoots(SpinRoots),
}

/// A model: kind, rank, couplings and the precomputed Lax structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    rank: usize,
    dim: usize,
    couplings: Couplings,
    renormalized: Renormalized,
    root_system: Option<RootSystem>,
    structure: Structure,
}

fn kinetic(p: &[C64]) -> C64 {
    p.iter().map(|x| x * x).sum::<C64>() / 2.0
}

fn wp_term(arg: &Root, scale: PeriodScale, coef: C64) -> WpTerm {
    WpTerm { arg: arg.clone(), scale, coef }
}

fn part(variant: Variant, zmul: f64, coupling: C64, l_factor: f64) -> KernelPart {
    KernelPart { variant, zmul, coupling, l_factor }
}

fn unit_index(n: usize) -> Vec<Root> {
    (0..n).map(|j| Root::unit(n, j, 1)).collect()
}

impl ModelSpec {
    /// `ℓ` particles with pair potential `g²℘(q_j − q_k)`.
    pub fn a_vector(l: usize, g: C64) -> Result<Self> {
        if l == 0 {
            return Err(Error::Model("a-vector needs at least one particle".into()));
        }
        let index = unit_index(l);
        let roots = if l >= 2 { build_root_system(Family::A, l - 1)?.roots().to_vec() } else { Vec::new() };
        let diag = index
            .iter()
            .map(|b| roots.iter().filter(|a| a.dot(b) == 1).map(|a| wp_term(a, PeriodScale::Full, I * g)).collect())
            .collect();
        let off = roots
            .iter()
            .map(|a| OffDiagonal {
                arg: a.clone(),
                pairs: e_pairs(&index, a, 1),
                parts: vec![part(Variant::Plain, 1.0, g, 1.0)],
            })
            .collect();
        let potential = roots.iter().map(|a| wp_term(a, PeriodScale::Full, g * g / 2.0)).collect();
        Ok(ModelSpec {
            kind: ModelKind::AVector,
            rank: l,
            dim: l,
            couplings: Couplings::Single { g },
            renormalized: Renormalized::Unchanged,
            root_system: None,
            structure: Structure::Scalar(Assembly { index, diag, off, potential }),
        })
    }

    /// Root-type pair over the full root system of a simply-laced algebra.
    pub fn simply_laced(rs: RootSystem, g: C64) -> Result<Self> {
        if !rs.is_simply_laced() {
            return Err(Error::Model(format!("{} is not simply laced", rs.family())));
        }
        let index = rs.roots().to_vec();
        let diag = index
            .iter()
            .map(|b| {
                let mut t = vec![wp_term(b, PeriodScale::Full, I * g)];
                t.extend(index.iter().filter(|c| c.dot(b) == 1).map(|c| wp_term(c, PeriodScale::Full, I * g)));
                t
            })
            .collect();
        let mut off = Vec::new();
        for a in &index {
            off.push(OffDiagonal {
                arg: a.clone(),
                pairs: e_pairs(&index, a, 1),
                parts: vec![part(Variant::Plain, 1.0, g, 1.0)],
            });
            off.push(OffDiagonal {
                arg: a.clone(),
                pairs: e_pairs(&index, a, 2),
                parts: vec![part(Variant::Plain, 2.0, g, 2.0)],
            });
        }
        let potential = index.iter().map(|a| wp_term(a, PeriodScale::Full, g * g / 2.0)).collect();
        Ok(ModelSpec {
            kind: ModelKind::SimplyLacedRoot,
            rank: rs.rank(),
            dim: rs.dim(),
            couplings: Couplings::Single { g },
            renormalized: Renormalized::Unchanged,
            structure: Structure::Scalar(Assembly { index, diag, off, potential }),
            root_system: Some(rs),
        })
    }

    /// `BC_ℓ` with the short-root Lax pair.
    pub fn bc_short(l: usize, g_m: C64, g_l: C64, g_s: C64) -> Result<Self> {
        let c = Couplings::Bc { g_m, g_l, g_s };
        let Renormalized::Bc { gs_sq } = renormalize(&c) else { unreachable!() };
        let rs = build_root_system(Family::BC, l)?;
        let mut potential = Vec::new();
        for a in rs.orbit(Orbit::Middle) {
            potential.push(wp_term(&a, PeriodScale::Full, g_m * g_m / 2.0));
        }
        for a in rs.orbit(Orbit::Long) {
            potential.push(wp_term(&a, PeriodScale::Full, g_l * g_l / 4.0));
        }
        for a in rs.orbit(Orbit::Short) {
            potential.push(wp_term(&a, PeriodScale::Full, gs_sq));
        }
        let zero = C64::zero();
        let assembly = bc_assembly(&rs, [g_m, g_l, zero, g_s, zero], potential);
        Ok(ModelSpec {
            kind: ModelKind::BcShort,
            rank: l,
            dim: l,
            couplings: c,
            renormalized: renormalize(&c),
            root_system: Some(rs),
            structure: Structure::Scalar(assembly),
        })
    }

    /// Extended twisted `BC_ℓ` with couplings on `℘`, `℘^(2)` for long roots
    /// and `℘`, `℘^(1/2)` for short roots.
    pub fn twisted_bc(l: usize, g_m: C64, g_l1: C64, g_l2: C64, g_s1: C64, g_s2: C64) -> Result<Self> {
        let c = Couplings::Twisted { g_m, g_l1, g_l2, g_s1, g_s2 };
        let Renormalized::Twisted { gl2_sq, gs1_sq, gs2_sq } = renormalize(&c) else { unreachable!() };
        let rs = build_root_system(Family::BC, l)?;
        let mut potential = Vec::new();
        for a in rs.orbit(Orbit::Middle) {
            potential.push(wp_term(&a, PeriodScale::Full, g_m * g_m / 2.0));
        }
        for a in rs.orbit(Orbit::Long) {
            potential.push(wp_term(&a, PeriodScale::Full, g_l1 * g_l1 / 4.0));
            potential.push(wp_term(&a, PeriodScale::Double, gl2_sq / 4.0));
        }
        for a in rs.orbit(Orbit::Short) {
            potential.push(wp_term(&a, PeriodScale::Full, gs1_sq));
            potential.push(wp_term(&a, PeriodScale::Half, gs2_sq));
        }
        let assembly = bc_assembly(&rs, [g_m, g_l1, g_l2, g_s1, g_s2], potential);
        Ok(ModelSpec {
            kind: ModelKind::TwistedBcShort,
            rank: l,
            dim: l,
            couplings: c,
            renormalized: renormalize(&c),
            root_system: Some(rs),
            structure: Structure::Scalar(assembly),
        })
    }

    /// `ℓ` particles with `gl(ℓ)` spin matrix `F`.
    pub fn spin_sl(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Model("spin-sl needs at least one particle".into()));
        }
        Ok(ModelSpec {
            kind: ModelKind::SpinSl,
            rank: l,
            dim: l,
            couplings: Couplings::Spin,
            renormalized: Renormalized::Unchanged,
            root_system: None,
            structure: Structure::SpinMatrix,
        })
    }

    /// Spin model over a simply-laced root system, realized with matrix
    /// units in the vector representation; type A only.
    pub fn spin_simply_laced(rs: RootSystem) -> Result<Self> {
        let sc = structure_constants(&rs)?;
        let signs = matrix_unit_signs(&rs, &sc)?;
        let roots = rs.roots();
        let units = roots.iter().map(|r| matrix_unit(r).unwrap()).collect();
        let neg = roots.iter().map(|r| rs.index_of(&r.neg()).unwrap()).collect();
        let chains = roots
            .iter()
            .map(|a| {
                roots
                    .iter()
                    .enumerate()
                    .filter_map(|(j, b)| {
                        let d = rs.index_of(&a.sub(b))?;
                        let nb = sc.get(a, &b.neg()).unwrap();
                        Some((j, d, nb as f64))
                    })
                    .collect()
            })
            .collect();
        Ok(ModelSpec {
            kind: ModelKind::SpinSimplyLaced,
            rank: rs.rank(),
            dim: rs.dim(),
            couplings: Couplings::Spin,
            renormalized: Renormalized::Unchanged,
            structure: Structure::SpinRoots(SpinRoots { rs: rs.clone(), sc, signs, units, neg, chains }),
            root_system: Some(rs),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of particles for vector and BC models, Lie rank otherwise.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Length of `q` and `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn renormalized(&self) -> &Renormalized {
        &self.renormalized
    }

    pub fn root_system(&self) -> Option<&RootSystem> {
        self.root_system.as_ref()
    }

    pub fn structure_constants(&self) -> Option<&StructureConstants> {
        match &self.structure {
            Structure::SpinRoots(s) => Some(&s.sc),
            _ => None,
        }
    }

    /// Dimension of `L` and `M`.
    pub fn lax_dim(&self) -> usize {
        match &self.structure {
            Structure::Scalar(a) => a.index.len(),
            _ => self.dim,
        }
    }

    /// Labels of the rows of `L`: index roots, or unit vectors `e_j`.
    pub fn index(&self) -> Vec<Root> {
        match &self.structure {
            Structure::Scalar(a) => a.index.clone(),
            _ => unit_index(self.dim),
        }
    }

    /// Number of spin coordinates a state carries.
    pub fn spin_len(&self) -> usize {
        match &self.structure {
            Structure::Scalar(_) => 0,
            Structure::SpinMatrix => self.dim * self.dim,
            Structure::SpinRoots(s) => s.rs.roots().len(),
        }
    }

    /// Singular points of `L(z)` in the fundamental cell.
    pub fn singular_points(&self, ctx: &EllipticContext) -> Vec<C64> {
        if self.kind.is_root_type() {
            ctx.half_periods().to_vec()
        } else {
            vec![C64::zero()]
        }
    }

    /// `Σ_β β·β / dim span(index)`: for states whose momentum lies in the
    /// span of the index roots, `Tr P² = c · p·p`.
    pub fn quadratic_scale(&self) -> f64 {
        match &self.structure {
            Structure::Scalar(a) => {
                let total: i32 = a.index.iter().map(Root::norm2).sum();
                let span = match self.kind {
                    ModelKind::SimplyLacedRoot => self.rank,
                    _ => self.dim,
                };
                total as f64 / span as f64
            }
            _ => 1.0,
        }
    }

    /// Check the shape of a state against the model.
    pub fn validate(&self, s: &PhaseState) -> Result<()> {
        if s.q.len() != self.dim || s.p.len() != self.dim {
            return Err(Error::Model(format!("{} expects q, p of length {}", self.kind.name(), self.dim)));
        }
        let ok = match (&self.structure, &s.spin) {
            (Structure::Scalar(_), Spin::None) => true,
            (Structure::SpinMatrix, Spin::Matrix(f)) => f.dim() == self.dim,
            (Structure::SpinRoots(r), Spin::Roots(f)) => f.len() == r.rs.roots().len(),
            _ => false,
        };
        if !ok {
            return Err(Error::Model(format!("spin variables do not match {}", self.kind.name())));
        }
        if !s.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Arguments `α·q` of every ℘ in the Hamiltonian, with their lattices.
    fn pole_arguments(&self, s: &PhaseState) -> Vec<(C64, PeriodScale)> {
        match &self.structure {
            Structure::Scalar(a) => {
                a.potential.iter().filter(|t| !t.coef.is_zero()).map(|t| (t.arg.pair(&s.q), t.scale)).collect()
            }
            Structure::SpinMatrix => {
                let n = self.dim;
                let mut v = Vec::new();
                for j in 0..n {
                    for k in j + 1..n {
                        v.push((s.q[j] - s.q[k], PeriodScale::Full));
                    }
                }
                v
            }
            Structure::SpinRoots(r) => r.rs.roots().iter().map(|a| (a.pair(&s.q), PeriodScale::Full)).collect(),
        }
    }

    /// Smallest distance of any `α·q` from its pole lattice.
    pub fn collision_distance(&self, s: &PhaseState, tau: C64) -> f64 {
        self.pole_arguments(s).into_iter().map(|(u, sc)| lattice_distance(u, sc, tau)).fold(f64::INFINITY, f64::min)
    }

    pub fn hamiltonian(&self, s: &PhaseState, ctx: &EllipticContext) -> Result<C64> {
        self.validate(s)?;
        let mut h = kinetic(&s.p);
        match &self.structure {
            Structure::Scalar(a) => {
                for t in a.potential.iter().filter(|t| !t.coef.is_zero()) {
                    h += t.coef * ctx.wp(t.arg.pair(&s.q), t.scale, 0)?;
                }
            }
            Structure::SpinMatrix => {
                let Spin::Matrix(f) = &s.spin else { unreachable!() };
                for j in 0..self.dim {
                    for k in 0..self.dim {
                        if j != k {
                            h -= 0.5 * ctx.wp(s.q[j] - s.q[k], PeriodScale::Full, 0)? * f[(j, k)] * f[(k, j)];
                        }
                    }
                }
            }
            Structure::SpinRoots(r) => {
                let Spin::Roots(f) = &s.spin else { unreachable!() };
                for (i, a) in r.rs.roots().iter().enumerate() {
                    h -= 0.5 * ctx.wp(a.pair(&s.q), PeriodScale::Full, 0)? * f[i] * f[r.neg[i]];
                }
            }
        }
        Ok(h)
    }

    /// Vector field of the chosen flow.
    pub fn eom(&self, s: &PhaseState, ctx: &EllipticContext, flow: Flow) -> Result<PhaseState> {
        self.validate(s)?;
        let n = self.dim;
        let mut dp = vec![C64::zero(); n];
        let spin = match &self.structure {
            Structure::Scalar(a) => {
                for t in a.potential.iter().filter(|t| !t.coef.is_zero()) {
                    let w1 = ctx.wp(t.arg.pair(&s.q), t.scale, 1)?;
                    for (d, c) in dp.iter_mut().zip(t.arg.coords()) {
                        *d -= t.coef * w1 * c;
                    }
                }
                Spin::None
            }
            Structure::SpinMatrix => {
                let Spin::Matrix(f) = &s.spin else { unreachable!() };
                let mut w = Matrix::zeros(n);
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            let (v, d) = ctx.wp_pair(s.q[j] - s.q[k], PeriodScale::Full)?;
                            w[(j, k)] = v;
                            dp[j] += d * f[(j, k)] * f[(k, j)];
                        }
                    }
                }
                let mut df = Matrix::zeros(n);
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = C64::zero();
                        for m in 0..n {
                            if m != j && m != k {
                                acc += (w[(j, m)] - w[(m, k)]) * f[(j, m)] * f[(m, k)];
                            }
                        }
                        df[(j, k)] = acc;
                    }
                }
                Spin::Matrix(df)
            }
            Structure::SpinRoots(r) => {
                let Spin::Roots(f) = &s.spin else { unreachable!() };
                let roots = r.rs.roots();
                let mut w = Vec::with_capacity(roots.len());
                for (i, a) in roots.iter().enumerate() {
                    let (v, d) = ctx.wp_pair(a.pair(&s.q), PeriodScale::Full)?;
                    w.push(v);
                    let c = 0.5 * d * f[r.neg[i]] * f[i];
                    for (x, ac) in dp.iter_mut().zip(a.coords()) {
                        *x += c * ac;
                    }
                }
                let df = r
                    .chains
                    .iter()
                    .map(|chain| -chain.iter().map(|&(b, d, nab)| w[b] * f[d] * f[b] * nab).sum::<C64>())
                    .collect();
                Spin::Roots(df)
            }
        };
        let mut out = PhaseState { q: s.p.clone(), p: dp, spin };
        if flow == Flow::Isomonodromic {
            out = s.unflatten(&out.flatten().iter().map(|v| v / two_pi_i()).collect::<Vec<_>>());
        }
        Ok(out)
    }

    /// Diagonals `Q_ββ = β·q`, `P_ββ = β·p` of the Cartan parts of `L`.
    pub fn cartan_diagonals(&self, s: &PhaseState) -> (Vec<C64>, Vec<C64>) {
        let idx = self.index();
        (idx.iter().map(|b| b.pair(&s.q)).collect(), idx.iter().map(|b| b.pair(&s.p)).collect())
    }

    /// Assemble `L(z)` and `M(z)`.
    pub fn lax(&self, s: &PhaseState, z: C64, ctx: &EllipticContext) -> Result<LaxSample> {
        self.validate(s)?;
        for w in self.singular_points(ctx) {
            if lattice_distance(z - w, PeriodScale::Full, ctx.tau()) < POLE_GUARD {
                return Err(Error::Singular { point: w, distance: lattice_distance(z - w, PeriodScale::Full, ctx.tau()) });
            }
        }
        let n = self.lax_dim();
        let (_, pd) = self.cartan_diagonals(s);
        let mut l = Matrix::from_diag(&pd);
        let mut m = Matrix::zeros(n);
        match &self.structure {
            Structure::Scalar(a) => {
                for (i, terms) in a.diag.iter().enumerate() {
                    for t in terms.iter().filter(|t| !t.coef.is_zero()) {
                        m[(i, i)] += t.coef * ctx.wp(t.arg.pair(&s.q), t.scale, 0)?;
                    }
                }
                for od in &a.off {
                    if od.pairs.is_empty() {
                        continue;
                    }
                    let u = od.arg.pair(&s.q);
                    let (mut lx, mut my) = (C64::zero(), C64::zero());
                    for p in &od.parts {
                        if p.coupling.is_zero() {
                            continue;
                        }
                        let (x, y) = ctx.xy(u, p.zmul * z, p.variant)?;
                        lx += p.l_factor * I * p.coupling * x;
                        my += I * p.coupling * y;
                    }
                    for &(i, j) in &od.pairs {
                        l[(i, j)] += lx;
                        m[(i, j)] += my;
                    }
                }
            }
            Structure::SpinMatrix => {
                let Spin::Matrix(f) = &s.spin else { unreachable!() };
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            let (x, y) = ctx.xy(s.q[j] - s.q[k], z, Variant::Plain)?;
                            l[(j, k)] = -x * f[(k, j)];
                            m[(j, k)] = -y * f[(k, j)];
                        }
                    }
                }
            }
            Structure::SpinRoots(r) => {
                let Spin::Roots(f) = &s.spin else { unreachable!() };
                for (i, a) in r.rs.roots().iter().enumerate() {
                    let (j, k) = r.units[i];
                    let (x, y) = ctx.xy(a.pair(&s.q), z, Variant::Plain)?;
                    let c = f[r.neg[i]] * r.signs[i] as f64;
                    l[(j, k)] += -x * c;
                    m[(j, k)] += -y * c;
                }
            }
        }
        Ok(LaxSample { l, m, z, tau: ctx.tau() })
    }

    /// `Tr L(z)²/(2c) − H` with `c` from [`quadratic_scale`](Self::quadratic_scale).
    pub fn quadratic_trace_offset(&self, s: &PhaseState, z: C64, ctx: &EllipticContext) -> Result<C64> {
        let lax = self.lax(s, z, ctx)?;
        let t = (&lax.l * &lax.l).trace();
        Ok(t / (2.0 * self.quadratic_scale()) - self.hamiltonian(s, ctx)?)
    }
}

fn bc_assembly(rs: &RootSystem, g: [C64; 5], potential: Vec<WpTerm>) -> Assembly {
    let [g_m, g_l1, g_l2, g_s1, g_s2] = g;
    let index = rs.orbit(Orbit::Short);
    let middle = rs.orbit(Orbit::Middle);
    let diag = index
        .iter()
        .map(|b| {
            let mut t: Vec<WpTerm> =
                middle.iter().filter(|c| c.dot(b) == 1).map(|c| wp_term(c, PeriodScale::Full, I * g_m)).collect();
            let b2 = b.scale(2);
            t.push(wp_term(&b2, PeriodScale::Full, I * g_l1));
            t.push(wp_term(&b2, PeriodScale::Double, I * g_l2));
            t.push(wp_term(b, PeriodScale::Full, I * g_s1));
            t.push(wp_term(b, PeriodScale::Half, I * g_s2));
            t
        })
        .collect();
    let mut off = Vec::new();
    for a in &middle {
        off.push(OffDiagonal {
            arg: a.clone(),
            pairs: e_pairs(&index, a, 1),
            parts: vec![part(Variant::Plain, 1.0, g_m, 1.0)],
        });
    }
    for a in rs.orbit(Orbit::Long) {
        off.push(OffDiagonal {
            pairs: e_pairs(&index, &a, 1),
            parts: vec![part(Variant::Plain, 1.0, g_l1, 1.0), part(Variant::Double, 1.0, g_l2, 1.0)],
            arg: a,
        });
    }
    for a in &index {
        off.push(OffDiagonal {
            arg: a.clone(),
            pairs: e_pairs(&index, a, 2),
            parts: vec![part(Variant::Plain, 2.0, g_s1, 2.0), part(Variant::Half, 2.0, g_s2, 2.0)],
        });
    }
    Assembly { index, diag, off, potential }
}

/// Distance from `u` to the nearest point of `w₁ℤ + τℤ`, `w₁ ∈ {1, 1/2, 2}`.
pub fn lattice_distance(u: C64, scale: PeriodScale, tau: C64) -> f64 {
    let w1 = match scale {
        PeriodScale::Full => 1.0,
        PeriodScale::Half => 0.5,
        PeriodScale::Double => 2.0,
    };
    let n = Float::round(u.im / tau.im);
    let r = u - n * tau;
    let k = Float::round(r.re / w1);
    let r = r - k * w1;
    let mut best = f64::INFINITY;
    for a in -1..=1 {
        for b in -1..=1 {
            best = best.min((r - a as f64 * w1 - b as f64 * tau).norm());
        }
    }
    best
}

/// Options for [`lax_residual_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualOptions {
    /// Step of the complex cross stencils.
    pub step: f64,
    /// Sign in front of the commutator; `-1` gives a deliberately wrong check.
    pub commutator_sign: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions { step: 1e-4, commutator_sign: 1.0 }
    }
}

/// Four-point cross stencil of a matrix-valued holomorphic function.
fn cross_matrix(f: impl Fn(C64) -> Result<Matrix>, h: f64) -> Result<Matrix> {
    let hr = C64::new(h, 0.0);
    let hi = C64::new(0.0, h);
    let a = &f(hr)? - &f(-hr)?;
    let b = &f(hi)? - &f(-hi)?;
    Ok((&a - &b.scale(I)).scale(C64::new(0.25 / h, 0.0)))
}

/// Directional derivative of `L(z)` along the isospectral vector field.
fn transport_derivative(model: &ModelSpec, s: &PhaseState, z: C64, ctx: &EllipticContext, h: f64) -> Result<Matrix> {
    let v = model.eom(s, ctx, Flow::Isospectral)?;
    // L is linear in p and in the spin variables, so only the q-velocity limits the step
    let vmax = v.q.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let hs = h / vmax;
    cross_matrix(|e| Ok(model.lax(&s.add_scaled(&v, e), z, ctx)?.l), hs)
}

/// Max-norm residual of the Lax equation for the given flow:
/// `D_v L − [L, M]`, or `2πi ∂_τL + D_v L + ∂_z M − [L, M]` where `v` is
/// the Hamiltonian vector field and `∂_τ` acts on the explicit modulus.
pub fn lax_residual_with(
    model: &ModelSpec,
    s: &PhaseState,
    z: C64,
    ctx: &EllipticContext,
    flow: Flow,
    opts: ResidualOptions,
) -> Result<f64> {
    let h = opts.step;
    let lax = model.lax(s, z, ctx)?;
    let comm = lax.l.commutator(&lax.m).scale(C64::new(opts.commutator_sign, 0.0));
    let dl = transport_derivative(model, s, z, ctx, h)?;
    let lhs = match flow {
        Flow::Isospectral => dl,
        Flow::Isomonodromic => {
            let tau = ctx.tau();
            let trunc = ctx.truncation();
            let dtau = cross_matrix(
                |e| Ok(model.lax(s, z, &EllipticContext::with_truncation(tau + e, trunc)?)?.l),
                h,
            )?;
            let dz = cross_matrix(|e| Ok(model.lax(s, z + e, ctx)?.m), h)?;
            &(&dtau.scale(two_pi_i()) + &dl) + &dz
        }
    };
    Ok((&lhs - &comm).max_norm())
}

pub fn lax_residual(model: &ModelSpec, s: &PhaseState, z: C64, tau: C64, flow: Flow) -> Result<f64> {
    lax_residual_with(model, s, z, &EllipticContext::new(tau)?, flow, ResidualOptions::default())
}

/// Residuals of the translation relations
/// `L(z+1) = L(z)`, `L(z+τ) = e^{2πiQ}L(z)e^{−2πiQ}` and
/// `M(z+τ) = e^{2πiQ}(M(z) + 2πiL(z))e^{−2πiQ} − 2πiP`; the first entry also
/// covers `M(z+1) = M(z)`.
pub fn lax_translation_residual_ctx(
    model: &ModelSpec,
    s: &PhaseState,
    z: C64,
    ctx: &EllipticContext,
) -> Result<(f64, f64, f64)> {
    let tau = ctx.tau();
    let base = model.lax(s, z, ctx)?;
    let a = model.lax(s, z + 1.0, ctx)?;
    let b = model.lax(s, z + tau, ctx)?;
    let r_alpha = (&a.l - &base.l).max_norm().max((&a.m - &base.m).max_norm());
    let (qd, pd) = model.cartan_diagonals(s);
    let d: Vec<C64> = qd.iter().map(|q| (two_pi_i() * q).exp()).collect();
    let r_l = (&b.l - &base.l.conjugate_diag(&d)).max_norm();
    let shifted = &base.m + &base.l.scale(two_pi_i());
    let want = &shifted.conjugate_diag(&d) - &Matrix::from_diag(&pd).scale(two_pi_i());
    let r_m = (&b.m - &want).max_norm();
    Ok((r_alpha, r_l, r_m))
}

pub fn lax_translation_residual(model: &ModelSpec, s: &PhaseState, z: C64, tau: C64) -> Result<(f64, f64, f64)> {
    lax_translation_residual_ctx(model, s, z, &EllipticContext::new(tau)?)
}

pub fn hamiltonian(model: &ModelSpec, s: &PhaseState, tau: C64) -> Result<C64> {
    model.hamiltonian(s, &EllipticContext::new(tau)?)
}

pub fn eom(model: &ModelSpec, s: &PhaseState, tau: C64, flow: Flow) -> Result<PhaseState> {
    model.eom(s, &EllipticContext::new(tau)?, flow)
}

pub fn build_lax(model: &ModelSpec, s: &PhaseState, z: C64, tau: C64) -> Result<LaxSample> {
    model.lax(s, z, &EllipticContext::new(tau)?)
}

/// Human-readable model label such as `twisted-bc(2)`.
pub fn describe(model: &ModelSpec) -> String {
    match model.root_system() {
        Some(rs) if model.kind() != ModelKind::BcShort && model.kind() != ModelKind::TwistedBcShort => {
            format!("{}({}{})", model.kind().name(), rs.family(), rs.rank())
        }
        _ => format!("{}({})", model.kind().name(), model.rank()),
    }
}

impl Spin {
    pub fn is_none(&self) -> bool {
        matches!(self, Spin::None)
    }
}
