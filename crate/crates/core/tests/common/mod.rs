#![allow(dead_code)]

use isomon_core::elliptic::EllipticContext;
use isomon_core::linalg::Matrix;
use isomon_core::models::{ModelKind, ModelSpec, PhaseState};
use isomon_core::rootsys::{build_root_system, Family};
use isomon_core::C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn small(r: &mut ChaCha8Rng, s: f64) -> C64 {
    c(r.gen_range(-s..s), r.gen_range(-s..s))
}

pub fn random_tau(r: &mut ChaCha8Rng) -> C64 {
    c(r.gen_range(-0.3..0.3), r.gen_range(0.8..1.4))
}

/// Phase state with every pole argument at least `gap` from its lattice.
pub fn random_state(model: &ModelSpec, tau: C64, r: &mut ChaCha8Rng, gap: f64) -> PhaseState {
    let n = model.dim();
    for _ in 0..10_000 {
        let q: Vec<C64> = (0..n).map(|_| c(r.gen_range(-0.5..0.5), r.gen_range(-0.35..0.35) * tau.im)).collect();
        let p: Vec<C64> = (0..n).map(|_| small(r, 1.0)).collect();
        let s = match model.kind() {
            ModelKind::SpinSl => {
                let mut f = Matrix::zeros(n);
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            f[(j, k)] = small(r, 1.0);
                        }
                    }
                }
                PhaseState::with_spin_matrix(q, p, f).unwrap()
            }
            ModelKind::SpinSimplyLaced => {
                let f = (0..model.spin_len()).map(|_| small(r, 1.0)).collect();
                PhaseState::with_spin_roots(q, p, f).unwrap()
            }
            _ => PhaseState::new(q, p).unwrap(),
        };
        if model.collision_distance(&s, tau) > gap {
            return s;
        }
    }
    panic!("no collision-free state found");
}

/// Spectral parameter at least `gap` from every singular point.
pub fn random_z(model: &ModelSpec, ctx: &EllipticContext, r: &mut ChaCha8Rng, gap: f64) -> C64 {
    let tau = ctx.tau();
    loop {
        let z = c(r.gen_range(-0.5..0.5), 0.0) + r.gen_range(-0.5..0.5) * tau;
        let ok = model.singular_points(ctx).iter().all(|w| {
            isomon_core::models::lattice_distance(z - w, isomon_core::elliptic::PeriodScale::Full, tau) > gap
        });
        if ok {
            return z;
        }
    }
}

/// One representative of each family at small rank, with generic couplings.
pub fn sample_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::a_vector(3, c(0.7, 0.2)).unwrap(),
        ModelSpec::simply_laced(build_root_system(Family::A, 2).unwrap(), c(0.8, -0.1)).unwrap(),
        ModelSpec::bc_short(2, c(0.7, 0.0), c(0.5, 0.1), c(0.6, 0.0)).unwrap(),
        ModelSpec::twisted_bc(2, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.1), c(0.6, 0.0), c(0.4, -0.2)).unwrap(),
        ModelSpec::spin_sl(3).unwrap(),
        ModelSpec::spin_simply_laced(build_root_system(Family::A, 2).unwrap()).unwrap(),
    ]
}
