mod common;

use common::*;
use isomon_core::elliptic::{EllipticContext, PeriodScale};
use isomon_core::linalg::{multiset_distance, Matrix};
use isomon_core::models::{
    build_lax, eom, hamiltonian, inozemtsev_hamiltonian, inozemtsev_map, lax_residual_with, lax_translation_residual,
    renormalize, spin_minimal_orbit, Couplings, Flow, ModelKind, ModelSpec, PhaseState, Renormalized,
    ResidualOptions, Spin,
};
use isomon_core::rootsys::{build_root_system, Family};
use isomon_core::{Error, C64};
use proptest::prelude::*;

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn renormalization_examples() {
    let bc = renormalize(&Couplings::Bc { g_m: c(0.0, 0.0), g_l: c(2.0, 0.0), g_s: c(1.0, 0.0) });
    assert_eq!(bc, Renormalized::Bc { gs_sq: c(2.0, 0.0) });
    let (gm, gl1, gs1) = (c(0.3, 0.0), c(0.7, 0.1), c(1.1, -0.2));
    let z = c(0.0, 0.0);
    let tw = renormalize(&Couplings::Twisted { g_m: gm, g_l1: gl1, g_l2: z, g_s1: gs1, g_s2: z });
    assert_eq!(tw, Renormalized::Twisted { gl2_sq: z, gs1_sq: gs1 * gs1 + gs1 * gl1 / 2.0, gs2_sq: z });
    let zero = renormalize(&Couplings::Twisted { g_m: z, g_l1: z, g_l2: z, g_s1: z, g_s2: z });
    assert_eq!(zero, Renormalized::Twisted { gl2_sq: z, gs1_sq: z, gs2_sq: z });
}

#[test]
fn inozemtsev_map_examples() {
    let z = c(0.0, 0.0);
    let g = inozemtsev_map(&Couplings::Twisted {
        g_m: z,
        g_l1: c(2.0 * 2f64.sqrt(), 0.0),
        g_l2: z,
        g_s1: z,
        g_s2: z,
    })
    .unwrap();
    assert!(close(g[2], c(1.0, 0.0), 1e-15));
    let g0 = inozemtsev_map(&Couplings::Twisted { g_m: z, g_l1: z, g_l2: z, g_s1: z, g_s2: z }).unwrap();
    assert!(g0.iter().all(|v| *v == z));
    assert!(inozemtsev_map(&Couplings::Single { g: z }).is_err());
}

#[test]
fn inozemtsev_difference_is_q_independent() {
    let mut r = rng(11);
    for l in [1, 2] {
        for _ in 0..5 {
            let g: Vec<C64> = (0..5).map(|_| small(&mut r, 1.0)).collect();
            let model = ModelSpec::twisted_bc(l, g[0], g[1], g[2], g[3], g[4]).unwrap();
            let tau = random_tau(&mut r);
            let ctx = EllipticContext::new(tau).unwrap();
            let gs = inozemtsev_map(model.couplings()).unwrap();
            let diff = |s: &PhaseState| {
                model.hamiltonian(s, &ctx).unwrap() - inozemtsev_hamiltonian(g[0], &gs, s, &ctx).unwrap()
            };
            let s1 = random_state(&model, tau, &mut r, 0.05);
            let s2 = random_state(&model, tau, &mut r, 0.05);
            let (d1, d2) = (diff(&s1), diff(&s2));
            let scale = model.hamiltonian(&s1, &ctx).unwrap().norm().max(1.0);
            assert!((d1 - d2).norm() < 1e-9 * scale, "{l} {}", (d1 - d2).norm());
        }
    }
}

#[test]
fn free_limit() {
    let z = c(0.0, 0.0);
    let tau = c(0.1, 1.0);
    let models = [
        ModelSpec::a_vector(3, z).unwrap(),
        ModelSpec::simply_laced(build_root_system(Family::D, 4).unwrap(), z).unwrap(),
        ModelSpec::bc_short(2, z, z, z).unwrap(),
        ModelSpec::twisted_bc(3, z, z, z, z, z).unwrap(),
    ];
    let mut r = rng(3);
    for m in &models {
        let s = random_state(m, tau, &mut r, 0.0);
        let h = hamiltonian(m, &s, tau).unwrap();
        let kin: C64 = s.p.iter().map(|p| p * p).sum::<C64>() / 2.0;
        assert_eq!(h, kin);
        let d = eom(m, &s, tau, Flow::Isospectral).unwrap();
        assert_eq!(d.q, s.p);
        assert!(d.p.iter().all(|v| *v == z));
        let lax = build_lax(m, &s, c(0.21, 0.13), tau).unwrap();
        let (_, pd) = m.cartan_diagonals(&s);
        assert_eq!(lax.l, Matrix::from_diag(&pd));
        assert_eq!(lax.m, Matrix::zeros(lax.dim()));
        let ctx = EllipticContext::new(tau).unwrap();
        for flow in [Flow::Isospectral, Flow::Isomonodromic] {
            let res = lax_residual_with(m, &s, c(0.21, 0.13), &ctx, flow, ResidualOptions::default()).unwrap();
            assert!(res < 1e-12);
        }
        let (a, b, cc) = lax_translation_residual(m, &s, c(0.21, 0.13), tau).unwrap();
        assert!(a == 0.0 && b < 1e-12 && cc < 1e-12, "{a} {b} {cc}");
    }
}

#[test]
fn a_vector_two_particles() {
    let g = c(0.9, 0.2);
    let tau = c(0.2, 1.1);
    let ctx = EllipticContext::new(tau).unwrap();
    let m = ModelSpec::a_vector(2, g).unwrap();
    let s = PhaseState::new(vec![c(0.1, 0.05), c(-0.23, 0.1)], vec![c(0.4, 0.0), c(-0.2, 0.3)]).unwrap();
    let u = s.q[0] - s.q[1];
    let want = (s.p[0] * s.p[0] + s.p[1] * s.p[1]) / 2.0 + g * g * ctx.wp(u, PeriodScale::Full, 0).unwrap();
    assert!(close(m.hamiltonian(&s, &ctx).unwrap(), want, 1e-14));
    let d = m.eom(&s, &ctx, Flow::Isospectral).unwrap();
    let h = 1e-5;
    let shift = |e: f64| {
        let mut t = s.clone();
        t.q[0] += e;
        m.hamiltonian(&t, &ctx).unwrap()
    };
    let fd = -(shift(h) - shift(-h)) / (2.0 * h);
    assert!(close(d.p[0], fd, 1e-7));
    assert!(close(d.p[0], -g * g * ctx.wp(u, PeriodScale::Full, 1).unwrap(), 1e-13));
}

/// `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q` against central differences of `H`.
#[test]
fn vector_field_matches_hamiltonian_gradient() {
    let mut r = rng(21);
    for m in sample_models() {
        let tau = random_tau(&mut r);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&m, tau, &mut r, 0.08);
        let d = m.eom(&s, &ctx, Flow::Isospectral).unwrap();
        let h = 1e-5;
        for j in 0..m.dim() {
            let dh = |which: usize| {
                let mut a = s.clone();
                let mut b = s.clone();
                if which == 0 {
                    a.q[j] += h;
                    b.q[j] -= h;
                } else {
                    a.p[j] += h;
                    b.p[j] -= h;
                }
                (m.hamiltonian(&a, &ctx).unwrap() - m.hamiltonian(&b, &ctx).unwrap()) / (2.0 * h)
            };
            assert!(close(d.p[j], -dh(0), 1e-7), "{:?} {j}", m.kind());
            assert!(close(d.q[j], dh(1), 1e-7), "{:?} {j}", m.kind());
        }
        let iso = m.eom(&s, &ctx, Flow::Isomonodromic).unwrap();
        let two_pi_i = c(0.0, 2.0 * std::f64::consts::PI);
        for (a, b) in iso.flatten().iter().zip(d.flatten()) {
            assert!(close(a * two_pi_i, b, 1e-14));
        }
    }
}

#[test]
fn spin_diagonal_is_stationary() {
    let mut r = rng(5);
    let m = ModelSpec::spin_sl(4).unwrap();
    let tau = random_tau(&mut r);
    let s = random_state(&m, tau, &mut r, 0.05);
    let d = eom(&m, &s, tau, Flow::Isospectral).unwrap();
    let Spin::Matrix(f) = d.spin else { panic!() };
    assert!(f.diag().iter().all(|v| v.norm() < 1e-12));
}

fn sweep(flow: Flow, seed: u64, count: usize) {
    let mut r = rng(seed);
    for m in sample_models() {
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let tau = random_tau(&mut r);
            let ctx = EllipticContext::new(tau).unwrap();
            let s = random_state(&m, tau, &mut r, 0.1);
            let z = random_z(&m, &ctx, &mut r, 0.1);
            worst = worst.max(lax_residual_with(&m, &s, z, &ctx, flow, ResidualOptions::default()).unwrap());
        }
        assert!(worst < 1e-6, "{:?} {flow:?} {worst:e}", m.kind());
    }
}

#[test]
fn isospectral_lax_equation() {
    sweep(Flow::Isospectral, 100, 5);
}

#[test]
fn isomonodromic_lax_equation() {
    sweep(Flow::Isomonodromic, 200, 5);
}

#[test]
fn flipped_commutator_is_detected() {
    let mut r = rng(7);
    let opts = ResidualOptions { commutator_sign: -1.0, ..Default::default() };
    for m in sample_models() {
        let tau = random_tau(&mut r);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&m, tau, &mut r, 0.1);
        let z = random_z(&m, &ctx, &mut r, 0.1);
        for flow in [Flow::Isospectral, Flow::Isomonodromic] {
            assert!(lax_residual_with(&m, &s, z, &ctx, flow, opts).unwrap() > 1e-3, "{:?}", m.kind());
        }
    }
}

#[test]
fn translation_relations() {
    let mut r = rng(300);
    for m in sample_models() {
        for _ in 0..5 {
            let tau = random_tau(&mut r);
            let ctx = EllipticContext::new(tau).unwrap();
            let s = random_state(&m, tau, &mut r, 0.1);
            let z = random_z(&m, &ctx, &mut r, 0.1);
            let (a, b, cc) = lax_translation_residual(&m, &s, z, tau).unwrap();
            let scale = build_lax(&m, &s, z, tau).unwrap().l.max_norm().max(1.0);
            assert!(a.max(b).max(cc) < 1e-10 * scale, "{:?} {a:e} {b:e} {cc:e}", m.kind());
        }
    }
}

#[test]
fn twisted_reduces_to_untwisted() {
    let mut r = rng(9);
    let z0 = c(0.0, 0.0);
    for l in 1..=3 {
        let (gm, gl, gs) = (small(&mut r, 1.0), small(&mut r, 1.0), small(&mut r, 1.0));
        let bc = ModelSpec::bc_short(l, gm, gl, gs).unwrap();
        let tw = ModelSpec::twisted_bc(l, gm, gl, z0, gs, z0).unwrap();
        let tau = random_tau(&mut r);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&tw, tau, &mut r, 0.05);
        let z = random_z(&bc, &ctx, &mut r, 0.1);
        let a = bc.lax(&s, z, &ctx).unwrap();
        let b = tw.lax(&s, z, &ctx).unwrap();
        assert!((&a.l - &b.l).max_norm() == 0.0 && (&a.m - &b.m).max_norm() == 0.0);
        assert!(close(bc.hamiltonian(&s, &ctx).unwrap(), tw.hamiltonian(&s, &ctx).unwrap(), 1e-14));
    }
}

#[test]
fn bc_diagonal_is_even() {
    let mut r = rng(13);
    let m = ModelSpec::twisted_bc(3, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.1), c(0.6, 0.0), c(0.4, -0.2)).unwrap();
    let tau = random_tau(&mut r);
    let ctx = EllipticContext::new(tau).unwrap();
    let s = random_state(&m, tau, &mut r, 0.05);
    let lax = m.lax(&s, c(0.17, 0.23), &ctx).unwrap();
    let idx = m.index();
    for (i, b) in idx.iter().enumerate() {
        let j = idx.iter().position(|x| *x == b.neg()).unwrap();
        assert!(close(lax.m[(i, i)], lax.m[(j, j)], 1e-12));
    }
}

#[test]
fn quadratic_trace_offset_is_state_independent() {
    let mut r = rng(17);
    let z = c(0.19, 0.27);
    let tau = c(0.1, 1.05);
    let ctx = EllipticContext::new(tau).unwrap();
    let mut models = sample_models();
    models.push(ModelSpec::simply_laced(build_root_system(Family::D, 4).unwrap(), c(0.6, 0.1)).unwrap());
    for m in models {
        let offsets: Vec<C64> = (0..5)
            .map(|_| {
                let mut s = random_state(&m, tau, &mut r, 0.05);
                if m.kind() == ModelKind::SimplyLacedRoot {
                    let mean: C64 = s.p.iter().sum::<C64>() / s.p.len() as f64;
                    if m.root_system().unwrap().family() == Family::A {
                        s.p.iter_mut().for_each(|p| *p -= mean);
                    }
                }
                let off = m.quadratic_trace_offset(&s, z, &ctx).unwrap();
                match &s.spin {
                    Spin::None => off,
                    // spin models: the offset is ℘(z) times half the quadratic Casimir
                    spin => {
                        let cas: C64 = match spin {
                            Spin::Matrix(f) => (f * f).trace(),
                            Spin::Roots(f) => {
                                let rs = m.root_system().unwrap();
                                rs.roots()
                                    .iter()
                                    .enumerate()
                                    .map(|(i, a)| f[i] * f[rs.index_of(&a.neg()).unwrap()])
                                    .sum()
                            }
                            Spin::None => unreachable!(),
                        };
                        off - 0.5 * ctx.wp(z, PeriodScale::Full, 0).unwrap() * cas
                    }
                }
            })
            .collect();
        for o in &offsets[1..] {
            assert!((o - offsets[0]).norm() < 1e-8 * (1.0 + offsets[0].norm()), "{:?}", m.kind());
        }
    }
}

#[test]
fn weyl_relabeling_preserves_spectrum() {
    let mut r = rng(23);
    let tau = c(0.05, 1.1);
    let ctx = EllipticContext::new(tau).unwrap();
    let models = [
        ModelSpec::simply_laced(build_root_system(Family::A, 2).unwrap(), c(0.8, 0.0)).unwrap(),
        ModelSpec::bc_short(2, c(0.7, 0.0), c(0.5, 0.0), c(0.6, 0.0)).unwrap(),
        ModelSpec::twisted_bc(2, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.0), c(0.6, 0.0), c(0.4, 0.0)).unwrap(),
    ];
    for m in models {
        let s = random_state(&m, tau, &mut r, 0.08);
        let z = c(0.21, 0.31);
        let ev = m.lax(&s, z, &ctx).unwrap().l.eigenvalues().unwrap();
        for a in m.root_system().unwrap().roots() {
            let refl = |v: &[C64]| -> Vec<C64> {
                let k = 2.0 * a.pair(v) / a.norm2() as f64;
                v.iter().zip(a.coords()).map(|(x, ac)| x - k * ac).collect()
            };
            let t = PhaseState::new(refl(&s.q), refl(&s.p)).unwrap();
            let ev2 = m.lax(&t, z, &ctx).unwrap().l.eigenvalues().unwrap();
            assert!(multiset_distance(&ev, &ev2) < 1e-8, "{:?}", m.kind());
        }
    }
}

#[test]
fn minimal_orbit_spin() {
    let z = [c(0.0, 0.0); 3];
    assert_eq!(spin_minimal_orbit(&z, &z, c(1.0, 0.0)).unwrap(), Matrix::zeros(3));
    let mut r = rng(29);
    let g = c(0.8, 0.1);
    let a: Vec<C64> = (0..3).map(|_| small(&mut r, 1.0) + 1.5).collect();
    let b: Vec<C64> = (0..3).map(|_| small(&mut r, 1.0)).collect();
    let f = spin_minimal_orbit(&a, &b, g).unwrap();
    assert!(f.diag().iter().all(|d| *d == c(0.0, 0.0)));
    let mut full = f.clone();
    for j in 0..3 {
        full[(j, j)] = c(0.0, 1.0) * g * b[j] * a[j];
    }
    // rank one: every 2×2 minor vanishes
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for (k, l) in [(0, 1), (0, 2), (1, 2)] {
            let minor = full[(i, k)] * full[(j, l)] - full[(i, l)] * full[(j, k)];
            assert!(minor.norm() < 1e-14);
        }
    }
    // with b_j a_j = 1 the spin Hamiltonian equals the spinless one
    let b: Vec<C64> = a.iter().map(|x| 1.0 / x).collect();
    let f = spin_minimal_orbit(&a, &b, g).unwrap();
    let tau = c(0.1, 1.0);
    let spin = ModelSpec::spin_sl(3).unwrap();
    let plain = ModelSpec::a_vector(3, g).unwrap();
    let s = random_state(&plain, tau, &mut r, 0.05);
    let t = PhaseState::with_spin_matrix(s.q.clone(), s.p.clone(), f).unwrap();
    assert!(close(hamiltonian(&spin, &t, tau).unwrap(), hamiltonian(&plain, &s, tau).unwrap(), 1e-12));
}

#[test]
fn invalid_inputs() {
    let m = ModelSpec::a_vector(2, c(1.0, 0.0)).unwrap();
    let tau = c(0.0, 1.0);
    let s = PhaseState::new(vec![c(0.1, 0.0), c(0.1, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
    assert!(matches!(hamiltonian(&m, &s, tau), Err(Error::Pole { .. })));
    let bad = PhaseState::new(vec![c(0.1, 0.0)], vec![c(0.0, 0.0)]).unwrap();
    assert!(matches!(hamiltonian(&m, &bad, tau), Err(Error::Model(_))));
    let ok = PhaseState::new(vec![c(0.1, 0.0), c(0.3, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
    assert!(matches!(build_lax(&m, &ok, c(1.0, 0.0), tau), Err(Error::Singular { .. })));
    let bc = ModelSpec::bc_short(2, c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap();
    let s2 = PhaseState::new(vec![c(0.1, 0.0), c(0.3, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
    assert!(matches!(build_lax(&bc, &s2, c(0.5, 0.0), tau), Err(Error::Singular { .. })));
    let mut f = Matrix::zeros(2);
    f[(0, 0)] = c(1.0, 0.0);
    assert!(PhaseState::with_spin_matrix(vec![c(0.0, 0.0); 2], vec![c(0.0, 0.0); 2], f).is_err());
    assert!(ModelSpec::spin_simply_laced(build_root_system(Family::D, 4).unwrap()).is_err());
    assert!(ModelSpec::simply_laced(build_root_system(Family::BC, 2).unwrap(), c(1.0, 0.0)).is_err());
}

#[test]
fn lax_dimensions() {
    assert_eq!(ModelSpec::a_vector(4, c(1.0, 0.0)).unwrap().lax_dim(), 4);
    assert_eq!(ModelSpec::bc_short(3, c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap().lax_dim(), 6);
    let d4 = build_root_system(Family::D, 4).unwrap();
    assert_eq!(ModelSpec::simply_laced(d4, c(1.0, 0.0)).unwrap().lax_dim(), 24);
    let a3 = build_root_system(Family::A, 3).unwrap();
    assert_eq!(ModelSpec::spin_simply_laced(a3).unwrap().lax_dim(), 4);
    assert_eq!(ModelKind::from_name("twisted-bc"), Some(ModelKind::TwistedBcShort));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn a_vector_hamiltonian_is_permutation_symmetric(
        seed in 0u64..1000, perm in Just(vec![2usize, 0, 1]).prop_shuffle()
    ) {
        let m = ModelSpec::a_vector(3, c(0.6, 0.3)).unwrap();
        let tau = c(0.1, 1.0);
        let mut r = rng(seed);
        let s = random_state(&m, tau, &mut r, 0.02);
        let t = PhaseState::new(perm.iter().map(|&i| s.q[i]).collect(), perm.iter().map(|&i| s.p[i]).collect()).unwrap();
        let a = hamiltonian(&m, &s, tau).unwrap();
        let b = hamiltonian(&m, &t, tau).unwrap();
        prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn renormalization_is_quadratic(k in 0.1f64..3.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let base = renormalize(&Couplings::Bc { g_m: c(0.0, 0.0), g_l: c(a, 0.0), g_s: c(b, 0.0) });
        let scaled = renormalize(&Couplings::Bc { g_m: c(0.0, 0.0), g_l: c(k * a, 0.0), g_s: c(k * b, 0.0) });
        let (Renormalized::Bc { gs_sq: x }, Renormalized::Bc { gs_sq: y }) = (base, scaled) else { unreachable!() };
        prop_assert!((y - k * k * x).norm() < 1e-12);
    }
}
