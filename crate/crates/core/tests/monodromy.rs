mod common;

use common::*;
use isomon_core::dynamics::{OdeStats, PathSpec};
use isomon_core::elliptic::EllipticContext;
use isomon_core::linalg::{multiset_distance, Matrix};
use isomon_core::models::{Flow, ModelSpec, PhaseState};
use isomon_core::monodromy::*;
use isomon_core::rootsys::{build_root_system, Family};
use isomon_core::{Error, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn two_body() -> (ModelSpec, PhaseState) {
    let m = ModelSpec::a_vector(2, c(1.0, 0.0)).unwrap();
    let s = PhaseState::new(vec![c(0.1, 0.02), c(-0.2, 0.05)], vec![c(0.3, 0.1), c(-0.1, 0.0)]).unwrap();
    (m, s)
}

fn default_tau_path() -> PathSpec {
    PathSpec::Polyline(vec![c(0.0, 1.0), c(0.05, 1.1)])
}

fn root_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::simply_laced(build_root_system(Family::A, 1).unwrap(), c(0.8, -0.1)).unwrap(),
        ModelSpec::bc_short(1, c(0.7, 0.0), c(0.5, 0.1), c(0.6, 0.0)).unwrap(),
        ModelSpec::twisted_bc(1, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.1), c(0.6, 0.0), c(0.4, -0.2)).unwrap(),
    ]
}

/// Composite Simpson rule for `∫ Tr L dz` along a polyline, independent of
/// the library quadrature.
fn simpson_trace(m: &ModelSpec, s: &PhaseState, ctx: &EllipticContext, vertices: &[C64]) -> C64 {
    let mut acc = c(0.0, 0.0);
    for w in vertices.windows(2) {
        let n = 2000;
        let h = 1.0 / n as f64;
        for k in 0..=n {
            let wt = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let z = w[0] + (w[1] - w[0]) * (k as f64 * h);
            acc += m.lax(s, z, ctx).unwrap().l.trace() * (w[1] - w[0]) * (wt * h / 3.0);
        }
    }
    acc
}

fn eig_gap(a: &Matrix, b: &Matrix) -> f64 {
    multiset_distance(&a.eigenvalues().unwrap(), &b.eigenvalues().unwrap())
}

#[test]
fn liouville_determinant_along_paths() {
    let mut r = rng(71);
    let cfg = MonodromyConfig::default();
    for m in sample_models().into_iter().chain(root_models()) {
        let tau = c(0.1, 1.05);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&m, tau, &mut r, 0.15);
        let verts = [c(0.21, 0.13), c(0.71, 0.33), c(0.38, 0.4)];
        let path = PathSpec::Polyline(verts.to_vec());
        let mut stats = OdeStats::default();
        let y0 = Matrix::identity(m.lax_dim());
        let y = transport(&m, &s, &ctx, &Contour::from_path(&path), &y0, &cfg, &mut stats).unwrap();
        let want = simpson_trace(&m, &s, &ctx, &verts).exp();
        let err = (y.det() / want - 1.0).norm();
        assert!(err < 1e-8, "{:?} {err:e}", m.kind());
        let lib = trace_integral(&m, &s, &ctx, &Contour::from_path(&path)).unwrap();
        assert!((lib.exp() / want - 1.0).norm() < 1e-10);
    }
}

#[test]
fn null_loop_returns_start() {
    let (m, s) = two_body();
    let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
    let go = Contour::from_path(&PathSpec::Polyline(vec![c(0.2, 0.3), c(0.7, 0.1), c(0.4, 0.6)]));
    let there_and_back = go.clone().then(go.reversed());
    let y0 = Matrix::from_row_major(vec![c(1.0, 0.5), c(0.2, 0.0), c(-0.3, 0.1), c(0.9, -0.2)]).unwrap();
    let y = transport(&m, &s, &ctx, &there_and_back, &y0, &MonodromyConfig::default(), &mut OdeStats::default())
        .unwrap();
    assert!((&y - &y0).max_norm() < 1e-9);
}

#[test]
fn zero_couplings_decouple() {
    let m = ModelSpec::a_vector(3, c(0.0, 0.0)).unwrap();
    let p = vec![c(0.3, 0.1), c(-0.4, 0.2), c(0.1, -0.3)];
    let s = PhaseState::new(vec![c(0.1, 0.0), c(0.3, 0.1), c(-0.2, 0.05)], p.clone()).unwrap();
    let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
    let cfg = MonodromyConfig::default();
    let z0 = c(0.23, 0.31);
    let y = transport(&m, &s, &ctx, &Contour::line(z0, z0 + 1.0), &Matrix::identity(3), &cfg, &mut OdeStats::default())
        .unwrap();
    let exp_p = Matrix::from_diag(&p.iter().map(|v| v.exp()).collect::<Vec<_>>());
    assert!((&y - &exp_p).max_norm() < 1e-12);
    let data = monodromy_data(&m, &s, &ctx, z0, &cfg).unwrap();
    assert!((&data.gamma_alpha - &exp_p).max_norm() < 1e-12);
    assert_eq!(data.gamma_local.len(), 1);
    assert!((&data.gamma_local[0] - &Matrix::identity(3)).max_norm() < 1e-12);

    let rep = isomonodromy_drift(&m, &s, &default_tau_path(), z0, &cfg).unwrap();
    assert!(rep.max_drift < 1e-10, "{:?}", rep.drifts);
    for cp in &rep.checkpoints {
        assert_eq!(cp.state.p, p);
    }
}

#[test]
fn two_body_local_monodromy_from_residue() {
    // x(u, z) has residue −1 at z = 0, so Res L = −ig(J − I) off the diagonal
    // and the loop matrix is conjugate to exp(2πi Res)
    for (l, g) in [(2usize, c(1.0, 0.0)), (2, c(0.3, 0.1)), (3, c(0.25, -0.05))] {
        let m = ModelSpec::a_vector(l, g).unwrap();
        let mut r = rng(l as u64);
        let s = random_state(&m, c(0.0, 1.0), &mut r, 0.15);
        let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
        let data = monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &MonodromyConfig::default()).unwrap();
        let mut res = Matrix::zeros(l);
        for j in 0..l {
            for k in 0..l {
                if j != k {
                    res[(j, k)] = -c(0.0, 1.0) * g;
                }
            }
        }
        let want: Vec<C64> = res.eigenvalues().unwrap().iter().map(|e| (c(0.0, 2.0 * PI) * e).exp()).collect();
        let got = data.gamma_local[0].eigenvalues().unwrap();
        let scale = want.iter().map(|v| v.norm()).fold(1.0, f64::max);
        assert!(multiset_distance(&got, &want) / scale < 1e-8, "{got:?} {want:?}");
    }
}

#[test]
fn base_point_independence() {
    let mut r = rng(73);
    let cfg = MonodromyConfig::default();
    for m in sample_models().into_iter().chain(root_models()).filter(|m| m.lax_dim() <= 4) {
        let tau = c(0.1, 1.05);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&m, tau, &mut r, 0.15);
        let a = monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &cfg).unwrap();
        let b = monodromy_data(&m, &s, &ctx, c(0.36, 0.17), &cfg).unwrap();
        let ia = SpectralInvariants::of(&a).unwrap();
        let ib = SpectralInvariants::of(&b).unwrap();
        for (name, d) in ib.drift_from(&ia) {
            assert!(d < 1e-7, "{:?} {name} {d:e}", m.kind());
        }
        assert!(a.liouville_residual < 1e-8 && b.liouville_residual < 1e-8, "{:?} {:e} {:e}", m.kind(), a.liouville_residual, b.liouville_residual);
    }
}

#[test]
fn loop_radius_independence() {
    let mut r = rng(79);
    for m in root_models().into_iter().chain([two_body().0]) {
        let tau = c(0.0, 1.0);
        let ctx = EllipticContext::new(tau).unwrap();
        let s = random_state(&m, tau, &mut r, 0.15);
        let small_loops = MonodromyConfig { loop_r: 0.02, ..Default::default() };
        let a = monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &MonodromyConfig::default()).unwrap();
        let b = monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &small_loops).unwrap();
        for (ga, gb) in a.gamma_local.iter().zip(&b.gamma_local) {
            let scale = ga.eigenvalues().unwrap().iter().map(|v| v.norm()).fold(1.0, f64::max);
            assert!(eig_gap(ga, gb) / scale < 1e-7);
        }
    }
}

#[test]
fn isomonodromic_drift_and_negative_control() {
    let (m, s) = two_body();
    let cfg = MonodromyConfig::default();
    let z0 = c(0.23, 0.31);
    let good = isomonodromy_drift(&m, &s, &default_tau_path(), z0, &cfg).unwrap();
    assert_eq!(good.checkpoints.len(), 5);
    assert!(good.max_drift < 1e-5, "{:?}", good.drifts);
    let bad = drift_with_flow(&m, &s, &default_tau_path(), z0, Flow::Isospectral, &cfg).unwrap();
    assert!(bad.max_drift > 1e-3);
    // the base point keeps its lattice coordinates
    let last = good.checkpoints.last().unwrap();
    let (a, b) = lattice_coords(last.z0, last.tau);
    assert!((a - 0.23).abs() < 1e-12 && (b - 0.31).abs() < 1e-12);
}

#[test]
fn isomonodromy_for_every_family() {
    let mut r = rng(83);
    let cfg = MonodromyConfig { checkpoints: 3, ..Default::default() };
    let models = vec![
        ModelSpec::a_vector(2, c(0.7, 0.2)).unwrap(),
        ModelSpec::simply_laced(build_root_system(Family::A, 1).unwrap(), c(0.8, -0.1)).unwrap(),
        ModelSpec::bc_short(1, c(0.7, 0.0), c(0.5, 0.1), c(0.6, 0.0)).unwrap(),
        ModelSpec::twisted_bc(1, c(0.7, 0.0), c(0.5, 0.0), c(0.3, 0.1), c(0.6, 0.0), c(0.4, -0.2)).unwrap(),
        ModelSpec::spin_sl(2).unwrap(),
        ModelSpec::spin_simply_laced(build_root_system(Family::A, 1).unwrap()).unwrap(),
    ];
    for m in models {
        let s = random_state(&m, c(0.0, 1.0), &mut r, 0.15);
        let rep = isomonodromy_drift(&m, &s, &default_tau_path(), c(0.23, 0.31), &cfg).unwrap();
        assert!(rep.max_drift < 1e-5, "{:?} {:?}", m.kind(), rep.drifts);
        let ctl = drift_with_flow(&m, &s, &default_tau_path(), c(0.23, 0.31), Flow::Isospectral, &cfg).unwrap();
        assert!(ctl.max_drift > 1e-3, "{:?}", m.kind());
    }
}

#[test]
fn census_finds_the_half_periods() {
    let mut r = rng(89);
    let tau = c(0.1, 1.05);
    let ctx = EllipticContext::new(tau).unwrap();
    let want = [c(0.0, 0.0), c(0.5, 0.0), 0.5 * tau, 0.5 * (1.0 + tau)];
    for m in root_models() {
        let s = random_state(&m, tau, &mut r, 0.15);
        let poles = singular_census(&m, &s, &ctx, &CensusConfig::default()).unwrap();
        assert_eq!(poles.len(), 4, "{:?}", m.kind());
        for w in want {
            assert!(poles.iter().any(|p| (p.location - w).norm() < 1e-8), "{:?} {w}", m.kind());
        }
    }
    let (m, s) = two_body();
    let poles = singular_census(&m, &s, &ctx, &CensusConfig::default()).unwrap();
    assert_eq!(poles.len(), 1);
    assert!(poles[0].location.norm() < 1e-8);
}

#[test]
fn detour_passes_on_the_left() {
    let (m, s) = two_body();
    let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
    let pts = m.singular_points(&ctx);
    let seg = deformed_segment(c(-0.3, 0.0), c(0.3, 0.0), &pts, ctx.tau(), 1e-2).unwrap();
    assert_eq!(seg.pieces.len(), 3);
    match seg.pieces[1] {
        Piece::Arc { radius, sweep, .. } => {
            assert_eq!(radius, 1e-2);
            assert!((sweep + PI).abs() < 1e-12);
        }
        _ => panic!("expected a detour"),
    }
    assert!(seg.pieces[1].point(0.5).im > 0.0);
    // same homotopy class as a path well above the pole
    let above = Contour::from_path(&PathSpec::Polyline(vec![c(-0.3, 0.0), c(-0.3, 0.2), c(0.3, 0.2), c(0.3, 0.0)]));
    let cfg = MonodromyConfig::default();
    let id = Matrix::identity(2);
    let a = transport(&m, &s, &ctx, &seg, &id, &cfg, &mut OdeStats::default()).unwrap();
    let b = transport(&m, &s, &ctx, &above, &id, &cfg, &mut OdeStats::default()).unwrap();
    assert!((&a - &b).max_norm() < 1e-8 * a.max_norm());
    // a pole just above the segment is passed above, as by the straight path
    let low = deformed_segment(c(-0.3, -0.004), c(0.3, -0.004), &pts, ctx.tau(), 1e-2).unwrap();
    assert!(low.pieces[1].point(0.5).im < 0.0);
    let below =
        Contour::from_path(&PathSpec::Polyline(vec![c(-0.3, -0.004), c(-0.3, -0.2), c(0.3, -0.2), c(0.3, -0.004)]));
    let a = transport(&m, &s, &ctx, &low, &id, &cfg, &mut OdeStats::default()).unwrap();
    let b = transport(&m, &s, &ctx, &below, &id, &cfg, &mut OdeStats::default()).unwrap();
    assert!((&a - &b).max_norm() < 1e-8 * a.max_norm());
}

#[test]
fn paths_through_singular_points_are_rejected() {
    let (m, s) = two_body();
    let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
    let cfg = MonodromyConfig::default();
    let through = Contour::line(c(-0.3, 0.0), c(0.3, 0.0));
    let err = transport(&m, &s, &ctx, &through, &Matrix::identity(2), &cfg, &mut OdeStats::default());
    assert!(matches!(err, Err(Error::Singular { .. })));
    assert!(monodromy_data(&m, &s, &ctx, c(0.0, 0.03), &cfg).is_err());
    let wide = MonodromyConfig { loop_r: 0.6, ..Default::default() };
    assert!(monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &wide).is_err());
    assert!(matches!(
        transport(&m, &s, &ctx, &Contour::line(c(0.2, 0.3), c(0.4, 0.3)), &Matrix::identity(3), &cfg, &mut OdeStats::default()),
        Err(Error::Model(_))
    ));
}

#[test]
fn invariants_ignore_simultaneous_conjugation() {
    let (m, s) = two_body();
    let ctx = EllipticContext::new(c(0.0, 1.0)).unwrap();
    let data = monodromy_data(&m, &s, &ctx, c(0.23, 0.31), &MonodromyConfig::default()).unwrap();
    let g = Matrix::from_row_major(vec![c(1.0, 0.2), c(0.5, 0.0), c(-0.3, 0.4), c(2.0, -0.1)]).unwrap();
    let gi = g.inverse().unwrap();
    let conj = |x: &Matrix| &(&gi * x) * &g;
    let moved = MonodromyData {
        gamma_local: data.gamma_local.iter().map(conj).collect(),
        gamma_alpha: conj(&data.gamma_alpha),
        gamma_beta: conj(&data.gamma_beta),
        ..data.clone()
    };
    let a = SpectralInvariants::of(&data).unwrap();
    let b = SpectralInvariants::of(&moved).unwrap();
    for (name, d) in b.drift_from(&a) {
        assert!(d < 1e-9, "{name} {d:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_is_exact_on_polynomials(n in 2usize..24, k in 0u32..8) {
        let deg = (2 * n as u32 - 1).min(k * 3);
        let (x, w) = gauss_legendre(n);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
        let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
        prop_assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn deformed_segments_keep_clearance(
        ax in -0.8f64..0.8, ay in -0.8f64..0.8, bx in -0.8f64..0.8, by in -0.8f64..0.8,
    ) {
        let tau = c(0.1, 1.05);
        let ctx = EllipticContext::new(tau).unwrap();
        let pts = ctx.half_periods().to_vec();
        let (a, b) = (c(ax, ay), c(bx, by));
        prop_assume!((a - b).norm() > 0.05);
        match deformed_segment(a, b, &pts, tau, 1e-2) {
            Ok(seg) => {
                prop_assert!((seg.start().unwrap() - a).norm() < 1e-12);
                prop_assert!((seg.end().unwrap() - b).norm() < 1e-12);
                for w in seg.pieces.windows(2) {
                    prop_assert!((w[0].point(1.0) - w[1].point(0.0)).norm() < 1e-12);
                }
                prop_assert!(seg.clearance(&pts, tau).0 >= 1e-2 * (1.0 - 1e-9));
            }
            Err(Error::Singular { distance, .. }) => prop_assert!(distance < 1e-2),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}
