mod common;

use std::sync::Arc;

use pat_core::fem::{project_analytic, MassMode, NodalField};
use pat_core::geometry::generate_disk_mesh;
use pat_core::operators::*;
use pat_core::phantoms::quintic_step;
use pat_core::scalar::Point2;
use pat_core::trace::BoundaryTrace;
use pat_core::wavesolver::TimeGrid;
use proptest::prelude::*;

fn setup(h: f64, t_final: f64, speed: impl Fn(Point2<f64>) -> f64) -> OperatorSetup<f64> {
    let mesh = Arc::new(generate_disk_mesh(1.0, h).unwrap());
    OperatorSetup::with_cfl(mesh, speed, t_final, 15.0).unwrap()
}

fn nontrapping(p: Point2<f64>) -> f64 {
    pat_core::phantoms::SpeedField::nontrapping(1.0).value(p)
}

/// A few smooth bumps inside r < 0.7 with pseudo-random centres and weights.
fn bumps(seed: u64) -> impl Fn(Point2<f64>) -> f64 {
    let mut x = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    let mut next = move || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    let parts: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let (r, a) = (0.45 * next(), 6.283 * next());
            (r * a.cos(), r * a.sin(), 0.1 + 0.1 * next(), 2.0 * next() - 1.0)
        })
        .collect();
    move |p: Point2<f64>| {
        let cut = quintic_step((0.85 - p.norm()) / 0.15);
        parts.iter().map(|&(cx, cy, s, w)| w * (-((p.x - cx).powi(2) + (p.y - cy).powi(2)) / (2.0 * s * s)).exp()).sum::<f64>() * cut
    }
}

fn smooth_trace(s: &OperatorSetup<f64>, seed: u64) -> BoundaryTrace<f64> {
    let t_final = s.grid.t_final;
    let ph = seed as f64 * 0.7;
    BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |t, th| {
        (std::f64::consts::PI * t / t_final).sin().powi(2) * ((2.0 * th + ph).cos() + 0.5 * (th - ph).sin() + 0.3 * (3.0 * t + th).cos())
    })
}

fn adjoint_mismatch(s: &OperatorSetup<f64>, seed: u64) -> f64 {
    let f = project_analytic(bumps(seed), s.space()).unwrap();
    let h = smooth_trace(s, seed);
    let lf = forward_l(&f, s).unwrap();
    let lsh = adjoint_l(&h, s).unwrap();
    let lhs = l2_sigma_inner(&lf, &h).unwrap();
    let rhs = s.system.stiffness.bilinear(&f.values, &lsh.values);
    (lhs - rhs).abs() / (l2_sigma_norm(&lf).unwrap() * l2_sigma_norm(&h).unwrap())
}

#[test]
fn adjoint_identity_on_coarse_setup() {
    // h = 0.15 and N = 80 steps of h/15.
    let s = setup(0.15, 0.8, nontrapping);
    let c_max = s.system.c_max;
    let grid = TimeGrid::new(0.8, 80).unwrap();
    let s = OperatorSetup::new(s.system.space.mesh.clone(), nontrapping, grid, MassMode::Lumped).unwrap();
    assert!(s.grid.dt * c_max <= 0.15 / 10.0);
    for seed in 1..=3 {
        let m = adjoint_mismatch(&s, seed);
        eprintln!("adjoint mismatch seed {seed}: {m:e}");
        assert!(m <= 2e-2, "seed {seed}: {m}");
    }
}

#[test]
fn adjoint_mismatch_shrinks_under_refinement() {
    let mut prev = f64::INFINITY;
    for &h in &[0.2, 0.14, 0.1] {
        let m = adjoint_mismatch(&setup(h, 0.8, nontrapping), 7);
        eprintln!("h = {h}: mismatch {m:e}");
        assert!(m < prev, "mismatch {m} at h = {h} did not shrink from {prev}");
        prev = m;
    }
}

#[test]
fn forward_operator_basics() {
    let s = setup(0.25, 1.0, nontrapping);
    let zero = s.space().zero_field();
    assert!(forward_l(&zero, &s).unwrap().values.iter().all(|&v| v == 0.0));
    let f1 = project_analytic(bumps(3), s.space()).unwrap();
    let f2 = project_analytic(bumps(4), s.space()).unwrap();
    let a = forward_l(&f1, &s).unwrap();
    let b = forward_l(&f2, &s).unwrap();
    let c = forward_l(&f1.scaled(0.3).add_scaled(1.0, &f2), &s).unwrap();
    let combo = a.scaled(0.3).add_scaled(1.0, &b).unwrap();
    let err = l2_sigma_norm(&c.add_scaled(-1.0, &combo).unwrap()).unwrap() / l2_sigma_norm(&combo).unwrap();
    assert!(err <= 1e-10, "{err:e}");
    // Nonzero boundary values are reported, not zeroed.
    let bad = project_analytic(|p| 1.0 - 0.5 * p.norm(), s.space()).unwrap();
    assert!(matches!(forward_l(&bad, &s), Err(pat_core::PatError::Precondition(_))));
    assert!(forward_l(&NodalField::new(vec![0.0; 5]), &s).is_err());
}

#[test]
fn forward_trace_matches_radial_reference() {
    let g = |r: f64| (-(r * r) / (2.0 * 0.15f64.powi(2))).exp() * quintic_step((0.9 - r) / 0.1);
    let s = setup(0.1, 2.0, |_| 1.0);
    let f = project_analytic(|p: Point2<f64>| g(p.norm()), s.space()).unwrap();
    let lf = forward_l(&f, &s).unwrap();
    let fd = common::fd_oracle::radial_trace(g, 1.0, 2.0, s.grid.n_steps, 0.001);
    let reference = BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |_, _| 0.0);
    let mut reference = reference;
    for n in 0..=s.grid.n_steps {
        reference.step_mut(n).iter_mut().for_each(|v| *v = fd[n]);
    }
    let err = l2_sigma_norm(&lf.add_scaled(-1.0, &reference).unwrap()).unwrap() / l2_sigma_norm(&reference).unwrap();
    assert!(err <= 0.05, "relative L2(Σ) error {err}");
}

#[test]
fn adjoint_basics() {
    let s = setup(0.25, 1.0, nontrapping);
    assert!(adjoint_l(&s.zero_trace(), &s).unwrap().values.iter().all(|&v| v == 0.0));
    let h1 = smooth_trace(&s, 1);
    let h2 = smooth_trace(&s, 2);
    let a = adjoint_l(&h1, &s).unwrap();
    let b = adjoint_l(&h2, &s).unwrap();
    let c = adjoint_l(&h1.scaled(-2.0).add_scaled(1.0, &h2).unwrap(), &s).unwrap();
    let combo = a.scaled(-2.0).add_scaled(1.0, &b);
    let d = c.add_scaled(-1.0, &combo);
    let k = &s.system.stiffness;
    let err = (k.bilinear(&d.values, &d.values) / k.bilinear(&combo.values, &combo.values)).sqrt();
    assert!(err <= 1e-10, "{err:e}");
    // The result lies in H₀¹.
    assert!(s.space().boundary_dofs.iter().all(|&i| a.values[i] == 0.0));
    let other = setup(0.25, 0.5, nontrapping);
    assert!(adjoint_l(&h1, &other).is_err());
}

#[test]
fn normal_operator_is_continuous() {
    let s = setup(0.25, 1.0, nontrapping);
    let f = project_analytic(bumps(9), s.space()).unwrap();
    let df = project_analytic(bumps(10), s.space()).unwrap();
    let eps = 1e-8 * f.max_abs() / df.max_abs();
    let g0 = adjoint_l(&forward_l(&f, &s).unwrap(), &s).unwrap();
    let g1 = adjoint_l(&forward_l(&f.add_scaled(eps, &df), &s).unwrap(), &s).unwrap();
    let gd = adjoint_l(&forward_l(&df, &s).unwrap(), &s).unwrap();
    let diff = g1.add_scaled(-1.0, &g0);
    let k = &s.system.stiffness;
    let ratio = (k.bilinear(&diff.values, &diff.values)).sqrt() / (eps * k.bilinear(&gd.values, &gd.values).sqrt());
    assert!((ratio - 1.0).abs() < 1e-4, "{ratio}");
}

#[test]
fn sigma_inner_product() {
    let s = setup(0.2, 1.3, |_| 1.0);
    let t = s.grid.t_final;
    let one = BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |_, _| 1.0);
    let measure = l2_sigma_inner(&one, &one).unwrap();
    assert!((measure - t * std::f64::consts::TAU).abs() <= 1e-6 * measure);
    let c = BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |_, th| th.cos());
    let sn = BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |_, th| th.sin());
    assert!(l2_sigma_inner(&c, &sn).unwrap().abs() <= 1e-8);
    let other = setup(0.3, 1.3, |_| 1.0);
    assert!(l2_sigma_inner(&one, &other.zero_trace()).is_err());
}

#[test]
fn noise_has_exact_norm() {
    let s = setup(0.3, 1.0, |_| 1.0);
    let m = smooth_trace(&s, 5);
    assert_eq!(add_noise(&m, 0.0, 1).unwrap(), m);
    let a = add_noise(&m, 0.05, 1).unwrap();
    let b = add_noise(&m, 0.05, 2).unwrap();
    let again = add_noise(&m, 0.05, 1).unwrap();
    assert_eq!(a, again);
    assert_ne!(a, b);
    for x in [&a, &b] {
        let d = l2_sigma_norm(&x.add_scaled(-1.0, &m).unwrap()).unwrap();
        assert!((d - 0.05).abs() <= 1e-12 * 0.05, "{d}");
    }
    assert!(add_noise(&m, -1.0, 1).is_err());
}

#[test]
fn resampling() {
    let src = setup(0.2, 1.0, |_| 1.0);
    let tr = smooth_trace(&src, 3);
    let same = resample_trace(&tr, &src.system.boundary, &src.grid).unwrap();
    for (a, b) in same.values.iter().zip(&tr.values) {
        assert!((a - b).abs() <= 1e-15);
    }
    let dst_mesh = generate_disk_mesh(1.0, 0.13).unwrap();
    let dst_b = pat_core::geometry::extract_boundary(&dst_mesh);
    let dst_g = TimeGrid::new(0.9, 77).unwrap();
    let ones = BoundaryTrace::from_fn(&src.system.boundary, src.grid.n_steps, src.grid.dt, |_, _| 2.5);
    let r = resample_trace(&ones, &dst_b, &dst_g).unwrap();
    assert!(r.values.iter().all(|&v| v == 2.5));
    assert!(resample_trace(&tr, &dst_b, &TimeGrid::new(1.5, 100).unwrap()).is_err());
    let mut wrong = dst_b.clone();
    wrong.radius = 2.0;
    assert!(resample_trace(&tr, &wrong, &dst_g).is_err());
}

#[test]
fn resampling_converges_at_second_order() {
    let f = |t: f64, th: f64| (2.0 * t).sin() * (3.0 * th).cos() + (t * th.sin()).cos();
    let boundary = |n: usize| {
        let d = std::f64::consts::TAU / n as f64;
        let angles: Vec<f64> = (0..n).map(|k| k as f64 * d).collect();
        pat_core::geometry::BoundaryGrid {
            node_positions: angles.iter().map(|&a| Point2::new(a.cos(), a.sin())).collect(),
            arc_lengths: angles.clone(),
            segments: (0..n).map(|k| [k, (k + 1) % n]).collect(),
            angles,
            radius: 1.0,
        }
    };
    let mut errs = Vec::new();
    for &n in &[16usize, 32, 64] {
        let (b, g) = (boundary(n), TimeGrid::new(1.0, n).unwrap());
        let (b2, g2) = (boundary(2 * n), TimeGrid::new(1.0, 2 * n).unwrap());
        let tr = BoundaryTrace::from_fn(&b, n, g.dt, f);
        let fine = resample_trace(&tr, &b2, &g2).unwrap();
        let exact = BoundaryTrace::from_fn(&b2, 2 * n, g2.dt, f);
        errs.push(fine.values.iter().zip(&exact.values).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max));
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "order {order} from {errs:?}");
    }
}

#[test]
fn transfer_between_meshes() {
    let a = pat_core::fem::FeSpace::new(Arc::new(generate_disk_mesh(1.0, 0.1).unwrap()));
    let b = pat_core::fem::FeSpace::new(Arc::new(generate_disk_mesh(1.0, 0.17).unwrap()));
    let f = bumps(2);
    let fa = project_analytic(&f, &a).unwrap();
    let fb = transfer_field(&fa, &a, &b).unwrap();
    let direct = project_analytic(&f, &b).unwrap();
    let err = fb.add_scaled(-1.0, &direct).max_abs() / direct.max_abs();
    // P2 interpolation error of bumps as narrow as σ = 0.1 on an h = 0.1 mesh.
    assert!(err <= 2e-2, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn cauchy_schwarz(seed_a in 0u64..1000, seed_b in 0u64..1000, scale in -3.0f64..3.0) {
        let b = {
            let n = 11;
            let d = std::f64::consts::TAU / n as f64;
            let angles: Vec<f64> = (0..n).map(|k| k as f64 * d).collect();
            pat_core::geometry::BoundaryGrid {
                node_positions: angles.iter().map(|&a| Point2::new(a.cos(), a.sin())).collect(),
                arc_lengths: angles.clone(),
                segments: (0..n).map(|k| [k, (k + 1) % n]).collect(),
                angles,
                radius: 1.0,
            }
        };
        let zero = BoundaryTrace::zeros(&b, 9, 0.1);
        let x = add_noise(&zero, 1.0, seed_a).unwrap();
        let y = add_noise(&zero, scale.abs() + 0.1, seed_b).unwrap().scaled(scale.signum());
        let ip = l2_sigma_inner(&x, &y).unwrap();
        prop_assert!(ip.abs() <= l2_sigma_norm(&x).unwrap() * l2_sigma_norm(&y).unwrap() * (1.0 + 1e-12));
    }
}
