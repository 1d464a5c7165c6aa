use std::sync::Arc;

use pat_core::fem::{project_analytic, MassMode, NodalField};
use pat_core::geometry::generate_disk_mesh;
use pat_core::operators::*;
use pat_core::phantoms::{quintic_step, SpeedField};
use pat_core::recon::*;
use pat_core::scalar::Point2;
use pat_core::trace::BoundaryTrace;
use pat_core::wavesolver::TimeGrid;

fn setup(h: f64, t_final: f64, speed: &SpeedField) -> OperatorSetup<f64> {
    let mesh = Arc::new(generate_disk_mesh(1.0, h).unwrap());
    OperatorSetup::with_cfl(mesh, |p| speed.value(p), t_final, 15.0).unwrap()
}

fn blob(p: Point2<f64>) -> f64 {
    let q = Point2::new(p.x - 0.2, p.y + 0.1);
    (-q.norm().powi(2) / 0.02).exp() * quintic_step((0.85 - p.norm()) / 0.15)
}

/// Data simulated on a finer mesh and resampled onto `rec`'s grids.
fn simulated_data(rec: &OperatorSetup<f64>, h_sim: f64, speed: &SpeedField, f: impl Fn(Point2<f64>) -> f64) -> BoundaryTrace<f64> {
    let mesh = Arc::new(generate_disk_mesh(1.0, h_sim).unwrap());
    let sim = OperatorSetup::with_cfl(mesh, |p| speed.value(p), rec.grid.t_final, 15.0).unwrap();
    let f = project_analytic(f, sim.space()).unwrap();
    let m = forward_l(&f, &sim).unwrap();
    resample_trace(&m, &rec.system.boundary, &rec.grid).unwrap()
}

fn rel(a: &NodalField<f64>, b: &NodalField<f64>) -> f64 {
    let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.values.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE)
}

#[test]
fn config_validation() {
    assert!(LandweberConfig::new(1.0, 0.0).validate().is_ok());
    assert!(LandweberConfig::new(0.0, 0.0).validate().is_err());
    assert!(LandweberConfig::new(1.0, -1.0).validate().is_err());
    let mut c = LandweberConfig::new(1.0, 0.1);
    c.tau = 1.0;
    assert!(c.validate().is_err());
    assert_eq!((c.k_max, c.snapshot_every), (200, 5));
}

#[test]
fn relative_error_examples() {
    let s = setup(0.3, 0.5, &SpeedField::nontrapping(1.0));
    let f = project_analytic(blob, s.space()).unwrap();
    for norm in [ErrorNorm::L2, ErrorNorm::H01] {
        assert!(relative_error(&f, &f, &s, norm).unwrap() < 1e-15);
        assert!((relative_error(&s.space().zero_field(), &f, &s, norm).unwrap() - 1.0).abs() < 1e-14);
        assert!((relative_error(&f.scaled(2.0), &f, &s, norm).unwrap() - 1.0).abs() < 1e-14);
        assert!(relative_error(&f, &s.space().zero_field(), &s, norm).is_err());
    }
}

#[test]
fn zero_data_gives_zero_everywhere() {
    let s = setup(0.25, 1.0, &SpeedField::nontrapping(1.0));
    let m = s.zero_trace();
    let rep = landweber(&m, &s, &LandweberConfig::new(1.0, 0.01)).unwrap();
    assert_eq!(rep.residuals, vec![0.0]);
    assert_eq!((rep.first_violation, rep.returned_index, rep.stop), (Some(0), 0, StopReason::Discrepancy));
    assert!(rep.iterate.max_abs() == 0.0);
    for mode in [TimeReversalMode::Plain, TimeReversalMode::Harmonic] {
        assert_eq!(time_reversal(&m, &s, mode).unwrap().max_abs(), 0.0);
    }
    for j in 0..3 {
        assert_eq!(neumann_series(&m, &s, j).unwrap().field.max_abs(), 0.0);
    }
}

#[test]
fn first_step_is_scaled_adjoint() {
    let speed = SpeedField::nontrapping(1.0);
    let s = setup(0.25, 1.0, &speed);
    let m = simulated_data(&s, 0.18, &speed, blob);
    let mut cfg = LandweberConfig::new(0.7, 0.0);
    cfg.k_max = 1;
    let rep = landweber(&m, &s, &cfg).unwrap();
    let expect = adjoint_l(&m, &s).unwrap().scaled(0.7);
    assert!(rel(&rep.iterate, &expect) < 1e-14);
    assert_eq!(rep.residuals.len(), 2);
    assert_eq!(rep.stop, StopReason::Cap);
    assert_eq!(rep.first_violation, None);
}

#[test]
fn three_steps_match_truncated_series() {
    let speed = SpeedField::nontrapping(1.0);
    let s = setup(0.25, 1.0, &speed);
    let m = simulated_data(&s, 0.18, &speed, blob);
    let omega = estimate_omega(&s, 6, 1).unwrap().omega;
    let mut cfg = LandweberConfig::new(omega, 0.0);
    cfg.k_max = 3;
    let rep = landweber(&m, &s, &cfg).unwrap();
    // Σ_{j<3} (I − ωL*L)^j ωL*m evaluated term by term.
    let apply = |g: &NodalField<f64>| g.add_scaled(-omega, &adjoint_l(&forward_l(g, &s).unwrap(), &s).unwrap());
    let mut term = adjoint_l(&m, &s).unwrap().scaled(omega);
    let mut sum = term.clone();
    for _ in 1..3 {
        term = apply(&term);
        sum = sum.add_scaled(1.0, &term);
    }
    let e = rel(&rep.iterate, &sum);
    eprintln!("series identity: {e:e}");
    assert!(e < 1e-8, "{e}");
}

#[test]
fn omega_estimate_is_stable() {
    let s = setup(0.25, 1.2, &SpeedField::nontrapping(1.0));
    let a = estimate_omega(&s, 8, 1).unwrap();
    let b = estimate_omega(&s, 8, 2).unwrap();
    eprintln!("λ_max {} {} rayleigh {:?}", a.lambda_max, b.lambda_max, a.rayleigh);
    assert!((a.lambda_max / b.lambda_max - 1.0).abs() < 0.05);
    assert!((a.omega * a.lambda_max - 0.95).abs() < 1e-14);
    assert!(a.converged && b.converged);
    for w in a.rayleigh.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-3), "{:?}", a.rayleigh);
    }
    assert!(estimate_omega(&s, 4, 1).is_err());
}

#[test]
fn harmonic_mode_matches_plain_when_final_slice_vanishes() {
    let s = setup(0.2, 1.0, &SpeedField::nontrapping(1.0));
    let t_final = s.grid.t_final;
    let m = BoundaryTrace::from_fn(&s.system.boundary, s.grid.n_steps, s.grid.dt, |t, th| {
        (std::f64::consts::PI * t / t_final).sin() * (2.0 * th).cos()
    });
    let mut m = m;
    m.step_mut(s.grid.n_steps).iter_mut().for_each(|v| *v = 0.0);
    let plain = time_reversal(&m, &s, TimeReversalMode::Plain).unwrap();
    let harm = time_reversal(&m, &s, TimeReversalMode::Harmonic).unwrap();
    assert!(plain.max_abs() > 1e-3);
    assert!(harm.add_scaled(-1.0, &plain).max_abs() <= 1e-12 * plain.max_abs());
}

#[test]
fn neumann_base_case_is_harmonic_time_reversal() {
    let speed = SpeedField::nontrapping(1.0);
    let s = setup(0.25, 1.5, &speed);
    let m = simulated_data(&s, 0.18, &speed, blob);
    let tr = time_reversal(&m, &s, TimeReversalMode::Harmonic).unwrap();
    let n0 = neumann_series(&m, &s, 0).unwrap();
    // The forward data vanish at t = 0, so the boundary dofs of z(·, 0) are already zero.
    assert!(n0.field.add_scaled(-1.0, &tr).max_abs() <= 1e-12 * tr.max_abs());
    assert_eq!(n0.norms.len(), 1);
}

#[test]
fn plain_time_reversal_recovers_phantom_at_long_times() {
    let speed = SpeedField::constant(1.0, 1.0).unwrap();
    let s = setup(0.1, 4.0, &speed);
    let m = simulated_data(&s, 0.07, &speed, blob);
    let f = project_analytic(blob, s.space()).unwrap();
    let tr = time_reversal(&m, &s, TimeReversalMode::Plain).unwrap();
    let e = relative_error(&tr, &f, &s, ErrorNorm::L2).unwrap();
    eprintln!("time reversal at T = 4: {e:e}");
    assert!(e <= 0.1, "{e}");
}

#[test]
fn residual_decreases_and_discrepancy_stops_earlier_for_more_noise() {
    let speed = SpeedField::nontrapping(1.0);
    let s = setup(0.2, 1.2, &speed);
    let m = simulated_data(&s, 0.14, &speed, blob);
    let omega = estimate_omega(&s, 6, 3).unwrap().omega;
    let mut cfg = LandweberConfig::new(omega, 0.0);
    cfg.k_max = 15;
    let rep = landweber(&m, &s, &cfg).unwrap();
    assert_eq!(rep.stop, StopReason::Cap);
    assert_eq!(rep.snapshots.iter().map(|x| x.0).collect::<Vec<_>>(), vec![5, 10, 15]);
    for w in rep.residuals.windows(2) {
        assert!(w[1] < w[0], "{:?}", rep.residuals);
    }

    // White noise mostly lives where L L* is tiny, so the residual creeps
    // towards δ; large levels keep the stop within a few dozen steps.
    let norm = l2_sigma_norm(&m).unwrap();
    let mut stops = Vec::new();
    for delta in [0.3 * norm, 1.2 * norm] {
        let noisy = add_noise(&m, delta, 11).unwrap();
        let rep = landweber(&noisy, &s, &LandweberConfig::new(omega, delta)).unwrap();
        assert_eq!(rep.stop, StopReason::Discrepancy);
        let k = rep.first_violation.unwrap();
        assert_eq!(k, rep.returned_index);
        assert!(*rep.residuals.last().unwrap() <= 1.5 * delta);
        assert!(rep.residuals[..k].iter().all(|&r| r > 1.5 * delta));
        stops.push(k);
    }
    eprintln!("stopping indices {stops:?}");
    assert!(stops[1] < stops[0], "{stops:?}");
}

#[test]
fn report_csv_layout() {
    let speed = SpeedField::nontrapping(1.0);
    let s = setup(0.3, 1.0, &speed);
    let m = simulated_data(&s, 0.2, &speed, blob);
    let truth = project_analytic(blob, s.space()).unwrap();
    let mut cfg = LandweberConfig::new(estimate_omega(&s, 5, 1).unwrap().omega, 0.0);
    cfg.k_max = 3;
    let rep = landweber_tracked(&m, &s, &cfg, Some(&truth)).unwrap();
    assert_eq!(rep.errors.as_ref().unwrap()[0], 1.0);
    let dir = std::env::temp_dir().join(format!("pat-recon-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.csv");
    rep.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iter,residual,phantom_error");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("3,"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn consistent_mass_setup_runs() {
    let mesh = Arc::new(generate_disk_mesh(1.0, 0.3).unwrap());
    let grid = TimeGrid::new(0.5, 40).unwrap();
    let s = OperatorSetup::new(mesh, |_| 1.0, grid, MassMode::Consistent).unwrap();
    let f = project_analytic(blob, s.space()).unwrap();
    let tr = time_reversal(&forward_l(&f, &s).unwrap(), &s, TimeReversalMode::Plain).unwrap();
    assert!(tr.max_abs().is_finite());
}
