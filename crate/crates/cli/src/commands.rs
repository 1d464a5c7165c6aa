use std::path::{Path, PathBuf};
use std::sync::Arc;

use pat_core::cq::compute_cq_weights;
use pat_core::fem::{project_analytic, FeSpace, Locator, MassMode};
use pat_core::geometry::generate_disk_mesh;
use pat_core::operators::{add_noise, adjoint_l, forward_l, l2_sigma_inner, l2_sigma_norm, resample_trace, OperatorSetup};
use pat_core::phantoms::{estimate_t0, quintic_step, Raster, SpeedField};
use pat_core::recon::{
    estimate_omega, landweber_tracked, neumann_series, relative_error, restrict_h01, time_reversal, ErrorNorm, LandweberConfig,
    StopReason, TimeReversalMode,
};
use pat_core::wavesolver::{solve_transmission, BoundaryMode, SolveOptions, TimeGrid, WaveSystem};
use pat_core::{Field, Mesh, Point, Setup, Trace};

use crate::config::{Discretization, Duration, ExperimentConfig, Method};
use crate::error::{CliError, CliResult};
use crate::manifest::{exact, Manifest};

pub const TRACE_FILE: &str = "trace.patr";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Safety switches that relax config validation.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunFlags {
    pub allow_inverse_crime: bool,
    pub override_stability: bool,
}

/// Observation time and, for `k * T0` durations, the T₀ estimate.
pub fn resolve_duration(cfg: &ExperimentConfig, speed: &SpeedField) -> CliResult<(f64, f64)> {
    let t0 = estimate_t0(speed, cfg.radius, cfg.t0_spacing)?;
    let t = match cfg.duration {
        Duration::Absolute(t) => t,
        Duration::T0Multiple(k) => k * t0,
    };
    Ok((t, t0))
}

/// Mesh, system, time grid `Δt = h/(dt_factor·c_max)` and CQ weights.
pub fn build_setup(cfg: &ExperimentConfig, speed: &SpeedField, d: Discretization, t_final: f64, flags: RunFlags) -> CliResult<Setup> {
    let mesh = Arc::new(generate_disk_mesh(cfg.radius, d.h)?);
    let system = WaveSystem::new(mesh, |p: Point| speed.value(p), MassMode::Lumped)?;
    let grid = TimeGrid::from_cfl(t_final, system.h(), system.c_max, d.dt_factor)?;
    if !flags.override_stability {
        grid.check_stability(system.h(), system.c_max, 0.1).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let weights = compute_cq_weights(&system.boundary, grid.n_steps, grid.dt)?;
    Ok(OperatorSetup::from_parts(Arc::new(system), grid, Arc::new(weights))?)
}

fn check_flags(cfg: &ExperimentConfig, flags: RunFlags) -> CliResult<()> {
    if !flags.override_stability {
        cfg.check_stability_rule()?;
    }
    if !flags.allow_inverse_crime {
        cfg.check_inverse_crime()?;
    }
    Ok(())
}

fn record_config(m: &mut Manifest, cfg: &ExperimentConfig) {
    for (k, v) in &cfg.resolved {
        m.set(&format!("config.{k}"), v);
    }
    m.set("config.sha256", crate::manifest::sha256_hex(cfg.to_text().as_bytes()));
    m.set("version", env!("CARGO_PKG_VERSION"));
}

fn record_grid(m: &mut Manifest, prefix: &str, s: &Setup) {
    m.set(&format!("{prefix}.c_max"), exact(s.system.c_max));
    m.set(&format!("{prefix}.dt"), exact(s.grid.dt));
    m.set(&format!("{prefix}.N"), s.grid.n_steps);
    m.set(&format!("{prefix}.vertices"), s.space().mesh.n_vertices());
    m.set(&format!("{prefix}.boundary_nodes"), s.system.n_boundary());
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Forward data on the simulation mesh. Writes `trace.patr` and
/// `manifest.txt` to the output directory and returns the trace path.
pub fn simulate(cfg: &ExperimentConfig, flags: RunFlags) -> CliResult<PathBuf> {
    check_flags(cfg, flags)?;
    create_dir(&cfg.output)?;
    let speed = cfg.speed_field()?;
    let phantom = cfg.phantom_field()?;
    let (t_final, t0) = resolve_duration(cfg, &speed)?;
    let setup = build_setup(cfg, &speed, cfg.simulation, t_final, flags)?;
    let f = project_analytic(|p: Point| phantom.value(p), setup.space())?;
    let m = forward_l(&f, &setup)?;
    let trace_path = cfg.output.join(TRACE_FILE);
    m.write_file(&trace_path)?;

    let mut man = Manifest::default();
    record_config(&mut man, cfg);
    man.set("command", "simulate");
    man.set("T0", exact(t0));
    man.set("T", exact(t_final));
    record_grid(&mut man, "simulation", &setup);
    man.hash_file("trace", &trace_path)?;
    man.write(&cfg.output.join(MANIFEST_FILE))?;
    Ok(trace_path)
}

/// Output of [`reconstruct`].
#[derive(Clone, Debug)]
pub struct ReconOutcome {
    pub field_path: PathBuf,
    pub report_path: PathBuf,
    pub residuals: Vec<f64>,
    pub phantom_error: Option<f64>,
    pub manifest: Manifest,
}

/// Observation time for a trace: the frozen `T` of its simulation manifest
/// if one sits next to it, else the trace length.
fn trace_duration(trace: &Trace, trace_path: &Path) -> CliResult<f64> {
    let man_path = trace_path.with_file_name(MANIFEST_FILE);
    if !man_path.exists() {
        return Ok(trace.t_final());
    }
    let t = Manifest::read(&man_path)?.get_f64("T")?;
    if (t - trace.t_final()).abs() > 1e-9 * t {
        return Err(CliError::Io(format!(
            "trace length {} disagrees with T = {t} in {}",
            trace.t_final(),
            man_path.display()
        )));
    }
    Ok(t)
}

fn write_single_row_report(path: &Path, iter: usize, residual: f64, error: Option<f64>) -> CliResult<()> {
    let err = error.map_or(String::new(), |e| format!("{e:e}"));
    std::fs::write(path, format!("iter,residual,phantom_error\n{iter},{residual:e},{err}\n"))?;
    Ok(())
}

/// Resamples a trace onto the reconstruction grids and runs the configured
/// method. Outputs go to the config's output directory, suffixed by method.
pub fn reconstruct(cfg: &ExperimentConfig, trace_path: Option<&Path>, flags: RunFlags) -> CliResult<ReconOutcome> {
    check_flags(cfg, flags)?;
    create_dir(&cfg.output)?;
    let default_trace = cfg.output.join(TRACE_FILE);
    let trace_path = trace_path.unwrap_or(&default_trace);
    let trace = Trace::read_file(trace_path)?;
    if (trace.radius - cfg.radius).abs() > 1e-12 * cfg.radius {
        return Err(CliError::Config(format!("trace radius {} does not match domain.radius = {}", trace.radius, cfg.radius)));
    }
    let t_final = trace_duration(&trace, trace_path)?;
    let speed = cfg.speed_field()?;
    let phantom = cfg.phantom_field()?;
    let setup = build_setup(cfg, &speed, cfg.reconstruction, t_final, flags)?;
    let mut data = resample_trace(&trace, &setup.system.boundary, &setup.grid)?;
    let mut added = 0.0;
    if cfg.noise > 0.0 {
        added = cfg.noise * l2_sigma_norm(&data)?;
        data = add_noise(&data, added, cfg.seed)?;
    }
    let delta = cfg.delta.unwrap_or(added);
    let truth = project_analytic(|p: Point| phantom.value(p), setup.space())?;
    let truth = (truth.max_abs() > 0.0).then_some(truth);

    let method = cfg.method.name();
    let out = |stem: &str, ext: &str| cfg.output.join(format!("{stem}_{method}.{ext}"));
    let mut man = Manifest::default();
    record_config(&mut man, cfg);
    man.set("command", "reconstruct");
    man.set("T", exact(t_final));
    record_grid(&mut man, "reconstruction", &setup);
    man.hash_file("trace", trace_path)?;
    man.set("noise.added", exact(added));
    man.set("delta", exact(delta));

    let report_path = out("report", "csv");
    let (field, residuals): (Field, Vec<f64>) = match cfg.method {
        Method::Landweber => {
            let omega = match cfg.omega {
                Some(w) => w,
                None => {
                    let est = estimate_omega(&setup, cfg.power_iters, cfg.omega_seed)?;
                    man.set("lambda_max", exact(est.lambda_max));
                    man.set("omega.converged", est.converged);
                    if !est.converged {
                        eprintln!("warning: power iteration did not settle; ω may be off");
                    }
                    est.omega
                }
            };
            man.set("omega", exact(omega));
            let lw = LandweberConfig { omega, tau: cfg.tau, delta, k_max: cfg.iterations, snapshot_every: cfg.snapshot_every };
            let rep = landweber_tracked(&data, &setup, &lw, truth.as_ref())?;
            rep.write_csv(&report_path)?;
            for (k, snap) in &rep.snapshots {
                snap.write_file(&cfg.output.join(format!("snapshot_{method}_{k:04}.paff")))?;
            }
            man.set("k_star", rep.first_violation.map_or("none".to_string(), |k| k.to_string()));
            man.set("returned_index", rep.returned_index);
            man.set("stop", if rep.stop == StopReason::Discrepancy { "discrepancy" } else { "cap" });
            (rep.iterate, rep.residuals)
        }
        Method::TimeReversal | Method::HarmonicTimeReversal | Method::Neumann => {
            let (f, iter) = match cfg.method {
                Method::TimeReversal => (time_reversal(&data, &setup, TimeReversalMode::Plain)?, 0),
                Method::HarmonicTimeReversal => (time_reversal(&data, &setup, TimeReversalMode::Harmonic)?, 0),
                _ => {
                    let res = neumann_series(&data, &setup, cfg.neumann_terms)?;
                    man.set("neumann.diverged", res.diverged);
                    if res.diverged {
                        eprintln!("warning: Neumann partial sums grew more than tenfold in one step");
                    }
                    (res.field, cfg.neumann_terms)
                }
            };
            let f = restrict_h01(&setup, f);
            let r = l2_sigma_norm(&forward_l(&f, &setup)?.add_scaled(-1.0, &data)?)?;
            let e = truth.as_ref().map(|t| relative_error(&f, t, &setup, ErrorNorm::L2)).transpose()?;
            write_single_row_report(&report_path, iter, r, e)?;
            (f, vec![r])
        }
    };
    let phantom_error = truth.as_ref().map(|t| relative_error(&field, t, &setup, ErrorNorm::L2)).transpose()?;
    if let Some(e) = phantom_error {
        man.set("phantom_error", exact(e));
    }
    man.set("residual.final", exact(*residuals.last().expect("at least one residual")));

    let field_path = out("recon", "paff");
    field.write_file(&field_path)?;
    field.write_csv(setup.space(), &out("recon", "csv"))?;
    setup.space().mesh.write_file(&out("recon", "mesh"))?;
    let image = out("recon", "pgm");
    render_field(&field, setup.space(), cfg.render_size, &image)?;
    for (key, path) in [("field", &field_path), ("report", &report_path), ("image", &image)] {
        man.hash_file(key, path)?;
    }
    man.write(&out("manifest", "txt"))?;
    Ok(ReconOutcome { field_path, report_path, residuals, phantom_error, manifest: man })
}

/// Rasterizes a field over `[−R, R]²`, 0 outside the mesh.
pub fn render_field(field: &Field, space: &FeSpace<f64>, size: usize, path: &Path) -> CliResult<()> {
    space.check_field(field)?;
    let locator = Locator::new(space);
    let raster = Raster::sample(size, space.mesh.radius, |p| locator.locate(p).map_or(0.0, |(t, l)| space.eval_in(field, t, l)));
    raster.write_pgm16(path)?;
    Ok(())
}

/// `pat render`: the mesh is read from the `.mesh` file next to the field.
pub fn render(field_path: &Path, image: &Path, size: usize) -> CliResult<()> {
    if size < 2 {
        return Err(CliError::Config("image size must be at least 2".into()));
    }
    let field = Field::read_file(field_path)?;
    let mesh = Mesh::read_file(&field_path.with_extension("mesh"))?;
    let space = FeSpace::new(Arc::new(mesh));
    if field.len() != space.n_dofs() {
        return Err(CliError::Io(format!(
            "{} holds {} values but its mesh has {} degrees of freedom",
            field_path.display(),
            field.len(),
            space.n_dofs()
        )));
    }
    render_field(&field, &space, size, image)
}

/// One diagnostics row.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Sum of four seeded Gaussian bumps inside `0.6R`, cut off before `0.9R`.
pub fn random_smooth(seed: u64, radius: f64) -> impl Fn(Point) -> f64 {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let mut next = move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    let bumps: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            let (r, a) = (0.6 * radius * next(), std::f64::consts::TAU * next());
            [r * a.cos(), r * a.sin(), (0.1 + 0.1 * next()) * radius, 2.0 * next() - 1.0]
        })
        .collect();
    move |p: Point| {
        let cut = quintic_step((0.9 * radius - p.norm()) / (0.1 * radius));
        cut * bumps.iter().map(|b| b[3] * (-((p.x - b[0]).powi(2) + (p.y - b[1]).powi(2)) / (2.0 * b[2] * b[2])).exp()).sum::<f64>()
    }
}

/// Adjoint identity, ω estimate, energy drift with a reflecting boundary and
/// energy decay with the transparent one, all on the reconstruction setup.
/// Writes `diagnostics.csv`.
pub fn diagnose(cfg: &ExperimentConfig, flags: RunFlags) -> CliResult<Vec<Check>> {
    if !flags.override_stability {
        cfg.check_stability_rule()?;
    }
    create_dir(&cfg.output)?;
    let speed = cfg.speed_field()?;
    let (t_final, _) = resolve_duration(cfg, &speed)?;
    let setup = build_setup(cfg, &speed, cfg.reconstruction, t_final, flags)?;
    let sys = &setup.system;
    let mut checks = Vec::new();
    let mut push = |name, value: f64, threshold: f64, pass: bool| checks.push(Check { name, value, threshold, pass });

    let courant = setup.grid.dt * sys.c_max / sys.h();
    push("stability_dt_cmax_over_h", courant, 0.1, courant <= 0.1);

    let f = project_analytic(random_smooth(cfg.seed, cfg.radius), setup.space())?;
    let t_end = setup.grid.t_final;
    let h = Trace::from_fn(&sys.boundary, setup.grid.n_steps, setup.grid.dt, |t, th| {
        (std::f64::consts::PI * t / t_end).sin().powi(2) * ((2.0 * th).cos() + 0.5 * (th + 1.0).sin())
    });
    let lf = forward_l(&f, &setup)?;
    let lsh = adjoint_l(&h, &setup)?;
    let lhs = l2_sigma_inner(&lf, &h)?;
    let rhs = sys.stiffness.bilinear(&f.values, &lsh.values);
    let mismatch = (lhs - rhs).abs() / (l2_sigma_norm(&lf)? * l2_sigma_norm(&h)?);
    push("adjoint_mismatch", mismatch, 2e-2, mismatch <= 2e-2);

    let est = estimate_omega(&setup, cfg.power_iters, cfg.omega_seed)?;
    let prod = est.omega * est.lambda_max;
    push("omega_times_lambda_max", prod, 0.95, (prod - 0.95).abs() <= 1e-12);
    push("power_iteration_converged", if est.converged { 1.0 } else { 0.0 }, 1.0, est.converged);

    let opts = SolveOptions { boundary: BoundaryMode::Reflecting, record_energy: true, ..Default::default() };
    let e = solve_transmission(sys, None, &f, None, &setup.grid, &opts)?.energy.expect("energy was requested");
    let drift = e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max) / e[0];
    push("reflecting_energy_drift", drift, 1e-2, drift <= 1e-2);

    let opts = SolveOptions { record_energy: true, ..Default::default() };
    let e = solve_transmission(sys, Some(&setup.weights), &f, None, &setup.grid, &opts)?.energy.expect("energy was requested");
    let ratio = e.last().copied().unwrap_or(0.0) / e[0];
    push("transparent_energy_ratio", ratio, 1.0, ratio <= 1.0 + 1e-3);

    let mut text = String::from("check,value,threshold,pass\n");
    for c in &checks {
        text.push_str(&format!("{},{:e},{:e},{}\n", c.name, c.value, c.threshold, c.pass));
    }
    std::fs::write(cfg.output.join("diagnostics.csv"), text)?;
    Ok(checks)
}
