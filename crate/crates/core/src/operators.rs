//! The forward operator `L f = y|_Σ`, its adjoint `L*`, the `L²(Σ)` product,
//! the noise model and resampling of traces between meshes.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cq::{compute_cq_weights, CQWeightSet};
use crate::error::{PatError, Result};
use crate::fem::{project_analytic, FeSpace, MassMode, NodalField};
use crate::geometry::{BoundaryGrid, TriMesh};
use crate::scalar::{Point2, Real};
use crate::trace::BoundaryTrace;
use crate::wavesolver::{solve_poisson_load, solve_transmission, SolveOptions, TimeGrid, WaveSystem};

/// Everything `L` and `L*` need, built once and shared read-only.
#[derive(Clone)]
pub struct OperatorSetup<T: Real> {
    pub system: Arc<WaveSystem<T>>,
    pub grid: TimeGrid<T>,
    pub weights: Arc<CQWeightSet<T>>,
}

impl<T: Real> OperatorSetup<T> {
    /// Assembles the system for `speed` on `mesh` and computes CQ weights for
    /// `grid`, checking the explicit stability guard `Δt·c_max ≤ h/10`.
    pub fn new<F: Fn(Point2<T>) -> T>(mesh: Arc<TriMesh<T>>, speed: F, grid: TimeGrid<T>, mode: MassMode) -> Result<Self> {
        let system = WaveSystem::new(mesh, speed, mode)?;
        grid.check_stability(system.h(), system.c_max, T::lit(0.1))?;
        let weights = compute_cq_weights(&system.boundary, grid.n_steps, grid.dt)?;
        Self::from_parts(Arc::new(system), grid, Arc::new(weights))
    }

    /// Time grid `Δt = h/(factor·c_max)` covering `[0, t_final]`.
    pub fn with_cfl<F: Fn(Point2<T>) -> T>(mesh: Arc<TriMesh<T>>, speed: F, t_final: T, factor: T) -> Result<Self> {
        let system = WaveSystem::new(mesh, speed, MassMode::Lumped)?;
        let grid = TimeGrid::from_cfl(t_final, system.h(), system.c_max, factor)?;
        grid.check_stability(system.h(), system.c_max, T::lit(0.1))?;
        let weights = compute_cq_weights(&system.boundary, grid.n_steps, grid.dt)?;
        Self::from_parts(Arc::new(system), grid, Arc::new(weights))
    }

    pub fn from_parts(system: Arc<WaveSystem<T>>, grid: TimeGrid<T>, weights: Arc<CQWeightSet<T>>) -> Result<Self> {
        let same_dt = (weights.dt - grid.dt).abs() <= T::lit(1e-12) * grid.dt;
        if weights.n_b != system.n_boundary() || weights.n_steps != grid.n_steps || !same_dt {
            return Err(PatError::DimensionMismatch("CQ weights were computed for another boundary or time grid".into()));
        }
        Ok(Self { system, grid, weights })
    }

    pub fn space(&self) -> &FeSpace<T> {
        &self.system.space
    }

    pub fn zero_trace(&self) -> BoundaryTrace<T> {
        BoundaryTrace::zeros(&self.system.boundary, self.grid.n_steps, self.grid.dt)
    }

    pub fn check_trace(&self, h: &BoundaryTrace<T>) -> Result<()> {
        self.zero_trace().check_same_shape(h)
    }
}

/// `L f`: transmission solve from `v(0) = f`, `v'(0) = 0`, returning the trace.
pub fn forward_l<T: Real>(f: &NodalField<T>, setup: &OperatorSetup<T>) -> Result<BoundaryTrace<T>> {
    let sys = &setup.system;
    sys.space.check_field(f)?;
    let scale = f.max_abs().max(T::one());
    for &d in &sys.space.boundary_dofs {
        if f.values[d].abs() > T::lit(1e-12) * scale {
            let p = sys.space.dof_points[d];
            return Err(PatError::Precondition(format!(
                "initial value {} at boundary point ({}, {}) must vanish",
                f.values[d], p.x, p.y
            )));
        }
    }
    let rec = solve_transmission(sys, Some(&setup.weights), f, None, &setup.grid, &SolveOptions::default())?;
    Ok(rec.trace)
}

/// `L* h = (−Δ_D)⁻¹[(1/c²) z'(0)]`, where `z(t) = v(T − t)` and `v` solves
/// the transmission problem with zero initial data and jump `h(T − t)`.
pub fn adjoint_l<T: Real>(h: &BoundaryTrace<T>, setup: &OperatorSetup<T>) -> Result<NodalField<T>> {
    setup.check_trace(h)?;
    let sys = &setup.system;
    let n = setup.grid.n_steps;
    if n < 2 {
        return Err(PatError::InvalidInput("the adjoint needs at least two time steps".into()));
    }
    let zero = sys.space.zero_field();
    if h.values.iter().all(|&v| v == T::zero()) {
        return Ok(zero);
    }
    let rho = h.reversed();
    let rec = solve_transmission(sys, Some(&setup.weights), &zero, Some(&rho), &setup.grid, &SolveOptions::default())?;
    let [a, b, c] = [&rec.last[0].values, &rec.last[1].values, &rec.last[2].values];
    let k = -T::one() / (T::lit(2.0) * setup.grid.dt);
    // z'(0) = −v'(T), one-sided second order.
    let zp: Vec<T> = (0..a.len()).map(|i| k * (T::lit(3.0) * c[i] - T::lit(4.0) * b[i] + a[i])).collect();
    let load = sys.mass.apply(&zp);
    solve_poisson_load(sys, &load)
}

/// Segment lengths of the periodic arc-length grid of a trace.
fn segment_lengths<T: Real>(tr: &BoundaryTrace<T>) -> Vec<T> {
    let n = tr.n_b;
    let perimeter = T::TAU() * tr.radius;
    (0..n)
        .map(|k| {
            if k + 1 < n {
                tr.arc_lengths[k + 1] - tr.arc_lengths[k]
            } else {
                perimeter - tr.arc_lengths[n - 1] + tr.arc_lengths[0]
            }
        })
        .collect()
}

/// `⟨a, b⟩_{L²(Σ)}`: trapezoidal rule in time, P1 mass on the circle.
pub fn l2_sigma_inner<T: Real>(a: &BoundaryTrace<T>, b: &BoundaryTrace<T>) -> Result<T> {
    a.check_same_shape(b)?;
    let n = a.n_b;
    let len = segment_lengths(a);
    let sixth = T::one() / T::lit(6.0);
    let mut total = T::zero();
    for step in 0..=a.n_steps {
        let (x, y) = (a.step(step), b.step(step));
        let mut s = T::zero();
        for k in 0..n {
            let j = (k + 1) % n;
            // ∫ over segment k of the linear interpolants.
            s += len[k] * sixth * (T::lit(2.0) * x[k] * y[k] + x[k] * y[j] + x[j] * y[k] + T::lit(2.0) * x[j] * y[j]);
        }
        let w = if step == 0 || step == a.n_steps { T::lit(0.5) } else { T::one() };
        total += w * s;
    }
    Ok(total * a.dt)
}

pub fn l2_sigma_norm<T: Real>(a: &BoundaryTrace<T>) -> Result<T> {
    Ok(l2_sigma_inner(a, a)?.max(T::zero()).sqrt())
}

/// `m + δ·e/‖e‖` with `e` white Gaussian noise from `seed`, so that
/// `‖m^δ − m‖_{L²(Σ)} = δ`.
pub fn add_noise<T: Real>(m: &BoundaryTrace<T>, delta: T, seed: u64) -> Result<BoundaryTrace<T>> {
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(PatError::InvalidInput(format!("noise level {delta} must be non-negative")));
    }
    if delta == T::zero() {
        return Ok(m.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = m.clone();
    for v in e.values.iter_mut() {
        let x: f64 = StandardNormal.sample(&mut rng);
        *v = T::lit(x);
    }
    let norm = l2_sigma_norm(&e)?;
    m.add_scaled(delta / norm, &e)
}

/// Bilinear resampling onto another boundary grid and time grid: periodic
/// linear in arc length, linear in time. Extrapolation in time is an error.
pub fn resample_trace<T: Real>(tr: &BoundaryTrace<T>, dst: &BoundaryGrid<T>, grid: &TimeGrid<T>) -> Result<BoundaryTrace<T>> {
    if (dst.radius - tr.radius).abs() > T::lit(1e-12) * tr.radius {
        return Err(PatError::DimensionMismatch(format!("trace radius {} does not match grid radius {}", tr.radius, dst.radius)));
    }
    if grid.t_final > tr.t_final() * (T::one() + T::lit(1e-12)) {
        return Err(PatError::InvalidInput(format!(
            "cannot extrapolate a trace of length {} to {}",
            tr.t_final(),
            grid.t_final
        )));
    }
    let n = tr.n_b;
    let perimeter = T::TAU() * tr.radius;
    let base = tr.arc_lengths[0];
    let len = segment_lengths(tr);
    // Spatial stencil of every destination node.
    let space: Vec<(usize, usize, T)> = dst
        .angles
        .iter()
        .map(|&a| {
            let x = a * dst.radius - base;
            let mut s = x - perimeter * (x / perimeter).floor();
            if s >= perimeter {
                s = T::zero();
            }
            let k = match tr.arc_lengths.binary_search_by(|x| (*x - base).partial_cmp(&s).unwrap()) {
                Ok(k) => k,
                Err(k) => k - 1,
            };
            let w = (s - (tr.arc_lengths[k] - base)) / len[k];
            (k, (k + 1) % n, w)
        })
        .collect();
    let ratio = grid.dt / tr.dt;
    let mut out = BoundaryTrace::zeros(dst, grid.n_steps, grid.dt);
    for step in 0..=grid.n_steps {
        let pos = T::from_usize_lossy(step) * ratio;
        let i0 = pos.floor().to_usize().unwrap_or(0).min(tr.n_steps);
        let wt = pos - T::from_usize_lossy(i0);
        let i1 = (i0 + 1).min(tr.n_steps);
        let (r0, r1) = (tr.step(i0), tr.step(i1));
        for (v, &(a, b, w)) in out.step_mut(step).iter_mut().zip(&space) {
            let at0 = r0[a] + w * (r0[b] - r0[a]);
            let at1 = if wt == T::zero() { at0 } else { r1[a] + w * (r1[b] - r1[a]) };
            *v = at0 + wt * (at1 - at0);
        }
    }
    Ok(out)
}

/// Interpolates a field given on another mesh of the same disk. Points
/// outside the source polygon get 0, which is exact for H₀¹ fields up to the
/// polygon gap.
pub fn transfer_field<T: Real>(field: &NodalField<T>, src: &FeSpace<T>, dst: &FeSpace<T>) -> Result<NodalField<T>> {
    src.check_field(field)?;
    let locator = crate::fem::Locator::new(src);
    project_analytic(|p| locator.locate(p).map_or(T::zero(), |(t, l)| src.eval_in(field, t, l)), dst)
}
