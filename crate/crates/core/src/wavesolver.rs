//! Time marching of the FEM–BEM transmission problem, the interior Dirichlet
//! wave solve used by time reversal, and the elliptic solves.
//!
//! Interior: `M (v^{n+1} − 2vⁿ + v^{n−1})/Δt² + A vⁿ − B λⁿ = 0` with
//! `λ = ∂ₙv` on ∂Ω. Exterior (Galerkin, P1 on the circle):
//!
//! ```text
//!     Σ_{j≤n} Wv[n−j] (λʲ + ρʲ) = −½ Bᵀvⁿ + Σ_{j≤n} Wk[n−j] vʲ|_∂Ω
//! ```
//!
//! which is solved for λⁿ after vⁿ is known.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use crate::cq::{Convolver, CQWeightSet, Kernel, V0Solver};
use crate::error::{PatError, Result};
use crate::fem::{
    assemble_boundary_mass, assemble_boundary_p1_mass, assemble_mass, assemble_stiffness, assemble_weighted_mass, FeSpace,
    MassMode, MassOperator, NodalField,
};
use crate::geometry::{extract_boundary, BoundaryGrid, TriMesh};
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::scalar::{max_abs, Point2, Real};
use crate::trace::BoundaryTrace;

/// Uniform time grid `t_n = nΔt`, `n = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub t_final: T,
    pub n_steps: usize,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_final: T, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_final > T::zero()) || !t_final.is_finite() {
            return Err(PatError::InvalidInput(format!("time grid needs T > 0 and N >= 1 (got T = {t_final}, N = {n_steps})")));
        }
        Ok(Self { t_final, n_steps, dt: t_final / T::from_usize_lossy(n_steps) })
    }

    /// Smallest `N` with `Δt ≤ h/(factor·c_max)`.
    pub fn from_cfl(t_final: T, h: T, c_max: T, factor: T) -> Result<Self> {
        let n = (t_final * factor * c_max / h).ceil().to_usize().unwrap_or(0).max(1);
        Self::new(t_final, n)
    }

    /// Rejects grids with `Δt·c_max > guard·h`.
    pub fn check_stability(&self, h: T, c_max: T, guard: T) -> Result<()> {
        if self.dt * c_max > guard * h {
            return Err(PatError::Precondition(format!(
                "time step {} too large: dt*c_max = {} exceeds {}*h = {}",
                self.dt,
                self.dt * c_max,
                guard,
                guard * h
            )));
        }
        Ok(())
    }

    pub fn time(&self, n: usize) -> T {
        self.dt * T::from_usize_lossy(n)
    }
}

/// Everything assembled once per (mesh, speed) pair; immutable and shareable.
#[derive(Clone, Debug)]
pub struct WaveSystem<T> {
    pub space: FeSpace<T>,
    pub boundary: BoundaryGrid<T>,
    /// Mass weighted by 1/c².
    pub mass: MassOperator<T>,
    /// Unweighted consistent mass, for Poisson load vectors.
    pub plain_mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    /// Volume-dof × boundary-node coupling.
    pub coupling: CsrMatrix<T>,
    pub boundary_mass: CsrMatrix<T>,
    pub c_max: T,
    pub c_min: T,
    /// `(midpoint dof, end dof, end dof)` of every boundary edge.
    ties: Vec<(usize, usize, usize)>,
    /// Mass with midpoint rows folded onto the end vertices; lumped mode keeps
    /// only its inverse diagonal (zero at midpoints).
    tied_inv_diag: Vec<T>,
    tied_matrix: Option<CsrMatrix<T>>,
}

impl<T: Real> WaveSystem<T> {
    pub fn new<F: Fn(Point2<T>) -> T>(mesh: Arc<TriMesh<T>>, speed: F, mode: MassMode) -> Result<Self> {
        let space = FeSpace::new(mesh);
        let boundary = extract_boundary(&space.mesh);
        let mass = assemble_weighted_mass(&space, &speed, mode)?;
        let plain_mass = assemble_mass(&space, MassMode::Consistent)?.matrix;
        let stiffness = assemble_stiffness(&space);
        let coupling = assemble_boundary_mass(&space, &boundary)?;
        let boundary_mass = assemble_boundary_p1_mass(&boundary);
        let (mut c_max, mut c_min) = (T::zero(), T::infinity());
        for &p in &space.dof_points {
            let c = speed(p);
            c_max = c_max.max(c);
            c_min = c_min.min(c);
        }
        let mesh = &space.mesh;
        let nb = mesh.n_boundary();
        let ties: Vec<(usize, usize, usize)> = (0..nb)
            .map(|k| (mesh.n_vertices() + mesh.boundary_edges[k].0, mesh.boundary_nodes[k], mesh.boundary_nodes[(k + 1) % nb]))
            .collect();
        let mut sys = Self {
            space,
            boundary,
            mass,
            plain_mass,
            stiffness,
            coupling,
            boundary_mass,
            c_max,
            c_min,
            ties,
            tied_inv_diag: Vec::new(),
            tied_matrix: None,
        };
        match sys.mass.mode {
            MassMode::Lumped => {
                let mut d = sys.mass.matrix.diagonal();
                sys.fold(&mut d);
                sys.tied_inv_diag = d.iter().map(|&m| if m > T::zero() { m.recip() } else { T::zero() }).collect();
            }
            MassMode::Consistent => {
                // Pᵀ M P with P the prolongation that slaves midpoints.
                let n = sys.n_dofs();
                let mut map: Vec<Vec<(usize, T)>> = (0..n).map(|i| vec![(i, T::one())]).collect();
                for &(m, a, b) in &sys.ties {
                    map[m] = vec![(a, T::lit(0.5)), (b, T::lit(0.5))];
                }
                let mut trip = Vec::new();
                for i in 0..n {
                    for (j, v) in sys.mass.matrix.row(i) {
                        for &(r, wr) in &map[i] {
                            for &(c, wc) in &map[j] {
                                trip.push((r, c, wr * v * wc));
                            }
                        }
                    }
                }
                for &(m, _, _) in &sys.ties {
                    trip.push((m, m, T::one()));
                }
                sys.tied_matrix = Some(CsrMatrix::from_triplets(n, n, trip));
            }
        }
        Ok(sys)
    }

    /// Adds half of each boundary-midpoint entry to the two end vertices and
    /// clears the midpoint (the transpose of [`Self::tie`]).
    fn fold(&self, f: &mut [T]) {
        let half = T::lit(0.5);
        for &(m, a, b) in &self.ties {
            let x = f[m];
            f[a] += half * x;
            f[b] += half * x;
            f[m] = T::zero();
        }
    }

    /// Sets every boundary-edge midpoint to the mean of its end values, so the
    /// boundary trace is piecewise linear in the boundary nodes.
    pub fn tie(&self, v: &mut [T]) {
        let half = T::lit(0.5);
        for &(m, a, b) in &self.ties {
            v[m] = half * (v[a] + v[b]);
        }
    }

    /// Acceleration `M⁻¹ force` in the space of tied fields.
    pub fn accelerate(&self, force: &[T]) -> Result<Vec<T>> {
        let mut f = force.to_vec();
        self.fold(&mut f);
        let mut acc = match &self.tied_matrix {
            None => f.iter().zip(&self.tied_inv_diag).map(|(&x, &w)| x * w).collect(),
            Some(a) => {
                let mut fixed = vec![false; f.len()];
                for &(m, _, _) in &self.ties {
                    fixed[m] = true;
                }
                let mut x = vec![T::zero(); f.len()];
                conjugate_gradient(a, &f, &mut x, &fixed, T::lit(1e-13), 1000)?;
                x
            }
        };
        self.tie(&mut acc);
        Ok(acc)
    }

    /// `dᵀ M d` for a tied field `d`.
    fn kinetic(&self, d: &[T]) -> T {
        match &self.tied_matrix {
            None => d.iter().zip(&self.tied_inv_diag).filter(|(_, &w)| w > T::zero()).fold(T::zero(), |s, (&x, &w)| s + x * x / w),
            Some(_) => self.mass.matrix.bilinear(d, d),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn h(&self) -> T {
        self.space.mesh.h
    }

    /// Values of a field at the boundary nodes.
    pub fn boundary_values(&self, v: &[T]) -> Vec<T> {
        self.space.mesh.boundary_nodes.iter().map(|&i| v[i]).collect()
    }

    /// Interior time grid for `t_final` with the default step `h/(15 c_max)`.
    pub fn default_grid(&self, t_final: T) -> Result<TimeGrid<T>> {
        TimeGrid::from_cfl(t_final, self.h(), self.c_max, T::lit(15.0))
    }
}

/// How the boundary of the interior domain is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// FEM–BEM coupling (free space).
    #[default]
    Transparent,
    /// λ ≡ 0: homogeneous Neumann, energy conserving.
    Reflecting,
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub boundary: BoundaryMode,
    pub record_energy: bool,
    /// Steps at which the full field is kept.
    pub snapshots: Vec<usize>,
    /// Optional `step,time,energy,max_abs_v` CSV.
    pub diagnostics: Option<PathBuf>,
    /// Abort when ‖vⁿ‖∞ exceeds this multiple of the data amplitude.
    pub blowup_factor: Option<f64>,
}

/// Output of a transmission solve.
#[derive(Clone, Debug)]
pub struct SolveRecord<T> {
    pub trace: BoundaryTrace<T>,
    pub lambda: BoundaryTrace<T>,
    /// `v^{N−2}, v^{N−1}, v^N` (fewer when N < 2).
    pub last: Vec<NodalField<T>>,
    /// Energy at half steps `n + ½`, `n = 0..N−1`.
    pub energy: Option<Vec<T>>,
    pub snapshots: Vec<(usize, NodalField<T>)>,
}

/// Discrete energy `‖(v_next − v_prev)/Δt‖²_M + v_prevᵀ A v_next`, conserved
/// exactly by the leapfrog scheme without boundary flux.
pub fn interior_energy<T: Real>(sys: &WaveSystem<T>, v_prev: &NodalField<T>, v_next: &NodalField<T>, dt: T) -> Result<T> {
    sys.space.check_field(v_prev)?;
    sys.space.check_field(v_next)?;
    let d: Vec<T> = v_next.values.iter().zip(&v_prev.values).map(|(&a, &b)| (a - b) / dt).collect();
    Ok(sys.kinetic(&d) + sys.stiffness.bilinear(&v_prev.values, &v_next.values))
}

struct Diagnostics {
    out: Option<std::io::BufWriter<std::fs::File>>,
}

impl Diagnostics {
    fn open(path: &Option<PathBuf>) -> Result<Self> {
        let out = match path {
            Some(p) => {
                let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                writeln!(f, "step,time,energy,max_abs_v")?;
                Some(f)
            }
            None => None,
        };
        Ok(Self { out })
    }

    fn row<T: Real>(&mut self, step: usize, time: T, energy: T, max_v: T) -> Result<()> {
        if let Some(f) = &mut self.out {
            writeln!(f, "{step},{:e},{:e},{:e}", time.as_f64(), energy.as_f64(), max_v.as_f64())?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if let Some(f) = &mut self.out {
            f.flush()?;
        }
        Ok(())
    }
}

/// Marches the transmission problem with initial value `v0`, zero initial
/// velocity and normal-derivative jump `rho` (sampled at integer steps).
pub fn solve_transmission<T: Real>(
    sys: &WaveSystem<T>,
    weights: Option<&CQWeightSet<T>>,
    v0: &NodalField<T>,
    rho: Option<&BoundaryTrace<T>>,
    grid: &TimeGrid<T>,
    opts: &SolveOptions,
) -> Result<SolveRecord<T>> {
    sys.space.check_field(v0)?;
    let nb = sys.n_boundary();
    let nsteps = grid.n_steps;
    let dt = grid.dt;
    if let Some(r) = rho {
        if r.n_b != nb || r.n_steps != nsteps || (r.dt - dt).abs() > T::lit(1e-12) * dt {
            return Err(PatError::DimensionMismatch(format!(
                "jump data is {}x{} with dt {}, solve needs {}x{} with dt {}",
                r.n_steps + 1,
                r.n_b,
                r.dt,
                nsteps + 1,
                nb,
                dt
            )));
        }
    }
    let transparent = opts.boundary == BoundaryMode::Transparent;
    let w = if transparent {
        let w = weights.ok_or_else(|| PatError::InvalidInput("transparent solve needs convolution weights".into()))?;
        if w.n_b != nb || w.n_steps < nsteps || (w.dt - dt).abs() > T::lit(1e-12) * dt {
            return Err(PatError::DimensionMismatch(format!(
                "weights for n_b={}, N={}, dt={} do not fit n_b={nb}, N={nsteps}, dt={dt}",
                w.n_b, w.n_steps, w.dt
            )));
        }
        Some(w)
    } else {
        None
    };
    let v0_solver = match w {
        Some(w) => Some(V0Solver::new(w)?),
        None => None,
    };

    let mut trace = BoundaryTrace::zeros(&sys.boundary, nsteps, dt);
    let mut lambda = BoundaryTrace::zeros(&sys.boundary, nsteps, dt);
    let amplitude = {
        let a = v0.max_abs();
        let r = rho.map(|r| r.max_abs() * sys.boundary.radius).unwrap_or(T::zero());
        a.max(r)
    };
    let mut record = SolveRecord {
        trace: trace.clone(),
        lambda: lambda.clone(),
        last: Vec::new(),
        energy: opts.record_energy.then(Vec::new),
        snapshots: Vec::new(),
    };
    if amplitude == T::zero() {
        record.last = vec![v0.clone(); nsteps.min(2) + 1];
        if let Some(e) = &mut record.energy {
            e.resize(nsteps, T::zero());
        }
        record.snapshots = opts.snapshots.iter().filter(|&&s| s <= nsteps).map(|&s| (s, v0.clone())).collect();
        return Ok(record);
    }
    let limit = amplitude * T::lit(opts.blowup_factor.unwrap_or(1e6));
    let mut diag = Diagnostics::open(&opts.diagnostics)?;

    let mut conv_k = w.map(|w| Convolver::new(w, Kernel::K));
    let mut conv_v = w.map(|w| Convolver::new(w, Kernel::V));
    let half = T::lit(0.5);
    let dt2 = dt * dt;

    // λⁿ from the boundary equation once vⁿ is known; pushes the histories.
    let mut boundary_step = |n: usize, v: &[T], lam_out: &mut [T]| -> Result<()> {
        let (Some(ck), Some(cv), Some(solver)) = (conv_k.as_mut(), conv_v.as_mut(), v0_solver.as_ref()) else {
            lam_out.iter_mut().for_each(|x| *x = T::zero());
            return Ok(());
        };
        let tr = sys.boundary_values(v);
        ck.push(&tr);
        let mut rhs = ck.sum_at(n);
        let bt = sys.coupling.transpose_matvec(v);
        for (r, b) in rhs.iter_mut().zip(&bt) {
            *r -= half * *b;
        }
        if n > 0 {
            let past = cv.sum_at(n);
            for (r, p) in rhs.iter_mut().zip(&past) {
                *r -= *p;
            }
        }
        let total = solver.solve(&rhs);
        let rho_n = rho.map(|r| r.step(n));
        let mut full = total.clone();
        for (k, l) in lam_out.iter_mut().enumerate() {
            let r = rho_n.map(|r| r[k]).unwrap_or(T::zero());
            *l = total[k] - r;
            full[k] = total[k];
        }
        cv.push(&full);
        Ok(())
    };

    let check = |n: usize, v: &[T]| -> Result<T> {
        let m = max_abs(v);
        if !m.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(PatError::Unstable(format!("non-finite field at step {n}")));
        }
        if m > limit {
            return Err(PatError::Unstable(format!("field amplitude {m:e} at step {n} exceeds {limit:e}")));
        }
        Ok(m)
    };

    let mut v_prev = v0.values.clone();
    sys.tie(&mut v_prev);
    trace.step_mut(0).copy_from_slice(&sys.boundary_values(&v_prev));
    boundary_step(0, &v_prev, lambda.step_mut(0))?;
    if opts.snapshots.contains(&0) {
        record.snapshots.push((0, v0.clone()));
    }

    // Zero initial velocity: v¹ = v⁰ + ½Δt² M⁻¹(−A v⁰ + B λ⁰).
    let mut force = sys.stiffness.matvec(&v_prev);
    force.iter_mut().for_each(|f| *f = -*f);
    sys.coupling.matvec_add(lambda.step(0), &mut force);
    let acc = sys.accelerate(&force)?;
    let mut v_cur: Vec<T> = v_prev.iter().zip(&acc).map(|(&v, &a)| v + half * dt2 * a).collect();

    let mut history: Vec<Vec<T>> = Vec::new();
    for n in 1..=nsteps {
        let m = check(n, &v_cur)?;
        if let Some(e) = &mut record.energy {
            let en = interior_energy(sys, &NodalField::new(v_prev.clone()), &NodalField::new(v_cur.clone()), dt)?;
            e.push(en);
            diag.row(n - 1, grid.time(n - 1), en, m)?;
        } else {
            diag.row(n - 1, grid.time(n - 1), T::nan(), m)?;
        }
        trace.step_mut(n).copy_from_slice(&sys.boundary_values(&v_cur));
        boundary_step(n, &v_cur, lambda.step_mut(n))?;
        if opts.snapshots.contains(&n) {
            record.snapshots.push((n, NodalField::new(v_cur.clone())));
        }
        if n + 3 > nsteps {
            history.push(v_prev.clone());
        }
        if n == nsteps {
            break;
        }
        let mut force = sys.stiffness.matvec(&v_cur);
        force.iter_mut().for_each(|f| *f = -*f);
        sys.coupling.matvec_add(lambda.step(n), &mut force);
        let acc = sys.accelerate(&force)?;
        let next: Vec<T> = v_cur.iter().zip(&v_prev).zip(&acc).map(|((&c, &p), &a)| T::lit(2.0) * c - p + dt2 * a).collect();
        v_prev = std::mem::replace(&mut v_cur, next);
    }
    diag.finish()?;
    history.push(v_cur);
    let keep = history.len().saturating_sub(3);
    record.last = history.split_off(keep).into_iter().map(NodalField::new).collect();
    record.trace = trace;
    record.lambda = lambda;
    Ok(record)
}

/// Dirichlet data for every boundary dof: vertex values, and the mean of the
/// two end values at each boundary-edge midpoint.
fn dirichlet_dofs<T: Real>(sys: &WaveSystem<T>, values: &[T], out: &mut [T]) {
    let mesh = &sys.space.mesh;
    let nb = mesh.n_boundary();
    let nv = mesh.n_vertices();
    let half = T::lit(0.5);
    for k in 0..nb {
        out[mesh.boundary_nodes[k]] = values[k];
        let (e, _) = mesh.boundary_edges[k];
        out[nv + e] = half * (values[k] + values[(k + 1) % nb]);
    }
}

/// Leapfrog march of the interior problem with Dirichlet data imposed
/// strongly. Starts from `u⁰ = first` and either `u¹ = second` or, when
/// `second` is `None`, the zero-velocity half step. `data(k)` gives the
/// boundary-node values at march step `k`. Returns `(u^{K−1}, u^K)`.
pub fn march_interior_dirichlet<'a, T: Real>(
    sys: &WaveSystem<T>,
    first: &[T],
    second: Option<&[T]>,
    data: impl Fn(usize) -> &'a [T],
    steps: usize,
    dt: T,
) -> Result<(Vec<T>, Vec<T>)> {
    if first.len() != sys.n_dofs() || second.is_some_and(|s| s.len() != sys.n_dofs()) {
        return Err(PatError::DimensionMismatch("interior march start states".into()));
    }
    let dt2 = dt * dt;
    let fixed = &sys.space.is_boundary_dof;
    let amplitude = max_abs(first).max(second.map_or(T::zero(), max_abs)).max(
        (0..=steps).map(|k| max_abs(data(k))).fold(T::zero(), T::max),
    );
    let mut prev = first.to_vec();
    dirichlet_dofs(sys, data(0), &mut prev);
    if amplitude == T::zero() || steps == 0 {
        return Ok((prev.clone(), prev));
    }
    let limit = amplitude * T::lit(1e6);
    let advance = |prev: &[T], cur: &[T], half_step: bool, bdata: &[T]| -> Result<Vec<T>> {
        let force: Vec<T> = sys.stiffness.matvec(cur).into_iter().map(|x| -x).collect();
        let base: Vec<T> = if half_step {
            cur.to_vec()
        } else {
            cur.iter().zip(prev).map(|(&c, &p)| T::lit(2.0) * c - p).collect()
        };
        let scale = if half_step { T::lit(0.5) * dt2 } else { dt2 };
        let mut next = match sys.mass.mode {
            MassMode::Lumped => {
                let acc = sys.mass.solve(&force)?;
                base.iter().zip(&acc).map(|(&b, &a)| b + scale * a).collect::<Vec<T>>()
            }
            MassMode::Consistent => {
                // M x = M·base + scale·f on free rows, x fixed on the boundary.
                let mut rhs = sys.mass.apply(&base);
                for (r, f) in rhs.iter_mut().zip(&force) {
                    *r += scale * *f;
                }
                let mut x = base.clone();
                dirichlet_dofs(sys, bdata, &mut x);
                conjugate_gradient(&sys.mass.matrix, &rhs, &mut x, fixed, T::lit(1e-13), 1000)?;
                x
            }
        };
        dirichlet_dofs(sys, bdata, &mut next);
        Ok(next)
    };
    let mut cur = match second {
        Some(s) => {
            let mut c = s.to_vec();
            dirichlet_dofs(sys, data(1), &mut c);
            c
        }
        None => advance(&prev, &prev, true, data(1))?,
    };
    for k in 2..=steps {
        let next = advance(&prev, &cur, false, data(k))?;
        let m = max_abs(&next);
        if !m.is_finite() || m > limit {
            return Err(PatError::Unstable(format!("interior march blew up at step {k}")));
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Ok((prev, cur))
}

/// Solves `(1/c²)z'' − Δz = 0` in Ω backward from `z(T) = final_value`,
/// `z'(T) = 0`, with `z = g` on ∂Ω imposed strongly, and returns `z(·, 0)`.
pub fn solve_interior_dirichlet_backward<T: Real>(
    sys: &WaveSystem<T>,
    g: &BoundaryTrace<T>,
    final_value: &NodalField<T>,
    grid: &TimeGrid<T>,
) -> Result<NodalField<T>> {
    sys.space.check_field(final_value)?;
    let nb = sys.n_boundary();
    if g.n_b != nb || g.n_steps != grid.n_steps || (g.dt - grid.dt).abs() > T::lit(1e-12) * grid.dt {
        return Err(PatError::DimensionMismatch("boundary data does not match the solve grid".into()));
    }
    let n = grid.n_steps;
    // Reversed time τ = T − t: march step k carries g at t = T − kΔt.
    let (_, z0) = march_interior_dirichlet(sys, &final_value.values, None, |k| g.step(n - k), n, grid.dt)?;
    Ok(NodalField::new(z0))
}

/// `−Δu = rhs` weakly with `u = 0` on ∂Ω; `rhs` is a field, its load is `M rhs`.
pub fn solve_poisson_dirichlet<T: Real>(sys: &WaveSystem<T>, rhs: &NodalField<T>) -> Result<NodalField<T>> {
    sys.space.check_field(rhs)?;
    let load = sys.plain_mass.matvec(&rhs.values);
    solve_poisson_load(sys, &load)
}

/// Poisson solve with an already assembled load vector `(∫ ψ φ_i)_i`.
pub fn solve_poisson_load<T: Real>(sys: &WaveSystem<T>, load: &[T]) -> Result<NodalField<T>> {
    if load.len() != sys.n_dofs() {
        return Err(PatError::DimensionMismatch(format!("load of length {} for {} dofs", load.len(), sys.n_dofs())));
    }
    let mut x = vec![T::zero(); sys.n_dofs()];
    if load.iter().all(|&v| v == T::zero()) {
        return Ok(NodalField::new(x));
    }
    conjugate_gradient(&sys.stiffness, load, &mut x, &sys.space.is_boundary_dof, T::lit(1e-13).max(T::epsilon() * T::lit(100.0)), 20_000)?;
    Ok(NodalField::new(x))
}

/// Discrete harmonic extension of values at the boundary nodes.
pub fn solve_laplace_dirichlet<T: Real>(sys: &WaveSystem<T>, boundary_values: &[T]) -> Result<NodalField<T>> {
    if boundary_values.len() != sys.n_boundary() {
        return Err(PatError::DimensionMismatch(format!(
            "{} boundary values for {} boundary nodes",
            boundary_values.len(),
            sys.n_boundary()
        )));
    }
    let mut x = vec![T::zero(); sys.n_dofs()];
    dirichlet_dofs(sys, boundary_values, &mut x);
    let zero = vec![T::zero(); sys.n_dofs()];
    conjugate_gradient(&sys.stiffness, &zero, &mut x, &sys.space.is_boundary_dof, T::lit(1e-14).max(T::epsilon() * T::lit(100.0)), 20_000)?;
    Ok(NodalField::new(x))
}
