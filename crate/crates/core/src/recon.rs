//! Reconstruction: Landweber iteration with the discrepancy principle, time
//! reversal (plain and with harmonic extension of the final data) and the
//! Neumann series built on the latter.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PatError, Result};
use crate::fem::NodalField;
use crate::operators::{adjoint_l, forward_l, l2_sigma_norm, OperatorSetup};
use crate::scalar::Real;
use crate::trace::BoundaryTrace;
use crate::wavesolver::{solve_interior_dirichlet_backward, solve_laplace_dirichlet};

fn h10<T: Real>(setup: &OperatorSetup<T>, a: &NodalField<T>, b: &NodalField<T>) -> T {
    setup.system.stiffness.bilinear(&a.values, &b.values)
}

/// Result of the power iteration for `‖L‖²`.
#[derive(Clone, Debug)]
pub struct OmegaEstimate<T> {
    pub omega: T,
    pub lambda_max: T,
    /// Rayleigh quotient `⟨x, L*Lx⟩/⟨x, x⟩` (H₀¹) at every iteration.
    pub rayleigh: Vec<T>,
    /// False when the last three quotients spread by more than 10%.
    pub converged: bool,
}

/// Power iteration on `f ↦ L*Lf` in the H₀¹ product from a random start;
/// returns `ω = 0.95/λ_max`.
pub fn estimate_omega<T: Real>(setup: &OperatorSetup<T>, power_iters: usize, seed: u64) -> Result<OmegaEstimate<T>> {
    if power_iters < 5 {
        return Err(PatError::InvalidInput(format!("power iteration needs at least 5 steps, got {power_iters}")));
    }
    let space = setup.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Random vertex values, interpolated linearly onto the other dofs.
    let nv = space.n_vertices();
    let mut vert: Vec<T> = (0..nv).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
    for &b in &space.mesh.boundary_nodes {
        vert[b] = T::zero();
    }
    let mut x = space.zero_field();
    x.values[..nv].copy_from_slice(&vert);
    for (e, &[a, b]) in space.mesh.edges.iter().enumerate() {
        x.values[nv + e] = (vert[a] + vert[b]) * T::lit(0.5);
    }
    let ne = space.n_edges();
    for (t, tri) in space.mesh.triangles.iter().enumerate() {
        x.values[nv + ne + t] = (vert[tri[0]] + vert[tri[1]] + vert[tri[2]]) / T::lit(3.0);
    }
    let mut norm = h10(setup, &x, &x).sqrt();
    x = x.scaled(T::one() / norm);
    let mut rayleigh = Vec::with_capacity(power_iters);
    for _ in 0..power_iters {
        let y = adjoint_l(&forward_l(&x, setup)?, setup)?;
        rayleigh.push(h10(setup, &x, &y));
        norm = h10(setup, &y, &y).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(PatError::NotConverged("power iteration collapsed to zero".into()));
        }
        x = y.scaled(T::one() / norm);
    }
    let lambda_max = *rayleigh.last().expect("at least five iterations");
    let tail = &rayleigh[rayleigh.len() - 3..];
    let (lo, hi) = tail.iter().fold((T::infinity(), T::neg_infinity()), |(l, h), &v| (l.min(v), h.max(v)));
    let converged = hi - lo <= T::lit(0.1) * hi.abs();
    Ok(OmegaEstimate { omega: T::lit(0.95) / lambda_max, lambda_max, rayleigh, converged })
}

#[derive(Clone, Copy, Debug)]
pub struct LandweberConfig<T> {
    pub omega: T,
    pub tau: T,
    pub delta: T,
    pub k_max: usize,
    /// Keep every `snapshot_every`-th iterate; 0 keeps none.
    pub snapshot_every: usize,
}

impl<T: Real> LandweberConfig<T> {
    /// Defaults `τ = 1.5`, `k_max = 200`, snapshots every 5 iterations.
    pub fn new(omega: T, delta: T) -> Self {
        Self { omega, tau: T::lit(1.5), delta, k_max: 200, snapshot_every: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > T::zero()) || !self.omega.is_finite() {
            return Err(PatError::InvalidInput(format!("step size ω = {} must be positive", self.omega)));
        }
        if !(self.tau > T::one()) {
            return Err(PatError::InvalidInput(format!("discrepancy constant τ = {} must exceed 1", self.tau)));
        }
        if !(self.delta >= T::zero()) {
            return Err(PatError::InvalidInput(format!("noise level δ = {} must be non-negative", self.delta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    Cap,
}

#[derive(Clone, Debug)]
pub struct ReconReport<T> {
    pub iterate: NodalField<T>,
    /// `‖m − L f_k‖_{L²(Σ)}` for `k = 0..=iterations`.
    pub residuals: Vec<T>,
    /// Phantom error per iterate when a reference was supplied.
    pub errors: Option<Vec<T>>,
    /// First `k` with residual `≤ τδ`, i.e. where the continuation
    /// condition is violated for the first time.
    pub first_violation: Option<usize>,
    /// Index of the returned iterate.
    pub returned_index: usize,
    pub stop: StopReason,
    pub snapshots: Vec<(usize, NodalField<T>)>,
}

impl<T: Real> ReconReport<T> {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }

    /// CSV `iter,residual,phantom_error`; the last column is empty without a reference.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "iter,residual,phantom_error")?;
        for (k, r) in self.residuals.iter().enumerate() {
            match &self.errors {
                Some(e) => writeln!(f, "{k},{:e},{:e}", r.as_f64(), e[k].as_f64())?,
                None => writeln!(f, "{k},{:e},", r.as_f64())?,
            }
        }
        f.flush()?;
        Ok(())
    }
}

/// Relative error norms between fields on the same mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    L2,
    H01,
}

/// `‖f_rec − f_true‖/‖f_true‖` in the consistent L² or the H₀¹ product.
pub fn relative_error<T: Real>(f_rec: &NodalField<T>, f_true: &NodalField<T>, setup: &OperatorSetup<T>, norm: ErrorNorm) -> Result<T> {
    setup.space().check_field(f_rec)?;
    setup.space().check_field(f_true)?;
    let m = match norm {
        ErrorNorm::L2 => &setup.system.plain_mass,
        ErrorNorm::H01 => &setup.system.stiffness,
    };
    let reference = m.bilinear(&f_true.values, &f_true.values);
    if !(reference > T::zero()) {
        return Err(PatError::InvalidInput("reference field has zero norm".into()));
    }
    let d = f_rec.add_scaled(-T::one(), f_true);
    Ok((m.bilinear(&d.values, &d.values).max(T::zero()) / reference).sqrt())
}

/// `f_k = f_{k−1} − ω L*[L f_{k−1} − m]` from `f₀ = 0`, stopped by the
/// discrepancy principle `‖m − L f_k‖ ≤ τδ` or the iteration cap.
pub fn landweber<T: Real>(m: &BoundaryTrace<T>, setup: &OperatorSetup<T>, config: &LandweberConfig<T>) -> Result<ReconReport<T>> {
    landweber_tracked(m, setup, config, None)
}

/// [`landweber`] that also records the L² phantom error against `truth`.
pub fn landweber_tracked<T: Real>(
    m: &BoundaryTrace<T>,
    setup: &OperatorSetup<T>,
    config: &LandweberConfig<T>,
    truth: Option<&NodalField<T>>,
) -> Result<ReconReport<T>> {
    config.validate()?;
    setup.check_trace(m)?;
    let threshold = config.tau * config.delta;
    let mut f = setup.space().zero_field();
    let mut residual = m.scaled(-T::one());
    let mut residuals = vec![l2_sigma_norm(&residual)?];
    let mut errors = match truth {
        Some(t) => Some(vec![relative_error(&f, t, setup, ErrorNorm::L2)?]),
        None => None,
    };
    let mut snapshots = Vec::new();
    let mut first_violation = (residuals[0] <= threshold).then_some(0);
    let mut k = 0;
    while first_violation.is_none() && k < config.k_max {
        k += 1;
        let g = adjoint_l(&residual, setup)?;
        f = f.add_scaled(-config.omega, &g);
        residual = forward_l(&f, setup)?.add_scaled(-T::one(), m)?;
        let r = l2_sigma_norm(&residual)?;
        if !r.is_finite() {
            return Err(PatError::Unstable(format!("residual is not finite at iteration {k}")));
        }
        residuals.push(r);
        if let (Some(e), Some(t)) = (errors.as_mut(), truth) {
            e.push(relative_error(&f, t, setup, ErrorNorm::L2)?);
        }
        if config.snapshot_every > 0 && k % config.snapshot_every == 0 {
            snapshots.push((k, f.clone()));
        }
        if r <= threshold {
            first_violation = Some(k);
        }
    }
    let stop = if first_violation.is_some() { StopReason::Discrepancy } else { StopReason::Cap };
    Ok(ReconReport { iterate: f, residuals, errors, first_violation, returned_index: k, stop, snapshots })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeReversalMode {
    Plain,
    Harmonic,
}

/// Backward interior solve with `m` as Dirichlet data. The final value is 0
/// (plain) or the harmonic extension of `m(·, T)`.
pub fn time_reversal<T: Real>(m: &BoundaryTrace<T>, setup: &OperatorSetup<T>, mode: TimeReversalMode) -> Result<NodalField<T>> {
    setup.check_trace(m)?;
    let sys = &setup.system;
    let final_value = match mode {
        TimeReversalMode::Plain => sys.space.zero_field(),
        TimeReversalMode::Harmonic => solve_laplace_dirichlet(sys, m.step(m.n_steps))?,
    };
    solve_interior_dirichlet_backward(sys, m, &final_value, &setup.grid)
}

#[derive(Clone, Debug)]
pub struct NeumannResult<T> {
    pub field: NodalField<T>,
    /// H₀¹ norm of every partial sum `f₀ … f_J`.
    pub norms: Vec<T>,
    /// Set when a partial sum grew more than tenfold in one step.
    pub diverged: bool,
}

/// Zeroes the boundary dofs: time reversal returns `z(·, 0)`, whose trace is
/// the data at `t = 0`, while `L` is defined on H₀¹.
pub fn restrict_h01<T: Real>(setup: &OperatorSetup<T>, mut f: NodalField<T>) -> NodalField<T> {
    for &d in &setup.space().boundary_dofs {
        f.values[d] = T::zero();
    }
    f
}

/// `f₀ = L̃[m]`, `f_k = f_{k−1} − L̃[L f_{k−1} − m]` for `k = 1..=J`, with `L̃`
/// the harmonic-extension time reversal.
pub fn neumann_series<T: Real>(m: &BoundaryTrace<T>, setup: &OperatorSetup<T>, j: usize) -> Result<NeumannResult<T>> {
    let mut f = restrict_h01(setup, time_reversal(m, setup, TimeReversalMode::Harmonic)?);
    let mut norms = vec![h10(setup, &f, &f).sqrt()];
    let mut diverged = false;
    for _ in 0..j {
        let r = forward_l(&f, setup)?.add_scaled(-T::one(), m)?;
        let c = restrict_h01(setup, time_reversal(&r, setup, TimeReversalMode::Harmonic)?);
        f = f.add_scaled(-T::one(), &c);
        let n = h10(setup, &f, &f).sqrt();
        if n > T::lit(10.0) * *norms.last().expect("non-empty") && n > T::zero() {
            diverged = true;
        }
        norms.push(n);
    }
    Ok(NeumannResult { field: f, norms, diverged })
}
