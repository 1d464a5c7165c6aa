//! Convolution quadrature (BDF2) for the retarded single- and double-layer
//! potentials of the 2D wave equation on a circle.
//!
//! The Laplace-domain kernels are Φ_s(r) = K₀(sr)/(2π) and
//! ∂Φ_s/∂n_y = −s K₁(sr)/(2π) · ∂r/∂n_y. For P1 hats on the exact circle of
//! radius R every Galerkin entry reduces to a single integral over the angle
//! difference δ,
//!
//! ```text
//!     ∫∫ ψ_i ψ_j G(r) dS dS = R² ∫ W_ij(δ) G(2R|sin(δ/2)|) dδ,
//!     W_ij(δ) = ∫ ψ_i(φ) ψ_j(φ + δ) dφ,
//! ```
//!
//! and on the circle ∂r/∂n_y = r/(2R), so the double-layer integrand is
//! bounded. W_ij is a piecewise cubic; each piece is integrated with Gauss
//! rules, geometrically graded towards δ ≡ 0 where K₀ has its logarithm, and
//! subdivided so a panel never spans more than a couple of radians of phase.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::bessel::bessel_k01;
use crate::error::{PatError, Result};
use crate::fem::gauss_legendre_unit;
use crate::geometry::BoundaryGrid;
use crate::linalg::DenseLu;
use crate::scalar::Real;

/// BDF2 generating polynomial.
pub fn gamma_bdf2<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(T::lit(1.5), T::zero()) - z * T::lit(2.0) + z * z * T::lit(0.5)
}

/// Contour parameters: `L = 2N` samples on the circle of radius `β = ε^{1/(2N)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CQConfig<T> {
    pub l: usize,
    pub beta: T,
    pub machine_eps: T,
}

impl<T: Real> CQConfig<T> {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(PatError::InvalidInput("convolution quadrature needs N >= 1".into()));
        }
        let eps = T::unit_roundoff();
        let l = 2 * n_steps;
        Ok(Self { l, beta: eps.powf(T::one() / T::from_usize_lossy(l)), machine_eps: eps })
    }

    /// Laplace parameter of sample `l`.
    pub fn frequency(&self, l: usize, dt: T) -> Complex<T> {
        let theta = T::TAU() * T::from_usize_lossy(l) / T::from_usize_lossy(self.l);
        gamma_bdf2(Complex::from_polar(self.beta, theta)) / dt
    }
}

/// Which transfer samples are evaluated. `Half` uses `F(s̄) = conj F(s)`;
/// `Full` evaluates all `L` samples and is only useful for testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Spectrum {
    #[default]
    Half,
    Full,
}

/// Inverse step of the CQ: given `samples[c][l] = F_c(s_l)` for each channel
/// `c` (length `L/2 + 1` for `Half`, `L` for `Full`), returns all `L` real
/// weights per channel and the largest discarded imaginary part relative to
/// the largest weight.
fn samples_to_weights<T: Real>(
    cfg: &CQConfig<T>,
    samples: &[Vec<Complex<T>>],
    spectrum: Spectrum,
) -> (Vec<Vec<T>>, T) {
    let l = cfg.l;
    let fft = FftPlanner::<T>::new().plan_fft_forward(l);
    let inv_l = T::one() / T::from_usize_lossy(l);
    let mut beta_pow = Vec::with_capacity(l);
    let mut b = T::one();
    let inv_beta = T::one() / cfg.beta;
    for _ in 0..l {
        beta_pow.push(b);
        b *= inv_beta;
    }
    let mut max_imag = T::zero();
    let mut max_abs = T::zero();
    let mut out = Vec::with_capacity(samples.len());
    let mut buf = vec![Complex::new(T::zero(), T::zero()); l];
    for ch in samples {
        match spectrum {
            Spectrum::Half => {
                buf[..=l / 2].copy_from_slice(&ch[..=l / 2]);
                for k in 1..l / 2 {
                    buf[l - k] = ch[k].conj();
                }
                // s_0 and s_{L/2} are real, so are their samples.
                buf[0].im = T::zero();
                buf[l / 2].im = T::zero();
            }
            Spectrum::Full => buf.copy_from_slice(&ch[..l]),
        }
        fft.process(&mut buf);
        let w: Vec<T> = buf
            .iter()
            .zip(&beta_pow)
            .map(|(c, &bp)| {
                let v = c * (bp * inv_l);
                max_imag = max_imag.max(v.im.abs());
                max_abs = max_abs.max(v.re.abs());
                v.re
            })
            .collect();
        out.push(w);
    }
    let residue = if max_abs > T::zero() { max_imag / max_abs } else { T::zero() };
    (out, residue)
}

/// CQ weights `w_0..w_{L-1}` of a scalar transfer function; the first
/// `N + 1` are the ones a time march of `N` steps uses.
pub fn scalar_cq_weights<T: Real, F: Fn(Complex<T>) -> Complex<T>>(
    transfer: F,
    n_steps: usize,
    dt: T,
    spectrum: Spectrum,
) -> Result<(Vec<T>, T)> {
    if !(dt > T::zero()) {
        return Err(PatError::InvalidInput("time step must be positive".into()));
    }
    let cfg = CQConfig::new(n_steps)?;
    let count = match spectrum {
        Spectrum::Half => cfg.l / 2 + 1,
        Spectrum::Full => cfg.l,
    };
    let samples: Vec<Complex<T>> = (0..count).map(|l| transfer(cfg.frequency(l, dt))).collect();
    let (mut w, res) = samples_to_weights(&cfg, &[samples], spectrum);
    Ok((w.pop().unwrap_or_default(), res))
}

/// Kernel selector for the retarded potentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Single layer, K₀(rs)/(2π).
    V,
    /// Double layer, −s K₁(rs)/(2π) · ∂r/∂n_y.
    K,
}

/// Storage of the per-step weight matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Equally spaced nodes: each matrix is circulant and stored by its first row.
    Circulant,
    /// General node spacing: full row-major matrices.
    Dense,
}

/// Weight matrices `Wv[n]`, `Wk[n]` for `n = 0..=N`.
#[derive(Clone, Debug)]
pub struct CQWeightSet<T> {
    pub dt: T,
    pub n_steps: usize,
    pub n_b: usize,
    pub radius: T,
    pub beta: T,
    pub l: usize,
    pub layout: Layout,
    /// Largest discarded imaginary part relative to the largest weight.
    pub imag_residue: T,
    wv: Vec<Vec<T>>,
    wk: Vec<Vec<T>>,
    /// Eigenvalues of the circulant matrices (real, since they are symmetric).
    spectra: Option<(Vec<Vec<T>>, Vec<Vec<T>>)>,
}

impl<T: Real> CQWeightSet<T> {
    fn with_spectra(mut self) -> Self {
        if self.layout == Layout::Circulant {
            let nb = self.n_b;
            let fft = FftPlanner::<T>::new().plan_fft_forward(nb);
            let eig = |rows: &[Vec<T>]| -> Vec<Vec<T>> {
                rows.iter()
                    .map(|r| {
                        let mut buf: Vec<Complex<T>> = r.iter().map(|&x| Complex::new(x, T::zero())).collect();
                        fft.process(&mut buf);
                        buf.iter().map(|c| c.re).collect()
                    })
                    .collect()
            };
            self.spectra = Some((eig(&self.wv), eig(&self.wk)));
        }
        self
    }

    fn spectrum(&self, kind: Kernel) -> Option<&[Vec<T>]> {
        self.spectra.as_ref().map(|(v, k)| match kind {
            Kernel::V => v.as_slice(),
            Kernel::K => k.as_slice(),
        })
    }

    fn store(&self, kind: Kernel) -> &[Vec<T>] {
        match kind {
            Kernel::V => &self.wv,
            Kernel::K => &self.wk,
        }
    }

    /// Entry `(i, j)` of `W[n]`.
    pub fn entry(&self, kind: Kernel, n: usize, i: usize, j: usize) -> T {
        let w = &self.store(kind)[n];
        match self.layout {
            Layout::Circulant => w[(j + self.n_b - i) % self.n_b],
            Layout::Dense => w[i * self.n_b + j],
        }
    }

    /// `W[n]` as a row-major dense matrix.
    pub fn matrix(&self, kind: Kernel, n: usize) -> Vec<T> {
        let nb = self.n_b;
        match self.layout {
            Layout::Dense => self.store(kind)[n].clone(),
            Layout::Circulant => {
                let mut m = Vec::with_capacity(nb * nb);
                for i in 0..nb {
                    for j in 0..nb {
                        m.push(self.entry(kind, n, i, j));
                    }
                }
                m
            }
        }
    }

    /// `y += W[n] x`
    pub fn apply_add(&self, kind: Kernel, n: usize, x: &[T], y: &mut [T]) {
        let nb = self.n_b;
        let w = &self.store(kind)[n];
        match self.layout {
            Layout::Circulant => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let (head, tail) = x.split_at(i);
                    let mut s = T::zero();
                    for (k, &xk) in tail.iter().enumerate() {
                        s += w[k] * xk;
                    }
                    for (k, &xk) in head.iter().enumerate() {
                        s += w[nb - i + k] * xk;
                    }
                    *yi += s;
                }
            }
            Layout::Dense => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &w[i * nb..(i + 1) * nb];
                    *yi += row.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
        }
    }

    /// LU factorisation of `Wv[0]`, reused at every time step.
    pub fn factor_v0(&self) -> Result<DenseLu<T>> {
        DenseLu::factor(self.n_b, self.matrix(Kernel::V, 0))
            .map_err(|e| PatError::Singular(format!("Wv[0] is not invertible: {e}")))
    }

    /// Largest absolute entry of `W[n]` (row-sum norm for circulant storage).
    pub fn inf_norm(&self, kind: Kernel, n: usize) -> T {
        let nb = self.n_b;
        let w = &self.store(kind)[n];
        match self.layout {
            Layout::Circulant => w.iter().map(|v| v.abs()).sum(),
            Layout::Dense => (0..nb)
                .map(|i| w[i * nb..(i + 1) * nb].iter().map(|v| v.abs()).sum())
                .fold(T::zero(), T::max),
        }
    }
}

/// `Σ_{j=0}^{n} W[n−j] φ^j`.
pub fn retarded_convolve<T: Real>(weights: &CQWeightSet<T>, kind: Kernel, history: &[Vec<T>], n: usize) -> Result<Vec<T>> {
    if history.len() != n + 1 {
        return Err(PatError::DimensionMismatch(format!("history has {} entries, step {n} needs {}", history.len(), n + 1)));
    }
    if n > weights.n_steps {
        return Err(PatError::DimensionMismatch(format!("step {n} beyond the {} computed weights", weights.n_steps)));
    }
    let mut y = vec![T::zero(); weights.n_b];
    for (j, phi) in history.iter().enumerate() {
        if phi.len() != weights.n_b {
            return Err(PatError::DimensionMismatch(format!("boundary vector of length {}, expected {}", phi.len(), weights.n_b)));
        }
        weights.apply_add(kind, n - j, phi, &mut y);
    }
    Ok(y)
}

/// One hat function on unwrapped angles: left node, peak, right node.
#[derive(Clone, Copy, Debug)]
struct Hat<T> {
    a: [T; 3],
}

impl<T: Real> Hat<T> {
    fn of(angles: &[T], i: usize) -> Self {
        let n = angles.len();
        let tau = T::TAU();
        let left = if i == 0 { angles[n - 1] - tau } else { angles[i - 1] };
        let right = if i + 1 == n { angles[0] + tau } else { angles[i + 1] };
        Self { a: [left, angles[i], right] }
    }

    fn value(&self, x: T) -> T {
        let [l, c, r] = self.a;
        if x <= l || x >= r {
            T::zero()
        } else if x <= c {
            (x - l) / (c - l)
        } else {
            (r - x) / (r - c)
        }
    }
}

/// `W(δ) = ∫ ψ_i(φ) ψ_j(φ + δ) dφ`, exact (2-point Gauss per linear piece).
fn correlation<T: Real>(hi: &Hat<T>, hj: &Hat<T>, delta: T) -> T {
    let lo = hi.a[0].max(hj.a[0] - delta);
    let up = hi.a[2].min(hj.a[2] - delta);
    if up <= lo {
        return T::zero();
    }
    let mut cuts = [lo, hi.a[1], hj.a[1] - delta, up];
    cuts[1..3].sort_by(|a, b| a.partial_cmp(b).unwrap());
    let g = T::lit(0.5 / 3f64.sqrt());
    let half = T::lit(0.5);
    let mut s = T::zero();
    for k in 0..3 {
        let a = cuts[k].max(lo);
        let b = cuts[k + 1].min(up);
        if b <= a {
            continue;
        }
        let (m, w) = ((a + b) * half, b - a);
        for x in [m - g * w, m + g * w] {
            s += half * w * hi.value(x) * hj.value(x + delta);
        }
    }
    s
}

/// A smooth piece `[lo, hi]` of the δ-integrand; `singular` marks an endpoint
/// at a multiple of 2π (0 = lo, 1 = hi).
#[derive(Clone, Copy, Debug)]
struct Piece<T> {
    lo: T,
    hi: T,
    singular: Option<usize>,
}

fn pieces<T: Real>(hi: &Hat<T>, hj: &Hat<T>) -> Vec<Piece<T>> {
    let tau = T::TAU();
    let mut bps = Vec::with_capacity(12);
    for &b in &hj.a {
        for &a in &hi.a {
            bps.push(b - a);
        }
    }
    let (lo, up) = (hj.a[0] - hi.a[2], hj.a[2] - hi.a[0]);
    let mut k = (lo / tau).ceil();
    while k * tau <= up {
        bps.push(k * tau);
        k += T::one();
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = T::lit(1e-12) * tau;
    bps.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let near_period = |x: T| {
        let r = x / tau;
        (r - r.round()).abs() * tau <= tol
    };
    bps.windows(2)
        .filter(|w| w[1] - w[0] > tol)
        .map(|w| {
            let singular = if near_period(w[0]) {
                Some(0)
            } else if near_period(w[1]) {
                Some(1)
            } else {
                None
            };
            Piece { lo: w[0], hi: w[1], singular }
        })
        .collect()
}

/// Entry integrals over the pieces of one hat pair, frequency independent.
#[derive(Clone, Debug)]
struct PairQuadrature<T> {
    hi: Hat<T>,
    hj: Hat<T>,
    pieces: Vec<Piece<T>>,
}

struct Rules<T> {
    gauss: Vec<(T, T)>,
    grading: T,
    levels: usize,
}

impl<T: Real> Rules<T> {
    fn new() -> Self {
        let gauss = gauss_legendre_unit(8).into_iter().map(|(x, w)| (T::lit(x), T::lit(w))).collect();
        let levels = if T::epsilon() < T::lit(1e-10) { 18 } else { 8 };
        Self { gauss, grading: T::lit(0.15), levels }
    }
}

/// Galerkin entries of both kernels for one hat pair at Laplace parameter `s`.
fn pair_entries<T: Real>(q: &PairQuadrature<T>, s: Complex<T>, radius: T, rules: &Rules<T>) -> Result<(Complex<T>, Complex<T>)> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let inv_2pi = T::one() / T::TAU();
    let phase_per_panel = T::lit(1.5);
    let cutoff = T::lit(50.0);
    let s_abs = s.norm();
    let mut acc_v = Complex::new(T::zero(), T::zero());
    let mut acc_k = acc_v;
    let r_of = |d: T| two * radius * (d * half).sin().abs();

    let panel = |a: T, b: T, acc_v: &mut Complex<T>, acc_k: &mut Complex<T>| -> Result<()> {
        let m = ((s_abs * radius * (b - a) / phase_per_panel).ceil().to_usize().unwrap_or(1)).clamp(1, 1 << 14);
        let width = (b - a) / T::from_usize_lossy(m);
        for p in 0..m {
            let a0 = a + width * T::from_usize_lossy(p);
            let rmin = r_of(a0).min(r_of(a0 + width));
            if s.re * rmin > cutoff {
                continue;
            }
            for &(x, w) in &rules.gauss {
                let d = a0 + x * width;
                let wt = correlation(&q.hi, &q.hj, d) * w * width;
                if wt == T::zero() {
                    continue;
                }
                let r = r_of(d);
                let z = s * r;
                let k = bessel_k01(z)?;
                *acc_v += k.k0 * (wt * inv_2pi);
                // −s K₁(rs) · r/(2R) / (2π)
                *acc_k -= s * k.k1 * (wt * r / (two * radius) * inv_2pi);
            }
        }
        Ok(())
    };

    for pc in &q.pieces {
        let len = pc.hi - pc.lo;
        match pc.singular {
            None => panel(pc.lo, pc.hi, &mut acc_v, &mut acc_k)?,
            Some(end) => {
                // Geometric panels towards the singular endpoint.
                let mut outer = len;
                for lev in 0..=rules.levels {
                    let inner = if lev == rules.levels { T::zero() } else { outer * rules.grading };
                    let (a, b) = if end == 0 { (pc.lo + inner, pc.lo + outer) } else { (pc.hi - outer, pc.hi - inner) };
                    panel(a, b, &mut acc_v, &mut acc_k)?;
                    outer = inner;
                }
            }
        }
    }
    let r2 = radius * radius;
    Ok((acc_v * r2, acc_k * r2))
}

/// Index pairs whose entries are computed; the rest follow by symmetry.
fn entry_pairs(n: usize, circulant: bool) -> Vec<(usize, usize)> {
    if circulant {
        (0..=n / 2).map(|d| (0, d)).collect()
    } else {
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }
}

fn pair_quadratures<T: Real>(boundary: &BoundaryGrid<T>, pairs: &[(usize, usize)]) -> Vec<PairQuadrature<T>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let hi = Hat::of(&boundary.angles, i);
            let hj = Hat::of(&boundary.angles, j);
            PairQuadrature { hi, hj, pieces: pieces(&hi, &hj) }
        })
        .collect()
}

fn expand<U: Copy + Default>(n: usize, circulant: bool, pairs: &[(usize, usize)], vals: &[U]) -> Vec<U> {
    let mut out = vec![U::default(); if circulant { n } else { n * n }];
    for (&(i, j), &v) in pairs.iter().zip(vals) {
        if circulant {
            out[j] = v;
            out[(n - j) % n] = v;
        } else {
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Dense Galerkin matrices `(V(s), K(s))` of both kernels at one Laplace
/// parameter, row-major `n_b × n_b`.
pub fn galerkin_matrices<T: Real>(boundary: &BoundaryGrid<T>, s: Complex<T>) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    if !(s.re > T::zero()) {
        return Err(PatError::BesselDomain(format!("Laplace parameter {s} must have positive real part")));
    }
    let n = boundary.len();
    let pairs = entry_pairs(n, false);
    let quads = pair_quadratures(boundary, &pairs);
    let rules = Rules::new();
    let mut v = vec![Complex::new(T::zero(), T::zero()); n * n];
    let mut k = v.clone();
    for (&(i, j), q) in pairs.iter().zip(&quads) {
        let (a, b) = pair_entries(q, s, boundary.radius, &rules)?;
        v[i * n + j] = a;
        v[j * n + i] = a;
        k[i * n + j] = b;
        k[j * n + i] = b;
    }
    Ok((v, k))
}

/// Options of [`compute_cq_weights_with`].
#[derive(Clone, Debug, Default)]
pub struct CQOptions {
    pub spectrum: Spectrum,
    /// Directory of the on-disk weight cache; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl CQOptions {
    /// Cache directory taken from `PAT_CACHE_DIR`, if set.
    pub fn from_env() -> Self {
        Self { spectrum: Spectrum::Half, cache_dir: std::env::var_os("PAT_CACHE_DIR").map(PathBuf::from) }
    }
}

/// CQ weight matrices for `N` steps of size `dt` on `boundary`, cached under
/// `PAT_CACHE_DIR` when that variable is set.
pub fn compute_cq_weights<T: Real>(boundary: &BoundaryGrid<T>, n_steps: usize, dt: T) -> Result<CQWeightSet<T>> {
    compute_cq_weights_with(boundary, n_steps, dt, &CQOptions::from_env())
}

pub fn compute_cq_weights_with<T: Real>(
    boundary: &BoundaryGrid<T>,
    n_steps: usize,
    dt: T,
    opts: &CQOptions,
) -> Result<CQWeightSet<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(PatError::InvalidInput(format!("time step {dt} must be positive")));
    }
    let n = boundary.len();
    if n < 3 {
        return Err(PatError::InvalidInput("boundary needs at least three nodes".into()));
    }
    let cfg = CQConfig::<T>::new(n_steps)?;
    let cache_path = opts.cache_dir.as_ref().map(|d| d.join(format!("cq-{}.pacq", cache_key(boundary, n_steps, dt))));
    if let Some(p) = &cache_path {
        if p.exists() {
            if let Ok(w) = read_cache(p, boundary, n_steps, dt) {
                return Ok(w);
            }
        }
    }

    let circulant = boundary.is_uniform();
    let pairs = entry_pairs(n, circulant);
    let quads = pair_quadratures(boundary, &pairs);
    let count = match opts.spectrum {
        Spectrum::Half => cfg.l / 2 + 1,
        Spectrum::Full => cfg.l,
    };
    let radius = boundary.radius;
    let per_freq: Vec<(Vec<Complex<T>>, Vec<Complex<T>>)> = (0..count)
        .into_par_iter()
        .map(|l| {
            let s = cfg.frequency(l, dt);
            let rules = Rules::new();
            let mut v = Vec::with_capacity(quads.len());
            let mut k = Vec::with_capacity(quads.len());
            for q in &quads {
                let (a, b) = pair_entries(q, s, radius, &rules)?;
                v.push(a);
                k.push(b);
            }
            Ok((v, k))
        })
        .collect::<Result<_>>()?;

    let channels = |pick: fn(&(Vec<Complex<T>>, Vec<Complex<T>>)) -> &Vec<Complex<T>>| -> Vec<Vec<Complex<T>>> {
        (0..pairs.len()).map(|c| per_freq.iter().map(|f| pick(f)[c]).collect()).collect()
    };
    let (wv_ch, res_v) = samples_to_weights(&cfg, &channels(|f| &f.0), opts.spectrum);
    let (wk_ch, res_k) = samples_to_weights(&cfg, &channels(|f| &f.1), opts.spectrum);

    let to_steps = |ch: &[Vec<T>]| -> Vec<Vec<T>> {
        (0..=n_steps)
            .map(|step| {
                let vals: Vec<T> = ch.iter().map(|c| c[step]).collect();
                expand(n, circulant, &pairs, &vals)
            })
            .collect()
    };
    let set = CQWeightSet {
        dt,
        n_steps,
        n_b: n,
        radius,
        beta: cfg.beta,
        l: cfg.l,
        layout: if circulant { Layout::Circulant } else { Layout::Dense },
        imag_residue: res_v.max(res_k),
        wv: to_steps(&wv_ch),
        wk: to_steps(&wk_ch),
        spectra: None,
    }
    .with_spectra();
    if set.wv.iter().chain(&set.wk).flatten().any(|v| !v.is_finite()) {
        return Err(PatError::Unstable("non-finite convolution weight".into()));
    }
    set.factor_v0()?;
    if let Some(p) = &cache_path {
        // A failed cache write only costs a recomputation next time.
        let _ = write_cache(p, &set, boundary);
    }
    Ok(set)
}

/// Solver for `Wv[0] x = b`: diagonal in Fourier space for circulant
/// weights, LU otherwise.
pub enum V0Solver<T: Real> {
    Spectral { inv_eig: Vec<T>, fft: std::sync::Arc<dyn rustfft::Fft<T>>, ifft: std::sync::Arc<dyn rustfft::Fft<T>> },
    Lu(DenseLu<T>),
}

impl<T: Real> V0Solver<T> {
    pub fn new(w: &CQWeightSet<T>) -> Result<Self> {
        match w.spectrum(Kernel::V) {
            Some(spec) => {
                let eig = &spec[0];
                let scale = eig.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                if eig.iter().any(|v| v.abs() <= scale * T::epsilon() * T::lit(16.0)) {
                    return Err(PatError::Singular("Wv[0] is not invertible".into()));
                }
                let mut planner = FftPlanner::<T>::new();
                Ok(Self::Spectral {
                    inv_eig: eig.iter().map(|&v| T::one() / v).collect(),
                    fft: planner.plan_fft_forward(w.n_b),
                    ifft: planner.plan_fft_inverse(w.n_b),
                })
            }
            None => Ok(Self::Lu(w.factor_v0()?)),
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            Self::Lu(lu) => lu.solve(b),
            Self::Spectral { inv_eig, fft, ifft } => {
                let n = b.len();
                let mut buf: Vec<Complex<T>> = b.iter().map(|&x| Complex::new(x, T::zero())).collect();
                fft.process(&mut buf);
                for (c, &e) in buf.iter_mut().zip(inv_eig) {
                    *c = *c * e;
                }
                ifft.process(&mut buf);
                let inv_n = T::one() / T::from_usize_lossy(n);
                buf.iter().map(|c| c.re * inv_n).collect()
            }
        }
    }
}

/// Running history `φ⁰, φ¹, …` of one retarded potential. For circulant
/// weights the history is kept in Fourier space so each sum costs O(n·n_b).
pub struct Convolver<'a, T: Real> {
    w: &'a CQWeightSet<T>,
    kind: Kernel,
    real_hist: Vec<Vec<T>>,
    spec_hist: Vec<Vec<Complex<T>>>,
    fft: Option<(std::sync::Arc<dyn rustfft::Fft<T>>, std::sync::Arc<dyn rustfft::Fft<T>>)>,
}

impl<'a, T: Real> Convolver<'a, T> {
    pub fn new(w: &'a CQWeightSet<T>, kind: Kernel) -> Self {
        let fft = w.spectra.as_ref().map(|_| {
            let mut planner = FftPlanner::<T>::new();
            (planner.plan_fft_forward(w.n_b), planner.plan_fft_inverse(w.n_b))
        });
        Self { w, kind, real_hist: Vec::new(), spec_hist: Vec::new(), fft }
    }

    pub fn len(&self) -> usize {
        self.real_hist.len().max(self.spec_hist.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends the next history vector.
    pub fn push(&mut self, phi: &[T]) {
        match &self.fft {
            Some((fft, _)) => {
                let mut buf: Vec<Complex<T>> = phi.iter().map(|&x| Complex::new(x, T::zero())).collect();
                fft.process(&mut buf);
                self.spec_hist.push(buf);
            }
            None => self.real_hist.push(phi.to_vec()),
        }
    }

    /// `Σ_j W[n−j] φʲ` over the stored history; requires `n + 1 ≥ len`.
    pub fn sum_at(&self, n: usize) -> Vec<T> {
        let nb = self.w.n_b;
        match (&self.fft, self.w.spectrum(self.kind)) {
            (Some((_, ifft)), Some(spec)) => {
                let mut acc = vec![Complex::new(T::zero(), T::zero()); nb];
                for (j, h) in self.spec_hist.iter().enumerate() {
                    let e = &spec[n - j];
                    for ((a, &x), &ev) in acc.iter_mut().zip(h).zip(e) {
                        *a += x * ev;
                    }
                }
                ifft.process(&mut acc);
                let inv_n = T::one() / T::from_usize_lossy(nb);
                acc.iter().map(|c| c.re * inv_n).collect()
            }
            _ => {
                let mut y = vec![T::zero(); nb];
                for (j, h) in self.real_hist.iter().enumerate() {
                    self.w.apply_add(self.kind, n - j, h, &mut y);
                }
                y
            }
        }
    }
}

const CACHE_MAGIC: &[u8; 5] = b"PACQ1";

/// Content hash of everything the weights depend on.
pub fn cache_key<T: Real>(boundary: &BoundaryGrid<T>, n_steps: usize, dt: T) -> String {
    let mut h = Sha256::new();
    h.update(b"cq-bdf2-p1-circle-v1");
    h.update(std::mem::size_of::<T>().to_le_bytes());
    h.update((boundary.len() as u64).to_le_bytes());
    h.update((n_steps as u64).to_le_bytes());
    h.update(dt.as_f64().to_le_bytes());
    h.update(boundary.radius.as_f64().to_le_bytes());
    for a in &boundary.angles {
        h.update(a.as_f64().to_le_bytes());
    }
    hex::encode(&h.finalize()[..12])
}

/// Writes `PACQ1`, u32 n_b, u32 N, f64 Δt, f64 radius, then all `Wv` and all
/// `Wk` as dense row-major f64 little-endian blocks.
pub fn write_cache<T: Real>(path: &Path, set: &CQWeightSet<T>, boundary: &BoundaryGrid<T>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        f.write_all(CACHE_MAGIC)?;
        f.write_all(&(set.n_b as u32).to_le_bytes())?;
        f.write_all(&(set.n_steps as u32).to_le_bytes())?;
        f.write_all(&set.dt.as_f64().to_le_bytes())?;
        f.write_all(&boundary.radius.as_f64().to_le_bytes())?;
        for kind in [Kernel::V, Kernel::K] {
            for n in 0..=set.n_steps {
                for v in set.matrix(kind, n) {
                    f.write_all(&v.as_f64().to_le_bytes())?;
                }
            }
        }
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a cache file and checks that it matches the requested parameters.
pub fn read_cache<T: Real>(path: &Path, boundary: &BoundaryGrid<T>, n_steps: usize, dt: T) -> Result<CQWeightSet<T>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 5];
    f.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(PatError::Format("not a PACQ1 weight file".into()));
    }
    let mut u = [0u8; 4];
    let mut d = [0u8; 8];
    f.read_exact(&mut u)?;
    let nb = u32::from_le_bytes(u) as usize;
    f.read_exact(&mut u)?;
    let ns = u32::from_le_bytes(u) as usize;
    f.read_exact(&mut d)?;
    let fdt = f64::from_le_bytes(d);
    f.read_exact(&mut d)?;
    let frad = f64::from_le_bytes(d);
    if nb != boundary.len() || ns != n_steps || fdt != dt.as_f64() || frad != boundary.radius.as_f64() {
        return Err(PatError::Format("weight file parameters do not match".into()));
    }
    let mut read_block = || -> Result<Vec<Vec<T>>> {
        (0..=ns)
            .map(|_| {
                let mut buf = vec![0u8; nb * nb * 8];
                f.read_exact(&mut buf)?;
                Ok(buf.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect())
            })
            .collect()
    };
    let mut wv = read_block()?;
    let mut wk = read_block()?;
    let cfg = CQConfig::<T>::new(n_steps)?;
    let layout = if boundary.is_uniform() {
        for m in wv.iter_mut().chain(wk.iter_mut()) {
            m.truncate(nb);
        }
        Layout::Circulant
    } else {
        Layout::Dense
    };
    Ok(CQWeightSet {
        dt,
        n_steps,
        n_b: nb,
        radius: boundary.radius,
        beta: cfg.beta,
        l: cfg.l,
        layout,
        imag_residue: T::zero(),
        wv,
        wk,
        spectra: None,
    }
    .with_spectra())
}
