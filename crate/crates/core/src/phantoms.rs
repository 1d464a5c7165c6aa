//! Initial pressure phantoms, sound-speed fields and the travel time T₀.
//!
//! Everything here is a pure function of position. Phantoms are built from
//! indicator functions whose edges are replaced by quintic ramps, so the
//! projected fields lie in H₀¹ and vanish well inside the disk.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use crate::error::{PatError, Result};
use crate::scalar::{Point2, Real};

/// `6t⁵ − 15t⁴ + 10t³` on `[0, 1]`, clamped outside: the C² step.
pub fn quintic_step<T: Real>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * t * (t * (t * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0))
}

/// Ramp across a signed distance `d` (negative inside): 1 for `d ≤ −w`,
/// 0 for `d ≥ w`. With `|∇d| ≤ 1` the slope is at most `15/(16w)`.
fn edge_ramp<T: Real>(d: T, w: T) -> T {
    if w <= T::zero() {
        return if d <= T::zero() { T::one() } else { T::zero() };
    }
    quintic_step((w - d) / (w + w))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpeedKind {
    Constant,
    NonTrapping,
    Trapping,
    Custom,
}

/// Sound speed on the plane. Non-constant fields equal their formula inside
/// `B_{R−ε}`, blend to 1 across `R−ε ≤ |x| ≤ R−ε/2` and are 1 beyond.
#[derive(Clone)]
pub struct SpeedField {
    pub kind: SpeedKind,
    pub radius: f64,
    pub eps_smooth: f64,
    pub c_min: f64,
    pub c_max: f64,
    value: f64,
    factor: f64,
    custom: Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for SpeedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpeedField")
            .field("kind", &self.kind)
            .field("radius", &self.radius)
            .field("eps_smooth", &self.eps_smooth)
            .field("c_min", &self.c_min)
            .field("c_max", &self.c_max)
            .finish()
    }
}

impl SpeedField {
    /// `c ≡ value` everywhere, without a blend.
    pub fn constant(value: f64, radius: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(PatError::InvalidInput(format!("constant speed {value} must be positive")));
        }
        Ok(Self { kind: SpeedKind::Constant, radius, eps_smooth: 0.0, c_min: value, c_max: value, value, factor: 1.0, custom: None })
    }

    /// `1 + 0.2 sin(2πx₁) + 0.1 cos(2πx₂)`.
    pub fn nontrapping(radius: f64) -> Self {
        Self::blended(SpeedKind::NonTrapping, radius, 0.1 * radius, 0.7, 1.3)
    }

    /// `1 + 0.5 sin(−3πx₁) cos(3πx₂)`.
    pub fn trapping(radius: f64) -> Self {
        Self::blended(SpeedKind::Trapping, radius, 0.1 * radius, 0.5, 1.5)
    }

    /// Arbitrary positive `c(x₁, x₂)`, blended to 1 like the built-in fields.
    /// Bounds are sampled on a 401×401 grid over the disk.
    pub fn custom(f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, radius: f64, eps_smooth: f64) -> Result<Self> {
        let mut s = Self::blended(SpeedKind::Custom, radius, eps_smooth, 1.0, 1.0);
        s.custom = Some(f);
        let n = 401;
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        for i in 0..n {
            for j in 0..n {
                let x = radius * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
                let y = radius * (2.0 * j as f64 / (n - 1) as f64 - 1.0);
                if x * x + y * y <= radius * radius {
                    let c = s.value(Point2::new(x, y));
                    if !(c > 0.0) || !c.is_finite() {
                        return Err(PatError::InvalidInput(format!("custom speed {c} at ({x}, {y}) must be positive")));
                    }
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
            }
        }
        s.c_min = lo;
        s.c_max = hi;
        Ok(s)
    }

    fn blended(kind: SpeedKind, radius: f64, eps_smooth: f64, c_min: f64, c_max: f64) -> Self {
        Self { kind, radius, eps_smooth, c_min, c_max, value: 1.0, factor: 1.0, custom: None }
    }

    /// Same field with a different blend width.
    pub fn with_eps_smooth(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || eps >= self.radius {
            return Err(PatError::InvalidInput(format!("blend width {eps} must lie in (0, radius)")));
        }
        self.eps_smooth = eps;
        Ok(self)
    }

    fn formula(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self.kind {
            SpeedKind::Constant => self.value,
            SpeedKind::NonTrapping => 1.0 + 0.2 * (2.0 * PI * x).sin() + 0.1 * (2.0 * PI * y).cos(),
            SpeedKind::Trapping => 1.0 + 0.5 * (-3.0 * PI * x).sin() * (3.0 * PI * y).cos(),
            SpeedKind::Custom => (self.custom.as_ref().expect("custom field has a function"))(x, y),
        }
    }

    /// `c(x)`.
    pub fn value<T: Real>(&self, p: Point2<T>) -> T {
        let (x, y) = (p.x.as_f64(), p.y.as_f64());
        T::lit(self.factor * self.unscaled(x, y))
    }

    fn unscaled(&self, x: f64, y: f64) -> f64 {
        if self.kind == SpeedKind::Constant {
            return self.value;
        }
        let r = (x * x + y * y).sqrt();
        let outer = self.radius - 0.5 * self.eps_smooth;
        if r >= outer {
            return 1.0;
        }
        let s = quintic_step((outer - r) / (0.5 * self.eps_smooth));
        1.0 + (self.formula(x, y) - 1.0) * s
    }

    /// `factor · c`, used to check how T₀ responds to faster media.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(PatError::InvalidInput(format!("scale {factor} must be positive")));
        }
        let mut s = self.clone();
        s.factor *= factor;
        s.c_min *= factor;
        s.c_max *= factor;
        Ok(s)
    }
}

/// `speed_value(field, x)`.
pub fn speed_value<T: Real>(field: &SpeedField, p: Point2<T>) -> T {
    field.value(p)
}

/// Modified Shepp–Logan ellipses (Toft): intensity, semi-axes a, b, centre,
/// rotation in degrees.
pub const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
];

/// Shepp–Logan for a disk of the given radius. The ramp of the outer
/// ellipse reaches `(0.92/0.69)·w` beyond it along the long axis, and the
/// table is scaled so that this still ends at `|x| = 0.9R`.
pub fn shepp_logan_in(p: Point2<f64>, smoothing: f64, radius: f64) -> f64 {
    let scale = (0.9 * radius - smoothing * 0.92 / 0.69) / 0.92;
    let mut v = 0.0;
    for e in SHEPP_LOGAN.iter() {
        let [rho, a, b, x0, y0, phi] = *e;
        let (s, c) = phi.to_radians().sin_cos();
        let dx = p.x / scale - x0;
        let dy = p.y / scale - y0;
        let u = (c * dx + s * dy) / a;
        let w = (-s * dx + c * dy) / b;
        let level = (u * u + w * w).sqrt();
        // (level − 1)·min(a, b) has gradient norm ≤ 1 in table units.
        let d = (level - 1.0) * a.min(b) * scale;
        v += rho * edge_ramp(d, smoothing);
    }
    v
}

/// `shepp_logan(x, smoothing)` on the unit disk.
pub fn shepp_logan(p: Point2<f64>, smoothing: f64) -> f64 {
    shepp_logan_in(p, smoothing, 1.0)
}

/// Disk of radius `r0` centred at `c` with peak value `v` and ramp half width `w`.
#[derive(Clone, Copy, Debug)]
pub struct SmoothDisk {
    pub centre: (f64, f64),
    pub r0: f64,
    pub peak: f64,
}

/// Annular sector between radii `r_in`, `r_out` around `centre`, angles
/// `[a0, a1]`; the angular ramp runs over angle `w / r_mid`.
#[derive(Clone, Copy, Debug)]
pub struct SmoothArc {
    pub centre: (f64, f64),
    pub r_in: f64,
    pub r_out: f64,
    pub a0: f64,
    pub a1: f64,
    pub peak: f64,
}

/// Ramp half width of the ghost phantom, in units of the radius.
pub const GHOST_RAMP: f64 = 0.03;

/// The ghost: head ring, two eyes and a mouth, all inside `|x| ≤ 0.9R` and
/// pairwise disjoint, so values stay in `[0, 1]`. Lengths are for R = 1.
pub fn ghost_parts() -> (Vec<SmoothDisk>, Vec<SmoothArc>) {
    let disks = vec![
        SmoothDisk { centre: (-0.28, 0.22), r0: 0.13, peak: 1.0 },
        SmoothDisk { centre: (0.3, 0.2), r0: 0.09, peak: 0.7 },
    ];
    let tau = std::f64::consts::TAU;
    let arcs = vec![
        SmoothArc { centre: (0.0, 0.0), r_in: 0.7, r_out: 0.8, a0: 0.0, a1: tau, peak: 0.5 },
        SmoothArc { centre: (0.0, -0.05), r_in: 0.36, r_out: 0.44, a0: 1.15 * std::f64::consts::PI, a1: 1.85 * std::f64::consts::PI, peak: 0.8 },
    ];
    (disks, arcs)
}

fn disk_value(d: &SmoothDisk, x: f64, y: f64) -> f64 {
    let r = ((x - d.centre.0).powi(2) + (y - d.centre.1).powi(2)).sqrt();
    d.peak * edge_ramp(r - d.r0, GHOST_RAMP)
}

fn angular_ramp(a: &SmoothArc, theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    if a.a1 - a.a0 >= tau {
        return 1.0;
    }
    let w = GHOST_RAMP / (0.5 * (a.r_in + a.r_out));
    let mid = 0.5 * (a.a0 + a.a1);
    let half = 0.5 * (a.a1 - a.a0);
    // Angle to the sector's mid line, wrapped into (−π, π].
    let mut off = (theta - mid).rem_euclid(tau);
    if off > std::f64::consts::PI {
        off -= tau;
    }
    edge_ramp(off.abs() - half, w)
}

fn arc_value(a: &SmoothArc, x: f64, y: f64) -> f64 {
    let (dx, dy) = (x - a.centre.0, y - a.centre.1);
    let r = (dx * dx + dy * dy).sqrt();
    let mid = 0.5 * (a.r_in + a.r_out);
    let half = 0.5 * (a.r_out - a.r_in);
    let radial = edge_ramp((r - mid).abs() - half, GHOST_RAMP);
    if radial == 0.0 {
        return 0.0;
    }
    a.peak * radial * angular_ramp(a, dy.atan2(dx))
}

/// `ghost_phantom(x)` on the unit disk.
pub fn ghost_phantom(p: Point2<f64>) -> f64 {
    ghost_phantom_in(p, 1.0)
}

/// Ghost phantom scaled to a disk of the given radius.
pub fn ghost_phantom_in(p: Point2<f64>, radius: f64) -> f64 {
    let (x, y) = (p.x / radius, p.y / radius);
    let (disks, arcs) = ghost_parts();
    disks.iter().map(|d| disk_value(d, x, y)).sum::<f64>() + arcs.iter().map(|a| arc_value(a, x, y)).sum::<f64>()
}

/// `∫ ghost` over the unit disk. Every part is separable in its own polar
/// coordinates and the ramps are polynomials, so Gauss rules per ramp
/// interval are exact.
pub fn ghost_integral() -> f64 {
    let g = crate::fem::gauss_legendre_unit(8);
    let integrate = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        g.iter().map(|&(t, w)| w * (b - a) * f(a + t * (b - a))).sum()
    };
    let w = GHOST_RAMP;
    let (disks, arcs) = ghost_parts();
    let mut total = 0.0;
    for d in &disks {
        let r_ramp = |r: f64| r * edge_ramp(r - d.r0, w);
        total += d.peak * std::f64::consts::TAU * (integrate(&r_ramp, 0.0, d.r0 - w) + integrate(&r_ramp, d.r0 - w, d.r0 + w));
    }
    for a in &arcs {
        let mid = 0.5 * (a.r_in + a.r_out);
        let half = 0.5 * (a.r_out - a.r_in);
        let r_ramp = |r: f64| r * edge_ramp((r - mid).abs() - half, w);
        let knots = [a.r_in - w, a.r_in + w, a.r_out - w, a.r_out + w];
        let radial: f64 = knots.windows(2).map(|k| integrate(&r_ramp, k[0], k[1])).sum();
        let angular = if a.a1 - a.a0 >= std::f64::consts::TAU {
            std::f64::consts::TAU
        } else {
            let wa = w / mid;
            let half_a = 0.5 * (a.a1 - a.a0);
            let ramp = |o: f64| edge_ramp(o.abs() - half_a, wa);
            let knots = [-half_a - wa, -half_a + wa, half_a - wa, half_a + wa];
            knots.windows(2).map(|k| integrate(&ramp, k[0], k[1])).sum()
        };
        total += a.peak * radial * angular;
    }
    total
}

/// Centred Gaussian `exp(−|x|²/2σ²)` cut off smoothly between 0.8R and 0.9R.
pub fn gaussian_phantom(p: Point2<f64>, sigma: f64, radius: f64) -> f64 {
    let r = p.norm();
    let cut = quintic_step((0.9 * radius - r) / (0.1 * radius));
    (-(r * r) / (2.0 * sigma * sigma)).exp() * cut
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhantomKind {
    SheppLogan,
    Ghosts,
    Gaussian { sigma: f64 },
    Zero,
}

/// An initial pressure on the disk of `radius`.
#[derive(Clone, Copy, Debug)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub smoothing: f64,
    pub radius: f64,
}

impl Phantom {
    pub fn new(kind: PhantomKind, smoothing: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(PatError::InvalidInput(format!("radius {radius} must be positive")));
        }
        if !(smoothing >= 0.0) || smoothing >= 0.4 * radius {
            return Err(PatError::InvalidInput(format!("smoothing width {smoothing} must lie in [0, 0.4·radius)")));
        }
        Ok(Self { kind, smoothing, radius })
    }

    pub fn value(&self, p: Point2<f64>) -> f64 {
        match self.kind {
            PhantomKind::SheppLogan => shepp_logan_in(p, self.smoothing, self.radius),
            PhantomKind::Ghosts => ghost_phantom_in(p, self.radius),
            PhantomKind::Gaussian { sigma } => gaussian_phantom(p, sigma, self.radius),
            PhantomKind::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Travel time field of `|∇u| = 1/c`, `u = 0` on the circle, on the
/// Cartesian grid of spacing `g` covering the disk.
#[derive(Clone, Debug)]
pub struct TravelTimes {
    pub n: usize,
    pub spacing: f64,
    pub origin: f64,
    /// `u` at node `(i, j)` stored at `j·n + i`; infinite outside the disk.
    pub values: Vec<f64>,
}

impl TravelTimes {
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin + i as f64 * self.spacing, self.origin + j as f64 * self.spacing)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max)
    }
}

/// First-order fast marching on the grid masked to the disk. Nodes next to
/// the circle start from their exact distance to it divided by the local speed.
pub fn travel_times(field: &SpeedField, radius: f64, spacing: f64) -> Result<TravelTimes> {
    if !(spacing > 0.0) || spacing > radius / 20.0 {
        return Err(PatError::InvalidInput(format!("grid spacing {spacing} must lie in (0, radius/20]")));
    }
    let half = (radius / spacing).ceil() as usize + 1;
    let n = 2 * half + 1;
    let origin = -(half as f64) * spacing;
    let idx = |i: usize, j: usize| j * n + i;
    let pos = |i: usize, j: usize| (origin + i as f64 * spacing, origin + j as f64 * spacing);
    let inside: Vec<bool> = (0..n * n)
        .map(|k| {
            let (x, y) = pos(k % n, k / n);
            x * x + y * y < radius * radius
        })
        .collect();
    let slowness: Vec<f64> = (0..n * n)
        .map(|k| {
            let (x, y) = pos(k % n, k / n);
            1.0 / field.value(Point2::new(x, y))
        })
        .collect();
    let mut u = vec![f64::INFINITY; n * n];
    let mut frozen = vec![false; n * n];
    let mut heap = BinaryHeap::new();
    let neighbours = |k: usize| -> [Option<usize>; 4] {
        let (i, j) = (k % n, k / n);
        [
            (i > 0).then(|| idx(i - 1, j)),
            (i + 1 < n).then(|| idx(i + 1, j)),
            (j > 0).then(|| idx(i, j - 1)),
            (j + 1 < n).then(|| idx(i, j + 1)),
        ]
    };
    for k in 0..n * n {
        if inside[k] && neighbours(k).iter().flatten().any(|&m| !inside[m]) {
            let (x, y) = pos(k % n, k / n);
            u[k] = (radius - (x * x + y * y).sqrt()) * slowness[k];
            heap.push(Reverse((Key(u[k]), k)));
        }
    }
    while let Some(Reverse((Key(t), k))) = heap.pop() {
        if frozen[k] || t > u[k] {
            continue;
        }
        frozen[k] = true;
        for m in neighbours(k).into_iter().flatten() {
            if !inside[m] || frozen[m] {
                continue;
            }
            let (i, j) = (m % n, m / n);
            // Upwind neighbour per axis; second order when the next node in
            // the same direction is frozen and not larger.
            let axis = |near: [Option<usize>; 2], far: [Option<usize>; 2]| -> Option<(f64, f64)> {
                let mut best: Option<(f64, f64)> = None;
                for s in 0..2 {
                    let Some(q) = near[s].filter(|&q| frozen[q]) else { continue };
                    let u1 = u[q];
                    let term = match far[s].filter(|&q2| frozen[q2] && u[q2] <= u1) {
                        Some(q2) => (1.5, (4.0 * u1 - u[q2]) / 3.0),
                        None => (1.0, u1),
                    };
                    if best.is_none_or(|b| term.1 < b.1) {
                        best = Some(term);
                    }
                }
                best
            };
            let off = |a: usize, d: isize| a.checked_add_signed(d).filter(|&v| v < n);
            let at = |ii: Option<usize>, jj: Option<usize>| ii.zip(jj).map(|(a, b)| idx(a, b));
            let terms = [
                axis(
                    [at(off(i, -1), Some(j)), at(off(i, 1), Some(j))],
                    [at(off(i, -2), Some(j)), at(off(i, 2), Some(j))],
                ),
                axis(
                    [at(Some(i), off(j, -1)), at(Some(i), off(j, 1))],
                    [at(Some(i), off(j, -2)), at(Some(i), off(j, 2))],
                ),
            ];
            let f = slowness[m] * spacing;
            let single = terms.iter().flatten().map(|&(c, t)| t + f / c).fold(f64::INFINITY, f64::min);
            let cand = match terms {
                [Some((c1, t1)), Some((c2, t2))] => {
                    // Σ c²(u − t)² = f²
                    let a = c1 * c1 + c2 * c2;
                    let b = -2.0 * (c1 * c1 * t1 + c2 * c2 * t2);
                    let c = c1 * c1 * t1 * t1 + c2 * c2 * t2 * t2 - f * f;
                    let disc = b * b - 4.0 * a * c;
                    let both = if disc >= 0.0 { (-b + disc.sqrt()) / (2.0 * a) } else { f64::INFINITY };
                    if both >= t1.max(t2) { both.min(single) } else { single }
                }
                _ => single,
            };
            if cand < u[m] {
                u[m] = cand;
                heap.push(Reverse((Key(cand), m)));
            }
        }
    }
    Ok(TravelTimes { n, spacing, origin, values: u })
}

/// `T₀ = max_x dist(x, ∂Ω)` in the metric `c⁻² dx`.
pub fn estimate_t0(field: &SpeedField, radius: f64, spacing: f64) -> Result<f64> {
    Ok(travel_times(field, radius, spacing)?.max())
}

/// Samples `f` on an `n × n` grid over `[−R, R]²`, row 0 at the top (`x₂ = R`).
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub extent: f64,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn sample(n: usize, extent: f64, f: impl Fn(Point2<f64>) -> f64) -> Self {
        let coord = |k: usize| -extent + 2.0 * extent * k as f64 / (n.max(2) - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                values.push(f(Point2::new(coord(col), coord(n - 1 - row))));
            }
        }
        Self { width: n, height: n, extent, values }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// 16-bit binary PGM with linear min–max scaling; the scaling goes to a
    /// sidecar `<path>.txt`.
    pub fn write_pgm16(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "P5\n{} {}\n65535\n", self.width, self.height)?;
        for &v in &self.values {
            let q = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
            f.write_all(&q.to_be_bytes())?;
        }
        f.flush()?;
        let mut side = path.as_os_str().to_owned();
        side.push(".txt");
        std::fs::write(
            side,
            format!("min = {lo:e}\nmax = {hi:e}\nscale = linear\nmaxval = 65535\nextent = {:e}\n", self.extent),
        )?;
        Ok(())
    }

    /// `x,y,value` per pixel.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x,y,value")?;
        let n = self.width;
        let coord = |k: usize| -self.extent + 2.0 * self.extent * k as f64 / (n.max(2) - 1) as f64;
        for row in 0..self.height {
            for col in 0..n {
                writeln!(f, "{:e},{:e},{:e}", coord(col), coord(n - 1 - row), self.values[row * n + col])?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

/// Reads a 16-bit P5 file back into raw samples `(width, height, values)`.
pub fn read_pgm16(path: &std::path::Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = std::fs::read(path)?;
    let bad = || PatError::Format(format!("{} is not a 16-bit P5 image", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos..).ok_or_else(bad)?;
    if data.len() != 2 * w * h {
        return Err(bad());
    }
    Ok((w, h, data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_step_endpoints() {
        assert_eq!(quintic_step(0.0f64), 0.0);
        assert_eq!(quintic_step(1.0f64), 1.0);
        assert_eq!(quintic_step(0.5f64), 0.5);
        assert_eq!(quintic_step(-3.0f64), 0.0);
    }

    #[test]
    fn speed_formulas() {
        let o = Point2::new(0.0, 0.0);
        assert!((SpeedField::nontrapping(1.0).value(o) - 1.1f64).abs() < 1e-15);
        assert_eq!(SpeedField::trapping(1.0).value(o), 1.0f64);
        for f in [SpeedField::nontrapping(1.0), SpeedField::trapping(1.0)] {
            assert_eq!(f.value(Point2::new(2.0, 0.0)), 1.0f64);
            assert_eq!(f.value(Point2::new(0.0, 0.951)), 1.0f64);
        }
    }

    #[test]
    fn ghost_values_at_centres() {
        let (disks, _) = ghost_parts();
        for d in disks {
            assert_eq!(ghost_phantom(Point2::new(d.centre.0, d.centre.1)), d.peak);
        }
    }
}
