//! Space-time boundary data on Σ = ∂Ω × [0, T]: measurements, transmission
//! data and the λ history of a solve all use this layout.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{PatError, Result};
use crate::geometry::BoundaryGrid;
use crate::scalar::Real;

/// Values at the `n_b` boundary nodes for steps `0..=n_steps`, time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace<T> {
    pub n_steps: usize,
    pub n_b: usize,
    pub dt: T,
    /// Arc-length coordinate `R·θ` of every node.
    pub arc_lengths: Vec<T>,
    pub radius: T,
    pub values: Vec<T>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn zeros(boundary: &BoundaryGrid<T>, n_steps: usize, dt: T) -> Self {
        let n_b = boundary.len();
        Self {
            n_steps,
            n_b,
            dt,
            arc_lengths: boundary.angles.iter().map(|&a| a * boundary.radius).collect(),
            radius: boundary.radius,
            values: vec![T::zero(); (n_steps + 1) * n_b],
        }
    }

    /// Samples `f(t, θ)` at every node and step.
    pub fn from_fn<F: Fn(T, T) -> T>(boundary: &BoundaryGrid<T>, n_steps: usize, dt: T, f: F) -> Self {
        let mut tr = Self::zeros(boundary, n_steps, dt);
        for n in 0..=n_steps {
            let t = dt * T::from_usize_lossy(n);
            for (k, &a) in boundary.angles.iter().enumerate() {
                tr.values[n * tr.n_b + k] = f(t, a);
            }
        }
        tr
    }

    pub fn angles(&self) -> Vec<T> {
        self.arc_lengths.iter().map(|&s| s / self.radius).collect()
    }

    pub fn t_final(&self) -> T {
        self.dt * T::from_usize_lossy(self.n_steps)
    }

    pub fn step(&self, n: usize) -> &[T] {
        &self.values[n * self.n_b..(n + 1) * self.n_b]
    }

    pub fn step_mut(&mut self, n: usize) -> &mut [T] {
        &mut self.values[n * self.n_b..(n + 1) * self.n_b]
    }

    /// Same data with step `n` moved to `N − n`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for n in 0..=self.n_steps {
            out.step_mut(n).copy_from_slice(self.step(self.n_steps - n));
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s · other`
    pub fn add_scaled(&self, s: T, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, &b) in out.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        let same_dt = (self.dt - other.dt).abs() <= T::lit(1e-12) * self.dt;
        if self.n_steps != other.n_steps || self.n_b != other.n_b || !same_dt {
            return Err(PatError::DimensionMismatch(format!(
                "traces of shape {}x{} (dt {}) and {}x{} (dt {})",
                self.n_steps + 1,
                self.n_b,
                self.dt,
                other.n_steps + 1,
                other.n_b,
                other.dt
            )));
        }
        Ok(())
    }

    /// Writes the header line `PATR1 <n_b> <N> <dt> <radius>` and the values
    /// as f64 little-endian, step 0 first.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "PATR1 {} {} {:e} {:e}", self.n_b, self.n_steps, self.dt.as_f64(), self.radius.as_f64())?;
        for v in &self.values {
            f.write_all(&v.as_f64().to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Reads a trace file. Nodes are taken to be equally spaced from angle 0,
    /// which is how every generated mesh places them.
    pub fn read_file(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header = String::new();
        f.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "PATR1" {
            return Err(PatError::Format(format!("{} is not a PATR1 trace file", path.display())));
        }
        let bad = |what: &str| PatError::Format(format!("bad {what} in trace header"));
        let n_b: usize = parts[1].parse().map_err(|_| bad("node count"))?;
        let n_steps: usize = parts[2].parse().map_err(|_| bad("step count"))?;
        let dt: f64 = parts[3].parse().map_err(|_| bad("time step"))?;
        let radius: f64 = parts[4].parse().map_err(|_| bad("radius"))?;
        if n_b == 0 || !(dt > 0.0) || !(radius > 0.0) {
            return Err(bad("dimensions"));
        }
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes)?;
        let expect = (n_steps + 1) * n_b * 8;
        if bytes.len() != expect {
            return Err(PatError::Format(format!("trace payload has {} bytes, expected {expect}", bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect();
        let radius_t = T::lit(radius);
        let arc_lengths = (0..n_b)
            .map(|k| T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n_b) * radius_t)
            .collect();
        Ok(Self { n_steps, n_b, dt: T::lit(dt), arc_lengths, radius: radius_t, values })
    }
}
