//! Finite elements on the disk mesh: continuous P2 enriched with one cubic
//! bubble per triangle, in the Lagrange basis attached to vertices, edge
//! midpoints and centroids. In that basis the row sums of the mass matrix
//! coincide with the positive weights (1/20, 2/15, 9/20)·|K| of the
//! seven-point nodal rule, which is what makes a diagonal (lumped) mass
//! stable for explicit time stepping.
//!
//! Degree-of-freedom numbering: vertices first (in mesh order, so boundary
//! vertices are a trailing block of that range), then edge midpoints, then
//! triangle centroids.

use std::sync::Arc;

use crate::error::{PatError, Result};
use crate::geometry::{BoundaryGrid, TriMesh};
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::scalar::{Point2, Real};

/// Symmetric 7-point rule exact for polynomials of degree 5, in barycentric
/// coordinates with weights summing to one.
pub fn dunavant5<T: Real>() -> Vec<([T; 3], T)> {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let mut q = vec![([T::lit(1.0 / 3.0); 3], T::lit(9.0 / 40.0))];
    for &(p, w) in &[(a, wa), (b, wb)] {
        let o = 1.0 - 2.0 * p;
        for bc in [[o, p, p], [p, o, p], [p, p, o]] {
            q.push((bc.map(T::lit), T::lit(w)));
        }
    }
    q
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on Legendre polynomials; n is small.
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            let dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let pnm1 = if n == 1 { 1.0 } else { p0 };
        let pn = if n == 1 { x } else { p1 };
        let dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Values of the seven local basis functions at barycentric point `l`.
/// Local order: vertices 0..3, edges opposite vertex 0..3, bubble.
pub fn basis_values<T: Real>(l: [T; 3]) -> [T; 7] {
    let b = T::lit(27.0) * l[0] * l[1] * l[2];
    let ninth = b / T::lit(9.0);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    [
        l[0] * (two * l[0] - T::one()) + ninth,
        l[1] * (two * l[1] - T::one()) + ninth,
        l[2] * (two * l[2] - T::one()) + ninth,
        four * l[1] * l[2] - four * ninth,
        four * l[0] * l[2] - four * ninth,
        four * l[0] * l[1] - four * ninth,
        b,
    ]
}

/// Gradients of the local basis given the constant barycentric gradients.
pub fn basis_gradients<T: Real>(l: [T; 3], gl: [Point2<T>; 3]) -> [Point2<T>; 7] {
    let c27 = T::lit(27.0);
    let gb = gl[0]
        .scale(l[1] * l[2])
        .add(gl[1].scale(l[0] * l[2]))
        .add(gl[2].scale(l[0] * l[1]))
        .scale(c27);
    let gb9 = gb.scale(T::one() / T::lit(9.0));
    let four = T::lit(4.0);
    let vert = |k: usize| gl[k].scale(four * l[k] - T::one()).add(gb9);
    let edge = |i: usize, j: usize| gl[j].scale(l[i]).add(gl[i].scale(l[j])).scale(four).sub(gb9.scale(four));
    [vert(0), vert(1), vert(2), edge(1, 2), edge(0, 2), edge(0, 1), gb]
}

/// Degree-of-freedom layout of the P2+bubble space on a mesh.
#[derive(Clone, Debug)]
pub struct FeSpace<T> {
    pub mesh: Arc<TriMesh<T>>,
    /// Global dofs of each triangle in local order.
    pub tri_dofs: Vec<[usize; 7]>,
    /// Physical location of every dof.
    pub dof_points: Vec<Point2<T>>,
    /// Dofs lying on the boundary polygon (vertices and edge midpoints).
    pub boundary_dofs: Vec<usize>,
    pub is_boundary_dof: Vec<bool>,
}

impl<T: Real> FeSpace<T> {
    pub fn new(mesh: Arc<TriMesh<T>>) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.edges.len();
        let half = T::lit(0.5);
        let mut dof_points = mesh.vertices.clone();
        dof_points.extend(mesh.edges.iter().map(|&[a, b]| mesh.vertices[a].lerp(mesh.vertices[b], half)));
        let third = T::lit(1.0 / 3.0);
        dof_points.extend(mesh.triangles.iter().map(|&[a, b, c]| {
            mesh.vertices[a].add(mesh.vertices[b]).add(mesh.vertices[c]).scale(third)
        }));
        let tri_dofs = mesh
            .triangles
            .iter()
            .zip(&mesh.tri_edges)
            .enumerate()
            .map(|(t, (v, e))| [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2], nv + ne + t])
            .collect();
        let n = dof_points.len();
        let mut is_boundary_dof = vec![false; n];
        for &v in &mesh.boundary_nodes {
            is_boundary_dof[v] = true;
        }
        for &(e, _) in &mesh.boundary_edges {
            is_boundary_dof[nv + e] = true;
        }
        let boundary_dofs = (0..n).filter(|&i| is_boundary_dof[i]).collect();
        Self { mesh, tri_dofs, dof_points, boundary_dofs, is_boundary_dof }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_points.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.mesh.edges.len()
    }

    fn edge_dof(&self, e: usize) -> usize {
        self.n_vertices() + e
    }

    /// Barycentric gradients and area of triangle `t`.
    pub fn geometry(&self, t: usize) -> ([Point2<T>; 3], T) {
        let [a, b, c] = self.mesh.triangles[t];
        let (p0, p1, p2) = (self.mesh.vertices[a], self.mesh.vertices[b], self.mesh.vertices[c]);
        let two_area = p1.sub(p0).cross(p2.sub(p0));
        let inv = T::one() / two_area;
        let g0 = Point2::new(p1.y - p2.y, p2.x - p1.x).scale(inv);
        let g1 = Point2::new(p2.y - p0.y, p0.x - p2.x).scale(inv);
        let g2 = Point2::new(p0.y - p1.y, p1.x - p0.x).scale(inv);
        ([g0, g1, g2], two_area * T::lit(0.5))
    }

    /// Physical point of barycentric coordinates `l` in triangle `t`.
    pub fn map_point(&self, t: usize, l: [T; 3]) -> Point2<T> {
        let [a, b, c] = self.mesh.triangles[t];
        self.mesh.vertices[a]
            .scale(l[0])
            .add(self.mesh.vertices[b].scale(l[1]))
            .add(self.mesh.vertices[c].scale(l[2]))
    }

    /// Evaluates a field inside triangle `t` at barycentric `l`.
    pub fn eval_in(&self, field: &NodalField<T>, t: usize, l: [T; 3]) -> T {
        let phi = basis_values(l);
        self.tri_dofs[t].iter().zip(phi).map(|(&d, p)| field.values[d] * p).sum()
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point2<T>) -> [T; 3] {
        let [a, b, c] = self.mesh.triangles[t];
        let (p0, p1, p2) = (self.mesh.vertices[a], self.mesh.vertices[b], self.mesh.vertices[c]);
        let area2 = p1.sub(p0).cross(p2.sub(p0));
        let l1 = p2.sub(p).cross(p0.sub(p)) / area2;
        let l2 = p0.sub(p).cross(p1.sub(p)) / area2;
        [T::one() - l1 - l2, l1, l2]
    }

    /// Point location by scanning triangles; `None` outside the mesh.
    /// [`Locator`] does the same through buckets.
    pub fn locate(&self, p: Point2<T>) -> Option<(usize, [T; 3])> {
        (0..self.mesh.n_triangles()).find_map(|t| inside(self.barycentric(t, p)).then(|| (t, self.barycentric(t, p))))
    }

    pub fn zero_field(&self) -> NodalField<T> {
        NodalField { values: vec![T::zero(); self.n_dofs()] }
    }

    pub fn check_field(&self, f: &NodalField<T>) -> Result<()> {
        if f.values.len() != self.n_dofs() {
            return Err(PatError::DimensionMismatch(format!(
                "field has {} coefficients, space has {}",
                f.values.len(),
                self.n_dofs()
            )));
        }
        Ok(())
    }
}

fn inside<T: Real>(l: [T; 3]) -> bool {
    let tol = T::lit(-1e-12);
    l.iter().all(|&x| x >= tol)
}

/// Point location through a uniform bucket grid over the mesh.
pub struct Locator<'a, T: Real> {
    space: &'a FeSpace<T>,
    origin: Point2<T>,
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Real> Locator<'a, T> {
    pub fn new(space: &'a FeSpace<T>) -> Self {
        let verts = &space.mesh.vertices;
        let (mut lo, mut hi) = (verts[0], verts[0]);
        for v in verts {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let cell = space.mesh.h.max(T::epsilon());
        let count = |span: T| (span / cell).floor().to_usize().unwrap_or(0) + 1;
        let (nx, ny) = (count(hi.x - lo.x), count(hi.y - lo.y));
        let mut buckets = vec![Vec::new(); nx * ny];
        let clamp = |v: T, n: usize| ((v / cell).floor().to_usize().unwrap_or(0)).min(n - 1);
        for (t, tri) in space.mesh.triangles.iter().enumerate() {
            let pts = tri.map(|i| verts[i]);
            let x0 = clamp(pts.iter().map(|p| p.x).fold(T::infinity(), T::min) - lo.x, nx);
            let x1 = clamp(pts.iter().map(|p| p.x).fold(T::neg_infinity(), T::max) - lo.x, nx);
            let y0 = clamp(pts.iter().map(|p| p.y).fold(T::infinity(), T::min) - lo.y, ny);
            let y1 = clamp(pts.iter().map(|p| p.y).fold(T::neg_infinity(), T::max) - lo.y, ny);
            for j in y0..=y1 {
                for i in x0..=x1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { space, origin: lo, cell, nx, ny, buckets }
    }

    pub fn locate(&self, p: Point2<T>) -> Option<(usize, [T; 3])> {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        if fx < T::zero() || fy < T::zero() {
            return None;
        }
        let (i, j) = (fx.to_usize()?, fy.to_usize()?);
        if i >= self.nx || j >= self.ny {
            return None;
        }
        self.buckets[j * self.nx + i].iter().find_map(|&t| {
            let l = self.space.barycentric(t, p);
            inside(l).then_some((t, l))
        })
    }
}

/// Coefficient vector of a P2+bubble function.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField<T> {
    pub values: Vec<T>,
}

impl<T: Real> NodalField<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * s).collect() }
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: T, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + s * b).collect() }
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.values)
    }
}

/// Whether the volume mass is diagonalised by the nodal rule or kept consistent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MassMode {
    #[default]
    Lumped,
    Consistent,
}

/// Mass-type operator together with how to invert it.
#[derive(Clone, Debug)]
pub struct MassOperator<T> {
    pub matrix: CsrMatrix<T>,
    pub mode: MassMode,
    inv_diag: Vec<T>,
}

impl<T: Real> MassOperator<T> {
    /// Applies `M⁻¹`; with consistent mass this is a CG solve.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        match self.mode {
            MassMode::Lumped => Ok(rhs.iter().zip(&self.inv_diag).map(|(&r, &d)| r * d).collect()),
            MassMode::Consistent => {
                let mut x: Vec<T> = rhs.iter().zip(&self.inv_diag).map(|(&r, &d)| r * d).collect();
                let fixed = vec![false; rhs.len()];
                conjugate_gradient(&self.matrix, rhs, &mut x, &fixed, T::lit(1e-13).max(T::epsilon() * T::lit(64.0)), 2000)?;
                Ok(x)
            }
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.matrix.matvec(x)
    }

    pub fn total(&self) -> T {
        self.matrix.data.iter().copied().sum()
    }
}

/// Consistent weighted mass `∫ w(x) φ_i φ_j`, integrated with the degree-5 rule.
pub fn assemble_consistent_mass<T: Real, F: Fn(Point2<T>) -> T>(space: &FeSpace<T>, weight: F) -> CsrMatrix<T> {
    let q = dunavant5::<T>();
    let mut trip = Vec::with_capacity(space.mesh.n_triangles() * 49);
    for t in 0..space.mesh.n_triangles() {
        let (_, area) = space.geometry(t);
        let dofs = space.tri_dofs[t];
        let mut local = [[T::zero(); 7]; 7];
        for &(l, w) in &q {
            let phi = basis_values(l);
            let c = w * area * weight(space.map_point(t, l));
            for i in 0..7 {
                for j in 0..7 {
                    local[i][j] += c * phi[i] * phi[j];
                }
            }
        }
        for i in 0..7 {
            for j in 0..7 {
                trip.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), space.n_dofs(), trip)
}

/// Mass weighted by `1/c²`. Lumped mode takes row sums of the consistent
/// matrix, which preserves `∫ 1/c²` and equals the nodal rule for
/// elementwise-constant speed.
pub fn assemble_weighted_mass<T: Real, F: Fn(Point2<T>) -> T>(
    space: &FeSpace<T>,
    speed: F,
    mode: MassMode,
) -> Result<MassOperator<T>> {
    for &p in &space.dof_points {
        let c = speed(p);
        if !(c > T::zero()) || !c.is_finite() {
            return Err(PatError::InvalidInput(format!("sound speed {c} at ({}, {}) must be positive", p.x, p.y)));
        }
    }
    let consistent = assemble_consistent_mass(space, |p| {
        let c = speed(p);
        T::one() / (c * c)
    });
    mass_operator(consistent, mode)
}

/// Unweighted mass `∫ φ_i φ_j` (load vectors of the Poisson problem).
pub fn assemble_mass<T: Real>(space: &FeSpace<T>, mode: MassMode) -> Result<MassOperator<T>> {
    mass_operator(assemble_consistent_mass(space, |_| T::one()), mode)
}

fn mass_operator<T: Real>(consistent: CsrMatrix<T>, mode: MassMode) -> Result<MassOperator<T>> {
    match mode {
        MassMode::Lumped => {
            let diag = consistent.row_sums();
            if let Some((i, d)) = diag.iter().enumerate().find(|(_, d)| !(**d > T::zero())) {
                return Err(PatError::Singular(format!("lumped mass entry {i} is {d}")));
            }
            let inv_diag = diag.iter().map(|&d| T::one() / d).collect();
            Ok(MassOperator { matrix: CsrMatrix::from_diagonal(&diag), mode, inv_diag })
        }
        MassMode::Consistent => {
            let inv_diag = consistent.diagonal().iter().map(|&d| T::one() / d).collect();
            Ok(MassOperator { matrix: consistent, mode, inv_diag })
        }
    }
}

/// Stiffness `∫ ∇φ_i · ∇φ_j`, exact for this element.
pub fn assemble_stiffness<T: Real>(space: &FeSpace<T>) -> CsrMatrix<T> {
    let q = dunavant5::<T>();
    let mut trip = Vec::with_capacity(space.mesh.n_triangles() * 49);
    for t in 0..space.mesh.n_triangles() {
        let (gl, area) = space.geometry(t);
        let dofs = space.tri_dofs[t];
        let mut local = [[T::zero(); 7]; 7];
        for &(l, w) in &q {
            let g = basis_gradients(l, gl);
            let c = w * area;
            for i in 0..7 {
                for j in i..7 {
                    local[i][j] += c * g[i].dot(g[j]);
                }
            }
        }
        for i in 0..7 {
            for j in 0..7 {
                let v = if j >= i { local[i][j] } else { local[j][i] };
                trip.push((dofs[i], dofs[j], v));
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), space.n_dofs(), trip)
}

/// Coupling `B_{i,k} = ∫_{∂Ω} φ_i ψ_k dS` between volume dofs and boundary
/// P1 hat functions. Each boundary edge is integrated over its circular arc,
/// parametrised by the same unit parameter as the chord.
pub fn assemble_boundary_mass<T: Real>(space: &FeSpace<T>, boundary: &BoundaryGrid<T>) -> Result<CsrMatrix<T>> {
    let mesh = &space.mesh;
    let nb = boundary.len();
    if nb != mesh.n_boundary() {
        return Err(PatError::DimensionMismatch(format!(
            "boundary grid has {nb} nodes, mesh boundary has {}",
            mesh.n_boundary()
        )));
    }
    for (k, &v) in mesh.boundary_nodes.iter().enumerate() {
        if mesh.vertices[v].dist(boundary.node_positions[k]) > T::lit(1e-9) * mesh.radius {
            return Err(PatError::DimensionMismatch("boundary grid does not belong to this mesh".into()));
        }
    }
    let gauss = gauss_legendre_unit(3);
    let mut trip = Vec::with_capacity(nb * 6);
    for k in 0..nb {
        let (a, b) = (mesh.boundary_nodes[k], mesh.boundary_nodes[(k + 1) % nb]);
        let (e, _) = mesh.boundary_edges[k];
        let m = space.edge_dof(e);
        let len = boundary.segment_arc_length(k);
        let mut local = [[T::zero(); 2]; 3];
        for &(t, w) in &gauss {
            let t = T::lit(t);
            let w = T::lit(w) * len;
            let two = T::lit(2.0);
            let trace = [(T::one() - t) * (T::one() - two * t), t * (two * t - T::one()), T::lit(4.0) * t * (T::one() - t)];
            let hat = [T::one() - t, t];
            for i in 0..3 {
                for j in 0..2 {
                    local[i][j] += w * trace[i] * hat[j];
                }
            }
        }
        let cols = [k, (k + 1) % nb];
        for (i, &row) in [a, b, m].iter().enumerate() {
            for j in 0..2 {
                trip.push((row, cols[j], local[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(space.n_dofs(), nb, trip))
}

/// P1 mass matrix on the boundary arcs (the spatial part of the L²(Σ) product).
pub fn assemble_boundary_p1_mass<T: Real>(boundary: &BoundaryGrid<T>) -> CsrMatrix<T> {
    let nb = boundary.len();
    let mut trip = Vec::with_capacity(nb * 4);
    let sixth = T::lit(1.0 / 6.0);
    for k in 0..nb {
        let len = boundary.segment_arc_length(k);
        let (i, j) = (k, (k + 1) % nb);
        trip.push((i, i, T::lit(2.0) * sixth * len));
        trip.push((j, j, T::lit(2.0) * sixth * len));
        trip.push((i, j, sixth * len));
        trip.push((j, i, sixth * len));
    }
    CsrMatrix::from_triplets(nb, nb, trip)
}

/// Interpolates `f` at vertices and edge midpoints (the P2 interpolant); the
/// centroid coefficient is the P2 interpolant's own centroid value, i.e. the
/// hierarchical bubble coefficient is zero.
pub fn project_analytic<T: Real, F: Fn(Point2<T>) -> T>(f: F, space: &FeSpace<T>) -> Result<NodalField<T>> {
    let nv = space.n_vertices();
    let ne = space.n_edges();
    let mut values = vec![T::zero(); space.n_dofs()];
    for (i, v) in values.iter_mut().enumerate().take(nv + ne) {
        let p = space.dof_points[i];
        let y = f(p);
        if !y.is_finite() {
            return Err(PatError::InvalidInput(format!("function is not finite at ({}, {})", p.x, p.y)));
        }
        *v = y;
    }
    let (vw, ew) = (T::lit(-1.0 / 9.0), T::lit(4.0 / 9.0));
    for (t, dofs) in space.tri_dofs.iter().enumerate() {
        let c = vw * (values[dofs[0]] + values[dofs[1]] + values[dofs[2]])
            + ew * (values[dofs[3]] + values[dofs[4]] + values[dofs[5]]);
        values[nv + ne + t] = c;
    }
    Ok(NodalField { values })
}

/// `fᵀ A g`, the H₀¹ product when `A` is the stiffness matrix.
pub fn h10_inner<T: Real>(f: &NodalField<T>, g: &NodalField<T>, a: &CsrMatrix<T>) -> Result<T> {
    if f.len() != a.ncols || g.len() != a.nrows {
        return Err(PatError::DimensionMismatch(format!(
            "fields of length {} and {} against a {}x{} operator",
            f.len(),
            g.len(),
            a.nrows,
            a.ncols
        )));
    }
    Ok(a.bilinear(&f.values, &g.values))
}

const FIELD_MAGIC: &[u8; 8] = b"PAFF1\0\0\0";

impl<T: Real> NodalField<T> {
    /// Binary coefficient file: magic `PAFF1\0\0\0`, u32 count, u32 reserved,
    /// then f64 little-endian values.
    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let count = u32::try_from(self.len()).map_err(|_| PatError::InvalidInput("field too large for PAFF1".into()))?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(FIELD_MAGIC)?;
        f.write_all(&count.to_le_bytes())?;
        f.write_all(&0u32.to_le_bytes())?;
        for v in &self.values {
            f.write_all(&v.as_f64().to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let bad = |what: &str| PatError::Format(format!("{}: {what}", path.display()));
        if bytes.len() < 16 || &bytes[..8] != FIELD_MAGIC {
            return Err(bad("not a PAFF1 field file"));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 16 + 8 * count {
            return Err(bad("length does not match the header count"));
        }
        let values = bytes[16..]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        Ok(Self { values })
    }

    /// Plotting CSV `x,y,value`, one row per degree of freedom.
    pub fn write_csv(&self, space: &FeSpace<T>, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        space.check_field(self)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x,y,value")?;
        for (p, v) in space.dof_points.iter().zip(&self.values) {
            writeln!(f, "{:e},{:e},{:e}", p.x.as_f64(), p.y.as_f64(), v.as_f64())?;
        }
        f.flush()?;
        Ok(())
    }
}
