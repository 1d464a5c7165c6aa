//! Triangulated disk domain and its boundary curve.
//!
//! The generator places concentric rings of nodes (ring `j` at radius
//! `R·j/M` with `M = ⌊R/(h·√3/2)⌋`, about `2π r_j / h` nodes each), stitches consecutive rings into
//! triangles, and then applies Lawson edge flips until the triangulation is
//! Delaunay. Boundary nodes sit exactly on the circle, uniformly spaced, and
//! are numbered last and counter-clockwise so that the trace map is a
//! trailing block of the vertex numbering.

use std::collections::HashMap;

use crate::error::{PatError, Result};
use crate::scalar::{Point2, Real};

/// Unstructured triangulation of the disk of radius `radius`.
#[derive(Clone, Debug)]
pub struct TriMesh<T> {
    pub vertices: Vec<Point2<T>>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary vertex indices in counter-clockwise order. Always the last
    /// `boundary_nodes.len()` vertices.
    pub boundary_nodes: Vec<usize>,
    /// Target mesh size used at generation.
    pub h: T,
    pub radius: T,
    /// Unique undirected edges `(a, b)` with `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// For triangle `t`, the edge index of the edge opposite local vertex `k`.
    pub tri_edges: Vec<[usize; 3]>,
    /// For each boundary segment `k` (from `boundary_nodes[k]` to
    /// `boundary_nodes[k+1]`), the mesh edge index and owning triangle.
    pub boundary_edges: Vec<(usize, usize)>,
}

/// The ordered boundary polygon of a mesh, viewed as a subdivision of the
/// exact circle into arcs.
#[derive(Clone, Debug)]
pub struct BoundaryGrid<T> {
    pub node_positions: Vec<Point2<T>>,
    /// Polar angle of each node, unwrapped so it increases from `angles[0]`.
    pub angles: Vec<T>,
    /// Arc length from node 0 along the circle.
    pub arc_lengths: Vec<T>,
    /// Closed loop of consecutive node pairs; the last one wraps to node 0.
    pub segments: Vec<[usize; 2]>,
    pub radius: T,
}

fn signed_area<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    b.sub(a).cross(c.sub(a)) * T::lit(0.5)
}

/// True if `d` lies strictly inside the circumcircle of the CCW triangle `abc`.
fn in_circumcircle(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    let scale = (ad + bd + cd).powi(2);
    det > 1e-12 * scale
}

/// Number of rings and per-ring node counts used by [`generate_disk_mesh`].
fn ring_layout(radius: f64, h: f64) -> (usize, Vec<usize>) {
    // Ring spacing h·√3/2 is the row height of an equilateral lattice of edge h.
    let rings = ((radius / (h * 0.75f64.sqrt())).floor() as usize).max(1);
    let counts = (1..=rings)
        .map(|j| {
            let r = radius * j as f64 / rings as f64;
            ((2.0 * std::f64::consts::PI * r / h).floor() as usize).max(6)
        })
        .collect();
    (rings, counts)
}

/// Generates a quality triangulation of the disk `|x| < radius` with target
/// edge length `h`.
pub fn generate_disk_mesh<T: Real>(radius: T, h: T) -> Result<TriMesh<T>> {
    if !radius.is_finite() || !h.is_finite() {
        return Err(PatError::InvalidInput("mesh radius and size must be finite".into()));
    }
    if radius <= T::zero() || h <= T::zero() {
        return Err(PatError::InvalidInput("mesh radius and size must be positive".into()));
    }
    if h >= radius {
        return Err(PatError::InvalidInput(format!(
            "mesh size h={h} must be smaller than the radius {radius}"
        )));
    }
    let (rf, hf) = (radius.as_f64(), h.as_f64());
    let (rings, counts) = ring_layout(rf, hf);
    let tau = 2.0 * std::f64::consts::PI;

    // Vertices in f64 for construction; the boundary ring comes last.
    let mut pts: Vec<Point2<f64>> = vec![Point2::new(0.0, 0.0)];
    let mut ring_start = vec![0usize];
    let mut ring_angle0 = vec![0.0f64];
    for (j, &n) in counts.iter().enumerate() {
        let ring = j + 1;
        let r = rf * ring as f64 / rings as f64;
        // Stagger interior rings by half a spacing; the boundary ring starts at angle 0.
        let offset = if ring == rings || ring % 2 == 0 { 0.0 } else { 0.5 * tau / n as f64 };
        ring_start.push(pts.len());
        ring_angle0.push(offset);
        for k in 0..n {
            let th = offset + tau * k as f64 / n as f64;
            if ring == rings {
                let (s, c) = th.sin_cos();
                pts.push(Point2::new(rf * c, rf * s));
            } else {
                pts.push(Point2::new(r * th.cos(), r * th.sin()));
            }
        }
    }

    let mut tris: Vec<[usize; 3]> = Vec::new();
    // Fan around the centre.
    let n1 = counts[0];
    for k in 0..n1 {
        tris.push([0, ring_start[1] + k, ring_start[1] + (k + 1) % n1]);
    }
    // Stitch consecutive rings by merging their angular sequences.
    for j in 1..rings {
        let (na, nb) = (counts[j - 1], counts[j]);
        let (sa, sb) = (ring_start[j], ring_start[j + 1]);
        let a0 = ring_angle0[j];
        let b0 = ring_angle0[j + 1];
        let ang_a = |i: usize| a0 + tau * i as f64 / na as f64;
        // First outer node at or before a0 in unwrapped angle.
        let mut m0 = (((a0 - b0) / tau * nb as f64).floor()) as i64;
        while b0 + tau * m0 as f64 / nb as f64 > a0 + 1e-12 {
            m0 -= 1;
        }
        let ang_b = |m: usize| b0 + tau * (m0 + m as i64) as f64 / nb as f64;
        let idx_b = |m: usize| sb + ((m0 + m as i64).rem_euclid(nb as i64)) as usize;
        let idx_a = |i: usize| sa + i % na;
        let (mut i, mut m) = (0usize, 0usize);
        while i < na || m < nb {
            let advance_outer = if i == na {
                true
            } else if m == nb {
                false
            } else {
                ang_b(m + 1) - ang_a(i) < ang_a(i + 1) - ang_b(m)
            };
            if advance_outer {
                tris.push([idx_a(i), idx_b(m), idx_b(m + 1)]);
                m += 1;
            } else {
                tris.push([idx_a(i), idx_b(m), idx_a(i + 1)]);
                i += 1;
            }
        }
    }
    for t in tris.iter_mut() {
        if signed_area(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    lawson_flips(&pts, &mut tris);

    let nb = counts[rings - 1];
    let boundary_nodes: Vec<usize> = (pts.len() - nb..pts.len()).collect();
    let vertices = pts.iter().map(|p| p.cast::<T>()).collect();
    TriMesh::from_parts(vertices, tris, boundary_nodes, h, radius)
}

/// Flips interior edges until every edge is locally Delaunay.
fn lawson_flips(pts: &[Point2<f64>], tris: &mut [[usize; 3]]) {
    for _pass in 0..200 {
        let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                owner.insert((a, b), (t, k));
            }
        }
        let mut touched = vec![false; tris.len()];
        let mut flipped = 0;
        for t in 0..tris.len() {
            for k in 0..3 {
                if touched[t] {
                    break;
                }
                let tri = tris[t];
                let (a, b, c) = (tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k]);
                let Some(&(u, kk)) = owner.get(&(b, a)) else { continue };
                if touched[u] {
                    continue;
                }
                let d = tris[u][kk];
                if in_circumcircle(pts[a], pts[b], pts[c], pts[d]) {
                    let t1 = [c, a, d];
                    let t2 = [d, b, c];
                    if signed_area(pts[t1[0]], pts[t1[1]], pts[t1[2]]) <= 0.0
                        || signed_area(pts[t2[0]], pts[t2[1]], pts[t2[2]]) <= 0.0
                    {
                        continue;
                    }
                    tris[t] = t1;
                    tris[u] = t2;
                    touched[t] = true;
                    touched[u] = true;
                    flipped += 1;
                }
            }
        }
        if flipped == 0 {
            return;
        }
    }
}

impl<T: Real> TriMesh<T> {
    /// Builds a mesh from raw arrays and derives its edge topology.
    pub fn from_parts(
        vertices: Vec<Point2<T>>,
        triangles: Vec<[usize; 3]>,
        boundary_nodes: Vec<usize>,
        h: T,
        radius: T,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.iter().flatten().any(|&i| i >= nv) || boundary_nodes.iter().any(|&i| i >= nv) {
            return Err(PatError::InvalidInput("mesh index out of range".into()));
        }
        if boundary_nodes.len() < 3 {
            return Err(PatError::InvalidInput("mesh boundary needs at least 3 nodes".into()));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                te[k] = id;
            }
            tri_edges.push(te);
        }
        let mut edge_tri: Vec<Option<usize>> = vec![None; edges.len()];
        for (t, te) in tri_edges.iter().enumerate() {
            for &e in te {
                edge_tri[e].get_or_insert(t);
            }
        }
        let nb = boundary_nodes.len();
        let mut boundary_edges = Vec::with_capacity(nb);
        for k in 0..nb {
            let (a, b) = (boundary_nodes[k], boundary_nodes[(k + 1) % nb]);
            let key = (a.min(b), a.max(b));
            let e = *edge_index
                .get(&key)
                .ok_or_else(|| PatError::InvalidInput(format!("boundary segment {a}-{b} is not a mesh edge")))?;
            boundary_edges.push((e, edge_tri[e].expect("edge has a triangle")));
        }
        Ok(Self { vertices, triangles, boundary_nodes, h, radius, edges, tri_edges, boundary_edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Area of the polygonal domain.
    pub fn area(&self) -> T {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Whether vertex `v` lies on the boundary (boundary nodes are stored last).
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        v >= self.n_vertices() - self.n_boundary()
    }
}

/// Extracts the boundary grid of a mesh, node order matching `boundary_nodes`.
pub fn extract_boundary<T: Real>(mesh: &TriMesh<T>) -> BoundaryGrid<T> {
    let node_positions: Vec<Point2<T>> = mesh.boundary_nodes.iter().map(|&i| mesh.vertices[i]).collect();
    let tau = T::TAU();
    let mut angles = Vec::with_capacity(node_positions.len());
    let mut prev = node_positions[0].y.atan2(node_positions[0].x);
    angles.push(prev);
    for p in node_positions.iter().skip(1) {
        let mut th = p.y.atan2(p.x);
        while th <= prev {
            th += tau;
        }
        angles.push(th);
        prev = th;
    }
    let a0 = angles[0];
    let arc_lengths = angles.iter().map(|&a| (a - a0) * mesh.radius).collect();
    let n = node_positions.len();
    let segments = (0..n).map(|k| [k, (k + 1) % n]).collect();
    BoundaryGrid { node_positions, angles, arc_lengths, segments, radius: mesh.radius }
}

impl<T: Real> BoundaryGrid<T> {
    pub fn len(&self) -> usize {
        self.node_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_positions.is_empty()
    }

    pub fn perimeter(&self) -> T {
        T::TAU() * self.radius
    }

    /// Angular span of segment `k`.
    pub fn segment_angle(&self, k: usize) -> T {
        let n = self.len();
        if k + 1 < n {
            self.angles[k + 1] - self.angles[k]
        } else {
            self.angles[0] + T::TAU() - self.angles[n - 1]
        }
    }

    pub fn segment_arc_length(&self, k: usize) -> T {
        self.segment_angle(k) * self.radius
    }

    /// True if the nodes are equally spaced in angle (to 1e-10 of a spacing),
    /// which makes every boundary operator circulant.
    pub fn is_uniform(&self) -> bool {
        let n = self.len();
        let d = T::TAU() / T::from_usize_lossy(n);
        (0..n).all(|k| (self.segment_angle(k) - d).abs() <= T::lit(1e-10) * d)
    }
}

/// One named pass/fail line of a mesh validation.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct MeshReport {
    pub checks: Vec<Check>,
    pub min_angle_deg: f64,
    pub max_edge: f64,
}

impl MeshReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for MeshReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Checks every structural and quality invariant of a generated mesh.
pub fn validate_mesh<T: Real>(mesh: &TriMesh<T>) -> MeshReport {
    let mut checks = Vec::new();
    let pts: Vec<Point2<f64>> = mesh.vertices.iter().map(|p| p.cast()).collect();
    let r = mesh.radius.as_f64();
    let h = mesh.h.as_f64();

    let min_area = (0..mesh.n_triangles()).map(|t| mesh.triangle_area(t).as_f64()).fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "positive orientation",
        passed: min_area > 0.0,
        detail: format!("min signed area {min_area:.3e}"),
    });

    let max_dev = mesh
        .boundary_nodes
        .iter()
        .map(|&i| (pts[i].norm() - r).abs())
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "boundary on circle",
        passed: max_dev <= 1e-12 * r,
        detail: format!("max |‖x‖-R| = {max_dev:.3e}"),
    });

    let nb = mesh.n_boundary();
    let nv = mesh.n_vertices();
    let trailing = mesh.boundary_nodes.iter().enumerate().all(|(k, &i)| i == nv - nb + k);
    let angles_increase = {
        let b = extract_boundary(mesh);
        b.angles.windows(2).all(|w| w[1] > w[0]) && (b.angles[nb - 1] - b.angles[0]).as_f64() < 2.0 * std::f64::consts::PI
    };
    checks.push(Check {
        name: "boundary ordering",
        passed: trailing && angles_increase,
        detail: format!("trailing block: {trailing}, counter-clockwise: {angles_increase}"),
    });

    let mut edge_count = vec![0usize; mesh.edges.len()];
    for te in &mesh.tri_edges {
        for &e in te {
            edge_count[e] += 1;
        }
    }
    let over = edge_count.iter().filter(|&&c| c > 2).count();
    let mut bnd_ok = true;
    let mut bnd_edge = vec![false; mesh.edges.len()];
    for &(e, _) in &mesh.boundary_edges {
        bnd_edge[e] = true;
        bnd_ok &= edge_count[e] == 1;
    }
    let stray = edge_count.iter().zip(&bnd_edge).filter(|(&c, &b)| c == 1 && !b).count();
    checks.push(Check {
        name: "edge manifoldness",
        passed: over == 0 && bnd_ok && stray == 0,
        detail: format!("edges with >2 triangles: {over}, unmatched boundary edges: {stray}"),
    });

    let max_edge = mesh
        .edges
        .iter()
        .map(|&[a, b]| pts[a].dist(pts[b]))
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "max edge length",
        passed: max_edge <= 2.0 * h,
        detail: format!("max edge {max_edge:.4} vs 2h = {:.4}", 2.0 * h),
    });

    let mut min_angle = f64::INFINITY;
    for tri in &mesh.triangles {
        for k in 0..3 {
            let p = pts[tri[k]];
            let u = pts[tri[(k + 1) % 3]].sub(p);
            let v = pts[tri[(k + 2) % 3]].sub(p);
            let ang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
            min_angle = min_angle.min(ang.to_degrees());
        }
    }
    checks.push(Check {
        name: "min angle",
        passed: min_angle >= 20.0,
        detail: format!("min angle {min_angle:.2} deg"),
    });

    MeshReport { checks, min_angle_deg: min_angle, max_edge }
}

impl<T: Real> TriMesh<T> {
    /// Writes the `MESH2` text format: counts, vertices with 17 significant
    /// digits, 0-based triangles, then the boundary node list.
    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "MESH2 {} {} {}", self.n_vertices(), self.n_triangles(), self.n_boundary())?;
        for p in &self.vertices {
            writeln!(f, "{:.16e} {:.16e}", p.x.as_f64(), p.y.as_f64())?;
        }
        for t in &self.triangles {
            writeln!(f, "{} {} {}", t[0], t[1], t[2])?;
        }
        for b in &self.boundary_nodes {
            writeln!(f, "{b}")?;
        }
        f.flush()?;
        Ok(())
    }

    /// Reads a `MESH2` file. The format carries no mesh size, so `h` becomes
    /// the longest edge and `radius` the mean boundary node radius.
    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bad = |what: &str| PatError::Format(format!("{}: bad {what}", path.display()));
        let mut tok = text.split_whitespace();
        if tok.next() != Some("MESH2") {
            return Err(bad("magic"));
        }
        fn next<X: std::str::FromStr>(tok: &mut std::str::SplitWhitespace, err: PatError) -> Result<X> {
            tok.next().and_then(|s| s.parse().ok()).ok_or(err)
        }
        let (nv, nt, nb): (usize, usize, usize) = (next(&mut tok, bad("header"))?, next(&mut tok, bad("header"))?, next(&mut tok, bad("header"))?);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let x: f64 = next(&mut tok, bad("vertex"))?;
            let y: f64 = next(&mut tok, bad("vertex"))?;
            vertices.push(Point2::new(T::lit(x), T::lit(y)));
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            triangles.push([next(&mut tok, bad("triangle"))?, next(&mut tok, bad("triangle"))?, next(&mut tok, bad("triangle"))?]);
        }
        let boundary_nodes = (0..nb).map(|_| next(&mut tok, bad("boundary node"))).collect::<Result<Vec<usize>>>()?;
        if tok.next().is_some() {
            return Err(bad("length"));
        }
        if nb == 0 {
            return Err(bad("boundary"));
        }
        let radius = boundary_nodes.iter().map(|&b| vertices.get(b).map_or(T::zero(), |p| p.norm())).sum::<T>() / T::from_usize_lossy(nb);
        let mut mesh = Self::from_parts(vertices, triangles, boundary_nodes, T::zero(), radius)?;
        mesh.h = mesh
            .edges
            .iter()
            .map(|&[a, b]| mesh.vertices[a].sub(mesh.vertices[b]).norm())
            .fold(T::zero(), |m, l| m.max(l));
        Ok(mesh)
    }
}
