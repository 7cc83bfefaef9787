//! Conforming triangular meshes: connectivity, geometry, boundary tags,
//! periodic pairing, and validation.

pub mod formats;

use crate::error::Error;
use std::collections::HashMap;

/// Named boundary groups. Untagged boundary faces default to `Wall`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Wall,
    PeriodicX,
    PeriodicY,
    Generation,
    Absorption,
}

impl BoundaryTag {
    pub fn parse(name: &str) -> Option<BoundaryTag> {
        match name.trim().to_ascii_lowercase().as_str() {
            "wall" => Some(BoundaryTag::Wall),
            "periodic-x" | "periodic_x" | "periodicx" => Some(BoundaryTag::PeriodicX),
            "periodic-y" | "periodic_y" | "periodicy" => Some(BoundaryTag::PeriodicY),
            "generation" => Some(BoundaryTag::Generation),
            "absorption" => Some(BoundaryTag::Absorption),
            _ => None,
        }
    }
}

/// Face connectivity role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary(BoundaryTag),
    /// Primary face of a periodic pair; traces come from `right`.
    Periodic,
    /// Secondary face of a periodic pair; skipped by flux loops.
    PeriodicSecondary,
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Vertex pair as traversed counter-clockwise by the left element.
    pub v: [usize; 2],
    pub left: usize,
    pub left_local: usize,
    /// Adjacent element on the other side (periodic partner's element for
    /// periodic primaries).
    pub right: Option<usize>,
    pub right_local: usize,
    pub kind: FaceKind,
    /// Unit normal pointing out of `left`.
    pub normal: (f64, f64),
    pub length: f64,
    pub midpoint: (f64, f64),
    /// Partner face id for periodic faces.
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PeriodicSpec {
    pub x: bool,
    pub y: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<(f64, f64)>,
    /// Vertex triples, counter-clockwise.
    pub elements: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// Per element: global face id of local faces 0,1,2
    /// (local face i joins vertices i and (i+1) mod 3).
    pub elem_faces: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    pub perimeters: Vec<f64>,
    /// Element diameter: the longest edge.
    pub diameters: Vec<f64>,
    pub centroids: Vec<(f64, f64)>,
    /// Faces that carry a flux evaluation (interior, boundary, periodic
    /// primaries; periodic secondaries are excluded).
    pub flux_faces: Vec<usize>,
    pub bbox: (f64, f64, f64, f64),
}

fn signed_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
}

impl Mesh {
    /// Build connectivity and geometry from raw vertices/elements. Edge tags
    /// map sorted vertex pairs to boundary groups. Orientation and area sign
    /// are preserved as given (see [`Mesh::validate`]); structurally
    /// impossible meshes (an edge shared by three elements, duplicated
    /// elements) are rejected.
    pub fn build(
        vertices: Vec<(f64, f64)>,
        elements: Vec<[usize; 3]>,
        edge_tags: &HashMap<(usize, usize), BoundaryTag>,
        periodic: PeriodicSpec,
    ) -> Result<Mesh, Error> {
        let nv = vertices.len();
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::MeshParse(format!(
                        "element {e} references vertex {v} out of range (nv = {nv})"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::NonConforming(format!(
                    "element {e} has repeated vertices"
                )));
            }
        }

        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (e, tri) in elements.iter().enumerate() {
            let mut key = *tri;
            key.sort_unstable();
            if let Some(first) = seen.insert(key, e) {
                return Err(Error::NonConforming(format!(
                    "element {e} duplicates element {first}"
                )));
            }
        }

        let mut face_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut elem_faces = vec![[usize::MAX; 3]; elements.len()];
        for (e, tri) in elements.iter().enumerate() {
            for loc in 0..3 {
                let a = tri[loc];
                let b = tri[(loc + 1) % 3];
                let key = (a.min(b), a.max(b));
                match face_map.get(&key) {
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let (dx, dy) = (pb.0 - pa.0, pb.1 - pa.1);
                        let len = (dx * dx + dy * dy).sqrt();
                        if len == 0.0 {
                            return Err(Error::MeshGeometry(format!(
                                "zero-length edge in element {e}"
                            )));
                        }
                        let id = faces.len();
                        faces.push(Face {
                            v: [a, b],
                            left: e,
                            left_local: loc,
                            right: None,
                            right_local: usize::MAX,
                            kind: FaceKind::Boundary(BoundaryTag::Wall),
                            normal: (dy / len, -dx / len),
                            length: len,
                            midpoint: (0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1)),
                            partner: None,
                        });
                        face_map.insert(key, id);
                        elem_faces[e][loc] = id;
                    }
                    Some(&id) => {
                        let f = &mut faces[id];
                        if f.right.is_some() {
                            return Err(Error::NonConforming(format!(
                                "edge ({},{}) shared by more than two elements",
                                key.0, key.1
                            )));
                        }
                        f.right = Some(e);
                        f.right_local = loc;
                        f.kind = FaceKind::Interior;
                        elem_faces[e][loc] = id;
                    }
                }
            }
        }

        // apply boundary tags
        for f in faces.iter_mut() {
            if let FaceKind::Boundary(tag) = &mut f.kind {
                let key = (f.v[0].min(f.v[1]), f.v[0].max(f.v[1]));
                if let Some(t) = edge_tags.get(&key) {
                    *tag = *t;
                }
            }
        }

        let mut areas = Vec::with_capacity(elements.len());
        let mut perimeters = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());
        let mut centroids = Vec::with_capacity(elements.len());
        for tri in &elements {
            let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            areas.push(signed_area(a, b, c));
            let e0 = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            let e1 = ((c.0 - b.0).powi(2) + (c.1 - b.1).powi(2)).sqrt();
            let e2 = ((a.0 - c.0).powi(2) + (a.1 - c.1).powi(2)).sqrt();
            perimeters.push(e0 + e1 + e2);
            diameters.push(e0.max(e1).max(e2));
            centroids.push(((a.0 + b.0 + c.0) / 3.0, (a.1 + b.1 + c.1) / 3.0));
        }

        let xs: Vec<f64> = vertices.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = vertices.iter().map(|p| p.1).collect();
        let bbox = (
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );

        let mut mesh = Mesh {
            vertices,
            elements,
            faces,
            elem_faces,
            areas,
            perimeters,
            diameters,
            centroids,
            flux_faces: Vec::new(),
            bbox,
        };
        if periodic.x {
            mesh.pair_periodic(0)?;
        }
        if periodic.y {
            mesh.pair_periodic(1)?;
        }
        mesh.flux_faces = (0..mesh.faces.len())
            .filter(|&i| mesh.faces[i].kind != FaceKind::PeriodicSecondary)
            .collect();
        Ok(mesh)
    }

    /// Pair boundary faces across the bounding box along the given axis
    /// (0 = x, 1 = y). Midpoints must match to 1e-9 after the offset.
    fn pair_periodic(&mut self, axis: usize) -> Result<(), Error> {
        let (lo, hi) = if axis == 0 {
            (self.bbox.0, self.bbox.1)
        } else {
            (self.bbox.2, self.bbox.3)
        };
        let tol = 1e-9;
        let coord = |m: (f64, f64)| if axis == 0 { m.0 } else { m.1 };
        let other = |m: (f64, f64)| if axis == 0 { m.1 } else { m.0 };
        let want_tag = if axis == 0 {
            BoundaryTag::PeriodicX
        } else {
            BoundaryTag::PeriodicY
        };
        let candidate = |f: &Face| match f.kind {
            FaceKind::Boundary(t) => t == BoundaryTag::Wall || t == want_tag,
            _ => false,
        };
        let mut lo_faces = Vec::new();
        let mut hi_faces = Vec::new();
        for (i, f) in self.faces.iter().enumerate() {
            if !candidate(f) {
                continue;
            }
            if (coord(f.midpoint) - lo).abs() < tol {
                lo_faces.push(i);
            } else if (coord(f.midpoint) - hi).abs() < tol {
                hi_faces.push(i);
            }
        }
        for &fl in &lo_faces {
            let ml = self.faces[fl].midpoint;
            let mut found = None;
            for &fh in &hi_faces {
                let mh = self.faces[fh].midpoint;
                if (other(mh) - other(ml)).abs() < tol && (coord(mh) - coord(ml) - (hi - lo)).abs() < tol
                {
                    found = Some(fh);
                    break;
                }
            }
            let fh = found.ok_or(Error::UnmatchedPeriodicFace {
                face: fl,
                x: ml.0,
                y: ml.1,
            })?;
            let (r_elem, r_local) = (self.faces[fh].left, self.faces[fh].left_local);
            {
                let f = &mut self.faces[fl];
                f.kind = FaceKind::Periodic;
                f.right = Some(r_elem);
                f.right_local = r_local;
                f.partner = Some(fh);
            }
            let (l_elem, l_local) = (self.faces[fl].left, self.faces[fl].left_local);
            {
                let f = &mut self.faces[fh];
                f.kind = FaceKind::PeriodicSecondary;
                f.right = Some(l_elem);
                f.right_local = l_local;
                f.partner = Some(fl);
            }
        }
        // any periodic-tagged face left unpaired is an error
        for (i, f) in self.faces.iter().enumerate() {
            if let FaceKind::Boundary(t) = f.kind {
                if t == want_tag {
                    return Err(Error::UnmatchedPeriodicFace {
                        face: i,
                        x: f.midpoint.0,
                        y: f.midpoint.1,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_elems(&self) -> usize {
        self.elements.len()
    }

    /// Vertex coordinates of an element.
    pub fn elem_vertices(&self, e: usize) -> [(f64, f64); 3] {
        let t = self.elements[e];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }

    /// Affine map data for an element: x = v0 + J (r+1, s+1)/... Returns the
    /// Jacobian columns (x_r, x_s) and determinant for the map from the
    /// reference triangle {(-1,-1),(1,-1),(-1,1)}.
    pub fn jacobian(&self, e: usize) -> ([f64; 4], f64) {
        let [a, b, c] = self.elem_vertices(e);
        // x(r,s) = -(r+s)/2 a + (1+r)/2 b + (1+s)/2 c
        let xr = 0.5 * (b.0 - a.0);
        let yr = 0.5 * (b.1 - a.1);
        let xs = 0.5 * (c.0 - a.0);
        let ys = 0.5 * (c.1 - a.1);
        ([xr, xs, yr, ys], xr * ys - xs * yr)
    }

    /// Physical coordinates of a reference point inside an element.
    pub fn map_ref_to_phys(&self, e: usize, (r, s): (f64, f64)) -> (f64, f64) {
        let [a, b, c] = self.elem_vertices(e);
        let l0 = -0.5 * (r + s);
        let l1 = 0.5 * (1.0 + r);
        let l2 = 0.5 * (1.0 + s);
        (
            l0 * a.0 + l1 * b.0 + l2 * c.0,
            l0 * a.1 + l1 * b.1 + l2 * c.1,
        )
    }

    /// Reference coordinates of a physical point wrt an element.
    pub fn map_phys_to_ref(&self, e: usize, (x, y): (f64, f64)) -> (f64, f64) {
        let ([xr, xs, yr, ys], det) = self.jacobian(e);
        let [a, _, _] = self.elem_vertices(e);
        // x - a = xr (r+1) + xs (s+1), likewise for y
        let dx = x - a.0;
        let dy = y - a.1;
        let rp = (ys * dx - xs * dy) / det;
        let sp = (-yr * dx + xr * dy) / det;
        (rp - 1.0, sp - 1.0)
    }

    /// Total area of the domain from the boundary polygon (shoelace over the
    /// boundary loops, using face orientation as seen from the interior).
    pub fn boundary_polygon_area(&self) -> f64 {
        let mut total = 0.0;
        for f in &self.faces {
            if matches!(f.kind, FaceKind::Interior) {
                continue;
            }
            // all non-interior faces (including periodic) bound the polygon
            let a = self.vertices[f.v[0]];
            let b = self.vertices[f.v[1]];
            total += 0.5 * (a.0 * b.1 - b.0 * a.1);
        }
        total
    }
}

/// Result of one validation check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub worst_element: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {}  {}{}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.detail,
                c.worst_element
                    .map(|e| format!(" (worst element {e})"))
                    .unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Per-invariant pass/fail report; never mutates the mesh.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut checks = Vec::new();

    // positive areas & counter-clockwise orientation
    let mut worst = None;
    let mut min_area = f64::INFINITY;
    for (e, &a) in mesh.areas.iter().enumerate() {
        if a < min_area {
            min_area = a;
            worst = Some(e);
        }
    }
    checks.push(CheckResult {
        name: "positive-areas-ccw",
        pass: min_area > 0.0,
        worst_element: worst,
        detail: format!("min signed area {min_area:.3e}"),
    });

    // face sidedness is structural; report the counts
    let n_int = mesh
        .faces
        .iter()
        .filter(|f| matches!(f.kind, FaceKind::Interior))
        .count();
    let n_bnd = mesh.faces.len() - n_int;
    checks.push(CheckResult {
        name: "face-sidedness",
        pass: true,
        worst_element: None,
        detail: format!("{n_int} interior, {n_bnd} boundary/periodic faces"),
    });

    // area sum vs boundary polygon
    let sum: f64 = mesh.areas.iter().sum();
    let poly = mesh.boundary_polygon_area();
    let rel = ((sum - poly) / poly.abs().max(1e-300)).abs();
    checks.push(CheckResult {
        name: "area-vs-boundary-polygon",
        pass: rel <= 1e-10,
        worst_element: None,
        detail: format!("sum {sum:.12e}, polygon {poly:.12e}, rel {rel:.3e}"),
    });

    // per-element sum of |F| n_TF = 0
    let mut worst_norm = 0.0;
    let mut worst_e = None;
    for e in 0..mesh.n_elems() {
        let mut sx = 0.0;
        let mut sy = 0.0;
        for loc in 0..3 {
            let f = &mesh.faces[mesh.elem_faces[e][loc]];
            let sign = if f.left == e && f.left_local == loc {
                1.0
            } else {
                -1.0
            };
            sx += sign * f.length * f.normal.0;
            sy += sign * f.length * f.normal.1;
        }
        let n = (sx * sx + sy * sy).sqrt();
        if n > worst_norm {
            worst_norm = n;
            worst_e = Some(e);
        }
    }
    checks.push(CheckResult {
        name: "normals-sum-zero",
        pass: worst_norm <= 1e-12 * (1.0 + mesh.bbox.1 - mesh.bbox.0),
        worst_element: worst_e,
        detail: format!("max |sum F n| = {worst_norm:.3e}"),
    });

    // outward orientation: (face midpoint - centroid) . n > 0 (left side)
    let mut bad = None;
    for (i, f) in mesh.faces.iter().enumerate() {
        let c = mesh.centroids[f.left];
        let d = (f.midpoint.0 - c.0, f.midpoint.1 - c.1);
        if d.0 * f.normal.0 + d.1 * f.normal.1 <= 0.0 {
            bad = Some((i, f.left));
            break;
        }
    }
    checks.push(CheckResult {
        name: "normals-outward",
        pass: bad.is_none(),
        worst_element: bad.map(|(_, e)| e),
        detail: bad
            .map(|(i, _)| format!("face {i} normal not outward"))
            .unwrap_or_else(|| "ok".into()),
    });

    // hanging nodes: no vertex strictly inside a single-sided face
    let scale = (mesh.bbox.1 - mesh.bbox.0).max(mesh.bbox.3 - mesh.bbox.2);
    let mut hang = None;
    'outer: for (i, f) in mesh.faces.iter().enumerate() {
        if matches!(f.kind, FaceKind::Interior) {
            continue;
        }
        let a = mesh.vertices[f.v[0]];
        let b = mesh.vertices[f.v[1]];
        for (vi, &p) in mesh.vertices.iter().enumerate() {
            if vi == f.v[0] || vi == f.v[1] {
                continue;
            }
            let t = ((p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1)) / (f.length * f.length);
            if !(1e-9..=1.0 - 1e-9).contains(&t) {
                continue;
            }
            let px = a.0 + t * (b.0 - a.0);
            let py = a.1 + t * (b.1 - a.1);
            if ((p.0 - px).powi(2) + (p.1 - py).powi(2)).sqrt() < 1e-12 * scale.max(1.0) {
                hang = Some((i, vi));
                break 'outer;
            }
        }
    }
    checks.push(CheckResult {
        name: "no-hanging-nodes",
        pass: hang.is_none(),
        worst_element: hang.map(|(i, _)| mesh.faces[i].left),
        detail: hang
            .map(|(i, v)| format!("vertex {v} hangs on face {i}"))
            .unwrap_or_else(|| "ok".into()),
    });

    ValidationReport { checks }
}

/// Load a mesh file (Gmsh MSH 2.2 ASCII for `.msh`, the plain-text format
/// otherwise), build connectivity, pair periodic faces when requested, and
/// enforce all mesh invariants.
pub fn load_mesh(path: &std::path::Path, periodic: PeriodicSpec) -> Result<Mesh, Error> {
    let text = std::fs::read_to_string(path)?;
    let (vertices, elements, tags) = if path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("msh"))
        .unwrap_or(false)
    {
        formats::parse_msh22(&text)?
    } else {
        formats::parse_plain(&text)?
    };
    let mesh = Mesh::build(vertices, elements, &tags, periodic)?;
    let report = validate_mesh(&mesh);
    if !report.all_pass() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name)
            .collect();
        if failed.contains(&"positive-areas-ccw") {
            return Err(Error::MeshGeometry(format!(
                "zero or negative element area ({})",
                report
                    .checks
                    .iter()
                    .find(|c| c.name == "positive-areas-ccw")
                    .unwrap()
                    .detail
            )));
        }
        return Err(Error::NonConforming(failed.join(", ")));
    }
    Ok(mesh)
}

/// Regular triangulation of a rectangle: nx-by-ny cells, each split along
/// the lower-left to upper-right diagonal.
pub fn regular_mesh(
    nx: usize,
    ny: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    periodic: PeriodicSpec,
) -> Result<Mesh, Error> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push((
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            elements.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::build(vertices, elements, &HashMap::new(), periodic)
}
