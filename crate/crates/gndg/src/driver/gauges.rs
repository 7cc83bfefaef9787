//! Point location on the mesh and in-element sampling of fields at exact
//! gauge positions.

use crate::basis::ReferenceElement;
use crate::error::Error;
use crate::field::State;
use crate::mesh::Mesh;

/// Uniform bin grid over element bounding boxes for point location.
pub struct Locator {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    bins: Vec<Vec<u32>>,
}

impl Locator {
    pub fn build(mesh: &Mesh) -> Locator {
        let (x0, x1, y0, y1) = mesh.bbox;
        let n_target = (mesh.n_elems() as f64).sqrt().ceil() as usize;
        let nx = n_target.max(1);
        let ny = n_target.max(1);
        let dx = ((x1 - x0) / nx as f64).max(1e-300);
        let dy = ((y1 - y0) / ny as f64).max(1e-300);
        let mut bins = vec![Vec::new(); nx * ny];
        for e in 0..mesh.n_elems() {
            let vs = mesh.elem_vertices(e);
            let exmin = vs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let exmax = vs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let eymin = vs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let eymax = vs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let i0 = (((exmin - x0) / dx).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((exmax - x0) / dx).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((eymin - y0) / dy).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((eymax - y0) / dy).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(e as u32);
                }
            }
        }
        Locator {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
            bins,
        }
    }

    /// Element containing the point (barycentric test with tolerance) plus
    /// its reference coordinates.
    pub fn find(&self, mesh: &Mesh, x: f64, y: f64) -> Option<(usize, (f64, f64))> {
        let i = (((x - self.x0) / self.dx).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((y - self.y0) / self.dy).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, (f64, f64), f64)> = None;
        for &e in &self.bins[j * self.nx + i] {
            let e = e as usize;
            let (r, s) = mesh.map_phys_to_ref(e, (x, y));
            // barycentric coordinates of the reference triangle
            let l0 = -0.5 * (r + s);
            let l1 = 0.5 * (1.0 + r);
            let l2 = 0.5 * (1.0 + s);
            let viol = (-l0).max(-l1).max(-l2);
            if viol <= 1e-10 {
                return Some((e, (r, s)));
            }
            if best.map(|(_, _, v)| viol < v).unwrap_or(true) {
                best = Some((e, (r, s), viol));
            }
        }
        // tolerate points marginally outside (gauge on a face)
        best.filter(|&(_, _, v)| v < 1e-6).map(|(e, rs, _)| (e, rs))
    }
}

/// A gauge bound to its containing element with a precomputed basis row.
pub struct Gauge {
    pub position: (f64, f64),
    pub element: usize,
    phi: Vec<f64>,
}

impl Gauge {
    pub fn bind(
        position: (f64, f64),
        mesh: &Mesh,
        re: &ReferenceElement,
        loc: &Locator,
    ) -> Result<Gauge, Error> {
        let (element, rs) = loc.find(mesh, position.0, position.1).ok_or_else(|| {
            Error::Config(format!(
                "gauge ({}, {}) lies outside the mesh",
                position.0, position.1
            ))
        })?;
        let phi = re.phi_at(&[rs]);
        Ok(Gauge {
            position,
            element,
            phi: phi.data,
        })
    }

    #[inline]
    pub fn sample(&self, state: &State) -> (f64, f64, f64) {
        let mut eta = 0.0;
        let mut qx = 0.0;
        let mut qy = 0.0;
        let el = self.element;
        for (i, &p) in self.phi.iter().enumerate() {
            eta += p * state.eta.elem(el)[i];
            qx += p * state.qx.elem(el)[i];
            qy += p * state.qy.elem(el)[i];
        }
        (eta, qx, qy)
    }
}

/// Time series recorded at one gauge.
#[derive(Debug, Clone, Default)]
pub struct GaugeSeries {
    pub position: (f64, f64),
    pub t: Vec<f64>,
    pub eta: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

/// Pointwise evaluator over a finished solution (used as the reference in
/// convergence studies).
pub struct FieldEvaluator<'a> {
    pub mesh: &'a Mesh,
    pub re: &'a ReferenceElement,
    pub state: &'a State,
    pub locator: Locator,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(mesh: &'a Mesh, re: &'a ReferenceElement, state: &'a State) -> Self {
        FieldEvaluator {
            mesh,
            re,
            state,
            locator: Locator::build(mesh),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        let (e, rs) = self.locator.find(self.mesh, x, y)?;
        let phi = self.re.phi_at(&[rs]);
        let mut eta = 0.0;
        let mut qx = 0.0;
        let mut qy = 0.0;
        for i in 0..self.re.n_nodes {
            eta += phi.data[i] * self.state.eta.elem(e)[i];
            qx += phi.data[i] * self.state.qx.elem(e)[i];
            qy += phi.data[i] * self.state.qy.elem(e)[i];
        }
        Some((eta, qx, qy))
    }
}
