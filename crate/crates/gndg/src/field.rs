//! Broken polynomial fields: per-element nodal coefficients in element-major
//! layout.

/// Scalar field on the broken space: n_elems blocks of n_nodes coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub data: Vec<f64>,
    pub n_elems: usize,
    pub n_nodes: usize,
}

impl ScalarField {
    pub fn zeros(n_elems: usize, n_nodes: usize) -> Self {
        ScalarField {
            data: vec![0.0; n_elems * n_nodes],
            n_elems,
            n_nodes,
        }
    }

    pub fn constant(c: f64, n_elems: usize, n_nodes: usize) -> Self {
        ScalarField {
            data: vec![c; n_elems * n_nodes],
            n_elems,
            n_nodes,
        }
    }

    #[inline]
    pub fn elem(&self, e: usize) -> &[f64] {
        &self.data[e * self.n_nodes..(e + 1) * self.n_nodes]
    }

    #[inline]
    pub fn elem_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.data[e * self.n_nodes..(e + 1) * self.n_nodes]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// In-place x <- a*x + b*y.
    pub fn axpby(&mut self, a: f64, b: f64, y: &ScalarField) {
        debug_assert_eq!(self.data.len(), y.data.len());
        for (x, yv) in self.data.iter_mut().zip(y.data.iter()) {
            *x = a * *x + b * *yv;
        }
    }
}

/// Vector field as two scalar component fields.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn zeros(n_elems: usize, n_nodes: usize) -> Self {
        VectorField {
            x: ScalarField::zeros(n_elems, n_nodes),
            y: ScalarField::zeros(n_elems, n_nodes),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

/// Flow state: total free surface eta = h + b and discharge q = h v.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub eta: ScalarField,
    pub qx: ScalarField,
    pub qy: ScalarField,
}

impl State {
    pub fn zeros(n_elems: usize, n_nodes: usize) -> Self {
        State {
            eta: ScalarField::zeros(n_elems, n_nodes),
            qx: ScalarField::zeros(n_elems, n_nodes),
            qy: ScalarField::zeros(n_elems, n_nodes),
        }
    }

    pub fn n_elems(&self) -> usize {
        self.eta.n_elems
    }

    pub fn n_nodes(&self) -> usize {
        self.eta.n_nodes
    }

    pub fn all_finite(&self) -> bool {
        self.eta.all_finite() && self.qx.all_finite() && self.qy.all_finite()
    }

    /// state <- a*state + b*other (used by SSP stage combinations).
    pub fn axpby(&mut self, a: f64, b: f64, other: &State) {
        self.eta.axpby(a, b, &other.eta);
        self.qx.axpby(a, b, &other.qx);
        self.qy.axpby(a, b, &other.qy);
    }
}
