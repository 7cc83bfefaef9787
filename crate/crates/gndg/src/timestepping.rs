//! CFL-constrained adaptive time step and strong-stability-preserving
//! Runge-Kutta integration with the limiting operator applied to every
//! stage input.

use crate::basis::ReferenceElement;
use crate::error::Error;
use crate::field::State;
use crate::mesh::Mesh;
use crate::swe::FluxContext;

/// SSP order used for a given polynomial degree.
pub fn rk_order_for(k: usize) -> usize {
    match k {
        1 => 2,
        2 => 3,
        _ => 4,
    }
}

/// Positivity time step: dt = safety * min_T (2/3) w1 |T| / (lambda_T p_T),
/// skipping dry elements; capped by the next output/event time.
pub fn compute_dt(
    ctx: &FluxContext,
    mesh: &Mesh,
    re: &ReferenceElement,
    safety: f64,
    cap: f64,
) -> f64 {
    let factor = 2.0 / 3.0 * re.omega1_gl;
    let mut dt = f64::INFINITY;
    for e in 0..mesh.n_elems() {
        if ctx.lambda[e] > 0.0 {
            dt = dt.min(factor * mesh.areas[e] / (ctx.lambda[e] * mesh.perimeters[e]));
        }
    }
    if dt.is_finite() {
        (safety * dt).min(cap)
    } else {
        cap
    }
}

/// Stage evaluator: limit the stage input in place, then write its time
/// derivative. The contract matches the composition of the semi-discrete
/// operator with the limiting operator.
pub trait StageFn {
    fn eval(&mut self, state: &mut State, out: &mut State) -> Result<(), Error>;
}

impl<F: FnMut(&mut State, &mut State) -> Result<(), Error>> StageFn for F {
    fn eval(&mut self, state: &mut State, out: &mut State) -> Result<(), Error> {
        self(state, out)
    }
}

/// SSP Runge-Kutta stepper with reusable stage buffers.
pub struct SspRk {
    pub order: usize,
    u1: State,
    u2: State,
    u3: State,
    u4: State,
    k: State,
    k2: State,
}

impl SspRk {
    pub fn new(order: usize, n_elems: usize, n_nodes: usize) -> SspRk {
        assert!(matches!(order, 2 | 3 | 4), "supported SSP orders: 2, 3, 4");
        SspRk {
            order,
            u1: State::zeros(n_elems, n_nodes),
            u2: State::zeros(n_elems, n_nodes),
            u3: State::zeros(n_elems, n_nodes),
            u4: State::zeros(n_elems, n_nodes),
            k: State::zeros(n_elems, n_nodes),
            k2: State::zeros(n_elems, n_nodes),
        }
    }

    /// Advance the state by one step of size dt.
    pub fn step(
        &mut self,
        state: &mut State,
        dt: f64,
        stage: &mut impl StageFn,
    ) -> Result<(), Error> {
        match self.order {
            2 => {
                stage.eval(state, &mut self.k)?;
                self.u1.clone_from(state);
                self.u1.axpby(1.0, dt, &self.k);
                stage.eval(&mut self.u1, &mut self.k)?;
                // u = 1/2 u + 1/2 (u1 + dt k)
                self.u1.axpby(1.0, dt, &self.k);
                state.axpby(0.5, 0.5, &self.u1);
            }
            3 => {
                stage.eval(state, &mut self.k)?;
                self.u1.clone_from(state);
                self.u1.axpby(1.0, dt, &self.k);
                stage.eval(&mut self.u1, &mut self.k)?;
                // u2 = 3/4 u + 1/4 u1 + 1/4 dt k
                self.u2.clone_from(&self.u1);
                self.u2.axpby(0.25, 0.25 * dt, &self.k);
                self.u2.axpby(1.0, 0.75, state);
                stage.eval(&mut self.u2, &mut self.k)?;
                // u = 1/3 u + 2/3 u2 + 2/3 dt k
                self.u2.axpby(2.0 / 3.0, 2.0 / 3.0 * dt, &self.k);
                state.axpby(1.0 / 3.0, 1.0, &self.u2);
            }
            4 => {
                // five-stage fourth-order SSP scheme
                const B10: f64 = 0.391752226571890;
                const A20: f64 = 0.444370493651235;
                const A21: f64 = 0.555629506348765;
                const B21: f64 = 0.368410593050371;
                const A30: f64 = 0.620101851488403;
                const A32: f64 = 0.379898148511597;
                const B32: f64 = 0.251891774271694;
                const A40: f64 = 0.178079954393132;
                const A43: f64 = 0.821920045606868;
                const B43: f64 = 0.544974750228521;
                const C52: f64 = 0.517231671970585;
                const C53: f64 = 0.096059710526147;
                const B53: f64 = 0.063692468666290;
                const C54: f64 = 0.386708617503269;
                const B54: f64 = 0.226007483236906;

                stage.eval(state, &mut self.k)?;
                self.u1.clone_from(state);
                self.u1.axpby(1.0, B10 * dt, &self.k);
                stage.eval(&mut self.u1, &mut self.k)?;
                self.u2.clone_from(&self.u1);
                self.u2.axpby(A21, B21 * dt, &self.k);
                self.u2.axpby(1.0, A20, state);
                stage.eval(&mut self.u2, &mut self.k)?;
                self.u3.clone_from(&self.u2);
                self.u3.axpby(A32, B32 * dt, &self.k);
                self.u3.axpby(1.0, A30, state);
                // k2 = R(u3), reused in the final combination
                stage.eval(&mut self.u3, &mut self.k2)?;
                self.u4.clone_from(&self.u3);
                self.u4.axpby(A43, B43 * dt, &self.k2);
                self.u4.axpby(1.0, A40, state);
                stage.eval(&mut self.u4, &mut self.k)?;
                // u = C52 u2 + C53 u3 + B53 dt k2 + C54 u4 + B54 dt k
                state.clone_from(&self.u2);
                state.axpby(C52, C53, &self.u3);
                state.axpby(1.0, B53 * dt, &self.k2);
                state.axpby(1.0, C54, &self.u4);
                state.axpby(1.0, B54 * dt, &self.k);
            }
            _ => unreachable!(),
        }
        Ok(())
    }
}
