//! Boundary treatment: ghost traces for wall/periodic/open boundaries,
//! sponge layers for wave generation and absorption, and the analytic wave
//! targets they relax toward.

use crate::field::State;
use crate::mesh::{BoundaryTag, FaceKind};

/// Ghost construction kinds for the hyperbolic fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostKind {
    Wall,
    Open,
}

pub fn ghost_kind(kind: FaceKind) -> GhostKind {
    match kind {
        FaceKind::Boundary(BoundaryTag::Generation) | FaceKind::Boundary(BoundaryTag::Absorption) => {
            GhostKind::Open
        }
        FaceKind::Boundary(_) => GhostKind::Wall,
        _ => unreachable!("interior faces take traces from the neighbor"),
    }
}

/// Exterior trace at a boundary face Gauss node. Wall reflects the normal
/// discharge; open copies the interior trace.
pub fn ghost_trace(
    eta: f64,
    qx: f64,
    qy: f64,
    b: f64,
    normal: (f64, f64),
    kind: GhostKind,
) -> (f64, f64, f64, f64) {
    match kind {
        GhostKind::Wall => {
            let qn = qx * normal.0 + qy * normal.1;
            (eta, qx - 2.0 * qn * normal.0, qy - 2.0 * qn * normal.1, b)
        }
        GhostKind::Open => (eta, qx, qy, b),
    }
}

/// Solitary wave profile: depth, velocity and surface for a wave of relative
/// amplitude eps over still depth h0, centred at x0 at t = 0.
pub fn solitary_wave(eps: f64, h0: f64, x0: f64, g: f64, x: f64, t: f64) -> (f64, f64) {
    let kappa = (3.0 * eps / (4.0 * h0 * h0 * (1.0 + eps))).sqrt();
    let c = (g * h0 * (1.0 + eps)).sqrt();
    let sech = 1.0 / (kappa * (x - x0 - c * t)).cosh();
    let h = h0 + eps * h0 * sech * sech;
    let u = c * (1.0 - h0 / h);
    (h, u)
}

/// Phase speed of the linearized one-parameter model over depth h0 at the
/// wavenumber solving the period relation: omega^2 = g h0 k^2
/// (1 + (alpha-1)(k h0)^2/3) / (1 + alpha (k h0)^2/3).
pub fn monochromatic_phase_speed(period: f64, h0: f64, g: f64, alpha: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI / period;
    let disp = |k: f64| {
        let kh2 = (k * h0) * (k * h0);
        g * h0 * k * k * (1.0 + (alpha - 1.0) * kh2 / 3.0) / (1.0 + alpha * kh2 / 3.0)
            - omega * omega
    };
    // Newton with bisection fallback, starting from the long-wave guess
    let mut k = omega / (g * h0).sqrt();
    for _ in 0..100 {
        let f = disp(k);
        let dk = 1e-8 * k.max(1e-8);
        let df = (disp(k + dk) - f) / dk;
        let step = f / df;
        let knew = k - step;
        if knew > 0.0 && knew.is_finite() {
            k = knew;
        } else {
            k *= 0.5;
        }
        if step.abs() < 1e-14 * k {
            break;
        }
    }
    omega / k
}

/// Target states a sponge layer relaxes toward.
#[derive(Debug, Clone)]
pub enum SpongeTarget {
    /// Still water at the given surface level.
    Rest { eta0: f64 },
    /// Right-going monochromatic wave train generated from rest.
    Monochromatic {
        amplitude: f64,
        period: f64,
        h0: f64,
        eta0: f64,
        /// phase reference coordinate (x at which the phase is t/T)
        x_ref: f64,
        phase_speed: f64,
        ramp_time: f64,
    },
    /// Solitary wave released from x0 at t = 0.
    Solitary { eps: f64, h0: f64, eta0: f64, x0: f64 },
}

/// Axis-aligned relaxation band. `outer` is the coordinate of the domain
/// boundary the layer is attached to; `inner` the interior end.
#[derive(Debug, Clone)]
pub struct SpongeLayer {
    /// 0 = band in x, 1 = band in y.
    pub axis: usize,
    pub outer: f64,
    pub inner: f64,
    pub target: SpongeTarget,
}

impl SpongeLayer {
    pub fn width(&self) -> f64 {
        (self.inner - self.outer).abs()
    }

    /// Relaxation coefficient at depth d into the layer measured from the
    /// domain-boundary side: 1 at the boundary, 0 at the interior edge.
    pub fn coefficient(&self, coord: f64) -> f64 {
        let l = self.width();
        let d = (coord - self.outer).abs();
        if d >= l || !between(coord, self.outer, self.inner) {
            return 0.0;
        }
        1.0 - ((d / l).powf(3.5).exp() - 1.0) / (1f64.exp() - 1.0)
    }

    /// Target state at a physical point.
    pub fn target_state(&self, x: f64, _y: f64, t: f64, g: f64) -> (f64, f64, f64) {
        match &self.target {
            SpongeTarget::Rest { eta0 } => (*eta0, 0.0, 0.0),
            SpongeTarget::Monochromatic {
                amplitude,
                period,
                h0,
                eta0,
                x_ref,
                phase_speed,
                ramp_time,
            } => {
                let ramp = if *ramp_time > 0.0 {
                    (t / ramp_time).min(1.0)
                } else {
                    1.0
                };
                let a = amplitude * ramp;
                let phase = 2.0 * std::f64::consts::PI * (t - (x - x_ref) / phase_speed) / period;
                let zeta = a * phase.sin();
                let u = zeta * (g / h0).sqrt();
                let h = h0 + zeta;
                (eta0 + zeta, h * u, 0.0)
            }
            SpongeTarget::Solitary { eps, h0, eta0, x0 } => {
                let (h, u) = solitary_wave(*eps, *h0, *x0, g, x, t);
                (eta0 + (h - h0), h * u, 0.0)
            }
        }
    }
}

fn between(v: f64, a: f64, b: f64) -> bool {
    v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12
}

/// Blend the nodal state toward layer targets: W <- (1-c) W + c W_target,
/// applied once per completed time step. `node_xy` holds the physical
/// coordinates of every nodal point (element-major).
pub fn apply_sponge(
    state: &mut State,
    layers: &[SpongeLayer],
    node_xy: &[(f64, f64)],
    t: f64,
    g: f64,
) {
    if layers.is_empty() {
        return;
    }
    for (i, &(x, y)) in node_xy.iter().enumerate() {
        for layer in layers {
            let coord = if layer.axis == 0 { x } else { y };
            let c = layer.coefficient(coord);
            if c <= 0.0 {
                continue;
            }
            let (eta_t, qx_t, qy_t) = layer.target_state(x, y, t, g);
            state.eta.data[i] = (1.0 - c) * state.eta.data[i] + c * eta_t;
            state.qx.data[i] = (1.0 - c) * state.qx.data[i] + c * qx_t;
            state.qy.data[i] = (1.0 - c) * state.qy.data[i] + c * qy_t;
        }
    }
}
