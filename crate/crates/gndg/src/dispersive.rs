//! Nodal evaluation of the nonlinear operators R1, R2, Q1, Q2, Q3 and the
//! dispersive-correction pipeline: two pairs of scalar elliptic solves per
//! evaluation produce the algebraic source term D_c added to the momentum
//! equations.
//!
//! All nonlinear terms are evaluated by direct nodal products at the
//! interpolation nodes; every derivative entering them is the weak LDG
//! derivative from the global differentiation matrices.

use crate::elliptic::{DiffOps, EllipticSystem};
use crate::error::Error;
use crate::field::{ScalarField, State, VectorField};
use crate::swe::{Bathymetry, PhysParams};

/// R1[h,b] w = -(1/(3h)) grad(h^3 w) - (h/2) w grad b, pointwise.
#[inline]
fn r1_node(h: f64, grad_h3w: (f64, f64), w: f64, grad_b: (f64, f64), eps0: f64) -> (f64, f64) {
    let hd = h.max(eps0);
    (
        -grad_h3w.0 / (3.0 * hd) - 0.5 * h * w * grad_b.0,
        -grad_h3w.1 / (3.0 * hd) - 0.5 * h * w * grad_b.1,
    )
}

/// R2[h,b] w = (1/(2h)) grad(h^2 w) + w grad b, pointwise.
#[inline]
fn r2_node(h: f64, grad_h2w: (f64, f64), w: f64, grad_b: (f64, f64), eps0: f64) -> (f64, f64) {
    let hd = h.max(eps0);
    (
        grad_h2w.0 / (2.0 * hd) + w * grad_b.0,
        grad_h2w.1 / (2.0 * hd) + w * grad_b.1,
    )
}

pub enum RKind {
    R1,
    R2,
}

/// Field-level evaluation of R1/R2 for a scalar argument w (testing surface;
/// the pipeline evaluates the same node formulas with batched derivatives).
pub fn eval_r(
    kind: RKind,
    h: &ScalarField,
    w: &ScalarField,
    bathy: &Bathymetry,
    diff: &DiffOps,
    eps0: f64,
) -> VectorField {
    let nn = h.data.len();
    let mut arg = ScalarField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let p = match kind {
            RKind::R1 => h.data[i] * h.data[i] * h.data[i],
            RKind::R2 => h.data[i] * h.data[i],
        };
        arg.data[i] = p * w.data[i];
    }
    let gx = DiffOps::apply(&diff.dx, &arg);
    let gy = DiffOps::apply(&diff.dy, &arg);
    let mut out = VectorField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let gb = (bathy.grad_b_weak.x.data[i], bathy.grad_b_weak.y.data[i]);
        let v = match kind {
            RKind::R1 => r1_node(h.data[i], (gx.data[i], gy.data[i]), w.data[i], gb, eps0),
            RKind::R2 => r2_node(h.data[i], (gx.data[i], gy.data[i]), w.data[i], gb, eps0),
        };
        out.x.data[i] = v.0;
        out.y.data[i] = v.1;
    }
    out
}

/// Q1[h,b](v) = -2 R1(d1v . d2v_perp + (div v)^2) + R2(v . (v.grad) grad b).
pub fn eval_q1(
    h: &ScalarField,
    u: &ScalarField,
    v: &ScalarField,
    bathy: &Bathymetry,
    diff: &DiffOps,
    eps0: f64,
) -> VectorField {
    let grads = DiffOps::apply_batch(&diff.dx, &[u, v]);
    let (ux, vx) = (&grads[0], &grads[1]);
    let grads_y = DiffOps::apply_batch(&diff.dy, &[u, v]);
    let (uy, vy) = (&grads_y[0], &grads_y[1]);
    let nn = h.data.len();
    let mut s1 = ScalarField::zeros(h.n_elems, h.n_nodes);
    let mut s2 = ScalarField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let div = ux.data[i] + vy.data[i];
        s1.data[i] = vx.data[i] * uy.data[i] - ux.data[i] * vy.data[i] + div * div;
        s2.data[i] = u.data[i] * u.data[i] * bathy.b_xx.data[i]
            + 2.0 * u.data[i] * v.data[i] * bathy.b_xy.data[i]
            + v.data[i] * v.data[i] * bathy.b_yy.data[i];
    }
    let r1 = eval_r(RKind::R1, h, &s1, bathy, diff, eps0);
    let r2 = eval_r(RKind::R2, h, &s2, bathy, diff, eps0);
    let mut out = VectorField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        out.x.data[i] = -2.0 * r1.x.data[i] + r2.x.data[i];
        out.y.data[i] = -2.0 * r1.y.data[i] + r2.y.data[i];
    }
    out
}

/// Q2[h,b](zeta) with zeta the free-surface deviation (grad zeta = grad eta):
/// -h (grad_perp h . grad) grad_perp zeta - (1/(2h)) grad(h^2 grad b . grad zeta)
/// + ((h/2) lap zeta - grad b . grad zeta) grad b.
pub fn eval_q2(
    h: &ScalarField,
    eta: &ScalarField,
    bathy: &Bathymetry,
    diff: &DiffOps,
    eps0: f64,
) -> VectorField {
    let ex = DiffOps::apply(&diff.dx, eta);
    let ey = DiffOps::apply(&diff.dy, eta);
    let exx = DiffOps::apply(&diff.dxx, eta);
    let eyy = DiffOps::apply(&diff.dyy, eta);
    let exy = DiffOps::apply(&diff.dx, &ey);
    let nn = h.data.len();
    let mut s3 = ScalarField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let gbe = bathy.grad_b_weak.x.data[i] * ex.data[i]
            + bathy.grad_b_weak.y.data[i] * ey.data[i];
        s3.data[i] = h.data[i] * h.data[i] * gbe;
    }
    let s3x = DiffOps::apply(&diff.dx, &s3);
    let s3y = DiffOps::apply(&diff.dy, &s3);
    let mut out = VectorField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let (bx, by) = (bathy.grad_b_weak.x.data[i], bathy.grad_b_weak.y.data[i]);
        let hx = ex.data[i] - bx;
        let hy = ey.data[i] - by;
        let hd = h.data[i].max(eps0);
        // -h (grad_perp h . grad) grad_perp zeta
        let t1x = -h.data[i] * (hy * exy.data[i] - hx * eyy.data[i]);
        let t1y = -h.data[i] * (-hy * exx.data[i] + hx * exy.data[i]);
        let t2x = -s3x.data[i] / (2.0 * hd);
        let t2y = -s3y.data[i] / (2.0 * hd);
        let gbe = bx * ex.data[i] + by * ey.data[i];
        let t3 = 0.5 * h.data[i] * (exx.data[i] + eyy.data[i]) - gbe;
        out.x.data[i] = t1x + t2x + t3 * bx;
        out.y.data[i] = t1y + t2y + t3 * by;
    }
    out
}

/// Q3[h,h_b] w = (1/6) grad(h^2 - h_b^2) . grad w + ((h^2-h_b^2)/3) lap w
/// - (1/6) lap(h^2 - h_b^2) w, applied componentwise to a vector field.
pub fn eval_q3(
    h: &ScalarField,
    w: &VectorField,
    bathy: &Bathymetry,
    diff: &DiffOps,
) -> VectorField {
    let nn = h.data.len();
    let mut hdiff = ScalarField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        hdiff.data[i] = h.data[i] * h.data[i] - bathy.h_sq.data[i];
    }
    let gx = DiffOps::apply_batch(&diff.dx, &[&hdiff, &w.x, &w.y]);
    let gy = DiffOps::apply_batch(&diff.dy, &[&hdiff, &w.x, &w.y]);
    let lxx = DiffOps::apply_batch(&diff.dxx, &[&hdiff, &w.x, &w.y]);
    let lyy = DiffOps::apply_batch(&diff.dyy, &[&hdiff, &w.x, &w.y]);
    let mut out = VectorField::zeros(h.n_elems, h.n_nodes);
    for i in 0..nn {
        let lap_g = lxx[0].data[i] + lyy[0].data[i];
        let g = hdiff.data[i];
        out.x.data[i] = (gx[0].data[i] * gx[1].data[i] + gy[0].data[i] * gy[1].data[i]) / 6.0
            + g / 3.0 * (lxx[1].data[i] + lyy[1].data[i])
            - lap_g / 6.0 * w.x.data[i];
        out.y.data[i] = (gx[0].data[i] * gx[2].data[i] + gy[0].data[i] * gy[2].data[i]) / 6.0
            + g / 3.0 * (lxx[2].data[i] + lyy[2].data[i])
            - lap_g / 6.0 * w.y.data[i];
    }
    out
}

/// Full dispersive-correction pipeline. `mask[e] = true` switches the
/// correction off on element e (wave-breaking switch to the hydrostatic
/// equations).
pub fn compute_dispersive_correction(
    state: &State,
    bathy: &Bathymetry,
    sys: &EllipticSystem,
    diff: &DiffOps,
    params: &PhysParams,
    mask: Option<&[bool]>,
) -> Result<VectorField, Error> {
    let ne = state.n_elems();
    let n = state.n_nodes();
    let nn = ne * n;
    let g = params.g;
    let alpha = params.alpha;
    let eps0 = params.eps0;

    // nodal depth and velocity
    let mut h = ScalarField::zeros(ne, n);
    let mut u = ScalarField::zeros(ne, n);
    let mut v = ScalarField::zeros(ne, n);
    let mut hdiff = ScalarField::zeros(ne, n);
    for i in 0..nn {
        let hv = state.eta.data[i] - bathy.b.data[i];
        h.data[i] = hv;
        let hd = hv.max(eps0);
        u.data[i] = state.qx.data[i] / hd;
        v.data[i] = state.qy.data[i] / hd;
        hdiff.data[i] = hv * hv - bathy.h_sq.data[i];
    }

    // batch A: first derivatives of eta, u, v, hdiff
    let ax = DiffOps::apply_batch(&diff.dx, &[&state.eta, &u, &v, &hdiff]);
    let (ex, ux, vx, gx) = (&ax[0], &ax[1], &ax[2], &ax[3]);
    let ay = DiffOps::apply_batch(&diff.dy, &[&state.eta, &u, &v, &hdiff]);
    let (ey, uy, vy, gy) = (&ay[0], &ay[1], &ay[2], &ay[3]);

    // batch B: second derivatives of eta and hdiff
    let bxx = DiffOps::apply_batch(&diff.dxx, &[&state.eta, &hdiff]);
    let (exx, gxx) = (&bxx[0], &bxx[1]);
    let byy = DiffOps::apply_batch(&diff.dyy, &[&state.eta, &hdiff]);
    let (eyy, gyy) = (&byy[0], &byy[1]);

    // K solves: [1 + alpha T] K = g h grad eta
    let mut fx = ScalarField::zeros(ne, n);
    let mut fy = ScalarField::zeros(ne, n);
    for i in 0..nn {
        fx.data[i] = g * h.data[i] * ex.data[i];
        fy.data[i] = g * h.data[i] * ey.data[i];
    }
    let (kx, ky) = sys.solve_pair(&fx, &fy)?;

    // nodal source arguments
    let mut h3s1 = ScalarField::zeros(ne, n);
    let mut h2s2 = ScalarField::zeros(ne, n);
    let mut s1 = vec![0.0; nn];
    let mut s2 = vec![0.0; nn];
    let mut s3 = ScalarField::zeros(ne, n);
    for i in 0..nn {
        let div = ux.data[i] + vy.data[i];
        s1[i] = vx.data[i] * uy.data[i] - ux.data[i] * vy.data[i] + div * div;
        s2[i] = u.data[i] * u.data[i] * bathy.b_xx.data[i]
            + 2.0 * u.data[i] * v.data[i] * bathy.b_xy.data[i]
            + v.data[i] * v.data[i] * bathy.b_yy.data[i];
        let h2 = h.data[i] * h.data[i];
        h3s1.data[i] = h2 * h.data[i] * s1[i];
        h2s2.data[i] = h2 * s2[i];
        let gbe = bathy.grad_b_weak.x.data[i] * ex.data[i]
            + bathy.grad_b_weak.y.data[i] * ey.data[i];
        s3.data[i] = h2 * gbe;
    }

    // batch C: gradients of the product arguments, the K components, and the
    // mixed second derivative of eta (d_x of d_y eta)
    let cx = DiffOps::apply_batch(&diff.dx, &[&h3s1, &h2s2, &s3, &kx, &ky, ey]);
    let cy = DiffOps::apply_batch(&diff.dy, &[&h3s1, &h2s2, &s3, &kx, &ky]);
    let dxx_k = DiffOps::apply_batch(&diff.dxx, &[&kx, &ky]);
    let dyy_k = DiffOps::apply_batch(&diff.dyy, &[&kx, &ky]);

    // assemble f = (1/alpha) g h grad eta + h (Q1 + g Q2) + Q3(K), nodally
    let mut fzx = ScalarField::zeros(ne, n);
    let mut fzy = ScalarField::zeros(ne, n);
    for i in 0..nn {
        let hv = h.data[i];
        let hd = hv.max(eps0);
        let (bx, by) = (bathy.grad_b_weak.x.data[i], bathy.grad_b_weak.y.data[i]);
        // Q1
        let r1 = r1_node(hv, (cx[0].data[i], cy[0].data[i]), s1[i], (bx, by), eps0);
        let r2 = r2_node(hv, (cx[1].data[i], cy[1].data[i]), s2[i], (bx, by), eps0);
        let q1 = (-2.0 * r1.0 + r2.0, -2.0 * r1.1 + r2.1);
        // Q2
        let hx = ex.data[i] - bx;
        let hy = ey.data[i] - by;
        let exy = cx[5].data[i];
        let t1x = -hv * (hy * exy - hx * eyy.data[i]);
        let t1y = -hv * (-hy * exx.data[i] + hx * exy);
        let t2x = -cx[2].data[i] / (2.0 * hd);
        let t2y = -cy[2].data[i] / (2.0 * hd);
        let gbe = bx * ex.data[i] + by * ey.data[i];
        let t3 = 0.5 * hv * (exx.data[i] + eyy.data[i]) - gbe;
        let q2 = (t1x + t2x + t3 * bx, t1y + t2y + t3 * by);
        // Q3(K)
        let lap_g = gxx.data[i] + gyy.data[i];
        let gd = hdiff.data[i];
        let q3x = (gx.data[i] * cx[3].data[i] + gy.data[i] * cy[3].data[i]) / 6.0
            + gd / 3.0 * (dxx_k[0].data[i] + dyy_k[0].data[i])
            - lap_g / 6.0 * kx.data[i];
        let q3y = (gx.data[i] * cx[4].data[i] + gy.data[i] * cy[4].data[i]) / 6.0
            + gd / 3.0 * (dxx_k[1].data[i] + dyy_k[1].data[i])
            - lap_g / 6.0 * ky.data[i];
        fzx.data[i] = fx.data[i] / alpha + hv * (q1.0 + g * q2.0) + q3x;
        fzy.data[i] = fy.data[i] / alpha + hv * (q1.1 + g * q2.1) + q3y;
    }

    // z solves and the correction D_c = z - (1/alpha) g h grad eta
    let (zx, zy) = sys.solve_pair(&fzx, &fzy)?;
    let mut dc = VectorField::zeros(ne, n);
    for i in 0..nn {
        dc.x.data[i] = zx.data[i] - fx.data[i] / alpha;
        dc.y.data[i] = zy.data[i] - fy.data[i] / alpha;
    }
    if let Some(m) = mask {
        for e in 0..ne {
            if m[e] {
                dc.x.elem_mut(e).fill(0.0);
                dc.y.elem_mut(e).fill(0.0);
            }
        }
    }
    if !dc.all_finite() {
        return Err(Error::NonFinite("dispersive correction".into()));
    }
    Ok(dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{project_function, reference_element};
    use crate::elliptic::{assemble_diff_matrices, assemble_elliptic_operator};
    use crate::mesh::{regular_mesh, Mesh, PeriodicSpec};

    const G: f64 = 9.81;

    fn params(h0: f64) -> PhysParams {
        PhysParams {
            g: G,
            alpha: 1.159,
            eps0: 0.1,
            h0,
        }
    }

    fn setup(
        mesh: &Mesh,
        k: usize,
        h0: f64,
        b_fun: &dyn Fn(f64, f64) -> f64,
    ) -> (
        crate::basis::ReferenceElement,
        Bathymetry,
        DiffOps,
        EllipticSystem,
    ) {
        let re = reference_element(k).unwrap();
        let diff = assemble_diff_matrices(mesh, &re);
        let p = params(h0);
        let b = project_function(b_fun, mesh, &re);
        let bathy = Bathymetry::new(b, &p, mesh, &re, &diff);
        let sys =
            assemble_elliptic_operator(&bathy.h_sq, &bathy.grad_h_sq, p.alpha, mesh, &re, &diff)
                .unwrap();
        (re, bathy, diff, sys)
    }

    #[test]
    fn r_operators_vanish_on_trivial_input() {
        let mesh = regular_mesh(6, 6, 0.0, 1.0, 0.0, 1.0, PeriodicSpec { x: true, y: true }).unwrap();
        let (re, bathy, diff, _) = setup(&mesh, 2, 1.0, &|_, _| 0.0);
        let h = ScalarField::constant(1.0, mesh.n_elems(), re.n_nodes);
        let w0 = ScalarField::zeros(mesh.n_elems(), re.n_nodes);
        let r = eval_r(RKind::R1, &h, &w0, &bathy, &diff, 0.1);
        assert!(r.max_abs() < 1e-14);
        // constant h, flat b, constant w: all gradients vanish
        let wc = ScalarField::constant(0.7, mesh.n_elems(), re.n_nodes);
        let r1 = eval_r(RKind::R1, &h, &wc, &bathy, &diff, 0.1);
        let r2 = eval_r(RKind::R2, &h, &wc, &bathy, &diff, 0.1);
        assert!(r1.max_abs() < 1e-10);
        assert!(r2.max_abs() < 1e-10);
    }

    #[test]
    fn r1_matches_symbolic_oracle() {
        // h = 1 + 0.1 x, b = 0, w = x: R1 = -(1/(3h)) d/dx(h^3 x)
        let mesh = regular_mesh(24, 4, 0.0, 1.0, 0.0, 0.2, PeriodicSpec { y: true, ..Default::default() })
            .unwrap();
        let (re, bathy, diff, _) = setup(&mesh, 3, 1.0, &|_, _| 0.0);
        let h = project_function(&|x, _| 1.0 + 0.1 * x, &mesh, &re);
        let w = project_function(&|x, _| x, &mesh, &re);
        let r = eval_r(RKind::R1, &h, &w, &bathy, &diff, 0.1);
        let oracle = |x: f64| {
            let h = 1.0 + 0.1 * x;
            let dh3w = h * h * h + 3.0 * 0.1 * h * h * x;
            -dh3w / (3.0 * h)
        };
        let mut max_err: f64 = 0.0;
        for e in 0..mesh.n_elems() {
            // skip boundary columns in x
            let cx = mesh.centroids[e].0;
            if !(0.1..=0.9).contains(&cx) {
                continue;
            }
            for (i, &p) in re.nodes.iter().enumerate() {
                let (x, _) = mesh.map_ref_to_phys(e, p);
                max_err = max_err.max((r.x.elem(e)[i] - oracle(x)).abs());
                max_err = max_err.max(r.y.elem(e)[i].abs());
            }
        }
        assert!(max_err < 1e-6, "R1 symbolic mismatch {max_err:.2e}");
    }

    #[test]
    fn q1_zero_cases_and_symbolic() {
        let mesh = regular_mesh(16, 16, 0.0, 1.0, 0.0, 1.0, PeriodicSpec { x: true, y: true }).unwrap();
        let (re, bathy, diff, _) = setup(&mesh, 2, 1.0, &|_, _| 0.0);
        let ne = mesh.n_elems();
        let h = ScalarField::constant(1.0, ne, re.n_nodes);
        // v = 0 -> 0
        let z = ScalarField::zeros(ne, re.n_nodes);
        let q = eval_q1(&h, &z, &z, &bathy, &diff, 0.1);
        assert!(q.max_abs() < 1e-14);
        // constant v, flat b -> 0
        let c = ScalarField::constant(0.4, ne, re.n_nodes);
        let q = eval_q1(&h, &c, &c, &bathy, &diff, 0.1);
        assert!(q.max_abs() < 1e-9, "{}", q.max_abs());
        // shear flow v = (y, 0): s1 = 0 identically, so Q1 = 0
        let u = project_function(&|_, y| y, &mesh, &re);
        let q = eval_q1(&h, &u, &z, &bathy, &diff, 0.1);
        assert!(q.max_abs() < 1e-8, "{}", q.max_abs());
        // v = (y, x^2): s1 = d1v.d2v_perp = 2x, h = 1:
        // Q1 = -2 R1(2x) = -2 * ( -(1/3) d/dx (2x) ) = (4/3, 0)
        let v2 = project_function(&|x, _| x * x, &mesh, &re);
        let q = eval_q1(&h, &u, &v2, &bathy, &diff, 0.1);
        let mut max_err: f64 = 0.0;
        for e in 0..ne {
            let (cx, cy) = mesh.centroids[e];
            if !(0.15..=0.85).contains(&cx) || !(0.15..=0.85).contains(&cy) {
                continue;
            }
            for i in 0..re.n_nodes {
                max_err = max_err.max((q.x.elem(e)[i] - 4.0 / 3.0).abs());
                max_err = max_err.max(q.y.elem(e)[i].abs());
            }
        }
        assert!(max_err < 1e-6, "Q1 symbolic mismatch {max_err:.2e}");
    }

    #[test]
    fn q2_zero_for_constant_surface_and_symbolic_flat_bottom() {
        let mesh = regular_mesh(16, 16, 0.0, 1.0, 0.0, 1.0, PeriodicSpec { x: true, y: true }).unwrap();
        let (re, bathy, diff, _) = setup(&mesh, 2, 1.5, &|x, y| 0.1 * x + 0.05 * y);
        let ne = mesh.n_elems();
        let eta = ScalarField::constant(1.5, ne, re.n_nodes);
        let mut h = ScalarField::zeros(ne, re.n_nodes);
        for i in 0..h.data.len() {
            h.data[i] = eta.data[i] - bathy.b.data[i];
        }
        let q = eval_q2(&h, &eta, &bathy, &diff, 0.1);
        assert!(q.max_abs() < 1e-9, "Q2 at constant eta: {}", q.max_abs());

        // flat bottom: only the first term survives;
        // eta = x^2 y, h = eta - 0: grad h = grad eta = (2xy, x^2),
        // D2 eta: exx = 2y, eyy = 0, exy = 2x
        // t1x = -h (hy exy - hx eyy) = -h (x^2 2x) = -2 x^3 h
        // t1y = -h (-hy exx + hx exy) = -h(-(x^2)(2y) + (2xy)(2x)) = -h(2x^2 y)
        let mesh2 = regular_mesh(16, 16, 0.25, 1.0, 0.25, 1.0, PeriodicSpec::default()).unwrap();
        let (re2, bathy2, diff2, _) = setup(&mesh2, 3, 1.0, &|_, _| 0.0);
        let eta2 = project_function(&|x, y| x * x * y, &mesh2, &re2);
        let h2 = eta2.clone();
        let q2 = eval_q2(&h2, &eta2, &bathy2, &diff2, 1e-6);
        let mut max_err: f64 = 0.0;
        for e in 0..mesh2.n_elems() {
            let (cx, cy) = mesh2.centroids[e];
            if !(0.35..=0.9).contains(&cx) || !(0.35..=0.9).contains(&cy) {
                continue;
            }
            for (i, &p) in re2.nodes.iter().enumerate() {
                let (x, y) = mesh2.map_ref_to_phys(e, p);
                let h = x * x * y;
                let ex1 = -2.0 * x * x * x * h;
                let ey1 = -2.0 * x * x * y * h;
                max_err = max_err.max((q2.x.elem(e)[i] - ex1).abs());
                max_err = max_err.max((q2.y.elem(e)[i] - ey1).abs());
            }
        }
        assert!(max_err < 1e-6, "Q2 symbolic mismatch {max_err:.2e}");
    }

    #[test]
    fn q3_structure() {
        let mesh = regular_mesh(12, 12, 0.0, 1.0, 0.0, 1.0, PeriodicSpec { x: true, y: true }).unwrap();
        let (re, bathy, diff, _) = setup(&mesh, 2, 1.0, &|_, _| 0.0);
        let ne = mesh.n_elems();
        // h = h_b everywhere -> Q3 = 0
        let h = bathy.h_b.clone();
        let w = VectorField {
            x: project_function(&|x, y| x + y, &mesh, &re),
            y: project_function(&|x, y| x * y, &mesh, &re),
        };
        let q = eval_q3(&h, &w, &bathy, &diff);
        assert!(q.max_abs() < 1e-9, "{}", q.max_abs());
        // constant w: only the -(1/6) lap(h^2-h_b^2) w term survives;
        // h^2 - h_b^2 = 2 h0 zeta + zeta^2 with zeta = 0.1 sin(2 pi x).
        // Repeated weak differentiation carries O(h^{k-1}) max-norm error,
        // so the oracle comparison is relative at k = 3.
        let mesh3 = regular_mesh(24, 4, 0.0, 1.0, 0.0, 0.2, PeriodicSpec { x: true, y: true }).unwrap();
        let (re3, bathy3, diff3, _) = setup(&mesh3, 3, 1.0, &|_, _| 0.0);
        let ne3 = mesh3.n_elems();
        let zeta_fn = |x: f64| 0.1 * (2.0 * std::f64::consts::PI * x).sin();
        let mut h2 = ScalarField::zeros(ne3, re3.n_nodes);
        let etaf = project_function(&|x, _| 1.0 + zeta_fn(x), &mesh3, &re3);
        for i in 0..h2.data.len() {
            h2.data[i] = etaf.data[i] - bathy3.b.data[i];
        }
        let wc = VectorField {
            x: ScalarField::constant(2.0, ne3, re3.n_nodes),
            y: ScalarField::constant(-1.0, ne3, re3.n_nodes),
        };
        let q = eval_q3(&h2, &wc, &bathy3, &diff3);
        let tp = 2.0 * std::f64::consts::PI;
        let lap_g = |x: f64| {
            // d2/dx2 of (2 zeta + zeta^2), h0 = 1
            let s = (tp * x).sin();
            let c = (tp * x).cos();
            2.0 * (-0.1 * tp * tp * s) + 2.0 * (0.1 * tp * c).powi(2)
                + 2.0 * (0.1 * s) * (-0.1 * tp * tp * s)
        };
        let scale = 0.1 * tp * tp * 2.0 / 6.0 * 2.0; // magnitude of the surviving term
        let mut max_err: f64 = 0.0;
        for e in 0..ne3 {
            for (i, &p) in re3.nodes.iter().enumerate() {
                let (x, _) = mesh3.map_ref_to_phys(e, p);
                max_err = max_err.max((q.x.elem(e)[i] - (-lap_g(x) / 6.0 * 2.0)).abs());
                max_err = max_err.max((q.y.elem(e)[i] - (-lap_g(x) / 6.0 * -1.0)).abs());
            }
        }
        assert!(
            max_err / scale < 0.05,
            "Q3 constant-w relative mismatch {:.2e}",
            max_err / scale
        );
    }

    #[test]
    fn correction_vanishes_at_rest_and_is_translation_invariant() {
        let mesh = regular_mesh(8, 8, -1.0, 1.0, -1.0, 1.0, PeriodicSpec::default()).unwrap();
        let bump = |x: f64, y: f64| {
            let d = 0.45;
            let l = 0.15;
            let r1 = ((x + 1.0 / 3.0).powi(2) + (y + 1.0 / 3.0).powi(2)).sqrt();
            let r2 = ((x - 1.0 / 3.0).powi(2) + (y - 1.0 / 3.0).powi(2)).sqrt();
            1.0 + d * (-(r1 / l).powi(2)).exp() - d * (-(r2 / l).powi(2)).exp()
        };
        let (re, bathy, diff, sys) = setup(&mesh, 2, 1.5, &bump);
        let p = params(1.5);
        let mut state = State::zeros(mesh.n_elems(), re.n_nodes);
        for v in state.eta.data.iter_mut() {
            *v = 1.5;
        }
        let dc = compute_dispersive_correction(&state, &bathy, &sys, &diff, &p, None).unwrap();
        assert!(dc.max_abs() < 1e-10, "D_c at rest: {:.3e}", dc.max_abs());

        // moving state: adding a constant to eta leaves D_c unchanged
        let mut s1 = State::zeros(mesh.n_elems(), re.n_nodes);
        let etaf = project_function(&|x, y| 1.5 + 0.05 * (x + 0.3 * y).sin(), &mesh, &re);
        let qxf = project_function(&|x, _| 0.2 * (1.3 * x).cos(), &mesh, &re);
        s1.eta = etaf;
        s1.qx = qxf;
        let dc1 = compute_dispersive_correction(&s1, &bathy, &sys, &diff, &p, None).unwrap();
        let mut s2 = s1.clone();
        for v in s2.eta.data.iter_mut() {
            *v += 7.5;
        }
        // keep the depth identical by shifting the bathymetry reference:
        // translation invariance here means only derivative caches of eta
        // enter; h changes if b is fixed, so compare through h by shifting b
        // as well.
        let b2 = {
            let mut b = bathy.b.clone();
            for v in b.data.iter_mut() {
                *v += 7.5;
            }
            b
        };
        let bathy2 = Bathymetry {
            b: b2,
            h_b: bathy.h_b.clone(),
            h_sq: bathy.h_sq.clone(),
            grad_h_sq: bathy.grad_h_sq.clone(),
            grad_b: bathy.grad_b.clone(),
            grad_b_weak: bathy.grad_b_weak.clone(),
            b_xx: bathy.b_xx.clone(),
            b_yy: bathy.b_yy.clone(),
            b_xy: bathy.b_xy.clone(),
        };
        let dc2 = compute_dispersive_correction(&s2, &bathy2, &sys, &diff, &p, None).unwrap();
        let mut dmax: f64 = 0.0;
        for i in 0..dc1.x.data.len() {
            dmax = dmax.max((dc1.x.data[i] - dc2.x.data[i]).abs());
            dmax = dmax.max((dc1.y.data[i] - dc2.y.data[i]).abs());
        }
        assert!(dmax < 1e-9, "translation invariance: {dmax:.3e}");

        // full breaking mask reduces to the hydrostatic equations
        let mask = vec![true; mesh.n_elems()];
        let dc3 = compute_dispersive_correction(&s1, &bathy, &sys, &diff, &p, Some(&mask)).unwrap();
        assert_eq!(dc3.max_abs(), 0.0);
    }

    #[test]
    fn component_solves_are_order_independent() {
        let mesh = regular_mesh(6, 6, 0.0, 1.0, 0.0, 1.0, PeriodicSpec { x: true, y: true }).unwrap();
        let (re, _bathy, _diff, sys) = setup(&mesh, 2, 1.0, &|_, _| 0.0);
        let fx = project_function(&|x, y| (2.0 * x).sin() + y, &mesh, &re);
        let fy = project_function(&|x, y| x * y - 0.3, &mesh, &re);
        let (zx, zy) = sys.solve_pair(&fx, &fy).unwrap();
        let zx_solo = sys.solve(&fx).unwrap();
        let zy_solo = sys.solve(&fy).unwrap();
        // bit-identical regardless of pairing or order
        assert_eq!(zx.data, zx_solo.data);
        assert_eq!(zy.data, zy_solo.data);
        let (zy2, zx2) = sys.solve_pair(&fy, &fx).unwrap();
        assert_eq!(zx2.data, zx.data);
        assert_eq!(zy2.data, zy.data);
    }
}
