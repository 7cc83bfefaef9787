//! LDG discretization of the scalar operator 1 + alpha*T[h_b] (assembled and
//! factorized once per bathymetry) and the global weak differentiation
//! matrices D_x, D_y, D_xx, D_yy.
//!
//! The operator is handled through the divergence identity
//!   T[h_b] w = -(1/3) div(H grad w) + (1/6) div(w grad H),   H = h_b^2,
//! in mixed form with an auxiliary diffusive flux p = grad w. Interface
//! fluxes are the alternating LDG pair: the scalar trace is taken from the
//! side selected by a fixed global upwinding vector, the flux trace from the
//! opposite side plus a jump penalty scaled by the face length.

use crate::basis::ReferenceElement;
use crate::dense::DMat;
use crate::error::Error;
use crate::field::{ScalarField, VectorField};
use crate::mesh::{BoundaryTag, FaceKind, Mesh};
use crate::sparse::{factorize, BlockAssembler, BlockMat, Factorization};

/// Penalty coefficient of the LDG flux pair.
pub const XI: f64 = 1.0;

/// Boundary treatment of the scalar sub-problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaceBc {
    Interior,
    /// Zero exterior jump for w, zero normal diffusive flux.
    Wall,
    /// Copy traces (transmissive).
    Open,
}

fn face_bc(kind: FaceKind) -> FaceBc {
    match kind {
        FaceKind::Interior | FaceKind::Periodic => FaceBc::Interior,
        FaceKind::Boundary(BoundaryTag::Generation) | FaceKind::Boundary(BoundaryTag::Absorption) => {
            FaceBc::Open
        }
        FaceKind::Boundary(_) => FaceBc::Wall,
        FaceKind::PeriodicSecondary => unreachable!("secondary periodic faces carry no flux"),
    }
}

/// Upwind side of a face for the fixed global vector (1,1)/sqrt(2): returns
/// +1 when the scalar trace is taken from the exterior (right) side, -1 for
/// the interior (left) side. Deterministic tie-break for faces orthogonal to
/// the upwinding vector.
pub fn upwind_sign(normal: (f64, f64)) -> f64 {
    let beta_dot_n = (normal.0 + normal.1) / 2f64.sqrt();
    if beta_dot_n > 1e-12 {
        1.0
    } else if beta_dot_n < -1e-12 {
        -1.0
    } else if normal.0 > 1e-12 || (normal.0.abs() <= 1e-12 && normal.1 > 0.0) {
        1.0
    } else {
        -1.0
    }
}

/// Global weak differentiation matrices (inverse mass folded in).
pub struct DiffOps {
    pub dx: BlockMat,
    pub dy: BlockMat,
    pub dxx: BlockMat,
    pub dyy: BlockMat,
}

struct FaceGeom {
    left: usize,
    right: Option<usize>,
    phi_l: DMat,
    phi_r: DMat,
    normal: (f64, f64),
    /// physical quadrature weights (|F|/2 * gauss weight)
    wq: Vec<f64>,
    /// +1: scalar trace from right; -1: from left
    sign: f64,
    bc: FaceBc,
    length: f64,
}

fn face_geometry(mesh: &Mesh, re: &ReferenceElement) -> Vec<FaceGeom> {
    let ng = re.face_t.len();
    mesh.flux_faces
        .iter()
        .map(|&fi| {
            let f = &mesh.faces[fi];
            let phi_l = re.face_phi[f.left_local].clone();
            let (right, phi_r) = match f.kind {
                FaceKind::Interior | FaceKind::Periodic => {
                    let mut rev = DMat::zeros(ng, re.n_nodes);
                    let src = &re.face_phi[f.right_local];
                    for g in 0..ng {
                        for i in 0..re.n_nodes {
                            rev.set(g, i, src.get(ng - 1 - g, i));
                        }
                    }
                    (f.right, rev)
                }
                _ => (None, phi_l.clone()),
            };
            FaceGeom {
                left: f.left,
                right,
                phi_l,
                phi_r,
                normal: f.normal,
                wq: re.face_w.iter().map(|w| w * f.length / 2.0).collect(),
                sign: upwind_sign(f.normal),
                bc: face_bc(f.kind),
                length: f.length,
            }
        })
        .collect()
}

/// Accumulate  rows(test in `row_elem` with trace `phi_row`) x cols(trace
/// `phi_col` in `col_elem`) with per-gauss-point coefficients.
fn add_face_block(
    asm: &mut BlockAssembler,
    row_elem: usize,
    col_elem: usize,
    phi_row: &DMat,
    phi_col: &DMat,
    coef: &[f64],
    n: usize,
) {
    let ng = coef.len();
    let mut blk = vec![0.0; n * n];
    for g in 0..ng {
        let c = coef[g];
        if c == 0.0 {
            continue;
        }
        for j in 0..n {
            let pj = phi_row.get(g, j) * c;
            if pj == 0.0 {
                continue;
            }
            let row = &mut blk[j * n..(j + 1) * n];
            for i in 0..n {
                row[i] += pj * phi_col.get(g, i);
            }
        }
    }
    asm.push(row_elem, col_elem, &blk);
}

/// First-derivative operator in direction `dir` (0=x, 1=y) WITHOUT the
/// inverse mass: (C w)_j = -int w d_dir phi_j + sum_F int what phi_j n_dir.
/// `flip` selects the opposite trace side (used by the second application).
fn assemble_first_deriv(
    mesh: &Mesh,
    re: &ReferenceElement,
    faces: &[FaceGeom],
    dir: usize,
    flip: bool,
) -> BlockMat {
    let n = re.n_nodes;
    let ne = mesh.n_elems();
    let mut asm = BlockAssembler::new(ne, n);
    // volume: -detJ (rx Sr^T + sx Ss^T)
    for e in 0..ne {
        let ([xr, xs, yr, ys], det) = mesh.jacobian(e);
        let (gx, gy) = (
            [ys / det, -yr / det],  // d/dx = gx[0] d/dr + gx[1] d/ds
            [-xs / det, xr / det],
        );
        let g = if dir == 0 { gx } else { gy };
        let mut blk = DMat::zeros(n, n);
        blk.add_scaled(&re.stiff_r.transpose(), -det * g[0]);
        blk.add_scaled(&re.stiff_s.transpose(), -det * g[1]);
        asm.push_dmat(e, e, &blk);
    }
    // faces
    let ng = re.face_t.len();
    let mut coef = vec![0.0; ng];
    for fg in faces {
        let nc = if dir == 0 { fg.normal.0 } else { fg.normal.1 };
        let sign = if flip { -fg.sign } else { fg.sign };
        match fg.bc {
            FaceBc::Interior => {
                let right = fg.right.unwrap();
                let (use_right, phi_src, src) = if sign > 0.0 {
                    (true, &fg.phi_r, right)
                } else {
                    (false, &fg.phi_l, fg.left)
                };
                let _ = use_right;
                for g in 0..ng {
                    coef[g] = fg.wq[g] * nc;
                }
                add_face_block(&mut asm, fg.left, src, &fg.phi_l, phi_src, &coef, n);
                for g in 0..ng {
                    coef[g] = -fg.wq[g] * nc;
                }
                add_face_block(&mut asm, right, src, &fg.phi_r, phi_src, &coef, n);
            }
            FaceBc::Wall | FaceBc::Open => {
                // copy trace for the scalar flux
                for g in 0..ng {
                    coef[g] = fg.wq[g] * nc;
                }
                add_face_block(&mut asm, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
            }
        }
    }
    asm.finalize()
}

/// Jump penalty operator for the second derivative in direction `dir`:
/// sum_F int (XI/|F|) [w] n_dir^2 phi_j.
fn assemble_penalty(mesh: &Mesh, re: &ReferenceElement, faces: &[FaceGeom], dir: usize) -> BlockMat {
    let n = re.n_nodes;
    let mut asm = BlockAssembler::new(mesh.n_elems(), n);
    let ng = re.face_t.len();
    let mut coef = vec![0.0; ng];
    for fg in faces {
        if fg.bc != FaceBc::Interior {
            continue; // zero exterior jump at walls and open boundaries
        }
        let right = fg.right.unwrap();
        let nc = if dir == 0 { fg.normal.0 } else { fg.normal.1 };
        let pen = XI / fg.length * nc * nc;
        // [w] = w_right - w_left (canonical orientation)
        for g in 0..ng {
            coef[g] = fg.wq[g] * pen;
        }
        add_face_block(&mut asm, fg.left, right, &fg.phi_l, &fg.phi_r, &coef, n);
        for g in 0..ng {
            coef[g] = -fg.wq[g] * pen;
        }
        add_face_block(&mut asm, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
        add_face_block(&mut asm, right, right, &fg.phi_r, &fg.phi_r, &coef, n);
        for g in 0..ng {
            coef[g] = fg.wq[g] * pen;
        }
        add_face_block(&mut asm, right, fg.left, &fg.phi_r, &fg.phi_l, &coef, n);
    }
    asm.finalize()
}

fn inv_mass_mats(mesh: &Mesh, re: &ReferenceElement) -> Vec<DMat> {
    (0..mesh.n_elems())
        .map(|e| {
            let (_, det) = mesh.jacobian(e);
            let mut m = re.mass_inv.clone();
            m.scale(1.0 / det);
            m
        })
        .collect()
}

/// Assemble the four global differentiation matrices.
pub fn assemble_diff_matrices(mesh: &Mesh, re: &ReferenceElement) -> DiffOps {
    let faces = face_geometry(mesh, re);
    let minv = inv_mass_mats(mesh, re);
    let mut dx = assemble_first_deriv(mesh, re, &faces, 0, false);
    dx.scale_block_rows(&minv);
    let mut dy = assemble_first_deriv(mesh, re, &faces, 1, false);
    dy.scale_block_rows(&minv);

    let c2x = assemble_first_deriv(mesh, re, &faces, 0, true);
    let c2y = assemble_first_deriv(mesh, re, &faces, 1, true);
    let pen_x = assemble_penalty(mesh, re, &faces, 0);
    let pen_y = assemble_penalty(mesh, re, &faces, 1);
    let mut dxx = c2x.matmul(&dx).add_scaled(&pen_x, 1.0);
    dxx.scale_block_rows(&minv);
    let mut dyy = c2y.matmul(&dy).add_scaled(&pen_y, 1.0);
    dyy.scale_block_rows(&minv);
    DiffOps { dx, dy, dxx, dyy }
}

impl DiffOps {
    /// Apply one matrix to a set of fields in a single sweep.
    pub fn apply_batch(mat: &BlockMat, inputs: &[&ScalarField]) -> Vec<ScalarField> {
        let xs: Vec<&[f64]> = inputs.iter().map(|f| f.data.as_slice()).collect();
        let mut outs: Vec<ScalarField> = inputs
            .iter()
            .map(|f| ScalarField::zeros(f.n_elems, f.n_nodes))
            .collect();
        {
            let mut ys: Vec<&mut [f64]> = outs.iter_mut().map(|f| f.data.as_mut_slice()).collect();
            mat.apply_batch(&xs, &mut ys);
        }
        outs
    }

    pub fn apply(mat: &BlockMat, input: &ScalarField) -> ScalarField {
        let mut out = ScalarField::zeros(input.n_elems, input.n_nodes);
        mat.apply(&input.data, &mut out.data);
        out
    }
}

/// Assembled discretization of 1 + alpha*T[h_b] with its factorization.
pub struct EllipticSystem {
    pub alpha: f64,
    pub matrix: BlockMat,
    pub factors: Factorization,
    mass: Vec<DMat>, // per-element mass (detJ * Mhat) for right-hand sides
    pub assembly_seconds: f64,
    pub factorize_seconds: f64,
}

/// Assemble the operator from the projected fields H = h_b^2 and grad H.
/// The diffusive flux p = grad w is eliminated through the first-derivative
/// operators (which share the LDG flux orientation).
pub fn assemble_elliptic_operator(
    h_sq: &ScalarField,
    grad_h_sq: &VectorField,
    alpha: f64,
    mesh: &Mesh,
    re: &ReferenceElement,
    diff: &DiffOps,
) -> Result<EllipticSystem, Error> {
    let t0 = std::time::Instant::now();
    let n = re.n_nodes;
    let ne = mesh.n_elems();
    let ncub = re.cub_pts.len();
    let ng = re.face_t.len();
    let faces = face_geometry(mesh, re);

    // mass matrix blocks
    let mut mass_asm = BlockAssembler::new(ne, n);
    let mut mass = Vec::with_capacity(ne);
    for e in 0..ne {
        let (_, det) = mesh.jacobian(e);
        let mut m = re.mass.clone();
        m.scale(det);
        mass_asm.push_dmat(e, e, &m);
        mass.push(m);
    }
    let m_global = mass_asm.finalize();

    // volume operators with variable coefficients, acting on p (per
    // direction) and on w (advective part)
    let mut vh_x = BlockAssembler::new(ne, n);
    let mut vh_y = BlockAssembler::new(ne, n);
    let mut adv_vol = BlockAssembler::new(ne, n);
    for e in 0..ne {
        let ([xr, xs, yr, ys], det) = mesh.jacobian(e);
        let gx = [ys / det, -yr / det];
        let gy = [-xs / det, xr / det];
        let h_c = re.phi_cub.matvec(h_sq.elem(e));
        let hx_c = re.phi_cub.matvec(grad_h_sq.x.elem(e));
        let hy_c = re.phi_cub.matvec(grad_h_sq.y.elem(e));
        let mut bx = vec![0.0; n * n];
        let mut by = vec![0.0; n * n];
        let mut badv = vec![0.0; n * n];
        for c in 0..ncub {
            let w = re.cub_w[c] * det;
            for j in 0..n {
                let dxj = gx[0] * re.dphi_r_cub.get(c, j) + gx[1] * re.dphi_s_cub.get(c, j);
                let dyj = gy[0] * re.dphi_r_cub.get(c, j) + gy[1] * re.dphi_s_cub.get(c, j);
                let wh = w * h_c[c];
                let wadv = w * (hx_c[c] * dxj + hy_c[c] * dyj);
                for i in 0..n {
                    let phi = re.phi_cub.get(c, i);
                    bx[j * n + i] += wh * dxj * phi;
                    by[j * n + i] += wh * dyj * phi;
                    badv[j * n + i] += wadv * phi;
                }
            }
        }
        vh_x.push(e, e, &bx);
        vh_y.push(e, e, &by);
        adv_vol.push(e, e, &badv);
    }

    // face operators
    let mut fh_x = BlockAssembler::new(ne, n); // H^- (p.n) from flipped side, x part
    let mut fh_y = BlockAssembler::new(ne, n);
    let mut pen_w = BlockAssembler::new(ne, n); // H^- (XI/|F|) [w]
    let mut adv_face = BlockAssembler::new(ne, n); // what (gradH~.n) with upwind side
    let mut coef = vec![0.0; ng];
    for fg in &faces {
        let h_l = fg.phi_l.matvec(h_sq.elem(fg.left));
        let ghl_x = fg.phi_l.matvec(grad_h_sq.x.elem(fg.left));
        let ghl_y = fg.phi_l.matvec(grad_h_sq.y.elem(fg.left));
        match fg.bc {
            FaceBc::Interior => {
                let right = fg.right.unwrap();
                let h_r = fg.phi_r.matvec(h_sq.elem(right));
                let ghr_x = fg.phi_r.matvec(grad_h_sq.x.elem(right));
                let ghr_y = fg.phi_r.matvec(grad_h_sq.y.elem(right));
                // diffusive flux: p from the side OPPOSITE the scalar side
                let (p_src, phi_p): (usize, &DMat) = if fg.sign > 0.0 {
                    (fg.left, &fg.phi_l)
                } else {
                    (right, &fg.phi_r)
                };
                // scalar side (for the advective flux)
                let (w_src, phi_w): (usize, &DMat) = if fg.sign > 0.0 {
                    (right, &fg.phi_r)
                } else {
                    (fg.left, &fg.phi_l)
                };
                for dir in 0..2 {
                    let nc = if dir == 0 { fg.normal.0 } else { fg.normal.1 };
                    let asm = if dir == 0 { &mut fh_x } else { &mut fh_y };
                    // rows in left: + w H_l (p.n)
                    for g in 0..ng {
                        coef[g] = fg.wq[g] * h_l[g] * nc;
                    }
                    add_face_block(asm, fg.left, p_src, &fg.phi_l, phi_p, &coef, n);
                    // rows in right: - w H_r (p.n)
                    for g in 0..ng {
                        coef[g] = -fg.wq[g] * h_r[g] * nc;
                    }
                    add_face_block(asm, right, p_src, &fg.phi_r, phi_p, &coef, n);
                }
                // penalty part of the diffusive flux: (XI/|F|) [w]
                let pen = XI / fg.length;
                for g in 0..ng {
                    coef[g] = fg.wq[g] * h_l[g] * pen;
                }
                add_face_block(&mut pen_w, fg.left, right, &fg.phi_l, &fg.phi_r, &coef, n);
                for g in 0..ng {
                    coef[g] = -fg.wq[g] * h_l[g] * pen;
                }
                add_face_block(&mut pen_w, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
                for g in 0..ng {
                    coef[g] = fg.wq[g] * h_r[g] * pen;
                }
                add_face_block(&mut pen_w, right, fg.left, &fg.phi_r, &fg.phi_l, &coef, n);
                for g in 0..ng {
                    coef[g] = -fg.wq[g] * h_r[g] * pen;
                }
                add_face_block(&mut pen_w, right, right, &fg.phi_r, &fg.phi_r, &coef, n);
                // advective face: what (gradH.n) phi_j, test-side gradH trace
                for g in 0..ng {
                    coef[g] = fg.wq[g] * (ghl_x[g] * fg.normal.0 + ghl_y[g] * fg.normal.1);
                }
                add_face_block(&mut adv_face, fg.left, w_src, &fg.phi_l, phi_w, &coef, n);
                for g in 0..ng {
                    coef[g] = -fg.wq[g] * (ghr_x[g] * fg.normal.0 + ghr_y[g] * fg.normal.1);
                }
                add_face_block(&mut adv_face, right, w_src, &fg.phi_r, phi_w, &coef, n);
            }
            FaceBc::Wall => {
                // p.n = 0 and [w] = 0: only the advective copy-trace term
                for g in 0..ng {
                    coef[g] = fg.wq[g] * (ghl_x[g] * fg.normal.0 + ghl_y[g] * fg.normal.1);
                }
                add_face_block(&mut adv_face, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
            }
            FaceBc::Open => {
                // copy traces: p.n from interior, w from interior
                for dir in 0..2 {
                    let nc = if dir == 0 { fg.normal.0 } else { fg.normal.1 };
                    let asm = if dir == 0 { &mut fh_x } else { &mut fh_y };
                    for g in 0..ng {
                        coef[g] = fg.wq[g] * h_l[g] * nc;
                    }
                    add_face_block(asm, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
                }
                for g in 0..ng {
                    coef[g] = fg.wq[g] * (ghl_x[g] * fg.normal.0 + ghl_y[g] * fg.normal.1);
                }
                add_face_block(&mut adv_face, fg.left, fg.left, &fg.phi_l, &fg.phi_l, &coef, n);
            }
        }
    }

    // compose: A = M + (alpha/3)[(VHx - FHx) Dx + (VHy - FHy) Dy - PenW]
    //              - (alpha/6)[AdvVol - AdvFace]
    let cx = vh_x.finalize().add_scaled(&fh_x.finalize(), -1.0);
    let cy = vh_y.finalize().add_scaled(&fh_y.finalize(), -1.0);
    let pen = pen_w.finalize();
    let adv = adv_vol.finalize().add_scaled(&adv_face.finalize(), -1.0);

    let a3 = alpha / 3.0;
    let a6 = alpha / 6.0;
    let a_mat = m_global
        .add_scaled(&cx.matmul(&diff.dx), a3)
        .add_scaled(&cy.matmul(&diff.dy), a3)
        .add_scaled(&pen, -a3)
        .add_scaled(&adv, -a6);
    let assembly_seconds = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let factors = factorize(&a_mat)?;
    let factorize_seconds = t1.elapsed().as_secs_f64();

    Ok(EllipticSystem {
        alpha,
        matrix: a_mat,
        factors,
        mass,
        assembly_seconds,
        factorize_seconds,
    })
}

impl EllipticSystem {
    /// Solve (1 + alpha*T) w = f for a nodal source field f: the right-hand
    /// side is the element mass applied to f, then the stored factorization.
    pub fn solve(&self, f: &ScalarField) -> Result<ScalarField, Error> {
        let expected = self.factors.n_blocks * self.factors.b;
        if f.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: f.len(),
            });
        }
        let mut rhs = ScalarField::zeros(f.n_elems, f.n_nodes);
        for e in 0..f.n_elems {
            let r = self.mass[e].matvec(f.elem(e));
            rhs.elem_mut(e).copy_from_slice(&r);
        }
        let x = self.factors.solve(&rhs.data)?;
        Ok(ScalarField {
            data: x,
            n_elems: f.n_elems,
            n_nodes: f.n_nodes,
        })
    }

    /// Solve for two source fields in one sweep over the factors.
    pub fn solve_pair(
        &self,
        fx: &ScalarField,
        fy: &ScalarField,
    ) -> Result<(ScalarField, ScalarField), Error> {
        let mut rx = ScalarField::zeros(fx.n_elems, fx.n_nodes);
        let mut ry = ScalarField::zeros(fy.n_elems, fy.n_nodes);
        for e in 0..fx.n_elems {
            let r = self.mass[e].matvec(fx.elem(e));
            rx.elem_mut(e).copy_from_slice(&r);
            let r = self.mass[e].matvec(fy.elem(e));
            ry.elem_mut(e).copy_from_slice(&r);
        }
        self.factors
            .solve_in_place_many(&mut [&mut rx.data, &mut ry.data]);
        Ok((rx, ry))
    }
}
