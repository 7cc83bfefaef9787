//! Reference-element machinery: order-k nodal basis on the triangle built on
//! an orthonormal modal backbone (collapsed-coordinate Jacobi construction),
//! interior cubature, face trace maps, and the positivity quadrature node set.
//!
//! The reference triangle is {(r,s): r >= -1, s >= -1, r + s <= 0} with
//! vertices v0 = (-1,-1), v1 = (1,-1), v2 = (-1,1) and area 2.

use crate::dense::DMat;
use crate::error::Error;
use crate::quad::{gauss_legendre, gauss_lobatto, tri_cubature};

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, i| a * i as f64)
}

/// Orthonormal Jacobi polynomial P_n^(alpha,beta) on [-1,1] for integer
/// alpha, beta (normalized wrt the weight (1-x)^alpha (1+x)^beta).
pub fn jacobi_p(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    let (af, bf) = (alpha as f64, beta as f64);
    let gamma0 = 2f64.powf(af + bf + 1.0) / (af + bf + 1.0) * factorial(alpha) * factorial(beta)
        / factorial(alpha + beta);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (af + 1.0) * (bf + 1.0) / (af + bf + 3.0) * gamma0;
    let p1 = ((af + bf + 2.0) * x / 2.0 + (af - bf) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut aold = 2.0 / (2.0 + af + bf) * ((af + 1.0) * (bf + 1.0) / (af + bf + 3.0)).sqrt();
    let (mut pm1, mut p) = (p0, p1);
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + af + bf;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + af + bf) * (i + 1.0 + af) * (i + 1.0 + bf)
                / ((h1 + 1.0) * (h1 + 3.0)))
                .sqrt();
        let bnew = -(af * af - bf * bf) / (h1 * (h1 + 2.0));
        let pnew = ((x - bnew) * p - aold * pm1) / anew;
        pm1 = p;
        p = pnew;
        aold = anew;
    }
    p
}

/// Derivative of the orthonormal Jacobi polynomial.
pub fn grad_jacobi_p(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + alpha as f64 + beta as f64 + 1.0)).sqrt()
            * jacobi_p(x, alpha + 1, beta + 1, n - 1)
    }
}

/// Collapsed coordinates (a,b) from reference coordinates (r,s).
fn rs_to_ab(r: f64, s: f64) -> (f64, f64) {
    let a = if (1.0 - s).abs() > 1e-12 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    (a, s)
}

/// Orthonormal modal basis function (m,n) at reference point (r,s).
pub fn simplex_2d_p(r: f64, s: f64, m: usize, n: usize) -> f64 {
    let (a, b) = rs_to_ab(r, s);
    2f64.sqrt()
        * jacobi_p(a, 0, 0, m)
        * jacobi_p(b, 2 * m + 1, 0, n)
        * (1.0 - b).powi(m as i32)
}

/// Gradient of the modal basis function (m,n) wrt (r,s).
pub fn grad_simplex_2d_p(r: f64, s: f64, m: usize, n: usize) -> (f64, f64) {
    let (a, b) = rs_to_ab(r, s);
    let fa = jacobi_p(a, 0, 0, m);
    let dfa = grad_jacobi_p(a, 0, 0, m);
    let gb = jacobi_p(b, 2 * m + 1, 0, n);
    let dgb = grad_jacobi_p(b, 2 * m + 1, 0, n);
    let half1mb = 0.5 * (1.0 - b);

    let mut dmodedr = dfa * gb;
    if m > 0 {
        dmodedr *= half1mb.powi(m as i32 - 1);
    }
    let mut dmodeds = dfa * (gb * 0.5 * (1.0 + a));
    if m > 0 {
        dmodeds *= half1mb.powi(m as i32 - 1);
    }
    let mut tmp = dgb * half1mb.powi(m as i32);
    if m > 0 {
        tmp -= 0.5 * m as f64 * gb * half1mb.powi(m as i32 - 1);
    }
    dmodeds += fa * tmp;
    let scale = 2f64.powf(m as f64 + 0.5);
    (dmodedr * scale, dmodeds * scale)
}

/// Modal index pairs (m,n) with m+n <= k, in the fixed ordering used by the
/// Vandermonde matrix.
fn modal_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for m in 0..=k {
        for n in 0..=(k - m) {
            pairs.push((m, n));
        }
    }
    pairs
}

/// One-dimensional interpolation warp from equidistant to Gauss-Lobatto
/// spacing, evaluated at arbitrary coordinates.
fn warp_factor(k: usize, rout: &[f64]) -> Vec<f64> {
    let np = k + 1;
    let (lgl, _) = gauss_lobatto(np.max(2));
    let req: Vec<f64> = (0..np)
        .map(|i| -1.0 + 2.0 * i as f64 / k as f64)
        .collect();
    // 1D Vandermonde at equidistant nodes
    let mut veq = DMat::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            veq.set(i, j, jacobi_p(req[i], 0, 0, j));
        }
    }
    let veq_t_inv = veq.transpose().inverse().expect("equidistant Vandermonde");
    let mut out = Vec::with_capacity(rout.len());
    for &r in rout {
        let pvec: Vec<f64> = (0..np).map(|j| jacobi_p(r, 0, 0, j)).collect();
        let lag = veq_t_inv.matvec(&pvec);
        let mut warp = 0.0;
        for i in 0..np {
            warp += lag[i] * (lgl[i] - req[i]);
        }
        if r.abs() < 1.0 - 1e-10 {
            warp /= 1.0 - r * r;
        } else {
            warp = 0.0;
        }
        out.push(warp);
    }
    out
}

/// Warp-and-blend interpolation nodes on the reference triangle for order k.
/// Edge traces coincide with (k+1)-point Gauss-Lobatto distributions.
/// Also returns the (row, col) lattice index of each node for plotting.
pub fn warp_blend_nodes(k: usize) -> (Vec<(f64, f64)>, Vec<(usize, usize)>) {
    const ALP_OPT: [f64; 4] = [0.0, 1.4152, 0.1001, 0.2751];
    let alpha = ALP_OPT[k - 1];
    let np = (k + 1) * (k + 2) / 2;
    let mut l1 = Vec::with_capacity(np);
    let mut l2 = Vec::with_capacity(np);
    let mut l3 = Vec::with_capacity(np);
    let mut lattice = Vec::with_capacity(np);
    for n in 1..=(k + 1) {
        for m in 1..=(k + 2 - n) {
            let a = (n - 1) as f64 / k as f64;
            let c = (m - 1) as f64 / k as f64;
            l1.push(a);
            l3.push(c);
            l2.push(1.0 - a - c);
            lattice.push((n - 1, m - 1));
        }
    }
    let mut x: Vec<f64> = (0..np).map(|i| -l2[i] + l3[i]).collect();
    let mut y: Vec<f64> = (0..np)
        .map(|i| (-l2[i] - l3[i] + 2.0 * l1[i]) / 3f64.sqrt())
        .collect();

    let d1: Vec<f64> = (0..np).map(|i| l3[i] - l2[i]).collect();
    let d2: Vec<f64> = (0..np).map(|i| l1[i] - l3[i]).collect();
    let d3: Vec<f64> = (0..np).map(|i| l2[i] - l1[i]).collect();
    let w1 = warp_factor(k, &d1);
    let w2 = warp_factor(k, &d2);
    let w3 = warp_factor(k, &d3);
    for i in 0..np {
        let blend1 = 4.0 * l2[i] * l3[i] * (1.0 + (alpha * l1[i]).powi(2)) * w1[i];
        let blend2 = 4.0 * l1[i] * l3[i] * (1.0 + (alpha * l2[i]).powi(2)) * w2[i];
        let blend3 = 4.0 * l1[i] * l2[i] * (1.0 + (alpha * l3[i]).powi(2)) * w3[i];
        let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
        let (c4, s4) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
        x[i] += blend1 + c2 * blend2 + c4 * blend3;
        y[i] += s2 * blend2 + s4 * blend3;
    }
    // equilateral -> reference coordinates
    let mut nodes = Vec::with_capacity(np);
    for i in 0..np {
        let lam1 = (3f64.sqrt() * y[i] + 1.0) / 3.0;
        let lam2 = (-3.0 * x[i] - 3f64.sqrt() * y[i] + 2.0) / 6.0;
        let lam3 = (3.0 * x[i] - 3f64.sqrt() * y[i] + 2.0) / 6.0;
        nodes.push((-lam2 + lam3 - lam1, -lam2 - lam3 + lam1));
    }
    (nodes, lattice)
}

/// Positivity quadrature node set on the reference triangle: the mapped
/// tensor product of the beta-point Gauss-Lobatto rule with the (k+1)-point
/// Gauss rule, averaged over the three vertex collapses. Zero-weight points
/// (the vertices) are dropped. Weights sum to the reference area and the
/// rule is exact for polynomials of total degree k.
pub fn zhang_shu_nodes(k: usize) -> (Vec<(f64, f64)>, Vec<f64>) {
    let beta = gl_point_count(k);
    let (glx, glw) = gauss_lobatto(beta);
    let (gx, gw) = gauss_legendre(k + 1);
    // rescale to [0,1], weights sum to 1
    let u: Vec<f64> = glx.iter().map(|x| 0.5 * (1.0 + x)).collect();
    let wu: Vec<f64> = glw.iter().map(|w| 0.5 * w).collect();
    let v: Vec<f64> = gx.iter().map(|x| 0.5 * (1.0 + x)).collect();
    let wv: Vec<f64> = gw.iter().map(|w| 0.5 * w).collect();

    let verts = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut wts: Vec<f64> = Vec::new();
    let mut on_face: Vec<bool> = Vec::new();
    for l in 0..3 {
        let va = verts[l];
        let vb = verts[(l + 1) % 3];
        let vc = verts[(l + 2) % 3];
        for (iu, &uu) in u.iter().enumerate() {
            for (iv, &vv) in v.iter().enumerate() {
                let w = wu[iu] * wv[iv] * 4.0 * (1.0 - uu) / 3.0;
                let px = uu * va.0 + (1.0 - uu) * (vv * vb.0 + (1.0 - vv) * vc.0);
                let py = uu * va.1 + (1.0 - uu) * (vv * vb.1 + (1.0 - vv) * vc.1);
                // merge coincident points (the three vertices repeat)
                if let Some(idx) = pts
                    .iter()
                    .position(|&(qx, qy)| (qx - px).abs() < 1e-12 && (qy - py).abs() < 1e-12)
                {
                    wts[idx] += w;
                } else {
                    pts.push((px, py));
                    wts.push(w);
                    on_face.push(uu < 1e-14);
                }
            }
        }
    }

    // The averaged tensor rule carries the face Gauss points with the
    // (2/3) * first-Lobatto-weight coefficients required by the positivity
    // argument, but for odd k the Lobatto direction sees degree k+1 and the
    // rule is one degree short. Redistribute the non-face weights by a
    // least-norm moment correction so the rule is exact for total degree k,
    // keeping face weights untouched.
    let n_mono = (k + 1) * (k + 2) / 2;
    let mut residual = Vec::with_capacity(n_mono);
    let mut exact = true;
    let mut mono_list = Vec::with_capacity(n_mono);
    for a in 0..=k {
        for b in 0..=(k - a) {
            mono_list.push((a as i32, b as i32));
            let num: f64 = pts
                .iter()
                .zip(&wts)
                .map(|(&(r, s), &w)| w * r.powi(a as i32) * s.powi(b as i32))
                .sum();
            let r = crate::quad::ref_tri_monomial_integral(a as u32, b as u32) - num;
            if r.abs() > 1e-13 {
                exact = false;
            }
            residual.push(r);
        }
    }
    if !exact {
        let interior: Vec<usize> = (0..pts.len()).filter(|&i| !on_face[i]).collect();
        let mut a_mat = DMat::zeros(n_mono, interior.len());
        for (row, &(p, q)) in mono_list.iter().enumerate() {
            for (col, &ip) in interior.iter().enumerate() {
                let (r, s) = pts[ip];
                a_mat.set(row, col, r.powi(p) * s.powi(q));
            }
        }
        // least-norm correction dw = A^T (A A^T)^{-1} residual
        let aat = a_mat.matmul(&a_mat.transpose());
        let aat_inv = aat.inverse().expect("moment system");
        let y = aat_inv.matvec(&residual);
        let dw = a_mat.transpose().matvec(&y);
        for (col, &ip) in interior.iter().enumerate() {
            wts[ip] += dw[col];
        }
    }

    // drop merged zero-weight points (the vertices for even k)
    let mut out_pts = Vec::new();
    let mut out_wts = Vec::new();
    for (i, &w) in wts.iter().enumerate() {
        if w > 1e-14 {
            out_pts.push(pts[i]);
            out_wts.push(w);
        } else {
            assert!(
                w.abs() < 1e-13,
                "zhang-shu correction produced a negative weight {w}"
            );
        }
    }
    (out_pts, out_wts)
}

/// Smallest beta with 2*beta - 3 >= k.
pub fn gl_point_count(k: usize) -> usize {
    let mut beta = 2;
    while 2 * beta < k + 3 {
        beta += 1;
    }
    beta
}

/// Reference-element data for a given polynomial order.
pub struct ReferenceElement {
    pub k: usize,
    pub n_nodes: usize,
    pub nodes: Vec<(f64, f64)>,
    pub node_lattice: Vec<(usize, usize)>,
    pub vander: DMat,
    pub vander_inv: DMat,
    /// Reference mass matrix.
    pub mass: DMat,
    pub mass_inv: DMat,
    /// Nodal differentiation matrices: (d_r w)(node_i) = sum_j Dr[i][j] w_j.
    pub dr: DMat,
    pub ds: DMat,
    /// Reference stiffness: S_r[i][j] = int phi_i d_r phi_j.
    pub stiff_r: DMat,
    pub stiff_s: DMat,
    /// Interior cubature exact for degree 2k+1.
    pub cub_pts: Vec<(f64, f64)>,
    pub cub_w: Vec<f64>,
    /// Basis values / reference derivatives at cubature points (n_cub x N).
    pub phi_cub: DMat,
    pub dphi_r_cub: DMat,
    pub dphi_s_cub: DMat,
    /// L2 projection matrix: coeffs = proj * f(cub points)  (N x n_cub).
    pub proj: DMat,
    /// (k+1)-point Gauss rule on [-1,1] for face integrals.
    pub face_t: Vec<f64>,
    pub face_w: Vec<f64>,
    /// Per local face: trace matrix (k+1) x N evaluating at face Gauss points.
    pub face_phi: [DMat; 3],
    /// Positivity node set and weights; basis values there (n_zs x N).
    pub zs_pts: Vec<(f64, f64)>,
    pub zs_w: Vec<f64>,
    pub phi_zs: DMat,
    /// First normalized Gauss-Lobatto weight of the beta-point rule.
    pub omega1_gl: f64,
    pub beta_gl: usize,
    /// Cell mean of a field: mean = dot(mean_w, coeffs).
    pub mean_w: Vec<f64>,
}

impl ReferenceElement {
    /// Evaluate all nodal basis functions at arbitrary reference points:
    /// returns a (npts x N) matrix.
    pub fn phi_at(&self, pts: &[(f64, f64)]) -> DMat {
        let pairs = modal_pairs(self.k);
        let n = self.n_nodes;
        let mut psi = DMat::zeros(pts.len(), n);
        for (ip, &(r, s)) in pts.iter().enumerate() {
            for (jm, &(m, nn)) in pairs.iter().enumerate() {
                psi.set(ip, jm, simplex_2d_p(r, s, m, nn));
            }
        }
        psi.matmul(&self.vander_inv)
    }

    /// Reference-derivative matrices at arbitrary points: (d/dr, d/ds).
    pub fn dphi_at(&self, pts: &[(f64, f64)]) -> (DMat, DMat) {
        let pairs = modal_pairs(self.k);
        let n = self.n_nodes;
        let mut psir = DMat::zeros(pts.len(), n);
        let mut psis = DMat::zeros(pts.len(), n);
        for (ip, &(r, s)) in pts.iter().enumerate() {
            for (jm, &(m, nn)) in pairs.iter().enumerate() {
                let (gr, gs) = grad_simplex_2d_p(r, s, m, nn);
                psir.set(ip, jm, gr);
                psis.set(ip, jm, gs);
            }
        }
        (psir.matmul(&self.vander_inv), psis.matmul(&self.vander_inv))
    }

    /// Local face Gauss points in reference coordinates.
    pub fn face_points(&self, face: usize) -> Vec<(f64, f64)> {
        self.face_t
            .iter()
            .map(|&t| match face {
                0 => (t, -1.0),
                1 => (-t, t),
                2 => (-1.0, -t),
                _ => panic!("face index out of range"),
            })
            .collect()
    }
}

/// Element-wise L2 projection of a pointwise function onto the broken
/// polynomial space, using the interior cubature.
pub fn project_function(
    f: &dyn Fn(f64, f64) -> f64,
    mesh: &crate::mesh::Mesh,
    re: &ReferenceElement,
) -> crate::field::ScalarField {
    let mut out = crate::field::ScalarField::zeros(mesh.n_elems(), re.n_nodes);
    let ncub = re.cub_pts.len();
    let mut vals = vec![0.0; ncub];
    for e in 0..mesh.n_elems() {
        for (c, &p) in re.cub_pts.iter().enumerate() {
            let (x, y) = mesh.map_ref_to_phys(e, p);
            vals[c] = f(x, y);
        }
        let coeffs = re.proj.matvec(&vals);
        out.elem_mut(e).copy_from_slice(&coeffs);
    }
    out
}

/// Evaluate a field inside one element at reference points.
pub fn evaluate_field(
    field: &crate::field::ScalarField,
    re: &ReferenceElement,
    elem: usize,
    points: &[(f64, f64)],
) -> Result<Vec<f64>, Error> {
    if elem >= field.n_elems {
        return Err(Error::IndexOutOfRange(format!(
            "element {elem} out of range ({} elements)",
            field.n_elems
        )));
    }
    Ok(re.phi_at(points).matvec(field.elem(elem)))
}

/// Build the reference element of order k (1 <= k <= 4).
pub fn reference_element(k: usize) -> Result<ReferenceElement, Error> {
    if !(1..=4).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let n = (k + 1) * (k + 2) / 2;
    let (nodes, lattice) = warp_blend_nodes(k);
    let pairs = modal_pairs(k);
    assert_eq!(pairs.len(), n);

    let mut vander = DMat::zeros(n, n);
    let mut vr = DMat::zeros(n, n);
    let mut vs = DMat::zeros(n, n);
    for (i, &(r, s)) in nodes.iter().enumerate() {
        for (j, &(m, nn)) in pairs.iter().enumerate() {
            vander.set(i, j, simplex_2d_p(r, s, m, nn));
            let (gr, gs) = grad_simplex_2d_p(r, s, m, nn);
            vr.set(i, j, gr);
            vs.set(i, j, gs);
        }
    }
    let vander_inv = vander.inverse().ok_or(Error::SingularBasis(k))?;
    let vvt = vander.matmul(&vander.transpose());
    let mass = vvt.inverse().ok_or(Error::SingularBasis(k))?;
    let mass_inv = vvt;
    let dr = vr.matmul(&vander_inv);
    let ds = vs.matmul(&vander_inv);
    let stiff_r = mass.matmul(&dr);
    let stiff_s = mass.matmul(&ds);

    let cub = tri_cubature(2 * k + 1);
    let tmp = ReferenceElement {
        k,
        n_nodes: n,
        nodes: nodes.clone(),
        node_lattice: lattice,
        vander,
        vander_inv,
        mass,
        mass_inv,
        dr,
        ds,
        stiff_r,
        stiff_s,
        cub_pts: cub.points,
        cub_w: cub.weights,
        phi_cub: DMat::zeros(0, 0),
        dphi_r_cub: DMat::zeros(0, 0),
        dphi_s_cub: DMat::zeros(0, 0),
        proj: DMat::zeros(0, 0),
        face_t: Vec::new(),
        face_w: Vec::new(),
        face_phi: [DMat::zeros(0, 0), DMat::zeros(0, 0), DMat::zeros(0, 0)],
        zs_pts: Vec::new(),
        zs_w: Vec::new(),
        phi_zs: DMat::zeros(0, 0),
        omega1_gl: 0.0,
        beta_gl: 0,
        mean_w: Vec::new(),
    };

    let phi_cub = tmp.phi_at(&tmp.cub_pts);
    let (dphi_r_cub, dphi_s_cub) = tmp.dphi_at(&tmp.cub_pts);
    // proj = M^-1 Phi^T diag(w)
    let mut phit_w = phi_cub.transpose();
    for i in 0..phit_w.rows {
        for c in 0..phit_w.cols {
            let v = phit_w.get(i, c) * tmp.cub_w[c];
            phit_w.set(i, c, v);
        }
    }
    let proj = tmp.mass_inv.matmul(&phit_w);

    let (ft, fw) = gauss_legendre(k + 1);
    let mut re = ReferenceElement {
        face_t: ft,
        face_w: fw,
        phi_cub,
        dphi_r_cub,
        dphi_s_cub,
        proj,
        ..tmp
    };
    re.face_phi = [
        re.phi_at(&re.face_points(0)),
        re.phi_at(&re.face_points(1)),
        re.phi_at(&re.face_points(2)),
    ];

    let (zs_pts, zs_w) = zhang_shu_nodes(k);
    re.phi_zs = re.phi_at(&zs_pts);
    re.zs_pts = zs_pts;
    re.zs_w = zs_w;
    re.beta_gl = gl_point_count(k);
    let (_, glw) = gauss_lobatto(re.beta_gl);
    re.omega1_gl = glw[0] / 2.0;
    re.mean_w = (0..n)
        .map(|j| (0..n).map(|i| re.mass.get(i, j)).sum::<f64>() / 2.0)
        .collect();
    Ok(re)
}
