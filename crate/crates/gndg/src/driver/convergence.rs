//! Broken-L2 error norms and convergence-rate regression.

use crate::basis::ReferenceElement;
use crate::field::ScalarField;
use crate::mesh::Mesh;

/// Broken L2 norm of (w_h - reference) via the interior cubature.
pub fn broken_l2_error(
    field: &ScalarField,
    reference: &dyn Fn(f64, f64) -> f64,
    mesh: &Mesh,
    re: &ReferenceElement,
) -> f64 {
    let mut total = 0.0;
    for e in 0..mesh.n_elems() {
        let vals = re.phi_cub.matvec(field.elem(e));
        let (_, det) = mesh.jacobian(e);
        for (c, &w) in re.cub_w.iter().enumerate() {
            let (x, y) = mesh.map_ref_to_phys(e, re.cub_pts[c]);
            let d = vals[c] - reference(x, y);
            total += w * det * d * d;
        }
    }
    total.sqrt()
}

/// Least-squares slope of log(err) against log(dx). Flags (returns NaN for
/// the slope alongside `monotone = false`) when the error sequence is not
/// decreasing.
pub fn regression_slope(dx: &[f64], err: &[f64]) -> (f64, bool) {
    assert_eq!(dx.len(), err.len());
    let n = dx.len() as f64;
    let xs: Vec<f64> = dx.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..dx.len() {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    let monotone = err.windows(2).all(|w| w[1] < w[0]);
    (num / den, monotone)
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub k: usize,
    pub cells: usize,
    pub dx: f64,
    pub err_eta: f64,
    pub err_q: f64,
}

/// Run the Gaussian free-surface convergence study: nested regular meshes
/// against a finer higher-order reference run of the same scenario.
pub fn run_gaussian_study(
    base: &crate::driver::Scenario,
    levels: &[usize],
    ks: &[usize],
    ref_cells: usize,
    ref_k: usize,
) -> Result<Vec<StudyRow>, crate::error::Error> {
    use crate::driver::{run_scenario, MeshSource, Scenario, Setup};
    let (x0, x1, y0, y1) = match base.mesh {
        MeshSource::Regular { x0, x1, y0, y1, .. } => (x0, x1, y0, y1),
        _ => (-1.0, 1.0, -1.0, 1.0),
    };
    let build = |k: usize, cells: usize| -> Scenario {
        let mut sc = base.clone();
        sc.k = k;
        sc.mesh = MeshSource::Regular {
            nx: cells,
            ny: cells,
            x0,
            x1,
            y0,
            y1,
        };
        sc.output.dir = None;
        sc
    };
    // reference
    let ref_setup = Setup::build(build(ref_k, ref_cells))?;
    let ref_run = run_scenario(&ref_setup)?;
    let ref_eval = crate::driver::gauges::FieldEvaluator::new(
        &ref_setup.mesh,
        &ref_setup.re,
        &ref_run.final_state,
    );

    let mut rows = Vec::new();
    for &k in ks {
        for &cells in levels {
            let setup = Setup::build(build(k, cells))?;
            let run = run_scenario(&setup)?;
            let mut e2_eta = 0.0;
            let mut e2_q = 0.0;
            for e in 0..setup.mesh.n_elems() {
                let eta = setup.re.phi_cub.matvec(run.final_state.eta.elem(e));
                let qx = setup.re.phi_cub.matvec(run.final_state.qx.elem(e));
                let qy = setup.re.phi_cub.matvec(run.final_state.qy.elem(e));
                let (_, det) = setup.mesh.jacobian(e);
                for (c, &w) in setup.re.cub_w.iter().enumerate() {
                    let (x, y) = setup.mesh.map_ref_to_phys(e, setup.re.cub_pts[c]);
                    if let Some((re_, rqx, rqy)) = ref_eval.eval(x, y) {
                        e2_eta += w * det * (eta[c] - re_).powi(2);
                        e2_q += w * det * ((qx[c] - rqx).powi(2) + (qy[c] - rqy).powi(2));
                    }
                }
            }
            rows.push(StudyRow {
                k,
                cells,
                dx: (x1 - x0) / cells as f64,
                err_eta: e2_eta.sqrt(),
                err_q: e2_q.sqrt(),
            });
        }
    }
    Ok(rows)
}

/// Regression slopes per order from study rows.
pub fn study_slopes(rows: &[StudyRow], k: usize) -> ((f64, bool), (f64, bool)) {
    let sel: Vec<&StudyRow> = rows.iter().filter(|r| r.k == k).collect();
    let dx: Vec<f64> = sel.iter().map(|r| r.dx).collect();
    let ee: Vec<f64> = sel.iter().map(|r| r.err_eta).collect();
    let eq: Vec<f64> = sel.iter().map(|r| r.err_q).collect();
    (regression_slope(&dx, &ee), regression_slope(&dx, &eq))
}
