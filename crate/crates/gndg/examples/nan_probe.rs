use gndg::driver::{Scenario, Setup, MeshSource, InitialCondition};
use gndg::driver::bathymetry::BathySpec;
use gndg::dispersive::compute_dispersive_correction;

fn main() {
    let mut sc = Scenario::new("probe");
    sc.k = 2; sc.h0 = 1.5; sc.t_max = 0.1;
    sc.mesh = MeshSource::Regular { nx: 12, ny: 12, x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
    sc.bathy = BathySpec::BumpHollow { base: 1.0, d: 0.45, l: 0.15, x1: (-1.0/3.0, -1.0/3.0), x2: (1.0/3.0, 1.0/3.0) };
    sc.initial = InitialCondition::LakeAtRest;
    let setup = Setup::build(sc).unwrap();
    let state = setup.initial_state();
    println!("eps0 = {}", setup.params.eps0);
    println!("b range: {:.3} .. {:.3}", setup.bathy.b.data.iter().cloned().fold(f64::INFINITY, f64::min), setup.bathy.b.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    println!("h_b range: {:.3} .. {:.3}", setup.bathy.h_b.data.iter().cloned().fold(f64::INFINITY, f64::min), setup.bathy.h_b.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let sys = setup.sys.as_ref().unwrap();
    println!("min pivot {:.3e}", sys.factors.min_pivot);
    // residual health of the factorization
    let rhs: Vec<f64> = (0..sys.matrix.n()).map(|i| ((i*2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    let x = sys.factors.solve(&rhs).unwrap();
    println!("solve finite: {}", x.iter().all(|v| v.is_finite()));
    let r = gndg::sparse::Factorization::residual(&sys.matrix, &x, &rhs);
    println!("residual {:.3e}", r);
    match compute_dispersive_correction(&state, &setup.bathy, sys, &setup.diff, &setup.params, None) {
        Ok(dc) => println!("dc max {:.3e}", dc.max_abs()),
        Err(e) => println!("dc error: {e}"),
    }
    // march a few steps manually, mimicking the run loop
    use gndg::limiters::{apply_stage_limiters, LimiterOptions};
    use gndg::timestepping::{compute_dt, SspRk};
    let mut state = state;
    let mut rk = SspRk::new(3, setup.mesh.n_elems(), setup.re.n_nodes);
    let opts = LimiterOptions::default();
    for step in 0..200 {
        let ctx = setup.engine.max_wave_speed(&state, &setup.bathy, &setup.re, &setup.mesh);
        let dt = compute_dt(&ctx, &setup.mesh, &setup.re, 0.9, 1.0);
        let mut nstage = 0;
        let r = rk.step(&mut state, dt, &mut |s: &mut gndg::field::State, out: &mut gndg::field::State| {
            nstage += 1;
            let info = apply_stage_limiters(s, &setup.bathy, &setup.mesh, &setup.re, setup.params.eps0, &opts)?;
            let dc = compute_dispersive_correction(s, &setup.bathy, setup.sys.as_ref().unwrap(), &setup.diff, &setup.params, Some(&info.troubled))?;
            if !dc.all_finite() || dc.max_abs() > 1e6 {
                println!("step {step} stage {nstage}: dc max {:.3e} min_theta {:.3}", dc.max_abs(), info.min_theta);
            }
            setup.engine.residual(s, Some(&dc), ctx.a, &setup.re, out)
        });
        if let Err(e) = r {
            println!("step {step}: {e}");
            break;
        }
        let maxq = state.qx.max_abs().max(state.qy.max_abs());
        if step % 20 == 0 || maxq > 10.0 {
            println!("step {step}: dt={dt:.3e} max|q|={maxq:.3e} max|eta-1.5|={:.3e}", state.eta.data.iter().map(|v| (v-1.5f64).abs()).fold(0.0f64, f64::max));
        }
        if maxq > 1e3 { println!("blowup"); break; }
    }
}

#[allow(dead_code)]
fn unused() {}
