use gndg::driver::{Scenario, Setup, MeshSource, InitialCondition};
use gndg::driver::bathymetry::BathySpec;
use gndg::dispersive::compute_dispersive_correction;
use gndg::limiters::{apply_stage_limiters, LimiterOptions};
use gndg::timestepping::{compute_dt, SspRk};
use gndg::field::State;

fn run_case(name: &str, dispersive: bool, limiters: bool, bump: bool, periodic: bool, nsteps: usize) {
    let mut sc = Scenario::new("probe");
    sc.k = 2; sc.h0 = 1.5; sc.dispersive = dispersive;
    sc.periodic = gndg::mesh::PeriodicSpec { x: periodic, y: periodic };
    sc.mesh = MeshSource::Regular { nx: 12, ny: 12, x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
    sc.bathy = if bump {
        BathySpec::BumpHollow { base: 1.0, d: 0.45, l: 0.15, x1: (-1.0/3.0, -1.0/3.0), x2: (1.0/3.0, 1.0/3.0) }
    } else {
        BathySpec::Flat { level: 0.0 }
    };
    sc.initial = InitialCondition::LakeAtRest;
    sc.limiters.positivity = limiters;
    sc.limiters.breaking = limiters;
    let setup = Setup::build(sc).unwrap();
    let mut state = setup.initial_state();
    // small sinusoidal perturbation
    for (i, &(x, _)) in setup.node_xy.iter().enumerate() {
        state.eta.data[i] += 1e-3 * (std::f64::consts::PI * x).sin();
    }
    let mut rk = SspRk::new(3, setup.mesh.n_elems(), setup.re.n_nodes);
    let opts = LimiterOptions { positivity: limiters, breaking: limiters };
    let mut amp0 = 0.0;
    for step in 0..nsteps {
        let ctx = setup.engine.max_wave_speed(&state, &setup.bathy, &setup.re, &setup.mesh);
        let dt = compute_dt(&ctx, &setup.mesh, &setup.re, 0.9, 1.0);
        let r = rk.step(&mut state, dt, &mut |s: &mut State, out: &mut State| {
            let info = apply_stage_limiters(s, &setup.bathy, &setup.mesh, &setup.re, setup.params.eps0, &opts)?;
            let dc = match setup.sys.as_ref() {
                Some(sys) => Some(compute_dispersive_correction(s, &setup.bathy, sys, &setup.diff, &setup.params, Some(&info.troubled))?),
                None => None,
            };
            setup.engine.residual(s, dc.as_ref(), ctx.a, &setup.re, out)
        });
        if r.is_err() { println!("{name}: died at step {step}: {:?}", r.err()); return; }
        let amp = state.qx.max_abs().max(state.qy.max_abs());
        if step == 0 { amp0 = amp.max(1e-12); }
        if !amp.is_finite() || amp > 1e3 { println!("{name}: blowup at step {step}"); return; }
    }
    let amp = state.qx.max_abs().max(state.qy.max_abs());
    println!("{name}: max|q| {:.3e} -> {:.3e} (x{:.2})", amp0, amp, amp / amp0);
}

fn main() {
    run_case("flat periodic disp=off lim=off", false, false, false, true, 400);
    run_case("flat periodic disp=on  lim=off", true, false, false, true, 400);
    run_case("flat walls   disp=on  lim=off", true, false, false, false, 400);
    run_case("bump walls   disp=off lim=on ", false, true, true, false, 400);
    run_case("bump walls   disp=on  lim=off", true, false, true, false, 400);
    run_case("bump walls   disp=on  lim=on ", true, true, true, false, 400);
}
