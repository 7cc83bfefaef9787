//! Scenario orchestration: configuration, setup of all discrete operators,
//! the time loop with per-stage limiting and dispersive correction, gauges,
//! and output artifacts.

pub mod bathymetry;
pub mod config;
pub mod convergence;
pub mod gauges;
pub mod output;
pub mod signal;

use crate::basis::{project_function, reference_element, ReferenceElement};
use crate::boundary::{apply_sponge, monochromatic_phase_speed, SpongeLayer, SpongeTarget};
use crate::dispersive::compute_dispersive_correction;
use crate::elliptic::{assemble_diff_matrices, assemble_elliptic_operator, DiffOps, EllipticSystem};
use crate::error::Error;
use crate::field::State;
use crate::limiters::{apply_stage_limiters, LimiterOptions};
use crate::mesh::{load_mesh, regular_mesh, Mesh, PeriodicSpec};
use crate::swe::{Bathymetry, PhysParams, SweEngine};
use crate::timestepping::{compute_dt, rk_order_for, SspRk};
use bathymetry::BathySpec;
use config::Ini;
use gauges::{Gauge, GaugeSeries, Locator};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub enum MeshSource {
    File(PathBuf),
    Regular {
        nx: usize,
        ny: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// eta = max(h0, b) nodally, q = 0.
    LakeAtRest,
    /// Gaussian free-surface hump of amplitude a and width l at (x0, y0).
    Gaussian { a: f64, l: f64, x0: f64, y0: f64 },
    /// Solitary wave of relative amplitude eps centred at x0, moving in
    /// direction +-1 along x.
    Soliton { eps: f64, x0: f64, direction: f64 },
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub snapshot_dt: f64,
    pub gauge_every: usize,
    pub log_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            snapshot_dt: 0.0,
            gauge_every: 1,
            log_every: 500,
        }
    }
}

/// Everything needed to reproduce one benchmark run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub k: usize,
    pub g: f64,
    pub alpha: f64,
    /// dry threshold; defaults to 0.1 * h0
    pub eps0: f64,
    pub h0: f64,
    pub t_max: f64,
    pub cfl: f64,
    pub fixed_dt: Option<f64>,
    pub rk_order: Option<usize>,
    pub mesh: MeshSource,
    pub periodic: PeriodicSpec,
    pub bathy: BathySpec,
    pub initial: InitialCondition,
    pub sponges: Vec<SpongeLayer>,
    pub gauges: Vec<(f64, f64)>,
    pub limiters: LimiterOptions,
    /// false switches the dispersive correction off globally (hydrostatic run)
    pub dispersive: bool,
    pub output: OutputConfig,
    pub resume: Option<PathBuf>,
    pub save_final: Option<PathBuf>,
}

impl Scenario {
    pub fn new(name: &str) -> Scenario {
        Scenario {
            name: name.to_string(),
            k: 2,
            g: 9.81,
            alpha: 1.159,
            eps0: f64::NAN, // resolved against h0 at build time
            h0: 1.0,
            t_max: 1.0,
            cfl: 0.9,
            fixed_dt: None,
            rk_order: None,
            mesh: MeshSource::Regular {
                nx: 8,
                ny: 8,
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            },
            periodic: PeriodicSpec::default(),
            bathy: BathySpec::Flat { level: 0.0 },
            initial: InitialCondition::LakeAtRest,
            sponges: Vec::new(),
            gauges: Vec::new(),
            limiters: LimiterOptions::default(),
            dispersive: true,
            output: OutputConfig::default(),
            resume: None,
            save_final: None,
        }
    }

    pub fn resolved_eps0(&self) -> f64 {
        if self.eps0.is_nan() {
            0.1 * self.h0
        } else {
            self.eps0
        }
    }

    /// Build a scenario from a parsed configuration. Relative paths resolve
    /// against `base_dir` (the config file's directory).
    pub fn from_ini(ini: &Ini, base_dir: &Path) -> Result<Scenario, Error> {
        let mut sc = Scenario::new(ini.get("scenario", "name").unwrap_or("unnamed"));
        if let Some(k) = ini.get_usize("scenario", "k")? {
            sc.k = k;
        }
        if let Some(v) = ini.get_f64("scenario", "g")? {
            sc.g = v;
        }
        if let Some(v) = ini.get_f64("scenario", "alpha")? {
            sc.alpha = v;
        }
        if let Some(v) = ini.get_f64("scenario", "eps0")? {
            sc.eps0 = v;
        }
        if let Some(v) = ini.get_f64("scenario", "h0")? {
            sc.h0 = v;
        }
        if let Some(v) = ini.get_f64("scenario", "t_max")? {
            sc.t_max = v;
        }
        if let Some(v) = ini.get_f64("scenario", "cfl")? {
            sc.cfl = v;
        }
        if let Some(v) = ini.get_f64("scenario", "fixed_dt")? {
            sc.fixed_dt = Some(v);
        }
        if let Some(v) = ini.get_usize("scenario", "rk_order")? {
            sc.rk_order = Some(v);
        }
        if let Some(v) = ini.get_bool("scenario", "dispersive")? {
            sc.dispersive = v;
        }
        if let Some(v) = ini.get_bool("scenario", "positivity_limiter")? {
            sc.limiters.positivity = v;
        }
        if let Some(v) = ini.get_bool("scenario", "breaking")? {
            sc.limiters.breaking = v;
        }

        // mesh
        let source = ini
            .get("mesh", "source")
            .ok_or_else(|| Error::Config("[mesh] source is required".into()))?;
        sc.mesh = if let Some(rest) = source.strip_prefix("regular:") {
            let (nx, ny) = rest
                .split_once('x')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| Error::Config(format!("bad regular mesh spec '{source}'")))?;
            let x0 = ini.get_f64("mesh", "x0")?.unwrap_or(0.0);
            let x1 = ini.get_f64("mesh", "x1")?.unwrap_or(1.0);
            let y0 = ini.get_f64("mesh", "y0")?.unwrap_or(0.0);
            let y1 = ini.get_f64("mesh", "y1")?.unwrap_or(1.0);
            MeshSource::Regular {
                nx,
                ny,
                x0,
                x1,
                y0,
                y1,
            }
        } else if let Some(rest) = source.strip_prefix("file:") {
            MeshSource::File(base_dir.join(rest.trim()))
        } else {
            MeshSource::File(base_dir.join(source.trim()))
        };
        match ini.get("mesh", "periodic").unwrap_or("none") {
            "none" => {}
            "x" => sc.periodic.x = true,
            "y" => sc.periodic.y = true,
            "xy" | "yx" => {
                sc.periodic.x = true;
                sc.periodic.y = true;
            }
            other => {
                return Err(Error::Config(format!(
                    "[mesh] periodic = '{other}' (expected none|x|y|xy)"
                )))
            }
        }

        // bathymetry
        let kind = ini.get("bathymetry", "kind").unwrap_or("flat");
        sc.bathy = match kind {
            "flat" => BathySpec::Flat {
                level: ini.get_f64("bathymetry", "level")?.unwrap_or(0.0),
            },
            "bump_hollow" => BathySpec::BumpHollow {
                base: ini.get_f64("bathymetry", "base")?.unwrap_or(1.0),
                d: ini.get_f64("bathymetry", "d")?.unwrap_or(0.45),
                l: ini.get_f64("bathymetry", "l")?.unwrap_or(0.15),
                x1: ini
                    .get_pair("bathymetry", "x1")?
                    .unwrap_or((-1.0 / 3.0, -1.0 / 3.0)),
                x2: ini
                    .get_pair("bathymetry", "x2")?
                    .unwrap_or((1.0 / 3.0, 1.0 / 3.0)),
            },
            "slope" => BathySpec::Slope {
                h0: sc.h0,
                slope: ini
                    .get_f64("bathymetry", "slope")?
                    .unwrap_or(1.0 / 19.85),
                shore_x: ini.get_f64("bathymetry", "shore_x")?.unwrap_or(0.0),
            },
            "trapezoid_bar" => BathySpec::TrapezoidBar {
                front_toe: ini.get_f64("bathymetry", "front_toe")?.unwrap_or(6.0),
                crest_start: ini.get_f64("bathymetry", "crest_start")?.unwrap_or(12.0),
                crest_end: ini.get_f64("bathymetry", "crest_end")?.unwrap_or(14.0),
                back_end: ini.get_f64("bathymetry", "back_end")?.unwrap_or(17.0),
                height: ini.get_f64("bathymetry", "height")?.unwrap_or(0.3),
            },
            "elliptic_shoal" => BathySpec::EllipticShoal {
                angle_deg: ini.get_f64("bathymetry", "angle")?.unwrap_or(20.0),
            },
            "grid" => {
                let p = ini
                    .get("bathymetry", "file")
                    .ok_or_else(|| Error::Config("[bathymetry] file required for kind=grid".into()))?;
                BathySpec::Grid(bathymetry::GridBathymetry::load(&base_dir.join(p))?)
            }
            other => return Err(Error::Config(format!("unknown bathymetry kind '{other}'"))),
        };

        // initial condition
        let kind = ini.get("initial", "kind").unwrap_or("lake_at_rest");
        sc.initial = match kind {
            "lake_at_rest" => InitialCondition::LakeAtRest,
            "gaussian" => InitialCondition::Gaussian {
                a: ini.get_f64("initial", "a")?.unwrap_or(0.075 * sc.h0),
                l: ini.get_f64("initial", "length")?.unwrap_or(0.15),
                x0: ini.get_f64("initial", "x0")?.unwrap_or(0.0),
                y0: ini.get_f64("initial", "y0")?.unwrap_or(0.0),
            },
            "soliton" => InitialCondition::Soliton {
                eps: ini.get_f64("initial", "eps")?.unwrap_or(0.2),
                x0: ini.get_f64("initial", "x0")?.unwrap_or(0.0),
                direction: ini.get_f64("initial", "direction")?.unwrap_or(1.0),
            },
            other => return Err(Error::Config(format!("unknown initial kind '{other}'"))),
        };

        // sponge layers: sections named sponge.<anything>
        for (sec, keys) in &ini.sections {
            if !sec.starts_with("sponge") {
                continue;
            }
            let getf = |k: &str| -> Result<Option<f64>, Error> { ini.get_f64(sec, k) };
            let axis = match keys.get("axis").map(|s| s.as_str()).unwrap_or("x") {
                "x" => 0,
                "y" => 1,
                other => return Err(Error::Config(format!("[{sec}] axis = '{other}'"))),
            };
            let outer = getf("outer")?
                .ok_or_else(|| Error::Config(format!("[{sec}] outer required")))?;
            let inner = getf("inner")?
                .ok_or_else(|| Error::Config(format!("[{sec}] inner required")))?;
            let mode = keys.get("mode").map(|s| s.as_str()).unwrap_or("absorb");
            let target = match mode {
                "absorb" => SpongeTarget::Rest { eta0: sc.h0 },
                "generate" => {
                    let amplitude = getf("a")?
                        .ok_or_else(|| Error::Config(format!("[{sec}] a required")))?;
                    let period = getf("period")?
                        .ok_or_else(|| Error::Config(format!("[{sec}] period required")))?;
                    let ramp_time = getf("ramp")?.unwrap_or(2.0 * period);
                    let phase_speed =
                        monochromatic_phase_speed(period, sc.h0, sc.g, sc.alpha);
                    SpongeTarget::Monochromatic {
                        amplitude,
                        period,
                        h0: sc.h0,
                        eta0: sc.h0,
                        x_ref: getf("x_ref")?.unwrap_or(outer),
                        phase_speed,
                        ramp_time,
                    }
                }
                other => return Err(Error::Config(format!("[{sec}] mode = '{other}'"))),
            };
            sc.sponges.push(SpongeLayer {
                axis,
                outer,
                inner,
                target,
            });
        }

        // gauges: every key in [gauges] is "x, y"
        if let Some(keys) = ini.sections.get("gauges") {
            let mut entries: Vec<(&String, &String)> = keys.iter().collect();
            entries.sort();
            for (_k, v) in entries {
                let parts: Vec<&str> = v.split(',').map(|s| s.trim()).collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!("gauge '{v}' is not 'x, y'")));
                }
                let x = parts[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad gauge x '{}'", parts[0])))?;
                let y = parts[1]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad gauge y '{}'", parts[1])))?;
                sc.gauges.push((x, y));
            }
        }

        // output
        if let Some(d) = ini.get("output", "dir") {
            sc.output.dir = Some(base_dir.join(d));
        }
        if let Some(v) = ini.get_f64("output", "snapshot_dt")? {
            sc.output.snapshot_dt = v;
        }
        if let Some(v) = ini.get_usize("output", "gauge_every")? {
            sc.output.gauge_every = v.max(1);
        }
        if let Some(v) = ini.get_usize("output", "log_every")? {
            sc.output.log_every = v.max(1);
        }
        Ok(sc)
    }
}

/// All discrete operators built for a scenario.
pub struct Setup {
    pub scenario: Scenario,
    pub params: PhysParams,
    pub mesh: Mesh,
    pub re: ReferenceElement,
    pub diff: DiffOps,
    pub bathy: Bathymetry,
    pub sys: Option<EllipticSystem>,
    pub engine: SweEngine,
    /// physical coordinates of every nodal point (element-major)
    pub node_xy: Vec<(f64, f64)>,
}

impl Setup {
    pub fn build(scenario: Scenario) -> Result<Setup, Error> {
        let mesh = match &scenario.mesh {
            MeshSource::File(p) => load_mesh(p, scenario.periodic)?,
            MeshSource::Regular {
                nx,
                ny,
                x0,
                x1,
                y0,
                y1,
            } => regular_mesh(*nx, *ny, *x0, *x1, *y0, *y1, scenario.periodic)?,
        };
        let re = reference_element(scenario.k)?;
        let params = PhysParams {
            g: scenario.g,
            alpha: scenario.alpha,
            eps0: scenario.resolved_eps0(),
            h0: scenario.h0,
        };
        let diff = assemble_diff_matrices(&mesh, &re);
        let bspec = scenario.bathy.clone();
        let b = project_function(&|x, y| bspec.eval(x, y), &mesh, &re);
        let bathy = Bathymetry::new(b, &params, &mesh, &re, &diff);
        let sys = if scenario.dispersive {
            Some(assemble_elliptic_operator(
                &bathy.h_sq,
                &bathy.grad_h_sq,
                params.alpha,
                &mesh,
                &re,
                &diff,
            )?)
        } else {
            None
        };
        let engine = SweEngine::new(params, &mesh, &re, &bathy);
        let mut node_xy = Vec::with_capacity(mesh.n_elems() * re.n_nodes);
        for e in 0..mesh.n_elems() {
            for &p in &re.nodes {
                node_xy.push(mesh.map_ref_to_phys(e, p));
            }
        }
        Ok(Setup {
            scenario,
            params,
            mesh,
            re,
            diff,
            bathy,
            sys,
            engine,
            node_xy,
        })
    }

    /// Initial nodal state for the scenario.
    pub fn initial_state(&self) -> State {
        let ne = self.mesh.n_elems();
        let n = self.re.n_nodes;
        let mut state = State::zeros(ne, n);
        let h0 = self.params.h0;
        match &self.scenario.initial {
            InitialCondition::LakeAtRest => {
                for i in 0..ne * n {
                    state.eta.data[i] = h0.max(self.bathy.b.data[i]);
                }
            }
            InitialCondition::Gaussian { a, l, x0, y0 } => {
                for (i, &(x, y)) in self.node_xy.iter().enumerate() {
                    let r2 = (x - x0).powi(2) + (y - y0).powi(2);
                    let eta = h0 + a * (-r2 / (l * l)).exp();
                    state.eta.data[i] = eta.max(self.bathy.b.data[i]);
                }
            }
            InitialCondition::Soliton { eps, x0, direction } => {
                for (i, &(x, _)) in self.node_xy.iter().enumerate() {
                    let (h, u) =
                        crate::boundary::solitary_wave(*eps, h0, *x0, self.params.g, x, 0.0);
                    let eta = h0 + (h - h0);
                    let b = self.bathy.b.data[i];
                    if eta > b {
                        state.eta.data[i] = eta;
                        state.qx.data[i] = h * u * direction;
                    } else {
                        state.eta.data[i] = b;
                    }
                }
            }
        }
        state
    }

    /// Water volume (integral of h over the domain).
    pub fn water_volume(&self, state: &State) -> f64 {
        let mut total = 0.0;
        for e in 0..self.mesh.n_elems() {
            let mut mean = 0.0;
            for i in 0..self.re.n_nodes {
                mean += self.re.mean_w[i] * (state.eta.elem(e)[i] - self.bathy.b.elem(e)[i]);
            }
            total += mesh_area(self, e) * mean;
        }
        total
    }
}

fn mesh_area(setup: &Setup, e: usize) -> f64 {
    setup.mesh.areas[e]
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub final_t: f64,
    pub wall_seconds: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift_rel: f64,
    pub min_mean_depth: f64,
    pub max_troubled: usize,
    pub first_breaking_t: Option<f64>,
    pub max_abs_dc: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        format!(
            "steps: {}\nfinal_t: {:.9e}\nwall_seconds: {:.3}\nmass_initial: {:.12e}\nmass_final: {:.12e}\nmass_drift_rel: {:.3e}\nmin_mean_depth: {:.6e}\nmax_troubled: {}\nfirst_breaking_t: {}\nmax_abs_dc: {:.6e}\n",
            self.steps,
            self.final_t,
            self.wall_seconds,
            self.mass_initial,
            self.mass_final,
            self.mass_drift_rel,
            self.min_mean_depth,
            self.max_troubled,
            self.first_breaking_t
                .map(|t| format!("{t:.6e}"))
                .unwrap_or_else(|| "none".into()),
            self.max_abs_dc
        )
    }
}

pub struct RunArtifacts {
    pub summary: RunSummary,
    pub gauges: Vec<GaugeSeries>,
    pub final_state: State,
}

/// Run the scenario time loop: CFL-adaptive SSP-RK stepping with per-stage
/// limiting and dispersive correction, sponge blending per step, gauge
/// sampling, and output writing.
pub fn run_scenario(setup: &Setup) -> Result<RunArtifacts, Error> {
    let sc = &setup.scenario;
    let wall0 = std::time::Instant::now();
    let (mut t, mut state) = match &sc.resume {
        Some(p) => output::load_state(p)?,
        None => (0.0, setup.initial_state()),
    };
    if let Some(dir) = &sc.output.dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut log: Option<std::io::BufWriter<std::fs::File>> = match &sc.output.dir {
        Some(dir) => Some(std::io::BufWriter::new(std::fs::File::create(
            dir.join("run.log"),
        )?)),
        None => None,
    };

    let locator = Locator::build(&setup.mesh);
    let mut gauges: Vec<Gauge> = Vec::new();
    let mut series: Vec<GaugeSeries> = Vec::new();
    for &pos in &sc.gauges {
        let g = Gauge::bind(pos, &setup.mesh, &setup.re, &locator)?;
        series.push(GaugeSeries {
            position: pos,
            ..Default::default()
        });
        gauges.push(g);
    }

    let order = sc.rk_order.unwrap_or_else(|| rk_order_for(sc.k));
    let mut rk = SspRk::new(order, setup.mesh.n_elems(), setup.re.n_nodes);

    let mass_initial = setup.water_volume(&state);
    let mut summary = RunSummary {
        steps: 0,
        final_t: t,
        wall_seconds: 0.0,
        mass_initial,
        mass_final: mass_initial,
        mass_drift_rel: 0.0,
        min_mean_depth: f64::INFINITY,
        max_troubled: 0,
        first_breaking_t: None,
        max_abs_dc: 0.0,
    };

    let mut snapshot_id = 0usize;
    let mut next_snapshot = if sc.output.snapshot_dt > 0.0 {
        sc.output.snapshot_dt
    } else {
        f64::INFINITY
    };
    let sample_gauges =
        |t: f64, state: &State, gauges: &[Gauge], series: &mut [GaugeSeries]| {
            for (g, s) in gauges.iter().zip(series.iter_mut()) {
                let (eta, qx, qy) = g.sample(state);
                s.t.push(t);
                s.eta.push(eta);
                s.qx.push(qx);
                s.qy.push(qy);
            }
        };
    sample_gauges(t, &state, &gauges, &mut series);

    let mut step_idx = 0usize;
    // shared per-step data for the stage closure
    while t < sc.t_max - 1e-14 {
        let ctx = setup
            .engine
            .max_wave_speed(&state, &setup.bathy, &setup.re, &setup.mesh);
        let cap = (sc.t_max - t).min(next_snapshot - t).max(1e-14);
        let dt = match sc.fixed_dt {
            Some(fdt) => fdt.min(cap),
            None => compute_dt(&ctx, &setup.mesh, &setup.re, sc.cfl, cap),
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::NonFinite(format!("time step at t = {t}")));
        }

        let mut stage_troubled = 0usize;
        let mut stage_first_breaking = false;
        let mut stage_max_dc = 0.0f64;
        let mut min_mean_h = f64::INFINITY;
        {
            let setup_ref = setup;
            let mut stage = |s: &mut State, out: &mut State| -> Result<(), Error> {
                let info = apply_stage_limiters(
                    s,
                    &setup_ref.bathy,
                    &setup_ref.mesh,
                    &setup_ref.re,
                    setup_ref.params.eps0,
                    &sc.limiters,
                )
                .map_err(|e| match e {
                    Error::NegativeMeanDepth { element, .. } => {
                        Error::NegativeMeanDepth { element, t }
                    }
                    other => other,
                })?;
                stage_troubled = stage_troubled.max(info.n_troubled);
                if info.n_troubled > 0 {
                    stage_first_breaking = true;
                }
                let dc = match &setup_ref.sys {
                    Some(sys) => {
                        let mask = if sc.limiters.breaking {
                            Some(info.troubled.as_slice())
                        } else {
                            None
                        };
                        let dc = compute_dispersive_correction(
                            s,
                            &setup_ref.bathy,
                            sys,
                            &setup_ref.diff,
                            &setup_ref.params,
                            mask,
                        )?;
                        stage_max_dc = stage_max_dc.max(dc.max_abs());
                        Some(dc)
                    }
                    None => None,
                };
                setup_ref
                    .engine
                    .residual(s, dc.as_ref(), ctx.a, &setup_ref.re, out)
            };
            rk.step(&mut state, dt, &mut stage)?;
        }
        t += dt;
        step_idx += 1;

        if !sc.sponges.is_empty() {
            apply_sponge(&mut state, &sc.sponges, &setup.node_xy, t, setup.params.g);
        }

        // bookkeeping
        for e in 0..setup.mesh.n_elems() {
            let mut mean = 0.0;
            for i in 0..setup.re.n_nodes {
                mean += setup.re.mean_w[i]
                    * (state.eta.elem(e)[i] - setup.bathy.b.elem(e)[i]);
            }
            min_mean_h = min_mean_h.min(mean);
        }
        if min_mean_h < 0.0 {
            // dump state for diagnosis before aborting
            if let Some(dir) = &sc.output.dir {
                let _ = output::save_state(&dir.join("abort_state.bin"), t, &state);
            }
            let worst = (0..setup.mesh.n_elems())
                .min_by(|&a, &b| {
                    let m = |e: usize| {
                        (0..setup.re.n_nodes)
                            .map(|i| {
                                setup.re.mean_w[i]
                                    * (state.eta.elem(e)[i] - setup.bathy.b.elem(e)[i])
                            })
                            .sum::<f64>()
                    };
                    m(a).partial_cmp(&m(b)).unwrap()
                })
                .unwrap_or(0);
            return Err(Error::NegativeMeanDepth { element: worst, t });
        }
        summary.min_mean_depth = summary.min_mean_depth.min(min_mean_h);
        summary.max_troubled = summary.max_troubled.max(stage_troubled);
        summary.max_abs_dc = summary.max_abs_dc.max(stage_max_dc);
        if stage_first_breaking && summary.first_breaking_t.is_none() {
            summary.first_breaking_t = Some(t);
        }

        if step_idx % sc.output.gauge_every == 0 {
            sample_gauges(t, &state, &gauges, &mut series);
        }
        if let Some(log) = log.as_mut() {
            if step_idx % sc.output.log_every == 0 || t >= sc.t_max - 1e-14 {
                writeln!(
                    log,
                    "t={t:.6e} dt={dt:.6e} min_mean_h={min_mean_h:.6e} troubled={stage_troubled} a={:.6e}",
                    ctx.a
                )?;
            }
        }
        if t >= next_snapshot - 1e-12 {
            if let Some(dir) = &sc.output.dir {
                snapshot_id += 1;
                output::write_vtk(
                    &dir.join(format!("snap_{snapshot_id:06}.vtk")),
                    &setup.mesh,
                    &setup.re,
                    &state,
                    &setup.bathy.b,
                    None,
                    None,
                    t,
                )?;
            }
            next_snapshot += sc.output.snapshot_dt;
        }
        if !state.all_finite() {
            if let Some(dir) = &sc.output.dir {
                let _ = output::save_state(&dir.join("abort_state.bin"), t, &state);
            }
            return Err(Error::NonFinite(format!("state at t = {t}")));
        }
    }

    summary.steps = step_idx;
    summary.final_t = t;
    summary.mass_final = setup.water_volume(&state);
    summary.mass_drift_rel =
        ((summary.mass_final - summary.mass_initial) / summary.mass_initial.abs().max(1e-300)).abs();
    summary.wall_seconds = wall0.elapsed().as_secs_f64();
    if summary.min_mean_depth == f64::INFINITY {
        summary.min_mean_depth = 0.0;
    }

    if let Some(dir) = &sc.output.dir {
        for (i, s) in series.iter().enumerate() {
            output::write_gauge_csv(&dir.join(format!("gauge_{:02}.csv", i + 1)), s)?;
        }
        std::fs::write(dir.join("summary.txt"), summary.to_text())?;
        output::write_vtk(
            &dir.join("final.vtk"),
            &setup.mesh,
            &setup.re,
            &state,
            &setup.bathy.b,
            None,
            None,
            t,
        )?;
    }
    if let Some(p) = &sc.save_final {
        output::save_state(p, t, &state)?;
    }

    Ok(RunArtifacts {
        summary,
        gauges: series,
        final_state: state,
    })
}
