//! Command-line simulator: scenario runs, convergence studies, mesh
//! validation, basis/operator inspection.
//!
//! Exit codes: 0 success, 2 numerical abort, 3 configuration error.

use clap::{Parser, Subcommand};
use gndg::driver::{config::Ini, convergence, run_scenario, Scenario, Setup};
use gndg::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gndg", about = "Dispersive free-surface wave simulator (nodal DG on triangles)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file
    Run {
        config: PathBuf,
        /// Override config values: section.key=value
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides [output] dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save the final state to a checkpoint file
        #[arg(long)]
        save_final: Option<PathBuf>,
        /// Resume from a checkpoint file
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the convergence study described by [convergence] in the config
    Convergence {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Mesh utilities
    Mesh {
        #[command(subcommand)]
        sub: MeshCmd,
    },
    /// Reference-element utilities
    Basis {
        #[command(subcommand)]
        sub: BasisCmd,
    },
    /// Elliptic operator statistics for a scenario
    Operator {
        #[command(subcommand)]
        sub: OperatorCmd,
    },
}

#[derive(Subcommand)]
enum MeshCmd {
    /// Load a mesh file and print the validation report
    Check { file: PathBuf },
}

#[derive(Subcommand)]
enum BasisCmd {
    /// Print node counts, quadrature orders and the positivity-rule weight
    Info {
        #[arg(short)]
        k: usize,
    },
}

#[derive(Subcommand)]
enum OperatorCmd {
    /// Assemble and factorize the elliptic operator; print statistics
    Stats { config: PathBuf },
}

fn load_scenario(config: &PathBuf, overrides: &[String]) -> Result<Scenario, Error> {
    let mut ini = Ini::load(config)?;
    for s in overrides {
        ini.set_override(s)?;
    }
    let base = config.parent().unwrap_or(std::path::Path::new("."));
    Scenario::from_ini(&ini, base)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GNDG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite(_) | Error::NegativeMeanDepth { .. } | Error::SingularPivot { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            set,
            out,
            save_final,
            resume,
        } => {
            let mut sc = load_scenario(&config, &set)?;
            if let Some(dir) = out {
                sc.output.dir = Some(dir);
            }
            sc.save_final = save_final;
            sc.resume = resume;
            let name = sc.name.clone();
            println!("building scenario '{name}' ...");
            let setup = Setup::build(sc)?;
            println!(
                "mesh: {} elements, k = {}, n = {} dof per component",
                setup.mesh.n_elems(),
                setup.re.k,
                setup.mesh.n_elems() * setup.re.n_nodes
            );
            if let Some(sys) = &setup.sys {
                println!(
                    "elliptic operator: {} blocks, fill {} blocks, assembled {:.2}s, factorized {:.2}s",
                    sys.matrix.n_blocks,
                    sys.factors.fill_blocks,
                    sys.assembly_seconds,
                    sys.factorize_seconds
                );
            }
            let run = run_scenario(&setup)?;
            print!("{}", run.summary.to_text());
            Ok(())
        }
        Command::Convergence { config, set } => {
            let mut ini = Ini::load(&config)?;
            for s in &set {
                ini.set_override(s)?;
            }
            let base_dir = config.parent().unwrap_or(std::path::Path::new("."));
            let sc = Scenario::from_ini(&ini, base_dir)?;
            let levels: Vec<usize> = ini
                .get("convergence", "levels")
                .unwrap_or("8,16,32,64")
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Config("bad levels".into())))
                .collect::<Result<_, _>>()?;
            let ks: Vec<usize> = ini
                .get("convergence", "k_list")
                .unwrap_or("1,2")
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::Config("bad k_list".into())))
                .collect::<Result<_, _>>()?;
            let ref_cells = ini.get_usize("convergence", "ref_cells")?.unwrap_or(64);
            let ref_k = ini.get_usize("convergence", "ref_k")?.unwrap_or(3);
            let rows = convergence::run_gaussian_study(&sc, &levels, &ks, ref_cells, ref_k)?;
            println!("{:>3} {:>6} {:>12} {:>14} {:>14}", "k", "cells", "dx", "err_eta", "err_q");
            for r in &rows {
                println!(
                    "{:>3} {:>6} {:>12.5e} {:>14.6e} {:>14.6e}",
                    r.k, r.cells, r.dx, r.err_eta, r.err_q
                );
            }
            for &k in &ks {
                let ((se, me), (sq, mq)) = convergence::study_slopes(&rows, k);
                println!(
                    "k = {k}: slope eta = {se:.3}{}, slope q = {sq:.3}{}",
                    if me { "" } else { " (non-monotone)" },
                    if mq { "" } else { " (non-monotone)" }
                );
            }
            Ok(())
        }
        Command::Mesh { sub } => match sub {
            MeshCmd::Check { file } => {
                // build without the invariant gate so the report shows failures
                let text = std::fs::read_to_string(&file)?;
                let (v, e, tags) = if file
                    .extension()
                    .map(|e| e.eq_ignore_ascii_case("msh"))
                    .unwrap_or(false)
                {
                    gndg::mesh::formats::parse_msh22(&text)?
                } else {
                    gndg::mesh::formats::parse_plain(&text)?
                };
                let mesh = gndg::mesh::Mesh::build(v, e, &tags, Default::default())?;
                let report = gndg::mesh::validate_mesh(&mesh);
                println!(
                    "{}: {} vertices, {} elements, {} faces",
                    file.display(),
                    mesh.vertices.len(),
                    mesh.n_elems(),
                    mesh.faces.len()
                );
                print!("{report}");
                if !report.all_pass() {
                    return Err(Error::NonConforming("validation failed".into()));
                }
                Ok(())
            }
        },
        Command::Basis { sub } => match sub {
            BasisCmd::Info { k } => {
                let re = gndg::basis::reference_element(k)?;
                println!("order k = {k}");
                println!("nodes per element: {}", re.n_nodes);
                println!(
                    "interior cubature: {} points, exact to degree {}",
                    re.cub_pts.len(),
                    2 * k + 1
                );
                println!("face quadrature: {} Gauss points per face", re.face_t.len());
                println!(
                    "positivity rule: {} nodes, beta = {}, first Lobatto weight = {:.12}",
                    re.zs_pts.len(),
                    re.beta_gl,
                    re.omega1_gl
                );
                println!(
                    "positivity CFL factor (2/3) w1 = {:.12}",
                    2.0 / 3.0 * re.omega1_gl
                );
                Ok(())
            }
        },
        Command::Operator { sub } => match sub {
            OperatorCmd::Stats { config } => {
                let sc = load_scenario(&config, &[])?;
                let setup = Setup::build(sc)?;
                match &setup.sys {
                    Some(sys) => {
                        let n = sys.matrix.n();
                        let nnz = sys.matrix.nnz_blocks();
                        println!("dimension: {n}");
                        println!("pattern blocks: {nnz}");
                        println!(
                            "factor fill: {} blocks ({:.2}x)",
                            sys.factors.fill_blocks,
                            2.0 * sys.factors.fill_blocks as f64 / nnz as f64
                        );
                        println!("assembly: {:.3} s", sys.assembly_seconds);
                        println!("factorization: {:.3} s", sys.factorize_seconds);
                        println!("min pivot (scaled): {:.3e}", sys.factors.min_pivot);
                        Ok(())
                    }
                    None => {
                        println!("scenario runs without the dispersive correction");
                        Ok(())
                    }
                }
            }
        },
    }
}
