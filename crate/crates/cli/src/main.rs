//! Command-line front end: runs the built-in experiments (manufactured
//! convergence studies, lid-driven cavity, linear patch test) and
//! user-supplied meshes, writing tables and field files to the output
//! directory.
//!
//! Exit codes: 0 on success, 1 on failed checks or i/o errors, 2 on
//! configuration errors, 3 when the solver does not converge.

use clap::Parser;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use swg_stokes::analysis::divergence_residual;
use swg_stokes::assembly::dump_system;
use swg_stokes::cases::{self, StokesCase};
use swg_stokes::element::QuadratureRule;
use swg_stokes::mesh::{load_mesh, validate_mesh};
use swg_stokes::output;
use swg_stokes::run::{
    self, cell_centered_velocity, convergence_table, error_report, patch_outcome, run_case,
    run_case_on_mesh, run_case_perturbed, run_cavity, CaseRun, Mode, RunError,
};

#[derive(Parser, Debug)]
#[command(
    name = "swg-stokes",
    about = "Simplified weak Galerkin / finite difference solver for the 2D Stokes equations",
    long_about = None
)]
struct Args {
    /// Experiment to run: case1 | case2 | cavity | patch | mesh-file
    #[arg(long)]
    case: String,

    /// Grid resolution for single runs.
    #[arg(long)]
    n: Option<usize>,

    /// Comma-separated resolutions for convergence tables, e.g. 8,16,32,64.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,

    /// Stabilization parameter (4 gives the 5-point scheme).
    #[arg(long, default_value_t = 4.0)]
    kappa: f64,

    /// System construction route: swg | fd.
    #[arg(long, default_value = "swg")]
    mode: String,

    /// Load-vector quadrature: poly-deg2 | simpson-mid | fd.
    #[arg(long)]
    rule: Option<String>,

    /// Relative residual tolerance of the iterative solver
    /// (default 1e-10; 1e-12 for the patch and mesh-file verifications,
    /// whose pass threshold presumes negligible algebraic error).
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration cap (default: 20 times the system dimension).
    #[arg(long)]
    maxit: Option<usize>,

    /// Mesh file (JSON) for --case mesh-file.
    #[arg(long)]
    mesh: Option<PathBuf>,

    /// Perturbation amplitude for randomized quadrilateral meshes.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,

    /// Seed of the mesh perturbation generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for tables and fields.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Write the assembled system matrix (Matrix Market) to this path.
    #[arg(long)]
    dump_system: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Config(String),
    NotConverged(String),
    Failed(String),
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            RunError::Mesh(_)
            | RunError::Assembly(_)
            | RunError::Stencil(_)
            | RunError::FdNeedsGrid => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o error: {e}"))
    }
}

fn dispatch(args: &Args) -> Result<(), CliError> {
    let mode = Mode::parse(&args.mode)
        .ok_or_else(|| CliError::Config(format!("unknown mode '{}'", args.mode)))?;
    let rule = match &args.rule {
        Some(name) => QuadratureRule::parse(name)
            .ok_or_else(|| CliError::Config(format!("unknown rule '{name}'")))?,
        None => match mode {
            // The stencil route carries its own load rule; mirror it so that
            // swg --rule fd and fd mode produce identical systems.
            Mode::Fd => QuadratureRule::Fd,
            Mode::Swg => QuadratureRule::PolyDeg2,
        },
    };
    if args.perturb > 0.0 && mode == Mode::Fd {
        return Err(CliError::Config(
            "fd mode requires a uniform grid; drop --perturb or use --mode swg".into(),
        ));
    }
    std::fs::create_dir_all(&args.out_dir)?;

    match args.case.as_str() {
        "case1" | "case2" => {
            let case = if args.case == "case1" {
                cases::case1()
            } else {
                cases::case2()
            };
            run_manufactured(args, &case, mode, rule)
        }
        "cavity" => run_cavity_case(args, mode),
        "patch" => run_patch(args, rule),
        "mesh-file" => run_mesh_file(args, rule),
        other => Err(CliError::Config(format!(
            "unknown case '{other}' (expected case1 | case2 | cavity | patch | mesh-file)"
        ))),
    }
}

fn maybe_dump(args: &Args, run: &CaseRun) -> Result<(), CliError> {
    if let Some(path) = &args.dump_system {
        dump_system(&run.system, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_manufactured(
    args: &Args,
    case: &StokesCase,
    mode: Mode,
    rule: QuadratureRule,
) -> Result<(), CliError> {
    let tol = args.tol.unwrap_or(1e-10);
    let ns = args
        .ns
        .clone()
        .or_else(|| args.n.map(|n| vec![n]))
        .ok_or_else(|| CliError::Config("case1/case2 need --ns or --n".into()))?;

    if args.perturb > 0.0 {
        // Polygonal-mesh study: mesh-free error measures only.
        let mut rows = Vec::new();
        for &n in &ns {
            let run = run_case_perturbed(
                case,
                n,
                args.perturb,
                args.seed,
                args.kappa,
                rule,
                tol,
                args.maxit,
            )?;
            let tribar = run::trace_error_triple_bar(case, &run, args.kappa)?;
            let l2_s = swg_stokes::analysis::s_extension_l2_error(
                &run.mesh,
                &run.solution,
                &case.u,
                &case.v,
            )
            .map_err(RunError::from)?;
            let div = divergence_residual(&run.mesh, &run.solution).map_err(RunError::from)?;
            println!(
                "{} n={n} perturbed: tribar {:.3e}, s-extension L2 {:.3e}, div {:.1e} ({} iters)",
                case.name, tribar, l2_s, div, run.report.iterations
            );
            rows.push((n, tribar, l2_s, div));
            maybe_dump(args, &run)?;
        }
        let path = args.out_dir.join(format!("polygonal_{}.csv", case.name));
        std::fs::write(&path, output::polygonal_csv(&rows))?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let table = convergence_table(case, &ns, args.kappa, mode, rule, tol, args.maxit)?;
    let main = output::convergence_csv(&table);
    print!("{main}");
    let path = args.out_dir.join(format!("table_{}.csv", case.name));
    std::fs::write(&path, &main)?;
    let full = args.out_dir.join(format!("table_{}_full.csv", case.name));
    std::fs::write(&full, output::convergence_csv_full(&table))?;
    println!("wrote {} and {}", path.display(), full.display());

    if let Some(path) = &args.dump_system {
        // Dump the system of the last resolution in the study.
        let n = *ns.last().unwrap();
        let run = run_case(case, n, args.kappa, mode, rule, tol, args.maxit)?;
        dump_system(&run.system, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_fields(out_dir: &Path, stem: &str, run: &CaseRun) -> Result<(), CliError> {
    let vel = cell_centered_velocity(&run.mesh, &run.solution)?;
    let vtk = out_dir.join(format!("{stem}.vtk"));
    std::fs::write(&vtk, output::vtk_fields(&run.mesh, &run.solution, &vel))?;
    let csv = out_dir.join(format!("{stem}_traces.csv"));
    std::fs::write(&csv, output::trace_csv(&run.mesh, &run.solution))?;
    println!("wrote {} and {}", vtk.display(), csv.display());
    Ok(())
}

fn run_cavity_case(args: &Args, mode: Mode) -> Result<(), CliError> {
    let n = args.n.unwrap_or(32);
    let run = run_cavity(n, args.kappa, mode, args.tol.unwrap_or(1e-10), args.maxit)?;
    let div = divergence_residual(&run.mesh, &run.solution).map_err(RunError::from)?;
    println!(
        "cavity n={n}: {} iterations, relative residual {:.2e}, divergence residual {:.2e}",
        run.report.iterations, run.report.relative_residual, div
    );
    write_fields(&args.out_dir, "cavity", &run)?;
    maybe_dump(args, &run)?;
    Ok(())
}

fn run_patch(args: &Args, rule: QuadratureRule) -> Result<(), CliError> {
    let case = cases::patch();
    let n = args.n.unwrap_or(4);
    let tol = args.tol.unwrap_or(1e-12);
    let run = if args.perturb > 0.0 {
        run_case_perturbed(
            &case,
            n,
            args.perturb,
            args.seed,
            args.kappa,
            rule,
            tol,
            args.maxit,
        )?
    } else {
        run_case(&case, n, args.kappa, Mode::Swg, rule, tol, args.maxit)?
    };
    maybe_dump(args, &run)?;
    let outcome = patch_outcome(&case, &run);
    let pass = outcome.passes(1e-9);
    println!(
        "patch n={n}{}: max trace error {:.3e}, max pressure {:.3e} -> {}",
        if args.perturb > 0.0 {
            " (perturbed)"
        } else {
            ""
        },
        outcome.max_trace_error,
        outcome.max_pressure,
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed("patch test failed".into()))
    }
}

fn run_mesh_file(args: &Args, rule: QuadratureRule) -> Result<(), CliError> {
    let path = args
        .mesh
        .as_ref()
        .ok_or_else(|| CliError::Config("--case mesh-file needs --mesh <path>".into()))?;
    let mesh = load_mesh(path).map_err(|e| CliError::Config(e.to_string()))?;
    let diags = validate_mesh(&mesh);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("validation: {d}");
        }
        return Err(CliError::Config(format!(
            "mesh failed validation with {} finding(s)",
            diags.len()
        )));
    }
    println!(
        "mesh: {} cells, {} edges ({} boundary)",
        mesh.cells.len(),
        mesh.edges.len(),
        mesh.boundary_edges.len()
    );
    // Solve the linear patch problem on the user mesh: any sound mesh must
    // reproduce it to solver accuracy.
    let case = cases::patch();
    let run = run_case_on_mesh(
        &case,
        mesh,
        args.kappa,
        rule,
        args.tol.unwrap_or(1e-12),
        args.maxit,
    )?;
    maybe_dump(args, &run)?;
    let outcome = patch_outcome(&case, &run);
    let pass = outcome.passes(1e-9);
    println!(
        "patch verification: max trace error {:.3e}, max pressure {:.3e} -> {}",
        outcome.max_trace_error,
        outcome.max_pressure,
        if pass { "PASS" } else { "FAIL" }
    );
    let report = error_report(&case, &run, args.kappa);
    if let Ok(r) = report {
        println!("grid norms: u L2 {:.3e}, p L2 {:.3e}", r.l2_u, r.l2_p);
    }
    write_fields(&args.out_dir, "mesh", &run)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed("patch verification failed".into()))
    }
}
