use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use surface_nzt::analysis::jump_mean_defect;
use surface_nzt::assembly::{assemble_matrix, face_bases, Terms};
use surface_nzt::experiments::{base_mesh, report_csv, run_experiment_with, CaseKind, ExperimentSpec, MeshSource};
use surface_nzt::piola_dofs::DofSystem;
use surface_nzt::solver::Preconditioner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pc {
    /// V-cycle over the refinement hierarchy
    Multilevel,
    Diagonal,
    /// 3×3 vertex blocks
    Block,
    None,
}

/// Convergence tables for stabilized NZT elements on the sphere, the torus
/// and an implicit surface.
#[derive(Debug, Parser)]
#[command(name = "surface-nzt", version)]
struct Args {
    /// sphere, torus or implicit
    #[arg(long)]
    case: CaseKind,
    /// Refinement levels, both ends included: `a..b`, `a..=b`, `a-b` or `a`
    #[arg(long, value_parser = parse_levels)]
    levels: Option<RangeInclusive<usize>>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Level-0 mesh as OFF; vertices are projected onto the surface
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Write the table here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for per-level VTK files
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Run randomized operator checks on the level-0 mesh first
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Pc::Multilevel)]
    preconditioner: Pc,
}

fn parse_levels(s: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad level '{t}': {e}"));
    let (a, b) = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?, num(b)?)
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?, num(b)?)
    } else if let Some((a, b)) = s.split_once('-') {
        (num(a)?, num(b)?)
    } else {
        let a = num(s)?;
        (a, a)
    };
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok(a..=b)
}

fn spec_from(args: &Args) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(args.case);
    if let Some(l) = &args.levels {
        spec.levels = l.clone();
    }
    if let Some(t) = args.rel_tol {
        spec.solver.rel_tol = t;
    }
    spec.solver.max_iter = args.max_iter.or(spec.solver.max_iter);
    if let Some(m) = &args.mesh {
        spec.mesh = MeshSource::Off(m.clone());
    }
    spec.csv = args.csv.clone();
    spec.vtk = args.vtk.clone();
    spec.multilevel = args.preconditioner == Pc::Multilevel;
    spec.solver.preconditioner = match args.preconditioner {
        Pc::Multilevel | Pc::Diagonal => Preconditioner::Diagonal,
        Pc::Block => Preconditioner::VertexBlock,
        Pc::None => Preconditioner::None,
    };
    spec
}

/// Rayleigh quotients of `A` and edge means of the gradient jump for random
/// coefficient vectors.
fn random_checks(spec: &ExperimentSpec, seed: u64) -> Result<(), String> {
    let case = spec.case.manufactured();
    let mesh = base_mesh(spec.case, &spec.mesh, &case).map_err(|e| e.to_string())?;
    let dofs = DofSystem::new(&mesh).map_err(|e| e.to_string())?;
    let bases = face_bases(&mesh).map_err(|e| e.to_string())?;
    let a = assemble_matrix(&mesh, &dofs, &bases, Terms::ALL);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rayleigh = f64::INFINITY;
    let mut jump: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..dofs.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ax = a.matvec(&x);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xax: f64 = x.iter().zip(&ax).map(|(p, q)| p * q).sum();
        rayleigh = rayleigh.min(xax / (a.norm_inf() * xx));
        jump = jump.max(jump_mean_defect(&mesh, &dofs, &bases, &x));
    }
    eprintln!("checks (seed {seed}): min x'Ax/(|A| |x|^2) = {rayleigh:.3e}, max edge jump mean = {jump:.3e}");
    if rayleigh < -1e-10 || jump > 1e-10 {
        return Err("randomized operator checks failed".into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = spec_from(&args);
    if let Some(seed) = args.seed {
        if let Err(e) = random_checks(&spec, seed) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = run_experiment_with(&spec, |report, st| {
        let row = report.rows.last().expect("row per level");
        eprintln!(
            "level {}: {} dofs, {} iterations, residual {:.2e}, {:.1} s",
            st.level, row.dofs, st.iterations, st.relative_residual, st.seconds
        );
    });
    match result {
        Ok(out) => {
            if spec.csv.is_none() {
                print!("{}", report_csv(&out.report));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if spec.csv.is_none() && !e.partial.rows.is_empty() {
                print!("{}", report_csv(&e.partial));
            }
            ExitCode::FAILURE
        }
    }
}
