use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nipg::assembly::{assemble, AssemblyOptions};
use nipg::study::{emit_tables, run_study, write_markdown, StudyConfig};
use nipg::{build_mesh, BoundaryTreatment, CornerLayerProblem, DgSpace, MeshConfig};

#[derive(Parser)]
#[command(name = "nipg", version, about = "NIPG convergence studies on Shishkin meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (k, eps, N) sweep and write error tables.
    Study(StudyArgs),
    /// Assemble one system and write its matrix in coordinate format.
    Export(ExportArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Polynomial degrees, comma separated.
    #[arg(long)]
    k: Option<String>,
    /// Diffusion coefficients, comma separated.
    #[arg(long)]
    eps: Option<String>,
    /// Doubling chain of mesh sizes, comma separated.
    #[arg(long)]
    n: Option<String>,
    /// `direct` or `iterative`.
    #[arg(long)]
    solver: Option<String>,
    /// Gauss points per direction for assembly.
    #[arg(long)]
    quad_order: Option<String>,
    /// `weak` or `strong`.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_md: Option<PathBuf>,
    /// Write wall_ms as 0 for byte-identical reruns.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long)]
    strong: bool,
    #[arg(long)]
    out: PathBuf,
}

fn study(args: StudyArgs) -> nipg::Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    let overrides = [
        ("k", &args.k),
        ("eps", &args.eps),
        ("n", &args.n),
        ("solver", &args.solver),
        ("quad_order", &args.quad_order),
        ("boundary", &args.boundary),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(p) = args.out_csv {
        cfg.out_csv = Some(p);
    }
    if let Some(p) = args.out_md {
        cfg.out_md = Some(p);
    }
    if args.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    let report = run_study(&cfg)?;
    emit_tables(&report, &cfg)?;
    if cfg.out_md.is_none() {
        let stdout = std::io::stdout();
        write_markdown(&report, stdout.lock())?;
    }
    Ok(report.any_degraded())
}

fn export(args: ExportArgs) -> nipg::Result<()> {
    let mesh = build_mesh(MeshConfig::new(args.n, args.eps, args.k as f64 + 1.5, 2.0, 3.0))?;
    let space = DgSpace::new(mesh, args.k)?;
    let opts = AssemblyOptions {
        quad_points: None,
        boundary: if args.strong {
            BoundaryTreatment::Strong
        } else {
            BoundaryTreatment::Weak
        },
    };
    let system = assemble(&space, &CornerLayerProblem::new(args.eps), &opts)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    system.matrix.write_coordinate(&mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study(args) => study(args).map(|degraded| if degraded { 2 } else { 0 }),
        Command::Export(args) => export(args).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
