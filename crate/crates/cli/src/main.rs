use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcflow_core::beltrami::{BeltramiError, BeltramiField};
use qcflow_core::flow::FlowOptions;
use qcflow_core::mesh::load_obj;
use qcflow_core::metric::Geometry;
use qcflow_core::pipeline::{self, Flattened, PipelineError, Preset};

#[derive(Parser)]
#[command(name = "qcflow", version, about = "Conformal and quasi-conformal mesh parameterization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conformally flatten a mesh to the preset's target shape.
    Flatten(FlattenArgs),
    /// Quasi-conformal map with a prescribed Beltrami coefficient.
    Qcmap {
        #[command(flatten)]
        flatten: FlattenArgs,
        /// Per-vertex Beltrami coefficient (JSON).
        #[arg(long)]
        mu: PathBuf,
    },
    /// Beltrami coefficient of the map between two parameterized OBJs.
    EstimateMu {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        dst: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-vertex CSV of re, im, arg, |mu| and dilation.
        #[arg(long)]
        hist: Option<PathBuf>,
    },
    /// Beltrami coefficient of g∘f from mu_f, mu_g and the map f.
    ComposeMu {
        #[arg(long)]
        mu_f: PathBuf,
        #[arg(long)]
        mu_g: PathBuf,
        #[arg(long)]
        f_src: PathBuf,
        #[arg(long)]
        f_dst: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalized L1 distance between two maps of the same surface.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// The surface, for areas and the bounding-box diagonal.
        #[arg(long)]
        mesh: PathBuf,
        /// Exit with status 1 unless the distance is below this.
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
    /// Topology and metric sanity report.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Euclidean,
    Hyperbolic,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Rectangle,
    Annulus,
    Disk,
    ClosedFlat,
    ClosedHyperbolic,
}

#[derive(Args)]
struct FlattenArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the geometry the preset requires.
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Rectangle corner vertex ids (0-based), e.g. 0,32,1088,1056.
    #[arg(long, value_delimiter = ',')]
    corners: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    /// Output OBJ with the layout as texture coordinates.
    #[arg(long)]
    out: PathBuf,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_parse_error() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<BeltramiError> for Failure {
    fn from(e: BeltramiError) -> Self {
        PipelineError::from(e).into()
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn preset(args: &FlattenArgs) -> Result<Preset, Failure> {
    let preset = match args.preset {
        PresetArg::Rectangle => {
            let corners = args
                .corners
                .as_deref()
                .ok_or_else(|| Failure::Usage("--preset rectangle needs --corners i,j,k,l".into()))?;
            let corners: [usize; 4] = corners
                .try_into()
                .map_err(|_| Failure::Usage(format!("--corners needs 4 vertex ids, got {}", corners.len())))?;
            Preset::Rectangle { corners }
        }
        PresetArg::Annulus => Preset::Annulus,
        PresetArg::Disk => Preset::Disk,
        PresetArg::ClosedFlat => Preset::ClosedFlat,
        PresetArg::ClosedHyperbolic => Preset::ClosedHyperbolic,
    };
    if args.corners.is_some() && !matches!(preset, Preset::Rectangle { .. }) {
        return Err(Failure::Usage("--corners only applies to --preset rectangle".into()));
    }
    Ok(preset)
}

fn options(args: &FlattenArgs) -> FlowOptions {
    FlowOptions {
        epsilon: args.eps,
        max_iterations: args.max_iterations,
        ..FlowOptions::default()
    }
}

fn emit(out: &Flattened, args: &FlattenArgs) -> Result<(), Failure> {
    write(&args.out, &out.to_obj())?;
    let report = out.report_json();
    match &args.report {
        Some(path) => write(path, &report),
        None => {
            println!("{report}");
            Ok(())
        }
    }
}

fn flatten(args: &FlattenArgs, mu: Option<&Path>) -> Result<(), Failure> {
    let preset = preset(args)?;
    let geometry = match args.geometry {
        Some(GeometryArg::Euclidean) => Geometry::Euclidean,
        Some(GeometryArg::Hyperbolic) => Geometry::Hyperbolic,
        None => preset.geometry(),
    };
    let mesh = load_obj(&args.input).map_err(PipelineError::from)?;
    let out = match mu {
        None => pipeline::flatten(&mesh, &preset, geometry, options(args))?,
        Some(path) => {
            if geometry != Geometry::Euclidean {
                return Err(Failure::Validation("qcmap needs euclidean geometry".into()));
            }
            let field = BeltramiField::from_json(&read(path)?)?;
            pipeline::qcmap(&mesh, &field, &preset, options(args))?
        }
    };
    emit(&out, args)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Flatten(args) => flatten(&args, None),
        Command::Qcmap { flatten: args, mu } => flatten(&args, Some(&mu)),
        Command::EstimateMu { src, dst, out, hist } => {
            let (mesh, z) = pipeline::load_parameterized(&src)?;
            let (other, w) = pipeline::load_parameterized(&dst)?;
            pipeline::same_connectivity(&mesh, &other)?;
            let est = pipeline::estimate(&mesh, &z, &w)?;
            if !est.reversed.is_empty() {
                eprintln!("warning: map reverses orientation on {} face(s)", est.reversed.len());
            }
            if let Some(hist) = hist {
                write(&hist, &pipeline::histogram_csv(&est.vertex_mu))?;
            }
            write(&out, &est.vertex_field()?.to_json())
        }
        Command::ComposeMu {
            mu_f,
            mu_g,
            f_src,
            f_dst,
            out,
        } => {
            let mu_f = BeltramiField::from_json(&read(&mu_f)?)?;
            let mu_g = BeltramiField::from_json(&read(&mu_g)?)?;
            let (mesh, z) = pipeline::load_parameterized(&f_src)?;
            let (other, w) = pipeline::load_parameterized(&f_dst)?;
            pipeline::same_connectivity(&mesh, &other)?;
            let composed = pipeline::compose(&mesh, &mu_f, &mu_g, &z, &w)?;
            write(&out, &composed.to_json())
        }
        Command::Compare { a, b, mesh, threshold } => {
            let (mesh_a, pa) = pipeline::load_parameterized(&a)?;
            let (mesh_b, pb) = pipeline::load_parameterized(&b)?;
            let surface = load_obj(&mesh).map_err(PipelineError::from)?;
            pipeline::same_connectivity(&surface, &mesh_a)?;
            pipeline::same_connectivity(&surface, &mesh_b)?;
            let report = pipeline::compare(&surface, &pa, &pb)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.distance < threshold {
                Ok(())
            } else {
                Err(Failure::Validation(format!(
                    "distance {:e} is not below {threshold:e}",
                    report.distance
                )))
            }
        }
        Command::Check { input } => {
            let mesh = load_obj(&input).map_err(PipelineError::from)?;
            let report = pipeline::check(&mesh)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
