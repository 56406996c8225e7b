//! Command-line driver: derive image tensors, solve for normal fields,
//! render and integrate chosen poses, sweep solution families, and verify
//! the solver invariants.

mod parse;
mod selftest;
mod sweep;

use clap::{Args, Parser, Subcommand};
use patchshade::{
    derive_from_scene, fit_from_samples, genericity_score_with, integrate_heights,
    render_lambertian, shadow_count, solve_generic, solve_with_rows, world_normal_field,
    CanonicalSolution, GridSpec, ImageTensors, PatchGrid, ScoreOptions,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "patchshade",
    about = "Families of Taylor-polynomial surface solutions for shaded Lambertian patches",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Produce image derivative tensors from a scene or a sampled grid
    Derive(DeriveArgs),
    /// Solve for a normal field from image tensors
    Solve(SolveArgs),
    /// Render a solution under a chosen pose
    Render(RenderArgs),
    /// Integrate a solution to heights and export a mesh
    Integrate(IntegrateArgs),
    /// Sweep a family of solutions and poses into meshes, images, and a CSV
    Sweep(sweep::SweepArgs),
    /// Check solver invariants on a solution file or with random self-tests
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DeriveArgs {
    /// Analytic scene: cylinder[:R], sphere[:R], or poly:c00,c10,c01,c20,...
    #[arg(long, conflicts_with = "input")]
    scene: Option<String>,
    /// Unit light direction x,y,z (normalized if needed)
    #[arg(long, default_value = "0,0.6,0.8")]
    light: String,
    /// Sampled image grid to fit instead of an analytic scene
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Taylor order of the image model
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Output image tensors JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Input image tensors JSON
    #[arg(long = "in")]
    input: PathBuf,
    /// First free constant of the rank-2 family
    #[arg(long, default_value_t = 0.5)]
    c1: f64,
    /// Second free constant of the rank-2 family
    #[arg(long, default_value_t = 0.5)]
    c2: f64,
    /// Third rows supplied verbatim (tensor exchange JSON, orders 1..=n);
    /// overrides --c1/--c2
    #[arg(long)]
    r3: Option<PathBuf>,
    /// Noise scale of the posterior score
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Include the zeroth-order column in the scored stack
    #[arg(long = "include-zeroth-beta")]
    include_zeroth_beta: bool,
    /// Output solution JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Input solution JSON
    #[arg(long = "in")]
    input: PathBuf,
    /// Pose angles slant,tilt,spin in radians
    #[arg(long, default_value = "0,0,0")]
    pose: String,
    /// Samples per grid axis
    #[arg(long, default_value_t = 65)]
    grid: usize,
    /// Patch radius
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    /// Skip pointwise renormalization of the evaluated normals
    #[arg(long = "no-renormalize")]
    no_renormalize: bool,
    /// Output image grid file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Input solution JSON
    #[arg(long = "in")]
    input: PathBuf,
    /// Pose angles slant,tilt,spin in radians
    #[arg(long, default_value = "0,0,0")]
    pose: String,
    /// Samples per grid axis
    #[arg(long, default_value_t = 65)]
    grid: usize,
    /// Patch radius
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    /// Skip pointwise renormalization of the evaluated normals
    #[arg(long = "no-renormalize")]
    no_renormalize: bool,
    /// Output base path: writes BASE.heights.grid and BASE.obj
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Solution file to check
    #[arg(long = "in", conflicts_with = "self_test")]
    input: Option<PathBuf>,
    /// Run the randomized invariant suite instead
    #[arg(long = "self-test")]
    self_test: bool,
    /// Patch radius for the reported unit-length deviation
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
}

/// Failure modes mapped to exit codes: usage/validation -> 1, numerical
/// degeneracy -> 2.
pub(crate) enum CliError {
    Usage(String),
    Core(patchshade::Error),
}

impl From<patchshade::Error> for CliError {
    fn from(e: patchshade::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn report(&self) -> (String, u8) {
        match self {
            CliError::Usage(msg) => (msg.clone(), 1),
            CliError::Core(e) => (e.to_string(), if e.is_degenerate() { 2 } else { 1 }),
        }
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Derive(args) => run_derive(args),
        Command::Solve(args) => run_solve(args),
        Command::Render(args) => run_render(args),
        Command::Integrate(args) => run_integrate(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Verify(args) => run_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (msg, code) = e.report();
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run_derive(args: DeriveArgs) -> CliResult<()> {
    let it = match (&args.scene, &args.input) {
        (Some(scene_spec), None) => {
            let scene = parse::scene(scene_spec)?;
            let light = parse::unit_light(&args.light)?;
            let f = scene.height_jet(args.order + 1)?;
            derive_from_scene(&f, &light, args.order)?
        }
        (None, Some(path)) => {
            let grid = PatchGrid::read(path)?;
            let fit = fit_from_samples(&grid, args.order)?;
            println!("fit residual rms: {:.3e}", fit.residual_rms);
            println!("fit condition:    {:.3e}", fit.condition);
            if fit.ill_conditioned {
                println!("warning: fit is ill conditioned");
            }
            fit.tensors
        }
        _ => {
            return Err(CliError::Usage(
                "derive needs exactly one of --scene or --in".into(),
            ))
        }
    };
    it.write_json(&args.out)?;
    println!("i0: {}", it.i0());
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_solve(args: SolveArgs) -> CliResult<()> {
    let it = ImageTensors::read_json(&args.input)?;
    let sol = match &args.r3 {
        Some(path) => {
            let tensors = patchshade::read_tensor_file(path)?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut sorted = tensors;
            sorted.sort_by_key(|t| t.order());
            for (idx, t) in sorted.iter().enumerate() {
                if t.order() != idx + 1 || !t.is_scalar() {
                    return Err(CliError::Usage(format!(
                        "--r3 file must hold scalar tensors of orders 1..={}",
                        it.order()
                    )));
                }
                rows.push(t.scalar_entries().to_vec());
            }
            solve_with_rows(&it, &rows)?
        }
        None => solve_generic(&it, args.c1, args.c2)?,
    };
    sol.write_json(&args.out)?;
    let report = genericity_score_with(
        &sol,
        &ScoreOptions {
            sigma: args.sigma,
            include_zeroth: args.include_zeroth_beta,
        },
    );
    println!("det A:          {:.6e}", report.det_a);
    println!("rank estimate:  {}", report.rank_estimate);
    println!(
        "singular values: {:.6e} {:.6e} {:.6e}",
        report.singular_values[0], report.singular_values[1], report.singular_values[2]
    );
    println!("fidelity:       {:.6e}", report.fidelity);
    println!("log genericity: {:.6e}", report.log_genericity);
    println!("posterior:      {:.6e}", report.posterior_score);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn load_posed_field(
    input: &PathBuf,
    pose_spec: &str,
    grid: usize,
    radius: f64,
    renormalize: bool,
) -> CliResult<(CanonicalSolution, patchshade::ScenePose, patchshade::NormalGrid)> {
    let sol = CanonicalSolution::read_json(input)?;
    let pose = parse::pose(pose_spec)?;
    if grid < 3 {
        return Err(CliError::Usage("--grid must be at least 3".into()));
    }
    if !(radius > 0.0) {
        return Err(CliError::Usage("--radius must be positive".into()));
    }
    let spec = GridSpec { n: grid, radius };
    let field = world_normal_field(&sol, &pose, &spec, renormalize)?;
    Ok((sol, pose, field))
}

fn run_render(args: RenderArgs) -> CliResult<()> {
    let (sol, pose, field) = load_posed_field(
        &args.input,
        &args.pose,
        args.grid,
        args.radius,
        !args.no_renormalize,
    )?;
    let light = pose.world_light(sol.i0())?;
    let image = render_lambertian(&field, &light)?;
    image.write(&args.out)?;
    println!("shadow samples: {}", shadow_count(&image));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_integrate(args: IntegrateArgs) -> CliResult<()> {
    let (_, _, field) = load_posed_field(
        &args.input,
        &args.pose,
        args.grid,
        args.radius,
        !args.no_renormalize,
    )?;
    let integration = integrate_heights(&field)?;
    let heights_path = args.out.with_extension("heights.grid");
    let obj_path = args.out.with_extension("obj");
    integration.heights.write(&heights_path)?;
    patchshade::export_mesh(&integration.heights)?.write_obj_file(&obj_path)?;
    println!("curl residual: {:.6e}", integration.curl_residual);
    println!("wrote {}", heights_path.display());
    println!("wrote {}", obj_path.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> CliResult<()> {
    if args.self_test {
        return selftest::run();
    }
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("verify needs --in FILE or --self-test".into()))?;
    let sol = CanonicalSolution::read_json(path)?;
    let mut failures = 0usize;

    let r1_first = &sol.row(1).r1;
    report_check(
        "first-order normalization row is zero",
        r1_first.iter().all(|v| *v == 0.0),
        &mut failures,
    );

    if let (Some(c1), Some(c2)) = (sol.c1(), sol.c2()) {
        let mut ok = true;
        for rows in sol.rows() {
            for b in 0..=rows.order() {
                if (rows.r3[b] - (c1 * rows.r1[b] + c2 * rows.r2[b])).abs() > 1e-12 {
                    ok = false;
                }
            }
        }
        report_check("third rows equal c1 r1 + c2 r2", ok, &mut failures);
    }

    let report = patchshade::genericity_score(&sol);
    report_check(
        "observation fidelity is zero",
        report.fidelity <= 1e-10,
        &mut failures,
    );
    println!("rank estimate: {}", report.rank_estimate);
    println!("det A:         {:.6e}", report.det_a);
    let eps = sol.epsilon_error(args.radius, 65);
    println!(
        "unit-length deviation over radius {}: max {:.3e}, rms {:.3e}",
        args.radius, eps.max, eps.rms
    );

    if failures > 0 {
        Err(CliError::Usage(format!("{failures} invariant check(s) failed")))
    } else {
        Ok(())
    }
}

pub(crate) fn report_check(name: &str, ok: bool, failures: &mut usize) {
    if ok {
        println!("PASS {name}");
    } else {
        println!("FAIL {name}");
        *failures += 1;
    }
}

pub(crate) fn g17(x: f64) -> String {
    format!("{x:.16e}")
}
