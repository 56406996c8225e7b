//! The sweep subcommand: solve a grid of free-constant values, realize each
//! solution under each pose, and emit meshes, images, and one CSV report.

use crate::{g17, parse, CliError, CliResult};
use clap::Args;
use patchshade::{
    delta_error, derive_from_scene, genericity_score_with, integrate_heights, render_lambertian,
    shadow_count, solve_generic, world_normal_field, GridSpec, ImageTensors, PatchGrid,
    ScenePose, ScoreOptions,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub(crate) struct SweepArgs {
    /// Analytic scene: cylinder[:R], sphere[:R], or poly:...
    #[arg(long)]
    scene: String,
    /// Unit light direction x,y,z (normalized if needed)
    #[arg(long, default_value = "0,0.6,0.8")]
    light: String,
    /// Taylor order of the image model
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Patch radius
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    /// Samples per grid axis
    #[arg(long, default_value_t = 65)]
    grid: usize,
    /// Tie c1 = c2 over an inclusive range lo:hi:steps
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    diagonal: Option<String>,
    /// c1 range lo:hi:steps (or a single value)
    #[arg(long, default_value = "0:1:5")]
    c1: String,
    /// c2 range lo:hi:steps (or a single value)
    #[arg(long, default_value = "0:1:5")]
    c2: String,
    /// Poses: `default` or `slant,tilt,spin;...`
    #[arg(long, default_value = "default")]
    poses: String,
    /// Noise scale of the posterior score
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Include the zeroth-order column in the scored stack
    #[arg(long = "include-zeroth-beta")]
    include_zeroth_beta: bool,
    /// Skip pointwise renormalization before rendering/integration
    #[arg(long = "no-renormalize")]
    no_renormalize: bool,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

struct Cell {
    ci: usize,
    pi: usize,
    c1: f64,
    c2: f64,
    pose: (f64, f64, f64),
}

struct CellOutcome {
    row: String,
}

pub(crate) fn run(args: SweepArgs) -> CliResult<()> {
    let scene = parse::scene(&args.scene)?;
    let light = parse::unit_light(&args.light)?;
    let pose_list = parse::poses(&args.poses)?;
    let constants: Vec<(f64, f64)> = match &args.diagonal {
        Some(spec) => parse::range(spec)?.into_iter().map(|c| (c, c)).collect(),
        None => {
            let c1s = parse::range(&args.c1)?;
            let c2s = parse::range(&args.c2)?;
            c1s.iter()
                .flat_map(|&a| c2s.iter().map(move |&b| (a, b)))
                .collect()
        }
    };
    if args.grid < 3 {
        return Err(CliError::Usage("--grid must be at least 3".into()));
    }
    if !(args.radius > 0.0) {
        return Err(CliError::Usage("--radius must be positive".into()));
    }

    std::fs::create_dir_all(&args.out).map_err(patchshade::Error::from)?;

    let spec = GridSpec {
        n: args.grid,
        radius: args.radius,
    };
    let f = scene.height_jet(args.order + 1)?;
    let it = derive_from_scene(&f, &light, args.order)?;

    // truth image sampled exactly; the Taylor deviation is pose independent
    let truth = PatchGrid::from_fn_scalar(args.grid, args.grid, spec.spacing(), |x, y| {
        scene.image(x, y, &light)
    })?;
    let delta_max = delta_error(&it, &truth)?.max;

    let cells: Vec<Cell> = constants
        .iter()
        .enumerate()
        .flat_map(|(ci, &(c1, c2))| {
            pose_list.iter().enumerate().map(move |(pi, &pose)| Cell {
                ci,
                pi,
                c1,
                c2,
                pose,
            })
        })
        .collect();

    let score_opts = ScoreOptions {
        sigma: args.sigma,
        include_zeroth: args.include_zeroth_beta,
    };
    let renormalize = !args.no_renormalize;
    let run_cell = |cell: &Cell| -> CliResult<CellOutcome> {
        run_one(cell, &it, &spec, &score_opts, renormalize, delta_max, &args.out)
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<CliResult<CellOutcome>> = {
        use rayon::prelude::*;
        cells.par_iter().map(run_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<CliResult<CellOutcome>> = cells.iter().map(run_cell).collect();

    let mut csv = String::from(
        "c1,c2,slant,tilt,spin,eps_max,delta_max,detA,rank,curl_residual,shadow_count\n",
    );
    for outcome in outcomes {
        csv.push_str(&outcome?.row);
    }
    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, csv).map_err(patchshade::Error::from)?;
    println!(
        "wrote {} cells ({} parameter pairs x {} poses) to {}",
        cells.len(),
        constants.len(),
        pose_list.len(),
        args.out.display()
    );
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn run_one(
    cell: &Cell,
    it: &ImageTensors,
    spec: &GridSpec,
    score_opts: &ScoreOptions,
    renormalize: bool,
    delta_max: f64,
    out_dir: &Path,
) -> CliResult<CellOutcome> {
    let sol = solve_generic(it, cell.c1, cell.c2)?;
    let report = genericity_score_with(&sol, score_opts);
    let eps = sol.epsilon_error(spec.radius, spec.n);

    let (slant, tilt, spin) = cell.pose;
    let pose = ScenePose::from_angles(slant, tilt, spin);
    let field = world_normal_field(&sol, &pose, spec, renormalize)?;
    let light = pose.world_light(sol.i0())?;
    let image = render_lambertian(&field, &light)?;
    let shadows = shadow_count(&image);
    let integration = integrate_heights(&field)?;

    let image_path = out_dir.join(format!("image_c{:03}_p{:02}.grid", cell.ci, cell.pi));
    image.write(&image_path)?;
    let obj_path = out_dir.join(format!("mesh_c{:03}_p{:02}.obj", cell.ci, cell.pi));
    patchshade::export_mesh(&integration.heights)?.write_obj_file(&obj_path)?;

    let mut row = String::new();
    writeln!(
        row,
        "{},{},{},{},{},{},{},{},{},{},{}",
        g17(cell.c1),
        g17(cell.c2),
        g17(slant),
        g17(tilt),
        g17(spin),
        g17(eps.max),
        g17(delta_max),
        g17(report.det_a),
        report.rank_estimate,
        g17(integration.curl_residual),
        shadows
    )
    .unwrap();
    Ok(CellOutcome { row })
}
