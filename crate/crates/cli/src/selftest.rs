//! Randomized invariant suite behind `verify --self-test`.

use crate::{report_check, CliError, CliResult};
use nalgebra::Vector3;
use patchshade::{
    derive_from_scene, genericity_score, height_to_normal_jets, normalization_row,
    pose_from_scene, render_lambertian, solve_generic, solve_with_rows, world_normal_field,
    GridSpec, Jet2, PatchGrid, Scene, ScenePose, UnfoldedRows,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_height_jet(rng: &mut ChaCha8Rng, order: usize) -> Jet2 {
    let mut f = Jet2::zero(order);
    for d in 1..=order {
        for b in 0..=d {
            let damp = (1..=d).fold(1.0, |acc, k| acc * k as f64);
            f.set_coeff(d - b, b, rng.gen_range(-0.8..0.8) / damp);
        }
    }
    f
}

fn random_unit_light(rng: &mut ChaCha8Rng, n0: &Vector3<f64>) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() < 1e-3 {
            continue;
        }
        let l = v.normalize();
        if l.dot(n0).abs() < 0.9 && l.dot(n0).abs() > 0.05 {
            return l;
        }
    }
}

fn true_rows(f: &Jet2, light: &Vector3<f64>, n: usize) -> Vec<UnfoldedRows> {
    let normal = height_to_normal_jets(f).unwrap();
    let tensors = normal.to_tensors(n).unwrap();
    let n0 = tensors[0].vector_entry(0, 0);
    let n0 = n0 / n0.norm();
    let p = pose_from_scene(&n0, light).unwrap();
    tensors[1..]
        .iter()
        .map(|t| UnfoldedRows::from_vector_tensor(&t.rotate(&p).unwrap()).unwrap())
        .collect()
}

fn rows_close(got: &[f64], want: &[f64], rel: f64) -> bool {
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    got.iter()
        .zip(want)
        .all(|(g, w)| (g - w).abs() <= rel * scale)
}

pub(crate) fn run() -> CliResult<()> {
    let mut failures = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xBAD5EED);

    // unit-length rows against the jet oracle
    let mut ok = true;
    for trial in 0..100 {
        let order = 2 + trial % 5;
        let f = random_height_jet(&mut rng, order + 1);
        let n0 = height_to_normal_jets(&f).unwrap().eval(0.0, 0.0);
        let n0 = n0 / n0.norm();
        let light = random_unit_light(&mut rng, &n0);
        let rows = true_rows(&f, &light, order);
        for j in 2..=order {
            let got = normalization_row(&rows[..j - 1], j).unwrap();
            if !rows_close(&got, &rows[j - 1].r1, 1e-9) {
                ok = false;
            }
        }
    }
    report_check("normalization rows match jet-differentiated truth", ok, &mut failures);

    // solved rows reproduce the image coefficients exactly
    let mut ok = true;
    for _ in 0..20 {
        let f = random_height_jet(&mut rng, 6);
        let n0 = height_to_normal_jets(&f).unwrap().eval(0.0, 0.0);
        let n0 = n0 / n0.norm();
        let light = random_unit_light(&mut rng, &n0);
        let it = match derive_from_scene(&f, &light, 5) {
            Ok(it) => it,
            Err(_) => continue,
        };
        let sol = solve_generic(&it, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).unwrap();
        let s = (1.0 - it.i0() * it.i0()).sqrt();
        for j in 1..=5 {
            let rows = sol.row(j);
            for b in 0..=j {
                let lhs = it.i0() * rows.r1[b] + s * rows.r2[b];
                if (lhs - it.tensor(j).scalar_entry(j - b, b)).abs() > 1e-12 {
                    ok = false;
                }
            }
        }
    }
    report_check("solved rows reproduce the image coefficients", ok, &mut failures);

    // feeding the true third rows recovers the true first two rows
    let mut ok = true;
    let light = Vector3::new(0.0, 0.6, 0.8);
    for scene in [Scene::cylinder(1.0), Scene::sphere_cap(1.0)] {
        let f = scene.height_jet(7).unwrap();
        let rows = true_rows(&f, &light, 5);
        let it = derive_from_scene(&f, &light, 5).unwrap();
        let user: Vec<Vec<f64>> = rows.iter().map(|r| r.r3.clone()).collect();
        let sol = solve_with_rows(&it, &user).unwrap();
        for j in 1..=5 {
            if !rows_close(&sol.row(j).r1, &rows[j - 1].r1, 1e-9)
                || !rows_close(&sol.row(j).r2, &rows[j - 1].r2, 1e-9)
            {
                ok = false;
            }
        }
    }
    report_check("true third rows recover the true projections", ok, &mut failures);

    // rank separation between the constrained family and free rows
    let mut rank2 = true;
    let mut rank3 = 0usize;
    let trials = 25usize;
    for _ in 0..trials {
        let f = random_height_jet(&mut rng, 5);
        let n0 = height_to_normal_jets(&f).unwrap().eval(0.0, 0.0);
        let n0 = n0 / n0.norm();
        let light = random_unit_light(&mut rng, &n0);
        let it = match derive_from_scene(&f, &light, 4) {
            Ok(it) => it,
            Err(_) => continue,
        };
        let g = solve_generic(&it, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).unwrap();
        if genericity_score(&g).rank_estimate != 2 {
            rank2 = false;
        }
        let rows: Vec<Vec<f64>> = (1..=4)
            .map(|j| (0..=j).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let free = solve_with_rows(&it, &rows).unwrap();
        if genericity_score(&free).rank_estimate == 3 {
            rank3 += 1;
        }
    }
    report_check("constrained solutions are rank 2", rank2, &mut failures);
    report_check(
        "free third rows are full rank in >= 95% of trials",
        rank3 * 100 >= trials * 95,
        &mut failures,
    );

    // rendering is pose invariant
    let scene = Scene::cylinder(1.0);
    let f = scene.height_jet(6).unwrap();
    let it = derive_from_scene(&f, &light, 5).unwrap();
    let sol = solve_generic(&it, 0.5, 0.5).unwrap();
    let spec = GridSpec { n: 17, radius: 0.3 };
    let mut reference: Option<PatchGrid> = None;
    let mut ok = true;
    for _ in 0..5 {
        let pose = ScenePose::from_angles(
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let field = world_normal_field(&sol, &pose, &spec, true).unwrap();
        let img = render_lambertian(&field, &pose.world_light(sol.i0()).unwrap()).unwrap();
        match &reference {
            None => reference = Some(img),
            Some(r) => {
                if r.scalar_values()
                    .iter()
                    .zip(img.scalar_values())
                    .any(|(a, b)| (a - b).abs() > 1e-12)
                {
                    ok = false;
                }
            }
        }
    }
    report_check("rendered image is pose invariant", ok, &mut failures);

    // integration reproduces a discretely integrable field
    let fj = |x: f64, y: f64| 0.2 * x * x + 0.1 * x * y - 0.3 * y * y;
    let fx = |x: f64, y: f64| 0.4 * x + 0.1 * y;
    let fy = |x: f64, y: f64| 0.1 * x - 0.6 * y;
    let grid = PatchGrid::from_fn_vector(25, 25, 0.025, |x, y| {
        Vector3::new(-fx(x, y), -fy(x, y), 1.0).normalize()
    })
    .unwrap();
    let normals = patchshade::NormalGrid {
        grid,
        renormalized: true,
        visible: true,
    };
    let integration = patchshade::integrate_heights(&normals).unwrap();
    let (cx, cy) = integration.heights.center_index();
    let (x0, y0) = integration.heights.coord(cx, cy);
    let mut ok = integration.curl_residual < 1e-10;
    for iy in 0..25 {
        for ix in 0..25 {
            let (x, y) = integration.heights.coord(ix, iy);
            if (integration.heights.scalar_at(ix, iy) - (fj(x, y) - fj(x0, y0))).abs() > 1e-9 {
                ok = false;
            }
        }
    }
    report_check("integration reproduces integrable gradients", ok, &mut failures);

    if failures > 0 {
        Err(CliError::Usage(format!("{failures} self-test(s) failed")))
    } else {
        println!("all self-tests passed");
        Ok(())
    }
}
