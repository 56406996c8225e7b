//! Flag-value parsers shared by the subcommands.

use crate::{CliError, CliResult};
use nalgebra::Vector3;
use patchshade::{Jet2, Scene, ScenePose};

pub(crate) fn floats(spec: &str, sep: char) -> CliResult<Vec<f64>> {
    spec.split(sep)
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("malformed number {s:?} in {spec:?}")))
        })
        .collect()
}

/// `x,y,z`, normalized to unit length.
pub(crate) fn unit_light(spec: &str) -> CliResult<Vector3<f64>> {
    let v = floats(spec, ',')?;
    if v.len() != 3 {
        return Err(CliError::Usage(format!("--light needs x,y,z, got {spec:?}")));
    }
    let l = Vector3::new(v[0], v[1], v[2]);
    let norm = l.norm();
    if norm < 1e-9 {
        return Err(CliError::Usage("--light must be a nonzero vector".into()));
    }
    Ok(l / norm)
}

/// `slant,tilt,spin` in radians.
pub(crate) fn pose(spec: &str) -> CliResult<ScenePose> {
    let v = floats(spec, ',')?;
    if v.len() != 3 {
        return Err(CliError::Usage(format!(
            "--pose needs slant,tilt,spin, got {spec:?}"
        )));
    }
    Ok(ScenePose::from_angles(v[0], v[1], v[2]))
}

/// `default` or a semicolon-separated list of `slant,tilt,spin` triples.
pub(crate) fn poses(spec: &str) -> CliResult<Vec<(f64, f64, f64)>> {
    if spec == "default" {
        return Ok(vec![(0.0, 0.0, 0.0)]);
    }
    spec.split(';')
        .map(|p| {
            let v = floats(p, ',')?;
            if v.len() != 3 {
                return Err(CliError::Usage(format!(
                    "--poses entries need slant,tilt,spin, got {p:?}"
                )));
            }
            Ok((v[0], v[1], v[2]))
        })
        .collect()
}

/// `lo:hi:steps` inclusive linear range; a bare number is a single step.
pub(crate) fn range(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => Ok(vec![parts[0]
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("malformed number {spec:?}")))?]),
        3 => {
            let lo: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("malformed range {spec:?}")))?;
            let hi: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("malformed range {spec:?}")))?;
            let steps: usize = parts[2]
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("malformed range {spec:?}")))?;
            if steps == 0 {
                return Err(CliError::Usage("range needs at least one step".into()));
            }
            if steps == 1 {
                return Ok(vec![lo]);
            }
            Ok((0..steps)
                .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                .collect())
        }
        _ => Err(CliError::Usage(format!(
            "ranges are lo:hi:steps or a single number, got {spec:?}"
        ))),
    }
}

/// `cylinder[:R]`, `sphere[:R]`, or `poly:c00,c10,c01,c20,c11,c02,...`
/// (triangular coefficient order, by total degree then y power).
pub(crate) fn scene(spec: &str) -> CliResult<Scene> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    match name {
        "cylinder" | "sphere" => {
            let radius = match params {
                Some(p) => p
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("malformed radius {p:?}")))?,
                None => 1.0,
            };
            if !(radius > 0.0) {
                return Err(CliError::Usage("scene radius must be positive".into()));
            }
            Ok(if name == "cylinder" {
                Scene::cylinder(radius)
            } else {
                Scene::sphere_cap(radius)
            })
        }
        "poly" => {
            let coeffs = floats(
                params.ok_or_else(|| CliError::Usage("poly needs coefficients".into()))?,
                ',',
            )?;
            // triangular count (d+1)(d+2)/2 determines the degree
            let mut degree = 0usize;
            while (degree + 1) * (degree + 2) / 2 < coeffs.len() {
                degree += 1;
            }
            if (degree + 1) * (degree + 2) / 2 != coeffs.len() {
                return Err(CliError::Usage(format!(
                    "poly needs a triangular coefficient count, got {}",
                    coeffs.len()
                )));
            }
            let mut jet = Jet2::zero(degree);
            let mut idx = 0;
            for d in 0..=degree {
                for b in 0..=d {
                    jet.set_coeff(d - b, b, coeffs[idx]);
                    idx += 1;
                }
            }
            Ok(Scene::polynomial(jet))
        }
        other => Err(CliError::Usage(format!(
            "unknown scene {other:?} (expected cylinder, sphere, or poly)"
        ))),
    }
}
