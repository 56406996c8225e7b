//! Realizing a solved normal field as a scene: pose selection, world-frame
//! normal grids, Lambertian rendering, height integration, and mesh export.

use crate::error::{Error, Result};
use crate::image::{check_unit, PatchGrid};
use crate::induction::{CanonicalLight, CanonicalSolution};
use crate::parallel::map_indexed;
use crate::poisson::solve_neumann_poisson;
use crate::tensor::orthonormality_deviation;
use nalgebra::{Matrix3, Rotation3, Vector3};
use std::io::Write;

/// An orthonormal frame choice (determinant +1) mapping the solving frame
/// into the world, together with the implied world light and center normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePose {
    rotation: Matrix3<f64>,
}

impl ScenePose {
    /// Wraps a rotation matrix after checking orthonormality and orientation.
    pub fn from_matrix(rotation: Matrix3<f64>) -> Result<Self> {
        let deviation = orthonormality_deviation(&rotation);
        if deviation > 1e-10 {
            return Err(Error::NotOrthonormal { deviation });
        }
        if (rotation.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::NotOrthonormal {
                deviation: (rotation.determinant() - 1.0).abs(),
            });
        }
        Ok(ScenePose { rotation })
    }

    /// Pose from slant/tilt of the world center normal plus a spin about it.
    /// All angles zero puts the center normal at `(0, 0, 1)`.
    pub fn from_angles(slant: f64, tilt: f64, spin: f64) -> Self {
        // base frame: solving axes 1,2,3 -> world e_z, e_x, e_y
        let base = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let spin_first = Rotation3::from_axis_angle(&Vector3::x_axis(), spin);
        let slant_rot = Rotation3::from_axis_angle(&Vector3::y_axis(), slant);
        let tilt_rot = Rotation3::from_axis_angle(&Vector3::z_axis(), tilt);
        ScenePose {
            rotation: tilt_rot.into_inner() * slant_rot.into_inner() * base * spin_first.into_inner(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn world_center_normal(&self) -> Vector3<f64> {
        self.rotation * Vector3::new(1.0, 0.0, 0.0)
    }

    pub fn world_light(&self, i0: f64) -> Result<Vector3<f64>> {
        Ok(self.rotation * CanonicalLight::from_i0(i0)?.vector())
    }
}

/// Frame with rows (center normal, tangential light direction, binormal):
/// maps world vectors to solving-frame coordinates. Used for ground-truth
/// round trips. The determinant is +1 by construction.
pub fn pose_from_scene(n0: &Vector3<f64>, light: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_unit(n0)?;
    check_unit(light)?;
    let cos = n0.dot(light);
    if cos.abs() >= 1.0 - 1e-6 {
        return Err(Error::ParallelVectors);
    }
    let tangential = light - n0 * cos;
    let l_t = tangential / tangential.norm();
    let b = n0.cross(&l_t);
    Ok(Matrix3::new(
        n0.x, n0.y, n0.z, l_t.x, l_t.y, l_t.z, b.x, b.y, b.z,
    ))
}

/// Grid sampling parameters: `n` samples per axis over `[-radius, radius]`.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub n: usize,
    pub radius: f64,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.n as f64 - 1.0)
    }
}

/// A sampled world-frame normal field.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalGrid {
    pub grid: PatchGrid,
    pub renormalized: bool,
    /// All samples have positive z component.
    pub visible: bool,
}

/// Evaluates the Taylor normal field on a grid and rotates it into the world
/// frame. With `renormalize` each sample is scaled to unit length (the raw
/// Taylor field is only approximately unit).
pub fn world_normal_field(
    sol: &CanonicalSolution,
    pose: &ScenePose,
    spec: &GridSpec,
    renormalize: bool,
) -> Result<NormalGrid> {
    let n = spec.n;
    let spacing = spec.spacing();
    let q = *pose.rotation();
    let rows = map_indexed(n, |iy| {
        let mut row = Vec::with_capacity(n);
        for ix in 0..n {
            let x = (ix as f64 - (n as f64 - 1.0) / 2.0) * spacing;
            let y = (iy as f64 - (n as f64 - 1.0) / 2.0) * spacing;
            let mut w = q * sol.eval_normal(x, y);
            if renormalize {
                w /= w.norm();
            }
            row.push(w);
        }
        row
    });
    let values: Vec<Vector3<f64>> = rows.into_iter().flatten().collect();
    let visible = values.iter().all(|v| v.z > 0.0);
    Ok(NormalGrid {
        grid: PatchGrid::vector(n, n, spacing, values)?,
        renormalized: renormalize,
        visible,
    })
}

/// Pointwise Lambertian shading `I = light . N`. Negative values are kept
/// (attached shadow), not clipped.
pub fn render_lambertian(normals: &NormalGrid, light: &Vector3<f64>) -> Result<PatchGrid> {
    check_unit(light)?;
    let g = &normals.grid;
    let values = g.vector_values().iter().map(|n| light.dot(n)).collect();
    PatchGrid::scalar(g.nx(), g.ny(), g.spacing(), values)
}

/// Number of negative samples in a rendered image.
pub fn shadow_count(image: &PatchGrid) -> usize {
    image.scalar_values().iter().filter(|v| **v < 0.0).count()
}

const VISIBILITY_TOLERANCE: f64 = 1e-6;

/// Result of least-squares height integration.
#[derive(Debug, Clone)]
pub struct Integration {
    /// Heights anchored to zero at the center sample.
    pub heights: PatchGrid,
    /// RMS of the discrete curl of the edge gradient field; zero exactly
    /// when the field is discretely integrable.
    pub curl_residual: f64,
}

/// Integrates a visible normal grid to a height field.
///
/// Node gradients `(-Nx/Nz, -Ny/Nz)` are averaged onto grid edges, and the
/// heights minimize the squared mismatch of height differences against the
/// edge values. The normal equations form a Neumann Poisson system solved
/// directly in the cosine eigenbasis. Non-integrability is reported through
/// `curl_residual`, never projected away silently.
pub fn integrate_heights(normals: &NormalGrid) -> Result<Integration> {
    let g = &normals.grid;
    let (nx, ny, h) = (g.nx(), g.ny(), g.spacing());
    let vals = g.vector_values();
    let min_z = vals.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    if min_z <= VISIBILITY_TOLERANCE {
        return Err(Error::NonVisibleNormal { min_z });
    }

    let gx: Vec<f64> = vals.iter().map(|v| -v.x / v.z).collect();
    let gy: Vec<f64> = vals.iter().map(|v| -v.y / v.z).collect();

    // edge targets: trapezoid average of the endpoint gradients times spacing
    let edge_x = |ix: usize, iy: usize| {
        let i = iy * nx + ix;
        0.5 * (gx[i] + gx[i + 1]) * h
    };
    let edge_y = |ix: usize, iy: usize| {
        let i = iy * nx + ix;
        0.5 * (gy[i] + gy[i + nx]) * h
    };

    // divergence right-hand side of the least-squares normal equations
    let mut rhs = vec![0.0; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let mut acc = 0.0;
            if ix + 1 < nx {
                acc -= edge_x(ix, iy);
            }
            if ix > 0 {
                acc += edge_x(ix - 1, iy);
            }
            if iy + 1 < ny {
                acc -= edge_y(ix, iy);
            }
            if iy > 0 {
                acc += edge_y(ix, iy - 1);
            }
            rhs[iy * nx + ix] = acc;
        }
    }

    let mut heights = solve_neumann_poisson(nx, ny, &rhs);
    let (cx, cy) = g.center_index();
    let anchor = heights[cy * nx + cx];
    for v in &mut heights {
        *v -= anchor;
    }

    // discrete curl per cell: loop circulation divided by cell area
    let mut sum_sq = 0.0;
    let cells = (nx - 1) * (ny - 1);
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let circulation =
                edge_x(ix, iy) + edge_y(ix + 1, iy) - edge_x(ix, iy + 1) - edge_y(ix, iy);
            let curl = circulation / (h * h);
            sum_sq += curl * curl;
        }
    }

    Ok(Integration {
        heights: PatchGrid::scalar(nx, ny, h, heights)?,
        curl_residual: (sum_sq / cells as f64).sqrt(),
    })
}

/// Triangle mesh over a height grid.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

/// One vertex per grid sample at `(x, y, height)`, two triangles per cell,
/// wound counterclockwise seen from +z.
pub fn export_mesh(heights: &PatchGrid) -> Result<Mesh> {
    if !heights.is_scalar() {
        return Err(Error::InvalidGrid("mesh export requires a scalar grid".into()));
    }
    let (nx, ny) = (heights.nx(), heights.ny());
    let mut vertices = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = heights.coord(ix, iy);
            vertices.push([x, y, heights.scalar_at(ix, iy)]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let v00 = iy * nx + ix;
            let v10 = v00 + 1;
            let v01 = v00 + nx;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(Mesh { vertices, triangles })
}

impl Mesh {
    /// ASCII Wavefront OBJ with 1-based indices.
    pub fn write_obj<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(
                out,
                "v {} {} {}",
                crate::image::g17(v[0]),
                crate::image::g17(v[1]),
                crate::image::g17(v[2])
            )?;
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn write_obj_file<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let mut buf = Vec::new();
        self.write_obj(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}
