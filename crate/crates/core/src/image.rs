//! Image-side derivative data: exact derivation from analytic scenes,
//! polynomial fits to sampled patches, Taylor evaluation, and the remainder
//! statistics of the fitted image polynomial.

use crate::error::{Error, Result};
use crate::jet::{height_to_normal_jets, Jet2};
use crate::math::{binomial, factorial};
use crate::tensor::{DerivTensor, TensorJson};
use crate::LIGHT_DEGENERACY_TOLERANCE;
use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Center intensity plus one scalar derivative tensor per order `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensors {
    order: usize,
    i0: f64,
    tensors: Vec<DerivTensor>,
}

impl ImageTensors {
    pub fn new(order: usize, i0: f64, tensors: Vec<DerivTensor>) -> Result<Self> {
        if i0.abs() > 1.0 + 1e-9 {
            return Err(Error::InvalidIntensity { i0 });
        }
        if tensors.len() != order {
            return Err(Error::DimensionMismatch {
                context: format!("expected {order} image tensors, got {}", tensors.len()),
            });
        }
        for (j, t) in tensors.iter().enumerate() {
            if t.order() != j + 1 || !t.is_scalar() {
                return Err(Error::DimensionMismatch {
                    context: format!("image tensor {} must be scalar of order {}", j, j + 1),
                });
            }
        }
        Ok(ImageTensors { order, i0, tensors })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }

    /// The order-`j` image derivative tensor, `1 <= j <= order`.
    pub fn tensor(&self, j: usize) -> &DerivTensor {
        &self.tensors[j - 1]
    }

    pub fn tensors(&self) -> &[DerivTensor] {
        &self.tensors
    }

    /// Evaluates the image Taylor polynomial:
    /// `i0 + sum_j (1/j!) sum_{a+b=j} C(j,a) x^a y^b entry(a,b)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = self.i0;
        for t in &self.tensors {
            let j = t.order();
            let mut term = 0.0;
            for b in 0..=j {
                let a = j - b;
                let e = t.scalar_entry(a, b);
                if e != 0.0 {
                    term += binomial(j, a) * x.powi(a as i32) * y.powi(b as i32) * e;
                }
            }
            acc += term / factorial(j);
        }
        acc
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = ImageTensorsJson {
            order: self.order,
            value_dim: 1,
            i0: self.i0,
            tensors: self.tensors.iter().map(TensorJson::from_tensor).collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ImageTensorsJson = serde_json::from_str(&text)?;
        if file.value_dim != 1 {
            return Err(Error::InvalidFile("image tensors must have value_dim 1".into()));
        }
        let mut tensors = file.tensors;
        tensors.sort_by_key(|t| t.j);
        let tensors = tensors
            .iter()
            .map(|t| t.to_tensor(1))
            .collect::<Result<Vec<_>>>()?;
        ImageTensors::new(file.order, file.i0, tensors)
    }
}

#[derive(Serialize, Deserialize)]
struct ImageTensorsJson {
    order: usize,
    value_dim: usize,
    i0: f64,
    tensors: Vec<TensorJson>,
}

/// Sample storage of a [`PatchGrid`].
#[derive(Debug, Clone, PartialEq)]
pub enum GridValues {
    Scalar(Vec<f64>),
    Vector(Vec<Vector3<f64>>),
}

/// A regular grid of scalars or 3-vectors over a rectangle centered at the
/// origin: sample `(ix, iy)` sits at `((ix - (nx-1)/2) h, (iy - (ny-1)/2) h)`.
/// Values are row-major with `iy` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    nx: usize,
    ny: usize,
    spacing: f64,
    values: GridValues,
}

impl PatchGrid {
    fn validate(nx: usize, ny: usize, spacing: f64, len: usize) -> Result<()> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!("grid must be at least 3x3, got {nx}x{ny}")));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if len != nx * ny {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {len}",
                nx * ny
            )));
        }
        Ok(())
    }

    pub fn scalar(nx: usize, ny: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        Self::validate(nx, ny, spacing, values.len())?;
        Ok(PatchGrid {
            nx,
            ny,
            spacing,
            values: GridValues::Scalar(values),
        })
    }

    pub fn vector(nx: usize, ny: usize, spacing: f64, values: Vec<Vector3<f64>>) -> Result<Self> {
        Self::validate(nx, ny, spacing, values.len())?;
        Ok(PatchGrid {
            nx,
            ny,
            spacing,
            values: GridValues::Vector(values),
        })
    }

    pub fn from_fn_scalar(nx: usize, ny: usize, spacing: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y) = coord_of(nx, ny, spacing, ix, iy);
                values.push(f(x, y));
            }
        }
        Self::scalar(nx, ny, spacing, values)
    }

    pub fn from_fn_vector(
        nx: usize,
        ny: usize,
        spacing: f64,
        f: impl Fn(f64, f64) -> Vector3<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y) = coord_of(nx, ny, spacing, ix, iy);
                values.push(f(x, y));
            }
        }
        Self::vector(nx, ny, spacing, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.values, GridValues::Scalar(_))
    }

    pub fn coord(&self, ix: usize, iy: usize) -> (f64, f64) {
        coord_of(self.nx, self.ny, self.spacing, ix, iy)
    }

    /// Index of the sample used as the patch center (exact origin when the
    /// dimensions are odd).
    pub fn center_index(&self) -> (usize, usize) {
        (self.nx / 2, self.ny / 2)
    }

    pub fn scalar_at(&self, ix: usize, iy: usize) -> f64 {
        match &self.values {
            GridValues::Scalar(v) => v[iy * self.nx + ix],
            GridValues::Vector(_) => panic!("scalar_at on vector grid"),
        }
    }

    pub fn vector_at(&self, ix: usize, iy: usize) -> Vector3<f64> {
        match &self.values {
            GridValues::Vector(v) => v[iy * self.nx + ix],
            GridValues::Scalar(_) => panic!("vector_at on scalar grid"),
        }
    }

    pub fn scalar_values(&self) -> &[f64] {
        match &self.values {
            GridValues::Scalar(v) => v,
            GridValues::Vector(_) => panic!("scalar_values on vector grid"),
        }
    }

    pub fn vector_values(&self) -> &[Vector3<f64>] {
        match &self.values {
            GridValues::Vector(v) => v,
            GridValues::Scalar(_) => panic!("vector_values on scalar grid"),
        }
    }

    /// Writes the text grid format: a `"nx ny spacing"` header line, then the
    /// samples row-major, one row per line (three numbers per sample for
    /// vector grids). Numbers carry 17 significant digits.
    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.nx, self.ny, g17(self.spacing)).unwrap();
        for iy in 0..self.ny {
            let mut line = String::new();
            for ix in 0..self.nx {
                if ix > 0 {
                    line.push(' ');
                }
                match &self.values {
                    GridValues::Scalar(v) => line.push_str(&g17(v[iy * self.nx + ix])),
                    GridValues::Vector(v) => {
                        let p = v[iy * self.nx + ix];
                        let _ = write!(line, "{} {} {}", g17(p.x), g17(p.y), g17(p.z));
                    }
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads the text grid format; the sample count decides between scalar
    /// and 3-vector grids.
    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens = text.split_whitespace();
        let mut next = |name: &str| -> Result<f64> {
            tokens
                .next()
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidGrid(format!("missing or malformed {name}")))
        };
        let nx = next("nx")? as usize;
        let ny = next("ny")? as usize;
        let spacing = next("spacing")?;
        let rest: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidGrid(format!("malformed value {t:?}")))
            })
            .collect::<Result<_>>()?;
        if rest.len() == nx * ny {
            PatchGrid::scalar(nx, ny, spacing, rest)
        } else if rest.len() == 3 * nx * ny {
            let values = rest
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect();
            PatchGrid::vector(nx, ny, spacing, values)
        } else {
            Err(Error::InvalidGrid(format!(
                "expected {} or {} values, got {}",
                nx * ny,
                3 * nx * ny,
                rest.len()
            )))
        }
    }
}

fn coord_of(nx: usize, ny: usize, spacing: f64, ix: usize, iy: usize) -> (f64, f64) {
    let x = (ix as f64 - (nx as f64 - 1.0) / 2.0) * spacing;
    let y = (iy as f64 - (ny as f64 - 1.0) / 2.0) * spacing;
    (x, y)
}

pub(crate) fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Exact image derivative tensors of an analytic scene: the height jet is
/// turned into normal jets, and each image tensor entry is the light dotted
/// with the matching normal tensor entry (unit albedo).
pub fn derive_from_scene(height: &Jet2, light: &Vector3<f64>, order: usize) -> Result<ImageTensors> {
    check_unit(light)?;
    if order > crate::MAX_IMAGE_ORDER {
        return Err(Error::OrderTooLarge {
            requested: order,
            available: crate::MAX_IMAGE_ORDER,
        });
    }
    if height.order() < order + 1 {
        return Err(Error::OrderTooLarge {
            requested: order + 1,
            available: height.order(),
        });
    }
    let normal = height_to_normal_jets(height)?;
    let normal_tensors = normal.to_tensors(order)?;
    let i0 = light.dot(&normal_tensors[0].vector_entry(0, 0));
    if i0.abs() >= 1.0 - LIGHT_DEGENERACY_TOLERANCE {
        return Err(Error::DegenerateLight { i0 });
    }
    let tensors = normal_tensors[1..]
        .iter()
        .map(|t| {
            DerivTensor::scalar(
                t.order(),
                t.vector_entries().iter().map(|v| light.dot(v)).collect(),
            )
        })
        .collect();
    ImageTensors::new(order, i0, tensors)
}

pub(crate) fn check_unit(v: &Vector3<f64>) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitVector { norm });
    }
    Ok(())
}

/// Result of a least-squares patch fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub tensors: ImageTensors,
    /// RMS of the fit residual over the grid samples.
    pub residual_rms: f64,
    /// Condition number of the design matrix.
    pub condition: f64,
    /// Set when the condition number exceeds 1e10.
    pub ill_conditioned: bool,
}

/// Fits a total-degree-`order` polynomial to a sampled scalar patch by
/// orthogonal-decomposition least squares and converts the centered
/// coefficients to derivative tensors.
///
/// Coordinates are scaled so the farthest sample sits at radius 1 before
/// solving, which keeps the design matrix well conditioned; the coefficients
/// are mapped back to the physical scale afterwards.
pub fn fit_from_samples(grid: &PatchGrid, order: usize) -> Result<FitOutcome> {
    if order > crate::MAX_IMAGE_ORDER {
        return Err(Error::OrderTooLarge {
            requested: order,
            available: crate::MAX_IMAGE_ORDER,
        });
    }
    if !grid.is_scalar() {
        return Err(Error::InvalidGrid("fit requires a scalar grid".into()));
    }
    let unknowns = (order + 1) * (order + 2) / 2;
    let samples = grid.nx() * grid.ny();
    if samples < unknowns {
        return Err(Error::Underdetermined { samples, unknowns });
    }

    let mut rho: f64 = 0.0;
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let (x, y) = grid.coord(ix, iy);
            rho = rho.max(x.hypot(y));
        }
    }
    if rho == 0.0 {
        return Err(Error::InvalidGrid("degenerate grid extent".into()));
    }

    // column for (j, b): monomial xi^(j-b) eta^b in normalized coordinates
    let col_index = |j: usize, b: usize| j * (j + 1) / 2 + b;
    let mut design = DMatrix::zeros(samples, unknowns);
    let mut rhs = DVector::zeros(samples);
    let mut row = 0;
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let (x, y) = grid.coord(ix, iy);
            let (xi, eta) = (x / rho, y / rho);
            for j in 0..=order {
                for b in 0..=j {
                    design[(row, col_index(j, b))] = xi.powi((j - b) as i32) * eta.powi(b as i32);
                }
            }
            rhs[row] = grid.scalar_at(ix, iy);
            row += 1;
        }
    }

    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_min <= 0.0 || !sigma_min.is_finite() {
        return Err(Error::Underdetermined { samples, unknowns });
    }
    let condition = sigma_max / sigma_min;
    let coeffs = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::DimensionMismatch { context: e.to_string() })?;

    let residual = (&design * &coeffs - &rhs).norm() / (samples as f64).sqrt();

    let i0 = coeffs[0];
    let tensors = (1..=order)
        .map(|j| {
            let entries = (0..=j)
                .map(|b| {
                    let a = j - b;
                    factorial(a) * factorial(b) * coeffs[col_index(j, b)] / rho.powi(j as i32)
                })
                .collect();
            DerivTensor::scalar(j, entries)
        })
        .collect();

    Ok(FitOutcome {
        tensors: ImageTensors::new(order, i0, tensors)?,
        residual_rms: residual,
        condition,
        ill_conditioned: condition > 1e10,
    })
}

/// Max/RMS error statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub max: f64,
    pub rms: f64,
}

/// Pointwise deviation of the image Taylor polynomial from a sampled truth
/// grid.
pub fn delta_error(it: &ImageTensors, truth: &PatchGrid) -> Result<ErrorStats> {
    if !truth.is_scalar() {
        return Err(Error::InvalidGrid("delta_error requires a scalar grid".into()));
    }
    let mut max: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for iy in 0..truth.ny() {
        for ix in 0..truth.nx() {
            let (x, y) = truth.coord(ix, iy);
            let d = (truth.scalar_at(ix, iy) - it.eval(x, y)).abs();
            max = max.max(d);
            sum_sq += d * d;
            count += 1;
        }
    }
    Ok(ErrorStats {
        max,
        rms: (sum_sq / count as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::Scene;
    use approx::assert_abs_diff_eq;

    fn unit(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z).normalize()
    }

    #[test]
    fn derive_rejects_parallel_light() {
        let flat = Jet2::zero(4);
        let err = derive_from_scene(&flat, &Vector3::new(0.0, 0.0, 1.0), 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateLight { .. }));
    }

    #[test]
    fn derive_parabolic_cylinder_first_order() {
        // f = -x^2/2 under light (0, 0.6, 0.8): i0 = 0.8 and the first-order
        // tensor vanishes (the image is even in x and constant in y).
        let f = Jet2::from_coeffs(5, [((2, 0), -0.5)]);
        let it = derive_from_scene(&f, &Vector3::new(0.0, 0.6, 0.8), 4).unwrap();
        assert_abs_diff_eq!(it.i0(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(it.tensor(1).scalar_entry(1, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(it.tensor(1).scalar_entry(0, 1), 0.0, epsilon = 1e-15);
        // d^2/dx^2 of 0.8 (1 + x^2)^(-1/2) at 0 is -0.8
        assert_abs_diff_eq!(it.tensor(2).scalar_entry(2, 0), -0.8, epsilon = 1e-13);
    }

    #[test]
    fn derive_matches_finite_differences() {
        let scene = Scene::cylinder(1.0);
        let light = unit(0.2, 0.5, 0.9);
        let f = scene.height_jet(6).unwrap();
        let it = derive_from_scene(&f, &light, 5).unwrap();

        let h = 1e-5;
        let img = |x: f64, y: f64| scene.image(x, y, &light);
        let dx = (img(h, 0.0) - img(-h, 0.0)) / (2.0 * h);
        let dy = (img(0.0, h) - img(0.0, -h)) / (2.0 * h);
        assert_abs_diff_eq!(it.tensor(1).scalar_entry(1, 0), dx, epsilon = 1e-8);
        assert_abs_diff_eq!(it.tensor(1).scalar_entry(0, 1), dy, epsilon = 1e-8);

        let dxx = (img(h, 0.0) - 2.0 * img(0.0, 0.0) + img(-h, 0.0)) / (h * h);
        assert_abs_diff_eq!(it.tensor(2).scalar_entry(2, 0), dxx, epsilon = 1e-4);
    }

    #[test]
    fn eval_center_and_linear_term() {
        let it = ImageTensors::new(
            1,
            0.25,
            vec![DerivTensor::scalar(1, vec![2.0, 0.0])],
        )
        .unwrap();
        assert_eq!(it.eval(0.0, 0.0), 0.25);
        assert_abs_diff_eq!(it.eval(0.5, 0.3), 0.25 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_mixed_second_order_term() {
        let it = ImageTensors::new(
            2,
            0.1,
            vec![
                DerivTensor::zero_scalar(1),
                DerivTensor::scalar(2, vec![0.0, 4.0, 0.0]),
            ],
        )
        .unwrap();
        // (1/2!) * C(2,1) * 0.5 * 0.5 * 4 = 1
        assert_abs_diff_eq!(it.eval(0.5, 0.5), 0.1 + 1.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_recovers_exact_polynomial() {
        let it_true = ImageTensors::new(
            3,
            0.4,
            vec![
                DerivTensor::scalar(1, vec![0.3, -0.2]),
                DerivTensor::scalar(2, vec![-0.5, 0.8, 0.1]),
                DerivTensor::scalar(3, vec![0.2, -0.1, 0.4, -0.3]),
            ],
        )
        .unwrap();
        let grid = PatchGrid::from_fn_scalar(15, 15, 0.04, |x, y| it_true.eval(x, y)).unwrap();
        let fit = fit_from_samples(&grid, 3).unwrap();
        assert!(fit.residual_rms < 1e-12);
        assert!(!fit.ill_conditioned);
        assert_abs_diff_eq!(fit.tensors.i0(), 0.4, epsilon = 1e-11);
        for j in 1..=3 {
            for b in 0..=j {
                let t = it_true.tensor(j).scalar_entry(j - b, b);
                let f = fit.tensors.tensor(j).scalar_entry(j - b, b);
                assert!((t - f).abs() <= 1e-9 * t.abs().max(1.0), "entry ({},{}) {t} vs {f}", j - b, b);
            }
        }
    }

    #[test]
    fn fit_constant_grid() {
        let grid = PatchGrid::from_fn_scalar(9, 9, 0.05, |_, _| 0.7).unwrap();
        let fit = fit_from_samples(&grid, 2).unwrap();
        assert_abs_diff_eq!(fit.tensors.i0(), 0.7, epsilon = 1e-12);
        for j in 1..=2 {
            for b in 0..=j {
                assert_abs_diff_eq!(fit.tensors.tensor(j).scalar_entry(j - b, b), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fit_cylinder_residual_small() {
        let scene = Scene::cylinder(1.0);
        let light = Vector3::new(0.0, 0.6, 0.8);
        let grid =
            PatchGrid::from_fn_scalar(21, 21, 0.03, |x, y| scene.image(x, y, &light)).unwrap();
        let fit = fit_from_samples(&grid, 5).unwrap();
        assert!(fit.residual_rms < 1e-3, "residual {}", fit.residual_rms);
    }

    #[test]
    fn fit_underdetermined() {
        let grid = PatchGrid::from_fn_scalar(3, 3, 0.1, |_, _| 0.0).unwrap();
        assert!(matches!(
            fit_from_samples(&grid, 4),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn delta_zero_for_polynomial_truth() {
        let it = ImageTensors::new(
            2,
            0.5,
            vec![
                DerivTensor::scalar(1, vec![0.1, 0.2]),
                DerivTensor::scalar(2, vec![0.3, -0.4, 0.5]),
            ],
        )
        .unwrap();
        let truth = PatchGrid::from_fn_scalar(11, 11, 0.05, |x, y| it.eval(x, y)).unwrap();
        let stats = delta_error(&it, &truth).unwrap();
        assert!(stats.max < 1e-12);
    }

    #[test]
    fn delta_cylinder_within_paper_scale() {
        let scene = Scene::cylinder(1.0);
        let light = Vector3::new(0.0, 0.6, 0.8);
        let f = scene.height_jet(6).unwrap();
        let it = derive_from_scene(&f, &light, 5).unwrap();
        let truth =
            PatchGrid::from_fn_scalar(41, 41, 0.015, |x, y| scene.image(x, y, &light)).unwrap();
        let stats = delta_error(&it, &truth).unwrap();
        assert!(stats.max <= 0.05, "max delta {}", stats.max);
    }

    #[test]
    fn delta_shrinks_with_radius_at_remainder_rate() {
        let scene = Scene::cylinder(1.0);
        let light = Vector3::new(0.0, 0.6, 0.8);
        let order = 5;
        let f = scene.height_jet(order + 1).unwrap();
        let it = derive_from_scene(&f, &light, order).unwrap();
        let stats_at = |radius: f64| {
            let spacing = 2.0 * radius / 40.0;
            let truth =
                PatchGrid::from_fn_scalar(41, 41, spacing, |x, y| scene.image(x, y, &light))
                    .unwrap();
            delta_error(&it, &truth).unwrap().max
        };
        let d1 = stats_at(0.3);
        let d2 = stats_at(0.15);
        let expected = 2f64.powi(order as i32 + 1);
        assert!(
            d1 / d2 >= expected / 2.0,
            "ratio {} below {}",
            d1 / d2,
            expected / 2.0
        );
    }

    #[test]
    fn delta_decreases_with_order() {
        for scene in [Scene::cylinder(1.0), Scene::sphere_cap(1.0)] {
            let light = Vector3::new(0.0, 0.6, 0.8);
            let truth =
                PatchGrid::from_fn_scalar(31, 31, 0.02, |x, y| scene.image(x, y, &light)).unwrap();
            let f = scene.height_jet(9).unwrap();
            let mut prev = f64::INFINITY;
            for order in 1..=6 {
                let it = derive_from_scene(&f, &light, order).unwrap();
                let stats = delta_error(&it, &truth).unwrap();
                assert!(
                    stats.max <= prev * (1.0 + 1e-9),
                    "order {order}: {} > {}",
                    stats.max,
                    prev
                );
                prev = stats.max;
            }
        }
    }

    #[test]
    fn grid_roundtrip_through_text() {
        let dir = std::env::temp_dir().join("patchshade_grid_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.grid");

        let grid = PatchGrid::from_fn_scalar(5, 4, 0.125, |x, y| x * y + 0.1).unwrap();
        grid.write(&path).unwrap();
        let back = PatchGrid::read(&path).unwrap();
        assert_eq!(grid, back);

        let vgrid =
            PatchGrid::from_fn_vector(4, 3, 0.2, |x, y| Vector3::new(x, y, 1.0)).unwrap();
        vgrid.write(&path).unwrap();
        let vback = PatchGrid::read(&path).unwrap();
        assert_eq!(vgrid, vback);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn grid_rejects_bad_dimensions() {
        assert!(PatchGrid::scalar(2, 5, 0.1, vec![0.0; 10]).is_err());
        assert!(PatchGrid::scalar(5, 5, 0.0, vec![0.0; 25]).is_err());
        assert!(PatchGrid::scalar(5, 5, 0.1, vec![0.0; 24]).is_err());
    }
}
