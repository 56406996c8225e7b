//! Inductive construction of Taylor normal fields consistent with a given
//! image patch.
//!
//! The solver works in the frame spanned by the center normal, the tangential
//! light component, and their cross product. In that frame the center normal
//! is `(1, 0, 0)` and the light is `(i0, sqrt(1 - i0^2), 0)`, so for every
//! order the three rows of the frame-projected derivative tensor split into
//! a row pinned by the unit-length constraint, a row pinned by the image
//! derivatives, and a free row. Choosing the free rows as a fixed linear
//! combination `c1 r1 + c2 r2` of the first two yields the rank-2 family;
//! supplying them verbatim yields arbitrary solutions.

use crate::error::{Error, Result};
use crate::image::{ErrorStats, ImageTensors};
use crate::math::{binomial, factorial};
use crate::tensor::{parse_multi_index, DerivTensor, UnfoldedRows};
use crate::LIGHT_DEGENERACY_TOLERANCE;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// The light direction in the solving frame: `(i0, sqrt(1 - i0^2), 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalLight {
    i0: f64,
}

impl CanonicalLight {
    pub fn from_i0(i0: f64) -> Result<Self> {
        if i0.abs() >= 1.0 - LIGHT_DEGENERACY_TOLERANCE {
            return Err(Error::DegenerateLight { i0 });
        }
        Ok(CanonicalLight { i0 })
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }

    /// Sine of the angle between light and center normal; always positive.
    pub fn tangential(&self) -> f64 {
        (1.0 - self.i0 * self.i0).sqrt()
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.i0, self.tangential(), 0.0)
    }
}

/// A solved Taylor normal field in the solving frame: rows per order plus the
/// implicit zeroth-order center normal `(1, 0, 0)`.
///
/// `c1`/`c2` are present for solutions built from the rank-2 family and
/// absent when the third rows were supplied directly.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSolution {
    order: usize,
    i0: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    rows: Vec<UnfoldedRows>,
}

impl CanonicalSolution {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }

    pub fn c1(&self) -> Option<f64> {
        self.c1
    }

    pub fn c2(&self) -> Option<f64> {
        self.c2
    }

    /// Rows of the order-`j` tensor, `1 <= j <= order`.
    pub fn row(&self, j: usize) -> &UnfoldedRows {
        &self.rows[j - 1]
    }

    pub fn rows(&self) -> &[UnfoldedRows] {
        &self.rows
    }

    pub fn canonical_light(&self) -> Vector3<f64> {
        CanonicalLight::from_i0(self.i0)
            .expect("solution carries a non-degenerate intensity")
            .vector()
    }

    /// Evaluates the Taylor normal field in the solving frame:
    /// `(1,0,0) + sum_j (1/j!) sum_{a+b=j} C(j,a) x^a y^b column(a,b)`.
    pub fn eval_normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let mut acc = Vector3::new(1.0, 0.0, 0.0);
        for rows in &self.rows {
            let j = rows.order();
            let mut term = Vector3::zeros();
            for b in 0..=j {
                let a = j - b;
                let w = binomial(j, a) * x.powi(a as i32) * y.powi(b as i32);
                term += rows.column(a, b) * w;
            }
            acc += term / factorial(j);
        }
        acc
    }

    /// Max/RMS deviation of the squared length of the evaluated normal field
    /// from one, sampled on a grid restricted to the disc of the given radius.
    pub fn epsilon_error(&self, radius: f64, samples: usize) -> ErrorStats {
        assert!(radius > 0.0, "radius must be positive");
        assert!(samples >= 2, "need at least two samples per axis");
        let evals = crate::parallel::map_indexed(samples, |iy| {
            let y = -radius + 2.0 * radius * iy as f64 / (samples - 1) as f64;
            let mut row = Vec::new();
            for ix in 0..samples {
                let x = -radius + 2.0 * radius * ix as f64 / (samples - 1) as f64;
                if x * x + y * y <= radius * radius * (1.0 + 1e-12) {
                    let m = self.eval_normal(x, y);
                    row.push((m.dot(&m) - 1.0).abs());
                }
            }
            row
        });
        let mut max: f64 = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for row in evals {
            for e in row {
                max = max.max(e);
                sum_sq += e * e;
                count += 1;
            }
        }
        ErrorStats {
            max,
            rms: (sum_sq / count.max(1) as f64).sqrt(),
        }
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = SolutionJson {
            order: self.order,
            i0: self.i0,
            c1: self.c1,
            c2: self.c2,
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let to_map = |row: &[f64]| {
                        let mut m = BTreeMap::new();
                        for (b, v) in row.iter().enumerate() {
                            m.insert(format!("{},{b}", r.order() - b), *v);
                        }
                        m
                    };
                    RowsJson {
                        j: r.order(),
                        r1: to_map(&r.r1),
                        r2: to_map(&r.r2),
                        r3: to_map(&r.r3),
                    }
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SolutionJson = serde_json::from_str(&text)?;
        let mut rows_json = file.rows;
        rows_json.sort_by_key(|r| r.j);
        let mut rows = Vec::new();
        for (idx, r) in rows_json.iter().enumerate() {
            if r.j != idx + 1 {
                return Err(Error::InvalidFile(format!(
                    "rows must cover orders 1..={}, found order {}",
                    file.order, r.j
                )));
            }
            let from_map = |m: &BTreeMap<String, f64>| -> Result<Vec<f64>> {
                let mut row = vec![0.0; r.j + 1];
                if m.len() != r.j + 1 {
                    return Err(Error::RowLengthMismatch {
                        j: r.j,
                        expected: r.j + 1,
                        got: m.len(),
                    });
                }
                for (key, v) in m {
                    let (a, b) = parse_multi_index(key)?;
                    if a + b != r.j {
                        return Err(Error::InvalidFile(format!(
                            "entry {key:?} does not match order {}",
                            r.j
                        )));
                    }
                    row[b] = *v;
                }
                Ok(row)
            };
            rows.push(UnfoldedRows::new(
                r.j,
                from_map(&r.r1)?,
                from_map(&r.r2)?,
                from_map(&r.r3)?,
            )?);
        }
        if rows.len() != file.order {
            return Err(Error::InvalidFile(format!(
                "expected {} row sets, found {}",
                file.order,
                rows.len()
            )));
        }
        CanonicalLight::from_i0(file.i0)?;
        Ok(CanonicalSolution {
            order: file.order,
            i0: file.i0,
            c1: file.c1,
            c2: file.c2,
            rows,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    order: usize,
    i0: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    rows: Vec<RowsJson>,
}

#[derive(Serialize, Deserialize)]
struct RowsJson {
    j: usize,
    r1: BTreeMap<String, f64>,
    r2: BTreeMap<String, f64>,
    r3: BTreeMap<String, f64>,
}

/// Row pinned by the unit-length constraint.
///
/// Differentiating `<N, N> = 1` a total of `j` times and evaluating at the
/// center leaves `2 <D^j N, N0>` plus all proper two-factor splits, so
///
/// `<D^j N, N0> = -[ sum_{a < j/2} <D^a N, D^(j-a) N> + (j even) half the
/// a = j/2 term ]`,
///
/// where each `<.,.>` is the contraction inner product over all C(j, a) slot
/// subsets. Splits with `a = j/2` pair each subset with its complement, which
/// produce the same dot product, hence the half weight: counting all C(j, j/2)
/// subsets would double that term. For `j = 1` there is no proper split and
/// the row is zero. Inner products are frame-invariant, so the rows computed
/// in the solving frame feed the sum directly.
pub fn normalization_row(lower: &[UnfoldedRows], j: usize) -> Result<Vec<f64>> {
    assert!(j >= 1, "normalization row needs j >= 1");
    if j == 1 {
        return Ok(vec![0.0; 2]);
    }
    if lower.len() < j - 1 {
        return Err(Error::MissingLowerOrders { j });
    }
    for (idx, rows) in lower.iter().take(j - 1).enumerate() {
        if rows.order() != idx + 1 {
            return Err(Error::MissingLowerOrders { j });
        }
    }
    let mut row = vec![0.0; j + 1];
    for a in 1..=(j / 2) {
        let weight = if 2 * a == j { 0.5 } else { 1.0 };
        let ip = lower[a - 1]
            .to_vector_tensor()
            .inner_product(&lower[j - a - 1].to_vector_tensor())?;
        for (b, r) in row.iter_mut().enumerate() {
            *r -= weight * ip.scalar_entry(j - b, b);
        }
    }
    Ok(row)
}

/// Row pinned by the image: `r2 = (D^j I - i0 r1) / sqrt(1 - i0^2)`.
///
/// `i0` here is the center intensity: the projection is onto the fixed frame
/// vectors at the expansion point, so no derivative of the frame appears.
pub fn lighting_row(r1: &[f64], dj_i: &DerivTensor, i0: f64) -> Result<Vec<f64>> {
    if !dj_i.is_scalar() || dj_i.order() + 1 != r1.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "lighting row: r1 has {} entries, image tensor has order {}",
                r1.len(),
                dj_i.order()
            ),
        });
    }
    let light = CanonicalLight::from_i0(i0)?;
    let s = light.tangential();
    let j = dj_i.order();
    Ok((0..=j)
        .map(|b| (dj_i.scalar_entry(j - b, b) - i0 * r1[b]) / s)
        .collect())
}

/// Free row of the rank-2 family: `r3 = c1 r1 + c2 r2` entrywise.
pub fn generic_row(r1: &[f64], r2: &[f64], c1: f64, c2: f64) -> Vec<f64> {
    assert_eq!(r1.len(), r2.len());
    r1.iter().zip(r2).map(|(a, b)| c1 * a + c2 * b).collect()
}

enum ThirdRows<'a> {
    Generic { c1: f64, c2: f64 },
    User(&'a [Vec<f64>]),
}

fn solve_inner(it: &ImageTensors, third: ThirdRows<'_>) -> Result<CanonicalSolution> {
    let i0 = it.i0();
    CanonicalLight::from_i0(i0)?;
    let n = it.order();
    let mut rows: Vec<UnfoldedRows> = Vec::with_capacity(n);
    for j in 1..=n {
        let r1 = normalization_row(&rows, j)?;
        let r2 = lighting_row(&r1, it.tensor(j), i0)?;
        let r3 = match &third {
            ThirdRows::Generic { c1, c2 } => generic_row(&r1, &r2, *c1, *c2),
            ThirdRows::User(user) => user[j - 1].clone(),
        };
        rows.push(UnfoldedRows::new(j, r1, r2, r3)?);
    }
    let (c1, c2) = match third {
        ThirdRows::Generic { c1, c2 } => (Some(c1), Some(c2)),
        ThirdRows::User(_) => (None, None),
    };
    Ok(CanonicalSolution {
        order: n,
        i0,
        c1,
        c2,
        rows,
    })
}

/// Runs the induction with the rank-2 free rows `r3 = c1 r1 + c2 r2`.
///
/// Every output satisfies `i0 r1 + sqrt(1 - i0^2) r2 = D^j I` entrywise, so
/// the rendered Taylor image reproduces the input coefficients exactly.
pub fn solve_generic(it: &ImageTensors, c1: f64, c2: f64) -> Result<CanonicalSolution> {
    solve_inner(it, ThirdRows::Generic { c1, c2 })
}

/// Runs the induction with caller-supplied third rows, one per order in
/// symmetric storage (`j + 1` entries for order `j`). Such solutions still
/// match the image and unit-length constraints but are generally full rank.
pub fn solve_with_rows(it: &ImageTensors, user_r3: &[Vec<f64>]) -> Result<CanonicalSolution> {
    if user_r3.len() != it.order() {
        return Err(Error::RowCountMismatch {
            expected: it.order(),
            got: user_r3.len(),
        });
    }
    for (idx, row) in user_r3.iter().enumerate() {
        let j = idx + 1;
        if row.len() != j + 1 {
            return Err(Error::RowLengthMismatch {
                j,
                expected: j + 1,
                got: row.len(),
            });
        }
    }
    solve_inner(it, ThirdRows::User(user_r3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::derive_from_scene;
    use crate::scenes::Scene;
    use approx::assert_abs_diff_eq;

    fn cylinder_tensors(order: usize) -> ImageTensors {
        let scene = Scene::cylinder(1.0);
        let f = scene.height_jet(order + 1).unwrap();
        derive_from_scene(&f, &nalgebra::Vector3::new(0.0, 0.6, 0.8), order).unwrap()
    }

    #[test]
    fn normalization_row_base_case_is_zero() {
        assert_eq!(normalization_row(&[], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn normalization_row_second_order_hand_case() {
        // order-1 columns (0,1,0) and (0,0,1)
        let rows1 = UnfoldedRows::new(1, vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let r1 = normalization_row(&[rows1], 2).unwrap();
        assert_eq!(r1, vec![-1.0, 0.0, -1.0]);
    }

    #[test]
    fn normalization_row_requires_lower_orders() {
        assert!(matches!(
            normalization_row(&[], 2),
            Err(Error::MissingLowerOrders { j: 2 })
        ));
    }

    #[test]
    fn normalization_row_cylinder_curvature() {
        // for N = (x, 0, sqrt(1-x^2)): <D^2 N, N0> at (2,0) equals
        // -<D^1 N, D^1 N> = -1
        let rows1 = UnfoldedRows::new(1, vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let r1 = normalization_row(&[rows1], 2).unwrap();
        assert_eq!(r1[0], -1.0);
        assert_eq!(r1[1], 0.0);
        assert_eq!(r1[2], 0.0);
    }

    #[test]
    fn lighting_row_weighted_gradient() {
        let dj = DerivTensor::scalar(1, vec![0.1, -0.2]);
        let r2 = lighting_row(&[0.0, 0.0], &dj, 0.8).unwrap();
        assert_abs_diff_eq!(r2[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r2[1], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn lighting_row_cancellation_and_frontal_tangent() {
        let r1 = vec![0.5, -1.0, 0.25];
        let dj = DerivTensor::scalar(2, r1.iter().map(|v| 0.8 * v).collect());
        let r2 = lighting_row(&r1, &dj, 0.8).unwrap();
        for v in &r2 {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }

        let dj = DerivTensor::scalar(2, vec![0.3, 0.1, -0.7]);
        let r2 = lighting_row(&[0.0, 0.0, 0.0], &dj, 0.0).unwrap();
        assert_eq!(r2, vec![0.3, 0.1, -0.7]);
    }

    #[test]
    fn lighting_row_rejects_degenerate_intensity() {
        let dj = DerivTensor::scalar(1, vec![0.1, 0.2]);
        assert!(matches!(
            lighting_row(&[0.0, 0.0], &dj, 0.9999999),
            Err(Error::DegenerateLight { .. })
        ));
    }

    #[test]
    fn generic_row_cases() {
        assert_eq!(generic_row(&[1.0, 2.0], &[3.0, 4.0], 0.0, 0.0), vec![0.0, 0.0]);
        assert_eq!(generic_row(&[1.0, 2.0], &[3.0, 4.0], 0.0, 1.0), vec![3.0, 4.0]);
        assert_eq!(
            generic_row(&[-1.0, 0.0, -1.0], &[2.0, 0.0, 2.0], 0.5, 0.5),
            vec![0.5, 0.0, 0.5]
        );
    }

    #[test]
    fn constant_image_with_zero_constants_is_flat() {
        let it = ImageTensors::new(
            4,
            0.9,
            (1..=4).map(DerivTensor::zero_scalar).collect(),
        )
        .unwrap();
        let sol = solve_generic(&it, 0.0, 0.0).unwrap();
        for rows in sol.rows() {
            for b in 0..=rows.order() {
                let col = rows.column(rows.order() - b, b);
                assert_eq!(col, Vector3::zeros());
            }
        }
        assert_eq!(sol.eval_normal(0.2, -0.1), Vector3::new(1.0, 0.0, 0.0));
        let eps = sol.epsilon_error(0.5, 21);
        assert_eq!(eps.max, 0.0);
    }

    #[test]
    fn coefficient_fidelity_is_exact() {
        let it = cylinder_tensors(5);
        let s = (1.0 - it.i0() * it.i0()).sqrt();
        for (c1, c2) in [(0.0, 0.0), (0.5, 0.5), (-1.0, 1.0), (0.3, -0.7)] {
            let sol = solve_generic(&it, c1, c2).unwrap();
            for j in 1..=5 {
                let rows = sol.row(j);
                for b in 0..=j {
                    let lhs = it.i0() * rows.r1[b] + s * rows.r2[b];
                    let rhs = it.tensor(j).scalar_entry(j - b, b);
                    assert!((lhs - rhs).abs() <= 1e-12, "j={j} b={b}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn first_row_of_order_one_is_always_zero() {
        let it = cylinder_tensors(4);
        let sol = solve_generic(&it, 0.7, -0.2).unwrap();
        assert_eq!(sol.row(1).r1, vec![0.0, 0.0]);
    }

    #[test]
    fn user_rows_reduce_to_generic() {
        let it = cylinder_tensors(5);
        let (c1, c2) = (0.4, -0.6);
        let generic = solve_generic(&it, c1, c2).unwrap();
        let user: Vec<Vec<f64>> = generic.rows().iter().map(|r| r.r3.clone()).collect();
        let replayed = solve_with_rows(&it, &user).unwrap();
        for j in 1..=5 {
            assert_eq!(generic.row(j).r1, replayed.row(j).r1);
            assert_eq!(generic.row(j).r2, replayed.row(j).r2);
            assert_eq!(generic.row(j).r3, replayed.row(j).r3);
        }

        let zeros: Vec<Vec<f64>> = (1..=5).map(|j| vec![0.0; j + 1]).collect();
        let z = solve_with_rows(&it, &zeros).unwrap();
        let g0 = solve_generic(&it, 0.0, 0.0).unwrap();
        for j in 1..=5 {
            assert_eq!(z.row(j).r3, g0.row(j).r3);
            assert_eq!(z.row(j).r1, g0.row(j).r1);
        }
    }

    #[test]
    fn user_rows_validated() {
        let it = cylinder_tensors(3);
        assert!(matches!(
            solve_with_rows(&it, &[vec![0.0, 0.0]]),
            Err(Error::RowCountMismatch { expected: 3, got: 1 })
        ));
        let bad = vec![vec![0.0; 2], vec![0.0; 2], vec![0.0; 4]];
        assert!(matches!(
            solve_with_rows(&it, &bad),
            Err(Error::RowLengthMismatch { j: 2, .. })
        ));
    }

    #[test]
    fn eval_normal_center_is_frame_axis() {
        let it = cylinder_tensors(5);
        let sol = solve_generic(&it, 0.5, 0.5).unwrap();
        assert_eq!(sol.eval_normal(0.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn epsilon_small_on_cylinder_family() {
        let it = cylinder_tensors(5);
        let sol = solve_generic(&it, 0.5, 0.5).unwrap();
        let stats = sol.epsilon_error(0.3, 41);
        assert!(stats.max <= 0.05, "epsilon max {}", stats.max);
    }

    #[test]
    fn epsilon_shrinks_with_radius_at_remainder_rate() {
        let order = 5;
        let it = cylinder_tensors(order);
        let sol = solve_generic(&it, 1.0, 1.0).unwrap();
        let e1 = sol.epsilon_error(0.3, 41).max;
        let e2 = sol.epsilon_error(0.15, 41).max;
        let expected = 2f64.powi(order as i32 + 1);
        assert!(
            e1 / e2 >= expected / 2.0,
            "ratio {} below {}",
            e1 / e2,
            expected / 2.0
        );
    }

    #[test]
    fn solution_json_roundtrip() {
        let it = cylinder_tensors(4);
        let sol = solve_generic(&it, 0.25, -0.75).unwrap();
        let dir = std::env::temp_dir().join("patchshade_sol_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sol.json");
        sol.write_json(&path).unwrap();
        let back = CanonicalSolution::read_json(&path).unwrap();
        assert_eq!(sol, back);
        std::fs::remove_dir_all(&dir).ok();
    }
}
