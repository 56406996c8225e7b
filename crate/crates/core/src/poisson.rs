//! Direct solver for the Neumann-boundary discrete Poisson equation that
//! arises from least-squares integration of a gradient field on a grid.
//!
//! The normal equations of the edge least-squares problem are `L h = b` with
//! `L` the 5-point graph Laplacian of the grid (reduced stencil at the
//! boundary). That operator is diagonalized exactly by the half-sample cosine
//! basis `v_k(i) = cos(pi k (2i + 1) / (2n))` per axis with eigenvalues
//! `4 sin^2(pi k / (2n))`, so the solve is: project the right-hand side,
//! divide by the eigenvalue sums, zero the constant mode, synthesize.
//! The transforms are applied as dense matrix passes, exact and fast enough
//! for the grid sizes used here.

use crate::parallel::map_indexed;

struct CosineBasis {
    /// table[k][i] = cos(pi k (2i + 1) / (2n))
    table: Vec<Vec<f64>>,
    /// eigenvalue of mode k: 2 - 2 cos(pi k / n)
    eigenvalues: Vec<f64>,
    /// squared norm of mode k: n for k = 0, n/2 otherwise
    norms: Vec<f64>,
}

impl CosineBasis {
    fn new(n: usize) -> Self {
        let table = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64)
                            .cos()
                    })
                    .collect()
            })
            .collect();
        let eigenvalues = (0..n)
            .map(|k| 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos())
            .collect();
        let norms = (0..n)
            .map(|k| if k == 0 { n as f64 } else { n as f64 / 2.0 })
            .collect();
        CosineBasis {
            table,
            eigenvalues,
            norms,
        }
    }
}

/// Solves `L h = b` on an `nx x ny` grid (row-major, `iy` rows) where `L` is
/// the Neumann graph Laplacian. `b` must sum to zero (it does for divergence
/// data); the constant mode of the answer is set to zero.
pub(crate) fn solve_neumann_poisson(nx: usize, ny: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(b.len(), nx * ny);
    let bx = CosineBasis::new(nx);
    let by = CosineBasis::new(ny);

    // project: coefficients P[k][l] = sum_iy sum_ix b * vy_k(iy) vx_l(ix)
    let partial = map_indexed(ny, |k| {
        let row = &by.table[k];
        let mut acc = vec![0.0; nx];
        for iy in 0..ny {
            let w = row[iy];
            let src = &b[iy * nx..(iy + 1) * nx];
            for ix in 0..nx {
                acc[ix] += w * src[ix];
            }
        }
        acc
    });
    let coeffs = map_indexed(ny, |k| {
        let mut out = vec![0.0; nx];
        for (l, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ix in 0..nx {
                acc += partial[k][ix] * bx.table[l][ix];
            }
            let lambda = by.eigenvalues[k] + bx.eigenvalues[l];
            *o = if k == 0 && l == 0 {
                0.0
            } else {
                acc / (by.norms[k] * bx.norms[l] * lambda)
            };
        }
        out
    });

    // synthesize: h(iy, ix) = sum_k sum_l coeffs[k][l] vy_k(iy) vx_l(ix)
    let synth_partial = map_indexed(ny, |iy| {
        let mut acc = vec![0.0; nx];
        for k in 0..ny {
            let w = by.table[k][iy];
            if w != 0.0 {
                for ix in 0..nx {
                    acc[ix] += w * coeffs[k][ix];
                }
            }
        }
        acc
    });
    let rows = map_indexed(ny, |iy| {
        let mut out = vec![0.0; nx];
        for (ix, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for l in 0..nx {
                acc += synth_partial[iy][l] * bx.table[l][ix];
            }
            *o = acc;
        }
        out
    });
    rows.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Applies the Neumann graph Laplacian directly.
    fn apply_laplacian(nx: usize, ny: usize, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let c = h[iy * nx + ix];
                let mut acc = 0.0;
                if ix > 0 {
                    acc += c - h[iy * nx + ix - 1];
                }
                if ix + 1 < nx {
                    acc += c - h[iy * nx + ix + 1];
                }
                if iy > 0 {
                    acc += c - h[(iy - 1) * nx + ix];
                }
                if iy + 1 < ny {
                    acc += c - h[(iy + 1) * nx + ix];
                }
                out[iy * nx + ix] = acc;
            }
        }
        out
    }

    #[test]
    fn solves_the_laplacian_system() {
        use rand::{Rng, SeedableRng};
        let (nx, ny) = (17, 13);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // build a consistent rhs by applying L to a random field
        let truth: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rhs = apply_laplacian(nx, ny, &truth);
        let solved = solve_neumann_poisson(nx, ny, &rhs);
        let residual = apply_laplacian(nx, ny, &solved);
        for (r, b) in residual.iter().zip(&rhs) {
            assert_abs_diff_eq!(*r, *b, epsilon = 1e-10);
        }
        // answers agree up to the constant mode
        let offset = truth[0] - solved[0];
        for (t, s) in truth.iter().zip(&solved) {
            assert_abs_diff_eq!(*t - offset, *s, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_mode_is_zeroed() {
        let (nx, ny) = (8, 8);
        let rhs = vec![0.0; nx * ny];
        let solved = solve_neumann_poisson(nx, ny, &rhs);
        for v in solved {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }
}
