//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Jet2`] carries a function of two variables as its Taylor coefficients
//! about the origin, up to a fixed total degree. Arithmetic on jets is exact
//! through that degree, which gives derivative tensors of analytic surfaces,
//! normals, and images without symbolic algebra or finite-difference noise.

use crate::error::{Error, Result};
use crate::math::factorial;
use crate::tensor::DerivTensor;
use nalgebra::Vector3;

fn tri(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Number of coefficients of a jet of the given order.
fn coeff_count(order: usize) -> usize {
    tri(order + 1)
}

/// A bivariate Taylor polynomial truncated at a fixed total degree.
///
/// Coefficient `(a, b)` multiplies `x^a y^b` and equals the mixed partial
/// at the origin divided by `a! b!`. Storage is a dense triangular array;
/// multi-indices beyond the order read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet2 {
    pub fn zero(order: usize) -> Self {
        Jet2 {
            order,
            coeffs: vec![0.0; coeff_count(order)],
        }
    }

    pub fn constant(order: usize, value: f64) -> Self {
        let mut jet = Jet2::zero(order);
        jet.coeffs[0] = value;
        jet
    }

    /// Builds a jet from `((a, b), coefficient)` pairs; unlisted entries are zero.
    pub fn from_coeffs<I>(order: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = ((usize, usize), f64)>,
    {
        let mut jet = Jet2::zero(order);
        for ((a, b), v) in entries {
            jet.set_coeff(a, b, v);
        }
        jet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn offset(a: usize, b: usize) -> usize {
        tri(a + b) + b
    }

    /// Coefficient of `x^a y^b`; zero beyond the truncation order.
    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.coeffs[Self::offset(a, b)]
        }
    }

    pub fn set_coeff(&mut self, a: usize, b: usize, value: f64) {
        assert!(a + b <= self.order, "coefficient ({a},{b}) beyond order {}", self.order);
        self.coeffs[Self::offset(a, b)] = value;
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        Jet2 {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn zip(&self, rhs: &Jet2, f: impl Fn(f64, f64) -> f64) -> Result<Jet2> {
        if self.order != rhs.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: rhs.order,
            });
        }
        Ok(Jet2 {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Jet2) -> Result<Jet2> {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Jet2) -> Result<Jet2> {
        self.zip(rhs, |a, b| a - b)
    }

    /// Cauchy product truncated at the common order.
    pub fn multiply(&self, rhs: &Jet2) -> Result<Jet2> {
        if self.order != rhs.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: rhs.order,
            });
        }
        let n = self.order;
        let mut out = Jet2::zero(n);
        for d1 in 0..=n {
            for b1 in 0..=d1 {
                let a1 = d1 - b1;
                let u = self.coeffs[Self::offset(a1, b1)];
                if u == 0.0 {
                    continue;
                }
                for d2 in 0..=(n - d1) {
                    for b2 in 0..=d2 {
                        let a2 = d2 - b2;
                        let v = rhs.coeffs[Self::offset(a2, b2)];
                        if v == 0.0 {
                            continue;
                        }
                        out.coeffs[Self::offset(a1 + a2, b1 + b2)] += u * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reciprocal square root, exact through the truncation order.
    ///
    /// Newton iteration `w <- w (3 - u w^2) / 2` doubles the number of correct
    /// coefficients each step, so `w * w * u == 1` in every retained entry.
    pub fn inv_sqrt(&self) -> Result<Jet2> {
        let c = self.coeff(0, 0);
        if c <= 0.0 {
            return Err(Error::NonPositiveConstant { value: c });
        }
        let mut w = Jet2::constant(self.order, 1.0 / c.sqrt());
        let mut correct = 1usize;
        while correct < self.order + 1 {
            let w2 = w.multiply(&w)?;
            let uw2 = self.multiply(&w2)?;
            let three_minus = Jet2::constant(self.order, 3.0).sub(&uw2)?;
            w = w.multiply(&three_minus)?.scale(0.5);
            correct *= 2;
        }
        Ok(w)
    }

    /// Square root via `sqrt(u) = u * inv_sqrt(u)`.
    pub fn sqrt(&self) -> Result<Jet2> {
        self.multiply(&self.inv_sqrt()?)
    }

    /// Partial derivative in x; the order drops by one.
    pub fn dx(&self) -> Jet2 {
        let n = self.order.saturating_sub(1);
        let mut out = Jet2::zero(n);
        for d in 0..=n {
            for b in 0..=d {
                let a = d - b;
                out.coeffs[Self::offset(a, b)] = (a + 1) as f64 * self.coeff(a + 1, b);
            }
        }
        out
    }

    /// Partial derivative in y; the order drops by one.
    pub fn dy(&self) -> Jet2 {
        let n = self.order.saturating_sub(1);
        let mut out = Jet2::zero(n);
        for d in 0..=n {
            for b in 0..=d {
                let a = d - b;
                out.coeffs[Self::offset(a, b)] = (b + 1) as f64 * self.coeff(a, b + 1);
            }
        }
        out
    }

    /// Copy truncated (or zero-extended) to the given order.
    pub fn resized(&self, order: usize) -> Jet2 {
        let mut out = Jet2::zero(order);
        for d in 0..=order.min(self.order) {
            for b in 0..=d {
                let a = d - b;
                out.coeffs[Self::offset(a, b)] = self.coeff(a, b);
            }
        }
        out
    }

    /// Evaluates the truncated polynomial at a point.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for d in 0..=self.order {
            for b in 0..=d {
                let a = d - b;
                let c = self.coeffs[Self::offset(a, b)];
                if c != 0.0 {
                    acc += c * x.powi(a as i32) * y.powi(b as i32);
                }
            }
        }
        acc
    }

    /// Converts Taylor coefficients into symmetric derivative tensors, one per
    /// order `0..=max_order`: entry `(a, b)` of order `j = a + b` equals
    /// `a! b!` times the coefficient, i.e. the mixed partial at the origin.
    pub fn to_tensors(&self, max_order: usize) -> Result<Vec<DerivTensor>> {
        if max_order > self.order {
            return Err(Error::OrderTooLarge {
                requested: max_order,
                available: self.order,
            });
        }
        Ok((0..=max_order)
            .map(|j| {
                let entries = (0..=j)
                    .map(|b| {
                        let a = j - b;
                        factorial(a) * factorial(b) * self.coeff(a, b)
                    })
                    .collect();
                DerivTensor::scalar(j, entries)
            })
            .collect())
    }

    /// Largest absolute coefficient; handy for tolerance scaling in tests.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Three jets of equal order: a truncated Taylor expansion of a 3-vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VecJet2 {
    pub x: Jet2,
    pub y: Jet2,
    pub z: Jet2,
}

impl VecJet2 {
    pub fn new(x: Jet2, y: Jet2, z: Jet2) -> Result<Self> {
        if x.order() != y.order() || x.order() != z.order() {
            return Err(Error::OrderMismatch {
                left: x.order(),
                right: y.order().max(z.order()),
            });
        }
        Ok(VecJet2 { x, y, z })
    }

    pub fn order(&self) -> usize {
        self.x.order()
    }

    /// Componentwise dot product as a scalar jet.
    pub fn dot(&self, rhs: &VecJet2) -> Result<Jet2> {
        let xx = self.x.multiply(&rhs.x)?;
        let yy = self.y.multiply(&rhs.y)?;
        let zz = self.z.multiply(&rhs.z)?;
        xx.add(&yy)?.add(&zz)
    }

    pub fn eval(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new(self.x.eval(x, y), self.y.eval(x, y), self.z.eval(x, y))
    }

    /// Vector-valued derivative tensors per order `0..=max_order`.
    pub fn to_tensors(&self, max_order: usize) -> Result<Vec<DerivTensor>> {
        if max_order > self.order() {
            return Err(Error::OrderTooLarge {
                requested: max_order,
                available: self.order(),
            });
        }
        Ok((0..=max_order)
            .map(|j| {
                let entries = (0..=j)
                    .map(|b| {
                        let a = j - b;
                        let s = factorial(a) * factorial(b);
                        Vector3::new(
                            s * self.x.coeff(a, b),
                            s * self.y.coeff(a, b),
                            s * self.z.coeff(a, b),
                        )
                    })
                    .collect();
                DerivTensor::vector(j, entries)
            })
            .collect())
    }
}

/// Unit upward normal field of a height function, as jets of order
/// `f.order() - 1`.
///
/// `N = (-f_x, -f_y, 1) / sqrt(1 + f_x^2 + f_y^2)`, so `<N, N> = 1` holds in
/// every retained coefficient.
pub fn height_to_normal_jets(f: &Jet2) -> Result<VecJet2> {
    if f.order() < 1 {
        return Err(Error::OrderTooLarge {
            requested: 1,
            available: f.order(),
        });
    }
    let fx = f.dx();
    let fy = f.dy();
    let one = Jet2::constant(fx.order(), 1.0);
    let g = one.add(&fx.multiply(&fx)?)?.add(&fy.multiply(&fy)?)?;
    let w = g.inv_sqrt()?;
    VecJet2::new(
        fx.scale(-1.0).multiply(&w)?,
        fy.scale(-1.0).multiply(&w)?,
        w,
    )
}
