//! Symmetric derivative tensors on two input variables.
//!
//! An order-`j` derivative tensor is a symmetric multilinear map taking `j`
//! vectors in R^2 and returning a scalar or a 3-vector. Symmetry means it is
//! determined by the `j + 1` values on sorted inputs, so entries are stored by
//! multi-index `(a, b)` with `a + b = j`: the tensor applied to `a` copies of
//! `e1` and `b` copies of `e2`. Full `2^j`-column unfoldings are materialized
//! only on demand.

use crate::error::{Error, Result};
use crate::math::binomial;
use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Entry storage of a [`DerivTensor`], indexed by the number of `e2` inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorValues {
    Scalar(Vec<f64>),
    Vector(Vec<Vector3<f64>>),
}

/// A symmetric order-`j` derivative tensor with scalar or 3-vector values.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTensor {
    order: usize,
    values: TensorValues,
}

impl DerivTensor {
    /// Scalar-valued tensor; `entries[b]` is the value on `j - b` copies of
    /// `e1` and `b` copies of `e2`.
    pub fn scalar(order: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), order + 1, "order-{order} tensor needs {} entries", order + 1);
        DerivTensor {
            order,
            values: TensorValues::Scalar(entries),
        }
    }

    /// Vector-valued tensor with the same layout as [`DerivTensor::scalar`].
    pub fn vector(order: usize, entries: Vec<Vector3<f64>>) -> Self {
        assert_eq!(entries.len(), order + 1, "order-{order} tensor needs {} entries", order + 1);
        DerivTensor {
            order,
            values: TensorValues::Vector(entries),
        }
    }

    pub fn zero_scalar(order: usize) -> Self {
        DerivTensor::scalar(order, vec![0.0; order + 1])
    }

    pub fn zero_vector(order: usize) -> Self {
        DerivTensor::vector(order, vec![Vector3::zeros(); order + 1])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// 1 for scalar-valued tensors, 3 for vector-valued ones.
    pub fn value_dim(&self) -> usize {
        match &self.values {
            TensorValues::Scalar(_) => 1,
            TensorValues::Vector(_) => 3,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.value_dim() == 1
    }

    fn check_index(&self, a: usize, b: usize) {
        assert_eq!(a + b, self.order, "multi-index ({a},{b}) does not sum to order {}", self.order);
    }

    pub fn scalar_entry(&self, a: usize, b: usize) -> f64 {
        self.check_index(a, b);
        match &self.values {
            TensorValues::Scalar(v) => v[b],
            TensorValues::Vector(_) => panic!("scalar_entry on vector-valued tensor"),
        }
    }

    pub fn vector_entry(&self, a: usize, b: usize) -> Vector3<f64> {
        self.check_index(a, b);
        match &self.values {
            TensorValues::Vector(v) => v[b],
            TensorValues::Scalar(_) => panic!("vector_entry on scalar-valued tensor"),
        }
    }

    pub fn scalar_entries(&self) -> &[f64] {
        match &self.values {
            TensorValues::Scalar(v) => v,
            TensorValues::Vector(_) => panic!("scalar_entries on vector-valued tensor"),
        }
    }

    pub fn vector_entries(&self) -> &[Vector3<f64>] {
        match &self.values {
            TensorValues::Vector(v) => v,
            TensorValues::Scalar(_) => panic!("vector_entries on scalar-valued tensor"),
        }
    }

    /// Full matrix representation, `value_dim x 2^j`. The column for bit
    /// string `s` (bit set = input `e2`) is the entry at the multi-index
    /// counting the bits of `s`.
    pub fn unfold(&self) -> DMatrix<f64> {
        let cols = 1usize << self.order;
        let mut m = DMatrix::zeros(self.value_dim(), cols);
        for s in 0..cols {
            let twos = (s as u32).count_ones() as usize;
            match &self.values {
                TensorValues::Scalar(v) => m[(0, s)] = v[twos],
                TensorValues::Vector(v) => m.set_column(s, &v[twos]),
            }
        }
        m
    }

    /// Contracts one input slot with `v`, dropping the order by one.
    pub fn contract(&self, v: [f64; 2]) -> DerivTensor {
        assert!(self.order >= 1, "cannot contract an order-0 tensor");
        let j = self.order - 1;
        match &self.values {
            TensorValues::Scalar(vals) => DerivTensor::scalar(
                j,
                (0..=j).map(|b| v[0] * vals[b] + v[1] * vals[b + 1]).collect(),
            ),
            TensorValues::Vector(vals) => DerivTensor::vector(
                j,
                (0..=j).map(|b| vals[b] * v[0] + vals[b + 1] * v[1]).collect(),
            ),
        }
    }

    /// Multilinear evaluation on exactly `order` input vectors, returning an
    /// order-0 tensor. Equals the unfolding applied to the Kronecker product
    /// of the inputs.
    pub fn apply(&self, inputs: &[[f64; 2]]) -> Result<DerivTensor> {
        if inputs.len() != self.order {
            return Err(Error::WrongInputCount {
                order: self.order,
                got: inputs.len(),
            });
        }
        let mut t = self.clone();
        for v in inputs {
            t = t.contract(*v);
        }
        Ok(t)
    }

    pub fn apply_scalar(&self, inputs: &[[f64; 2]]) -> Result<f64> {
        Ok(self.apply(inputs)?.scalar_entry(0, 0))
    }

    pub fn apply_vector(&self, inputs: &[[f64; 2]]) -> Result<Vector3<f64>> {
        Ok(self.apply(inputs)?.vector_entry(0, 0))
    }

    /// Applies an orthonormal change of basis to every 3-vector entry.
    pub fn rotate(&self, r: &Matrix3<f64>) -> Result<DerivTensor> {
        let deviation = orthonormality_deviation(r);
        if deviation > 1e-10 {
            return Err(Error::NotOrthonormal { deviation });
        }
        match &self.values {
            TensorValues::Vector(vals) => Ok(DerivTensor::vector(
                self.order,
                vals.iter().map(|v| r * v).collect(),
            )),
            TensorValues::Scalar(_) => Err(Error::DimensionMismatch {
                context: "rotate requires a vector-valued tensor".into(),
            }),
        }
    }

    /// Contraction inner product of two vector-valued tensors: the symmetric
    /// scalar tensor of order `a + b` whose value on `j` inputs is the sum,
    /// over all ways of routing `a` of them into `self` and the rest into
    /// `other`, of the dot product of the two outputs.
    ///
    /// For a target multi-index with `A` ones and `B` twos the subset sum
    /// collapses to `sum_k C(A,k) C(B,a-k) <self(k, a-k), other(A-k, B-a+k)>`,
    /// which avoids enumerating the 2^j slot subsets.
    pub fn inner_product(&self, other: &DerivTensor) -> Result<DerivTensor> {
        let (p, q) = match (&self.values, &other.values) {
            (TensorValues::Vector(p), TensorValues::Vector(q)) => (p, q),
            _ => {
                return Err(Error::DimensionMismatch {
                    context: "inner product requires vector-valued tensors".into(),
                })
            }
        };
        let a = self.order;
        let j = a + other.order;
        let entries = (0..=j)
            .map(|big_b| {
                let big_a = j - big_b;
                let k_min = a.saturating_sub(big_b);
                let k_max = a.min(big_a);
                let mut acc = 0.0;
                for k in k_min..=k_max {
                    let w = binomial(big_a, k) * binomial(big_b, a - k);
                    // self takes k ones and a-k twos; other takes the rest
                    acc += w * p[a - k].dot(&q[big_b - (a - k)]);
                }
                acc
            })
            .collect();
        Ok(DerivTensor::scalar(j, entries))
    }
}

/// Max absolute deviation of `R^T R` from the identity.
pub fn orthonormality_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r;
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            let target = if i == k { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, k)] - target).abs());
        }
    }
    dev
}

/// The three rows of an order-`j` solution tensor in the solving frame,
/// each stored symmetrically with `j + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedRows {
    order: usize,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
}

impl UnfoldedRows {
    pub fn new(order: usize, r1: Vec<f64>, r2: Vec<f64>, r3: Vec<f64>) -> Result<Self> {
        for row in [&r1, &r2, &r3] {
            if row.len() != order + 1 {
                return Err(Error::RowLengthMismatch {
                    j: order,
                    expected: order + 1,
                    got: row.len(),
                });
            }
        }
        Ok(UnfoldedRows { order, r1, r2, r3 })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Column at multi-index `(a, b)`: the stacked `(r1, r2, r3)` entries.
    pub fn column(&self, a: usize, b: usize) -> Vector3<f64> {
        assert_eq!(a + b, self.order);
        Vector3::new(self.r1[b], self.r2[b], self.r3[b])
    }

    /// View as a vector-valued tensor whose components are the three rows.
    pub fn to_vector_tensor(&self) -> DerivTensor {
        DerivTensor::vector(
            self.order,
            (0..=self.order)
                .map(|b| Vector3::new(self.r1[b], self.r2[b], self.r3[b]))
                .collect(),
        )
    }

    pub fn from_vector_tensor(t: &DerivTensor) -> Result<Self> {
        if t.value_dim() != 3 {
            return Err(Error::DimensionMismatch {
                context: "rows require a vector-valued tensor".into(),
            });
        }
        let vals = t.vector_entries();
        Ok(UnfoldedRows {
            order: t.order(),
            r1: vals.iter().map(|v| v.x).collect(),
            r2: vals.iter().map(|v| v.y).collect(),
            r3: vals.iter().map(|v| v.z).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Tensor exchange file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum EntryValue {
    Scalar(f64),
    Vector([f64; 3]),
}

/// One tensor in the exchange format: entries keyed by the string `"a,b"`.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TensorJson {
    pub j: usize,
    pub entries: BTreeMap<String, EntryValue>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorFileJson {
    order: usize,
    value_dim: usize,
    tensors: Vec<TensorJson>,
}

pub(crate) fn parse_multi_index(key: &str) -> Result<(usize, usize)> {
    let mut it = key.split(',');
    let parse = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidFile(format!("bad multi-index key {key:?}")))
    };
    let a = parse(it.next())?;
    let b = parse(it.next())?;
    if it.next().is_some() {
        return Err(Error::InvalidFile(format!("bad multi-index key {key:?}")));
    }
    Ok((a, b))
}

impl TensorJson {
    pub(crate) fn from_tensor(t: &DerivTensor) -> Self {
        let mut entries = BTreeMap::new();
        for b in 0..=t.order() {
            let a = t.order() - b;
            let key = format!("{a},{b}");
            let value = match t.value_dim() {
                1 => EntryValue::Scalar(t.scalar_entry(a, b)),
                _ => {
                    let v = t.vector_entry(a, b);
                    EntryValue::Vector([v.x, v.y, v.z])
                }
            };
            entries.insert(key, value);
        }
        TensorJson { j: t.order(), entries }
    }

    pub(crate) fn to_tensor(&self, value_dim: usize) -> Result<DerivTensor> {
        let mut scalars = vec![0.0; self.j + 1];
        let mut vectors = vec![Vector3::zeros(); self.j + 1];
        if self.entries.len() != self.j + 1 {
            return Err(Error::InvalidFile(format!(
                "tensor of order {} needs {} entries, found {}",
                self.j,
                self.j + 1,
                self.entries.len()
            )));
        }
        for (key, value) in &self.entries {
            let (a, b) = parse_multi_index(key)?;
            if a + b != self.j {
                return Err(Error::InvalidFile(format!(
                    "entry {key:?} does not match tensor order {}",
                    self.j
                )));
            }
            match (value, value_dim) {
                (EntryValue::Scalar(s), 1) => scalars[b] = *s,
                (EntryValue::Vector(v), 3) => vectors[b] = Vector3::new(v[0], v[1], v[2]),
                _ => {
                    return Err(Error::InvalidFile(format!(
                        "entry {key:?} has the wrong value dimension"
                    )))
                }
            }
        }
        Ok(if value_dim == 1 {
            DerivTensor::scalar(self.j, scalars)
        } else {
            DerivTensor::vector(self.j, vectors)
        })
    }
}

/// Writes a list of tensors in the exchange JSON format.
pub fn write_tensor_file<P: AsRef<Path>>(path: P, tensors: &[DerivTensor]) -> Result<()> {
    let value_dim = tensors.first().map_or(1, |t| t.value_dim());
    if tensors.iter().any(|t| t.value_dim() != value_dim) {
        return Err(Error::DimensionMismatch {
            context: "mixed value dimensions in tensor file".into(),
        });
    }
    let file = TensorFileJson {
        order: tensors.iter().map(|t| t.order()).max().unwrap_or(0),
        value_dim,
        tensors: tensors.iter().map(TensorJson::from_tensor).collect(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Reads a tensor exchange JSON file.
pub fn read_tensor_file<P: AsRef<Path>>(path: P) -> Result<Vec<DerivTensor>> {
    let text = std::fs::read_to_string(path)?;
    let file: TensorFileJson = serde_json::from_str(&text)?;
    if file.value_dim != 1 && file.value_dim != 3 {
        return Err(Error::InvalidFile(format!(
            "value_dim must be 1 or 3, found {}",
            file.value_dim
        )));
    }
    file.tensors
        .iter()
        .map(|t| t.to_tensor(file.value_dim))
        .collect()
}
