//! Feature and weight vectors with operation accounting.
//!
//! Every arithmetic kernel takes an [`OpSink`]. Pass [`NoOps`] on hot paths
//! (it compiles away) or an [`OpCounter`] to tally the additions and
//! multiplications performed on vector elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Receives operation counts from the vector kernels.
pub trait OpSink {
    fn add(&mut self, count: u64);
    fn mul(&mut self, count: u64);
}

/// Discards all counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoOps;

impl OpSink for NoOps {
    #[inline(always)]
    fn add(&mut self, _count: u64) {}
    #[inline(always)]
    fn mul(&mut self, _count: u64) {}
}

/// Running tally of basic arithmetic operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub additions: u64,
    pub multiplications: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.additions + self.multiplications
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl OpSink for OpCounter {
    #[inline]
    fn add(&mut self, count: u64) {
        self.additions += count;
    }
    #[inline]
    fn mul(&mut self, count: u64) {
        self.multiplications += count;
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse { indices: Vec<usize>, values: Vec<f64> },
}

/// A feature vector phi(s), stored densely or as sorted (index, value) pairs.
///
/// Immutable once built. The binary flag is computed at construction and is
/// true iff every stored value is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    storage: Storage,
    binary: bool,
}

fn all_binary(values: &[f64]) -> bool {
    values.iter().all(|&v| v == 0.0 || v == 1.0)
}

impl FeatureVector {
    pub fn dense(values: Vec<f64>) -> Self {
        let binary = all_binary(&values);
        Self {
            dim: values.len(),
            storage: Storage::Dense(values),
            binary,
        }
    }

    /// Builds a sparse vector. Indices must be strictly increasing and `< dim`.
    pub fn sparse(dim: usize, pairs: Vec<(usize, f64)>) -> Result<Self> {
        let (indices, values): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
        Self::from_parts(dim, indices, values)
    }

    /// Sparse vector with value 1 at each listed index.
    pub fn binary(dim: usize, indices: Vec<usize>) -> Result<Self> {
        let values = vec![1.0; indices.len()];
        Self::from_parts(dim, indices, values)
    }

    fn from_parts(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSparse(format!(
                    "indices not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::InvalidSparse(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        let binary = all_binary(&values);
        Ok(Self {
            dim,
            storage: Storage::Sparse { indices, values },
            binary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of structurally non-zero entries (m). Equals `dim` for dense storage.
    pub fn active_count(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Sparse { indices, .. } => indices.len(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn get(&self, i: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[i],
            Storage::Sparse { indices, values } => match indices.binary_search(&i) {
                Ok(pos) => values[pos],
                Err(_) => 0.0,
            },
        }
    }

    /// Active entries in ascending index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match &self.storage {
            Storage::Dense(v) => Box::new(v.iter().copied().enumerate()),
            Storage::Sparse { indices, values } => {
                Box::new(indices.iter().copied().zip(values.iter().copied()))
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Sparse { indices, values } => {
                let mut out = vec![0.0; self.dim];
                for (&i, &v) in indices.iter().zip(values) {
                    out[i] = v;
                }
                out
            }
        }
    }

    pub fn densified(&self) -> Self {
        Self::dense(self.to_dense())
    }

    /// First entry that is neither 0 nor 1, if any.
    pub fn first_non_binary(&self) -> Option<(usize, f64)> {
        self.iter().find(|&(_, v)| v != 0.0 && v != 1.0)
    }

    pub fn squared_norm(&self) -> f64 {
        self.iter().map(|(_, v)| v * v).sum()
    }

    /// Applies `f(index, value)` to each active entry.
    #[inline]
    pub(crate) fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Dense(v) => {
                for (i, &x) in v.iter().enumerate() {
                    f(i, x);
                }
            }
            Storage::Sparse { indices, values } => {
                for (&i, &x) in indices.iter().zip(values) {
                    f(i, x);
                }
            }
        }
    }
}

/// Dense weight vector theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Inner product over `phi`'s active entries in ascending index order.
///
/// Costs m multiplications and m - 1 additions.
pub fn dot(w: &[f64], phi: &FeatureVector, ops: &mut impl OpSink) -> Result<f64> {
    check_dim(w.len(), phi.dim())?;
    Ok(dot_unchecked(w, phi, ops))
}

#[inline]
pub(crate) fn dot_unchecked(w: &[f64], phi: &FeatureVector, ops: &mut impl OpSink) -> f64 {
    let m = phi.active_count() as u64;
    if m == 0 {
        return 0.0;
    }
    ops.mul(m);
    ops.add(m - 1);
    match &phi.storage {
        Storage::Dense(v) => {
            let mut acc = w[0] * v[0];
            for i in 1..v.len() {
                acc += w[i] * v[i];
            }
            acc
        }
        Storage::Sparse { indices, values } => {
            let mut acc = w[indices[0]] * values[0];
            for j in 1..indices.len() {
                acc += w[indices[j]] * values[j];
            }
            acc
        }
    }
}

/// `w <- w + scalar * phi`, touching only `phi`'s support. Costs 2m.
pub fn axpy_into(
    w: &mut [f64],
    scalar: f64,
    phi: &FeatureVector,
    ops: &mut impl OpSink,
) -> Result<()> {
    check_dim(w.len(), phi.dim())?;
    if !scalar.is_finite() {
        return Err(Error::NonFiniteScalar(scalar));
    }
    axpy_unchecked(w, scalar, phi, ops);
    Ok(())
}

#[inline]
pub(crate) fn axpy_unchecked(w: &mut [f64], scalar: f64, phi: &FeatureVector, ops: &mut impl OpSink) {
    let m = phi.active_count() as u64;
    ops.mul(m);
    ops.add(m);
    match &phi.storage {
        Storage::Dense(v) => {
            for (wi, &x) in w.iter_mut().zip(v) {
                *wi += scalar * x;
            }
        }
        Storage::Sparse { indices, values } => {
            for (&i, &x) in indices.iter().zip(values) {
                w[i] += scalar * x;
            }
        }
    }
}

/// `w <- w + scalar * x` for a dense `x`. Costs 2n.
pub fn axpy_dense(w: &mut [f64], scalar: f64, x: &[f64], ops: &mut impl OpSink) -> Result<()> {
    check_dim(w.len(), x.len())?;
    if !scalar.is_finite() {
        return Err(Error::NonFiniteScalar(scalar));
    }
    ops.mul(x.len() as u64);
    ops.add(x.len() as u64);
    for (wi, &xi) in w.iter_mut().zip(x) {
        *wi += scalar * xi;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_examples() {
        let mut ops = OpCounter::new();
        let d = FeatureVector::dense(vec![1.0, 1.0, 1.0]);
        assert_eq!(dot(&[1.0, 2.0, 3.0], &d, &mut ops).unwrap(), 6.0);
        assert_eq!(ops.multiplications, 3);
        assert_eq!(ops.additions, 2);

        let empty = FeatureVector::sparse(2, vec![]).unwrap();
        ops.reset();
        assert_eq!(dot(&[5.0, 5.0], &empty, &mut ops).unwrap(), 0.0);
        assert_eq!(ops.total(), 0);

        let s = FeatureVector::sparse(3, vec![(0, 1.0), (2, 1.0)]).unwrap();
        assert_eq!(dot(&[0.5, -1.0, 2.0], &s, &mut NoOps).unwrap(), 2.5);
    }

    #[test]
    fn dot_rejects_mismatch() {
        let d = FeatureVector::dense(vec![1.0, 1.0]);
        assert!(matches!(
            dot(&[1.0, 2.0, 3.0], &d, &mut NoOps),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn axpy_examples() {
        let any = FeatureVector::dense(vec![7.0, -3.0]);
        let mut w = vec![1.0, 1.0];
        axpy_into(&mut w, 0.0, &any, &mut NoOps).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);

        let mut ops = OpCounter::new();
        axpy_into(&mut w, 2.0, &FeatureVector::dense(vec![1.0, 3.0]), &mut ops).unwrap();
        assert_eq!(w, vec![3.0, 7.0]);
        assert_eq!(ops.total(), 4);

        let mut w = vec![0.0; 3];
        let v = FeatureVector::sparse(3, vec![(1, 4.0)]).unwrap();
        axpy_into(&mut w, 1.0, &v, &mut NoOps).unwrap();
        assert_eq!(w, vec![0.0, 4.0, 0.0]);
    }

    #[test]
    fn axpy_rejects_bad_input() {
        let v = FeatureVector::dense(vec![1.0]);
        let mut w = vec![0.0];
        assert!(matches!(
            axpy_into(&mut w, f64::NAN, &v, &mut NoOps),
            Err(Error::NonFiniteScalar(_))
        ));
        assert!(axpy_into(&mut [0.0, 0.0], 1.0, &v, &mut NoOps).is_err());
        assert!(axpy_dense(&mut w, f64::INFINITY, &[1.0], &mut NoOps).is_err());
    }

    #[test]
    fn sparse_construction_checks_indices() {
        assert!(FeatureVector::sparse(3, vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(FeatureVector::sparse(3, vec![(2, 1.0), (1, 2.0)]).is_err());
        assert!(FeatureVector::binary(3, vec![3]).is_err());
        let v = FeatureVector::binary(5, vec![0, 4]).unwrap();
        assert!(v.is_binary());
        assert_eq!(v.active_count(), 2);
        assert_eq!(v.get(4), 1.0);
        assert_eq!(v.get(3), 0.0);
        let nb = FeatureVector::sparse(5, vec![(2, 0.5)]).unwrap();
        assert_eq!(nb.first_non_binary(), Some((2, 0.5)));
    }

    fn sparse_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<(usize, f64)>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::btree_map(0..n, -1e3f64..1e3, 0..=n),
            )
                .prop_map(|(w, m)| (w, m.into_iter().collect()))
        })
    }

    proptest! {
        #[test]
        fn sparse_dot_equals_dense_dot((w, pairs) in sparse_strategy()) {
            let s = FeatureVector::sparse(w.len(), pairs).unwrap();
            let d = s.densified();
            let a = dot(&w, &s, &mut NoOps).unwrap();
            let b = dot(&w, &d, &mut NoOps).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn sparse_axpy_stays_on_support((w, pairs) in sparse_strategy(), scalar in -10f64..10.0) {
            let s = FeatureVector::sparse(w.len(), pairs).unwrap();
            let mut out = w.clone();
            axpy_into(&mut out, scalar, &s, &mut NoOps).unwrap();
            for i in 0..w.len() {
                if s.iter().all(|(j, _)| j != i) {
                    prop_assert_eq!(out[i].to_bits(), w[i].to_bits());
                }
            }
        }
    }
}
