//! Sparse real feature vectors.

use crate::error::{Error, Result};
use crate::opcount;

/// A sparse vector of fixed dimension with strictly increasing indices and
/// no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f32>,
}

impl SparseVector {
    /// The all-zero vector of dimension `dim`.
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSparse("dimension must be positive".into()));
        }
        Ok(SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Build from `(index, value)` pairs given in strictly increasing index
    /// order. Zero values are dropped.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f32)>) -> Result<Self> {
        let mut out = SparseVector::zeros(dim)?;
        for (idx, value) in entries {
            if idx >= dim {
                return Err(Error::InvalidSparse(format!(
                    "index {idx} out of range for dimension {dim}"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidSparse(format!("non-finite value at index {idx}")));
            }
            if let Some(&last) = out.indices.last() {
                if idx as u32 == last {
                    return Err(Error::InvalidSparse(format!("duplicate index {idx}")));
                }
                if (idx as u32) < last {
                    return Err(Error::InvalidSparse(format!(
                        "index {idx} follows {last}; indices must increase"
                    )));
                }
            }
            if value != 0.0 {
                out.indices.push(idx as u32);
                out.values.push(value);
            }
        }
        Ok(out)
    }

    /// Build from arbitrary-order pairs, summing duplicates.
    pub fn from_unsorted(dim: usize, mut entries: Vec<(usize, f32)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f32)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        SparseVector::new(dim, merged)
    }

    pub fn from_dense(values: &[f32]) -> Result<Self> {
        SparseVector::new(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f32)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn to_dense(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Sparse-sparse dot product by merging the two index lists.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0f64;
        let mut work = 0;
        while a < self.indices.len() && b < other.indices.len() {
            work += 1;
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] as f64 * other.values[b] as f64;
                    a += 1;
                    b += 1;
                }
            }
        }
        opcount::add(work);
        acc
    }

    /// `self * scale`, dropping entries that underflow to zero.
    pub fn scaled(&self, scale: f32) -> SparseVector {
        let mut out = SparseVector {
            dim: self.dim,
            indices: Vec::with_capacity(self.nnz()),
            values: Vec::with_capacity(self.nnz()),
        };
        for (i, v) in self.iter() {
            let s = v * scale;
            if s != 0.0 {
                out.indices.push(i as u32);
                out.values.push(s);
            }
        }
        out
    }

    /// Entries of `self - other` as `(index, value)` in increasing index order.
    /// Exact cancellations are omitted.
    pub fn difference(&self, other: &SparseVector) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut a, mut b) = (0, 0);
        while a < self.nnz() || b < other.nnz() {
            let ia = self.indices.get(a).copied().unwrap_or(u32::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(u32::MAX);
            let (idx, v) = if ia < ib {
                a += 1;
                (ia, self.values[a - 1] as f64)
            } else if ib < ia {
                b += 1;
                (ib, -(other.values[b - 1] as f64))
            } else {
                a += 1;
                b += 1;
                (ia, self.values[a - 1] as f64 - other.values[b - 1] as f64)
            };
            if v != 0.0 {
                out.push((idx as usize, v));
            }
        }
        out
    }

    /// Concatenate two feature blocks: `other`'s indices are offset by
    /// `self.dim()`.
    pub fn concat(&self, other: &SparseVector) -> SparseVector {
        let offset = self.dim as u32;
        let mut indices = self.indices.clone();
        indices.extend(other.indices.iter().map(|i| i + offset));
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        SparseVector {
            dim: self.dim + other.dim,
            indices,
            values,
        }
    }
}
