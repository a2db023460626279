//! Small dense kernels over `f32` storage with `f64` accumulation.

use crate::opcount;

/// Dense matrix stored column by column: column `i` occupies
/// `data[i * rows..(i + 1) * rows]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl ColumnMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColumnMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from column-major data. Panics if the length is wrong.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "column-major buffer has wrong length");
        ColumnMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, i: usize) -> &[f32] {
        &self.data[i * self.rows..(i + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.rows..(i + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[col * self.rows + row] = v;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Scale column `i` down onto the ball of radius `bound` if it lies
    /// outside. Returns whether the column changed.
    pub fn clip_column(&mut self, i: usize, bound: f32) -> bool {
        let bound = bound as f64;
        let mut norm = l2_norm(self.col(i));
        if norm <= bound {
            return false;
        }
        let mut scale = bound / norm;
        // f32 rounding can leave the result a hair outside the ball; shrink
        // until it is inside so that projecting twice is a no-op.
        loop {
            for v in self.col_mut(i) {
                *v = (*v as f64 * scale) as f32;
            }
            norm = l2_norm(self.col(i));
            if norm <= bound {
                return true;
            }
            scale = 1.0 - 1e-7;
        }
    }

    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols)
            .map(|i| l2_norm(self.col(i)))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    opcount::add(a.len());
    a.iter().zip(b).map(|(x, y)| x * *y as f64).sum()
}

#[inline]
pub fn dot32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    opcount::add(a.len());
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

#[inline]
pub fn dot64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    opcount::add(a.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `acc += scale * x`
#[inline]
pub fn axpy(acc: &mut [f64], scale: f64, x: &[f32]) {
    debug_assert_eq!(acc.len(), x.len());
    opcount::add(x.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * *v as f64;
    }
}

pub fn l2_norm(x: &[f32]) -> f64 {
    x.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt()
}

pub fn l2_norm64(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
