//! Symmetric sparse matrices in CSR layout.
//!
//! Both triangles are stored, so a row slice doubles as the adjacency list of
//! the matrix graph. The same structure is instantiated at `f64` (the working
//! matrix) and `f32` (the reduced copy used by the single-precision stage).
//! All kernels run in the arithmetic of the element type; there is no wider
//! accumulation.

mod mtx;

pub use mtx::{
    read_matrix_market, read_matrix_market_from, write_matrix_market, write_matrix_market_to,
};

use std::fmt::{Debug, Display, LowerExp};

use num_traits::Float;
use thiserror::Error;

/// Floating-point element type of a matrix or vector.
pub trait Real: Float + Debug + Display + LowerExp + Send + Sync + 'static {
    /// Short name of the precision level, used in error messages.
    const PRECISION: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const PRECISION: &'static str = "binary32";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: &'static str = "binary64";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("entry ({row}, {col}) has no matching mirror entry with an identical value")]
    AsymmetricInput { row: usize, col: usize },
    #[error("diagonal entry ({0}, {0}) is missing")]
    MissingDiagonal(usize),
    #[error("entry ({row}, {col}) appears more than once")]
    DuplicateEntry { row: usize, col: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteValue { row: usize, col: usize },
    #[error("matrix dimension must be positive")]
    EmptyMatrix,
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("value at position {index} overflows binary32")]
    OverflowToInfinity { index: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How `from_coordinates` treats the input triplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Both halves are present in the input and must match exactly.
    Full,
    /// Only one of each off-diagonal pair is given; its mirror is added.
    Mirror,
}

/// Symmetric matrix with full (both-triangle) CSR storage.
///
/// Invariants: `row_starts` is nondecreasing from 0 to `nnz`; column indices
/// strictly increase within each row; every stored `(i, j, v)` has a mirror
/// `(j, i, v)` with the same bit pattern; every diagonal entry is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCsr<T> {
    n: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

/// Working matrix in binary64.
pub type SparseSymMatrix = SymCsr<f64>;
/// Reduced copy of a working matrix in binary32.
pub type ReducedMatrix = SymCsr<f32>;

impl SparseSymMatrix {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Explicit zeros are dropped after duplicate detection, so a zero on the
    /// diagonal is reported as a missing diagonal.
    pub fn from_coordinates(
        n: usize,
        triplets: &[(usize, usize, f64)],
        symmetry: Symmetry,
    ) -> Result<Self, SparseError> {
        if n == 0 {
            return Err(SparseError::EmptyMatrix);
        }
        let mut entries = Vec::with_capacity(match symmetry {
            Symmetry::Full => triplets.len(),
            Symmetry::Mirror => 2 * triplets.len(),
        });
        for &(row, col, value) in triplets {
            if row >= n || col >= n {
                return Err(SparseError::IndexOutOfRange { row, col, n });
            }
            if !value.is_finite() {
                return Err(SparseError::NonFiniteValue { row, col });
            }
            entries.push((row, col, value));
            if symmetry == Symmetry::Mirror && row != col {
                entries.push((col, row, value));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(SparseError::DuplicateEntry {
                row: w[0].0,
                col: w[0].1,
            });
        }
        entries.retain(|e| e.2 != 0.0);

        let mut row_starts = vec![0usize; n + 1];
        for &(row, _, _) in &entries {
            row_starts[row + 1] += 1;
        }
        for i in 0..n {
            row_starts[i + 1] += row_starts[i];
        }
        let col_indices = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        let matrix = SymCsr {
            n,
            row_starts,
            col_indices,
            values,
        };
        matrix.check_symmetry()?;
        matrix.check_diagonal()?;
        Ok(matrix)
    }

    /// Rounds every value to the nearest binary32, keeping the structure.
    pub fn downcast(&self) -> Result<ReducedMatrix, SparseError> {
        let values = downcast_vector(&self.values)?;
        Ok(SymCsr {
            n: self.n,
            row_starts: self.row_starts.clone(),
            col_indices: self.col_indices.clone(),
            values,
        })
    }
}

impl<T: Real> SymCsr<T> {
    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn from_csr_parts(
        n: usize,
        row_starts: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if n == 0 {
            return Err(SparseError::EmptyMatrix);
        }
        if row_starts.len() != n + 1 || row_starts[0] != 0 {
            return Err(SparseError::InvalidStructure(format!(
                "row_starts must have length {} and start at 0",
                n + 1
            )));
        }
        if row_starts[n] != col_indices.len() || col_indices.len() != values.len() {
            return Err(SparseError::InvalidStructure(
                "row_starts[n], col_indices and values disagree on nnz".into(),
            ));
        }
        for i in 0..n {
            if row_starts[i] > row_starts[i + 1] {
                return Err(SparseError::InvalidStructure(format!(
                    "row_starts decreases at row {i}"
                )));
            }
            let cols = &col_indices[row_starts[i]..row_starts[i + 1]];
            if let Some(&col) = cols.iter().find(|&&c| c >= n) {
                return Err(SparseError::IndexOutOfRange { row: i, col, n });
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::InvalidStructure(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let row = row_starts.partition_point(|&s| s <= k) - 1;
            return Err(SparseError::NonFiniteValue {
                row,
                col: col_indices[k],
            });
        }
        let matrix = SymCsr {
            n,
            row_starts,
            col_indices,
            values,
        };
        matrix.check_symmetry()?;
        matrix.check_diagonal()?;
        Ok(matrix)
    }

    fn check_symmetry(&self) -> Result<(), SparseError> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match self.get(j, i) {
                    Some(w) if w.to_f64().to_bits() == v.to_f64().to_bits() => {}
                    _ => return Err(SparseError::AsymmetricInput { row: i, col: j }),
                }
            }
        }
        Ok(())
    }

    fn check_diagonal(&self) -> Result<(), SparseError> {
        match (0..self.n).find(|&i| self.get(i, i).is_none()) {
            Some(i) => Err(SparseError::MissingDiagonal(i)),
            None => Ok(()),
        }
    }

    /// Dimension.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, counting both triangles and the diagonal.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_starts[i]..self.row_starts[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Stored value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.get(i, i).expect("diagonal is always stored"))
            .collect()
    }

    /// Number of off-diagonal entries in row `i`, i.e. the vertex degree in
    /// the matrix graph.
    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        let (cols, _) = self.row(i);
        cols.len() - usize::from(cols.binary_search(&i).is_ok())
    }

    /// Off-diagonal neighbours of vertex `i` in increasing order.
    #[inline]
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).0.iter().copied().filter(move |&j| j != i)
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        let mut y = vec![T::zero(); self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x` into a caller-provided buffer.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<(), SparseError> {
        if x.len() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        if y.len() != self.n {
            return Err(SparseError::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        self.apply(x, y);
        Ok(())
    }

    /// Unchecked kernel behind `spmv`; slices must have length `n`.
    #[inline]
    pub(crate) fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_starts[i]..self.row_starts[i + 1];
            let mut acc = T::zero();
            for (&j, &v) in self.col_indices[range.clone()]
                .iter()
                .zip(&self.values[range])
            {
                acc = acc + v * x[j];
            }
            *yi = acc;
        }
    }

    /// Copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        SymCsr {
            n: self.n,
            row_starts: self.row_starts.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Iterator over all stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

/// Rounds each component to the nearest binary32.
pub fn downcast_vector(x: &[f64]) -> Result<Vec<f32>, SparseError> {
    x.iter()
        .enumerate()
        .map(|(index, &v)| {
            let r = v as f32;
            if r.is_infinite() && v.is_finite() {
                Err(SparseError::OverflowToInfinity { index })
            } else {
                Ok(r)
            }
        })
        .collect()
}

/// Exact embedding of a binary32 vector into binary64.
pub fn upcast_vector(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
