use std::collections::HashSet;

use nalgebra::DMatrix;

use super::{check_len, LinalgError};

/// Compressed sparse row matrix with cached squared row norms.
///
/// Column indices are strictly increasing within a row. `row_norms_sq[i]` is the sum of
/// squares of the stored values of row `i`, accumulated in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    row_norms_sq: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a canonical CSR matrix from 0-based `(row, col, value)` triplets.
    ///
    /// Duplicate coordinates are rejected rather than summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        for &(row, col, _) in triplets {
            if row >= nrows || col >= ncols {
                return Err(LinalgError::IndexOutOfRange {
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(LinalgError::DuplicateEntry {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }

        let mut row_offsets = vec![0usize; nrows + 1];
        for &(r, _, _) in &sorted {
            row_offsets[r + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = sorted.iter().map(|t| t.1).collect();
        let values = sorted.iter().map(|t| t.2).collect();
        Ok(Self::from_parts(nrows, ncols, row_offsets, col_indices, values))
    }

    /// Assembles a matrix from CSR arrays that are already canonical.
    pub(crate) fn from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), nrows + 1);
        debug_assert_eq!(col_indices.len(), values.len());
        let row_norms_sq = (0..nrows)
            .map(|i| {
                values[row_offsets[i]..row_offsets[i + 1]]
                    .iter()
                    .map(|v| v * v)
                    .sum()
            })
            .collect();
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
            row_norms_sq,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    /// Square diagonal matrix. Zero diagonal entries are stored explicitly.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_parts(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Copies a dense row-major array.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len(ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries divided by `m * n`.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.nrows as f64 * self.ncols as f64)
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    #[inline]
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norms_sq[i]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `A^(i) x`
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `x += scale * (A^(i))^T`
    #[inline]
    pub fn add_row_to(&self, i: usize, scale: f64, x: &mut [f64]) {
        let (cols, vals) = self.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            x[c] += scale * v;
        }
    }

    /// Iterates over stored entries in row-major order as 0-based triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    /// `A x`
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.ncols, x.len())?;
        let mut out = vec![0.0; self.nrows];
        self.spmv_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    /// `A^T y`
    pub fn spmv_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.nrows, y.len())?;
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.add_row_to(i, yi, &mut out);
            }
        }
        Ok(out)
    }

    /// `||A||_F^2`, summed row by row over the cached row norms.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.row_norms_sq.iter().sum()
    }

    /// Copies the rows listed in `rows` (in that order) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, LinalgError> {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &i in rows {
            if i >= self.nrows {
                return Err(LinalgError::RowOutOfRange {
                    index: i,
                    nrows: self.nrows,
                });
            }
            let (cols, vals) = self.row(i);
            col_indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_offsets.push(col_indices.len());
        }
        Ok(Self::from_parts(
            rows.len(),
            self.ncols,
            row_offsets,
            col_indices,
            values,
        ))
    }

    /// Returns a copy with row `i` scaled by `scales[i]`.
    pub(crate) fn scale_rows(&self, scales: &[f64]) -> Self {
        let mut values = self.values.clone();
        for (i, &s) in scales.iter().enumerate() {
            for v in &mut values[self.row_offsets[i]..self.row_offsets[i + 1]] {
                *v *= s;
            }
        }
        Self::from_parts(
            self.nrows,
            self.ncols,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            values,
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    /// Checked view of the rows in `indices`.
    pub fn block<'a>(&'a self, indices: &'a [usize]) -> Result<RowBlockView<'a>, LinalgError> {
        RowBlockView::new(self, indices)
    }

    /// View over every row, in order.
    pub fn full_view(&self) -> RowBlockView<'_> {
        RowBlockView {
            parent: self,
            indices: RowSet::All,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RowSet<'a> {
    All,
    Listed(&'a [usize]),
}

/// The row submatrix `A_V` selected by an ordered list of distinct row indices.
#[derive(Debug, Clone, Copy)]
pub struct RowBlockView<'a> {
    parent: &'a SparseMatrix,
    indices: RowSet<'a>,
}

impl<'a> RowBlockView<'a> {
    pub fn new(parent: &'a SparseMatrix, indices: &'a [usize]) -> Result<Self, LinalgError> {
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in indices {
            if i >= parent.nrows {
                return Err(LinalgError::RowOutOfRange {
                    index: i,
                    nrows: parent.nrows,
                });
            }
            if !seen.insert(i) {
                return Err(LinalgError::DuplicateRow { index: i });
            }
        }
        Ok(Self::new_unchecked(parent, indices))
    }

    /// For index lists already validated elsewhere (partition blocks).
    pub(crate) fn new_unchecked(parent: &'a SparseMatrix, indices: &'a [usize]) -> Self {
        Self {
            parent,
            indices: RowSet::Listed(indices),
        }
    }

    pub fn parent(&self) -> &'a SparseMatrix {
        self.parent
    }

    pub fn len(&self) -> usize {
        match self.indices {
            RowSet::All => self.parent.nrows,
            RowSet::Listed(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ncols(&self) -> usize {
        self.parent.ncols
    }

    /// Parent row index of the `j`-th row of the block.
    #[inline]
    pub fn row_index(&self, j: usize) -> usize {
        match self.indices {
            RowSet::All => j,
            RowSet::Listed(ix) => ix[j],
        }
    }

    pub fn row_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(move |j| self.row_index(j))
    }

    /// `A_V x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.parent.ncols, x.len())?;
        let mut out = vec![0.0; self.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.parent.row_dot(self.row_index(j), x);
        }
    }

    /// `A_V^T y`
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.len(), y.len())?;
        let mut out = vec![0.0; self.parent.ncols];
        self.apply_transpose_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &yj) in y.iter().enumerate() {
            if yj != 0.0 {
                self.parent.add_row_to(self.row_index(j), yj, out);
            }
        }
    }

    /// `b_V - A_V x`
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.parent.nrows, b.len())?;
        check_len(self.parent.ncols, x.len())?;
        Ok((0..self.len())
            .map(|j| {
                let i = self.row_index(j);
                b[i] - self.parent.row_dot(i, x)
            })
            .collect())
    }

    /// `||A_V||_F^2` from the parent's cached row norms.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.row_indices().map(|i| self.parent.row_norm_sq(i)).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), self.parent.ncols);
        for j in 0..self.len() {
            let (cols, vals) = self.parent.row(self.row_index(j));
            for (&c, &v) in cols.iter().zip(vals) {
                out[(j, c)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upper() -> SparseMatrix {
        SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap()
    }

    #[test]
    fn triplets_build_identity() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(a, SparseMatrix::identity(2));
        assert_eq!(a.row_norms_sq(), &[1.0, 1.0]);
    }

    #[test]
    fn three_four_five_row() {
        let a = SparseMatrix::from_triplets(1, 2, &[(0, 1, 4.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(a.row_norms_sq(), &[25.0]);
        assert_eq!(a.col_indices(), &[0, 1]);
        assert_eq!(a.frobenius_norm_sq(), 25.0);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let a = SparseMatrix::from_triplets(2, 2, &[]).unwrap();
        assert_eq!(a.row_norms_sq(), &[0.0, 0.0]);
        assert_eq!(a.row_offsets(), &[0, 0, 0]);
        assert_eq!(a.spmv(&[5.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(a.frobenius_norm_sq(), 0.0);
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(matches!(
            SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]),
            Err(LinalgError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]),
            Err(LinalgError::DuplicateEntry { row: 0, col: 1 })
        ));
    }

    #[test]
    fn spmv_cases() {
        assert_eq!(
            SparseMatrix::identity(2).spmv(&[3.0, -1.0]).unwrap(),
            vec![3.0, -1.0]
        );
        assert_eq!(upper().spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(
            upper().spmv(&[1.0]),
            Err(LinalgError::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn transpose_block_cases() {
        let id3 = SparseMatrix::identity(3);
        let v = id3.block(&[0]).unwrap();
        assert_eq!(v.apply_transpose(&[5.0]).unwrap(), vec![5.0, 0.0, 0.0]);
        assert_eq!(v.apply_transpose(&[0.0]).unwrap(), vec![0.0; 3]);

        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let v = a.block(&[0, 1]).unwrap();
        assert_eq!(v.apply_transpose(&[1.0, 2.0]).unwrap(), vec![3.0, 2.0]);
        assert!(v.apply_transpose(&[1.0]).is_err());
    }

    #[test]
    fn block_view_validation() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(
            a.block(&[0, 3]),
            Err(LinalgError::RowOutOfRange { index: 3, .. })
        ));
        assert!(matches!(
            a.block(&[1, 1]),
            Err(LinalgError::DuplicateRow { index: 1 })
        ));
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(SparseMatrix::identity(7).frobenius_norm_sq(), 7.0);
        let a = SparseMatrix::from_dense_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.frobenius_norm_sq(), 25.0);
        let id = SparseMatrix::identity(4);
        assert_eq!(id.block(&[3, 1]).unwrap().frobenius_norm_sq(), 2.0);
    }

    #[test]
    fn block_residual_and_dense() {
        let a = upper();
        let v = a.block(&[1]).unwrap();
        assert_eq!(v.residual(&[0.0, 7.0], &[1.0, 1.0]).unwrap(), vec![4.0]);
        assert_eq!(v.to_dense(), DMatrix::from_row_slice(1, 2, &[0.0, 3.0]));
        assert_eq!(a.full_view().len(), 2);
    }
}
