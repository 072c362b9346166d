use crate::error::{Error, Result};

/// Square sparse matrix in compressed sparse row form. Both triangles are
/// stored; column indices within a row are sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from raw CSR arrays, checking the structural invariants.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::invalid("inconsistent CSR array lengths"));
        }
        for r in 0..n {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::invalid("row pointers must be nondecreasing"));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.last().is_some_and(|&c| c >= n) {
                return Err(Error::invalid(format!("row {r}: column indices must be sorted, unique and < {n}")));
            }
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Sums duplicate entries. Structural symmetry is the caller's job.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(Error::invalid(format!("entry ({r}, {c}) outside a {n}x{n} matrix")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..n {
            counts[r + 1] += counts[r];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut fill = counts.clone();
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n {
            let (a, b) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(a..b);
            order.sort_by_key(|&i| cols[i]);
            for &i in &order {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == cols[i] {
                    *values.last_mut().unwrap() += vals[i];
                } else {
                    col_idx.push(cols[i]);
                    values.push(vals[i]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self { n: d.len(), row_ptr: (0..=d.len()).collect(), col_idx: (0..d.len()).collect(), values: d.to_vec() }
    }

    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if a[(r, c)] != 0.0 {
                    t.push((r, c, a[(r, c)]));
                }
            }
        }
        Self::from_triplets(n, &t).expect("dense input is square")
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                a[(r, c)] = v;
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Position of `(r, c)` in the value array, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let a = self.row_ptr[r];
        let cols = &self.col_idx[a..self.row_ptr[r + 1]];
        cols.binary_search(&c).ok().map(|i| a + i)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |i| self.values[i])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// True when no off-diagonal entry is stored.
    pub fn is_structurally_diagonal(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, _)| c == r))
    }

    /// `y = A x`, row by row in a fixed order.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut s = 0.0;
            for i in a..b {
                s += self.values[i] * x[self.col_idx[i]];
            }
            *yr = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.spmv(x, &mut y);
        y
    }

    /// Row sums, i.e. `A * 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `idx` (sorted, unique).
    pub fn principal_submatrix(&self, idx: &[usize]) -> SparseSym {
        self.submatrix(idx, idx)
    }

    /// Rows `rows` and columns `cols` (both sorted, unique) as a rectangular
    /// block, renumbered; returned as a [`RowBlock`].
    pub fn row_block(&self, rows: &[usize], cols: &[usize]) -> RowBlock {
        let mut map = vec![usize::MAX; self.n];
        for (i, &c) in cols.iter().enumerate() {
            map[c] = i;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    col_idx.push(map[c]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        RowBlock { n_cols: cols.len(), row_ptr, col_idx, values }
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseSym {
        let b = self.row_block(rows, cols);
        debug_assert_eq!(rows.len(), cols.len());
        SparseSym { n: rows.len(), row_ptr: b.row_ptr, col_idx: b.col_idx, values: b.values }
    }

    /// `self + s * other` on the union pattern.
    pub fn add_scaled(&self, s: f64, other: &SparseSym) -> Result<SparseSym> {
        if self.n != other.n {
            return Err(Error::invalid("dimension mismatch in matrix sum"));
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
            t.extend(other.row(r).map(|(c, v)| (r, c, s * v)));
        }
        SparseSym::from_triplets(self.n, &t)
    }
}

/// Rectangular CSR block, e.g. the rows of one DOF set against all columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl RowBlock {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows());
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[i] * x[self.col_idx[i]];
            }
            *yr = s;
        }
    }
}
