use super::SparseSym;

/// Symmetric linear operator `y = A x`.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymOperator for SparseSym {
    fn dim(&self) -> usize {
        SparseSym::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv(x, y)
    }
}

/// Banded square 1D matrix stored row by row as `(first column, values)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded1D {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Banded1D {
    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let rows = (0..a.nrows())
            .map(|r| {
                let nz: Vec<usize> = (0..a.ncols()).filter(|&c| a[(r, c)] != 0.0).collect();
                match (nz.first(), nz.last()) {
                    (Some(&lo), Some(&hi)) => (lo, (lo..=hi).map(|c| a[(r, c)]).collect()),
                    _ => (0, Vec::new()),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Applies the matrix along axis `axis` of an `n x n x n` array stored
    /// x fastest.
    fn apply_axis(&self, axis: usize, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let stride = [1, n, n * n][axis];
        let (s1, s2) = match axis {
            0 => (n, n * n),
            1 => (1, n * n),
            _ => (1, n),
        };
        for b in 0..n {
            for a in 0..n {
                let base = a * s1 + b * s2;
                for (r, (lo, vals)) in self.rows.iter().enumerate() {
                    let mut acc = 0.0;
                    for (j, v) in vals.iter().enumerate() {
                        acc += v * x[base + (lo + j) * stride];
                    }
                    y[base + r * stride] = acc;
                }
            }
        }
    }
}

/// `s (K (x) M (x) M + M (x) K (x) M + M (x) M (x) K)` on a tensor-product
/// grid of `n^3` DOFs numbered x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorStiffness {
    k1: Banded1D,
    m1: Banded1D,
    scale: f64,
}

impl TensorStiffness {
    pub fn new(k1: Banded1D, m1: Banded1D, scale: f64) -> Self {
        assert_eq!(k1.dim(), m1.dim());
        Self { k1, m1, scale }
    }
}

impl SymOperator for TensorStiffness {
    fn dim(&self) -> usize {
        self.k1.dim().pow(3)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        // y = Kx My Mz x + Mx (Ky Mz x + My Kz x)
        self.m1.apply_axis(2, x, &mut a);
        self.m1.apply_axis(1, &a, &mut b);
        self.k1.apply_axis(0, &b, y);
        self.k1.apply_axis(1, &a, &mut b);
        self.k1.apply_axis(2, x, &mut a);
        self.m1.apply_axis(1, &a, &mut c);
        for (bi, ci) in b.iter_mut().zip(&c) {
            *bi += ci;
        }
        self.m1.apply_axis(0, &b, &mut c);
        for (yi, ci) in y.iter_mut().zip(&c) {
            *yi = self.scale * (*yi + ci);
        }
    }
}
