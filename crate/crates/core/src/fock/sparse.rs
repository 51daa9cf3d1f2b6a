//! Compressed-sparse-row complex matrices.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::scalar::{czero, Complex, Real};

/// Relative magnitude below which entries are treated as structural zeros.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Complex sparse matrix in CSR layout.
///
/// Column indices within each row are sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T: Real> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex<T>>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex::new(T::one(), T::zero()); n])
    }

    pub fn diagonal(diag: &[Complex<T>]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// and dropping entries smaller than [`DROP_TOLERANCE`] relative to the
    /// largest magnitude.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex<T>)>,
    {
        let mut m = Self::from_triplets_keep_zeros(nrows, ncols, triplets);
        m.prune(T::lit(DROP_TOLERANCE));
        m
    }

    /// Like [`from_triplets`](Self::from_triplets) but keeps every position
    /// that appeared in the input, even if its value cancels to zero. Used
    /// when a fixed sparsity pattern must be shared between matrices.
    pub fn from_triplets_keep_zeros<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex<T>)>,
    {
        let mut entries: Vec<(usize, usize, Complex<T>)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<Complex<T>> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    /// Removes entries with `|v| <= rel_tol * max|v|` (and exact zeros).
    pub fn prune(&mut self, rel_tol: T) {
        let cutoff = self.max_abs() * rel_tol;
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[k];
                if v.norm() > cutoff && v != czero() {
                    indices.push(self.indices[k]);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
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

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Iterates over stored entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex<T>)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => czero(),
        }
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    /// True when both matrices store exactly the same positions.
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets_keep_zeros(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets_keep_zeros(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch in sum");
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .map(|(r, c, v)| (r, c, v * a))
                .chain(other.triplets().map(|(r, c, v)| (r, c, v * b))),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let one = Complex::new(T::one(), T::zero());
        self.axpby(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let one = Complex::new(T::one(), T::zero());
        self.axpby(one, other, -one)
    }

    /// Sparse matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "inner dimension mismatch");
        let mut acc = vec![czero::<T>(); rhs.ncols];
        let mut touched = vec![false; rhs.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut trip = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &cols {
                trip.push((r, c, acc[c]));
                acc[c] = czero();
                touched[c] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, rhs.ncols, trip)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() * rhs.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in rhs.triplets() {
                trip.push((r1 * rhs.nrows + r2, c1 * rhs.ncols + c2, v1 * v2));
            }
        }
        Self::from_triplets_keep_zeros(self.nrows * rhs.nrows, self.ncols * rhs.ncols, trip)
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.ncols, "vector length mismatch");
        (0..self.nrows)
            .map(|r| self.row(r).fold(czero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    /// Row vector product `yᵀ · self`.
    pub fn vecmat(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(y.len(), self.nrows, "vector length mismatch");
        let mut out = vec![czero(); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[c] += y[r] * v;
            }
        }
        out
    }

    /// Squared Euclidean norm of each row.
    pub fn row_norms_sqr(&self) -> Vec<T> {
        (0..self.nrows).map(|r| self.row(r).fold(T::zero(), |acc, (_, v)| acc + v.norm_sqr())).collect()
    }

    pub fn to_dense(&self) -> Mat<Complex<T>> {
        let mut m = Mat::<Complex<T>>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(m: &Mat<Complex<T>>) -> Self {
        let (nr, nc) = (m.nrows(), m.ncols());
        Self::from_triplets(
            nr,
            nc,
            (0..nr).flat_map(|r| (0..nc).map(move |c| (r, c))).map(|(r, c)| (r, c, m[(r, c)])),
        )
    }

    /// Conversion into `faer`'s compressed-sparse-column type.
    pub fn to_faer(&self) -> SparseColMat<usize, Complex<T>> {
        let trip: Vec<Triplet<usize, usize, Complex<T>>> =
            self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .expect("valid triplets from a CSR matrix")
    }

    /// Largest entrywise deviation `max |self − other|`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.sub(other).max_abs()
    }

    /// Largest entrywise deviation from Hermiticity, `max |A − A†|`.
    pub fn hermiticity_defect(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.nrows.min(self.ncols)).fold(czero(), |acc, i| acc + self.get(i, i))
    }
}
