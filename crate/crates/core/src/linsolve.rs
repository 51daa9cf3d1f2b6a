//! Sparse linear solvers for vectorized generators.
//!
//! Both the steady state and the first-order response solve a system
//! `A x = b` where `A` is a vectorized generator, possibly shifted by a
//! multiple of the identity. One diagonal-population row is replaced by the
//! trace functional, which removes the zero mode of the generator without
//! changing the row space for a shifted system.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::Mat;

use crate::error::{Error, Result};
use crate::fock::SparseMatrix;
use crate::scalar::{czero, Complex, Real};

/// Index of the diagonal-population row `ρ_ii` with the smallest norm.
///
/// Ties resolve to the lowest index so the choice is reproducible.
pub(crate) fn trace_row_index<T: Real>(a: &SparseMatrix<T>, d: usize) -> usize {
    let norms = a.row_norms_sqr();
    let mut best = 0;
    for i in 1..d {
        if norms[i * d + i] < norms[best * d + best] {
            best = i;
        }
    }
    best * d + best
}

/// Square system with row `row` replaced by `weight · vec(1)ᵀ`.
#[derive(Clone, Debug)]
pub(crate) struct BorderedSystem<T: Real> {
    pub matrix: SparseMatrix<T>,
    pub row: usize,
    pub weight: T,
}

impl<T: Real> BorderedSystem<T> {
    pub fn new(a: &SparseMatrix<T>, d: usize, row: usize) -> Self {
        let weight = a.max_abs().max(T::min_positive_value());
        let w = Complex::new(weight, T::zero());
        let matrix = SparseMatrix::from_triplets_keep_zeros(
            a.nrows(),
            a.ncols(),
            a.triplets().filter(|&(r, _, _)| r != row).chain((0..d).map(|i| (row, i * d + i, w))),
        );
        Self { matrix, row, weight }
    }

    /// Right-hand side `b` with the bordered entry set to `weight · trace`.
    pub fn rhs(&self, b: &[Complex<T>], trace: Complex<T>) -> Vec<Complex<T>> {
        let mut out = b.to_vec();
        out[self.row] = trace * self.weight;
        out
    }
}

/// Counters reported alongside a solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveInfo {
    /// `true` for sparse LU, `false` for the preconditioned iterative path.
    pub direct: bool,
    /// Iterative refinement steps or Krylov iterations performed.
    pub iterations: usize,
    /// Stored nonzeros of the system matrix.
    pub nnz: usize,
    /// Whether a cached symbolic factorization was reused.
    pub reused_symbolic: bool,
}

fn solver_err<E: std::fmt::Debug>(stage: &str, e: E) -> Error {
    Error::Solver { reason: format!("{stage}: {e:?}"), residual: f64::NAN }
}

/// Sparse LU with an optional cached symbolic analysis.
///
/// Matrices passed to [`factor`](Self::factor) after the first must share
/// the sparsity pattern of the first one.
#[derive(Clone, Default)]
pub(crate) struct DirectSolver {
    symbolic: Option<SymbolicLu<usize>>,
}

pub(crate) struct Factorization<'a, T: Real> {
    lu: Lu<usize, Complex<T>>,
    matrix: &'a SparseMatrix<T>,
    reused: bool,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Computes and caches the symbolic analysis of `a`.
    pub fn analyze<T: Real>(&mut self, a: &SparseMatrix<T>) -> Result<()> {
        let fa = a.to_faer();
        self.symbolic = Some(SymbolicLu::try_new(fa.symbolic()).map_err(|e| solver_err("symbolic LU", e))?);
        Ok(())
    }

    pub fn factor<'a, T: Real>(&mut self, a: &'a SparseMatrix<T>) -> Result<Factorization<'a, T>> {
        let fa = a.to_faer();
        let reused = self.symbolic.is_some();
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(fa.symbolic()).map_err(|e| solver_err("symbolic LU", e))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, fa.as_ref()).map_err(|e| solver_err("numeric LU", e))?;
        Ok(Factorization { lu, matrix: a, reused })
    }
}

impl<T: Real> Factorization<'_, T> {
    fn raw_solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut x = Mat::<Complex<T>>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b` with `refine` steps of iterative refinement.
    pub fn solve(&self, b: &[Complex<T>], refine: usize) -> (Vec<Complex<T>>, SolveInfo) {
        let mut x = self.raw_solve(b);
        for _ in 0..refine {
            let ax = self.matrix.matvec(&x);
            let r: Vec<_> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
            let dx = self.raw_solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        let info = SolveInfo { direct: true, iterations: refine, nnz: self.matrix.nnz(), reused_symbolic: self.reused };
        (x, info)
    }
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB.
///
/// Returns the solution and the iteration count, or a solver error carrying
/// the last relative residual.
pub(crate) fn bicgstab<T: Real>(
    a: &SparseMatrix<T>,
    b: &[Complex<T>],
    rel_tol: T,
    max_iter: usize,
) -> Result<(Vec<Complex<T>>, SolveInfo)> {
    let n = b.len();
    let one = Complex::new(T::one(), T::zero());
    let inv_diag: Vec<Complex<T>> = (0..n)
        .map(|i| {
            let v = a.get(i, i);
            if v.norm() > T::zero() {
                one / v
            } else {
                one
            }
        })
        .collect();
    let precond = |v: &[Complex<T>]| -> Vec<Complex<T>> { v.iter().zip(&inv_diag).map(|(x, d)| *x * *d).collect() };

    let b_norm = norm(b).max(T::min_positive_value());
    let mut x = vec![czero::<T>(); n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (one, one, one);
    let mut v = vec![czero::<T>(); n];
    let mut p = vec![czero::<T>(); n];
    let mut rel = T::one();
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        v = a.matvec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<_> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let z = precond(&s);
        let t = a.matvec(&z);
        let tt = dot(&t, &t);
        omega = if tt.norm() > T::zero() { dot(&t, &s) / tt } else { czero() };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= rel_tol {
            return Ok((x, SolveInfo { direct: false, iterations: it, nnz: a.nnz(), reused_symbolic: false }));
        }
        if !rel.is_finite() || omega.norm() == T::zero() {
            break;
        }
    }
    Err(Error::Solver { reason: "BiCGSTAB did not converge".into(), residual: rel.to_f64_lossy() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex<f64> {
        Complex::new(x, y)
    }

    fn test_matrix(n: usize) -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(
            n,
            n,
            (0..n).flat_map(|i| {
                let mut t = vec![(i, i, c(4.0 + i as f64, 0.5))];
                if i + 1 < n {
                    t.push((i, i + 1, c(-1.0, 0.2)));
                    t.push((i + 1, i, c(-0.5, -0.1)));
                }
                t
            }),
        )
    }

    #[test]
    fn direct_and_iterative_agree_with_dense() {
        let a = test_matrix(30);
        let b: Vec<_> = (0..30).map(|i| c(i as f64, 1.0)).collect();
        // Oracle: dense partial-pivot LU.
        let dense = a.to_dense();
        let mut rhs = Mat::<Complex<f64>>::from_fn(30, 1, |i, _| b[i]);
        dense.partial_piv_lu().solve_in_place(rhs.as_mut());

        let mut solver = DirectSolver::new();
        let f = solver.factor(&a).unwrap();
        let (x, info) = f.solve(&b, 1);
        assert!(info.direct && !info.reused_symbolic);
        let (y, _) = bicgstab(&a, &b, 1e-13, 200).unwrap();
        for i in 0..30 {
            assert!((x[i] - rhs[(i, 0)]).norm() < 1e-12);
            assert!((y[i] - rhs[(i, 0)]).norm() < 1e-10);
        }
        let a2 = a.scale(c(2.0, 0.0));
        let (x2, info2) = solver.factor(&a2).unwrap().solve(&b, 0);
        assert!(info2.reused_symbolic);
        assert!((x2[3] * 2.0 - x[3]).norm() < 1e-12);
    }

    #[test]
    fn bordered_row_holds_trace_functional() {
        let a = test_matrix(9);
        let sys = BorderedSystem::new(&a, 3, 4);
        assert_eq!(sys.matrix.get(4, 0), c(sys.weight, 0.0));
        assert_eq!(sys.matrix.get(4, 8), c(sys.weight, 0.0));
        assert_eq!(sys.matrix.get(4, 3), c(0.0, 0.0));
        assert_eq!(sys.matrix.get(4, 5), c(0.0, 0.0));
        let rhs = sys.rhs(&[c(1.0, 0.0); 9], c(1.0, 0.0));
        assert_eq!(rhs[4], c(sys.weight, 0.0));
    }
}
