use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::scalar::{czero, Complex, Real};

use super::layout::{SpaceLayout, Subsystem};
use super::operator::Operator;

/// Reduced density matrix of a single subsystem.
pub type ModeDensity<T> = Mat<Complex<T>>;

pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

/// Dense density matrix on a composite layout.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Real> {
    layout: SpaceLayout,
    matrix: Mat<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps a matrix after checking shape, unit trace and Hermiticity.
    pub fn new(layout: SpaceLayout, matrix: Mat<Complex<T>>) -> Result<Self> {
        let rho = Self::new_unchecked(layout, matrix)?;
        let tr = rho.trace();
        if (tr - Complex::new(T::one(), T::zero())).norm() > T::lit(TRACE_TOLERANCE) {
            return Err(Error::InvalidParams(format!("density matrix trace {tr} differs from 1")));
        }
        let herm = rho.hermiticity_defect();
        if herm > T::lit(HERMITICITY_TOLERANCE) {
            return Err(Error::InvalidParams(format!("density matrix not Hermitian (defect {herm:e})")));
        }
        Ok(rho)
    }

    /// Wraps a matrix checking only its shape.
    pub fn new_unchecked(layout: SpaceLayout, matrix: Mat<Complex<T>>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), actual: matrix.nrows() });
        }
        Ok(Self { layout, matrix })
    }

    /// Projector onto the basis state `|q, n, m⟩`.
    pub fn basis_state(layout: SpaceLayout, q: usize, n: usize, m: usize) -> Self {
        let d = layout.dim();
        let i = layout.index(q, n, m);
        let mut matrix = Mat::<Complex<T>>::zeros(d, d);
        matrix[(i, i)] = Complex::new(T::one(), T::zero());
        Self { layout, matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(layout: SpaceLayout, psi: &[Complex<T>]) -> Result<Self> {
        let d = layout.dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: psi.len() });
        }
        let matrix = Mat::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
        Self::new(layout, matrix)
    }

    /// `ρ_q ⊗ ρ_c ⊗ ρ_j`.
    pub fn product(layout: SpaceLayout, qubit: &ModeDensity<T>, cavity: &ModeDensity<T>, jpa: &ModeDensity<T>) -> Result<Self> {
        let [dq, dc, dj] = layout.dims();
        for (m, d) in [(qubit, dq), (cavity, dc), (jpa, dj)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: m.nrows() });
            }
        }
        let matrix = Mat::from_fn(layout.dim(), layout.dim(), |i, j| {
            let (q, n, m) = layout.split(i);
            let (q2, n2, m2) = layout.split(j);
            qubit[(q, q2)] * cavity[(n, n2)] * jpa[(m, m2)]
        });
        Self::new(layout, matrix)
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn matrix(&self) -> &Mat<Complex<T>> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim()).fold(czero(), |acc, i| acc + self.matrix[(i, i)])
    }

    pub fn hermiticity_defect(&self) -> T {
        let d = self.dim();
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> T {
        let d = self.dim();
        let h = Mat::from_fn(d, d, |i, j| (self.matrix[(i, j)] + self.matrix[(j, i)].conj()) * T::lit(0.5));
        h.self_adjoint_eigenvalues(Side::Lower)
            .ok()
            .and_then(|ev| ev.first().copied())
            .unwrap_or(T::nan())
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> T {
        let d = self.dim();
        let mut acc = T::zero();
        for i in 0..d {
            for j in 0..d {
                acc += (self.matrix[(i, j)] * self.matrix[(j, i)]).re;
            }
        }
        acc
    }

    /// `tr(O ρ)`.
    pub fn expectation(&self, op: &Operator<T>) -> Result<Complex<T>> {
        if op.layout() != self.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(op
            .matrix()
            .triplets()
            .fold(czero(), |acc, (r, c, v)| acc + v * self.matrix[(c, r)]))
    }

    /// Column-stacked vectorization: element `(r, c)` lands at `c·D + r`.
    pub fn to_vector(&self) -> Vec<Complex<T>> {
        mat_to_vec(&self.matrix)
    }

    pub fn from_vector(layout: SpaceLayout, v: &[Complex<T>]) -> Result<Self> {
        let d = layout.dim();
        if v.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: v.len() });
        }
        Self::new_unchecked(layout, vec_to_mat(v, d))
    }

    /// Reduced density matrix of `keep`, tracing out the other two factors.
    pub fn partial_trace(&self, keep: Subsystem) -> ModeDensity<T> {
        let k = keep.index();
        let dk = self.layout.dim_of(keep);
        let mut out = Mat::<Complex<T>>::zeros(dk, dk);
        let d = self.dim();
        for i in 0..d {
            let si = self.layout.split(i);
            let si = [si.0, si.1, si.2];
            for j in 0..d {
                let sj = self.layout.split(j);
                let sj = [sj.0, sj.1, sj.2];
                let others_match = (0..3).filter(|&s| s != k).all(|s| si[s] == sj[s]);
                if others_match {
                    out[(si[k], sj[k])] += self.matrix[(i, j)];
                }
            }
        }
        out
    }

    /// [`partial_trace`](Self::partial_trace) addressed by slot index.
    pub fn partial_trace_at(&self, keep: usize) -> Result<ModeDensity<T>> {
        Ok(self.partial_trace(Subsystem::from_index(keep)?))
    }

    /// Population of the highest retained Fock level of `mode`.
    pub fn top_level_population(&self, mode: Subsystem) -> T {
        let red = self.partial_trace(mode);
        let n = red.nrows();
        red[(n - 1, n - 1)].re
    }
}

pub(crate) fn mat_to_vec<T: Real>(m: &Mat<Complex<T>>) -> Vec<Complex<T>> {
    let (nr, nc) = (m.nrows(), m.ncols());
    let mut v = Vec::with_capacity(nr * nc);
    for c in 0..nc {
        for r in 0..nr {
            v.push(m[(r, c)]);
        }
    }
    v
}

pub(crate) fn vec_to_mat<T: Real>(v: &[Complex<T>], d: usize) -> Mat<Complex<T>> {
    Mat::from_fn(d, d, |r, c| v[c * d + r])
}

/// Thermal (Bose-Einstein) single-mode state truncated to `dim` levels and
/// renormalized.
pub fn thermal_mode<T: Real>(n_th: T, dim: usize) -> ModeDensity<T> {
    let mut m = Mat::<Complex<T>>::zeros(dim, dim);
    if n_th <= T::zero() {
        m[(0, 0)] = Complex::new(T::one(), T::zero());
        return m;
    }
    let ratio = n_th / (T::one() + n_th);
    let mut p = T::one();
    let mut total = T::zero();
    for k in 0..dim {
        m[(k, k)] = Complex::new(p, T::zero());
        total += p;
        p *= ratio;
    }
    for k in 0..dim {
        m[(k, k)] = m[(k, k)] / total;
    }
    m
}
