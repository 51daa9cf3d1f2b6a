//! Ladder operators and their embedding into the composite space.

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

use super::layout::{SpaceLayout, Subsystem};
use super::sparse::{SparseMatrix, DROP_TOLERANCE};

/// Single-mode operator (qubit or one Fock mode) before embedding.
pub type ModeOperator<T> = SparseMatrix<T>;

/// Operator on the full composite space described by a [`SpaceLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real> {
    layout: SpaceLayout,
    matrix: SparseMatrix<T>,
}

impl<T: Real> Operator<T> {
    pub fn new(layout: SpaceLayout, matrix: SparseMatrix<T>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), actual: matrix.nrows() });
        }
        Ok(Self { layout, matrix })
    }

    pub fn zero(layout: SpaceLayout) -> Self {
        Self { layout, matrix: SparseMatrix::zeros(layout.dim(), layout.dim()) }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        Self { layout, matrix: SparseMatrix::identity(layout.dim()) }
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> SparseMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch)
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut matrix = self.matrix.scale(s);
        matrix.prune(T::lit(DROP_TOLERANCE));
        Self { layout: self.layout, matrix }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { layout: self.layout, matrix: self.matrix.add(&other.matrix) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { layout: self.layout, matrix: self.matrix.sub(&other.matrix) })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { layout: self.layout, matrix: self.matrix.matmul(&other.matrix) })
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn hermiticity_defect(&self) -> T {
        self.matrix.hermiticity_defect()
    }

    pub fn trace(&self) -> Complex<T> {
        self.matrix.trace()
    }

    /// Matrix element `⟨row| self |col⟩`.
    pub fn element(&self, row: usize, col: usize) -> Complex<T> {
        self.matrix.get(row, col)
    }
}

/// Truncated bosonic annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation<T: Real>(dim: usize) -> Result<ModeOperator<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, reason: "ladder operators need at least two levels" });
    }
    Ok(SparseMatrix::from_triplets(
        dim,
        dim,
        (1..dim).map(|n| (n - 1, n, Complex::new(T::from_count(n).sqrt(), T::zero()))),
    ))
}

/// Number operator `a†a` on a single mode; defined for `dim ≥ 1`.
pub fn number<T: Real>(dim: usize) -> ModeOperator<T> {
    SparseMatrix::diagonal(&(0..dim).map(|n| Complex::new(T::from_count(n), T::zero())).collect::<Vec<_>>())
}

/// Qubit operators `(σ, σ†, σ_z)` in the ordering `(|g⟩, |e⟩)`.
///
/// `σ` lowers `|e⟩ → |g⟩` and `σ_z = σ†σ − σσ† = diag(−1, +1)`.
pub fn qubit_ops<T: Real>() -> (ModeOperator<T>, ModeOperator<T>, ModeOperator<T>) {
    let one = Complex::new(T::one(), T::zero());
    let sigma = SparseMatrix::from_triplets(2, 2, [(0, 1, one)]);
    let sigma_dag = sigma.adjoint();
    let sigma_z = SparseMatrix::diagonal(&[-one, one]);
    (sigma, sigma_dag, sigma_z)
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` placed at `slot`.
pub fn embed<T: Real>(op: &ModeOperator<T>, slot: Subsystem, layout: SpaceLayout) -> Result<Operator<T>> {
    let expected = layout.dim_of(slot);
    if op.nrows() != expected || op.ncols() != expected {
        return Err(Error::DimensionMismatch { expected, actual: op.nrows() });
    }
    let [dq, dc, dj] = layout.dims();
    let (left, right) = match slot {
        Subsystem::Qubit => (1, dc * dj),
        Subsystem::Cavity => (dq, dj),
        Subsystem::Jpa => (dq * dc, 1),
    };
    let mut m = SparseMatrix::identity(left).kron(op).kron(&SparseMatrix::identity(right));
    m.prune(T::lit(DROP_TOLERANCE));
    Operator::new(layout, m)
}

/// [`embed`] addressed by numeric slot index (0 = qubit, 1 = cavity, 2 = JPA).
pub fn embed_at<T: Real>(op: &ModeOperator<T>, slot: usize, layout: SpaceLayout) -> Result<Operator<T>> {
    embed(op, Subsystem::from_index(slot)?, layout)
}

/// Frequently used embedded operators for one layout.
#[derive(Clone, Debug)]
pub struct LadderSet<T: Real> {
    pub layout: SpaceLayout,
    /// Cavity annihilation `a`.
    pub a: Operator<T>,
    /// JPA annihilation `b`; `None` when the layout has no JPA.
    pub b: Option<Operator<T>>,
    pub sigma: Operator<T>,
    pub sigma_dag: Operator<T>,
    pub sigma_z: Operator<T>,
    /// Cavity number operator `a†a`.
    pub n_cavity: Operator<T>,
}

impl<T: Real> LadderSet<T> {
    pub fn new(layout: SpaceLayout) -> Result<Self> {
        let (s, sd, sz) = qubit_ops::<T>();
        let a = if layout.cavity_dim() >= 2 {
            embed(&annihilation(layout.cavity_dim())?, Subsystem::Cavity, layout)?
        } else {
            Operator::zero(layout)
        };
        let b = if layout.has_jpa() {
            Some(embed(&annihilation(layout.jpa_dim())?, Subsystem::Jpa, layout)?)
        } else {
            None
        };
        Ok(Self {
            layout,
            n_cavity: embed(&number(layout.cavity_dim()), Subsystem::Cavity, layout)?,
            a,
            b,
            sigma: embed(&s, Subsystem::Qubit, layout)?,
            sigma_dag: embed(&sd, Subsystem::Qubit, layout)?,
            sigma_z: embed(&sz, Subsystem::Qubit, layout)?,
        })
    }

    /// Projector onto the excited qubit state, `(σ_z + 1)/2 = σ†σ`.
    pub fn excited_projector(&self) -> Operator<T> {
        self.sigma_dag.mul(&self.sigma).expect("shared layout")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    #[test]
    fn annihilation_dim2() {
        let a = annihilation::<f64>(2).unwrap().to_dense();
        assert_eq!(a[(0, 1)], c(1.0));
        assert_eq!(a[(0, 0)], c(0.0));
        assert_eq!(a[(1, 0)], c(0.0));
        assert_eq!(a[(1, 1)], c(0.0));
    }

    #[test]
    fn number_operator_diagonal() {
        let a = annihilation::<f64>(4).unwrap();
        let n = a.adjoint().matmul(&a);
        for k in 0..4 {
            assert!((n.get(k, k) - c(k as f64)).norm() < 1e-14);
        }
    }

    #[test]
    fn commutator_has_truncation_corner() {
        // Oracle: dense products, independent of the sparse kernel.
        let a = annihilation::<f64>(6).unwrap().to_dense();
        let ad = a.adjoint().to_owned();
        let comm = &a * &ad - &ad * &a;
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i != j {
                    0.0
                } else if i == 5 {
                    -5.0
                } else {
                    1.0
                };
                assert!((comm[(i, j)] - c(expected)).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn dimension_below_two_rejected() {
        assert!(matches!(annihilation::<f64>(1), Err(Error::InvalidDimension { dim: 1, .. })));
    }

    #[test]
    fn qubit_operator_identities() {
        let (s, sd, sz) = qubit_ops::<f64>();
        assert_eq!(sz.get(0, 0), c(-1.0));
        let proj = sd.matmul(&s);
        assert_eq!(proj.get(1, 1), c(1.0));
        assert_eq!(proj.nnz(), 1);
        let diff = sd.matmul(&s).sub(&s.matmul(&sd));
        assert!(diff.max_abs_diff(&sz) < 1e-15);
    }

    #[test]
    fn embedded_sigma_z_is_traceless() {
        let layout = SpaceLayout::new(5, 3).unwrap();
        let (_, _, sz) = qubit_ops::<f64>();
        let op = embed(&sz, Subsystem::Qubit, layout).unwrap();
        assert!(op.trace().norm() < 1e-14);
    }

    #[test]
    fn disjoint_modes_commute() {
        let layout = SpaceLayout::new(4, 3).unwrap();
        let a = embed(&annihilation::<f64>(4).unwrap(), Subsystem::Cavity, layout).unwrap();
        let b = embed(&annihilation::<f64>(3).unwrap(), Subsystem::Jpa, layout).unwrap();
        assert!(a.commutator(&b).unwrap().matrix().max_abs() < 1e-14);
    }

    #[test]
    fn embedded_matrix_element_matches_index_arithmetic() {
        let layout = SpaceLayout::new(4, 2).unwrap();
        let a = embed(&annihilation::<f64>(4).unwrap(), Subsystem::Cavity, layout).unwrap();
        // |g,1,0⟩ = 0·8 + 1·2 + 0 = 2; |g,2,0⟩ = 4.
        assert_eq!(layout.index(0, 1, 0), 2);
        assert_eq!(layout.index(0, 2, 0), 4);
        assert!((a.element(2, 4) - c(2f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn embed_rejects_wrong_size_and_slot() {
        let layout = SpaceLayout::new(4, 2).unwrap();
        let a = annihilation::<f64>(3).unwrap();
        assert!(matches!(embed(&a, Subsystem::Cavity, layout), Err(Error::DimensionMismatch { .. })));
        assert_eq!(embed_at(&a, 7, layout).unwrap_err(), Error::SlotOutOfRange(7));
    }

    #[test]
    fn works_in_single_precision() {
        let a = annihilation::<f32>(3).unwrap();
        assert!((a.get(1, 2).re - 2f32.sqrt()).abs() < 1e-6);
    }
}
