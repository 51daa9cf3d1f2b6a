//! Vectorized Lindblad generators.
//!
//! Density matrices are column-stacked, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//! Dissipators are assembled in Schrödinger form; a channel `(γ, c)` adds
//! `γ (c ρ c† − ½{c†c, ρ})`, whose dual is `(γ/2)·([c†, S]c + c†[S, c])`.

use crate::error::{Error, Result};
use crate::scalar::{imag_unit, Complex, Real};

use super::density::{mat_to_vec, vec_to_mat, DensityMatrix};
use super::layout::SpaceLayout;
use super::operator::Operator;
use super::sparse::SparseMatrix;

/// One Lindblad channel: a non-negative rate and its collapse operator.
#[derive(Clone, Debug)]
pub struct Channel<T: Real> {
    pub label: String,
    pub rate: T,
    pub op: Operator<T>,
}

impl<T: Real> Channel<T> {
    pub fn new(label: impl Into<String>, rate: T, op: Operator<T>) -> Self {
        Self { label: label.into(), rate, op }
    }
}

/// Unidirectional coupling of an upstream mode's output into a downstream
/// mode: adds `g (a ρ b† + b ρ a† − ρ b†a − a†b ρ)` with `g = √(κ_e κ'_e)`.
#[derive(Clone, Debug)]
pub struct CascadeCoupling<T: Real> {
    pub strength: T,
    /// Source mode (`b`).
    pub upstream: Operator<T>,
    /// Driven mode (`a`).
    pub downstream: Operator<T>,
}

/// Sparse `D² × D²` generator acting on column-stacked density matrices.
#[derive(Clone, Debug)]
pub struct Superoperator<T: Real> {
    layout: SpaceLayout,
    matrix: SparseMatrix<T>,
}

/// `vec(L ρ R)` as a superoperator matrix.
pub(crate) fn sandwich<T: Real>(left: &SparseMatrix<T>, right: &SparseMatrix<T>) -> SparseMatrix<T> {
    right.transpose().kron(left)
}

fn left_mul<T: Real>(op: &SparseMatrix<T>) -> SparseMatrix<T> {
    SparseMatrix::identity(op.nrows()).kron(op)
}

fn right_mul<T: Real>(op: &SparseMatrix<T>) -> SparseMatrix<T> {
    op.transpose().kron(&SparseMatrix::identity(op.nrows()))
}

/// Unitary part `−i[H, ·]`.
pub fn commutator_superop<T: Real>(h: &Operator<T>) -> SparseMatrix<T> {
    let mi = -imag_unit::<T>();
    left_mul(h.matrix()).axpby(mi, &right_mul(h.matrix()), -mi)
}

/// `c ρ c† − ½{c†c, ρ}` (unit rate).
pub fn dissipator_superop<T: Real>(c: &Operator<T>) -> SparseMatrix<T> {
    let cm = c.matrix();
    let cdc = cm.adjoint().matmul(cm);
    let half = Complex::new(T::lit(0.5), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let jump = sandwich(cm, &cm.adjoint());
    let anti = left_mul(&cdc).add(&right_mul(&cdc));
    jump.axpby(one, &anti, -half)
}

fn cascade_superop<T: Real>(cc: &CascadeCoupling<T>) -> SparseMatrix<T> {
    let a = cc.downstream.matrix();
    let b = cc.upstream.matrix();
    let ad = a.adjoint();
    let bd = b.adjoint();
    let terms = sandwich(a, &bd)
        .add(&sandwich(b, &ad))
        .sub(&right_mul(&bd.matmul(a)))
        .sub(&left_mul(&ad.matmul(b)));
    terms.scale(Complex::new(cc.strength, T::zero()))
}

/// Assembles `dρ/dt = −i[H, ρ] + Σ γ_k D[c_k]ρ + cascade(ρ)`.
pub fn vectorize_generator<T: Real>(
    h: &Operator<T>,
    channels: &[Channel<T>],
    cascade: Option<&CascadeCoupling<T>>,
) -> Result<Superoperator<T>> {
    let layout = h.layout();
    for ch in channels {
        if ch.op.layout() != layout {
            return Err(Error::LayoutMismatch);
        }
        if ch.rate < T::zero() || ch.rate.is_nan() {
            return Err(Error::NegativeRate { channel: ch.label.clone(), rate: ch.rate.to_f64_lossy() });
        }
    }
    let mut l = commutator_superop(h);
    for ch in channels.iter().filter(|c| c.rate > T::zero()) {
        l = l.axpby(
            Complex::new(T::one(), T::zero()),
            &dissipator_superop(&ch.op),
            Complex::new(ch.rate, T::zero()),
        );
    }
    if let Some(cc) = cascade {
        if cc.upstream.layout() != layout || cc.downstream.layout() != layout {
            return Err(Error::LayoutMismatch);
        }
        if cc.strength < T::zero() {
            return Err(Error::NegativeRate { channel: "cascade".into(), rate: cc.strength.to_f64_lossy() });
        }
        if cc.strength > T::zero() {
            l = l.add(&cascade_superop(cc));
        }
    }
    Superoperator::new(layout, l)
}

impl<T: Real> Superoperator<T> {
    pub fn new(layout: SpaceLayout, matrix: SparseMatrix<T>) -> Result<Self> {
        let d2 = layout.dim() * layout.dim();
        if matrix.nrows() != d2 || matrix.ncols() != d2 {
            return Err(Error::DimensionMismatch { expected: d2, actual: matrix.nrows() });
        }
        Ok(Self { layout, matrix })
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

    /// Dimension of the vectorized space, `D²`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn scale(&self, c: T) -> Self {
        Self { layout: self.layout, matrix: self.matrix.scale(Complex::new(c, T::zero())) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self { layout: self.layout, matrix: self.matrix.add(&other.matrix) })
    }

    /// `L ρ` as a (generally traceless) matrix.
    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if rho.layout() != self.layout {
            return Err(Error::LayoutMismatch);
        }
        let out = self.matrix.matvec(&rho.to_vector());
        DensityMatrix::from_vector(self.layout, &out)
    }

    pub fn apply_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.matrix.matvec(v)
    }

    /// Heisenberg-picture dual `L*`, defined by `tr(S · Lρ) = tr(L*(S) · ρ)`.
    pub fn apply_dual(&self, s: &faer::Mat<Complex<T>>) -> faer::Mat<Complex<T>> {
        let d = self.layout.dim();
        let st = s.transpose().to_owned();
        let out = self.matrix.vecmat(&mat_to_vec(&st));
        vec_to_mat(&out, d).transpose().to_owned()
    }

    /// `max |L*(1)|`: zero for a trace-preserving generator.
    pub fn trace_preservation_defect(&self) -> T {
        let d = self.layout.dim();
        let mut id = vec![Complex::new(T::zero(), T::zero()); d * d];
        for i in 0..d {
            id[i * d + i] = Complex::new(T::one(), T::zero());
        }
        self.matrix.vecmat(&id).iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// `max |Lρ − (Lρ)†|` for the given Hermitian input.
    pub fn hermiticity_preservation_defect(&self, rho: &DensityMatrix<T>) -> Result<T> {
        Ok(self.apply(rho)?.hermiticity_defect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::operator::{annihilation, embed, qubit_ops};
    use crate::fock::layout::Subsystem;

    #[test]
    fn single_photon_decays_to_vacuum() {
        let layout = SpaceLayout::without_jpa(3).unwrap();
        let a = embed(&annihilation::<f64>(3).unwrap(), Subsystem::Cavity, layout).unwrap();
        let kappa = 2.5;
        let l = vectorize_generator(&Operator::zero(layout), &[Channel::new("kappa", kappa, a)], None).unwrap();
        let rho = DensityMatrix::basis_state(layout, 0, 1, 0);
        let d = l.apply(&rho).unwrap();
        let g0 = layout.index(0, 0, 0);
        let g1 = layout.index(0, 1, 0);
        for i in 0..layout.dim() {
            for j in 0..layout.dim() {
                let expected = if i == g0 && j == g0 {
                    kappa
                } else if i == g1 && j == g1 {
                    -kappa
                } else {
                    0.0
                };
                assert!((d.matrix()[(i, j)] - Complex::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn free_rotation_of_coherence() {
        let layout = SpaceLayout::without_jpa(2).unwrap();
        let a = embed(&annihilation::<f64>(2).unwrap(), Subsystem::Cavity, layout).unwrap();
        let omega = 1.7;
        let h = a.adjoint().mul(&a).unwrap().scale_real(omega);
        let l = vectorize_generator(&h, &[], None).unwrap();
        let (i0, i1) = (layout.index(0, 0, 0), layout.index(0, 1, 0));
        let mut m = faer::Mat::zeros(layout.dim(), layout.dim());
        m[(i0, i1)] = Complex::new(1.0, 0.0);
        let coh = DensityMatrix::new_unchecked(layout, m).unwrap();
        let out = l.apply(&coh).unwrap();
        assert!((out.matrix()[(i0, i1)] - Complex::new(0.0, omega)).norm() < 1e-14);
    }

    #[test]
    fn negative_rate_rejected() {
        let layout = SpaceLayout::without_jpa(2).unwrap();
        let (s, _, _) = qubit_ops::<f64>();
        let sig = embed(&s, Subsystem::Qubit, layout).unwrap();
        let err = vectorize_generator(&Operator::zero(layout), &[Channel::new("gamma", -1.0, sig)], None).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
    }

    #[test]
    fn layout_mismatch_rejected() {
        let l1 = SpaceLayout::without_jpa(2).unwrap();
        let l2 = SpaceLayout::without_jpa(3).unwrap();
        let a = embed(&annihilation::<f64>(3).unwrap(), Subsystem::Cavity, l2).unwrap();
        let err = vectorize_generator(&Operator::zero(l1), &[Channel::new("k", 1.0, a)], None).unwrap_err();
        assert_eq!(err, Error::LayoutMismatch);
    }
}
