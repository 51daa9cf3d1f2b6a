use crate::error::{Error, Result};
use crate::fock::{commutator_superop, DensityMatrix, LadderSet, Operator, SparseMatrix, SpaceLayout, Superoperator};
use crate::linsolve::{trace_row_index, BorderedSystem, DirectSolver};
use crate::model::SystemParams;
use crate::scalar::{czero, Complex, Real};
use crate::steady::{solve_bordered, SteadyStateOptions};

/// Largest accepted ratio `|tr(a ρ₋)| / |tr(a ρ₊)|` when the counter-rotating
/// sideband is checked.
pub const IDLER_TOLERANCE: f64 = 1e-3;

/// First-order cavity amplitude at the probe sideband.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearResponse<T> {
    /// `tr(a ρ₊)`, the component oscillating as `e^{−iΔt}`.
    pub amplitude: Complex<T>,
    /// `tr(a ρ₋)`, the component at `e^{+iΔt}`, when requested.
    pub idler: Option<Complex<T>>,
}

impl<T: Real> LinearResponse<T> {
    pub fn idler_ratio(&self) -> Option<T> {
        self.idler.map(|i| {
            let a = self.amplitude.norm();
            if a > T::zero() {
                i.norm() / a
            } else {
                T::zero()
            }
        })
    }
}

/// Per-layout state shared by every grid point of a response sweep.
pub(crate) struct SidebandSolver<T: Real> {
    d: usize,
    pub row: usize,
    /// `L₊ = −i[(Ω_p/2) a†, ·]` and `L₋ = −i[(Ω_p/2) a, ·]`.
    plus: SparseMatrix<T>,
    minus: SparseMatrix<T>,
    a: Operator<T>,
    opts: SteadyStateOptions,
}

impl<T: Real> SidebandSolver<T> {
    pub fn new(layout: SpaceLayout, probe_amplitude: T, row: usize, opts: SteadyStateOptions) -> Result<Self> {
        let ops = LadderSet::new(layout)?;
        let half = probe_amplitude * T::lit(0.5);
        Ok(Self {
            d: layout.dim(),
            row,
            plus: commutator_superop(&ops.a.adjoint().scale_real(half)),
            minus: commutator_superop(&ops.a.scale_real(half)),
            a: ops.a,
            opts,
        })
    }

    /// Unit-trace null vector of `m`.
    pub fn steady(&self, m: &SparseMatrix<T>, direct: &mut DirectSolver) -> Result<Vec<Complex<T>>> {
        let sys = BorderedSystem::new(m, self.d, self.row);
        let b = sys.rhs(&vec![czero(); self.d * self.d], Complex::new(T::one(), T::zero()));
        let (x, _) = solve_bordered(&sys, &b, &self.opts, direct)?;
        let residual = m.matvec(&x).iter().fold(T::zero(), |acc, v| acc.max(v.norm()));
        let rel = residual / m.max_abs();
        if !rel.is_finite() || rel > T::lit(self.opts.residual_tol) {
            return Err(Error::Solver { reason: "steady-state residual above tolerance".into(), residual: rel.to_f64_lossy() });
        }
        Ok(x)
    }

    /// Solves `m x = −L_src ρ₀` with `tr x = 0`, where `m = L₀ ± iΔ`.
    fn sideband(
        &self,
        m: &SparseMatrix<T>,
        source: &SparseMatrix<T>,
        rho0: &[Complex<T>],
        detuning: T,
        direct: &mut DirectSolver,
    ) -> Result<Vec<Complex<T>>> {
        let b: Vec<Complex<T>> = source.matvec(rho0).into_iter().map(|v| -v).collect();
        let b_max = b.iter().fold(T::zero(), |acc, v| acc.max(v.norm()));
        if b_max == T::zero() {
            return Ok(vec![czero(); b.len()]);
        }
        let sys = BorderedSystem::new(m, self.d, self.row);
        let rhs = sys.rhs(&b, czero());
        let degenerate = || Error::ResonanceDegeneracy { detuning: detuning.to_f64_lossy() };
        let (x, _) = solve_bordered(&sys, &rhs, &self.opts, direct).map_err(|_| degenerate())?;
        let x_max = x.iter().fold(T::zero(), |acc, v| acc.max(v.norm()));
        let r = m.matvec(&x).iter().zip(&b).fold(T::zero(), |acc, (mx, bi)| acc.max((*mx - *bi).norm()));
        let scale = m.max_abs() * x_max + b_max;
        if !(r / scale <= T::lit(1e-8)) {
            return Err(degenerate());
        }
        Ok(x)
    }

    pub fn plus(&self, m: &SparseMatrix<T>, rho0: &[Complex<T>], detuning: T, direct: &mut DirectSolver) -> Result<Vec<Complex<T>>> {
        self.sideband(m, &self.plus, rho0, detuning, direct)
    }

    pub fn minus(&self, m: &SparseMatrix<T>, rho0: &[Complex<T>], detuning: T, direct: &mut DirectSolver) -> Result<Vec<Complex<T>>> {
        self.sideband(m, &self.minus, rho0, detuning, direct)
    }

    /// `tr(a X)` for a column-stacked `X`.
    pub fn cavity_amplitude(&self, x: &[Complex<T>]) -> Complex<T> {
        let d = self.d;
        self.a.matrix().triplets().fold(czero(), |acc, (i, j, v)| acc + v * x[i * d + j])
    }
}

fn shifted<T: Real>(l: &SparseMatrix<T>, shift: Complex<T>) -> SparseMatrix<T> {
    let n = l.nrows();
    SparseMatrix::from_triplets_keep_zeros(n, n, l.triplets().chain((0..n).map(|i| (i, i, shift))))
}

/// First-order probe response `tr(a ρ₊)` of the steady state `rho0` of `l0`.
///
/// `sideband` is the probe detuning from the frame frequency, `Δ = ω_p − ω_s`
/// in the squeeze frame. `ρ₊` solves `(L₀ + iΔ)ρ₊ = −L₊ρ₀` with
/// `L₊ = −i[(Ω_p/2)a†, ·]`; the result is linear in `Ω_p`.
pub fn linear_response_amplitude<T: Real>(
    l0: &Superoperator<T>,
    rho0: &DensityMatrix<T>,
    sideband: T,
    p: &SystemParams<T>,
) -> Result<Complex<T>> {
    Ok(linear_response(l0, rho0, sideband, p, false)?.amplitude)
}

/// [`linear_response_amplitude`], optionally also solving for the
/// counter-rotating sideband `(L₀ − iΔ)ρ₋ = −L₋ρ₀`.
pub fn linear_response<T: Real>(
    l0: &Superoperator<T>,
    rho0: &DensityMatrix<T>,
    sideband: T,
    p: &SystemParams<T>,
    with_idler: bool,
) -> Result<LinearResponse<T>> {
    if rho0.layout() != l0.layout() {
        return Err(Error::LayoutMismatch);
    }
    let layout = l0.layout();
    let row = trace_row_index(l0.matrix(), layout.dim());
    let solver = SidebandSolver::new(layout, p.probe_amplitude, row, SteadyStateOptions::default())?;
    let rho = rho0.to_vector();
    let i_delta = Complex::new(T::zero(), sideband);
    let m = shifted(l0.matrix(), i_delta);
    let plus = solver.plus(&m, &rho, sideband, &mut DirectSolver::new())?;
    let idler = if with_idler {
        let m = shifted(l0.matrix(), -i_delta);
        Some(solver.cavity_amplitude(&solver.minus(&m, &rho, sideband, &mut DirectSolver::new())?))
    } else {
        None
    };
    Ok(LinearResponse { amplitude: solver.cavity_amplitude(&plus), idler })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mhz, DriveKind, FrameChoice, GeneratorSpec};
    use crate::steady::steady_state;

    fn bare_cavity() -> GeneratorSpec<f64> {
        let mut p = SystemParams::table_s1();
        p.n_th = 0.0;
        p.p_th = 0.0;
        p.qubit_drive = 0.0;
        GeneratorSpec {
            params: p,
            drive: DriveKind::Off,
            frame: FrameChoice::SqueezeFrame,
            include_probe: false,
            layout: SpaceLayout::without_jpa(4).unwrap(),
        }
    }

    #[test]
    fn zero_probe_gives_zero() {
        let mut s = bare_cavity();
        s.params.probe_amplitude = 0.0;
        let l = s.build().unwrap();
        let rho = steady_state(&l).unwrap().rho;
        assert_eq!(linear_response_amplitude(&l, &rho, mhz(1.0), &s.params).unwrap(), Complex::new(0.0, 0.0));
    }

    #[test]
    fn empty_cavity_is_lorentzian() {
        // Oracle: driven damped oscillator, ⟨a⟩ = −(Ω_p/2) / (Δ_c − Δ − iκ/2)
        // with Δ_c the ground-state cavity detuning from the frame.
        let s = bare_cavity();
        let p = s.params;
        let l = s.build().unwrap();
        let rho = steady_state(&l).unwrap().rho;
        let delta_c = p.omega_c + p.chi - p.omega_s;
        for f in [-1.0, -0.3, 0.0, 0.1, 0.25, 2.0] {
            let delta = mhz::<f64>(f);
            let got = linear_response_amplitude(&l, &rho, delta, &p).unwrap();
            let expected = -Complex::new(p.probe_amplitude / 2.0, 0.0) / Complex::new(delta_c - delta, -p.kappa / 2.0);
            assert!((got - expected).norm() < 1e-9 * expected.norm(), "{f}: {got} vs {expected}");
        }
        let peak = linear_response_amplitude(&l, &rho, delta_c, &p).unwrap().norm();
        assert!((peak - p.probe_amplitude / p.kappa).abs() < 1e-9 * peak);
    }

    #[test]
    fn response_is_linear_in_probe() {
        let mut s = bare_cavity();
        s.params.qubit_drive = mhz(0.46);
        s.params.n_th = 0.04;
        let l = s.build().unwrap();
        let rho = steady_state(&l).unwrap().rho;
        let a1 = linear_response_amplitude(&l, &rho, mhz(-7.8), &s.params).unwrap();
        let mut p2 = s.params;
        p2.probe_amplitude *= 2.0;
        let a2 = linear_response_amplitude(&l, &rho, mhz(-7.8), &p2).unwrap();
        assert!((a2 - a1 * 2.0).norm() < 1e-12 * a2.norm());
    }

    #[test]
    fn idler_small_for_squeezed_drive() {
        let mut p = SystemParams::<f64>::table_s1();
        p.kappa_e = mhz(0.42);
        let s = GeneratorSpec {
            params: p,
            drive: DriveKind::Squeezed { amplitude: mhz(4.0) },
            frame: FrameChoice::SqueezeFrame,
            include_probe: false,
            layout: SpaceLayout::new(5, 4).unwrap(),
        };
        let l = s.build().unwrap();
        let rho = steady_state(&l).unwrap().rho;
        let r = linear_response(&l, &rho, p.omega_p - p.omega_s, &p, true).unwrap();
        assert!(r.idler_ratio().unwrap() < IDLER_TOLERANCE, "{:?}", r.idler_ratio());
    }
}
