//! Steady states of the cascaded generator and truncation diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, SpaceLayout, Subsystem, Superoperator};
use crate::linsolve::{bicgstab, trace_row_index, BorderedSystem, DirectSolver, SolveInfo};
use crate::scalar::{czero, Complex, Real};

/// Default top-level population above which a truncation is rejected.
pub const DEFAULT_TRUNCATION_THRESHOLD: f64 = 1e-8;

/// Knobs for [`steady_state_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateOptions {
    /// Accepted `max |Lρ|` relative to `max |L|`.
    pub residual_tol: f64,
    /// Vectorized dimension above which BiCGSTAB replaces sparse LU.
    pub direct_limit: usize,
    pub iterative_tol: f64,
    pub max_iterations: usize,
    /// Iterative refinement steps after the direct solve.
    pub refine: usize,
    /// Largest vectorized dimension for which the dense singular-value gap
    /// of `L` is computed.
    pub uniqueness_limit: usize,
    /// Minimum ratio between the two smallest singular values of `L`.
    pub gap_ratio: f64,
    /// Most negative eigenvalue tolerated before `positive` is cleared.
    pub positivity_slack: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            direct_limit: 250_000,
            iterative_tol: 1e-13,
            max_iterations: 20_000,
            refine: 1,
            uniqueness_limit: 1_024,
            gap_ratio: 1e6,
            positivity_slack: 1e-8,
        }
    }
}

/// Highest-level populations of the bosonic modes. An absent JPA reports 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailMass<T> {
    pub cavity: T,
    pub jpa: T,
}

impl<T: Real> TailMass<T> {
    pub fn max(&self) -> T {
        self.cavity.max(self.jpa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverStats {
    pub direct: bool,
    pub iterations: usize,
    pub nnz: usize,
    pub reused_symbolic: bool,
    /// Row of the vectorized system replaced by the trace constraint.
    pub replaced_row: usize,
    /// Ratio of the two smallest singular values of `L`, when computed.
    pub gap_ratio: Option<f64>,
    /// Smallest eigenvalue of the Hermitian part of `ρ`.
    pub min_eigenvalue: f64,
    /// `min_eigenvalue` above the positivity slack.
    pub positive: bool,
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult<T: Real> {
    pub rho: DensityMatrix<T>,
    /// `max |L vec(ρ)|`.
    pub residual: T,
    /// `residual / max |L|`.
    pub relative_residual: T,
    pub tail_mass: TailMass<T>,
    pub solver_stats: SolverStats,
}

pub fn tail_mass<T: Real>(rho: &DensityMatrix<T>) -> TailMass<T> {
    let layout = rho.layout();
    let top = |mode: Subsystem| {
        if layout.dim_of(mode) > 1 {
            rho.top_level_population(mode)
        } else {
            T::zero()
        }
    };
    TailMass { cavity: top(Subsystem::Cavity), jpa: top(Subsystem::Jpa) }
}

/// [`steady_state_with`] using default options.
pub fn steady_state<T: Real>(l: &Superoperator<T>) -> Result<SteadyStateResult<T>> {
    steady_state_with(l, &SteadyStateOptions::default())
}

/// Unit-trace solution of `Lρ = 0`.
///
/// The trace constraint replaces the diagonal-population row of smallest
/// norm. Positivity is diagnosed, never imposed.
pub fn steady_state_with<T: Real>(l: &Superoperator<T>, opts: &SteadyStateOptions) -> Result<SteadyStateResult<T>> {
    let layout = l.layout();
    let d = layout.dim();
    let scale = l.matrix().max_abs();
    let defect = l.trace_preservation_defect();
    if defect > T::lit(1e-9) * scale {
        return Err(Error::InvalidParams(format!("generator is not trace preserving (defect {defect:e})")));
    }

    let gap_ratio = if d * d <= opts.uniqueness_limit { Some(singular_gap(l)?) } else { None };
    if let Some(g) = gap_ratio {
        if g < opts.gap_ratio {
            return Err(Error::AmbiguousSteadyState(format!("singular-value gap ratio {g:e}")));
        }
    }

    let row = trace_row_index(l.matrix(), d);
    let sys = BorderedSystem::new(l.matrix(), d, row);
    let b = sys.rhs(&vec![czero(); d * d], Complex::new(T::one(), T::zero()));
    let (x, info) = solve_bordered(&sys, &b, opts, &mut DirectSolver::new())?;
    finish(l, layout, x, info, row, gap_ratio, opts)
}

pub(crate) fn solve_bordered<T: Real>(
    sys: &BorderedSystem<T>,
    b: &[Complex<T>],
    opts: &SteadyStateOptions,
    direct: &mut DirectSolver,
) -> Result<(Vec<Complex<T>>, SolveInfo)> {
    let n = b.len();
    if n <= opts.direct_limit {
        let f = direct.factor(&sys.matrix)?;
        Ok(f.solve(b, opts.refine))
    } else {
        bicgstab(&sys.matrix, b, T::lit(opts.iterative_tol), opts.max_iterations)
    }
}

fn finish<T: Real>(
    l: &Superoperator<T>,
    layout: SpaceLayout,
    x: Vec<Complex<T>>,
    info: SolveInfo,
    row: usize,
    gap_ratio: Option<f64>,
    opts: &SteadyStateOptions,
) -> Result<SteadyStateResult<T>> {
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::AmbiguousSteadyState("bordered system is singular".into()));
    }
    let scale = l.matrix().max_abs();
    let residual = l.apply_vec(&x).iter().fold(T::zero(), |m, v| m.max(v.norm()));
    let relative_residual = residual / scale;
    if relative_residual > T::lit(opts.residual_tol) {
        return Err(Error::Solver {
            reason: "steady-state residual above tolerance".into(),
            residual: relative_residual.to_f64_lossy(),
        });
    }
    let rho = DensityMatrix::from_vector(layout, &x)?;
    let min_eigenvalue = rho.min_eigenvalue().to_f64_lossy();
    Ok(SteadyStateResult {
        tail_mass: tail_mass(&rho),
        rho,
        residual,
        relative_residual,
        solver_stats: SolverStats {
            direct: info.direct,
            iterations: info.iterations,
            nnz: info.nnz,
            reused_symbolic: info.reused_symbolic,
            replaced_row: row,
            gap_ratio,
            min_eigenvalue,
            positive: min_eigenvalue > -opts.positivity_slack,
        },
    })
}

/// `σ₂ / σ₁` for the two smallest singular values of `L`.
pub fn singular_gap<T: Real>(l: &Superoperator<T>) -> Result<f64> {
    let mut sv: Vec<f64> = l
        .matrix()
        .to_dense()
        .singular_values()
        .map_err(|e| Error::Solver { reason: format!("SVD: {e:?}"), residual: f64::NAN })?
        .into_iter()
        .map(|s| s.to_f64_lossy())
        .collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    if sv.len() < 2 {
        return Ok(f64::INFINITY);
    }
    // Round-off floor, so an exactly singular pair does not read as a gap.
    let floor = sv[sv.len() - 1] * f64::EPSILON;
    Ok(sv[1] / sv[0].max(floor))
}

/// Per-mode part of a [`TruncationReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeTail {
    pub mode: Subsystem,
    pub dim: usize,
    pub tail: f64,
    pub pass: bool,
    /// Smallest dimension expected to meet the threshold, assuming the
    /// populations keep decaying geometrically past the truncation.
    pub recommended_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationReport {
    pub threshold: f64,
    pub modes: Vec<ModeTail>,
}

impl TruncationReport {
    pub fn pass(&self) -> bool {
        self.modes.iter().all(|m| m.pass)
    }

    /// `Err(TruncationTooSmall)` for the first failing mode.
    pub fn into_result(self) -> Result<Self> {
        if let Some(m) = self.modes.iter().find(|m| !m.pass) {
            return Err(Error::TruncationTooSmall { dim: m.dim, tail: m.tail, threshold: self.threshold });
        }
        Ok(self)
    }
}

/// Flags every bosonic mode whose highest retained level holds more than
/// `threshold` population.
pub fn check_truncation<T: Real>(result: &SteadyStateResult<T>, threshold: f64) -> TruncationReport {
    let rho = &result.rho;
    let layout = rho.layout();
    let modes = [Subsystem::Cavity, Subsystem::Jpa]
        .into_iter()
        .filter(|&m| layout.dim_of(m) > 1)
        .map(|mode| {
            let red = rho.partial_trace(mode);
            let dim = red.nrows();
            let pops: Vec<f64> = (0..dim).map(|k| red[(k, k)].re.to_f64_lossy().max(0.0)).collect();
            let tail = pops[dim - 1];
            let pass = tail <= threshold;
            let recommended_dim = if pass { None } else { recommend(&pops, threshold) };
            ModeTail { mode, dim, tail, pass, recommended_dim }
        })
        .collect();
    TruncationReport { threshold, modes }
}

fn recommend(pops: &[f64], threshold: f64) -> Option<usize> {
    let n = pops.len();
    let tail = pops[n - 1];
    let ratio = if n >= 2 && pops[n - 2] > 0.0 { tail / pops[n - 2] } else { 0.5 };
    // A flat or growing tail gives no usable extrapolation; ask for double.
    if !(ratio > 0.0 && ratio < 1.0) {
        return Some(2 * n);
    }
    let extra = ((threshold / tail).ln() / ratio.ln()).ceil().max(1.0) as usize;
    Some(n + extra)
}
