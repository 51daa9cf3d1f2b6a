use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{LadderSet, SpaceLayout};
use crate::linsolve::{trace_row_index, DirectSolver};
use crate::model::{params_digest, DetuningFamily, DriveKind, FrameChoice, GeneratorSpec, SystemParams};
use crate::scalar::{czero, Complex, Real};
use crate::steady::{steady_state_with, SteadyStateOptions};

use super::linear::{SidebandSolver, IDLER_TOLERANCE};
use super::{check_axis, check_grid, max_magnitude, Spectrum, Spectrum2D, SpectrumMeta, SweepAxis};

/// Settings shared by the frequency sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub layout: SpaceLayout,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Also solve the counter-rotating sideband and fail if it exceeds
    /// [`IDLER_TOLERANCE`] relative to the kept one.
    pub check_idler: bool,
    pub steady: SteadyStateOptions,
}

impl SweepOptions {
    pub fn new(layout: SpaceLayout) -> Self {
        Self { layout, jobs: None, check_idler: false, steady: SteadyStateOptions::default() }
    }
}

pub(crate) fn run_parallel<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Solver { reason: format!("thread pool: {e}"), residual: f64::NAN })?;
            Ok(pool.install(f))
        }
    }
}

/// Linear-response transmission `|tr(a ρ₊)|` versus qubit-drive frequency.
///
/// Each grid point solves the squeeze-frame steady state at that `ω_d` and
/// its first-order probe sideband at `Δ = ω_p − ω_s`. All points share one
/// sparsity pattern and one symbolic factorization.
pub fn qubit_spectrum<T: Real>(
    p: &SystemParams<T>,
    kind: &DriveKind<T>,
    omega_d_grid: &[T],
    opts: &SweepOptions,
) -> Result<Spectrum<T>> {
    check_axis(omega_d_grid)?;
    let spec = GeneratorSpec {
        params: *p,
        drive: *kind,
        frame: FrameChoice::SqueezeFrame,
        include_probe: false,
        layout: opts.layout,
    };
    let family = DetuningFamily::new(&spec)?;
    let d = opts.layout.dim();
    let base = family.matrix_at(p.omega_q - omega_d_grid[0], czero());
    let row = trace_row_index(&base, d);
    let solver = SidebandSolver::new(opts.layout, p.probe_amplitude, row, opts.steady)?;
    let mut direct = DirectSolver::new();
    direct.analyze(&crate::linsolve::BorderedSystem::new(&base, d, row).matrix)?;
    let delta = p.omega_p - p.omega_s;
    let i_delta = Complex::new(T::zero(), delta);

    let point = |omega_d: T| -> Result<(Complex<T>, Option<T>)> {
        let mut direct = direct.clone();
        let qd = p.omega_q - omega_d;
        let rho0 = solver.steady(&family.matrix_at(qd, czero()), &mut direct)?;
        let plus = solver.plus(&family.matrix_at(qd, i_delta), &rho0, delta, &mut direct)?;
        let amp = solver.cavity_amplitude(&plus);
        let ratio = if opts.check_idler {
            let minus = solver.minus(&family.matrix_at(qd, -i_delta), &rho0, delta, &mut direct)?;
            let idler = solver.cavity_amplitude(&minus).norm();
            let r = if amp.norm() > T::zero() { idler / amp.norm() } else { T::zero() };
            if r > T::lit(IDLER_TOLERANCE) {
                return Err(Error::Solver {
                    reason: "counter-rotating sideband above tolerance".into(),
                    residual: r.to_f64_lossy(),
                });
            }
            Some(r)
        } else {
            None
        };
        Ok((amp, ratio))
    };
    let results: Vec<Result<(Complex<T>, Option<T>)>> = run_parallel(opts.jobs, || {
        omega_d_grid
            .par_iter()
            .enumerate()
            .map(|(i, &w)| point(w).map_err(|e| e.at_grid_point(i, w.to_f64_lossy())))
            .collect()
    })?;
    let mut values = Vec::with_capacity(results.len());
    let mut idler: Option<f64> = None;
    for r in results {
        let (v, ratio) = r?;
        values.push(v);
        if let Some(x) = ratio {
            idler = Some(idler.unwrap_or(0.0).max(x.to_f64_lossy()));
        }
    }
    let meta = SpectrumMeta {
        frame: FrameChoice::SqueezeFrame,
        axis: SweepAxis::QubitDrive,
        drive: kind.name().into(),
        params_digest: params_digest(p, kind),
        idler_ratio: idler,
    };
    Spectrum::new(omega_d_grid.to_vec(), values, meta)
}

/// Steady-state qubit excitation `⟨(σ_z + 1)/2⟩` versus qubit-drive
/// frequency, with no probe. For a weak probe the transmission is
/// proportional to this.
pub fn qubit_excitation_spectrum<T: Real>(
    p: &SystemParams<T>,
    kind: &DriveKind<T>,
    omega_d_grid: &[T],
    opts: &SweepOptions,
) -> Result<Spectrum<T>> {
    check_axis(omega_d_grid)?;
    let spec = GeneratorSpec {
        params: *p,
        drive: *kind,
        frame: FrameChoice::SqueezeFrame,
        include_probe: false,
        layout: opts.layout,
    };
    let family = DetuningFamily::new(&spec)?;
    let d = opts.layout.dim();
    let base = family.matrix_at(p.omega_q - omega_d_grid[0], czero());
    let row = trace_row_index(&base, d);
    let solver = SidebandSolver::new(opts.layout, T::zero(), row, opts.steady)?;
    let mut direct = DirectSolver::new();
    direct.analyze(&crate::linsolve::BorderedSystem::new(&base, d, row).matrix)?;
    // Excited block of the qubit is the upper half of the index range.
    let excited: Vec<usize> = (d / 2..d).map(|i| i * d + i).collect();

    let point = |omega_d: T| -> Result<Complex<T>> {
        let mut direct = direct.clone();
        let rho = solver.steady(&family.matrix_at(p.omega_q - omega_d, czero()), &mut direct)?;
        let pe = excited.iter().fold(T::zero(), |s, &k| s + rho[k].re);
        Ok(Complex::new(pe, T::zero()))
    };
    let results: Vec<Result<Complex<T>>> = run_parallel(opts.jobs, || {
        omega_d_grid
            .par_iter()
            .enumerate()
            .map(|(i, &w)| point(w).map_err(|e| e.at_grid_point(i, w.to_f64_lossy())))
            .collect()
    })?;
    let values = results.into_iter().collect::<Result<Vec<_>>>()?;
    let meta = SpectrumMeta {
        frame: FrameChoice::SqueezeFrame,
        axis: SweepAxis::QubitDrive,
        drive: kind.name().into(),
        params_digest: params_digest(p, kind),
        idler_ratio: None,
    };
    Spectrum::new(omega_d_grid.to_vec(), values, meta)
}

/// Exact steady-state transmission `|⟨a⟩|` on a probe × qubit-drive grid,
/// with the finite probe amplitude included in the probe-frame Hamiltonian.
///
/// Only drives without a JPA mode are supported; the squeezed and coherent
/// kinds are rejected as incompatible with the probe frame.
pub fn probe_sweep_transmission<T: Real>(
    p: &SystemParams<T>,
    kind: &DriveKind<T>,
    omega_p_grid: &[T],
    omega_d_grid: &[T],
    opts: &SweepOptions,
) -> Result<Spectrum2D<T>> {
    if kind.needs_jpa() {
        return Err(Error::FrameIncompatible(format!(
            "{} drive requires the squeeze frame; use qubit_spectrum",
            kind.name()
        )));
    }
    check_grid(omega_p_grid, 1)?;
    check_grid(omega_d_grid, 1)?;
    let layout = SpaceLayout::without_jpa(opts.layout.cavity_dim())?;
    let a = LadderSet::<T>::new(layout)?.a;
    let nd = omega_d_grid.len();
    let point = |k: usize| -> Result<Complex<T>> {
        let (ip, id) = (k / nd, k % nd);
        let mut q = *p;
        q.omega_p = omega_p_grid[ip];
        q.omega_d = omega_d_grid[id];
        let spec = GeneratorSpec { params: q, drive: *kind, frame: FrameChoice::ProbeFrame, include_probe: true, layout };
        let ss = steady_state_with(&spec.build()?, &SteadyStateOptions { uniqueness_limit: 0, ..opts.steady })?;
        ss.rho.expectation(&a)
    };
    let total = omega_p_grid.len() * nd;
    let results: Vec<Result<Complex<T>>> = run_parallel(opts.jobs, || {
        (0..total)
            .into_par_iter()
            .map(|k| {
                // Annotate with the drive frequency unless only the probe varies.
                let at = if nd > 1 { omega_d_grid[k % nd] } else { omega_p_grid[k / nd] };
                point(k).map_err(|e| e.at_grid_point(k, at.to_f64_lossy()))
            })
            .collect()
    })?;
    let values = results.into_iter().collect::<Result<Vec<_>>>()?;
    let meta = SpectrumMeta {
        frame: FrameChoice::ProbeFrame,
        axis: SweepAxis::Probe,
        drive: kind.name().into(),
        params_digest: params_digest(p, kind),
        idler_ratio: None,
    };
    Ok(Spectrum2D {
        probe_axis: omega_p_grid.to_vec(),
        drive_axis: omega_d_grid.to_vec(),
        normalization: max_magnitude(&values),
        values,
        metadata: meta,
    })
}
