use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DriveKind, SystemParams};
use crate::response::{qubit_spectrum, Spectrum, SweepOptions};
use crate::scalar::Real;

use super::simplex::{minimize_bounded, IterationRecord, SimplexOptions};

/// Field injected through the JPA port in the fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Thermal,
    Coherent,
    Squeezed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    /// Cavity bath occupation; for the thermal family, the injected `n_th`.
    NTh,
    /// Cavity-drive amplitude `Ω_s` of the coherent and squeezed families.
    DriveAmplitude,
    KappaE,
    QubitDrive,
    ProbeAmplitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeParam<T> {
    pub param: FitParam,
    pub lower: T,
    pub upper: T,
    pub initial: T,
}

#[derive(Clone, Debug)]
pub struct FitProblem<T: Real> {
    pub observed: Spectrum<T>,
    pub family: ModelFamily,
    pub free: Vec<FreeParam<T>>,
    pub baseline: SystemParams<T>,
    /// `Ω_s` used when it is not free; ignored by the thermal family.
    pub drive_amplitude: T,
    /// Qubit-drive grid of the model; `None` reuses the observed axis.
    pub model_axis: Option<Vec<T>>,
    pub sweep: SweepOptions,
    pub simplex: SimplexOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumFit<T> {
    pub params: Vec<(FitParam, T)>,
    /// Sum of squared differences of the normalized magnitudes.
    pub residual: T,
    /// Finite-difference estimate in parameter order, when the curvature is
    /// positive definite.
    pub covariance: Option<Vec<Vec<T>>>,
    /// Parameters that ended on a bound.
    pub at_bound: Vec<FitParam>,
    pub seed: u64,
    pub evaluations: usize,
    pub log: Vec<IterationRecord>,
}

impl<T: Real> SpectrumFit<T> {
    pub fn value(&self, p: FitParam) -> Option<T> {
        self.params.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

impl<T: Real> FitProblem<T> {
    pub fn new(observed: Spectrum<T>, family: ModelFamily, baseline: SystemParams<T>, sweep: SweepOptions) -> Self {
        Self {
            observed,
            family,
            free: Vec::new(),
            baseline,
            drive_amplitude: T::zero(),
            model_axis: None,
            sweep,
            simplex: SimplexOptions { xtol: 1e-7, ..Default::default() },
        }
    }

    pub fn with_free(mut self, param: FitParam, lower: T, upper: T, initial: T) -> Self {
        self.free.push(FreeParam { param, lower, upper, initial });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() {
            return Err(Error::InvalidParams("fit needs at least one free parameter".into()));
        }
        for f in &self.free {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.upper > f.lower) {
                return Err(Error::InvalidParams(format!("bounds of {:?} must be finite with upper > lower", f.param)));
            }
            if f.param == FitParam::DriveAmplitude && self.family == ModelFamily::Thermal {
                return Err(Error::InvalidParams("thermal family has no drive amplitude".into()));
            }
        }
        Ok(())
    }

    /// Parameters and drive for the free values `x`.
    pub fn model_at(&self, x: &[T]) -> Result<(SystemParams<T>, DriveKind<T>)> {
        let mut p = self.baseline;
        let mut amplitude = self.drive_amplitude;
        let mut n_th = p.n_th;
        for (f, &v) in self.free.iter().zip(x) {
            match f.param {
                FitParam::NTh => n_th = v,
                FitParam::DriveAmplitude => amplitude = v,
                FitParam::KappaE => p.kappa_e = v,
                FitParam::QubitDrive => p.qubit_drive = v,
                FitParam::ProbeAmplitude => p.probe_amplitude = v,
            }
        }
        let kind = match self.family {
            ModelFamily::Thermal => DriveKind::Thermal { n_th },
            ModelFamily::Coherent => {
                p.n_th = n_th;
                DriveKind::Coherent { amplitude }
            }
            ModelFamily::Squeezed => {
                p.n_th = n_th;
                DriveKind::Squeezed { amplitude }
            }
        };
        p.validate()?;
        kind.validate()?;
        Ok((p, kind))
    }

    pub fn model_spectrum(&self, x: &[T]) -> Result<Spectrum<T>> {
        let (p, kind) = self.model_at(x)?;
        let axis = self.model_axis.as_deref().unwrap_or(&self.observed.axis);
        qubit_spectrum(&p, &kind, axis, &self.sweep)
    }

    /// Normalized model magnitudes interpolated onto the observed axis.
    fn aligned(&self, model: &Spectrum<T>) -> Result<Vec<T>> {
        let mut pts: Vec<(T, T)> = model.axis.iter().copied().zip(model.normalized()).collect();
        if pts[0].0 > pts[pts.len() - 1].0 {
            pts.reverse();
        }
        let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
        let slack = (hi - lo) * T::lit(0.1);
        self.observed
            .axis
            .iter()
            .map(|&w| {
                if w < lo - slack || w > hi + slack {
                    return Err(Error::GridMismatch(format!("observed point {w} lies outside the model grid")));
                }
                if w <= lo {
                    return Ok(pts[0].1);
                }
                if w >= hi {
                    return Ok(pts[pts.len() - 1].1);
                }
                let j = pts.partition_point(|q| q.0 <= w);
                let ((x0, y0), (x1, y1)) = (pts[j - 1], pts[j]);
                Ok(y0 + (y1 - y0) * (w - x0) / (x1 - x0))
            })
            .collect()
    }

    /// Sum of squared differences between normalized magnitudes.
    pub fn objective(&self, x: &[T]) -> Result<T> {
        let model = self.aligned(&self.model_spectrum(x)?)?;
        let obs = self.observed.normalized();
        Ok(obs.iter().zip(&model).fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b)))
    }
}

/// Simplex fit of the free parameters to the observed spectrum.
pub fn fit_spectrum<T: Real>(problem: &FitProblem<T>) -> Result<SpectrumFit<T>> {
    problem.validate()?;
    let lower: Vec<T> = problem.free.iter().map(|f| f.lower).collect();
    let upper: Vec<T> = problem.free.iter().map(|f| f.upper).collect();
    let start: Vec<T> = problem.free.iter().map(|f| f.initial).collect();
    let r = minimize_bounded(|x: &[T]| problem.objective(x), &lower, &upper, &start, &problem.simplex)?;
    let at_bound = problem
        .free
        .iter()
        .zip(&r.x)
        .filter(|(f, &v)| {
            let tol = (f.upper - f.lower) * T::lit(1e-6);
            v - f.lower <= tol || f.upper - v <= tol
        })
        .map(|(f, _)| f.param)
        .collect();
    let covariance = curvature_covariance(problem, &r.x, r.value, &lower, &upper)?;
    Ok(SpectrumFit {
        params: problem.free.iter().map(|f| f.param).zip(r.x.iter().copied()).collect(),
        residual: r.value,
        covariance,
        at_bound,
        seed: problem.simplex.seed,
        evaluations: r.evaluations,
        log: r.log,
    })
}

/// `2σ²H⁻¹` with `σ² = SSR/(m − k)` and `H` the central-difference Hessian
/// of the objective.
fn curvature_covariance<T: Real>(
    problem: &FitProblem<T>,
    x: &[T],
    f0: T,
    lower: &[T],
    upper: &[T],
) -> Result<Option<Vec<Vec<T>>>> {
    let k = x.len();
    let m = problem.observed.len();
    if m <= k {
        return Ok(None);
    }
    let h: Vec<T> = (0..k).map(|i| (upper[i] - lower[i]) * T::lit(1e-3)).collect();
    // Keep the stencil inside the box.
    let c: Vec<T> = (0..k).map(|i| x[i].max(lower[i] + h[i]).min(upper[i] - h[i])).collect();
    let at = |d: &[(usize, T)]| -> Result<T> {
        let mut y = c.clone();
        for &(i, s) in d {
            y[i] += s * h[i];
        }
        problem.objective(&y)
    };
    let fc = if c == x { f0 } else { at(&[])? };
    let one = T::one();
    let mut hess = Mat::<T>::zeros(k, k);
    for i in 0..k {
        let v = (at(&[(i, one)])? - fc * T::lit(2.0) + at(&[(i, -one)])?) / (h[i] * h[i]);
        hess[(i, i)] = v;
        for j in 0..i {
            let v = (at(&[(i, one), (j, one)])? - at(&[(i, one), (j, -one)])? - at(&[(i, -one), (j, one)])?
                + at(&[(i, -one), (j, -one)])?)
                / (T::lit(4.0) * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.llt(faer::Side::Lower).is_err() {
        return Ok(None);
    }
    let inv = hess.partial_piv_lu().solve(Mat::<T>::identity(k, k));
    let sigma2 = f0 / T::from_count(m - k);
    Ok(Some((0..k).map(|i| (0..k).map(|j| inv[(i, j)] * sigma2 * T::lit(2.0)).collect()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SpaceLayout;
    use crate::model::mhz;

    fn axis(p: &SystemParams<f64>, n: usize) -> Vec<f64> {
        (0..n).map(|i| p.omega_q + mhz::<f64>(-20.0 + 24.0 * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn thermal_round_trip() {
        let p = SystemParams::<f64>::table_s1();
        let sweep = SweepOptions::new(SpaceLayout::without_jpa(8).unwrap());
        let obs = qubit_spectrum(&p, &DriveKind::Thermal { n_th: 0.22 }, &axis(&p, 49), &sweep).unwrap();
        // Rescaling the data must not matter.
        let scaled = obs.clone().values.iter().map(|v| v * 37.0).collect();
        let obs = Spectrum::new(obs.axis.clone(), scaled, obs.metadata).unwrap();
        let mut prob = FitProblem::new(obs, ModelFamily::Thermal, p, sweep).with_free(FitParam::NTh, 0.0, 0.6, 0.1);
        prob.simplex.restarts = 1;
        let fit = fit_spectrum(&prob).unwrap();
        let n = fit.value(FitParam::NTh).unwrap();
        assert!((n - 0.22).abs() < 0.22 * 0.02, "{n}");
        assert!(fit.residual < 1e-12, "{}", fit.residual);
        assert!(fit.at_bound.is_empty());
        assert!(fit.covariance.is_some());
    }

    #[test]
    fn model_fits_itself_exactly() {
        let p = SystemParams::<f64>::table_s1();
        let sweep = SweepOptions::new(SpaceLayout::without_jpa(6).unwrap());
        let obs = qubit_spectrum(&p, &DriveKind::Thermal { n_th: 0.1 }, &axis(&p, 25), &sweep).unwrap();
        let prob = FitProblem::new(obs, ModelFamily::Thermal, p, sweep).with_free(FitParam::NTh, 0.0, 0.6, 0.1);
        assert!(prob.objective(&[0.1]).unwrap() < 1e-24);
    }

    #[test]
    fn grid_mismatch_detected() {
        let p = SystemParams::<f64>::table_s1();
        let sweep = SweepOptions::new(SpaceLayout::without_jpa(4).unwrap());
        let obs = qubit_spectrum(&p, &DriveKind::Off, &axis(&p, 9), &sweep).unwrap();
        let mut prob = FitProblem::new(obs, ModelFamily::Thermal, p, sweep).with_free(FitParam::NTh, 0.0, 0.5, 0.1);
        prob.model_axis = Some((0..9).map(|i| p.omega_q + mhz::<f64>(i as f64)).collect());
        assert!(matches!(prob.objective(&[0.1]), Err(Error::GridMismatch(_))));
        let bad = FitProblem { free: vec![], ..prob.clone() };
        assert!(fit_spectrum(&bad).is_err());
        let bad = prob.with_free(FitParam::DriveAmplitude, 0.0, 1.0, 0.5);
        assert!(bad.validate().is_err());
    }
}
