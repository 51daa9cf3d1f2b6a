//! Fits of spectra and time traces.
//!
//! Everything here minimizes a sum of squares with the bounded simplex in
//! [`minimize_bounded`]. Parameters that enter the model linearly (peak
//! areas, offsets, trace amplitudes) are eliminated by an inner least-squares
//! solve, so the simplex only searches the nonlinear ones.

mod peaks;
mod simplex;
mod spectrum;
mod time;

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::scalar::Real;

pub use peaks::{apparent_photon_number, multi_lorentzian_fit, LorentzianPeak, MultiLorentzianFit, PeakFitOptions};
pub use simplex::{minimize_bounded, IterationRecord, SimplexOptions, SimplexResult};
pub use spectrum::{fit_spectrum, FitParam, FitProblem, FreeParam, ModelFamily, SpectrumFit};
pub use time::{dominant_frequency, fit_exponential_decay, fit_ramsey, DecayFit, FrequencyEstimate, RamseyFit};

/// Least squares `min ‖Σ c_j col_j − y‖²`, with `c_j ≥ 0` enforced where
/// `nonneg[j]` by dropping the most negative coefficient and re-solving.
///
/// Returns the coefficients and the residual sum of squares.
pub(crate) fn lstsq<T: Real>(cols: &[Vec<T>], y: &[T], nonneg: &[bool]) -> (Vec<T>, T) {
    let k = cols.len();
    let norms: Vec<T> = cols.iter().map(|c| c.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()).collect();
    let mut active: Vec<usize> = (0..k).filter(|&j| norms[j] > T::zero()).collect();
    let mut coef = vec![T::zero(); k];
    loop {
        coef.iter_mut().for_each(|c| *c = T::zero());
        let m = active.len();
        if m > 0 {
            // Normal equations on unit-norm columns.
            let g = Mat::<T>::from_fn(m, m, |a, b| {
                let (ca, cb) = (&cols[active[a]], &cols[active[b]]);
                ca.iter().zip(cb).fold(T::zero(), |s, (x, z)| s + *x * *z) / (norms[active[a]] * norms[active[b]])
            });
            let rhs = Mat::<T>::from_fn(m, 1, |a, _| {
                cols[active[a]].iter().zip(y).fold(T::zero(), |s, (x, v)| s + *x * *v) / norms[active[a]]
            });
            let sol = g.partial_piv_lu().solve(&rhs);
            for a in 0..m {
                let v = sol[(a, 0)] / norms[active[a]];
                coef[active[a]] = if v.is_finite() { v } else { T::zero() };
            }
        }
        let worst = active
            .iter()
            .copied()
            .filter(|&j| nonneg[j] && coef[j] < T::zero())
            .min_by(|&a, &b| coef[a].partial_cmp(&coef[b]).unwrap_or(std::cmp::Ordering::Equal));
        match worst {
            Some(j) => active.retain(|&i| i != j),
            None => break,
        }
    }
    for j in 0..k {
        if !nonneg[j] {
            continue;
        }
        coef[j] = coef[j].max(T::zero());
    }
    let ssr = (0..y.len()).fold(T::zero(), |s, i| {
        let model = (0..k).fold(T::zero(), |acc, j| acc + coef[j] * cols[j][i]);
        let r = y[i] - model;
        s + r * r
    });
    (coef, ssr)
}
