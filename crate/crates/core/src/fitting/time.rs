use rustfft::num_complex::Complex as FftComplex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::response::TimeTrace;
use crate::scalar::Real;

use super::lstsq;
use super::simplex::{minimize_bounded, SimplexOptions};

/// `offset + amplitude·e^{−t/τ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit<T> {
    pub amplitude: T,
    pub tau: T,
    pub offset: T,
    pub residual: T,
}

/// `offset + amplitude·e^{−t/T₂}·cos(2πf t + phase)`; `frequency` is cyclic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RamseyFit<T> {
    pub frequency: T,
    pub t2: T,
    pub amplitude: T,
    pub phase: T,
    pub offset: T,
    pub residual: T,
}

/// Cyclic frequency of the largest non-DC FFT bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub frequency: f64,
    pub bin_width: f64,
}

fn check_trace<T: Real>(trace: &TimeTrace<T>, min_len: usize) -> Result<()> {
    if trace.times.len() != trace.values.len() {
        return Err(Error::DimensionMismatch { expected: trace.times.len(), actual: trace.values.len() });
    }
    if trace.times.len() < min_len {
        return Err(Error::InvalidParams(format!("need at least {min_len} samples")));
    }
    if trace.times.windows(2).any(|w| !(w[1] > w[0])) || trace.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("trace needs increasing times and finite values".into()));
    }
    Ok(())
}

fn span<T: Real>(trace: &TimeTrace<T>) -> T {
    *trace.times.last().expect("checked") - trace.times[0]
}

/// Single-exponential fit with free offset.
pub fn fit_exponential_decay<T: Real>(trace: &TimeTrace<T>) -> Result<DecayFit<T>> {
    check_trace(trace, 4)?;
    let t0 = trace.times[0];
    let total = span(trace);
    let columns = |tau: T| -> Vec<Vec<T>> {
        vec![trace.times.iter().map(|&t| (-(t - t0) / tau).exp()).collect(), vec![T::one(); trace.times.len()]]
    };
    let free = [false, false];
    let obj = |x: &[T]| -> Result<T> { Ok(lstsq(&columns(x[0]), &trace.values, &free).1) };
    let lo = total * T::lit(1e-3);
    let hi = total * T::lit(1e3);
    let opts = SimplexOptions { xtol: 1e-12, ..Default::default() };
    // The objective is flat in τ over many decades; search ln τ instead.
    let log_obj = |x: &[T]| obj(&[x[0].exp()]);
    let r = minimize_bounded(log_obj, &[lo.ln()], &[hi.ln()], &[(total / T::lit(3.0)).ln()], &opts)?;
    let tau = r.x[0].exp();
    let (c, residual) = lstsq(&columns(tau), &trace.values, &free);
    // Report the amplitude at t = 0 rather than at the first sample.
    Ok(DecayFit { amplitude: c[0] * (t0 / tau).exp(), tau, offset: c[1], residual })
}

/// Dominant oscillation frequency of a uniformly sampled trace.
pub fn dominant_frequency<T: Real>(trace: &TimeTrace<T>) -> Result<FrequencyEstimate> {
    check_trace(trace, 4)?;
    let n = trace.times.len();
    let dt = span(trace).to_f64_lossy() / (n - 1) as f64;
    let uniform = trace.times.windows(2).all(|w| ((w[1] - w[0]).to_f64_lossy() - dt).abs() <= 1e-6 * dt);
    if !uniform {
        return Err(Error::InvalidParams("FFT needs a uniform time grid".into()));
    }
    let mean = trace.values.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n as f64;
    let mut buf: Vec<FftComplex<f64>> = trace.values.iter().map(|v| FftComplex::new(v.to_f64_lossy() - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..=n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).expect("n >= 4");
    let bin_width = 1.0 / (n as f64 * dt);
    Ok(FrequencyEstimate { frequency: k as f64 * bin_width, bin_width })
}

/// Damped-cosine fit, seeded from [`dominant_frequency`].
pub fn fit_ramsey<T: Real>(trace: &TimeTrace<T>) -> Result<RamseyFit<T>> {
    let est = dominant_frequency(trace)?;
    let total = span(trace);
    let two_pi = T::two_pi();
    let columns = |f: T, t2: T| -> Vec<Vec<T>> {
        let env: Vec<T> = trace.times.iter().map(|&t| (-t / t2).exp()).collect();
        vec![
            trace.times.iter().zip(&env).map(|(&t, &e)| e * (two_pi * f * t).cos()).collect(),
            trace.times.iter().zip(&env).map(|(&t, &e)| e * (two_pi * f * t).sin()).collect(),
            vec![T::one(); trace.times.len()],
        ]
    };
    let free = [false; 3];
    let f0 = T::lit(est.frequency);
    let bin = T::lit(est.bin_width);
    let lower = [(f0 - bin * T::lit(2.0)).max(T::zero()), (total * T::lit(1e-2)).ln()];
    let upper = [f0 + bin * T::lit(2.0), (total * T::lit(1e2)).ln()];
    let obj = |x: &[T]| -> Result<T> { Ok(lstsq(&columns(x[0], x[1].exp()), &trace.values, &free).1) };
    let opts = SimplexOptions { xtol: 1e-12, ..Default::default() };
    let r = minimize_bounded(obj, &lower, &upper, &[f0, (total * T::lit(0.5)).ln()], &opts)?;
    let (f, t2) = (r.x[0], r.x[1].exp());
    let (c, residual) = lstsq(&columns(f, t2), &trace.values, &free);
    Ok(RamseyFit {
        frequency: f,
        t2,
        amplitude: (c[0] * c[0] + c[1] * c[1]).sqrt(),
        phase: (-c[1]).atan2(c[0]),
        offset: c[2],
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> TimeTrace<f64> {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        TimeTrace { times, values, observable: "synthetic".into() }
    }

    #[test]
    fn recovers_decay_constant() {
        let tr = trace(60, 0.5e-6, |t| 0.02 + 0.97 * (-t / 5.5e-6).exp());
        let fit = fit_exponential_decay(&tr).unwrap();
        assert!((fit.tau - 5.5e-6).abs() < 1e-9 * 5.5e-6, "{}", fit.tau);
        assert!((fit.amplitude - 0.97).abs() < 1e-8 && (fit.offset - 0.02).abs() < 1e-8);
    }

    #[test]
    fn recovers_ramsey_parameters() {
        let tr = trace(200, 50e-9, |t| 0.5 + 0.45 * (-t / 4.5e-6).exp() * (2.0 * std::f64::consts::PI * 0.9e6 * t + 0.3).cos());
        let est = dominant_frequency(&tr).unwrap();
        assert!((est.frequency - 0.9e6).abs() <= est.bin_width);
        let fit = fit_ramsey(&tr).unwrap();
        assert!((fit.frequency - 0.9e6).abs() < 1e-3, "{}", fit.frequency);
        assert!((fit.t2 - 4.5e-6).abs() < 1e-12);
        assert!((fit.phase - 0.3).abs() < 1e-8 && (fit.amplitude - 0.45).abs() < 1e-8);
    }

    #[test]
    fn fft_needs_uniform_grid() {
        let mut tr = trace(16, 1.0, |t| t.sin());
        tr.times[5] += 0.3;
        assert!(dominant_frequency(&tr).is_err());
    }
}
