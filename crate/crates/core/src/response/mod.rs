//! Probe transmission spectra and time-domain traces.
//!
//! The cavity probe is treated either perturbatively, as the first-order
//! sideband of the squeeze-frame steady state ([`linear_response_amplitude`],
//! [`qubit_spectrum`]), or exactly in the probe frame where it is static
//! ([`probe_sweep_transmission`]).

mod evolve;
mod linear;
mod sweep;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FrameChoice;
use crate::scalar::{Complex, Real};

pub use evolve::{ramsey_initial_state, ramsey_observable, time_evolve, time_evolve_with, EvolveMethod, EvolveOptions};
pub use linear::{linear_response, linear_response_amplitude, LinearResponse, IDLER_TOLERANCE};
pub use sweep::{probe_sweep_transmission, qubit_excitation_spectrum, qubit_spectrum, SweepOptions};

/// Which frequency a spectrum sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    QubitDrive,
    Probe,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub frame: FrameChoice,
    pub axis: SweepAxis,
    pub drive: String,
    pub params_digest: String,
    /// Largest `|ρ₋|`-sideband amplitude relative to the kept sideband, when
    /// it was computed.
    pub idler_ratio: Option<f64>,
}

/// Complex transmission sampled on a strictly monotone frequency axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T: Real> {
    pub axis: Vec<T>,
    pub values: Vec<Complex<T>>,
    /// Reference magnitude for normalized overlays; by default the largest
    /// magnitude of the dataset.
    pub normalization: T,
    pub metadata: SpectrumMeta,
}

fn check_axis<T: Real>(axis: &[T]) -> Result<()> {
    check_grid(axis, 2)
}

/// Strictly monotone, finite, and at least `min_len` long.
fn check_grid<T: Real>(axis: &[T], min_len: usize) -> Result<()> {
    if axis.len() < min_len {
        return Err(Error::InvalidSpectrum(format!("need at least {min_len} axis point(s)")));
    }
    let inc = axis.len() < 2 || axis[1] > axis[0];
    if axis.windows(2).any(|w| (w[1] > w[0]) != inc || w[1] == w[0]) {
        return Err(Error::InvalidSpectrum("axis is not strictly monotone".into()));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpectrum("non-finite axis value".into()));
    }
    Ok(())
}

fn max_magnitude<T: Real>(values: &[Complex<T>]) -> T {
    values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
}

impl<T: Real> Spectrum<T> {
    pub fn new(axis: Vec<T>, values: Vec<Complex<T>>, metadata: SpectrumMeta) -> Result<Self> {
        check_axis(&axis)?;
        if values.len() != axis.len() {
            return Err(Error::DimensionMismatch { expected: axis.len(), actual: values.len() });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite value".into()));
        }
        let normalization = max_magnitude(&values);
        Ok(Self { axis, values, normalization, metadata })
    }

    /// Real magnitudes, e.g. an observed spectrum without phase.
    pub fn from_magnitudes(axis: Vec<T>, magnitudes: &[T], metadata: SpectrumMeta) -> Result<Self> {
        Self::new(axis, magnitudes.iter().map(|&m| Complex::new(m, T::zero())).collect(), metadata)
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Magnitudes divided by [`normalization`](Self::normalization).
    pub fn normalized(&self) -> Vec<T> {
        let n = if self.normalization > T::zero() { self.normalization } else { T::one() };
        self.values.iter().map(|v| v.norm() / n).collect()
    }

    pub fn with_normalization(mut self, normalization: T) -> Self {
        self.normalization = normalization;
        self
    }

    /// Axis positions of interior local maxima whose prominence exceeds
    /// `min_fraction` of the largest magnitude.
    ///
    /// Prominence is the height above the higher of the two lowest points
    /// reached before the magnitude climbs above the peak on either side (or
    /// the axis ends), so ripples on a flat background are ignored.
    pub fn local_maxima(&self, min_fraction: T) -> Vec<usize> {
        let m = self.magnitudes();
        let top = m.iter().fold(T::zero(), |a, &b| a.max(b));
        let n = m.len();
        (1..n.saturating_sub(1))
            .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1])
            .filter(|&i| {
                let mut left = m[i];
                for &v in m[..i].iter().rev() {
                    if v > m[i] {
                        break;
                    }
                    left = left.min(v);
                }
                let mut right = m[i];
                for &v in &m[i + 1..] {
                    if v > m[i] {
                        break;
                    }
                    right = right.min(v);
                }
                m[i] - left.max(right) >= min_fraction * top
            })
            .collect()
    }
}

/// Transmission on a probe × qubit-drive grid, stored row-major with one
/// row per probe frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum2D<T: Real> {
    pub probe_axis: Vec<T>,
    pub drive_axis: Vec<T>,
    pub values: Vec<Complex<T>>,
    pub normalization: T,
    pub metadata: SpectrumMeta,
}

impl<T: Real> Spectrum2D<T> {
    pub fn at(&self, ip: usize, id: usize) -> Complex<T> {
        self.values[ip * self.drive_axis.len() + id]
    }

    /// Cut at fixed probe index, sweeping the qubit drive; keeps the global
    /// normalization.
    pub fn drive_cut(&self, ip: usize) -> Spectrum<T> {
        let n = self.drive_axis.len();
        Spectrum {
            axis: self.drive_axis.clone(),
            values: self.values[ip * n..(ip + 1) * n].to_vec(),
            normalization: self.normalization,
            metadata: SpectrumMeta { axis: SweepAxis::QubitDrive, ..self.metadata.clone() },
        }
    }

    /// Cut at fixed drive index, sweeping the probe.
    pub fn probe_cut(&self, id: usize) -> Spectrum<T> {
        Spectrum {
            axis: self.probe_axis.clone(),
            values: (0..self.probe_axis.len()).map(|ip| self.at(ip, id)).collect(),
            normalization: self.normalization,
            metadata: SpectrumMeta { axis: SweepAxis::Probe, ..self.metadata.clone() },
        }
    }
}

/// Real observable sampled on an increasing time grid starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeTrace<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub observable: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> SpectrumMeta {
        SpectrumMeta {
            frame: FrameChoice::SqueezeFrame,
            axis: SweepAxis::QubitDrive,
            drive: "off".into(),
            params_digest: String::new(),
            idler_ratio: None,
        }
    }

    #[test]
    fn spectrum_validates_axis() {
        let v = vec![Complex::new(1.0, 0.0); 3];
        assert!(Spectrum::new(vec![0.0, 1.0, 1.0], v.clone(), meta()).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0, 0.0], v.clone(), meta()).is_ok());
        assert!(Spectrum::new(vec![0.0, 1.0], v, meta()).is_err());
    }

    #[test]
    fn normalization_is_peak_magnitude() {
        let s = Spectrum::from_magnitudes(vec![0.0, 1.0, 2.0, 3.0], &[0.1, 0.4, 0.2, 0.3], meta()).unwrap();
        assert_eq!(s.normalization, 0.4);
        assert_eq!(s.normalized()[1], 1.0);
        assert_eq!(s.local_maxima(0.0), vec![1]);
        let r = Spectrum::from_magnitudes(
            (0..7).map(|i| i as f64).collect(),
            &[0.1, 0.1, 1.0, 0.1, 0.1000001, 0.1, 0.1],
            meta(),
        )
        .unwrap();
        assert_eq!(r.local_maxima(0.05), vec![2]);
        assert_eq!(r.local_maxima(0.0), vec![2, 4]);
    }
}
