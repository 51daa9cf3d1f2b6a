use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical rates and frequencies of the qubit-cavity-JPA system.
///
/// Every frequency and rate is angular (rad/s). The cavity-drive amplitude
/// `Ω_s` is carried by [`DriveKind`](super::DriveKind) rather than here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    /// Dressed cavity frequency `ω_c`.
    pub omega_c: T,
    /// Dressed qubit frequency `ω_q`.
    pub omega_q: T,
    /// Dispersive shift `χ`.
    pub chi: T,
    /// Total cavity energy decay rate `κ`.
    pub kappa: T,
    /// Cavity coupling to the waveguide fed by the JPA, `κ_e`.
    pub kappa_e: T,
    /// JPA external coupling `κ'_e`.
    pub kappa_e_prime: T,
    /// Thermal photon number of the cavity bath.
    pub n_th: T,
    /// Thermal excitation probability of the qubit bath.
    pub p_th: T,
    /// Qubit energy decay rate `γ = 1/T1`.
    pub gamma: T,
    /// Pure dephasing rate `γ_φ`.
    pub gamma_phi: T,
    /// Cavity-drive (JPA) center frequency `ω_s`.
    pub omega_s: T,
    /// Qubit drive frequency `ω_d`.
    pub omega_d: T,
    /// Cavity probe frequency `ω_p`.
    pub omega_p: T,
    /// Qubit drive amplitude `Ω_d`.
    pub qubit_drive: T,
    /// Cavity probe amplitude `Ω_p`.
    pub probe_amplitude: T,
}

/// Angular frequency for a value in MHz.
pub fn mhz<T: Real>(f: f64) -> T {
    T::lit(2.0 * std::f64::consts::PI * f * 1e6)
}

impl<T: Real> SystemParams<T> {
    /// Measured device parameters, with `ω_s = ω_c + χ`, `ω_p = ω_c − χ` and a
    /// resonant qubit drive.
    pub fn table_s1() -> Self {
        let omega_c = mhz::<T>(10_400.5);
        let chi = mhz::<T>(3.9);
        let omega_q = mhz::<T>(8_794.1);
        Self {
            omega_c,
            omega_q,
            chi,
            kappa: mhz(0.494),
            kappa_e: mhz(0.490),
            kappa_e_prime: mhz(40.0),
            n_th: T::lit(0.04),
            p_th: T::lit(0.01),
            gamma: T::lit(1.0 / 5.5e-6),
            gamma_phi: T::zero(),
            omega_s: omega_c + chi,
            omega_d: omega_q,
            omega_p: omega_c - chi,
            qubit_drive: mhz(0.46),
            probe_amplitude: mhz(0.16),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_c", self.omega_c),
            ("omega_q", self.omega_q),
            ("chi", self.chi),
            ("kappa", self.kappa),
            ("kappa_e", self.kappa_e),
            ("kappa_e_prime", self.kappa_e_prime),
            ("n_th", self.n_th),
            ("p_th", self.p_th),
            ("gamma", self.gamma),
            ("gamma_phi", self.gamma_phi),
            ("omega_s", self.omega_s),
            ("omega_d", self.omega_d),
            ("omega_p", self.omega_p),
            ("qubit_drive", self.qubit_drive),
            ("probe_amplitude", self.probe_amplitude),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let non_negative = [
            ("kappa", self.kappa),
            ("kappa_e", self.kappa_e),
            ("kappa_e_prime", self.kappa_e_prime),
            ("n_th", self.n_th),
            ("gamma", self.gamma),
            ("gamma_phi", self.gamma_phi),
            ("qubit_drive", self.qubit_drive),
            ("probe_amplitude", self.probe_amplitude),
        ];
        if let Some((name, v)) = non_negative.iter().find(|(_, v)| *v < T::zero()) {
            return Err(Error::InvalidParams(format!("{name} = {v} must be >= 0")));
        }
        if self.kappa_e > self.kappa {
            return Err(Error::InvalidParams(format!(
                "kappa_e = {} exceeds total kappa = {}",
                self.kappa_e, self.kappa
            )));
        }
        if self.p_th < T::zero() || self.p_th > T::one() {
            return Err(Error::InvalidParams(format!("p_th = {} outside [0, 1]", self.p_th)));
        }
        Ok(())
    }

    /// Qubit-drive detuning `ω_q − ω_d`.
    pub fn qubit_detuning(&self) -> T {
        self.omega_q - self.omega_d
    }

    /// Cavity-drive detuning from the ground-state cavity line,
    /// `δ = ω_s − (ω_c + χ)`.
    pub fn source_detuning(&self) -> T {
        self.omega_s - (self.omega_c + self.chi)
    }

    pub fn with_source_detuning(mut self, delta: T) -> Self {
        self.omega_s = self.omega_c + self.chi + delta;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SystemParams::<f64>::table_s1().validate().unwrap();
        SystemParams::<f32>::table_s1().validate().unwrap();
    }

    #[test]
    fn external_coupling_cannot_exceed_total() {
        let mut p = SystemParams::<f64>::table_s1();
        p.kappa_e = p.kappa * 1.01;
        assert!(p.validate().is_err());
    }

    #[test]
    fn thermal_probability_bounded() {
        let mut p = SystemParams::<f64>::table_s1();
        p.p_th = 1.5;
        assert!(p.validate().is_err());
        p.p_th = 0.0;
        p.gamma = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn source_detuning_round_trip() {
        let p = SystemParams::<f64>::table_s1().with_source_detuning(mhz(2.0));
        assert!((p.source_detuning() - mhz::<f64>(2.0)).abs() < 1e-3);
    }
}
