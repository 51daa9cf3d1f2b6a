//! Hamiltonians and the cascaded generator for the qubit-cavity system fed
//! by a parametric amplifier.

mod generator;
mod hamiltonian;
mod params;

use serde::{Deserialize, Serialize};

pub use generator::{build_cascaded_generator, cascaded_channels, DetuningFamily, GeneratorSpec};
pub use hamiltonian::{build_jpa_hamiltonian, build_system_hamiltonian};
pub use params::{mhz, SystemParams};

/// Rotating frame used to remove the optical carrier frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameChoice {
    /// `H₀ = ω_s(a†a + b†b) + (ω_d/2)σ_z`; the JPA is part of the dynamics.
    SqueezeFrame,
    /// `H₀ = ω_p a†a + (ω_d/2)σ_z`; the JPA is absent and a finite probe is
    /// static.
    ProbeFrame,
}

/// State of the field injected into the cavity through the JPA port.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DriveKind<T> {
    Off,
    /// Broadband thermal field; sets the cavity bath occupation.
    Thermal { n_th: T },
    /// JPA driven linearly, `H' = (Ω_s/2)(b† + b)`. On a layout without the
    /// JPA mode the source is eliminated exactly and the cavity sees
    /// `−√(κ_e/κ'_e) Ω_s (a + a†)`.
    Coherent { amplitude: T },
    /// JPA pumped at `2ω_s`, `H' = (Ω_s/2)(b†² + b²)`.
    Squeezed { amplitude: T },
}

impl<T: crate::Real> DriveKind<T> {
    pub fn validate(&self) -> crate::Result<()> {
        let v = match *self {
            DriveKind::Off => return Ok(()),
            DriveKind::Thermal { n_th } => n_th,
            DriveKind::Coherent { amplitude } | DriveKind::Squeezed { amplitude } => amplitude,
        };
        if v < T::zero() || !v.is_finite() {
            return Err(crate::Error::InvalidParams(format!("drive parameter {v} must be finite and >= 0")));
        }
        Ok(())
    }

    /// True when the drive needs the JPA mode in the Hilbert space.
    pub fn needs_jpa(&self) -> bool {
        matches!(self, DriveKind::Coherent { .. } | DriveKind::Squeezed { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DriveKind::Off => "off",
            DriveKind::Thermal { .. } => "thermal",
            DriveKind::Coherent { .. } => "coherent",
            DriveKind::Squeezed { .. } => "squeezed",
        }
    }
}

/// Short SHA-256 digest of the parameter record and drive, for tagging
/// derived data. Stable across runs and platforms.
pub fn params_digest<T: crate::Real>(p: &SystemParams<T>, kind: &DriveKind<T>) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    let fields = [
        p.omega_c,
        p.omega_q,
        p.chi,
        p.kappa,
        p.kappa_e,
        p.kappa_e_prime,
        p.n_th,
        p.p_th,
        p.gamma,
        p.gamma_phi,
        p.omega_s,
        p.omega_d,
        p.omega_p,
        p.qubit_drive,
        p.probe_amplitude,
    ];
    for f in fields {
        h.update(f.to_f64_lossy().to_le_bytes());
    }
    h.update(kind.name().as_bytes());
    let extra = match *kind {
        DriveKind::Off => T::zero(),
        DriveKind::Thermal { n_th } => n_th,
        DriveKind::Coherent { amplitude } | DriveKind::Squeezed { amplitude } => amplitude,
    };
    h.update(extra.to_f64_lossy().to_le_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}
