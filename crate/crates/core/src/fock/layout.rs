use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One factor of the composite qubit ⊗ cavity ⊗ JPA space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subsystem {
    Qubit,
    Cavity,
    Jpa,
}

impl Subsystem {
    pub const ALL: [Subsystem; 3] = [Subsystem::Qubit, Subsystem::Cavity, Subsystem::Jpa];

    pub fn index(self) -> usize {
        match self {
            Subsystem::Qubit => 0,
            Subsystem::Cavity => 1,
            Subsystem::Jpa => 2,
        }
    }

    pub fn from_index(slot: usize) -> Result<Self> {
        Self::ALL.get(slot).copied().ok_or(Error::SlotOutOfRange(slot))
    }
}

/// Truncated tensor-product space `|q, n, m⟩` with the qubit as the most
/// significant factor: `index = q·(N_c·N_j) + n·N_j + m`.
///
/// A JPA dimension of 1 removes the JPA from the dynamics (the probe frame).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceLayout {
    cavity_dim: usize,
    jpa_dim: usize,
}

pub const QUBIT_DIM: usize = 2;

impl SpaceLayout {
    pub fn new(cavity_dim: usize, jpa_dim: usize) -> Result<Self> {
        if cavity_dim < 1 {
            return Err(Error::InvalidDimension { dim: cavity_dim, reason: "cavity truncation must be >= 1" });
        }
        if jpa_dim < 1 {
            return Err(Error::InvalidDimension { dim: jpa_dim, reason: "JPA truncation must be >= 1" });
        }
        Ok(Self { cavity_dim, jpa_dim })
    }

    /// Qubit and cavity only; the JPA factor is one-dimensional.
    pub fn without_jpa(cavity_dim: usize) -> Result<Self> {
        Self::new(cavity_dim, 1)
    }

    pub fn qubit_dim(&self) -> usize {
        QUBIT_DIM
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim
    }

    pub fn jpa_dim(&self) -> usize {
        self.jpa_dim
    }

    pub fn dim_of(&self, slot: Subsystem) -> usize {
        match slot {
            Subsystem::Qubit => QUBIT_DIM,
            Subsystem::Cavity => self.cavity_dim,
            Subsystem::Jpa => self.jpa_dim,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [QUBIT_DIM, self.cavity_dim, self.jpa_dim]
    }

    /// Total Hilbert-space dimension `2·N_c·N_j`.
    pub fn dim(&self) -> usize {
        QUBIT_DIM * self.cavity_dim * self.jpa_dim
    }

    pub fn has_jpa(&self) -> bool {
        self.jpa_dim > 1
    }

    pub fn index(&self, q: usize, n: usize, m: usize) -> usize {
        debug_assert!(q < QUBIT_DIM && n < self.cavity_dim && m < self.jpa_dim);
        (q * self.cavity_dim + n) * self.jpa_dim + m
    }

    /// Inverse of [`index`](Self::index).
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let m = idx % self.jpa_dim;
        let rest = idx / self.jpa_dim;
        (rest / self.cavity_dim, rest % self.cavity_dim, m)
    }
}
