use crate::error::{Error, Result};
use crate::fock::{annihilation, embed, LadderSet, Operator, SpaceLayout, Subsystem};
use crate::scalar::{Complex, Real};

use super::{DriveKind, FrameChoice, SystemParams};

/// Qubit-cavity Hamiltonian in the chosen rotating frame:
///
/// `Δ_c a†a + (Δ_q/2)σ_z − χ a†a σ_z + (Ω_d/2)(σ† + σ)`, plus
/// `(Ω_p/2)(a† + a)` when `include_probe` is set (probe frame only).
///
/// `Δ_c = ω_c − ω_s` in the squeeze frame and `ω_c − ω_p` in the probe frame;
/// `Δ_q = ω_q − ω_d`.
pub fn build_system_hamiltonian<T: Real>(
    p: &SystemParams<T>,
    frame: FrameChoice,
    layout: SpaceLayout,
    include_probe: bool,
) -> Result<Operator<T>> {
    let ops = LadderSet::new(layout)?;
    build_from_ladders(p, frame, &ops, include_probe)
}

pub(crate) fn build_from_ladders<T: Real>(
    p: &SystemParams<T>,
    frame: FrameChoice,
    ops: &LadderSet<T>,
    include_probe: bool,
) -> Result<Operator<T>> {
    let frame_freq = match frame {
        FrameChoice::SqueezeFrame => {
            if include_probe {
                return Err(Error::FrameIncompatible(
                    "the probe is time dependent in the squeeze frame; treat it in linear response".into(),
                ));
            }
            p.omega_s
        }
        FrameChoice::ProbeFrame => {
            if ops.layout.has_jpa() {
                return Err(Error::FrameIncompatible("the probe frame has no JPA mode (use jpa_dim = 1)".into()));
            }
            p.omega_p
        }
    };
    let two = T::lit(2.0);
    let n = &ops.n_cavity;
    let mut h = n.scale_real(p.omega_c - frame_freq);
    h = h.add(&ops.sigma_z.scale_real(p.qubit_detuning() / two))?;
    h = h.sub(&n.mul(&ops.sigma_z)?.scale_real(p.chi))?;
    h = h.add(&ops.sigma.add(&ops.sigma_dag)?.scale_real(p.qubit_drive / two))?;
    if include_probe {
        h = h.add(&ops.a.add(&ops.a.adjoint())?.scale_real(p.probe_amplitude / two))?;
    }
    Ok(h)
}

/// JPA Hamiltonian `H'` in the squeeze frame, embedded on the JPA slot.
///
/// Thermal and off drives enter through bath parameters and have no `H'`.
pub fn build_jpa_hamiltonian<T: Real>(kind: &DriveKind<T>, layout: SpaceLayout) -> Result<Operator<T>> {
    kind.validate()?;
    if !layout.has_jpa() {
        return Err(Error::FrameIncompatible("JPA Hamiltonian requires jpa_dim >= 2".into()));
    }
    let b = annihilation::<T>(layout.jpa_dim())?;
    let bd = b.adjoint();
    let half = T::lit(0.5);
    let single = match *kind {
        DriveKind::Squeezed { amplitude } => {
            bd.matmul(&bd).add(&b.matmul(&b)).scale(Complex::new(amplitude * half, T::zero()))
        }
        DriveKind::Coherent { amplitude } => bd.add(&b).scale(Complex::new(amplitude * half, T::zero())),
        DriveKind::Off | DriveKind::Thermal { .. } => {
            return Err(Error::FrameIncompatible(format!(
                "{} drive has no JPA Hamiltonian; it enters through the bath",
                kind.name()
            )))
        }
    };
    embed(&single, Subsystem::Jpa, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;
    use faer::Side;

    fn probe_params() -> SystemParams<f64> {
        let mut p = SystemParams::table_s1();
        p.omega_p = p.omega_c;
        p.omega_d = p.omega_q;
        p.qubit_drive = 0.0;
        p.probe_amplitude = 0.0;
        p.chi = 0.0;
        p
    }

    #[test]
    fn all_detunings_zero_gives_zero_matrix() {
        let layout = SpaceLayout::without_jpa(4).unwrap();
        let h = build_system_hamiltonian(&probe_params(), FrameChoice::ProbeFrame, layout, true).unwrap();
        assert_eq!(h.matrix().nnz(), 0);
    }

    #[test]
    fn probe_frame_low_eigenvalues_match_dressed_doublets() {
        // Resonant qubit drive, ω_p = Ω_p = 0: lowest doublet at ±Ω_d/2, next at
        // ω_c ± √(χ² + (Ω_d/2)²).
        let mut p = SystemParams::<f64>::table_s1();
        p.omega_d = p.omega_q;
        p.omega_p = 0.0;
        p.probe_amplitude = 0.0;
        let layout = SpaceLayout::without_jpa(2).unwrap();
        let h = build_system_hamiltonian(&p, FrameChoice::ProbeFrame, layout, false).unwrap();
        let ev = h.matrix().to_dense().self_adjoint_eigenvalues(Side::Lower).unwrap();
        let half = p.qubit_drive / 2.0;
        let split = (p.chi * p.chi + half * half).sqrt();
        let expected = [-half, half, p.omega_c - split, p.omega_c + split];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e - x).abs() <= 1e-9 * x.abs().max(1.0), "{e} vs {x}");
        }
    }

    #[test]
    fn resonant_drive_has_no_qubit_splitting_at_zero_photons() {
        let mut p = SystemParams::<f64>::table_s1();
        p.omega_d = p.omega_q;
        p.qubit_drive = 0.0;
        let layout = SpaceLayout::new(3, 2).unwrap();
        let h = build_system_hamiltonian(&p, FrameChoice::SqueezeFrame, layout, false).unwrap();
        let g = layout.index(0, 0, 0);
        let e = layout.index(1, 0, 0);
        assert!((h.element(g, g) - h.element(e, e)).norm() < 1e-9);
    }

    #[test]
    fn hamiltonians_are_hermitian() {
        let p = SystemParams::<f64>::table_s1();
        let layout = SpaceLayout::new(5, 4).unwrap();
        let h = build_system_hamiltonian(&p, FrameChoice::SqueezeFrame, layout, false).unwrap();
        assert!(h.hermiticity_defect() < 1e-14 * h.matrix().max_abs().max(1.0));
        for kind in [DriveKind::Squeezed { amplitude: mhz::<f64>(4.0) }, DriveKind::Coherent { amplitude: mhz(1.3) }] {
            let hj = build_jpa_hamiltonian(&kind, layout).unwrap();
            assert!(hj.hermiticity_defect() < 1e-14 * hj.matrix().max_abs().max(1.0));
        }
    }

    #[test]
    fn squeeze_frame_rejects_static_probe() {
        let layout = SpaceLayout::new(3, 2).unwrap();
        let err = build_system_hamiltonian(&SystemParams::<f64>::table_s1(), FrameChoice::SqueezeFrame, layout, true);
        assert!(matches!(err, Err(Error::FrameIncompatible(_))));
        let err = build_system_hamiltonian(&SystemParams::<f64>::table_s1(), FrameChoice::ProbeFrame, layout, false);
        assert!(matches!(err, Err(Error::FrameIncompatible(_))));
    }

    #[test]
    fn jpa_matrix_elements() {
        let layout = SpaceLayout::new(1, 4).unwrap();
        let amp = 3.0;
        let sq = build_jpa_hamiltonian(&DriveKind::Squeezed { amplitude: amp }, layout).unwrap();
        let (m0, m2) = (layout.index(0, 0, 0), layout.index(0, 0, 2));
        assert!((sq.element(m2, m0).re - amp / 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let co = build_jpa_hamiltonian(&DriveKind::Coherent { amplitude: amp }, layout).unwrap();
        let m1 = layout.index(0, 0, 1);
        assert!((co.element(m1, m0).re - amp / 2.0).abs() < 1e-14);
        let zero = build_jpa_hamiltonian(&DriveKind::Squeezed { amplitude: 0.0 }, layout).unwrap();
        assert_eq!(zero.matrix().nnz(), 0);
    }

    #[test]
    fn bath_drives_have_no_jpa_hamiltonian() {
        let layout = SpaceLayout::new(2, 3).unwrap();
        assert!(build_jpa_hamiltonian(&DriveKind::<f64>::Off, layout).is_err());
        assert!(build_jpa_hamiltonian(&DriveKind::Thermal { n_th: 0.2 }, layout).is_err());
    }
}
