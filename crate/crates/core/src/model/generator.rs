use crate::error::{Error, Result};
use crate::fock::{
    commutator_superop, vectorize_generator, CascadeCoupling, Channel, LadderSet, Operator, SparseMatrix,
    SpaceLayout, Superoperator,
};
use crate::scalar::{Complex, Real};

use super::hamiltonian::{build_from_ladders, build_jpa_hamiltonian};
use super::{DriveKind, FrameChoice, SystemParams};

/// Everything needed to assemble one generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec<T> {
    pub params: SystemParams<T>,
    pub drive: DriveKind<T>,
    pub frame: FrameChoice,
    pub include_probe: bool,
    pub layout: SpaceLayout,
}

impl<T: Real> GeneratorSpec<T> {
    pub fn build(&self) -> Result<Superoperator<T>> {
        build_cascaded_generator(&self.params, &self.drive, self.frame, self.include_probe, self.layout)
    }

    /// Cavity bath occupation after accounting for a thermal drive.
    pub fn effective_n_th(&self) -> T {
        match self.drive {
            DriveKind::Thermal { n_th } => n_th,
            _ => self.params.n_th,
        }
    }
}

/// Dissipative channels and the JPA→cavity cascade coupling.
///
/// Cavity: `κ(1+n_th)·D[a]`, `κ n_th·D[a†]`; qubit: `γ(1+p_th)·D[σ]`,
/// `γ p_th·D[σ†]`, `γ_φ·D[σ†σ]`; JPA: `κ'_e·D[b]`; cascade strength
/// `√(κ_e κ'_e)`. Without a JPA mode the last two are absent.
pub fn cascaded_channels<T: Real>(
    p: &SystemParams<T>,
    n_th: T,
    ops: &LadderSet<T>,
) -> Result<(Vec<Channel<T>>, Option<CascadeCoupling<T>>)> {
    let one = T::one();
    let mut channels = vec![
        Channel::new("cavity-decay", p.kappa * (one + n_th), ops.a.clone()),
        Channel::new("cavity-excitation", p.kappa * n_th, ops.a.adjoint()),
        Channel::new("qubit-decay", p.gamma * (one + p.p_th), ops.sigma.clone()),
        Channel::new("qubit-excitation", p.gamma * p.p_th, ops.sigma_dag.clone()),
        Channel::new("qubit-dephasing", p.gamma_phi, ops.excited_projector()),
    ];
    let cascade = match &ops.b {
        Some(b) => {
            channels.push(Channel::new("jpa-output", p.kappa_e_prime, b.clone()));
            Some(CascadeCoupling {
                strength: (p.kappa_e * p.kappa_e_prime).sqrt(),
                upstream: b.clone(),
                downstream: ops.a.clone(),
            })
        }
        None => None,
    };
    Ok((channels, cascade))
}

fn check_combination<T: Real>(kind: &DriveKind<T>, frame: FrameChoice, layout: SpaceLayout) -> Result<()> {
    kind.validate()?;
    match frame {
        FrameChoice::ProbeFrame if kind.needs_jpa() => Err(Error::FrameIncompatible(format!(
            "{} drive needs the JPA mode, which the probe frame omits",
            kind.name()
        ))),
        FrameChoice::SqueezeFrame if matches!(kind, DriveKind::Squeezed { .. }) && !layout.has_jpa() => Err(
            Error::FrameIncompatible(format!("{} drive requires jpa_dim >= 2", kind.name())),
        ),
        _ => Ok(()),
    }
}

fn hamiltonian<T: Real>(
    p: &SystemParams<T>,
    kind: &DriveKind<T>,
    frame: FrameChoice,
    ops: &LadderSet<T>,
    include_probe: bool,
) -> Result<Operator<T>> {
    let mut h = build_from_ladders(p, frame, ops, include_probe)?;
    match *kind {
        _ if kind.needs_jpa() && ops.layout.has_jpa() => h = h.add(&build_jpa_hamiltonian(kind, ops.layout)?)?,
        DriveKind::Coherent { amplitude } => {
            // The source relaxes to |β⟩, β = −iΩ_s/κ'_e, independently of the
            // cavity, and b → β turns the cascade into a classical drive.
            if !(p.kappa_e_prime > T::zero()) {
                return Err(Error::InvalidParams("eliminating the coherent source needs kappa_e_prime > 0".into()));
            }
            let f = (p.kappa_e / p.kappa_e_prime).sqrt() * amplitude;
            h = h.sub(&ops.a.add(&ops.a.adjoint())?.scale_real(f))?;
        }
        _ => {}
    }
    Ok(h)
}

/// Full cascaded generator in Schrödinger form.
pub fn build_cascaded_generator<T: Real>(
    p: &SystemParams<T>,
    kind: &DriveKind<T>,
    frame: FrameChoice,
    include_probe: bool,
    layout: SpaceLayout,
) -> Result<Superoperator<T>> {
    p.validate()?;
    check_combination(kind, frame, layout)?;
    let ops = LadderSet::new(layout)?;
    let h = hamiltonian(p, kind, frame, &ops, include_probe)?;
    let n_th = match *kind {
        DriveKind::Thermal { n_th } => n_th,
        _ => p.n_th,
    };
    let (channels, cascade) = cascaded_channels(p, n_th, &ops)?;
    vectorize_generator(&h, &channels, cascade.as_ref())
}

/// Generators that differ only in the qubit-drive detuning `ω_q − ω_d` and
/// an optional diagonal shift, sharing one sparsity pattern:
///
/// `L(Δ_q, z) = L_base + Δ_q · L_σz + z · 1`, with `L_σz = −i[σ_z/2, ·]`.
///
/// The fixed pattern lets a sweep reuse one symbolic factorization.
#[derive(Clone, Debug)]
pub struct DetuningFamily<T: Real> {
    layout: SpaceLayout,
    pattern: SparseMatrix<T>,
    base: Vec<Complex<T>>,
    direction: Vec<Complex<T>>,
    diagonal: Vec<Complex<T>>,
}

impl<T: Real> DetuningFamily<T> {
    pub fn new(spec: &GeneratorSpec<T>) -> Result<Self> {
        let mut p = spec.params;
        p.omega_d = p.omega_q;
        let base = build_cascaded_generator(&p, &spec.drive, spec.frame, spec.include_probe, spec.layout)?;
        let ops = LadderSet::new(spec.layout)?;
        let half = T::lit(0.5);
        let direction = commutator_superop(&ops.sigma_z.scale_real(half));
        let d2 = base.dim();
        let zero = Complex::new(T::zero(), T::zero());
        let pattern = SparseMatrix::from_triplets_keep_zeros(
            d2,
            d2,
            base.matrix()
                .triplets()
                .chain(direction.triplets())
                .map(|(r, c, _)| (r, c, zero))
                .chain((0..d2).map(|i| (i, i, zero))),
        );
        let project = |m: &SparseMatrix<T>| -> Vec<Complex<T>> {
            pattern.triplets().map(|(r, c, _)| m.get(r, c)).collect()
        };
        let diagonal = pattern
            .triplets()
            .map(|(r, c, _)| if r == c { Complex::new(T::one(), T::zero()) } else { zero })
            .collect();
        Ok(Self {
            layout: spec.layout,
            base: project(base.matrix()),
            direction: project(&direction),
            diagonal,
            pattern,
        })
    }

    pub fn layout(&self) -> SpaceLayout {
        self.layout
    }

    /// `L_base + Δ_q L_σz + shift·1` on the shared pattern.
    pub fn matrix_at(&self, qubit_detuning: T, shift: Complex<T>) -> SparseMatrix<T> {
        let mut m = self.pattern.clone();
        let qd = Complex::new(qubit_detuning, T::zero());
        for (k, v) in m.values_mut().iter_mut().enumerate() {
            *v = self.base[k] + self.direction[k] * qd + self.diagonal[k] * shift;
        }
        m
    }

    pub fn generator_at(&self, qubit_detuning: T) -> Superoperator<T> {
        let zero = Complex::new(T::zero(), T::zero());
        Superoperator::new(self.layout, self.matrix_at(qubit_detuning, zero)).expect("family layout")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;

    fn spec(kind: DriveKind<f64>) -> GeneratorSpec<f64> {
        GeneratorSpec {
            params: SystemParams::table_s1(),
            drive: kind,
            frame: FrameChoice::SqueezeFrame,
            include_probe: false,
            layout: SpaceLayout::new(4, 3).unwrap(),
        }
    }

    #[test]
    fn eliminated_coherent_source_matches_full_cascade() {
        use crate::fock::Subsystem;
        use crate::steady::steady_state;
        let kind = DriveKind::Coherent { amplitude: mhz(0.9) };
        let mut full = spec(kind);
        full.layout = SpaceLayout::new(8, 5).unwrap();
        let mut reduced = full;
        reduced.layout = SpaceLayout::without_jpa(8).unwrap();
        let rf = steady_state(&full.build().unwrap()).unwrap().rho.partial_trace(Subsystem::Cavity);
        let rr = steady_state(&reduced.build().unwrap()).unwrap().rho.partial_trace(Subsystem::Cavity);
        // Residual difference comes from the JPA truncation, |β|^10/5! here.
        assert!((&rf - &rr).norm_max() < 1e-9, "{:e}", (&rf - &rr).norm_max());
        let mut q = full;
        q.params.kappa_e_prime = 0.0;
        q.layout = reduced.layout;
        assert!(q.build().is_err());
        let mut sq = reduced;
        sq.drive = DriveKind::Squeezed { amplitude: mhz(1.0) };
        assert!(matches!(sq.build(), Err(Error::FrameIncompatible(_))));
    }

    #[test]
    fn pump_off_squeezer_equals_no_drive() {
        let off = spec(DriveKind::Off).build().unwrap();
        let sq = spec(DriveKind::Squeezed { amplitude: 0.0 }).build().unwrap();
        let scale = off.matrix().max_abs();
        assert!(off.matrix().max_abs_diff(sq.matrix()) <= 1e-14 * scale);
    }

    #[test]
    fn generators_are_trace_preserving() {
        for kind in [
            DriveKind::Off,
            DriveKind::Thermal { n_th: 0.22 },
            DriveKind::Coherent { amplitude: mhz(1.3) },
            DriveKind::Squeezed { amplitude: mhz(4.0) },
        ] {
            let l = spec(kind).build().unwrap();
            let scale = l.matrix().max_abs();
            assert!(l.trace_preservation_defect() <= 1e-10 * scale, "{kind:?}");
        }
    }

    #[test]
    fn zero_jpa_coupling_removes_cascade() {
        let mut s = spec(DriveKind::Off);
        s.params.kappa_e_prime = 0.0;
        let with_jpa = s.build().unwrap();
        // Reference: same system with the JPA coupling terms never added.
        let ops = LadderSet::new(s.layout).unwrap();
        let h = build_from_ladders(&s.params, s.frame, &ops, false).unwrap();
        let (mut ch, _) = cascaded_channels(&s.params, s.params.n_th, &ops).unwrap();
        ch.retain(|c| c.label != "jpa-output");
        let reference = vectorize_generator(&h, &ch, None).unwrap();
        assert!(with_jpa.matrix().max_abs_diff(reference.matrix()) < 1e-14 * reference.matrix().max_abs());
    }

    #[test]
    fn frame_drive_combinations_checked() {
        let mut s = spec(DriveKind::Squeezed { amplitude: 1.0 });
        s.frame = FrameChoice::ProbeFrame;
        s.layout = SpaceLayout::without_jpa(3).unwrap();
        assert!(matches!(s.build(), Err(Error::FrameIncompatible(_))));
        let mut s = spec(DriveKind::Coherent { amplitude: 1.0 });
        s.frame = FrameChoice::ProbeFrame;
        s.layout = SpaceLayout::without_jpa(3).unwrap();
        assert!(matches!(s.build(), Err(Error::FrameIncompatible(_))));
    }

    #[test]
    fn detuning_family_matches_direct_build() {
        let s = spec(DriveKind::Squeezed { amplitude: mhz(4.0) });
        let fam = DetuningFamily::new(&s).unwrap();
        for dq in [0.0, mhz(3.0), -mhz::<f64>(7.8)] {
            let mut p = s.params;
            p.omega_d = p.omega_q - dq;
            let direct = GeneratorSpec { params: p, ..s }.build().unwrap();
            let via = fam.generator_at(dq);
            let tol = 1e-12 * direct.matrix().max_abs();
            assert!(direct.matrix().max_abs_diff(via.matrix()) < tol);
        }
    }
}
