//! Closed-form calibration quantities and the time-domain traces used to
//! check them against the simulator.

use faer::Mat;
use serde::Serialize;

use crate::error::Result;
use crate::fitting::{fit_exponential_decay, fit_ramsey, DecayFit, RamseyFit};
use crate::fock::{thermal_mode, DensityMatrix, LadderSet, SpaceLayout};
use crate::model::{mhz, DriveKind, FrameChoice, GeneratorSpec, SystemParams};
use crate::response::{ramsey_initial_state, ramsey_observable, time_evolve, TimeTrace};
use crate::scalar::{czero, Complex, Real};

/// Lowest eigenfrequencies of the qubit-cavity Hamiltonian with a resonant
/// qubit drive, in the frame rotating at `ω_d` for the qubit only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressedFrequencies<T> {
    pub omega_0_plus: T,
    pub omega_0_minus: T,
    pub omega_1_plus: T,
    pub omega_1_minus: T,
}

/// `ω_{0±} = ±Ω_d/2`, `ω_{1±} = ω_c ± √(χ² + (Ω_d/2)²)`.
///
/// Valid for `ω_d = ω_q`; the drive frequency in `p` is not consulted.
pub fn dressed_eigenfrequencies<T: Real>(p: &SystemParams<T>) -> DressedFrequencies<T> {
    let half = p.qubit_drive * T::lit(0.5);
    let split = (p.chi * p.chi + half * half).sqrt();
    DressedFrequencies { omega_0_plus: half, omega_0_minus: -half, omega_1_plus: p.omega_c + split, omega_1_minus: p.omega_c - split }
}

/// `γ_th = 4κχ² n_th / (κ² + χ²)`, evaluated with the angular rates in `p`.
pub fn thermal_dephasing_rate<T: Real>(p: &SystemParams<T>) -> T {
    let (k, c) = (p.kappa, p.chi);
    T::lit(4.0) * k * c * c * p.n_th / (k * k + c * c)
}

/// Probe frequencies that take `|e,0⟩` to the two drive-hybridized states
/// of `{|e,1⟩, |g,1⟩}`, lower first.
///
/// The block is `[[ω_c + Δ_q/2 − χ, Ω_d/2], [Ω_d/2, ω_c − Δ_q/2 + χ]]`
/// with `Δ_q = ω_q − ω_d`, and `|e,0⟩` sits at `Δ_q/2`. At
/// `ω_d = ω_q − 2χ` the pair is `ω_c − χ ± Ω_d/2`.
pub fn autler_townes_frequencies<T: Real>(p: &SystemParams<T>) -> (T, T) {
    let dq = p.qubit_detuning();
    let half = T::lit(0.5);
    let a = p.omega_c + dq * half - p.chi;
    let b = p.omega_c - dq * half + p.chi;
    let mean = (a + b) * half;
    let diff = (a - b) * half;
    let od = p.qubit_drive * half;
    let r = (diff * diff + od * od).sqrt();
    let e0 = dq * half;
    (mean - r - e0, mean + r - e0)
}

/// Settings of the simulated relaxation and Ramsey sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceOptions<T> {
    pub cavity_dim: usize,
    /// `ω_q − ω_d` of the Ramsey sequence.
    pub ramsey_detuning: T,
    pub duration: T,
    pub samples: usize,
}

impl<T: Real> Default for TraceOptions<T> {
    fn default() -> Self {
        Self { cavity_dim: 6, ramsey_detuning: mhz(0.9), duration: T::lit(20e-6), samples: 401 }
    }
}

impl<T: Real> TraceOptions<T> {
    fn grid(&self) -> Vec<T> {
        let step = self.duration / T::from_count(self.samples.max(2) - 1);
        (0..self.samples.max(2)).map(|i| T::from_count(i) * step).collect()
    }
}

fn free_evolution_spec<T: Real>(p: &SystemParams<T>, layout: SpaceLayout, omega_d: T) -> GeneratorSpec<T> {
    let mut q = *p;
    q.qubit_drive = T::zero();
    q.probe_amplitude = T::zero();
    q.omega_d = omega_d;
    GeneratorSpec { params: q, drive: DriveKind::Off, frame: FrameChoice::ProbeFrame, include_probe: false, layout }
}

/// Excited-state population after preparing `|e⟩` with the cavity thermal,
/// all drives off.
pub fn relaxation_trace<T: Real>(p: &SystemParams<T>, opts: &TraceOptions<T>) -> Result<TimeTrace<T>> {
    let layout = SpaceLayout::without_jpa(opts.cavity_dim)?;
    let spec = free_evolution_spec(p, layout, p.omega_q);
    let excited = Mat::from_fn(2, 2, |i, j| if i == 1 && j == 1 { Complex::new(T::one(), T::zero()) } else { czero() });
    let rho0 = DensityMatrix::product(layout, &excited, &thermal_mode(p.n_th, opts.cavity_dim), &thermal_mode(T::zero(), 1))?;
    let obs = LadderSet::new(layout)?.excited_projector();
    let mut tr = time_evolve(&spec.build()?, &rho0, &opts.grid(), &obs)?;
    tr.observable = "excited_population".into();
    Ok(tr)
}

/// Excited-state population after `π/2 - wait - π/2` with the pulses
/// treated as ideal, at qubit detuning `opts.ramsey_detuning`.
pub fn ramsey_trace<T: Real>(p: &SystemParams<T>, opts: &TraceOptions<T>) -> Result<TimeTrace<T>> {
    let layout = SpaceLayout::without_jpa(opts.cavity_dim)?;
    let spec = free_evolution_spec(p, layout, p.omega_q - opts.ramsey_detuning);
    let rho0 = ramsey_initial_state(layout, p.n_th)?;
    let mut tr = time_evolve(&spec.build()?, &rho0, &opts.grid(), &ramsey_observable(layout)?)?;
    tr.observable = "ramsey_population".into();
    Ok(tr)
}

/// Closed-form `γ_th` next to the dephasing extracted from a simulated
/// Ramsey trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RamseyCheck<T> {
    pub fit: RamseyFit<T>,
    /// `1/(γ/2 + γ_φ + γ_th)` with the closed-form `γ_th`.
    pub t2_formula: T,
    /// `1/T₂* − γ/2 − γ_φ` from the fitted trace.
    pub gamma_th_simulated: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationReport<T> {
    pub dressed: DressedFrequencies<T>,
    pub gamma_th: T,
    /// Evaluated at `ω_d = ω_q − 2χ`.
    pub autler_townes_pair: (T, T),
    pub relaxation: Option<DecayFit<T>>,
    pub ramsey: Option<RamseyCheck<T>>,
}

/// Closed forms for `p`, plus fitted relaxation and Ramsey traces when
/// `traces` is given.
pub fn calibration_report<T: Real>(p: &SystemParams<T>, traces: Option<&TraceOptions<T>>) -> Result<CalibrationReport<T>> {
    let gamma_th = thermal_dephasing_rate(p);
    let mut at = *p;
    at.omega_d = p.omega_q - T::lit(2.0) * p.chi;
    let (relaxation, ramsey) = match traces {
        None => (None, None),
        Some(o) => {
            let decay = fit_exponential_decay(&relaxation_trace(p, o)?)?;
            let fit = fit_ramsey(&ramsey_trace(p, o)?)?;
            let base = p.gamma * T::lit(0.5) + p.gamma_phi;
            let check = RamseyCheck { fit, t2_formula: T::one() / (base + gamma_th), gamma_th_simulated: T::one() / fit.t2 - base };
            (Some(decay), Some(check))
        }
    };
    Ok(CalibrationReport {
        dressed: dressed_eigenfrequencies(p),
        gamma_th,
        autler_townes_pair: autler_townes_frequencies(&at),
        relaxation,
        ramsey,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_system_hamiltonian;
    use faer::Side;

    #[test]
    fn undriven_doublet() {
        let mut p = SystemParams::<f64>::table_s1();
        p.qubit_drive = 0.0;
        let d = dressed_eigenfrequencies(&p);
        assert_eq!(d.omega_1_plus, p.omega_c + p.chi);
        assert_eq!(d.omega_1_minus, p.omega_c - p.chi);
        assert_eq!(d.omega_0_plus, 0.0);
    }

    #[test]
    fn table_value_of_upper_branch() {
        let p = SystemParams::<f64>::table_s1();
        let d = dressed_eigenfrequencies(&p);
        let expected = mhz::<f64>((3.9f64 * 3.9 + 0.23 * 0.23).sqrt());
        assert!((d.omega_1_plus - (p.omega_c + expected)).abs() < 1e-14 * p.omega_c);
        assert!(((expected / std::f64::consts::TAU / 1e6) - 3.907).abs() < 1e-3);
    }

    #[test]
    fn autler_townes_matches_block_diagonalization() {
        // Oracle: eigenvalues of the {|e,1⟩,|g,1⟩} block of the dense
        // Hamiltonian, relative to the |e,0⟩ diagonal entry.
        let mut p = SystemParams::<f64>::table_s1();
        p.omega_p = 0.0;
        p.probe_amplitude = 0.0;
        for (delta_mhz, drive_mhz) in [(0.0, 0.46), (0.7, 0.46), (-1.3, 2.0), (0.2, 0.0)] {
            p.omega_d = p.omega_q - 2.0 * p.chi - mhz::<f64>(delta_mhz);
            p.qubit_drive = mhz(drive_mhz);
            let layout = SpaceLayout::without_jpa(2).unwrap();
            let h = build_system_hamiltonian(&p, FrameChoice::ProbeFrame, layout, false).unwrap().matrix().to_dense();
            let (e1, g1, e0) = (layout.index(1, 1, 0), layout.index(0, 1, 0), layout.index(1, 0, 0));
            let block = faer::Mat::from_fn(2, 2, |i, j| h[([e1, g1][i], [e1, g1][j])]);
            let ev = block.self_adjoint_eigenvalues(Side::Lower).unwrap();
            let (lo, hi) = autler_townes_frequencies(&p);
            let base = h[(e0, e0)].re;
            assert!((lo - (ev[0] - base)).abs() < 1e-9 * lo.abs());
            assert!((hi - (ev[1] - base)).abs() < 1e-9 * hi.abs());
            let split = mhz::<f64>((delta_mhz * delta_mhz + drive_mhz * drive_mhz).sqrt());
            assert!(((hi - lo) - split).abs() < 1e-10 * hi.abs(), "{delta_mhz} {drive_mhz}");
        }
    }

    #[test]
    fn dephasing_rate_limits_and_monotonicity() {
        let mut p = SystemParams::<f64>::table_s1();
        let g = thermal_dephasing_rate(&p);
        assert!(g > 0.0);
        p.n_th = 0.08;
        assert!(thermal_dephasing_rate(&p) > g);
        p.kappa *= 2.0;
        assert!(thermal_dephasing_rate(&p) > thermal_dephasing_rate(&SystemParams { n_th: 0.08, ..SystemParams::table_s1() }));
        p.chi = 0.0;
        assert_eq!(thermal_dephasing_rate(&p), 0.0);
        let mut q = SystemParams::<f64>::table_s1();
        q.n_th = 0.0;
        assert_eq!(thermal_dephasing_rate(&q), 0.0);
    }

    #[test]
    fn ramsey_trace_fringes_at_detuning() {
        let p = SystemParams::<f64>::table_s1();
        let o = TraceOptions { cavity_dim: 4, ..Default::default() };
        let r = calibration_report(&p, Some(&o)).unwrap();
        let ramsey = r.ramsey.unwrap();
        assert!((ramsey.fit.frequency - 0.9e6).abs() < 0.02e6, "{}", ramsey.fit.frequency);
        assert!(ramsey.fit.t2 > 1e-6 && ramsey.fit.t2 < 11e-6);
        assert!(r.relaxation.unwrap().tau > 0.0);
    }
}
