use faer::Mat;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::fock::{thermal_mode, DensityMatrix, LadderSet, Operator, SpaceLayout, Superoperator};
use crate::scalar::{czero, Complex, Real};

use super::TimeTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Propagator when the vectorized dimension is at most
    /// `propagator_limit`, Runge-Kutta otherwise.
    Auto,
    /// Dense `exp(L Δt)` by scaling and squaring.
    Propagator,
    /// Adaptive Dormand-Prince 5(4).
    RungeKutta,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub method: EvolveMethod,
    pub rtol: f64,
    pub atol: f64,
    pub propagator_limit: usize,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { method: EvolveMethod::Auto, rtol: 1e-8, atol: 1e-12, propagator_limit: 900, max_steps: 5_000_000 }
    }
}

/// `Re tr(O ρ)` for `O` sparse and `ρ` column stacked.
fn expect<T: Real>(o: &Operator<T>, x: &[Complex<T>], d: usize) -> T {
    o.matrix().triplets().fold(czero::<T>(), |acc, (i, j, v)| acc + v * x[i * d + j]).re
}

/// [`time_evolve_with`] using default options.
pub fn time_evolve<T: Real>(
    l: &Superoperator<T>,
    rho0: &DensityMatrix<T>,
    t_grid: &[T],
    observable: &Operator<T>,
) -> Result<TimeTrace<T>> {
    time_evolve_with(l, rho0, t_grid, observable, &EvolveOptions::default())
}

/// `⟨O⟩(t)` under `dρ/dt = Lρ` sampled on `t_grid`, which must start at 0
/// and increase strictly.
pub fn time_evolve_with<T: Real>(
    l: &Superoperator<T>,
    rho0: &DensityMatrix<T>,
    t_grid: &[T],
    observable: &Operator<T>,
    opts: &EvolveOptions,
) -> Result<TimeTrace<T>> {
    if rho0.layout() != l.layout() || observable.layout() != l.layout() {
        return Err(Error::LayoutMismatch);
    }
    if t_grid.first() != Some(&T::zero()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("time grid must start at 0 and increase strictly".into()));
    }
    let d = l.layout().dim();
    let use_propagator = match opts.method {
        EvolveMethod::Auto => d * d <= opts.propagator_limit,
        EvolveMethod::Propagator => true,
        EvolveMethod::RungeKutta => false,
    };
    let mut x = rho0.to_vector();
    let mut values = vec![expect(observable, &x, d)];
    if use_propagator {
        let dense = l.matrix().to_dense();
        let mut cached: Option<(T, Mat<Complex<T>>)> = None;
        for w in t_grid.windows(2) {
            let dt = w[1] - w[0];
            let reuse = matches!(&cached, Some((h, _)) if (*h - dt).abs() <= T::lit(1e-12) * dt);
            if !reuse {
                let scaled = Mat::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)] * dt);
                cached = Some((dt, expm(&scaled)));
            }
            let prop = &cached.as_ref().expect("propagator").1;
            let xv = Mat::from_fn(x.len(), 1, |i, _| x[i]);
            let next = prop * &xv;
            x = (0..x.len()).map(|i| next[(i, 0)]).collect();
            values.push(expect(observable, &x, d));
        }
    } else {
        let mut rk = DormandPrince::new(l, opts);
        for w in t_grid.windows(2) {
            rk.advance(&mut x, w[0], w[1])?;
            values.push(expect(observable, &x, d));
        }
    }
    Ok(TimeTrace { times: t_grid.to_vec(), values, observable: "expectation".into() })
}

struct DormandPrince<'a, T: Real> {
    l: &'a Superoperator<T>,
    rtol: T,
    atol: T,
    h: T,
    steps: usize,
    max_steps: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

impl<'a, T: Real> DormandPrince<'a, T> {
    fn new(l: &'a Superoperator<T>, opts: &EvolveOptions) -> Self {
        let scale = l.matrix().max_abs().max(T::min_positive_value());
        Self {
            l,
            rtol: T::lit(opts.rtol),
            atol: T::lit(opts.atol),
            h: T::lit(0.1) / scale,
            steps: 0,
            max_steps: opts.max_steps,
        }
    }

    fn advance(&mut self, x: &mut Vec<Complex<T>>, t0: T, t1: T) -> Result<()> {
        let _ = C;
        let mut t = t0;
        let n = x.len();
        while t < t1 {
            if self.steps >= self.max_steps {
                return Err(Error::StepFailure { time: t.to_f64_lossy(), reason: "step budget exhausted".into() });
            }
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            let mut k: Vec<Vec<Complex<T>>> = Vec::with_capacity(7);
            k.push(self.l.apply_vec(x));
            for s in 1..7 {
                let stage: Vec<Complex<T>> = (0..n)
                    .map(|i| {
                        let mut v = x[i];
                        for (j, kj) in k.iter().enumerate() {
                            let a = A[s][j];
                            if a != 0.0 {
                                v += kj[i] * (h * T::lit(a));
                            }
                        }
                        v
                    })
                    .collect();
                k.push(self.l.apply_vec(&stage));
            }
            let y: Vec<Complex<T>> = (0..n)
                .map(|i| {
                    let mut v = x[i];
                    for (j, kj) in k.iter().enumerate().take(6) {
                        v += kj[i] * (h * T::lit(A[6][j]));
                    }
                    v
                })
                .collect();
            let mut err = T::zero();
            for i in 0..n {
                let mut e = czero::<T>();
                for (j, kj) in k.iter().enumerate() {
                    let high = if j < 6 { A[6][j] } else { 0.0 };
                    e += kj[i] * (h * T::lit(high - B_LOW[j]));
                }
                let tol = self.atol + self.rtol * x[i].norm().max(y[i].norm());
                err = err.max(e.norm() / tol);
            }
            self.steps += 1;
            if !err.is_finite() {
                return Err(Error::StepFailure { time: t.to_f64_lossy(), reason: "non-finite error estimate".into() });
            }
            let factor = if err == T::zero() { T::lit(5.0) } else { T::lit(0.9) * err.powf(T::lit(-0.2)) };
            let factor = factor.min(T::lit(5.0)).max(T::lit(0.2));
            if err <= T::one() {
                *x = y;
                t = if last { t1 } else { t + h };
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor;
                if self.h <= T::epsilon() * t1.abs().max(T::min_positive_value()) {
                    return Err(Error::StepFailure { time: t.to_f64_lossy(), reason: "step size underflow".into() });
                }
            }
        }
        Ok(())
    }
}

/// State right after an ideal `π/2` pulse about x on the ground state,
/// `(|g⟩ − i|e⟩)/√2`, with the cavity thermal at `n_th` and the JPA empty.
pub fn ramsey_initial_state<T: Real>(layout: SpaceLayout, n_th: T) -> Result<DensityMatrix<T>> {
    let h = T::lit(0.5);
    let mut q = Mat::<Complex<T>>::zeros(2, 2);
    q[(0, 0)] = Complex::new(h, T::zero());
    q[(1, 1)] = Complex::new(h, T::zero());
    q[(1, 0)] = Complex::new(T::zero(), -h);
    q[(0, 1)] = Complex::new(T::zero(), h);
    let cav = thermal_mode(n_th, layout.cavity_dim());
    let jpa = thermal_mode(T::zero(), layout.jpa_dim());
    DensityMatrix::product(layout, &q, &cav, &jpa)
}

/// Excited-state population after a closing `π/2` pulse about x,
/// `R†((σ_z + 1)/2)R = (1 + i(σ − σ†))/2`.
pub fn ramsey_observable<T: Real>(layout: SpaceLayout) -> Result<Operator<T>> {
    let ops = LadderSet::<T>::new(layout)?;
    let half = T::lit(0.5);
    let quad = ops.sigma.sub(&ops.sigma_dag)?.scale(Complex::new(T::zero(), half));
    Operator::identity(layout).scale_real(half).add(&quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Subsystem;
    use crate::model::{mhz, DriveKind, FrameChoice, GeneratorSpec, SystemParams};
    use crate::steady::steady_state;

    fn decay_spec() -> GeneratorSpec<f64> {
        let mut p = SystemParams::table_s1();
        p.qubit_drive = 0.0;
        p.p_th = 0.0;
        p.n_th = 0.0;
        GeneratorSpec {
            params: p,
            drive: DriveKind::Off,
            frame: FrameChoice::SqueezeFrame,
            include_probe: false,
            layout: SpaceLayout::without_jpa(3).unwrap(),
        }
    }

    #[test]
    fn excited_state_decays_exponentially_both_methods() {
        let s = decay_spec();
        let l = s.build().unwrap();
        let rho0 = DensityMatrix::basis_state(s.layout, 1, 0, 0);
        let obs = LadderSet::new(s.layout).unwrap().excited_projector();
        let t: Vec<f64> = (0..21).map(|i| i as f64 * 0.5e-6).collect();
        for method in [EvolveMethod::Propagator, EvolveMethod::RungeKutta] {
            let opts = EvolveOptions { method, ..Default::default() };
            let tr = time_evolve_with(&l, &rho0, &t, &obs, &opts).unwrap();
            for (ti, v) in tr.times.iter().zip(&tr.values) {
                let expected = (-s.params.gamma * ti).exp();
                assert!((v - expected).abs() < 1e-7, "{method:?} t = {ti}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let mut s = decay_spec();
        s.params.qubit_drive = mhz(0.46);
        s.params.n_th = 0.04;
        let l = s.build().unwrap();
        let ss = steady_state(&l).unwrap().rho;
        let obs = LadderSet::new(s.layout).unwrap().excited_projector();
        let t: Vec<f64> = (0..11).map(|i| i as f64 * 1e-6).collect();
        let tr = time_evolve(&l, &ss, &t, &obs).unwrap();
        for v in &tr.values {
            assert!((v - tr.values[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn long_evolution_reaches_steady_state() {
        let mut s = decay_spec();
        s.params.n_th = 0.1;
        let l = s.build().unwrap();
        let rho0 = DensityMatrix::basis_state(s.layout, 1, 1, 0);
        let ops = LadderSet::new(s.layout).unwrap();
        let ss = steady_state(&l).unwrap().rho;
        let target = ss.expectation(&ops.n_cavity).unwrap().re;
        let t: Vec<f64> = (0..6).map(|i| i as f64 * 40e-6).collect();
        let tr = time_evolve(&l, &rho0, &t, &ops.n_cavity).unwrap();
        assert!((tr.values.last().unwrap() - target).abs() < 1e-6);
    }

    #[test]
    fn ramsey_pulses_compose_to_pi() {
        let layout = SpaceLayout::without_jpa(3).unwrap();
        let rho = ramsey_initial_state::<f64>(layout, 0.04).unwrap();
        let obs = ramsey_observable(layout).unwrap();
        assert!((rho.expectation(&obs).unwrap().re - 1.0).abs() < 1e-14);
        let red = rho.partial_trace(Subsystem::Cavity);
        let th = thermal_mode(0.04, 3);
        for k in 0..3 {
            assert!((red[(k, k)] - th[(k, k)]).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let s = decay_spec();
        let l = s.build().unwrap();
        let rho0 = DensityMatrix::basis_state(s.layout, 1, 0, 0);
        let obs = LadderSet::new(s.layout).unwrap().excited_projector();
        assert!(time_evolve(&l, &rho0, &[1.0, 2.0], &obs).is_err());
        assert!(time_evolve(&l, &rho0, &[0.0, 2.0, 2.0], &obs).is_err());
    }
}
