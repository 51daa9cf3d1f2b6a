use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimplexOptions {
    /// Iteration budget of a single run.
    pub max_iterations: usize,
    /// Extra runs from uniformly random starting points.
    pub restarts: usize,
    pub seed: u64,
    /// Convergence needs the objective spread to fall below
    /// `ftol_abs + ftol_rel·|f_best|`
    pub ftol_abs: f64,
    pub ftol_rel: f64,
    /// and every vertex to lie within `xtol` of the best one, measured as a
    /// fraction of each parameter's bound interval.
    pub xtol: f64,
    /// Edge of the starting simplex, as a fraction of the bound interval.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2_000,
            restarts: 3,
            seed: 0,
            ftol_abs: 1e-30,
            ftol_rel: 1e-14,
            xtol: 1e-9,
            initial_step: 0.1,
        }
    }
}

/// Best objective after one accepted simplex iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub run: usize,
    pub iteration: usize,
    pub best: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    /// Index of the run that produced `x`; run 0 starts at the caller's point.
    pub best_run: usize,
    pub log: Vec<IterationRecord>,
}

struct Bounded<'a, T, F> {
    f: F,
    lower: &'a [T],
    upper: &'a [T],
    evaluations: usize,
}

impl<T: Real, F: FnMut(&[T]) -> Result<T>> Bounded<'_, T, F> {
    fn to_x(&self, u: &[T]) -> Vec<T> {
        u.iter().zip(self.lower.iter().zip(self.upper)).map(|(&u, (&lo, &hi))| lo + u * (hi - lo)).collect()
    }

    fn eval(&mut self, u: &[T]) -> Result<T> {
        self.evaluations += 1;
        let x = self.to_x(u);
        let v = (self.f)(&x)?;
        Ok(if v.is_nan() { T::infinity() } else { v })
    }
}

fn clamp01<T: Real>(u: &mut [T]) {
    for v in u {
        *v = v.max(T::zero()).min(T::one());
    }
}

/// Nelder-Mead on the box `lower ≤ x ≤ upper`, with trial points projected
/// onto the box. Runs once from `start` and `opts.restarts` more times from
/// seeded random points; returns the best run, or an error when no run met
/// the convergence test.
pub fn minimize_bounded<T: Real, F: FnMut(&[T]) -> Result<T>>(
    f: F,
    lower: &[T],
    upper: &[T],
    start: &[T],
    opts: &SimplexOptions,
) -> Result<SimplexResult<T>> {
    let k = start.len();
    if k == 0 || lower.len() != k || upper.len() != k {
        return Err(Error::InvalidParams("simplex needs matching, non-empty bounds and start".into()));
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
        return Err(Error::InvalidParams("simplex bounds must be finite with upper > lower".into()));
    }
    let mut obj = Bounded { f, lower, upper, evaluations: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut log = Vec::new();
    let mut best: Option<(Vec<T>, T, usize)> = None;
    let mut any_converged = false;
    for run in 0..=opts.restarts {
        let mut u0: Vec<T> = if run == 0 {
            start.iter().zip(lower.iter().zip(upper)).map(|(&x, (&lo, &hi))| (x - lo) / (hi - lo)).collect()
        } else {
            (0..k).map(|_| T::lit(rng.gen::<f64>())).collect()
        };
        clamp01(&mut u0);
        let (u, v, converged) = run_simplex(&mut obj, u0, run, opts, &mut log)?;
        any_converged |= converged;
        if best.as_ref().map_or(true, |b| v < b.1) {
            best = Some((u, v, run));
        }
    }
    let (u, value, best_run) = best.expect("at least one run");
    if !any_converged {
        return Err(Error::FitNonConvergence { restarts: opts.restarts, best: value.to_f64_lossy() });
    }
    Ok(SimplexResult { x: obj.to_x(&u), value, evaluations: obj.evaluations, best_run, log })
}

fn run_simplex<T: Real, F: FnMut(&[T]) -> Result<T>>(
    obj: &mut Bounded<'_, T, F>,
    u0: Vec<T>,
    run: usize,
    opts: &SimplexOptions,
    log: &mut Vec<IterationRecord>,
) -> Result<(Vec<T>, T, bool)> {
    let k = u0.len();
    let step = T::lit(opts.initial_step);
    let half = T::lit(0.5);
    let mut pts = vec![u0.clone()];
    for i in 0..k {
        let mut p = u0.clone();
        // Step inward when the start sits near the upper bound.
        p[i] = if p[i] + step <= T::one() { p[i] + step } else { p[i] - step };
        pts.push(p);
    }
    let mut vals = Vec::with_capacity(k + 1);
    for p in &pts {
        vals.push(obj.eval(p)?);
    }
    let mut converged = false;
    for iteration in 0..opts.max_iterations {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[k] - vals[0];
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), |m, d| m.max(d));
        if spread <= T::lit(opts.ftol_abs) + T::lit(opts.ftol_rel) * vals[0].abs() && size <= T::lit(opts.xtol) {
            converged = true;
            break;
        }
        if iteration > 0 {
            log.push(IterationRecord { run, iteration, best: vals[0].to_f64_lossy() });
        }

        let inv_k = T::one() / T::from_count(k);
        let centroid: Vec<T> =
            (0..k).map(|j| pts[..k].iter().fold(T::zero(), |acc, p| acc + p[j]) * inv_k).collect();
        let along = |t: T| -> Vec<T> {
            let mut p: Vec<T> = centroid.iter().zip(&pts[k]).map(|(&c, &w)| c + t * (c - w)).collect();
            clamp01(&mut p);
            p
        };
        let xr = along(T::one());
        let fr = obj.eval(&xr)?;
        if fr < vals[0] {
            let xe = along(T::lit(2.0));
            let fe = obj.eval(&xe)?;
            if fe < fr {
                pts[k] = xe;
                vals[k] = fe;
            } else {
                pts[k] = xr;
                vals[k] = fr;
            }
            continue;
        }
        if fr < vals[k - 1] {
            pts[k] = xr;
            vals[k] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[k] {
            let xc = along(half);
            let fc = obj.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-half);
            let fc = obj.eval(&xc)?;
            (xc, fc)
        };
        if fc < vals[k].min(fr) {
            pts[k] = xc;
            vals[k] = fc;
            continue;
        }
        for i in 1..=k {
            let p: Vec<T> = pts[i].iter().zip(&pts[0]).map(|(&a, &b)| b + half * (a - b)).collect();
            vals[i] = obj.eval(&p)?;
            pts[i] = p;
        }
    }
    let ib = (0..=k).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    log.push(IterationRecord { run, iteration: usize::MAX, best: vals[ib].to_f64_lossy() });
    Ok((pts[ib].clone(), vals[ib], converged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = minimize_bounded(f, &[-2.0, -1.0], &[2.0, 3.0], &[-1.2, 1.0], &SimplexOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| Ok((x[0] + 3.0).powi(2));
        let r = minimize_bounded(f, &[0.0], &[5.0], &[2.0], &SimplexOptions::default()).unwrap();
        assert_eq!(r.x[0], 0.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(2) + (x[1] + 0.1).powi(4));
        let o = SimplexOptions { seed: 42, ..Default::default() };
        let a = minimize_bounded(f, &[-1.0, -1.0], &[1.0, 1.0], &[0.9, 0.9], &o).unwrap();
        let b = minimize_bounded(f, &[-1.0, -1.0], &[1.0, 1.0], &[0.9, 0.9], &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_value_never_increases_within_a_run() {
        let f = |x: &[f64]| Ok(x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.2).powi(2)).sum());
        let r = minimize_bounded(f, &[-1.0; 4], &[1.0; 4], &[0.8; 4], &SimplexOptions::default()).unwrap();
        for w in r.log.windows(2).filter(|w| w[0].run == w[1].run) {
            assert!(w[1].best <= w[0].best);
        }
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let o = SimplexOptions { max_iterations: 5, restarts: 1, ..Default::default() };
        let e = minimize_bounded(f, &[-2.0, -1.0], &[2.0, 3.0], &[-1.2, 1.0], &o);
        assert!(matches!(e, Err(Error::FitNonConvergence { restarts: 1, .. })));
    }
}
