//! Photon-number statistics of the cavity field.
//!
//! Distributions come either from a simulated density matrix or from one of
//! two analytic single-mode models: a displaced thermal state and a squeezed
//! vacuum sent through a beam splitter. [`klyshko`] evaluates
//! `K_n = (n+1)P_{n−1}P_{n+1}/(n P_n²)`; any defined `K_n < 1` marks the
//! distribution as nonclassical.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::fock::{DensityMatrix, ModeDensity, Subsystem};
use crate::scalar::{czero, Complex, Real};

/// Slack allowed below zero for numerically computed probabilities.
pub const NEGATIVE_SLACK: f64 = 1e-10;
/// Slack allowed above one for the total probability.
pub const TOTAL_SLACK: f64 = 1e-9;
pub const DEFAULT_KLYSHKO_FLOOR: f64 = 1e-12;
/// Largest tail mass for which [`mean_photon`] is trusted.
pub const MEAN_TAIL_LIMIT: f64 = 1e-6;
/// Largest population allowed beyond the returned truncation of a model.
pub const MODEL_TAIL_LIMIT: f64 = 1e-8;
/// Extra levels used while exponentiating, cropped afterwards.
pub const MODEL_BUFFER: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhotonDistribution<T> {
    pub probs: Vec<T>,
    pub truncation: usize,
    /// `1 − ΣP_n`.
    pub tail_mass: T,
}

impl<T: Real> PhotonDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParams("empty photon distribution".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -T::lit(NEGATIVE_SLACK)) {
            return Err(Error::InvalidParams(format!("invalid probability {p}")));
        }
        let total = probs.iter().fold(T::zero(), |a, &b| a + b);
        if total > T::one() + T::lit(TOTAL_SLACK) {
            return Err(Error::InvalidParams(format!("probabilities sum to {total}")));
        }
        Ok(Self::from_raw(probs))
    }

    fn from_raw(probs: Vec<T>) -> Self {
        let total = probs.iter().fold(T::zero(), |a, &b| a + b);
        Self { truncation: probs.len(), tail_mass: T::one() - total, probs }
    }

    pub fn get(&self, n: usize) -> T {
        self.probs.get(n).copied().unwrap_or(T::zero())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Diagonal of a single-mode density matrix.
pub fn distribution_from_density<T: Real>(rho: &ModeDensity<T>) -> PhotonDistribution<T> {
    PhotonDistribution::from_raw((0..rho.nrows()).map(|n| rho[(n, n)].re).collect())
}

/// Cavity marginal of a composite state, with the qubit and JPA traced out.
pub fn cavity_distribution<T: Real>(rho: &DensityMatrix<T>) -> PhotonDistribution<T> {
    distribution_from_density(&rho.partial_trace(Subsystem::Cavity))
}

/// `Σ n P_n`.
pub fn mean_photon<T: Real>(p: &PhotonDistribution<T>) -> Result<T> {
    if p.tail_mass.abs() > T::lit(MEAN_TAIL_LIMIT) {
        return Err(Error::ExcessTailMass { tail: p.tail_mass.to_f64_lossy() });
    }
    Ok(p.probs.iter().enumerate().fold(T::zero(), |acc, (n, &q)| acc + T::from_count(n) * q))
}

/// One Klyshko figure of merit; `value` is `None` where `P_n²` falls below
/// the floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlyshkoEntry<T> {
    pub n: usize,
    pub value: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlyshkoTable<T> {
    pub entries: Vec<KlyshkoEntry<T>>,
    pub floor: f64,
}

impl<T: Real> KlyshkoTable<T> {
    /// `K_n`, or `None` if undefined or out of range.
    pub fn k(&self, n: usize) -> Option<T> {
        self.entries.iter().find(|e| e.n == n).and_then(|e| e.value)
    }

    pub fn nonclassical(&self) -> bool {
        self.entries.iter().any(|e| matches!(e.value, Some(v) if v < T::one()))
    }
}

/// [`klyshko_with_floor`] with the default floor.
pub fn klyshko<T: Real>(p: &[T]) -> KlyshkoTable<T> {
    klyshko_with_floor(p, DEFAULT_KLYSHKO_FLOOR)
}

/// `K_n` for `n = 1…N−2`. The floor applies to `P_n² / (ΣP)²`, so scaling
/// `p` changes neither the values nor which entries are defined.
pub fn klyshko_with_floor<T: Real>(p: &[T], floor: f64) -> KlyshkoTable<T> {
    let total = p.iter().fold(T::zero(), |a, &b| a + b);
    let cut = T::lit(floor) * total * total;
    let entries = (1..p.len().saturating_sub(1))
        .map(|n| {
            let pn2 = p[n] * p[n];
            let value = (pn2 >= cut && pn2 > T::zero()).then(|| {
                let nn = T::from_count(n);
                (nn + T::one()) * p[n - 1] * p[n + 1] / (nn * pn2)
            });
            KlyshkoEntry { n, value }
        })
        .collect();
    KlyshkoTable { entries, floor }
}

/// Geometric law with the same mean as `p`, on the same truncation.
pub fn best_fit_geometric<T: Real>(p: &PhotonDistribution<T>) -> Result<PhotonDistribution<T>> {
    let m = mean_photon(p)?;
    let ratio = m / (T::one() + m);
    let mut q = T::one() / (T::one() + m);
    let mut probs = Vec::with_capacity(p.len());
    for _ in 0..p.len() {
        probs.push(q);
        q *= ratio;
    }
    Ok(PhotonDistribution::from_raw(probs))
}

/// `½ Σ|P_n − Q_n|` over the longer of the two supports.
pub fn total_variation<T: Real>(p: &PhotonDistribution<T>, q: &PhotonDistribution<T>) -> T {
    let n = p.len().max(q.len());
    (0..n).fold(T::zero(), |acc, k| acc + (p.get(k) - q.get(k)).abs()) * T::lit(0.5)
}

/// Displaced thermal state `D(α)ρ(n_th)D†(α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermalCoherentModel<T> {
    pub n_th: T,
    pub alpha: Complex<T>,
}

impl<T: Real> ThermalCoherentModel<T> {
    pub fn new(n_th: T, alpha: Complex<T>) -> Result<Self> {
        if !(n_th >= T::zero()) || !n_th.is_finite() || !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::InvalidParams(format!("thermal-coherent model n_th={n_th}, alpha={alpha}")));
        }
        Ok(Self { n_th, alpha })
    }
}

/// Squeezed vacuum `S(r)|0⟩` mixed with a vacuum ancilla on a beam splitter
/// of amplitude reflectivity `l = sin θ`, so a fraction `1 − l²` of the
/// energy is transmitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqueezedLossModel<T> {
    pub r: T,
    pub l: T,
}

impl<T: Real> SqueezedLossModel<T> {
    pub fn new(r: T, l: T) -> Result<Self> {
        if !(r >= T::zero()) || !r.is_finite() || !(l >= T::zero() && l <= T::one()) {
            return Err(Error::InvalidParams(format!("squeezed-loss model r={r}, l={l}")));
        }
        Ok(Self { r, l })
    }

    /// Model with energy loss fraction `eta`, i.e. `l = √eta`.
    pub fn from_power_loss(r: T, eta: T) -> Result<Self> {
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::InvalidParams(format!("power loss {eta} outside [0, 1]")));
        }
        Self::new(r, eta.sqrt())
    }

    /// Energy transmissivity `cos²θ = 1 − l²`.
    pub fn transmissivity(&self) -> T {
        T::one() - self.l * self.l
    }
}

fn ladder_dense<T: Real>(dim: usize) -> Mat<Complex<T>> {
    Mat::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex::new(T::from_count(j).sqrt(), T::zero())
        } else {
            czero()
        }
    })
}

/// Leading `dim × dim` block, checked for lost population and renormalized.
fn crop<T: Real>(rho: &Mat<Complex<T>>, dim: usize) -> Result<ModeDensity<T>> {
    let kept = (0..dim).fold(T::zero(), |a, n| a + rho[(n, n)].re);
    let tail = T::one() - kept;
    let limit = T::lit(MODEL_TAIL_LIMIT).max(T::lit(64.0) * T::epsilon());
    if tail > limit {
        return Err(Error::TruncationTooSmall { dim, tail: tail.to_f64_lossy(), threshold: limit.to_f64_lossy() });
    }
    let inv = T::one() / kept;
    Ok(Mat::from_fn(dim, dim, |i, j| {
        let v = if i == j { Complex::new(rho[(i, i)].re, T::zero()) } else { (rho[(i, j)] + rho[(j, i)].conj()) * T::lit(0.5) };
        v * inv
    }))
}

/// `D(α)ρ(n_th)D†(α)` on `dim` levels.
pub fn thermal_coherent_density<T: Real>(m: &ThermalCoherentModel<T>, dim: usize) -> Result<ModeDensity<T>> {
    if dim == 0 {
        return Err(Error::InvalidDimension { dim, reason: "mode dimension must be at least 1" });
    }
    let big = dim + MODEL_BUFFER;
    let a = ladder_dense::<T>(big);
    let gen = Mat::from_fn(big, big, |i, j| m.alpha * a[(j, i)].conj() - m.alpha.conj() * a[(i, j)]);
    let d = expm(&gen);
    // Bose-Einstein weights without renormalization, so population beyond
    // the buffer shows up as tail.
    let ratio = m.n_th / (T::one() + m.n_th);
    let mut w = T::one() / (T::one() + m.n_th);
    let mut rho = Mat::<Complex<T>>::zeros(big, big);
    for k in 0..big {
        if w == T::zero() {
            break;
        }
        for i in 0..big {
            let dik = d[(i, k)] * w;
            for j in 0..big {
                rho[(i, j)] += dik * d[(j, k)].conj();
            }
        }
        w *= ratio;
    }
    crop(&rho, dim)
}

/// Reduced state of the lossy squeezed vacuum on `dim` levels.
pub fn lossy_squeezed_density<T: Real>(m: &SqueezedLossModel<T>, dim: usize) -> Result<ModeDensity<T>> {
    if dim == 0 {
        return Err(Error::InvalidDimension { dim, reason: "mode dimension must be at least 1" });
    }
    let big = dim + MODEL_BUFFER;
    let a = ladder_dense::<T>(big);
    let a2 = &a * &a;
    let half_r = Complex::new(m.r * T::lit(0.5), T::zero());
    let s = expm(&Mat::from_fn(big, big, |i, j| half_r * (a2[(i, j)] - a2[(j, i)].conj())));
    let psi: Vec<Complex<T>> = (0..big).map(|n| s[(n, 0)]).collect();

    // The beam splitter conserves total photon number K, so it acts on each
    // block {|j, K−j⟩} separately; the input sits at |K, 0⟩.
    let theta = m.l.asin();
    let mut rho = Mat::<Complex<T>>::zeros(big, big);
    let mut out: Vec<Vec<Complex<T>>> = Vec::with_capacity(big);
    for (k, &amp) in psi.iter().enumerate() {
        let g = Mat::from_fn(k + 1, k + 1, |i, j| {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if hi == lo + 1 {
                let v = (T::from_count(hi) * T::from_count(k - hi + 1)).sqrt();
                Complex::new(T::zero(), -theta * v)
            } else {
                czero()
            }
        });
        let u = expm(&g);
        out.push((0..=k).map(|j| u[(j, k)] * amp).collect());
    }
    // ρ_a[n, n'] = Σ_m ψ(n, m) ψ*(n', m); fixing ancilla m selects blocks
    // K = n + m and K' = n' + m.
    for mm in 0..big {
        for n in 0..big - mm {
            let x = out[n + mm][n];
            if x == czero() {
                continue;
            }
            for np in 0..big - mm {
                rho[(n, np)] += x * out[np + mm][np].conj();
            }
        }
    }
    crop(&rho, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn poisson(mean: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| (-mean).exp() * mean.powi(k as i32) / factorial(k)).collect()
    }

    fn geometric(n_th: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| n_th.powi(k as i32) / (1.0 + n_th).powi(k as i32 + 1)).collect()
    }

    /// Generalized Laguerre polynomial by the three-term recurrence.
    fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
        let (mut l0, mut l1) = (1.0, 1.0 + alpha - x);
        if k == 0 {
            return l0;
        }
        for j in 1..k {
            let jf = j as f64;
            let l2 = ((2.0 * jf + 1.0 + alpha - x) * l1 - (jf + alpha) * l0) / (jf + 1.0);
            l0 = l1;
            l1 = l2;
        }
        l1
    }

    /// `|⟨m|D(α)|k⟩|²` for real α.
    fn displaced_fock(m: usize, k: usize, alpha: f64) -> f64 {
        let x = alpha * alpha;
        let (lo, hi) = (m.min(k), m.max(k));
        let d = (hi - lo) as f64;
        let amp = (factorial(lo) / factorial(hi)).sqrt() * alpha.abs().powf(d) * (-x / 2.0).exp() * laguerre(lo, d, x);
        amp * amp
    }

    #[test]
    fn vacuum_distribution() {
        let mut rho = Mat::<Complex<f64>>::zeros(4, 4);
        rho[(0, 0)] = Complex::new(1.0, 0.0);
        let p = distribution_from_density(&rho);
        assert_eq!(p.probs, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(mean_photon(&p).unwrap(), 0.0);
    }

    #[test]
    fn coherent_state_is_poisson() {
        let m = ThermalCoherentModel::new(0.0f64, Complex::new(0.49, 0.0)).unwrap();
        let rho = thermal_coherent_density(&m, 14).unwrap();
        let purity = (&rho * &rho).diagonal().column_vector().iter().fold(0.0, |a, v| a + v.re);
        assert!((purity - 1.0).abs() < 1e-9);
        let p = distribution_from_density(&rho);
        for (a, b) in p.probs.iter().zip(poisson(0.49 * 0.49, 14)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_displacement_is_thermal() {
        for n_th in [0.04, 0.22, 0.5] {
            let m = ThermalCoherentModel::new(n_th, Complex::new(0.0, 0.0)).unwrap();
            let p = distribution_from_density(&thermal_coherent_density(&m, 40).unwrap());
            for (a, b) in p.probs.iter().zip(geometric(n_th, 40)) {
                assert!((a - b).abs() < 1e-10, "{n_th}");
            }
        }
    }

    #[test]
    fn displaced_thermal_matches_fock_mixture() {
        let (n_th, alpha) = (0.04, 0.49);
        let m = ThermalCoherentModel::new(n_th, Complex::new(alpha, 0.0)).unwrap();
        let rho = thermal_coherent_density(&m, 16).unwrap();
        let p = distribution_from_density(&rho);
        let w = geometric(n_th, 60);
        for mm in 0..16 {
            let expected: f64 = (0..60).map(|k| w[k] * displaced_fock(mm, k, alpha)).sum();
            assert!((p.probs[mm] - expected).abs() < 1e-10, "{mm}");
        }
        let tr: f64 = (0..16).map(|i| rho[(i, i)].re).sum();
        assert!((tr - 1.0).abs() < 1e-10);
        assert!(thermal_coherent_density(&m, 3).is_err());
    }

    #[test]
    fn pure_squeezed_vacuum_matches_closed_form() {
        let r: f64 = 0.54;
        let m = SqueezedLossModel::new(r, 0.0).unwrap();
        let p = distribution_from_density(&lossy_squeezed_density(&m, 30).unwrap());
        for n in 0..15 {
            let expected =
                factorial(2 * n) * r.tanh().powi(2 * n as i32) / (4f64.powi(n as i32) * factorial(n).powi(2) * r.cosh());
            assert!((p.probs[2 * n] - expected).abs() < 1e-10, "{n}");
            assert!(p.probs[2 * n + 1].abs() < 1e-12);
        }
        assert!((mean_photon(&p).unwrap() - r.sinh().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn loss_is_binomial_thinning() {
        // Oracle: each photon survives independently with probability 1 − l².
        let (r, l): (f64, f64) = (0.54, 0.42);
        let p0 = distribution_from_density(&lossy_squeezed_density(&SqueezedLossModel::new(r, 0.0).unwrap(), 30).unwrap());
        let p = distribution_from_density(&lossy_squeezed_density(&SqueezedLossModel::new(r, l).unwrap(), 30).unwrap());
        let t = 1.0 - l * l;
        for k in 0..10 {
            let expected: f64 = (k..30)
                .map(|n| p0.probs[n] * factorial(n) / (factorial(k) * factorial(n - k)) * t.powi(k as i32) * (1.0 - t).powi((n - k) as i32))
                .sum();
            assert!((p.probs[k] - expected).abs() < 1e-10, "{k}");
        }
        assert!((mean_photon(&p).unwrap() - t * r.sinh().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn full_loss_and_zero_squeezing_give_vacuum() {
        for m in [SqueezedLossModel::new(0.8, 1.0).unwrap(), SqueezedLossModel::new(0.0, 0.3).unwrap()] {
            let rho = lossy_squeezed_density(&m, 20).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    let e = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                    assert!((rho[(i, j)] - Complex::new(e, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn power_loss_constructor() {
        let m = SqueezedLossModel::from_power_loss(0.54f64, 0.42).unwrap();
        assert!((m.transmissivity() - 0.58).abs() < 1e-15);
        assert!(SqueezedLossModel::new(0.5f64, 1.2).is_err());
    }

    #[test]
    fn klyshko_closed_forms() {
        let k = klyshko(&poisson(0.7, 12));
        for n in 1..=6 {
            assert!((k.k(n).unwrap() - 1.0).abs() < 1e-10);
        }
        let k = klyshko(&geometric(0.22, 12));
        for n in 1..=6 {
            assert!((k.k(n).unwrap() - (n as f64 + 1.0) / n as f64).abs() < 1e-10);
        }
        assert!(!k.nonclassical());
    }

    #[test]
    fn klyshko_flags_empty_odd_levels() {
        let p = distribution_from_density(&lossy_squeezed_density(&SqueezedLossModel::new(0.54f64, 0.0).unwrap(), 30).unwrap());
        let k = klyshko(&p.probs);
        assert!(k.k(1).is_none() && k.k(3).is_none());
        assert!(k.k(2).is_some());
    }

    #[test]
    fn lossy_squeezed_model_is_nonclassical_at_even_n() {
        let p = distribution_from_density(&lossy_squeezed_density(&SqueezedLossModel::new(0.54f64, 0.42).unwrap(), 30).unwrap());
        let k = klyshko(&p.probs);
        assert!(k.k(2).unwrap() < 1.0 && k.k(4).unwrap() < 1.0);
        assert!(k.k(1).unwrap() > 1.0 && k.k(3).unwrap() > 1.0);
        assert!(k.nonclassical());
    }

    #[test]
    fn mean_rejects_heavy_tail() {
        let p = PhotonDistribution::new(vec![0.5, 0.3]).unwrap();
        assert!(matches!(mean_photon(&p), Err(Error::ExcessTailMass { .. })));
        assert!(PhotonDistribution::new(vec![0.7, 0.4]).is_err());
        assert!(PhotonDistribution::new(vec![1.0, -1e-6]).is_err());
    }

    #[test]
    fn geometric_fit_of_thermal_is_exact() {
        let p = PhotonDistribution::new(geometric(0.27, 60)).unwrap();
        assert!((mean_photon(&p).unwrap() - 0.27).abs() < 1e-8);
        let g = best_fit_geometric(&p).unwrap();
        assert!(total_variation(&p, &g) < 1e-10);
    }

    #[test]
    fn works_in_single_precision() {
        let m = SqueezedLossModel::new(0.54f32, 0.42).unwrap();
        let p = distribution_from_density(&lossy_squeezed_density(&m, 24).unwrap());
        assert!((p.probs.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn klyshko_is_scale_invariant(p in prop::collection::vec(1e-4f64..1.0, 3..10), c in 1e-3f64..1e3) {
            let a = klyshko(&p);
            let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
            let b = klyshko(&scaled);
            for (x, y) in a.entries.iter().zip(&b.entries) {
                let (x, y) = (x.value.unwrap(), y.value.unwrap());
                prop_assert!((x - y).abs() <= 1e-14 * x.abs());
            }
            let pow2: Vec<f64> = p.iter().map(|x| x * 1024.0).collect();
            prop_assert_eq!(klyshko(&pow2), a);
        }

        #[test]
        fn model_distributions_are_valid(r in 0.0f64..0.7, l in 0.0f64..1.0) {
            let p = distribution_from_density(&lossy_squeezed_density(&SqueezedLossModel::new(r, l).unwrap(), 40).unwrap());
            prop_assert!(PhotonDistribution::new(p.probs.clone()).is_ok());
            prop_assert!(p.tail_mass.abs() < 1e-9);
            let t = 1.0 - l * l;
            prop_assert!((mean_photon(&p).unwrap() - t * r.sinh().powi(2)).abs() < 1e-8);
        }
    }
}
