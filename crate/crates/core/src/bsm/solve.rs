//! Per-bin LS and MagLS filter solves.
//!
//! With `ρ = σ_n²/σ_s²` the LS filter minimises
//! `‖Vᵀc* − h‖² + ρ‖c‖²`, giving `c = (VVᴴ + ρI)⁻¹ V h*`. MagLS replaces
//! the complex target by its magnitude and is solved by variable exchange:
//! fix target phases, solve the LS system, read the phases back from the
//! reproduction, repeat.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::Cholesky;
use crate::acoustics::SteeringSet;
use crate::error::{Error, Result};

/// How the first phase estimate of each MagLS bin is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaglsInit {
    /// Start every bin from the LS solution.
    LsPhase,
    /// Start from the previous (lower) bin's final phases; the first bin
    /// starts from LS.
    Continuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaglsSettings {
    pub max_iter: usize,
    /// Stop when no direction's phase moves more than this, radians.
    pub tol: f64,
    pub init: MaglsInit,
}

impl Default for MaglsSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            init: MaglsInit::Continuation,
        }
    }
}

/// Where the returned MagLS filter of a bin came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaglsOrigin {
    /// Final iterate of the run from the configured initial phase.
    Initial,
    /// Final iterate of a rerun started at the LS solution, used when the
    /// first run ended with a larger magnitude error than LS.
    LsRestart,
    /// Lowest-magnitude-error iterate of the LS-started run. The
    /// regularised objective decreases monotonically, the plain magnitude
    /// error need not.
    BestIterate,
}

/// Result of one bin's MagLS design.
#[derive(Debug, Clone, PartialEq)]
pub struct MaglsBin {
    pub filter: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖|Vᵀc*| − |h|‖₂` of the returned filter.
    pub residual: f64,
    /// Same measure for the LS filter of this bin.
    pub ls_residual: f64,
    pub origin: MaglsOrigin,
    /// `‖|Vᵀc*| − |h|‖² + ρ‖c‖²` after each iteration of the final run.
    pub objective_trace: Vec<f64>,
}

/// Factored `VVᴴ + ρI` for every bin of a steering set.
pub struct DesignSystems<'a> {
    steering: &'a SteeringSet,
    factors: Vec<Cholesky>,
    rho: f64,
}

impl<'a> DesignSystems<'a> {
    pub fn new(steering: &'a SteeringSet, snr_ratio: f64) -> Result<Self> {
        if !(snr_ratio > 0.0) || !snr_ratio.is_finite() {
            return Err(Error::Config(format!("snr_ratio must be positive, got {snr_ratio}")));
        }
        let rho = 1.0 / snr_ratio;
        let m = steering.mics;
        let d = steering.directions;
        let factors = steering
            .matrices
            .par_iter()
            .enumerate()
            .map(|(bin, v)| {
                if v.len() != m * d {
                    return Err(Error::GridMismatch(format!(
                        "bin {bin} steering has {} entries, expected {}",
                        v.len(),
                        m * d
                    )));
                }
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite { bin });
                }
                let mut a = vec![Complex64::new(0.0, 0.0); m * m];
                for i in 0..m {
                    for j in 0..=i {
                        let s: Complex64 = (0..d).map(|k| v[i * d + k] * v[j * d + k].conj()).sum();
                        a[i * m + j] = s;
                        a[j * m + i] = s.conj();
                    }
                    a[i * m + i] += rho;
                }
                Cholesky::factor(&a, m).ok_or(Error::Factorization { bin })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            steering,
            factors,
            rho,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.factors.len()
    }

    pub fn mics(&self) -> usize {
        self.steering.mics
    }

    pub fn directions(&self) -> usize {
        self.steering.directions
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn steering(&self) -> &SteeringSet {
        self.steering
    }

    /// Regularised LS filter of `bin` for a complex target.
    pub fn solve(&self, bin: usize, target: &[Complex64]) -> Vec<Complex64> {
        let v = &self.steering.matrices[bin];
        let d = self.directions();
        let rhs: Vec<Complex64> = (0..self.mics())
            .map(|i| (0..d).map(|k| v[i * d + k] * target[k].conj()).sum())
            .collect();
        self.factors[bin].solve(&rhs)
    }

    /// Reproduced field `Vᵀc*` over the design directions.
    pub fn reproduce(&self, bin: usize, c: &[Complex64]) -> Vec<Complex64> {
        reproduce(&self.steering.matrices[bin], self.mics(), self.directions(), c)
    }

    fn check_targets(&self, h: &[Vec<Complex64>]) -> Result<()> {
        if h.len() != self.n_bins() {
            return Err(Error::GridMismatch(format!(
                "{} target bins vs {} steering bins",
                h.len(),
                self.n_bins()
            )));
        }
        for (bin, row) in h.iter().enumerate() {
            if row.len() != self.directions() {
                return Err(Error::GridMismatch(format!(
                    "bin {bin}: {} target directions vs {} steering directions",
                    row.len(),
                    self.directions()
                )));
            }
            if row.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { bin });
            }
        }
        Ok(())
    }

    /// LS filters for every bin, `[bin][mic]`.
    pub fn ls_filters(&self, h: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        self.check_targets(h)?;
        Ok((0..self.n_bins())
            .into_par_iter()
            .map(|bin| self.solve(bin, &h[bin]))
            .collect())
    }

    /// MagLS filters for `bins` (ascending), continuing phases across them
    /// when the settings ask for it.
    pub fn magls_filters(
        &self,
        h: &[Vec<Complex64>],
        settings: &MaglsSettings,
        bins: std::ops::Range<usize>,
    ) -> Result<Vec<MaglsBin>> {
        self.check_targets(h)?;
        if bins.end > self.n_bins() {
            return Err(Error::GridMismatch(format!(
                "bin range {bins:?} exceeds {} bins",
                self.n_bins()
            )));
        }
        let mut prev_phase: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(bins.len());
        for bin in bins {
            let init = match (settings.init, &prev_phase) {
                (MaglsInit::Continuation, Some(p)) => Some(p.as_slice()),
                _ => None,
            };
            let res = self.magls_bin(bin, &h[bin], settings, init);
            prev_phase = Some(self.reproduce(bin, &res.filter).iter().map(|z| z.arg()).collect());
            out.push(res);
        }
        Ok(out)
    }

    /// One bin of MagLS. `init` phases default to the LS solution's.
    pub fn magls_bin(
        &self,
        bin: usize,
        h: &[Complex64],
        settings: &MaglsSettings,
        init: Option<&[f64]>,
    ) -> MaglsBin {
        let mag: Vec<f64> = h.iter().map(|z| z.norm()).collect();
        let ls = self.solve(bin, h);
        let ls_residual = magnitude_residual(&self.reproduce(bin, &ls), &mag);
        let ls_phase: Vec<f64> = h.iter().map(|z| z.arg()).collect();

        let first = self.exchange(bin, &mag, init.unwrap_or(&ls_phase), settings);
        if first.final_residual <= ls_residual {
            return first.finish(ls_residual, MaglsOrigin::Initial);
        }
        let from_ls = match init {
            Some(_) => self.exchange(bin, &mag, &ls_phase, settings),
            None => first,
        };
        if from_ls.final_residual <= ls_residual {
            from_ls.finish(ls_residual, MaglsOrigin::LsRestart)
        } else {
            from_ls.finish_best(ls_residual)
        }
    }

    /// The variable-exchange iteration alone, without falling back to LS
    /// when its final magnitude error is larger.
    pub fn exchange_bin(
        &self,
        bin: usize,
        h: &[Complex64],
        settings: &MaglsSettings,
        init: Option<&[f64]>,
    ) -> MaglsBin {
        let mag: Vec<f64> = h.iter().map(|z| z.norm()).collect();
        let ls_residual = magnitude_residual(&self.reproduce(bin, &self.solve(bin, h)), &mag);
        let ls_phase: Vec<f64> = h.iter().map(|z| z.arg()).collect();
        self.exchange(bin, &mag, init.unwrap_or(&ls_phase), settings)
            .finish(ls_residual, MaglsOrigin::Initial)
    }

    fn exchange(&self, bin: usize, mag: &[f64], phase0: &[f64], settings: &MaglsSettings) -> Run {
        let mut phase = phase0.to_vec();
        let mut trace = Vec::new();
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        let mut c = Vec::new();
        let mut y = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..settings.max_iter.max(1) {
            iterations = it + 1;
            let t: Vec<Complex64> = mag
                .iter()
                .zip(&phase)
                .map(|(a, p)| Complex64::from_polar(*a, *p))
                .collect();
            c = self.solve(bin, &t);
            y = self.reproduce(bin, &c);
            let r = magnitude_residual(&y, mag);
            trace.push(r * r + self.rho * norm_sqr(&c));
            if best.as_ref().map_or(true, |(b, _)| r < *b) {
                best = Some((r, c.clone()));
            }
            let mut change: f64 = 0.0;
            for (p, z) in phase.iter_mut().zip(&y) {
                if z.norm_sqr() > 0.0 {
                    let np = z.arg();
                    change = change.max(wrap_pi(np - *p).abs());
                    *p = np;
                }
            }
            if change < settings.tol {
                converged = true;
                break;
            }
        }
        let (best_residual, best_filter) = best.expect("at least one iteration");
        Run {
            final_residual: magnitude_residual(&y, mag),
            filter: c,
            best_residual,
            best_filter,
            iterations,
            converged,
            trace,
        }
    }
}

struct Run {
    filter: Vec<Complex64>,
    final_residual: f64,
    best_filter: Vec<Complex64>,
    best_residual: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

impl Run {
    fn finish(self, ls_residual: f64, origin: MaglsOrigin) -> MaglsBin {
        MaglsBin {
            filter: self.filter,
            iterations: self.iterations,
            converged: self.converged,
            residual: self.final_residual,
            ls_residual,
            origin,
            objective_trace: self.trace,
        }
    }

    fn finish_best(self, ls_residual: f64) -> MaglsBin {
        MaglsBin {
            filter: self.best_filter,
            iterations: self.iterations,
            converged: self.converged,
            residual: self.best_residual,
            ls_residual,
            origin: MaglsOrigin::BestIterate,
            objective_trace: self.trace,
        }
    }
}

pub(crate) fn reproduce(v: &[Complex64], m: usize, d: usize, c: &[Complex64]) -> Vec<Complex64> {
    (0..d)
        .map(|k| (0..m).map(|i| v[i * d + k] * c[i].conj()).sum())
        .collect()
}

fn norm_sqr(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

fn wrap_pi(x: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `‖|y| − |h|‖₂`.
pub fn magnitude_residual(y: &[Complex64], h_mag: &[f64]) -> f64 {
    y.iter()
        .zip(h_mag)
        .map(|(z, a)| (z.norm() - a).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Complex-matching objective `‖Vᵀc* − h‖² + ρ‖c‖²` (σ_s² = 1).
pub fn ls_objective(v: &[Complex64], m: usize, d: usize, c: &[Complex64], h: &[Complex64], rho: f64) -> f64 {
    let y = reproduce(v, m, d, c);
    y.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() + rho * norm_sqr(c)
}

/// Magnitude-matching objective `‖|Vᵀc*| − |h|‖² + ρ‖c‖²` (σ_s² = 1).
pub fn magls_objective(v: &[Complex64], m: usize, d: usize, c: &[Complex64], h: &[Complex64], rho: f64) -> f64 {
    let y = reproduce(v, m, d, c);
    let mag: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    magnitude_residual(&y, &mag).powi(2) + rho * norm_sqr(c)
}

/// LS filters `[bin][mic]` for steering `V` and targets `h` (`[bin][dir]`).
pub fn compute_ls_filters(
    steering: &SteeringSet,
    h: &[Vec<Complex64>],
    snr_ratio: f64,
) -> Result<Vec<Vec<Complex64>>> {
    DesignSystems::new(steering, snr_ratio)?.ls_filters(h)
}

/// MagLS filters over every bin of the steering set.
pub fn compute_magls_filters(
    steering: &SteeringSet,
    h: &[Vec<Complex64>],
    snr_ratio: f64,
    settings: &MaglsSettings,
) -> Result<Vec<MaglsBin>> {
    let sys = DesignSystems::new(steering, snr_ratio)?;
    sys.magls_filters(h, settings, 0..sys.n_bins())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    }

    pub(crate) fn random_steering(rng: &mut ChaCha8Rng, m: usize, d: usize, bins: usize) -> SteeringSet {
        SteeringSet {
            freqs: vec![0.0; bins],
            mics: m,
            directions: d,
            matrices: (0..bins).map(|_| (0..m * d).map(|_| cn(rng)).collect()).collect(),
        }
    }

    fn random_targets(rng: &mut ChaCha8Rng, d: usize, bins: usize) -> Vec<Vec<Complex64>> {
        (0..bins).map(|_| (0..d).map(|_| cn(rng)).collect()).collect()
    }

    /// Exhaustive search over a phase grid for `min_c ‖|Vᵀc*| − |h|‖² + ρ‖c‖²`
    /// using `min_c = min_ψ min_c ‖Vᵀc* − |h|e^{iψ}‖² + ρ‖c‖²`.
    pub(crate) fn brute_force_magls(sys: &DesignSystems<'_>, h: &[Complex64], step_deg: f64) -> f64 {
        let mag: Vec<f64> = h.iter().map(|z| z.norm()).collect();
        let n = (360.0 / step_deg).round() as usize;
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in 0..n {
                let pa = (a as f64 * step_deg).to_radians();
                let pb = (b as f64 * step_deg).to_radians();
                let t = [Complex64::from_polar(mag[0], pa), Complex64::from_polar(mag[1], pb)];
                let c = sys.solve(0, &t);
                let v = &sys.steering().matrices[0];
                best = best.min(ls_objective(v, 2, 2, &c, &t, sys.rho()));
            }
        }
        best
    }

    #[test]
    fn identity_steering_returns_conjugate_target() {
        let m = 4;
        let mut v = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            v[i * m + i] = Complex64::new(1.0, 0.0);
        }
        let st = SteeringSet { freqs: vec![0.0], mics: m, directions: m, matrices: vec![v] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_targets(&mut rng, m, 1);
        let c = compute_ls_filters(&st, &h, 1e9).unwrap();
        for (ci, hi) in c[0].iter().zip(&h[0]) {
            assert!((ci - hi.conj()).norm() < 1e-6);
        }
    }

    #[test]
    fn ls_is_a_local_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = random_steering(&mut rng, 6, 240, 1);
        let h = random_targets(&mut rng, 240, 1);
        let c = compute_ls_filters(&st, &h, 1e3).unwrap().remove(0);
        let base = ls_objective(&st.matrices[0], 6, 240, &c, &h[0], 1e-3);
        for _ in 0..100 {
            let p: Vec<Complex64> = c.iter().map(|z| z + cn(&mut rng) * 1e-4).collect();
            assert!(ls_objective(&st.matrices[0], 6, 240, &p, &h[0], 1e-3) >= base);
        }
    }

    #[test]
    fn single_direction_is_reproduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let st = random_steering(&mut rng, 6, 1, 1);
        let h = random_targets(&mut rng, 1, 1);
        let c = compute_ls_filters(&st, &h, 1e9).unwrap();
        let y = reproduce(&st.matrices[0], 6, 1, &c[0]);
        assert!((y[0] - h[0][0]).norm() / h[0][0].norm() < 1e-4);
    }

    #[test]
    fn feasible_magnitude_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let st = random_steering(&mut rng, 6, 4, 1);
        let c0: Vec<Complex64> = (0..6).map(|_| cn(&mut rng)).collect();
        let h = vec![reproduce(&st.matrices[0], 6, 4, &c0)];
        let out = compute_magls_filters(&st, &h, 1e9, &MaglsSettings::default()).unwrap();
        assert!(out[0].residual < 1e-6, "residual {}", out[0].residual);
    }

    #[test]
    fn matches_phase_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let st = random_steering(&mut rng, 2, 2, 1);
            let h = random_targets(&mut rng, 2, 1);
            let sys = DesignSystems::new(&st, 1e3).unwrap();
            // square systems with light regularisation converge slowly
            let settings = MaglsSettings { max_iter: 100_000, ..MaglsSettings::default() };
            let out = sys.magls_bin(0, &h[0], &settings, None);
            assert!(out.converged);
            let got = magls_objective(&st.matrices[0], 2, 2, &out.filter, &h[0], sys.rho());
            let oracle = brute_force_magls(&sys, &h[0], 0.5);
            assert!((got - oracle).abs() <= 1e-3 * oracle, "exchange {got} oracle {oracle}");
        }
    }

    #[test]
    fn magls_never_worse_than_ls_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let st = random_steering(&mut rng, 6, 240, 12);
        let h = random_targets(&mut rng, 240, 12);
        for init in [MaglsInit::LsPhase, MaglsInit::Continuation] {
            let settings = MaglsSettings { init, ..MaglsSettings::default() };
            for b in compute_magls_filters(&st, &h, 1e3, &settings).unwrap() {
                assert!(b.residual <= b.ls_residual + 1e-9);
                for w in b.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-10 * w[0].max(1.0));
                }
            }
        }
    }

    #[test]
    fn bad_inputs_reported_with_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut st = random_steering(&mut rng, 3, 5, 4);
        let mut h = random_targets(&mut rng, 5, 4);
        h[2][1] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(compute_ls_filters(&st, &h, 1e3), Err(Error::NonFinite { bin: 2 })));
        h[2][1] = Complex64::new(0.0, 0.0);
        st.matrices[3][0] = Complex64::new(f64::INFINITY, 0.0);
        assert!(matches!(compute_ls_filters(&st, &h, 1e3), Err(Error::NonFinite { bin: 3 })));
        let st = random_steering(&mut rng, 3, 5, 4);
        assert!(matches!(compute_ls_filters(&st, &h[..3], 1e3), Err(Error::GridMismatch(_))));
        assert!(compute_ls_filters(&st, &h, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn filter_norm_shrinks_with_regularisation(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = random_steering(&mut rng, 6, 20, 1);
            let h = random_targets(&mut rng, 20, 1);
            let mut prev = f64::INFINITY;
            for e in 0..=16 {
                // ρ from 1e-4 to 1 in quarter decades
                let snr = 10f64.powf(4.0 - e as f64 / 4.0);
                let c = compute_ls_filters(&st, &h, snr).unwrap();
                let n = norm_sqr(&c[0]).sqrt();
                prop_assert!(n <= prev * (1.0 + 1e-12));
                prev = n;
            }
        }

        #[test]
        fn exchange_objective_never_increases(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = random_steering(&mut rng, 4, 30, 1);
            let h = random_targets(&mut rng, 30, 1);
            let sys = DesignSystems::new(&st, 1e2).unwrap();
            let out = sys.magls_bin(0, &h[0], &MaglsSettings::default(), None);
            for w in out.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10 * w[0].max(1.0));
            }
            prop_assert!(out.residual <= out.ls_residual + 1e-9);
        }
    }
}
