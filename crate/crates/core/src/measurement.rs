//! Position and momentum measurements on squeezed-mode probes.
//!
//! Densities are evaluated from closed-form squeezed Hermite functions on uniform
//! grids and binned one bin per grid cell, which is also what the Monte Carlo harness
//! samples from. Momentum amplitudes drop the mode phase `(-i)^n`; it is global for
//! every probe built here, so densities and Fisher information are unaffected.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockcore::{hermite_functions_into, SqueezedFockState, C64, MAX_HERMITE_INDEX};
use crate::metrology::{relative_gap, FisherMetadata, FisherMethod, FisherResult, ManyBodyProbe, Statistics};
use crate::models::ModelParams;

pub const MIN_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_POINTS: usize = 1024;
/// Half-width of the default grid in units of the widest state's standard deviation.
pub const COVERAGE_SIGMAS: f64 = 6.0;
/// Bins below this probability are dropped from Fisher sums.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
pub const EXCLUDED_MASS_WARN: f64 = 1e-6;
const REAL_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Position,
    Momentum,
}

/// Uniform grid `x_min, x_min + dx, ..., x_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < MIN_GRID_POINTS {
            return Err(invalid(format!("grid needs at least {MIN_GRID_POINTS} points, got {n_points}")));
        }
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(invalid(format!("grid bounds [{x_min}, {x_max}] are not an interval")));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    /// Default grid `[-L, L]`, `L = 6 sigma` of the widest mode `n_max` at squeezing `xi`.
    pub fn default_for(xi: f64, n_max: usize, params: &ModelParams, observable: Observable) -> Result<Self> {
        Self::symmetric(COVERAGE_SIGMAS * widest_sigma(xi, n_max, params, observable), DEFAULT_GRID_POINTS)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Same interval with twice as many cells.
    pub fn refined(&self) -> Self {
        Self { n_points: 2 * self.n_points - 1, ..*self }
    }

    /// Errors unless the grid spans `±6 sigma` of the widest mode.
    pub fn check_coverage(&self, xi: f64, n_max: usize, params: &ModelParams, observable: Observable) -> Result<()> {
        let need = COVERAGE_SIGMAS * widest_sigma(xi, n_max, params, observable) * (1.0 - 1e-9);
        if self.x_min > -need || self.x_max < need {
            return Err(Error::Domain(format!(
                "grid [{}, {}] does not cover ±{need:.4} ({COVERAGE_SIGMAS} sigma of mode {n_max} at xi = {xi})",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }
}

/// Standard deviation of `S(xi)|n>` in the chosen quadrature.
pub fn widest_sigma(xi: f64, n_max: usize, params: &ModelParams, observable: Observable) -> f64 {
    let mw = params.mass * params.omega;
    let base = (n_max as f64 + 0.5).sqrt();
    match observable {
        Observable::Position => xi.exp() * base / mw.sqrt(),
        Observable::Momentum => (-xi).exp() * base * mw.sqrt(),
    }
}

/// Real mode amplitudes `psi_0..psi_{n_max}` of `S(xi)|n>` at `coord`.
fn mode_amplitudes_into(xi: f64, coord: f64, observable: Observable, params: &ModelParams, out: &mut [f64]) {
    let mw = params.mass * params.omega;
    let (scale, norm) = match observable {
        Observable::Position => ((-xi).exp() * mw.sqrt(), ((-xi).exp() * mw.sqrt()).sqrt()),
        Observable::Momentum => (xi.exp() / mw.sqrt(), (xi.exp() / mw.sqrt()).sqrt()),
    };
    hermite_functions_into(scale * coord, out);
    for v in out.iter_mut() {
        *v *= norm;
    }
}

/// Mode amplitudes tabulated on `grid`, `table[n][i]`.
fn mode_table(xi: f64, n_max: usize, grid: &Grid1D, observable: Observable, params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    if n_max > MAX_HERMITE_INDEX {
        return Err(Error::Unsupported(format!("mode {n_max} beyond the stable Hermite range")));
    }
    let mut table = vec![vec![0.0; grid.n_points]; n_max + 1];
    let mut buf = vec![0.0; n_max + 1];
    for i in 0..grid.n_points {
        mode_amplitudes_into(xi, grid.point(i), observable, params, &mut buf);
        for (n, v) in buf.iter().enumerate() {
            table[n][i] = *v;
        }
    }
    Ok(table)
}

/// Momentum-space wavefunction `(-i)^n e^{xi/2} phi_n(e^{xi} p)` of `S(xi)|n>`, with
/// `phi~(p) = (2 pi)^{-1/2} ∫ e^{-ipx} phi(x) dx`.
pub fn momentum_wavefunction(state: &SqueezedFockState, p: f64, params: &ModelParams) -> Result<C64> {
    if state.n > MAX_HERMITE_INDEX {
        return Err(Error::Unsupported(format!("mode {} beyond the stable Hermite range", state.n)));
    }
    let mut buf = vec![0.0; state.n + 1];
    mode_amplitudes_into(state.xi, p, Observable::Momentum, params, &mut buf);
    let phase = match state.n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    Ok(phase * buf[state.n])
}

/// Binned outcome distribution; 2D for pair correlations (row-major, first particle slow).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDistribution {
    pub observable: Observable,
    pub grid: Grid1D,
    pub grid_y: Option<Grid1D>,
    pub probabilities: Vec<f64>,
    /// `sum density * cell` before renormalization; the deficit is the off-grid tail.
    pub captured_mass: f64,
}

impl MeasurementDistribution {
    pub fn from_density(observable: Observable, grid: Grid1D, grid_y: Option<Grid1D>, density: Vec<f64>) -> Result<Self> {
        let cells = grid.n_points * grid_y.map_or(1, |g| g.n_points);
        if density.len() != cells {
            return Err(invalid(format!("density has {} values for {cells} cells", density.len())));
        }
        if density.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::Numerical("density is negative or NaN".into()));
        }
        let cell = grid.spacing() * grid_y.map_or(1.0, |g| g.spacing());
        let total: f64 = density.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("density vanishes on the grid".into()));
        }
        let probabilities: Vec<f64> = density.iter().map(|d| d / total).collect();
        let check: f64 = probabilities.iter().sum();
        if (check - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Numerical(format!("binned probabilities sum to {check}")));
        }
        Ok(Self { observable, grid, grid_y, probabilities, captured_mass: total * cell })
    }

    pub fn is_pair(&self) -> bool {
        self.grid_y.is_some()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.spacing() * self.grid_y.map_or(1.0, |g| g.spacing())
    }

    /// Probability density at bin `i`.
    pub fn density(&self, i: usize) -> f64 {
        self.probabilities[i] / self.cell_volume()
    }

    /// `p(x1, x2)` at grid indices `(i, j)` of a pair distribution.
    pub fn pair_density(&self, i: usize, j: usize) -> Option<f64> {
        let gy = self.grid_y?;
        Some(self.density(i * gy.n_points + j))
    }

    /// Mean and variance of a one-dimensional distribution.
    pub fn moments(&self) -> Result<(f64, f64)> {
        if self.is_pair() {
            return Err(Error::Unsupported("moments of a pair distribution".into()));
        }
        let mean: f64 = self.probabilities.iter().enumerate().map(|(i, p)| p * self.grid.point(i)).sum();
        let var = self
            .probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.grid.point(i) - mean).powi(2))
            .sum();
        Ok((mean, var))
    }
}

pub fn single_particle_density(state: &SqueezedFockState, grid: &Grid1D, params: &ModelParams) -> Result<MeasurementDistribution> {
    single_particle_distribution(state, grid, params, Observable::Position)
}

/// `|psi_n^xi|²` in position or momentum, binned on `grid`.
pub fn single_particle_distribution(
    state: &SqueezedFockState,
    grid: &Grid1D,
    params: &ModelParams,
    observable: Observable,
) -> Result<MeasurementDistribution> {
    let psi = GridWavefunction::single_particle(state, grid, params, observable)?;
    let density = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    MeasurementDistribution::from_density(observable, *grid, None, density)
}

pub fn pair_correlation_density(probe: &ManyBodyProbe, grid: &Grid1D, params: &ModelParams) -> Result<MeasurementDistribution> {
    pair_correlation_distribution(probe, grid, params, Observable::Position)
}

/// `|Psi(x1, x2)|²` for a two-fermion (or Tonks-Girardeau) probe.
pub fn pair_correlation_distribution(
    probe: &ManyBodyProbe,
    grid: &Grid1D,
    params: &ModelParams,
    observable: Observable,
) -> Result<MeasurementDistribution> {
    if probe.statistics == Statistics::SymmetricBosonic {
        return Err(Error::Unsupported("pair densities are provided for fermionic and Tonks-Girardeau probes".into()));
    }
    let psi = GridWavefunction::pair(probe, grid, params, observable)?;
    let density = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    MeasurementDistribution::from_density(observable, *grid, Some(*grid), density)
}

/// Wavefunction tabulated on a one- or two-particle product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction {
    pub grids: Vec<Grid1D>,
    pub amplitudes: Vec<C64>,
}

impl GridWavefunction {
    pub fn new(grids: Vec<Grid1D>, amplitudes: Vec<C64>) -> Result<Self> {
        let cells: usize = grids.iter().map(|g| g.n_points).product();
        if grids.is_empty() || cells != amplitudes.len() {
            return Err(invalid("wavefunction size does not match its grids"));
        }
        Ok(Self { grids, amplitudes })
    }

    pub fn cell_volume(&self) -> f64 {
        self.grids.iter().map(Grid1D::spacing).product()
    }

    pub fn imaginary_residual(&self) -> f64 {
        self.amplitudes.iter().fold(0.0, |m, a| m.max(a.im.abs()))
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    /// Pointwise modulus, the map `Psi_F -> Psi_TG`.
    pub fn modulus(&self) -> Self {
        Self { grids: self.grids.clone(), amplitudes: self.amplitudes.iter().map(|a| C64::new(a.norm(), 0.0)).collect() }
    }

    pub fn single_particle(state: &SqueezedFockState, grid: &Grid1D, params: &ModelParams, observable: Observable) -> Result<Self> {
        grid.check_coverage(state.xi, state.n, params, observable)?;
        let table = mode_table(state.xi, state.n, grid, observable, params)?;
        let amps = table[state.n].iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::new(vec![*grid], amps)
    }

    /// `[phi_a(x1) phi_b(x2) -+ phi_b(x1) phi_a(x2)] / sqrt 2`; the modulus for Tonks-Girardeau.
    pub fn pair(probe: &ManyBodyProbe, grid: &Grid1D, params: &ModelParams, observable: Observable) -> Result<Self> {
        if probe.n_atoms() != 2 {
            return Err(Error::Unsupported(format!("pair wavefunction needs N = 2, got {}", probe.n_atoms())));
        }
        let (a, b) = (probe.modes()[0], probe.modes()[1]);
        let top = a.max(b);
        grid.check_coverage(probe.xi, top, params, observable)?;
        let table = mode_table(probe.xi, top, grid, observable, params)?;
        let sign = match probe.statistics {
            Statistics::SymmetricBosonic => 1.0,
            _ => -1.0,
        };
        let n = grid.n_points;
        let mut amps = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = (table[a][i] * table[b][j] + sign * table[b][i] * table[a][j]) * std::f64::consts::FRAC_1_SQRT_2;
                let v = if probe.statistics == Statistics::TonksGirardeau { v.abs() } else { v };
                amps.push(C64::new(v, 0.0));
            }
        }
        Self::new(vec![*grid, *grid], amps)
    }
}

fn shifted(params: &ModelParams, delta: f64) -> ModelParams {
    params.with_omega_atom(params.omega_atom + delta)
}

fn check_step(params: &ModelParams, step: Option<f64>) -> Result<f64> {
    params.normal_ratio()?;
    let h = step.unwrap_or_else(|| crate::metrology::default_step(params));
    if !(h > 0.0) || h >= params.omega_atom / 4.0 {
        return Err(invalid(format!("finite-difference step {h} out of range")));
    }
    Ok(h)
}

fn cfi_sum(minus: &[f64], center: &[f64], plus: &[f64], h: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut excluded = 0.0;
    for ((m, c), p) in minus.iter().zip(center).zip(plus) {
        if *c < PROBABILITY_FLOOR {
            excluded += c;
            continue;
        }
        let d = (p - m) / (2.0 * h);
        sum += d * d / c;
    }
    (sum, excluded)
}

/// `F = sum_eta (d_Omega p)² / p` by central differences, bins below the floor
/// excluded and their mass reported.
pub fn classical_fisher_information<F>(provider: F, params: &ModelParams, step: Option<f64>) -> Result<FisherResult>
where
    F: Fn(&ModelParams) -> Result<MeasurementDistribution>,
{
    let h = check_step(params, step)?;
    let center = provider(params)?;
    let eval = |delta: f64| -> Result<Vec<f64>> {
        let d = provider(&shifted(params, delta))?;
        if d.probabilities.len() != center.probabilities.len() {
            return Err(invalid("distribution provider changed its binning with Omega"));
        }
        Ok(d.probabilities)
    };
    let (m1, p1, m2, p2) = (eval(-h)?, eval(h)?, eval(-2.0 * h)?, eval(2.0 * h)?);
    let (fine, excluded) = cfi_sum(&m1, &center.probabilities, &p1, h);
    let (coarse, _) = cfi_sum(&m2, &center.probabilities, &p2, 2.0 * h);
    let rich = relative_gap(fine, coarse);
    let mut meta = FisherMetadata {
        grid_points: Some(center.probabilities.len()),
        step: Some(h),
        richardson_rel_diff: Some(rich),
        excluded_mass: Some(excluded),
        ..Default::default()
    };
    if excluded > EXCLUDED_MASS_WARN {
        meta.notes.push(format!("excluded probability mass {excluded:.3e} exceeds {EXCLUDED_MASS_WARN:e}"));
    }
    if rich > 0.01 {
        meta.notes.push(format!("h vs 2h estimates differ by {rich:.3e}"));
    }
    Ok(FisherResult::new(fine, FisherMethod::Classical, params).with_metadata(meta))
}

/// `I = 4 [∫ (d psi)² - (∫ psi d psi)²]` for a real wavefunction family on a fixed grid.
pub fn grid_qfi_real_wavefunction<F>(provider: F, params: &ModelParams, step: Option<f64>) -> Result<FisherResult>
where
    F: Fn(&ModelParams) -> Result<GridWavefunction>,
{
    let h = check_step(params, step)?;
    let real = |delta: f64| -> Result<(Vec<f64>, f64)> {
        let psi = provider(&shifted(params, delta))?;
        let residual = psi.imaginary_residual();
        if residual > REAL_TOL {
            return Err(invalid(format!("wavefunction is not real (imaginary residual {residual:.3e})")));
        }
        let cell = psi.cell_volume();
        Ok((psi.amplitudes.iter().map(|a| a.re).collect(), cell))
    };
    let (center, cell) = real(0.0)?;
    let (m1, _) = real(-h)?;
    let (p1, _) = real(h)?;
    let (m2, _) = real(-2.0 * h)?;
    let (p2, _) = real(2.0 * h)?;
    if [&m1, &p1, &m2, &p2].iter().any(|v| v.len() != center.len()) {
        return Err(invalid("wavefunction provider changed its grid with Omega"));
    }
    let qfi = |minus: &[f64], plus: &[f64], step: f64| {
        let mut dd = 0.0;
        let mut overlap = 0.0;
        for ((m, p), c) in minus.iter().zip(plus).zip(&center) {
            let d = (p - m) / (2.0 * step);
            dd += d * d;
            overlap += c * d;
        }
        let overlap = overlap * cell;
        (4.0 * (dd * cell - overlap * overlap), overlap)
    };
    let (fine, overlap) = qfi(&m1, &p1, h);
    let (coarse, _) = qfi(&m2, &p2, 2.0 * h);
    let rich = relative_gap(fine, coarse);
    let mut meta = FisherMetadata {
        grid_points: Some(center.len()),
        step: Some(h),
        richardson_rel_diff: Some(rich),
        overlap_term: Some(overlap),
        ..Default::default()
    };
    if rich > 0.01 {
        meta.notes.push(format!("h vs 2h estimates differ by {rich:.3e}"));
    }
    Ok(FisherResult::new(fine.max(0.0), FisherMethod::Grid, params).with_metadata(meta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    /// Independent repetitions; the empirical variance is taken across them.
    pub batches: usize,
    /// Half-width of the search bracket in Cramér-Rao standard deviations.
    pub bracket_sigmas: f64,
    /// Golden-section stopping width, relative to `Omega`.
    pub tolerance: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self { batches: 2000, bracket_sigmas: 12.0, tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationRun {
    pub true_omega: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub bracket: (f64, f64),
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub bias: f64,
    pub empirical_variance: f64,
    /// Per-sample classical Fisher information of the binned distribution.
    pub fisher_per_sample: f64,
    /// `1 / (n F)`.
    pub cramer_rao: f64,
    /// `empirical_variance / cramer_rao`.
    pub variance_ratio: f64,
}

/// Search bracket `Omega ± bracket_sigmas / sqrt(n F)` used by [`mle_monte_carlo`].
pub fn mle_bracket(params: &ModelParams, fisher_per_sample: f64, sample_count: usize, config: &MleConfig) -> (f64, f64) {
    let half = config.bracket_sigmas / (sample_count as f64 * fisher_per_sample).sqrt();
    (params.omega_atom - half, params.omega_atom + half)
}

fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let best = 0.5 * (a + b);
    let edge = 4.0 * tol.max((hi - lo) * 1e-9);
    if best - lo < edge || hi - best < edge {
        return Err(Error::Estimation(format!("likelihood maximum at the bracket edge [{lo}, {hi}]")));
    }
    Ok(best)
}

/// Maximum-likelihood estimation of `Omega` from `sample_count` outcomes per batch,
/// drawn by inverse-CDF sampling of the binned distribution at the true parameters.
///
/// Batch `b` uses ChaCha8 seeded with `seed` on stream `b`, so results are reproducible
/// bit for bit and independent of the thread count.
pub fn mle_monte_carlo<F>(
    provider: F,
    params: &ModelParams,
    sample_count: usize,
    seed: u64,
    config: &MleConfig,
) -> Result<EstimationRun>
where
    F: Fn(&ModelParams) -> Result<MeasurementDistribution> + Sync,
{
    if sample_count < 100 {
        return Err(invalid(format!("variance reporting needs at least 100 samples, got {sample_count}")));
    }
    if config.batches < 2 {
        return Err(invalid("need at least two batches for an empirical variance"));
    }
    let truth = provider(params)?;
    let fisher = classical_fisher_information(&provider, params, None)?.value;
    if !(fisher > 0.0) {
        return Err(Error::Estimation("distribution carries no information about Omega".into()));
    }
    let (lo, hi) = mle_bracket(params, fisher, sample_count, config);
    if lo <= 0.0 || params.with_omega_atom(lo).normal_ratio().is_err() {
        return Err(Error::Estimation(format!("search bracket [{lo}, {hi}] leaves the normal phase")));
    }
    let sampler = WeightedIndex::new(&truth.probabilities).map_err(|e| Error::Numerical(e.to_string()))?;
    let tol = config.tolerance * params.omega_atom;

    let estimates = (0..config.batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let mut counts = vec![0u32; truth.probabilities.len()];
            for _ in 0..sample_count {
                counts[sampler.sample(&mut rng)] += 1;
            }
            let observed: Vec<(usize, f64)> =
                counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c as f64)).collect();
            let log_likelihood = |omega: f64| -> Result<f64> {
                let dist = provider(&params.with_omega_atom(omega))?;
                Ok(observed.iter().map(|&(i, c)| c * dist.probabilities[i].max(1e-300).ln()).sum())
            };
            golden_section_max(log_likelihood, lo, hi, tol)
        })
        .collect::<Result<Vec<f64>>>()?;

    let b = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / b;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let crb = 1.0 / (sample_count as f64 * fisher);
    Ok(EstimationRun {
        true_omega: params.omega_atom,
        sample_count,
        seed,
        bracket: (lo, hi),
        estimates,
        mean,
        bias: mean - params.omega_atom,
        empirical_variance: var,
        fisher_per_sample: fisher,
        cramer_rao: crb,
        variance_ratio: var / crb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockcore::squeezed_mode_wavefunction;
    use crate::metrology::{qfi_fermionic_analytic, qfi_single_particle_analytic};

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 10.0)
    }

    /// Default-size grid wide enough for every Omega within ±5% of `p`.
    fn stencil_grid(p: &ModelParams, n: usize, obs: Observable) -> Grid1D {
        let lo = p.with_omega_atom(p.omega_atom * 0.95).squeeze().unwrap();
        let hi = p.with_omega_atom(p.omega_atom * 1.05).squeeze().unwrap();
        let xi = if obs == Observable::Position { lo.max(hi) } else { lo.min(hi) };
        Grid1D::default_for(xi, n, p, obs).unwrap()
    }

    fn sp_provider(n: usize, grid: Grid1D, obs: Observable) -> impl Fn(&ModelParams) -> Result<MeasurementDistribution> + Sync {
        move |p: &ModelParams| single_particle_distribution(&SqueezedFockState::new(n, p.squeeze()?)?, &grid, p, obs)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(-1.0, 1.0, 63).is_err());
        assert!(Grid1D::new(1.0, -1.0, 100).is_err());
        let g = Grid1D::new(-1.0, 1.0, 101).unwrap();
        assert!((g.spacing() - 0.02).abs() < 1e-15);
        assert_eq!(g.point(100), 1.0);
        assert_eq!(g.refined().spacing(), 0.01);
        let narrow = Grid1D::symmetric(3.0, 128).unwrap();
        assert!(matches!(
            single_particle_density(&SqueezedFockState::new(0, 0.5).unwrap(), &narrow, &unit()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn vacuum_density_is_unit_gaussian() {
        let p = unit();
        let grid = Grid1D::default_for(0.0, 0, &p, Observable::Position).unwrap();
        let d = single_particle_density(&SqueezedFockState::new(0, 0.0).unwrap(), &grid, &p).unwrap();
        let (mean, var) = d.moments().unwrap();
        assert!(mean.abs() < 1e-12);
        // a 6 sigma window drops ~2e-9 of the mass, all of it at large |x|
        assert!((var - 0.5).abs() < 1e-7, "{var}");
        assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.captured_mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn first_excited_density_has_central_node() {
        let p = unit();
        let grid = Grid1D::symmetric(10.0, 1001).unwrap();
        let d = single_particle_density(&SqueezedFockState::new(1, 0.3).unwrap(), &grid, &p).unwrap();
        assert_eq!(grid.point(500), 0.0);
        assert!(d.density(500) < 1e-30);
    }

    #[test]
    fn squeezed_variance() {
        let p = unit();
        let grid = Grid1D::default_for(0.4, 0, &p, Observable::Position).unwrap();
        let d = single_particle_density(&SqueezedFockState::new(0, 0.4).unwrap(), &grid, &p).unwrap();
        let (_, var) = d.moments().unwrap();
        assert!((var - (0.8f64).exp() / 2.0).abs() < 1e-6, "{var}");
    }

    #[test]
    fn grid_amplitudes_match_fockcore_wavefunction() {
        let p = unit();
        let state = SqueezedFockState::new(3, 0.6).unwrap();
        let grid = Grid1D::default_for(0.6, 3, &p, Observable::Position).unwrap();
        let psi = GridWavefunction::single_particle(&state, &grid, &p, Observable::Position).unwrap();
        for i in (0..grid.n_points).step_by(37) {
            let direct = squeezed_mode_wavefunction(&state, grid.point(i), 1.0, 1.0).unwrap();
            assert!((psi.amplitudes[i].re - direct).abs() < 1e-13);
        }
        assert!((psi.norm_squared() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn momentum_wavefunction_is_fourier_transform() {
        // numerical transform of the position amplitude as an independent oracle
        let p = unit();
        for (n, xi) in [(0, 0.0), (1, 0.4), (2, 0.7), (3, 0.2)] {
            let state = SqueezedFockState::new(n, xi).unwrap();
            let xs = Grid1D::symmetric(30.0, 6001).unwrap();
            for k in [-1.3, -0.2, 0.0, 0.5, 1.1] {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..xs.n_points {
                    let x = xs.point(i);
                    let psi = squeezed_mode_wavefunction(&state, x, 1.0, 1.0).unwrap();
                    acc += C64::new(0.0, -k * x).exp() * psi;
                }
                let ft = acc * xs.spacing() / (2.0 * std::f64::consts::PI).sqrt();
                let closed = momentum_wavefunction(&state, k, &p).unwrap();
                assert!((ft - closed).norm() < 1e-10, "n={n} xi={xi} p={k}: {ft} vs {closed}");
            }
        }
    }

    #[test]
    fn pair_density_properties() {
        let p = unit().with_ratio(0.6);
        let xi = p.squeeze().unwrap();
        let grid = Grid1D { n_points: 257, ..Grid1D::default_for(xi, 1, &p, Observable::Position).unwrap() };
        let fermi = ManyBodyProbe::new(Statistics::Fermionic, 2, xi).unwrap();
        let tg = ManyBodyProbe::new(Statistics::TonksGirardeau, 2, xi).unwrap();
        let df = pair_correlation_density(&fermi, &grid, &p).unwrap();
        let dt = pair_correlation_density(&tg, &grid, &p).unwrap();
        for i in 0..grid.n_points {
            assert!(df.pair_density(i, i).unwrap() < 1e-20);
            for j in (0..grid.n_points).step_by(7) {
                let a = df.pair_density(i, j).unwrap();
                assert!((a - df.pair_density(j, i).unwrap()).abs() < 1e-15);
                assert!((a - dt.pair_density(i, j).unwrap()).abs() < 1e-12);
            }
        }
        assert!((df.captured_mass - 1.0).abs() < 1e-7);
        let three = ManyBodyProbe::new(Statistics::Fermionic, 3, xi).unwrap();
        assert!(matches!(pair_correlation_density(&three, &grid, &p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cfi_vanishes_without_coupling() {
        let p = unit();
        let grid = Grid1D::default_for(0.0, 0, &p, Observable::Position).unwrap();
        let f = classical_fisher_information(sp_provider(0, grid, Observable::Position), &p, None).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn position_and_momentum_cfi_saturate_qfi() {
        let p = unit().with_ratio(0.7);
        let exact = qfi_single_particle_analytic(&p).unwrap().value;
        let mut values = Vec::new();
        for obs in [Observable::Position, Observable::Momentum] {
            let grid = stencil_grid(&p, 0, obs);
            let f = classical_fisher_information(sp_provider(0, grid, obs), &p, None).unwrap();
            assert!(f.relative_gap(exact) < 0.01, "{obs:?}: {} vs {exact}", f.value);
            assert!(f.value <= exact * 1.01);
            values.push(f.value);
        }
        assert!(relative_gap(values[0], values[1]) < 0.01);
    }

    #[test]
    fn cfi_grid_convergence() {
        let p = unit().with_ratio(0.5);
        let grid = stencil_grid(&p, 0, Observable::Position);
        let a = classical_fisher_information(sp_provider(0, grid, Observable::Position), &p, None).unwrap().value;
        let b = classical_fisher_information(sp_provider(0, grid.refined(), Observable::Position), &p, None).unwrap().value;
        assert!(relative_gap(a, b) < 1e-3);
    }

    #[test]
    fn grid_qfi_single_particle() {
        let p = unit().with_ratio(0.5);
        let grid = stencil_grid(&p, 0, Observable::Position);
        let res = grid_qfi_real_wavefunction(
            |q| GridWavefunction::single_particle(&SqueezedFockState::new(0, q.squeeze()?)?, &grid, q, Observable::Position),
            &p,
            None,
        )
        .unwrap();
        assert!(res.relative_gap(qfi_single_particle_analytic(&p).unwrap().value) < 0.01);
        assert!(res.metadata.overlap_term.unwrap().abs() < 1e-8);
    }

    #[test]
    fn grid_qfi_rejects_complex_input() {
        let grid = Grid1D::symmetric(5.0, 64).unwrap();
        let bad = |_: &ModelParams| GridWavefunction::new(vec![grid], vec![C64::new(0.1, 1e-6); 64]);
        assert!(matches!(grid_qfi_real_wavefunction(bad, &unit().with_ratio(0.3), None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pair_grid_qfi_matches_fermionic_closed_form() {
        let p = unit().with_ratio(0.5).with_n_atoms(2);
        let grid = Grid1D { n_points: 400, ..stencil_grid(&p, 1, Observable::Position) };
        let provider = |stats| {
            move |q: &ModelParams| {
                let probe = ManyBodyProbe::new(stats, 2, q.squeeze()?)?;
                GridWavefunction::pair(&probe, &grid, q, Observable::Position)
            }
        };
        let f = grid_qfi_real_wavefunction(provider(Statistics::Fermionic), &p, None).unwrap();
        let tg = grid_qfi_real_wavefunction(provider(Statistics::TonksGirardeau), &p, None).unwrap();
        assert!(f.relative_gap(qfi_fermionic_analytic(&p).unwrap().value) < 0.01);
        assert!(relative_gap(f.value, tg.value) < 1e-8);
    }

    #[test]
    fn golden_section_finds_and_rejects() {
        let x = golden_section_max(|x| Ok(-(x - 1.3f64).powi(2)), 0.0, 3.0, 1e-12).unwrap();
        assert!((x - 1.3).abs() < 1e-8);
        assert!(matches!(golden_section_max(|x| Ok(x), 0.0, 1.0, 1e-12), Err(Error::Estimation(_))));
    }

    #[test]
    fn mle_is_reproducible_and_roughly_efficient() {
        let p = ModelParams::new(1.0, 100.0).with_ratio(0.7);
        let config = MleConfig { batches: 200, bracket_sigmas: 8.0, ..Default::default() };
        let xi_wide = p.with_omega_atom(p.omega_atom * 0.8).squeeze().unwrap();
        let grid = Grid1D { n_points: 256, ..Grid1D::default_for(xi_wide, 0, &p, Observable::Position).unwrap() };
        let a = mle_monte_carlo(sp_provider(0, grid, Observable::Position), &p, 20_000, 7, &config).unwrap();
        let b = mle_monte_carlo(sp_provider(0, grid, Observable::Position), &p, 20_000, 7, &config).unwrap();
        assert_eq!(a.estimates, b.estimates);
        let c = mle_monte_carlo(sp_provider(0, grid, Observable::Position), &p, 20_000, 8, &config).unwrap();
        assert_ne!(a.estimates, c.estimates);
        // 200 batches: sampling error of the variance is about 10%
        assert!((a.variance_ratio - 1.0).abs() < 0.35, "{}", a.variance_ratio);
        assert!(mle_monte_carlo(sp_provider(0, grid, Observable::Position), &p, 50, 7, &config).is_err());
    }
}
