//! Quantum Fisher information for the frequency `Omega`.
//!
//! Convention: `I = 4 (<d psi|d psi> - |<psi|d psi>|²) = 4 Var(sum_j h_j)` on every
//! route, so generator variances, finite differences and the closed forms agree
//! without hidden factors of four.
//!
//! The local generator is `h = -i c (a†² - a²)` with `c = r² / (8 Omega (1 - r²))`,
//! `r = k/k_c`. It generates the `Omega` dependence of `S(xi(Omega))` and commutes
//! with the squeeze operator, so its moments on `S(xi)|n>` equal those on `|n>`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockcore::{squeeze_operator, FockOperator, StateVector, C64};
use crate::models::{adiabatic_sweep_time, thermal_state_adaptive, ModelParams};

/// Largest probe handled by the single-particle-matrix-element route.
pub const MAX_COMBINATORIAL_ATOMS: usize = 12;
/// Largest probe handled by the explicit tensor-product route.
pub const MAX_TENSOR_ATOMS: usize = 4;
const MAX_TENSOR_AMPLITUDES: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Fermionic,
    /// Excited, symmetrized bosonic state occupying the same modes as the fermions.
    SymmetricBosonic,
    /// Modulus of the fermionic wavefunction; shares its generator moments.
    TonksGirardeau,
}

impl Statistics {
    fn exchange_sign(self) -> f64 {
        match self {
            Statistics::Fermionic | Statistics::TonksGirardeau => -1.0,
            Statistics::SymmetricBosonic => 1.0,
        }
    }
}

/// N-particle probe built from squeezed single-particle modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyProbe {
    pub statistics: Statistics,
    modes: Vec<usize>,
    pub xi: f64,
}

impl ManyBodyProbe {
    /// Probe occupying the lowest `n_atoms` modes `0..N`.
    pub fn new(statistics: Statistics, n_atoms: usize, xi: f64) -> Result<Self> {
        Self::with_modes(statistics, (0..n_atoms).collect(), xi)
    }

    pub fn with_modes(statistics: Statistics, modes: Vec<usize>, xi: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(invalid("probe needs at least one occupied mode"));
        }
        let mut sorted = modes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != modes.len() {
            return Err(invalid(format!("mode set {modes:?} has repeats")));
        }
        if !xi.is_finite() || xi < 0.0 {
            return Err(invalid(format!("squeeze parameter must be finite and >= 0, got {xi}")));
        }
        Ok(Self { statistics, modes, xi })
    }

    /// Default-mode probe for the atom number and squeezing of `params`.
    pub fn for_params(statistics: Statistics, params: &ModelParams) -> Result<Self> {
        Self::new(statistics, params.n_atoms, params.squeeze()?)
    }

    pub fn n_atoms(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FisherMethod {
    Analytic,
    GeneratorVariance,
    FiniteDifference,
    MixedSpectral,
    Grid,
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceRoute {
    /// Pairwise sums over single-particle matrix elements, O(N²) scalars.
    Combinatorial,
    /// Explicitly (anti)symmetrized N-particle vector; oracle only.
    TensorProduct,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FisherMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Relative difference between the step-`h` and step-`2h` estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub richardson_rel_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<VarianceRoute>,
    /// `<psi|d psi>` term of a real-wavefunction QFI; zero for normalized families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_term: Option<f64>,
    /// Value of the printed closed form when it differs from the returned oracle value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub printed_value: Option<f64>,
    /// Value of an independent route when the returned value is a printed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_value: Option<f64>,
    /// Sweep time `T` used in a time-normalized expression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_time: Option<f64>,
    /// `value / T²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_normalized: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub value: f64,
    pub method: FisherMethod,
    pub omega_atom: f64,
    pub k_over_kc: f64,
    pub n_atoms: usize,
    pub metadata: FisherMetadata,
}

impl FisherResult {
    pub fn new(value: f64, method: FisherMethod, params: &ModelParams) -> Self {
        Self {
            value,
            method,
            omega_atom: params.omega_atom,
            k_over_kc: params.coupling_ratio(),
            n_atoms: params.n_atoms,
            metadata: FisherMetadata::default(),
        }
    }

    pub fn with_metadata(mut self, metadata: FisherMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn relative_gap(&self, other: f64) -> f64 {
        relative_gap(self.value, other)
    }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `c = r² / (8 Omega (1 - r²))`, the scale of the local generator.
pub fn generator_prefactor(params: &ModelParams) -> Result<f64> {
    let r = params.normal_ratio()?;
    let r2 = r * r;
    Ok(r2 / (8.0 * params.omega_atom * (1.0 - r2)))
}

/// Common factor `r⁴ / (Omega² (1 - r²)²)` of every closed form.
pub fn analytic_prefactor(params: &ModelParams) -> Result<f64> {
    let r = params.normal_ratio()?;
    let r2 = r * r;
    Ok(r2 * r2 / (params.omega_atom.powi(2) * (1.0 - r2).powi(2)))
}

/// Single-particle matrix element `<m|h|n>` of the untruncated generator.
pub fn generator_element(params: &ModelParams, m: usize, n: usize) -> Result<C64> {
    let c = generator_prefactor(params)?;
    Ok(if m == n + 2 {
        C64::new(0.0, -c * (((n + 1) * (n + 2)) as f64).sqrt())
    } else if n == m + 2 {
        C64::new(0.0, c * ((n * (n - 1)) as f64).sqrt())
    } else {
        C64::new(0.0, 0.0)
    })
}

/// Local generator `h` on `|0>..|cutoff-1>`; couples only `|n> <-> |n±2>`.
pub fn local_generator(params: &ModelParams, cutoff: usize) -> Result<FockOperator> {
    if cutoff < 3 {
        return Err(invalid(format!("generator cutoff must be >= 3, got {cutoff}")));
    }
    let mut h = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff - 2 {
        h[(n + 2, n)] = generator_element(params, n + 2, n)?;
        h[(n, n + 2)] = generator_element(params, n, n + 2)?;
    }
    FockOperator::new(cutoff, 1, h)?.assert_hermitian()
}

/// `r⁴ / (8 Omega² (1 - r²)²)`: one atom in the squeezed vacuum.
pub fn qfi_single_particle_analytic(params: &ModelParams) -> Result<FisherResult> {
    let value = analytic_prefactor(params)? / 8.0;
    Ok(FisherResult::new(value, FisherMethod::Analytic, &params.with_n_atoms(1)))
}

/// `N² r⁴ / (8 Omega² (1 - r²)²)` for the polarized Fermi sea.
pub fn qfi_fermionic_analytic(params: &ModelParams) -> Result<FisherResult> {
    let n = params.n_atoms as f64;
    let value = n * n * analytic_prefactor(params)? / 8.0;
    Ok(FisherResult::new(value, FisherMethod::Analytic, params))
}

/// Numerators over 24 of the one-body and exchange contributions for `N` fermions:
/// `N (N² + 2)` and `-(N - 2)(N - 1) N`. Their sum is `3 N²`.
pub fn fermionic_contribution_polynomials(n_atoms: u64) -> (i128, i128) {
    let n = n_atoms as i128;
    (n * (n * n + 2), -(n - 2) * (n - 1) * n)
}

/// The one-body and exchange contributions to the fermionic QFI, in that order.
pub fn qfi_fermionic_contributions(params: &ModelParams) -> Result<(f64, f64)> {
    let pref = analytic_prefactor(params)?;
    let (first, second) = fermionic_contribution_polynomials(params.n_atoms as u64);
    Ok((pref * first as f64 / 24.0, pref * second as f64 / 24.0))
}

/// Exact polynomial `r⁴ (N³/2 - 6N²/8 + N) / (6 Omega² (1 - r²)²)` for the symmetrized
/// excited bosonic state.
pub fn qfi_bosonic_excited_analytic(params: &ModelParams) -> Result<FisherResult> {
    let n = params.n_atoms as f64;
    let poly = 0.5 * n.powi(3) - 6.0 / 8.0 * n * n + n;
    let value = analytic_prefactor(params)? * poly / 6.0;
    Ok(FisherResult::new(value, FisherMethod::Analytic, params))
}

/// Large-N time-normalized form `gamma² omega² r⁴ N³ T² / (6 Omega² (1 - r²))`,
/// evaluated with the sweep time for `k_f`.
///
/// After substituting `T` this is `r⁴ N³ / (24 Omega² (1 - r²)²)`, half the leading
/// term of [`qfi_bosonic_excited_analytic`]; both are kept as written.
pub fn qfi_bosonic_asymptotic(params: &ModelParams, k_f: f64) -> Result<FisherResult> {
    let at = params.with_k(k_f);
    let r = at.normal_ratio()?;
    let t = adiabatic_sweep_time(&at, k_f)?;
    let n = at.n_atoms as f64;
    let r2 = r * r;
    let value = (at.gamma * at.omega).powi(2) * r2 * r2 * n.powi(3) * t * t
        / (6.0 * at.omega_atom.powi(2) * (1.0 - r2));
    let meta = FisherMetadata { sweep_time: Some(t), time_normalized: Some(value / (t * t)), ..Default::default() };
    Ok(FisherResult::new(value, FisherMethod::Analytic, &at).with_metadata(meta))
}

/// Second moment `<n|h²|n>` of the local generator in mode `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerModeMoment {
    /// From generator matrix elements: `2 (1 + n + n²) c²`.
    pub oracle: f64,
    /// Printed coefficient `(1 + n + n²) / (64 Omega²) * r⁴/(1 - r²)²`.
    pub printed: f64,
    pub agrees: bool,
}

pub fn per_mode_second_moment(params: &ModelParams, n: usize) -> Result<PerModeMoment> {
    let c = generator_prefactor(params)?;
    let poly = (1 + n + n * n) as f64;
    let oracle = 2.0 * poly * c * c;
    let printed = poly / 64.0 * analytic_prefactor(params)?;
    Ok(PerModeMoment { oracle, printed, agrees: relative_gap(oracle, printed) < 1e-12 })
}

/// `4 Var(sum_j h_j)` on a many-body probe.
pub fn qfi_collective_variance(
    probe: &ManyBodyProbe,
    params: &ModelParams,
    cutoff: usize,
    route: VarianceRoute,
) -> Result<FisherResult> {
    let variance = match route {
        VarianceRoute::Combinatorial => combinatorial_variance(probe, params, cutoff)?,
        VarianceRoute::TensorProduct => tensor_product_variance(probe, params, cutoff)?,
    };
    let meta = FisherMetadata { cutoff: Some(cutoff), route: Some(route), ..Default::default() };
    let p = params.with_n_atoms(probe.n_atoms());
    Ok(FisherResult::new(4.0 * variance.max(0.0), FisherMethod::GeneratorVariance, &p).with_metadata(meta))
}

fn combinatorial_variance(probe: &ManyBodyProbe, params: &ModelParams, cutoff: usize) -> Result<f64> {
    if probe.n_atoms() > MAX_COMBINATORIAL_ATOMS {
        return Err(Error::Unsupported(format!(
            "combinatorial route handles N <= {MAX_COMBINATORIAL_ATOMS}, got {}",
            probe.n_atoms()
        )));
    }
    let top = *probe.modes().iter().max().unwrap();
    if cutoff < top + 3 {
        return Err(Error::Convergence(format!(
            "cutoff {cutoff} cannot hold h|{top}> (needs >= {})",
            top + 3
        )));
    }
    let h = local_generator(params, cutoff)?;
    let m = h.matrix();
    let modes = probe.modes();
    let sign = probe.statistics.exchange_sign();

    let mut one_body = 0.0;
    let mut mean = C64::new(0.0, 0.0);
    for &a in modes {
        one_body += (0..cutoff).map(|k| m[(k, a)].norm_sqr()).sum::<f64>();
        mean += m[(a, a)];
    }
    let mut two_body = C64::new(0.0, 0.0);
    for &a in modes {
        for &b in modes {
            if a != b {
                two_body += m[(a, a)] * m[(b, b)] + m[(a, b)] * m[(b, a)] * sign;
            }
        }
    }
    Ok(one_body + two_body.re - mean.norm_sqr())
}

/// Every permutation of `0..n` with its parity sign (Heap's algorithm).
fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = vec![(perm.clone(), 1.0)];
    let mut c = vec![0; n];
    let mut sign = 1.0;
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            out.push((perm.clone(), sign));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Applies a single-site operator to site `site` of an `n`-site product space.
fn apply_on_site(op: &DMatrix<C64>, psi: &[C64], d: usize, n: usize, site: usize) -> Vec<C64> {
    let stride = d.pow((n - 1 - site) as u32);
    let blocks = d.pow(site as u32);
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    let mut fiber = vec![C64::new(0.0, 0.0); d];
    for outer in 0..blocks {
        let base = outer * d * stride;
        for inner in 0..stride {
            for (i, f) in fiber.iter_mut().enumerate() {
                *f = psi[base + i * stride + inner];
            }
            for row in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (col, f) in fiber.iter().enumerate() {
                    let v = op[(row, col)];
                    if v.re != 0.0 || v.im != 0.0 {
                        acc += v * f;
                    }
                }
                out[base + row * stride + inner] = acc;
            }
        }
    }
    out
}

/// (Anti)symmetrized product of squeezed orbitals `S(xi)|a>`, normalized.
pub fn symmetrized_probe_state(probe: &ManyBodyProbe, cutoff: usize) -> Result<Vec<C64>> {
    let n = probe.n_atoms();
    if n > MAX_TENSOR_ATOMS {
        return Err(Error::Unsupported(format!(
            "tensor-product route handles N <= {MAX_TENSOR_ATOMS}, got {n}"
        )));
    }
    let top = *probe.modes().iter().max().unwrap();
    if cutoff < top + 3 {
        return Err(Error::Convergence(format!("cutoff {cutoff} too small for mode {top}")));
    }
    let len = cutoff
        .checked_pow(n as u32)
        .filter(|&l| l <= MAX_TENSOR_AMPLITUDES)
        .ok_or_else(|| Error::Unsupported(format!("{cutoff}^{n} amplitudes is too many")))?;
    let s = squeeze_operator(probe.xi, cutoff)?;
    let orbitals: Vec<DVector<C64>> = probe.modes().iter().map(|&a| s.matrix().column(a).into_owned()).collect();
    let sign = probe.statistics.exchange_sign();

    let mut psi = vec![C64::new(0.0, 0.0); len];
    for (perm, parity) in permutations(n) {
        let weight = if sign < 0.0 { parity } else { 1.0 };
        // product over sites j of orbital perm[j] evaluated at digit j
        let mut digits = vec![0usize; n];
        for amp in psi.iter_mut() {
            let mut prod = C64::new(weight, 0.0);
            for (j, &dj) in digits.iter().enumerate() {
                prod *= orbitals[perm[j]][dj];
                if prod.re == 0.0 && prod.im == 0.0 {
                    break;
                }
            }
            *amp += prod;
            for j in (0..n).rev() {
                digits[j] += 1;
                if digits[j] < cutoff {
                    break;
                }
                digits[j] = 0;
            }
        }
    }
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Numerical("symmetrized state vanished".into()));
    }
    for a in psi.iter_mut() {
        *a /= norm;
    }
    Ok(psi)
}

fn tensor_product_variance(probe: &ManyBodyProbe, params: &ModelParams, cutoff: usize) -> Result<f64> {
    let n = probe.n_atoms();
    let psi = symmetrized_probe_state(probe, cutoff)?;
    let h = local_generator(params, cutoff)?;
    let mut h_psi = vec![C64::new(0.0, 0.0); psi.len()];
    for site in 0..n {
        let part = apply_on_site(h.matrix(), &psi, cutoff, n, site);
        for (acc, v) in h_psi.iter_mut().zip(part) {
            *acc += v;
        }
    }
    let mean: C64 = psi.iter().zip(&h_psi).map(|(a, b)| a.conj() * b).sum();
    let second: f64 = h_psi.iter().map(|v| v.norm_sqr()).sum();
    Ok(second - mean.norm_sqr())
}

/// Default finite-difference step `1e-4 Omega`.
pub fn default_step(params: &ModelParams) -> f64 {
    1e-4 * params.omega_atom
}

fn fd_qfi(minus: &StateVector, center: &StateVector, plus: &StateVector, step: f64) -> Result<f64> {
    let deriv = (plus.amplitudes() - minus.amplitudes()) / C64::new(2.0 * step, 0.0);
    let overlap = center.amplitudes().dotc(&deriv);
    Ok(4.0 * (deriv.norm_squared() - overlap.norm_sqr()).max(0.0))
}

/// Pure-state QFI `4 (<d psi|d psi> - |<psi|d psi>|²)` by central differences in `Omega`
/// with `k` held fixed. A second estimate at twice the step gates the result: a
/// disagreement above 1% is reported as a note.
pub fn qfi_finite_difference<F>(provider: F, params: &ModelParams, step: Option<f64>) -> Result<FisherResult>
where
    F: Fn(&ModelParams) -> Result<StateVector>,
{
    params.normal_ratio()?;
    let h = step.unwrap_or_else(|| default_step(params));
    if !(h > 0.0) || h >= params.omega_atom / 4.0 {
        return Err(invalid(format!("finite-difference step {h} out of range")));
    }
    let at = |delta: f64| provider(&params.with_omega_atom(params.omega_atom + delta));
    let center = at(0.0)?;
    let (m1, p1) = (at(-h)?, at(h)?);
    let (m2, p2) = (at(-2.0 * h)?, at(2.0 * h)?);
    let fine = fd_qfi(&m1, &center, &p1, h)?;
    let coarse = fd_qfi(&m2, &center, &p2, 2.0 * h)?;
    let rich = relative_gap(fine, coarse);
    let mut meta = FisherMetadata {
        cutoff: Some(center.dim()),
        step: Some(h),
        richardson_rel_diff: Some(rich),
        ..Default::default()
    };
    if rich > 0.01 {
        meta.notes.push(format!("step {h:e} may be too large: h vs 2h estimates differ by {rich:.3e}"));
    }
    Ok(FisherResult::new(fine, FisherMethod::FiniteDifference, params).with_metadata(meta))
}

/// Mixed-state QFI `2 sum_{n,m} (p_n - p_m)² / (p_n + p_m) |<n|h|m>|²` for a state
/// diagonal in the basis of `h`. Populations beyond `populations.len()` are zero.
pub fn qfi_mixed_spectral(populations: &[f64], h: &FockOperator) -> Result<FisherResult> {
    if h.spin_dim() != 1 {
        return Err(invalid("mixed-state QFI expects a spinless generator"));
    }
    if populations.len() > h.dim() {
        return Err(invalid("generator cutoff is smaller than the population vector"));
    }
    if populations.iter().any(|&p| !(p >= 0.0)) {
        return Err(invalid("populations must be non-negative"));
    }
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(invalid(format!("populations sum to {total}, not 1")));
    }
    let p = |n: usize| populations.get(n).copied().unwrap_or(0.0);
    let m = h.matrix();
    let mut sum = 0.0;
    for a in 0..h.dim() {
        for b in 0..h.dim() {
            let (pa, pb) = (p(a), p(b));
            let denom = pa + pb;
            if denom < 1e-15 {
                continue;
            }
            let el = m[(a, b)].norm_sqr();
            if el != 0.0 {
                sum += (pa - pb).powi(2) / denom * el;
            }
        }
    }
    let mut result = FisherResult {
        value: 2.0 * sum,
        method: FisherMethod::MixedSpectral,
        omega_atom: f64::NAN,
        k_over_kc: f64::NAN,
        n_atoms: 1,
        metadata: FisherMetadata { cutoff: Some(h.dim()), ..Default::default() },
    };
    if populations.len() + 2 > h.dim() {
        result.metadata.notes.push("generator cutoff clips transitions out of the top populated states".into());
    }
    Ok(result)
}

/// Spectral-sum QFI of the single-atom thermal state of `params`.
pub fn qfi_thermal_spectral(params: &ModelParams) -> Result<FisherResult> {
    let thermal = thermal_state_adaptive(params)?;
    let h = local_generator(params, thermal.cutoff() + 2)?;
    let mut res = qfi_mixed_spectral(&thermal.populations, &h)?;
    res.omega_atom = params.omega_atom;
    res.k_over_kc = params.coupling_ratio();
    Ok(res)
}

/// Printed temperature factor `(tanh(b w) + 1) / tanh²(b w / 2)`; 2 at zero temperature.
pub fn thermal_factor_printed(beta_omega: f64) -> f64 {
    if beta_omega.is_infinite() {
        return 2.0;
    }
    (beta_omega.tanh() + 1.0) / (0.5 * beta_omega).tanh().powi(2)
}

/// Closed form of the normalized geometric sum, `2 (1 + q)² / (1 + q²)` with
/// `q = exp(-b w)`. Bounded by 4 as the temperature grows.
pub fn thermal_factor_geometric(beta_omega: f64) -> f64 {
    let q = (-beta_omega).exp();
    2.0 * (1.0 + q).powi(2) / (1.0 + q * q)
}

/// Printed thermal closed form `prefactor / 16 * (tanh(b w) + 1) / tanh²(b w / 2)`.
///
/// The spectral sum over normalized Boltzmann populations evaluates instead to
/// `prefactor / 16 * 2 (1 + q)² / (1 + q²)`; that value is attached as
/// `metadata.oracle_value`. The two agree only as `b w -> inf`.
pub fn qfi_thermal_closed_form(params: &ModelParams) -> Result<FisherResult> {
    let pref = analytic_prefactor(params)? / 16.0;
    let bw = params.beta_omega();
    let printed = pref * thermal_factor_printed(bw);
    let oracle = pref * thermal_factor_geometric(bw);
    let mut meta = FisherMetadata { oracle_value: Some(oracle), ..Default::default() };
    if relative_gap(printed, oracle) > 1e-12 {
        meta.notes.push(format!(
            "printed closed form exceeds the normalized spectral sum by {:.6e} (relative)",
            relative_gap(printed, oracle)
        ));
    }
    Ok(FisherResult::new(printed, FisherMethod::Analytic, &params.with_n_atoms(1)).with_metadata(meta))
}

/// Thermal QFI from the normalized geometric-series closed form.
pub fn qfi_thermal_geometric(params: &ModelParams) -> Result<FisherResult> {
    let pref = analytic_prefactor(params)? / 16.0;
    let bw = params.beta_omega();
    let meta = FisherMetadata { printed_value: Some(pref * thermal_factor_printed(bw)), ..Default::default() };
    Ok(FisherResult::new(pref * thermal_factor_geometric(bw), FisherMethod::Analytic, &params.with_n_atoms(1))
        .with_metadata(meta))
}

/// Fermionic QFI rewritten with the sweep time:
/// `gamma² omega² r_f⁴ N² T² / (2 Omega² (1 - r_f²))`.
pub fn time_normalized_qfi(params: &ModelParams, k_f: f64) -> Result<FisherResult> {
    let at = params.with_k(k_f);
    let r = at.normal_ratio()?;
    let t = adiabatic_sweep_time(&at, k_f)?;
    let n = at.n_atoms as f64;
    let r2 = r * r;
    let value = (at.gamma * at.omega).powi(2) * r2 * r2 * n * n * t * t
        / (2.0 * at.omega_atom.powi(2) * (1.0 - r2));
    let meta = FisherMetadata { sweep_time: Some(t), time_normalized: Some(value / (t * t)), ..Default::default() };
    Ok(FisherResult::new(value, FisherMethod::Analytic, &at).with_metadata(meta))
}

/// Standard-quantum-limit and Heisenberg-limit comparison for a sweep to `k_f`.
///
/// Thresholds hold only up to numerical factors; read the margins, not just the flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub k_f_over_kc: f64,
    pub sweep_time: f64,
    pub qfi: f64,
    /// `I / (N T²)` with the `r⁴` factor kept.
    pub sql_ratio: f64,
    /// `gamma² omega² N / (2 Omega² (1 - r²))`, the `r -> 1` form.
    pub sql_margin: f64,
    pub sql_beaten: bool,
    /// `I / (N² T²)` for the fermionic probe.
    pub heisenberg_ratio_fermionic: f64,
    /// `I / (N² T²)` for the asymptotic excited bosonic probe.
    pub heisenberg_ratio_bosonic: f64,
    pub mean_excitations: f64,
    /// `(Omega/omega)^{1/3}`.
    pub excitation_ceiling: f64,
    pub squeezing_within_ceiling: bool,
    /// Largest `k_f/k_c` compatible with the ceiling.
    pub k_f_over_kc_ceiling: f64,
    /// `Omega^{4/3} / (gamma² omega^{4/3})`.
    pub n_min: f64,
}

pub fn sql_hl_thresholds(params: &ModelParams, k_f: f64) -> Result<ThresholdReport> {
    let at = params.with_k(k_f);
    let r = at.normal_ratio()?;
    let t = adiabatic_sweep_time(&at, k_f)?;
    let qfi = time_normalized_qfi(params, k_f)?.value;
    let bos = qfi_bosonic_asymptotic(params, k_f)?.value;
    let n = at.n_atoms as f64;
    let r2 = r * r;
    let ratio = at.omega_atom / at.omega;
    let sql_margin = at.gamma.powi(2) * n / (2.0 * ratio * ratio * (1.0 - r2));
    let mean_excitations = 1.0 / (4.0 * (1.0 - r2).sqrt());
    let ceiling = ratio.cbrt();
    Ok(ThresholdReport {
        k_f_over_kc: r,
        sweep_time: t,
        qfi,
        sql_ratio: qfi / (n * t * t),
        sql_margin,
        sql_beaten: sql_margin > 1.0,
        heisenberg_ratio_fermionic: qfi / (n * n * t * t),
        heisenberg_ratio_bosonic: bos / (n * n * t * t),
        mean_excitations,
        excitation_ceiling: ceiling,
        squeezing_within_ceiling: mean_excitations < ceiling,
        k_f_over_kc_ceiling: (1.0 - 1.0 / (16.0 * ceiling * ceiling)).max(0.0).sqrt(),
        n_min: ratio.powf(4.0 / 3.0) / at.gamma.powi(2),
    })
}
