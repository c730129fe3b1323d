//! Spin-orbit Hamiltonians in the rotated (quantum Rabi) frame and derived quantities.
//!
//! The coupling enters only through the ratio `r = k / k_c` with `k_c = sqrt(Omega omega)`.
//! The Rabi coupling is `g = r sqrt(omega Omega) / 2`, which places the normal/stripe
//! transition exactly at `r = 1`; the effective spin-down block
//! `omega a†a - Omega/2 - (g²/Omega)(a + a†)²` then has the squeezed vacuum
//! `S(xi)|0>` with `xi = -ln(1 - r²)/4` as its ground state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fockcore::{squeeze_operator, FockOperator, StateVector, C64};

/// Largest matrix side handed to the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 4000;
/// Residual bound `|H v - lambda v|` accepted for every eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Thermal tail probability that must be dropped by the cutoff.
pub const THERMAL_TAIL_TOL: f64 = 1e-12;

/// Physical parameters in natural units (`hbar = 1`, `k_B` absorbed into `beta`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Trap frequency.
    pub omega: f64,
    /// Atomic transition frequency, the parameter being estimated.
    #[serde(rename = "Omega", alias = "omega_atom")]
    pub omega_atom: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Spin-orbit coupling strength.
    #[serde(default)]
    pub k: f64,
    /// Adiabaticity parameter of the coupling sweep.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_atoms")]
    pub n_atoms: usize,
    /// Inverse temperature; `None` is zero temperature.
    #[serde(default)]
    pub beta: Option<f64>,
}

fn default_mass() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    0.1
}

fn default_atoms() -> usize {
    1
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { omega: 1.0, omega_atom: 100.0, mass: 1.0, k: 0.0, gamma: 0.1, n_atoms: 1, beta: None }
    }
}

/// Non-fatal regime warnings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Advisory {
    /// `N omega >= Omega`: the spin-polarized ground state assumption is violated.
    NotPolarized,
    /// `gamma > 0.2`: the sweep is not safely adiabatic.
    FastSweep,
}

impl ModelParams {
    pub fn new(omega: f64, omega_atom: f64) -> Self {
        Self { omega, omega_atom, ..Self::default() }
    }

    /// Sets `k = ratio * k_c` for the current `omega` and `Omega`.
    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.k = ratio * self.critical_coupling();
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_n_atoms(mut self, n: usize) -> Self {
        self.n_atoms = n;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_beta(mut self, beta: Option<f64>) -> Self {
        self.beta = beta;
        self
    }

    /// Same parameters with `Omega` replaced and `k` held fixed (so `k/k_c` moves).
    pub fn with_omega_atom(mut self, omega_atom: f64) -> Self {
        self.omega_atom = omega_atom;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and positive, got {v}")))
            }
        };
        positive(self.omega, "omega")?;
        positive(self.omega_atom, "Omega")?;
        positive(self.mass, "mass")?;
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(invalid(format!("k must be finite and >= 0, got {}", self.k)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.n_atoms == 0 {
            return Err(invalid("n_atoms must be >= 1"));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || b.is_nan() {
                return Err(invalid(format!("beta must be positive, got {b}")));
            }
        }
        Ok(())
    }

    pub fn critical_coupling(&self) -> f64 {
        critical_coupling(self)
    }

    /// `k / k_c` without any phase check.
    pub fn coupling_ratio(&self) -> f64 {
        self.k / self.critical_coupling()
    }

    /// `k / k_c`, validated to lie in the normal phase.
    pub fn normal_ratio(&self) -> Result<f64> {
        self.validate()?;
        let r = self.coupling_ratio();
        if r >= 1.0 {
            return Err(Error::OutOfPhase { ratio: r });
        }
        Ok(r)
    }

    /// Squeeze parameter of the current coupling.
    pub fn squeeze(&self) -> Result<f64> {
        self.validate()?;
        squeeze_parameter(self.k, self.critical_coupling())
    }

    /// Rabi coupling `g` multiplying `(a + a†) sigma_x`.
    pub fn rabi_coupling(&self) -> f64 {
        0.5 * self.coupling_ratio() * self.critical_coupling()
    }

    /// Coefficient `g²/Omega` of `(a + a†)² sigma_z` in the effective Hamiltonian.
    pub fn effective_coefficient(&self) -> f64 {
        let g = self.rabi_coupling();
        g * g / self.omega_atom
    }

    /// `beta * omega`, infinite at zero temperature.
    pub fn beta_omega(&self) -> f64 {
        self.beta.map_or(f64::INFINITY, |b| b * self.omega)
    }

    pub fn advisories(&self) -> Vec<Advisory> {
        let mut out = Vec::new();
        if self.n_atoms as f64 * self.omega >= self.omega_atom {
            out.push(Advisory::NotPolarized);
        }
        if self.gamma > 0.2 {
            out.push(Advisory::FastSweep);
        }
        out
    }
}

/// `k_c = sqrt(Omega omega)` (with `m = 1`).
pub fn critical_coupling(params: &ModelParams) -> f64 {
    (params.omega_atom * params.omega).sqrt()
}

/// `xi = -ln(1 - (k/k_c)²) / 4`.
pub fn squeeze_parameter(k: f64, k_c: f64) -> Result<f64> {
    if !(k_c > 0.0) || !(k >= 0.0) {
        return Err(invalid(format!("need k >= 0 and k_c > 0 (k={k}, k_c={k_c})")));
    }
    let r = k / k_c;
    if r >= 1.0 {
        return Err(Error::OutOfPhase { ratio: r });
    }
    Ok(-0.25 * (-r * r).ln_1p())
}

/// Exact and near-critical approximations of the mean excitation number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanExcitations {
    /// `sinh² xi`.
    pub exact: f64,
    /// `(4 sqrt(1 - r²))^{-1}`, valid only close to `k_c`.
    pub approximate: f64,
}

pub fn mean_excitations(k: f64, k_c: f64) -> Result<MeanExcitations> {
    let xi = squeeze_parameter(k, k_c)?;
    let r = k / k_c;
    Ok(MeanExcitations {
        exact: xi.sinh().powi(2),
        approximate: 1.0 / (4.0 * (1.0 - r * r).sqrt()),
    })
}

/// Adiabatic ramp time `T = (2 gamma omega sqrt(1 - k_f²/k_c²))^{-1}`.
pub fn adiabatic_sweep_time(params: &ModelParams, k_f: f64) -> Result<f64> {
    params.validate()?;
    let r = k_f / params.critical_coupling();
    if !(k_f >= 0.0) {
        return Err(invalid(format!("final coupling must be >= 0, got {k_f}")));
    }
    if r >= 1.0 {
        return Err(Error::OutOfPhase { ratio: r });
    }
    Ok(1.0 / (2.0 * params.gamma * params.omega * (1.0 - r * r).sqrt()))
}

/// `(a + a†)²` with exact matrix elements on the truncated space.
fn position_squared_units(cutoff: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        m[(n, n)] = (2 * n + 1) as f64;
        if n + 2 < cutoff {
            let v = (((n + 1) * (n + 2)) as f64).sqrt();
            m[(n + 2, n)] = v;
            m[(n, n + 2)] = v;
        }
    }
    m
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 3 {
        return Err(invalid(format!("Hamiltonian cutoff must be >= 3, got {cutoff}")));
    }
    if 2 * cutoff > MAX_DENSE_DIM {
        return Err(Error::Unsupported(format!(
            "cutoff {cutoff} gives dimension {} above the dense limit {MAX_DENSE_DIM}",
            2 * cutoff
        )));
    }
    Ok(())
}

/// `H = omega a†a + g (a + a†) sigma_x + (Omega/2) sigma_z`.
pub fn build_rabi_hamiltonian(params: &ModelParams, cutoff: usize) -> Result<FockOperator> {
    params.normal_ratio()?;
    check_cutoff(cutoff)?;
    let g = params.rabi_coupling();
    let half = 0.5 * params.omega_atom;
    let mut h = DMatrix::<f64>::zeros(2 * cutoff, 2 * cutoff);
    for n in 0..cutoff {
        let e = params.omega * n as f64;
        h[(2 * n, 2 * n)] = e + half;
        h[(2 * n + 1, 2 * n + 1)] = e - half;
        if n + 1 < cutoff {
            let v = g * ((n + 1) as f64).sqrt();
            // (a + a†) sigma_x couples |n, s> with |n+1, 1-s>
            h[(2 * (n + 1), 2 * n + 1)] = v;
            h[(2 * n + 1, 2 * (n + 1))] = v;
            h[(2 * (n + 1) + 1, 2 * n)] = v;
            h[(2 * n, 2 * (n + 1) + 1)] = v;
        }
    }
    FockOperator::from_real(cutoff, 2, &h)?.assert_hermitian()
}

/// `H = omega a†a + (Omega/2) sigma_z + (g²/Omega)(a + a†)² sigma_z`.
pub fn build_effective_hamiltonian(params: &ModelParams, cutoff: usize) -> Result<FockOperator> {
    params.normal_ratio()?;
    check_cutoff(cutoff)?;
    let c = params.effective_coefficient();
    let half = 0.5 * params.omega_atom;
    let x2 = position_squared_units(cutoff);
    let mut h = DMatrix::<f64>::zeros(2 * cutoff, 2 * cutoff);
    for i in 0..cutoff {
        for j in 0..cutoff {
            let squeeze = c * x2[(i, j)];
            let (up, down) = if i == j {
                let bare = params.omega * i as f64;
                (bare + half + squeeze, bare - half - squeeze)
            } else {
                (squeeze, -squeeze)
            };
            h[(2 * i, 2 * j)] = up;
            h[(2 * i + 1, 2 * j + 1)] = down;
        }
    }
    FockOperator::from_real(cutoff, 2, &h)?.assert_hermitian()
}

/// Ascending spectrum with phase-fixed eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    pub cutoff: usize,
}

impl SpectrumResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Dense Hermitian diagonalization with a per-pair residual check.
pub fn diagonalize(op: &FockOperator) -> Result<SpectrumResult> {
    let side = op.side();
    if side > MAX_DENSE_DIM {
        return Err(Error::Unsupported(format!(
            "dimension {side} exceeds the dense eigensolver limit {MAX_DENSE_DIM}"
        )));
    }
    if op.hermiticity_defect() >= crate::fockcore::HERMITIAN_TOL {
        return Err(invalid("diagonalize expects a Hermitian operator"));
    }
    let m = op.matrix();
    let is_real = m.iter().all(|v| v.im == 0.0);
    let (values, vectors): (DVector<f64>, DMatrix<C64>) = if is_real {
        let eig = SymmetricEigen::new(m.map(|v| v.re));
        (eig.eigenvalues, eig.eigenvectors.map(|v| C64::new(v, 0.0)))
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..side).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut eigenvalues = Vec::with_capacity(side);
    let mut eigenvectors = Vec::with_capacity(side);
    for &i in &order {
        let lambda = values[i];
        let v = vectors.column(i).into_owned();
        let residual = (m * &v - &v * C64::new(lambda, 0.0)).norm();
        if residual >= RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "eigenpair residual {residual:e} above {RESIDUAL_TOL:e} for eigenvalue {lambda}"
            )));
        }
        let state = StateVector::new(op.dim(), op.spin_dim(), v)?;
        // degenerate subspaces can defeat the gauge; ground_state() insists on it
        let state = match state.clone().phase_fixed() {
            Ok(s) => s,
            Err(_) => state,
        };
        eigenvalues.push(lambda);
        eigenvectors.push(state);
    }
    Ok(SpectrumResult { eigenvalues, eigenvectors, cutoff: op.dim() })
}

/// Lowest eigenvector, phase-fixed; fails on a degenerate ground state.
pub fn ground_state(op: &FockOperator) -> Result<StateVector> {
    let spec = diagonalize(op)?;
    if spec.eigenvalues.len() > 1 && spec.eigenvalues[1] - spec.eigenvalues[0] < 1e-10 {
        return Err(Error::Numerical("ground state is degenerate".into()));
    }
    spec.eigenvectors.into_iter().next().unwrap().phase_fixed()
}

pub fn effective_ground_state(params: &ModelParams, cutoff: usize) -> Result<StateVector> {
    ground_state(&build_effective_hamiltonian(params, cutoff)?)
}

pub fn rabi_ground_state(params: &ModelParams, cutoff: usize) -> Result<StateVector> {
    ground_state(&build_rabi_hamiltonian(params, cutoff)?)
}

/// Thermal mixture of squeezed Fock states `rho = sum_n p_n S|n><n|S†`, with
/// `p_n ∝ exp(-beta n omega)` taken over the bare oscillator energies.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalState {
    pub populations: Vec<f64>,
    pub beta_omega: f64,
    pub xi: f64,
    /// Probability mass discarded above the cutoff.
    pub tail: f64,
}

impl ThermalState {
    pub fn cutoff(&self) -> usize {
        self.populations.len()
    }

    pub fn trace(&self) -> f64 {
        self.populations.iter().sum()
    }

    /// Fock-basis density matrix on `cutoff` states, squeezed by `S(xi)`.
    pub fn density_matrix(&self, cutoff: usize) -> Result<FockOperator> {
        if cutoff < self.cutoff() {
            return Err(invalid("density-matrix cutoff below the population cutoff"));
        }
        let s = squeeze_operator(self.xi, cutoff)?;
        let mut p = DVector::zeros(cutoff);
        for (n, &pn) in self.populations.iter().enumerate() {
            p[n] = C64::new(pn, 0.0);
        }
        let rho = s.matrix() * DMatrix::from_diagonal(&p) * s.matrix().adjoint();
        FockOperator::new(cutoff, 1, rho)
    }
}

/// Thermal populations on `cutoff` Fock states; errors when the discarded tail
/// `exp(-beta omega cutoff)` is not below [`THERMAL_TAIL_TOL`].
pub fn thermal_state(params: &ModelParams, cutoff: usize) -> Result<ThermalState> {
    let xi = params.squeeze()?;
    if cutoff == 0 {
        return Err(invalid("thermal cutoff must be positive"));
    }
    let bw = params.beta_omega();
    if bw.is_infinite() {
        let mut populations = vec![0.0; cutoff];
        populations[0] = 1.0;
        return Ok(ThermalState { populations, beta_omega: bw, xi, tail: 0.0 });
    }
    let q = (-bw).exp();
    let tail = q.powi(cutoff as i32);
    if tail >= THERMAL_TAIL_TOL {
        return Err(Error::Convergence(format!(
            "thermal tail {tail:e} above {THERMAL_TAIL_TOL:e} at cutoff {cutoff} (beta*omega = {bw})"
        )));
    }
    let raw: Vec<f64> = (0..cutoff).map(|n| q.powi(n as i32)).collect();
    let z: f64 = raw.iter().sum();
    let populations = raw.into_iter().map(|v| v / z).collect();
    Ok(ThermalState { populations, beta_omega: bw, xi, tail })
}

/// Smallest cutoff whose geometric tail is below `THERMAL_TAIL_TOL / 10`.
pub fn thermal_cutoff(params: &ModelParams) -> usize {
    let bw = params.beta_omega();
    if bw.is_infinite() {
        return 1;
    }
    let d = ((THERMAL_TAIL_TOL / 10.0).ln() / -bw).ceil();
    (d as usize).max(1)
}

pub fn thermal_state_adaptive(params: &ModelParams) -> Result<ThermalState> {
    thermal_state(params, thermal_cutoff(params))
}
