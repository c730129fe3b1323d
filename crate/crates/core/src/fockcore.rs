//! Truncated Fock-space and spin-1/2 operator algebra.
//!
//! Basis ordering for operators with a spin factor is `index = n * spin_dim + s`
//! with `s = 0` for spin up (`sigma_z = +1`) and `s = 1` for spin down.
//!
//! Squeezing convention: `S(xi) = exp{(xi/2) a†² - (xi/2) a²}` for real `xi`.
//! With `xi > 0` this operator stretches the position quadrature,
//! `S† x S = e^{xi} x`, so `<x²>` on `S(xi)|0>` equals `e^{2 xi} / (2 m omega)`, and the
//! position wavefunction of `S(xi)|n>` is the dilated Hermite function
//! `e^{-xi/2} phi_n(e^{-xi} x)`. Every grid-based routine in this crate relies on
//! that identity; `tests::squeezed_wavefunction_matches_fock_expansion` pins it to
//! the matrix-exponential route.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};

use crate::error::{invalid, Error, Result};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;

/// Absolute tolerance on `max |A - A†|` for an operator flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `| |psi| - 1 |` after construction of a [`StateVector`].
pub const NORM_TOL: f64 = 1e-10;
/// Largest mode index accepted by the Hermite-function recurrence.
pub const MAX_HERMITE_INDEX: usize = 500;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Complex matrix on a truncated Fock space, optionally tensored with a spin-1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    dim: usize,
    spin_dim: usize,
    data: DMatrix<C64>,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(dim: usize, spin_dim: usize, data: DMatrix<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("Fock cutoff must be positive"));
        }
        if spin_dim != 1 && spin_dim != 2 {
            return Err(invalid(format!("spin_dim must be 1 or 2, got {spin_dim}")));
        }
        let side = dim * spin_dim;
        if data.nrows() != side || data.ncols() != side {
            return Err(invalid(format!(
                "operator data is {}x{}, expected {side}x{side}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { dim, spin_dim, data, hermitian: false })
    }

    pub fn from_real(dim: usize, spin_dim: usize, data: &DMatrix<f64>) -> Result<Self> {
        Self::new(dim, spin_dim, data.map(|v| C64::new(v, 0.0)))
    }

    pub fn identity(dim: usize, spin_dim: usize) -> Self {
        let side = dim * spin_dim;
        Self { dim, spin_dim, data: DMatrix::identity(side, side), hermitian: true }
    }

    pub fn zeros(dim: usize, spin_dim: usize) -> Self {
        let side = dim * spin_dim;
        Self { dim, spin_dim, data: DMatrix::zeros(side, side), hermitian: true }
    }

    /// Fock cutoff `D` (states `|0>..|D-1>`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    /// Matrix side length, `dim * spin_dim`.
    pub fn side(&self) -> usize {
        self.dim * self.spin_dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `max |A - A†|` over all elements.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Sets the Hermiticity flag after checking it against [`HERMITIAN_TOL`].
    pub fn assert_hermitian(mut self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect >= HERMITIAN_TOL {
            return Err(Error::Numerical(format!(
                "operator is not Hermitian: max |A - A†| = {defect:e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            spin_dim: self.spin_dim,
            data: self.data.adjoint(),
            hermitian: self.hermitian,
        }
    }

    fn check_compatible(&self, rhs: &Self) -> Result<()> {
        if self.dim != rhs.dim || self.spin_dim != rhs.spin_dim {
            return Err(invalid(format!(
                "operator shapes differ: ({}, {}) vs ({}, {})",
                self.dim, self.spin_dim, rhs.dim, rhs.spin_dim
            )));
        }
        Ok(())
    }

    /// Operator product `self * rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self {
            dim: self.dim,
            spin_dim: self.spin_dim,
            data: &self.data * &rhs.data,
            hermitian: false,
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self {
            dim: self.dim,
            spin_dim: self.spin_dim,
            data: &self.data + &rhs.data,
            hermitian: self.hermitian && rhs.hermitian,
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        Ok(Self {
            dim: self.dim,
            spin_dim: self.spin_dim,
            data: &self.data - &rhs.data,
            hermitian: self.hermitian && rhs.hermitian,
        })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            spin_dim: self.spin_dim,
            data: &self.data * factor,
            hermitian: self.hermitian && factor.im == 0.0,
        }
    }

    /// `self ⊗ spin` for a pure Fock-space operator.
    pub fn tensor_spin(&self, spin: &Matrix2<C64>) -> Result<Self> {
        if self.spin_dim != 1 {
            return Err(invalid("operator already carries a spin factor"));
        }
        let d = self.dim;
        let mut out = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let v = self.data[(i, j)];
                if v == ZERO {
                    continue;
                }
                for s in 0..2 {
                    for t in 0..2 {
                        out[(2 * i + s, 2 * j + t)] = v * spin[(s, t)];
                    }
                }
            }
        }
        let spin_hermitian = (spin - spin.adjoint()).norm() == 0.0;
        Ok(Self { dim: d, spin_dim: 2, data: out, hermitian: self.hermitian && spin_hermitian })
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        if psi.dim != self.dim || psi.spin_dim != self.spin_dim {
            return Err(invalid("state and operator live on different spaces"));
        }
        Ok(&self.data * &psi.amplitudes)
    }

    /// `<psi|A|psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        let a_psi = self.apply(psi)?;
        Ok(psi.amplitudes.dotc(&a_psi))
    }

    /// `max |A - B|` restricted to Fock indices `< interior`, i.e. away from the
    /// truncation edge where ladder-operator algebra is exact.
    pub fn interior_deviation(&self, other: &DMatrix<C64>, interior: usize) -> f64 {
        let side = interior.min(self.dim) * self.spin_dim;
        let mut worst = 0.0_f64;
        for i in 0..side {
            for j in 0..side {
                worst = worst.max((self.data[(i, j)] - other[(i, j)]).norm());
            }
        }
        worst
    }
}

pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

pub fn spin_identity() -> Matrix2<C64> {
    Matrix2::identity()
}

/// Normalized state on a truncated Fock (⊗ spin) space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dim: usize,
    spin_dim: usize,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(dim: usize, spin_dim: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if dim == 0 || !(spin_dim == 1 || spin_dim == 2) {
            return Err(invalid("bad state dimensions"));
        }
        if amplitudes.len() != dim * spin_dim {
            return Err(invalid(format!(
                "expected {} amplitudes, got {}",
                dim * spin_dim,
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical("state has zero or non-finite norm".into()));
        }
        let amplitudes = amplitudes / C64::new(norm, 0.0);
        debug_assert!((amplitudes.norm() - 1.0).abs() < NORM_TOL);
        Ok(Self { dim, spin_dim, amplitudes })
    }

    /// Fock state `|n>` with cutoff `cutoff`.
    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(invalid(format!("mode {n} does not fit below cutoff {cutoff}")));
        }
        let mut amps = DVector::zeros(cutoff);
        amps[n] = ONE;
        Self::new(cutoff, 1, amps)
    }

    /// `|psi> ⊗ |down>`.
    pub fn with_spin_down(&self) -> Result<Self> {
        if self.spin_dim != 1 {
            return Err(invalid("state already carries a spin factor"));
        }
        let mut amps = DVector::zeros(2 * self.dim);
        for n in 0..self.dim {
            amps[2 * n + 1] = self.amplitudes[n];
        }
        Self::new(self.dim, 2, amps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(invalid("inner product of states on different spaces"));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Spin-down amplitudes indexed by Fock number (the whole vector when spinless).
    pub fn spin_down_component(&self) -> DVector<C64> {
        if self.spin_dim == 1 {
            return self.amplitudes.clone();
        }
        DVector::from_iterator(self.dim, (0..self.dim).map(|n| self.amplitudes[2 * n + 1]))
    }

    /// Fock-number populations, summed over spin.
    pub fn fock_populations(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|n| (0..self.spin_dim).map(|s| self.amplitudes[n * self.spin_dim + s].norm_sqr()).sum())
            .collect()
    }

    /// `<a†a>`.
    pub fn mean_number(&self) -> f64 {
        self.fock_populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Largest `|Im|` over the amplitudes.
    pub fn imaginary_residual(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real and positive.
    ///
    /// Fails when two amplitudes tie for largest magnitude with different phases,
    /// since the gauge is then ambiguous.
    pub fn phase_fixed(mut self) -> Result<Self> {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let m = a.norm();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        let lead = self.amplitudes[best];
        for (i, a) in self.amplitudes.iter().enumerate() {
            if i == best {
                continue;
            }
            let m = a.norm();
            if best_mag - m <= 1e-10 * best_mag {
                let rel = *a * lead.conj();
                if rel.im.abs() > 1e-8 * best_mag * m || rel.re < 0.0 {
                    return Err(Error::Numerical(format!(
                        "phase fixing is ambiguous: components {best} and {i} tie in magnitude"
                    )));
                }
            }
        }
        let phase = lead.conj() / C64::new(best_mag, 0.0);
        self.amplitudes *= phase;
        Ok(self)
    }
}

/// Single-particle squeezed Fock state `S(xi)|n>`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SqueezedFockState {
    pub n: usize,
    pub xi: f64,
}

impl SqueezedFockState {
    pub fn new(n: usize, xi: f64) -> Result<Self> {
        if !xi.is_finite() || xi < 0.0 {
            return Err(invalid(format!("squeeze parameter must be finite and >= 0, got {xi}")));
        }
        Ok(Self { n, xi })
    }

    /// Fock-basis amplitudes of `S(xi)|n>` at the given cutoff.
    pub fn materialize(&self, cutoff: usize) -> Result<StateVector> {
        if self.n >= cutoff {
            return Err(invalid(format!("mode {} does not fit below cutoff {cutoff}", self.n)));
        }
        let s = squeeze_operator(self.xi, cutoff)?;
        StateVector::new(cutoff, 1, s.matrix().column(self.n).into_owned())
    }
}

/// Annihilation and creation operators `(a, a†)` on `|0>..|cutoff-1>`.
pub fn ladder_operators(cutoff: usize) -> Result<(FockOperator, FockOperator)> {
    if cutoff < 2 {
        return Err(invalid(format!("ladder operators need cutoff >= 2, got {cutoff}")));
    }
    let mut a = DMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a = FockOperator::new(cutoff, 1, a)?;
    let ad = a.adjoint();
    Ok((a, ad))
}

pub fn number_operator(cutoff: usize) -> Result<FockOperator> {
    if cutoff == 0 {
        return Err(invalid("cutoff must be positive"));
    }
    let diag = DVector::from_iterator(cutoff, (0..cutoff).map(|n| C64::new(n as f64, 0.0)));
    FockOperator::new(cutoff, 1, DMatrix::from_diagonal(&diag))?.assert_hermitian()
}

/// Position and momentum `x = (a + a†)/sqrt(2 m w)`, `p = i sqrt(m w / 2)(a† - a)`.
pub fn quadratures(cutoff: usize, mass: f64, omega: f64) -> Result<(FockOperator, FockOperator)> {
    if !(mass > 0.0) || !(omega > 0.0) {
        return Err(invalid(format!("mass and omega must be positive (m={mass}, w={omega})")));
    }
    let (a, ad) = ladder_operators(cutoff)?;
    let x = a.add(&ad)?.scale(C64::new(1.0 / (2.0 * mass * omega).sqrt(), 0.0));
    let p = ad.sub(&a)?.scale(I * (mass * omega / 2.0).sqrt());
    Ok((x.assert_hermitian()?, p.assert_hermitian()?))
}

/// Real antisymmetric generator `K = (a†² - a²)/2`, so that `S(xi) = exp(xi K)`.
pub fn squeeze_generator(cutoff: usize) -> Result<DMatrix<f64>> {
    if cutoff < 2 {
        return Err(invalid(format!("squeeze generator needs cutoff >= 2, got {cutoff}")));
    }
    let mut k = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff.saturating_sub(2) {
        let v = 0.5 * (((n + 1) * (n + 2)) as f64).sqrt();
        k[(n + 2, n)] = v;
        k[(n, n + 2)] = -v;
    }
    Ok(k)
}

/// Squeeze operator `S(xi) = exp{(xi/2) a†² - (xi/2) a²}` on the truncated space.
///
/// The truncated generator is exactly antisymmetric, so the result is orthogonal to
/// rounding; truncation only shows up as disagreement with the untruncated operator
/// near the edge. Pick the cutoff with [`recommended_cutoff`] or [`converge_cutoff`].
pub fn squeeze_operator(xi: f64, cutoff: usize) -> Result<FockOperator> {
    if !xi.is_finite() {
        return Err(invalid(format!("squeeze parameter must be finite, got {xi}")));
    }
    if xi == 0.0 {
        return Ok(FockOperator::identity(cutoff.max(1), 1));
    }
    let gen = squeeze_generator(cutoff)? * xi;
    let s = gen.exp();
    FockOperator::from_real(cutoff, 1, &s)
}

/// Cutoff large enough that `S(xi)` acting on modes `<= n_max` leaves a negligible tail.
///
/// Squeezing spreads population over roughly `e^{2 xi} (2 n_max + 1)` quanta.
pub fn recommended_cutoff(xi: f64, n_max: usize) -> usize {
    let spread = (2.0 * xi.abs()).exp() * (2 * n_max + 1) as f64;
    2 * n_max + 24 + (16.0 * spread).ceil() as usize
}

/// Adaptive cutoff policy: evaluate at `D` and `ceil(1.5 D)` until the relative
/// change drops below `rel_tol`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CutoffPolicy {
    pub start: usize,
    pub rel_tol: f64,
    pub max_cutoff: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self { start: 24, rel_tol: 1e-6, max_cutoff: 4000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Converged {
    pub value: f64,
    pub cutoff: usize,
    pub rel_change: f64,
}

pub fn converge_cutoff<F>(policy: CutoffPolicy, mut target: F) -> Result<Converged>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut d = policy.start.max(2);
    let mut prev = target(d)?;
    loop {
        let next_d = (d * 3).div_ceil(2);
        if next_d > policy.max_cutoff {
            return Err(Error::Convergence(format!(
                "cutoff {next_d} exceeds the limit {} before reaching relative change {:e}",
                policy.max_cutoff, policy.rel_tol
            )));
        }
        let next = target(next_d)?;
        let scale = next.abs().max(prev.abs());
        let rel = if scale == 0.0 { 0.0 } else { (next - prev).abs() / scale };
        if rel < policy.rel_tol {
            return Ok(Converged { value: next, cutoff: next_d, rel_change: rel });
        }
        d = next_d;
        prev = next;
    }
}

/// Unit-scale Hermite functions `h_0(y)..h_{n_max}(y)` (normalized in `y`).
///
/// Uses the normalized three-term recurrence
/// `h_{n+1} = y sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1}`, which stays finite where
/// raw Hermite polynomials overflow.
pub fn hermite_functions(n_max: usize, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    hermite_functions_into(y, &mut out);
    out
}

pub(crate) fn hermite_functions_into(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    out[0] = h0;
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * y * h0;
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = y * (2.0 / (nf + 1.0)).sqrt() * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

fn check_mode(n: usize) -> Result<()> {
    if n > MAX_HERMITE_INDEX {
        return Err(Error::Unsupported(format!(
            "mode index {n} exceeds the stable recurrence range ({MAX_HERMITE_INDEX})"
        )));
    }
    Ok(())
}

/// Harmonic-oscillator eigenfunction `phi_n(x)` for mass `m` and frequency `omega`.
pub fn oscillator_wavefunction(n: usize, x: f64, mass: f64, omega: f64) -> Result<f64> {
    check_mode(n)?;
    if !(mass > 0.0) || !(omega > 0.0) {
        return Err(invalid("mass and omega must be positive"));
    }
    let mw = mass * omega;
    let h = hermite_functions(n, mw.sqrt() * x);
    Ok(mw.powf(0.25) * h[n])
}

/// Position wavefunction of `S(xi)|n>`: `e^{-xi/2} phi_n(e^{-xi} x)`. Real-valued.
pub fn squeezed_mode_wavefunction(state: &SqueezedFockState, x: f64, mass: f64, omega: f64) -> Result<f64> {
    let shrink = (-state.xi).exp();
    Ok(shrink.sqrt() * oscillator_wavefunction(state.n, shrink * x, mass, omega)?)
}

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx` (Golub-Welsch).
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > 200 {
        return Err(invalid(format!("Gauss-Hermite order must be in 1..=200, got {order}")));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}
