//! Per-cell mathematics of the two-qubit mass-conserving quantum lattice gas.
//!
//! A cell holds two qubits `|q0 q1>`; amplitude index is `2*q0 + q1`, so the
//! number operators are `n0 = diag(0,0,1,1)` and `n1 = diag(0,1,0,1)`.
//! Population `f0` streams along `c0 = -1` and `f1` along `c1 = +1`.
//!
//! Every function here is pure; nothing holds state between calls.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{QlgError, Result};

/// Below this |alpha| the equilibrium uses its symmetric limit `(rho/2, rho/2)`.
pub const ALPHA_EPS: f64 = 1e-8;

/// Slack allowed on `[0, 1]` for populations produced by floating-point
/// arithmetic (the quantum path keeps them in range exactly).
pub const POPULATION_TOL: f64 = 1e-12;

/// Euler angles of the collision unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    theta: f64,
    zeta: f64,
    xi: f64,
}

impl CollisionParams {
    pub fn new(theta: f64, zeta: f64, xi: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= FRAC_PI_2) {
            return Err(QlgError::ThetaOutOfDomain(theta));
        }
        if !zeta.is_finite() || !xi.is_finite() {
            return Err(QlgError::InvalidArgument(format!(
                "phase angles must be finite (zeta = {zeta}, xi = {xi})"
            )));
        }
        Ok(Self { theta, zeta, xi })
    }

    /// `zeta = xi = 0`.
    pub fn with_theta(theta: f64) -> Result<Self> {
        Self::new(theta, 0.0, 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `cos(zeta - xi)`, the only way the phases enter the dynamics.
    pub fn phase_factor(&self) -> f64 {
        (self.zeta - self.xi).cos()
    }

    /// `alpha = cot(theta) cos(zeta - xi)`.
    pub fn alpha(&self) -> f64 {
        self.phase_factor() / self.theta.tan()
    }
}

/// Two populations of one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationPair {
    pub f0: f64,
    pub f1: f64,
}

impl PopulationPair {
    pub fn new(f0: f64, f1: f64) -> Result<Self> {
        check_unit("f0", f0, 0.0)?;
        check_unit("f1", f1, 0.0)?;
        Ok(Self { f0, f1 })
    }

    pub fn rho(&self) -> f64 {
        self.f0 + self.f1
    }

    /// `u = f1 - f0`.
    pub fn u(&self) -> f64 {
        self.f1 - self.f0
    }
}

fn check_unit(name: &'static str, value: f64, tol: f64) -> Result<()> {
    if value >= -tol && value <= 1.0 + tol {
        Ok(())
    } else {
        Err(QlgError::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Product state of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub amplitudes: [Complex64; 4],
}

impl CellState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(QlgError::NotNormalized(n))
        }
    }
}

/// A 4x4 complex matrix acting on a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary4(pub [[Complex64; 4]; 4]);

impl Unitary4 {
    pub fn identity() -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        Unitary4(m)
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[j][i].conj();
            }
        }
        Unitary4(m)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Unitary4(m)
    }

    pub fn apply(&self, state: &CellState) -> CellState {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|k| self.0[i][k] * state.amplitudes[k]).sum();
        }
        CellState { amplitudes: out }
    }

    /// `max |(U^dagger U - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().matmul(self);
        let id = Unitary4::identity();
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        worst
    }
}

/// The most general mass-conserving collision: identity on `|00>` and
/// `|11>`, a U(2) rotation on the `{|01>, |10>}` block.
pub fn build_collision_unitary(params: &CollisionParams) -> Unitary4 {
    let (s, c) = params.theta.sin_cos();
    let e = |phi: f64| Complex64::from_polar(1.0, phi);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Unitary4([
        [one, zero, zero, zero],
        [zero, e(params.xi) * c, e(params.zeta) * s, zero],
        [zero, -e(-params.zeta) * s, e(-params.xi) * c, zero],
        [zero, zero, zero, one],
    ])
}

/// Tensor product of `sqrt(1-f)|0> + sqrt(f)|1>` for both qubits.
pub fn prepare_cell(pair: &PopulationPair) -> CellState {
    let (f0, f1) = (pair.f0.clamp(0.0, 1.0), pair.f1.clamp(0.0, 1.0));
    let amp = |x: f64| Complex64::new(x.max(0.0).sqrt(), 0.0);
    CellState {
        amplitudes: [
            amp((1.0 - f0) * (1.0 - f1)),
            amp((1.0 - f0) * f1),
            amp(f0 * (1.0 - f1)),
            amp(f0 * f1),
        ],
    }
}

/// Expectation values of `n0` and `n1`.
pub fn measure_populations(state: &CellState) -> Result<PopulationPair> {
    state.check_normalized()?;
    let p: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    Ok(PopulationPair {
        f0: p[2] + p[3],
        f1: p[1] + p[3],
    })
}

/// Collision through the state vector: prepare, apply `U`, measure.
pub fn collide_quantum(pair: &PopulationPair, params: &CollisionParams) -> Result<PopulationPair> {
    let u = build_collision_unitary(params);
    measure_populations(&u.apply(&prepare_cell(pair)))
}

/// Collision term added to `f1` (and subtracted from `f0`).
pub fn omega(pair: &PopulationPair, params: &CollisionParams) -> f64 {
    omega_raw(
        pair.f0,
        pair.f1,
        params.theta.sin().powi(2),
        (2.0 * params.theta).sin() * params.phase_factor(),
    )
}

/// Inner form of [`omega`] with the trigonometric factors precomputed:
/// `sin2 = sin^2(theta)`, `mix = sin(2 theta) cos(zeta - xi)`.
#[inline]
pub(crate) fn omega_raw(f0: f64, f1: f64, sin2: f64, mix: f64) -> f64 {
    let prod = (f0 * (1.0 - f0) * f1 * (1.0 - f1)).max(0.0);
    (f0 - f1) * sin2 + mix * prod.sqrt()
}

/// Closed-form collision `(f0 - Omega, f1 + Omega)`.
///
/// Results outside `[0, 1]` by more than [`POPULATION_TOL`] are reported,
/// never clamped.
pub fn collide_closed_form(pair: &PopulationPair, params: &CollisionParams) -> Result<PopulationPair> {
    let om = omega(pair, params);
    let out = PopulationPair {
        f0: pair.f0 - om,
        f1: pair.f1 + om,
    };
    check_post_collision(&out, None)?;
    Ok(out)
}

pub(crate) fn check_post_collision(pair: &PopulationPair, site: Option<(usize, usize)>) -> Result<()> {
    for (index, value) in [(0, pair.f0), (1, pair.f1)] {
        if !(-POPULATION_TOL..=1.0 + POPULATION_TOL).contains(&value) {
            return Err(QlgError::PopulationOutOfRange { index, value, site });
        }
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=2.0).contains(&rho) {
        Ok(())
    } else {
        Err(QlgError::OutOfRange {
            name: "rho",
            value: rho,
            lo: 0.0,
            hi: 2.0,
        })
    }
}

/// Half the equilibrium momentum, `u_eq / 2`, for a given `alpha`.
///
/// Written as `alpha (1 - (rho-1)^2) / (2 (sqrt(1+a^2) + sqrt(1+a^2 (rho-1)^2)))`,
/// which is the rationalized difference of square roots and stays accurate as
/// `alpha -> 0`.
fn half_momentum(rho: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let d = rho - 1.0;
    let big = (1.0 + a2).sqrt();
    let small = (1.0 + a2 * d * d).sqrt();
    0.5 * alpha * (1.0 - d * d) / (big + small)
}

/// Populations with `Omega = 0` at density `rho`.
///
/// `f1 - f0 = (1/alpha)(sqrt(1+alpha^2) - sqrt(1+alpha^2 (rho-1)^2))`: for
/// `alpha > 0` the `+c` population carries the larger share.
pub fn equilibrium(rho: f64, params: &CollisionParams) -> Result<PopulationPair> {
    check_rho(rho)?;
    Ok(equilibrium_unchecked(rho, params.alpha()))
}

pub(crate) fn equilibrium_unchecked(rho: f64, alpha: f64) -> PopulationPair {
    if alpha.abs() < ALPHA_EPS {
        return PopulationPair {
            f0: 0.5 * rho,
            f1: 0.5 * rho,
        };
    }
    let h = half_momentum(rho, alpha);
    PopulationPair {
        f0: 0.5 * rho - h,
        f1: 0.5 * rho + h,
    }
}

/// Equilibrium momentum `u = f1_eq - f0_eq`.
pub fn momentum_eq(rho: f64, params: &CollisionParams) -> Result<f64> {
    check_rho(rho)?;
    let alpha = params.alpha();
    if alpha.abs() < ALPHA_EPS {
        return Ok(0.0);
    }
    Ok(2.0 * half_momentum(rho, alpha))
}

/// `J1 - J0` with `J_i = dOmega/df_i` at equilibrium:
/// `-2 sin^2(theta) sqrt(alpha^2+1) sqrt(alpha^2+1 - 2 alpha^2 rho + alpha^2 rho^2)`.
pub fn jacobian_gap(rho: f64, params: &CollisionParams) -> Result<f64> {
    check_rho(rho)?;
    let a2 = params.alpha().powi(2);
    let q = a2 + 1.0 - 2.0 * a2 * rho + a2 * rho * rho;
    Ok(-2.0 * params.theta.sin().powi(2) * (a2 + 1.0).sqrt() * q.sqrt())
}

/// Macroscopic coefficients of the 1D mass-preserving lattice gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients1D {
    /// Advection speed `c_s = (dx/dt) alpha`.
    pub c_s: f64,
    /// Corrected viscosity.
    pub nu: f64,
    /// Viscosity of the original formulation, `(dx^2/dt) cot^2(theta) / 2`.
    pub nu_yepez: f64,
}

pub fn predicted_coefficients_1d(params: &CollisionParams, dx: f64, dt: f64) -> Result<PdeCoefficients1D> {
    if !(dx > 0.0 && dt > 0.0) {
        return Err(QlgError::InvalidArgument(format!(
            "dx and dt must be positive (dx = {dx}, dt = {dt})"
        )));
    }
    let alpha = params.alpha();
    let sin2 = params.theta.sin().powi(2);
    let diff = dx * dx / dt;
    let nu = -diff * 0.5 * (1.0 - 1.0 / (sin2 * (alpha * alpha + 1.0).sqrt()));
    let cot = 1.0 / params.theta.tan();
    Ok(PdeCoefficients1D {
        c_s: dx / dt * alpha,
        nu,
        nu_yepez: diff * cot * cot / 2.0,
    })
}
