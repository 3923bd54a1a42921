//! Explicit finite-difference reference for the macroscopic equations
//!
//! ```text
//! 1D:  d_t rho + c_s (1 - rho) d_x rho = nu d_xx rho
//! 2D:  d_t rho + a.grad rho + b.[(1 - rho) grad rho] = div(D grad rho)
//! ```
//!
//! Forward Euler in time, central differences in space (the mixed derivative
//! uses the 4-point corner stencil), periodic boundaries. A step of length
//! `dt` is split into equal sub-steps whenever
//! `max|d| dt/ds + 2 max eig(D) dt/ds^2 > 0.5`, with `d` the local advection
//! velocity. The advection term is kept in the non-conservative form above.

use rayon::prelude::*;

use crate::error::{QlgError, Result};
use crate::lattice::PdeCoefficients2D;
use crate::snapshot::CsvTable;

/// Stability bound the sub-stepping keeps each sub-step under.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Growth beyond `DIVERGENCE_FACTOR * rho_a` away from `rho_b` counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

const PAR_MIN_SITES: usize = 4096;

fn substeps(bound: f64) -> usize {
    if bound <= STABILITY_LIMIT || !bound.is_finite() {
        1
    } else {
        (bound / STABILITY_LIMIT).ceil() as usize
    }
}

fn check_divergence(rho: &[f64], rho_b: f64, rho_a: f64, step: usize) -> Result<()> {
    let limit = DIVERGENCE_FACTOR * rho_a.abs();
    let bad = rho
        .iter()
        .any(|r| !r.is_finite() || (rho_a != 0.0 && (r - rho_b).abs() > limit));
    if bad {
        Err(QlgError::Diverged { step })
    } else {
        Ok(())
    }
}

/// One forward-Euler update of the 1D equation without sub-stepping.
fn euler_1d(rho: &[f64], out: &mut [f64], dx: f64, c_s: f64, nu: f64, dt: f64) {
    let n = rho.len();
    let (inv2dx, invdx2) = (0.5 / dx, 1.0 / (dx * dx));
    for i in 0..n {
        let (l, r) = (rho[(i + n - 1) % n], rho[(i + 1) % n]);
        let c = rho[i];
        let rx = (r - l) * inv2dx;
        let rxx = (r - 2.0 * c + l) * invdx2;
        let rhs = -(c_s * (1.0 - c)) * rx + nu * rxx;
        out[i] = c + dt * rhs;
    }
}

/// Advances `rho` by `dt`, sub-stepping if the explicit bound requires it.
pub fn fdm_step_1d(rho: &[f64], dx: f64, c_s: f64, nu: f64, dt: f64) -> Vec<f64> {
    let max_dev = rho.iter().fold(0.0f64, |m, r| m.max((1.0 - r).abs()));
    let bound = (c_s * max_dev).abs() * dt / dx + 2.0 * nu.abs() * dt / (dx * dx);
    let k = substeps(bound);
    let h = dt / k as f64;
    let mut cur = rho.to_vec();
    let mut next = vec![0.0; rho.len()];
    for _ in 0..k {
        euler_1d(&cur, &mut next, dx, c_s, nu, h);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Solution state of the 1D reference.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmState1D {
    pub rho: Vec<f64>,
    pub dx: f64,
    pub c_s: f64,
    pub nu: f64,
    pub dt: f64,
    pub step: usize,
    pub rho_b: f64,
    pub rho_a: f64,
}

impl FdmState1D {
    /// `rho_b` and `rho_a` only feed divergence detection.
    pub fn new(rho: Vec<f64>, dx: f64, c_s: f64, nu: f64, dt: f64, rho_b: f64, rho_a: f64) -> Result<Self> {
        if rho.len() < 3 {
            return Err(QlgError::InvalidArgument(format!(
                "{} sites: need at least 3",
                rho.len()
            )));
        }
        if !(dx > 0.0 && dt > 0.0) {
            return Err(QlgError::InvalidArgument(format!(
                "dx = {dx}, dt = {dt} must be positive"
            )));
        }
        Ok(Self {
            rho,
            dx,
            c_s,
            nu,
            dt,
            step: 0,
            rho_b,
            rho_a,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// One step; `Err(Diverged)` carries the step at which divergence was
    /// first seen and leaves the state at that step.
    pub fn advance(&mut self) -> Result<()> {
        self.rho = fdm_step_1d(&self.rho, self.dx, self.c_s, self.nu, self.dt);
        self.step += 1;
        check_divergence(&self.rho, self.rho_b, self.rho_a, self.step)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["t", "x", "rho"]);
        let t = self.time();
        for (i, r) in self.rho.iter().enumerate() {
            table.push_row(&[t, i as f64 * self.dx, *r]);
        }
        table
    }
}

/// Solution state of the 2D reference on an index grid with spacing `ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmState2D {
    pub rho: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub ds: f64,
    pub coeffs: PdeCoefficients2D,
    pub dt: f64,
    pub step: usize,
    pub rho_b: f64,
    pub rho_a: f64,
}

impl FdmState2D {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: Vec<f64>,
        nx: usize,
        ny: usize,
        ds: f64,
        coeffs: PdeCoefficients2D,
        dt: f64,
        rho_b: f64,
        rho_a: f64,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(QlgError::InvalidArgument(format!("grid {nx}x{ny}: need at least 3x3")));
        }
        if rho.len() != nx * ny {
            return Err(QlgError::GridMismatch(format!("{} values for {nx}x{ny}", rho.len())));
        }
        if !(ds > 0.0 && dt > 0.0) {
            return Err(QlgError::InvalidArgument(format!(
                "ds = {ds}, dt = {dt} must be positive"
            )));
        }
        let [[_, dxy], [dyx, _]] = coeffs.d;
        if dxy != dyx {
            return Err(QlgError::InvalidArgument("diffusion tensor must be symmetric".into()));
        }
        Ok(Self {
            rho,
            nx,
            ny,
            ds,
            coeffs,
            dt,
            step: 0,
            rho_b,
            rho_a,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    fn bound(&self) -> f64 {
        let PdeCoefficients2D { a, b, .. } = self.coeffs;
        let (lo, hi) = self
            .rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(1.0 - r), hi.max(1.0 - r))
            });
        let axis = |k: usize| (a[k] + b[k] * lo).abs().max((a[k] + b[k] * hi).abs());
        let speed = axis(0) + axis(1);
        speed * self.dt / self.ds + 2.0 * self.coeffs.max_diffusivity() * self.dt / (self.ds * self.ds)
    }

    fn euler(&self, rho: &[f64], out: &mut [f64], h: f64) {
        let (nx, ny) = (self.nx, self.ny);
        let PdeCoefficients2D { a, b, d } = self.coeffs;
        let (inv2, inv_sq, inv4_sq) = (0.5 / self.ds, 1.0 / (self.ds * self.ds), 0.25 / (self.ds * self.ds));
        let row = |j: usize, out_row: &mut [f64]| {
            let (jm, jp) = ((j + ny - 1) % ny, (j + 1) % ny);
            for (i, slot) in out_row.iter_mut().enumerate() {
                let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
                let at = |x: usize, y: usize| rho[y * nx + x];
                let c = at(i, j);
                let (e, w, n, s) = (at(ip, j), at(im, j), at(i, jp), at(i, jm));
                let rx = (e - w) * inv2;
                let ry = (n - s) * inv2;
                let rxx = (e - 2.0 * c + w) * inv_sq;
                let ryy = (n - 2.0 * c + s) * inv_sq;
                let rxy = (at(ip, jp) - at(ip, jm) - at(im, jp) + at(im, jm)) * inv4_sq;
                let rhs = -(a[0] + b[0] * (1.0 - c)) * rx - (a[1] + b[1] * (1.0 - c)) * ry
                    + d[0][0] * rxx
                    + 2.0 * d[0][1] * rxy
                    + d[1][1] * ryy;
                *slot = c + h * rhs;
            }
        };
        if nx * ny >= PAR_MIN_SITES {
            out.par_chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
        } else {
            out.chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
        }
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["t", "x", "y", "rho"]);
        let t = self.time();
        for j in 0..self.ny {
            for i in 0..self.nx {
                table.push_row(&[t, i as f64 * self.ds, j as f64 * self.ds, self.rho[j * self.nx + i]]);
            }
        }
        table
    }
}

/// One step of the 2D reference. Divergence is an error naming the step.
pub fn fdm_step_2d(state: &FdmState2D) -> Result<FdmState2D> {
    let k = substeps(state.bound());
    let h = state.dt / k as f64;
    let mut cur = state.rho.clone();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..k {
        state.euler(&cur, &mut next, h);
        std::mem::swap(&mut cur, &mut next);
    }
    let step = state.step + 1;
    check_divergence(&cur, state.rho_b, state.rho_a, step)?;
    Ok(FdmState2D {
        rho: cur,
        step,
        ..state.clone()
    })
}

/// Density snapshots of a reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmTrace {
    /// `(step, rho)` every `stride` steps, starting at step 0, up to the last
    /// finite state.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// First step at which divergence was detected.
    pub diverged_at: Option<usize>,
}

/// Runs the 1D reference for `steps` steps, stopping at divergence.
pub fn run_fdm_1d(init: &FdmState1D, steps: usize, stride: usize) -> FdmTrace {
    let stride = stride.max(1);
    let mut state = init.clone();
    let mut snapshots = vec![(0, state.rho.clone())];
    for n in 1..=steps {
        if let Err(QlgError::Diverged { step }) = state.advance() {
            return FdmTrace {
                snapshots,
                diverged_at: Some(step),
            };
        }
        if n % stride == 0 {
            snapshots.push((n, state.rho.clone()));
        }
    }
    FdmTrace {
        snapshots,
        diverged_at: None,
    }
}

/// Runs the 2D reference for `steps` steps, stopping at divergence.
pub fn run_fdm_2d(init: &FdmState2D, steps: usize, stride: usize) -> FdmTrace {
    let stride = stride.max(1);
    let mut state = init.clone();
    let mut snapshots = vec![(0, state.rho.clone())];
    for n in 1..=steps {
        match fdm_step_2d(&state) {
            Ok(next) => state = next,
            Err(QlgError::Diverged { step }) => {
                return FdmTrace {
                    snapshots,
                    diverged_at: Some(step),
                }
            }
            Err(_) => unreachable!("fdm_step_2d only reports divergence"),
        }
        if n % stride == 0 {
            snapshots.push((n, state.rho.clone()));
        }
    }
    FdmTrace {
        snapshots,
        diverged_at: None,
    }
}
