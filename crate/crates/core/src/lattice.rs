//! Time stepping for Q-D1Q2 and Q-D2Q2 on periodic grids.
//!
//! A step is a per-site collision (closed form or through the state vector)
//! followed by classical streaming of each population along its velocity.
//! Fields are stored as two row-major scalar arrays `f0`, `f1`; in 2D the
//! site `(x, y)` lives at `y * nx + x`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{QlgError, Result};
use crate::kernel::{
    self, build_collision_unitary, check_post_collision, omega_raw, predicted_coefficients_1d, CollisionParams,
    PopulationPair, Unitary4,
};
use crate::snapshot::CsvTable;

/// Rows processed per rayon task in the collision phase.
const PAR_MIN_SITES: usize = 4096;

/// Direction in which populations move after collision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Streaming {
    /// Population `i` moves from `x` to `x + c_i`.
    #[default]
    Forward,
    /// Population `i` moves from `x` to `x - c_i`.
    Reversed,
}

impl Streaming {
    fn sign(self) -> i64 {
        match self {
            Streaming::Forward => 1,
            Streaming::Reversed => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionPath {
    #[default]
    ClosedForm,
    /// Prepare the cell state, apply the unitary, measure.
    Quantum,
}

/// How populations are split from an initial density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitSplit {
    #[default]
    Equilibrium,
    /// `(rho/2, rho/2)`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatticeOptions {
    pub streaming: Streaming,
    pub collision: CollisionPath,
}

/// Periodic 1D grid in the diffusive scaling `dt = dx^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    nx: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(nx: usize, length: f64) -> Result<Self> {
        if nx < 2 {
            return Err(QlgError::InvalidArgument(format!("nx = {nx}: need at least 2 sites")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(QlgError::InvalidArgument(format!("length = {length} must be positive")));
        }
        Ok(Self { nx, length })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.dx() * self.dx()
    }

    /// Lattice speed `c = dx/dt`.
    pub fn speed(&self) -> f64 {
        self.dx() / self.dt()
    }
}

/// Periodic 2D grid with equal spacing `ds` in both index directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    ds: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, ds: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(QlgError::InvalidArgument(format!(
                "grid {nx}x{ny}: need at least 2 sites per axis"
            )));
        }
        if !(ds > 0.0 && ds.is_finite()) {
            return Err(QlgError::InvalidArgument(format!("ds = {ds} must be positive")));
        }
        Ok(Self { nx, ny, ds })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn dt(&self) -> f64 {
        self.ds * self.ds
    }

    pub fn sites(&self) -> usize {
        self.nx * self.ny
    }

    /// The 1D grid of one row.
    pub fn row_grid(&self) -> Grid1D {
        Grid1D {
            nx: self.nx,
            length: self.ds * self.nx as f64,
        }
    }
}

/// Two streaming vectors on a Bravais lattice.
///
/// Streaming uses only the integer `shifts` on the index grid; the basis
/// vectors enter through the Cartesian velocities `c_i = n_i e1 + m_i e2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySet2D {
    basis: [[f64; 2]; 2],
    shifts: [[i64; 2]; 2],
}

impl VelocitySet2D {
    pub fn new(basis: [[f64; 2]; 2], shifts: [[i64; 2]; 2]) -> Result<Self> {
        let det = basis[0][0] * basis[1][1] - basis[0][1] * basis[1][0];
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(QlgError::InvalidArgument(format!(
                "basis vectors {:?} are linearly dependent",
                basis
            )));
        }
        Ok(Self { basis, shifts })
    }

    /// Square lattice with the given index shifts.
    pub fn square(shifts: [[i64; 2]; 2]) -> Self {
        Self {
            basis: [[1.0, 0.0], [0.0, 1.0]],
            shifts,
        }
    }

    /// `c0 = (-1, 0)`, `c1 = (1, 0)`: the 1D model on every row.
    pub fn axis() -> Self {
        Self::square([[-1, 0], [1, 0]])
    }

    /// `c0 = (-1, -1)`, `c1 = (1, 1)`.
    pub fn diagonal() -> Self {
        Self::square([[-1, -1], [1, 1]])
    }

    /// `c0 = (1, 0)`, `c1 = (0, -1)`: no cross-diffusion, extra advection.
    pub fn orthogonal() -> Self {
        Self::square([[1, 0], [0, -1]])
    }

    /// Triangular lattice, `c0 = (-1/2, sqrt3/2)`, `c1 = (1/2, sqrt3/2)`.
    pub fn triangular() -> Self {
        Self {
            basis: [[1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]],
            shifts: [[-1, 1], [0, 1]],
        }
    }

    pub fn basis(&self) -> [[f64; 2]; 2] {
        self.basis
    }

    pub fn shifts(&self) -> [[i64; 2]; 2] {
        self.shifts
    }

    /// Cartesian velocity of population `i`.
    pub fn cartesian(&self, i: usize) -> [f64; 2] {
        let [n, m] = self.shifts[i];
        let (n, m) = (n as f64, m as f64);
        [
            n * self.basis[0][0] + m * self.basis[1][0],
            n * self.basis[0][1] + m * self.basis[1][1],
        ]
    }

    /// Same shifts with the identity basis, i.e. velocities measured in
    /// index coordinates.
    pub fn index_space(&self) -> Self {
        Self::square(self.shifts)
    }

    /// Number of streaming steps after which every population returns to its
    /// site on an `nx x ny` grid.
    pub fn period(&self, nx: usize, ny: usize) -> usize {
        let axis_period = |shift: i64, n: usize| -> usize {
            let s = shift.unsigned_abs() as usize % n;
            if s == 0 {
                1
            } else {
                n / gcd(n, s)
            }
        };
        self.shifts
            .iter()
            .flat_map(|[a, b]| [axis_period(*a, nx), axis_period(*b, ny)])
            .fold(1, lcm)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Per-site collision on flat arrays. `row_len` is used only to label
/// errors with `(x, y)` coordinates.
fn collide_sites(
    f0: &mut [f64],
    f1: &mut [f64],
    params: &CollisionParams,
    path: CollisionPath,
    row_len: usize,
) -> Result<()> {
    let sin2 = params.theta().sin().powi(2);
    let mix = (2.0 * params.theta()).sin() * params.phase_factor();
    let unitary = build_collision_unitary(params);

    let rows = |(r, (a, b)): (usize, (&mut [f64], &mut [f64]))| -> Option<QlgError> {
        for x in 0..a.len() {
            let out = match path {
                CollisionPath::ClosedForm => {
                    let om = omega_raw(a[x], b[x], sin2, mix);
                    PopulationPair {
                        f0: a[x] - om,
                        f1: b[x] + om,
                    }
                }
                CollisionPath::Quantum => match collide_unitary(a[x], b[x], &unitary) {
                    Ok(p) => p,
                    Err(e) => return Some(e),
                },
            };
            if let Err(e) = check_post_collision(&out, Some((x, r))) {
                return Some(e);
            }
            a[x] = out.f0;
            b[x] = out.f1;
        }
        None
    };

    let first = if f0.len() >= PAR_MIN_SITES {
        f0.par_chunks_mut(row_len)
            .zip(f1.par_chunks_mut(row_len))
            .enumerate()
            .map(rows)
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .next()
    } else {
        f0.chunks_mut(row_len)
            .zip(f1.chunks_mut(row_len))
            .enumerate()
            .find_map(rows)
    };
    first.map_or(Ok(()), Err)
}

fn collide_unitary(f0: f64, f1: f64, unitary: &Unitary4) -> Result<PopulationPair> {
    let state = kernel::prepare_cell(&PopulationPair { f0, f1 });
    kernel::measure_populations(&unitary.apply(&state))
}

fn split_density(rho: f64, params: &CollisionParams, split: InitSplit) -> Result<PopulationPair> {
    match split {
        InitSplit::Equilibrium => kernel::equilibrium(rho, params),
        InitSplit::Symmetric => {
            if !(0.0..=2.0).contains(&rho) {
                return Err(QlgError::OutOfRange {
                    name: "rho",
                    value: rho,
                    lo: 0.0,
                    hi: 2.0,
                });
            }
            Ok(PopulationPair {
                f0: 0.5 * rho,
                f1: 0.5 * rho,
            })
        }
    }
}

/// Population field on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub grid: Grid1D,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    /// Number of steps taken since initialization.
    pub step: usize,
}

impl Field1D {
    pub fn from_pairs(grid: Grid1D, pairs: &[PopulationPair]) -> Result<Self> {
        if pairs.len() != grid.nx() {
            return Err(QlgError::GridMismatch(format!(
                "{} pairs for {} sites",
                pairs.len(),
                grid.nx()
            )));
        }
        Ok(Self {
            grid,
            f0: pairs.iter().map(|p| p.f0).collect(),
            f1: pairs.iter().map(|p| p.f1).collect(),
            step: 0,
        })
    }

    pub fn from_density(grid: Grid1D, rho: &[f64], params: &CollisionParams, split: InitSplit) -> Result<Self> {
        let pairs = rho
            .iter()
            .map(|&r| split_density(r, params, split))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(grid, &pairs)
    }

    pub fn density(&self) -> Vec<f64> {
        self.f0.iter().zip(&self.f1).map(|(a, b)| a + b).collect()
    }

    pub fn momentum_u(&self) -> Vec<f64> {
        self.f0.iter().zip(&self.f1).map(|(a, b)| b - a).collect()
    }

    pub fn mass(&self) -> f64 {
        self.f0.iter().sum::<f64>() + self.f1.iter().sum::<f64>()
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.grid.dt()
    }

    /// Streaming only (no collision).
    pub fn stream(&self, streaming: Streaming) -> Self {
        let n = self.grid.nx();
        let s = streaming.sign();
        let mut out = self.clone();
        // c0 = -1, c1 = +1
        out.f0.rotate_right(wrap(-s, n));
        out.f1.rotate_right(wrap(s, n));
        out.step += 1;
        out
    }

    pub fn step(&self, params: &CollisionParams, opts: &LatticeOptions) -> Result<Self> {
        let mut post = self.clone();
        let n = self.grid.nx();
        collide_sites(&mut post.f0, &mut post.f1, params, opts.collision, n)?;
        Ok(post.stream(opts.streaming))
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["t", "x", "rho", "u", "f0", "f1"]);
        let (t, dx) = (self.time(), self.grid.dx());
        for i in 0..self.grid.nx() {
            let (a, b) = (self.f0[i], self.f1[i]);
            table.push_row(&[t, i as f64 * dx, a + b, b - a, a, b]);
        }
        table
    }
}

/// `rho(x, 0) = rho_b + rho_a cos(2 pi x / L)` at the sites `x = i dx`.
pub fn init_cosine_1d(
    grid: Grid1D,
    rho_b: f64,
    rho_a: f64,
    params: &CollisionParams,
    split: InitSplit,
) -> Result<Field1D> {
    check_amplitude(rho_b, rho_a.abs())?;
    let n = grid.nx();
    let rho: Vec<f64> = (0..n)
        .map(|i| rho_b + rho_a * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    Field1D::from_density(grid, &rho, params, split)
}

fn check_amplitude(rho_b: f64, peak: f64) -> Result<()> {
    let (lo, hi) = (rho_b - peak, rho_b + peak);
    if lo < 0.0 || hi > 2.0 || !lo.is_finite() || !hi.is_finite() {
        return Err(QlgError::InvalidArgument(format!(
            "initial density spans [{lo}, {hi}], outside [0, 2]"
        )));
    }
    Ok(())
}

/// Population field on a 2D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub step: usize,
}

impl Field2D {
    pub fn from_density(grid: Grid2D, rho: &[f64], params: &CollisionParams, split: InitSplit) -> Result<Self> {
        if rho.len() != grid.sites() {
            return Err(QlgError::GridMismatch(format!(
                "{} densities for {} sites",
                rho.len(),
                grid.sites()
            )));
        }
        let pairs = rho
            .iter()
            .map(|&r| split_density(r, params, split))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            f0: pairs.iter().map(|p| p.f0).collect(),
            f1: pairs.iter().map(|p| p.f1).collect(),
            step: 0,
        })
    }

    pub fn density(&self) -> Vec<f64> {
        self.f0.iter().zip(&self.f1).map(|(a, b)| a + b).collect()
    }

    pub fn momentum_u(&self) -> Vec<f64> {
        self.f0.iter().zip(&self.f1).map(|(a, b)| b - a).collect()
    }

    pub fn mass(&self) -> f64 {
        self.f0.iter().sum::<f64>() + self.f1.iter().sum::<f64>()
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.grid.dt()
    }

    /// Row `y` as a 1D field.
    pub fn row(&self, y: usize) -> Field1D {
        let nx = self.grid.nx();
        Field1D {
            grid: self.grid.row_grid(),
            f0: self.f0[y * nx..(y + 1) * nx].to_vec(),
            f1: self.f1[y * nx..(y + 1) * nx].to_vec(),
            step: self.step,
        }
    }

    pub fn stream(&self, vset: &VelocitySet2D, streaming: Streaming) -> Self {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let s = streaming.sign();
        let shifted = |src: &[f64], [dx, dy]: [i64; 2]| -> Vec<f64> {
            let mut dst = vec![0.0; src.len()];
            let (dx, dy) = (wrap(s * dx, nx), wrap(s * dy, ny));
            for y in 0..ny {
                let ty = (y + dy) % ny;
                let src_row = &src[y * nx..(y + 1) * nx];
                let dst_row = &mut dst[ty * nx..(ty + 1) * nx];
                dst_row.copy_from_slice(src_row);
                dst_row.rotate_right(dx);
            }
            dst
        };
        let [c0, c1] = vset.shifts();
        Self {
            grid: self.grid,
            f0: shifted(&self.f0, c0),
            f1: shifted(&self.f1, c1),
            step: self.step + 1,
        }
    }

    pub fn step(&self, params: &CollisionParams, vset: &VelocitySet2D, opts: &LatticeOptions) -> Result<Self> {
        let mut post = self.clone();
        let nx = self.grid.nx();
        collide_sites(&mut post.f0, &mut post.f1, params, opts.collision, nx)?;
        Ok(post.stream(vset, opts.streaming))
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(&["t", "x", "y", "rho", "u", "f0", "f1"]);
        let (t, ds, nx) = (self.time(), self.grid.ds(), self.grid.nx());
        for y in 0..self.grid.ny() {
            for x in 0..nx {
                let k = y * nx + x;
                let (a, b) = (self.f0[k], self.f1[k]);
                table.push_row(&[t, x as f64 * ds, y as f64 * ds, a + b, b - a, a, b]);
            }
        }
        table
    }
}

/// `rho = rho_b + rho_a [cos(2 pi i / Nx) + cos(2 pi j / Ny)]`.
pub fn init_cosine_2d(
    grid: Grid2D,
    rho_b: f64,
    rho_a: f64,
    params: &CollisionParams,
    split: InitSplit,
) -> Result<Field2D> {
    check_amplitude(rho_b, 2.0 * rho_a.abs())?;
    Field2D::from_density(grid, &cosine_density_2d(grid, rho_b, rho_a), params, split)
}

pub fn cosine_density_2d(grid: Grid2D, rho_b: f64, rho_a: f64) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut rho = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let cy = (2.0 * PI * j as f64 / ny as f64).cos();
        for i in 0..nx {
            rho.push(rho_b + rho_a * ((2.0 * PI * i as f64 / nx as f64).cos() + cy));
        }
    }
    rho
}

/// Runs `steps` steps and keeps the field every `stride` steps (step 0
/// included; a final step that is not a multiple of `stride` is dropped).
pub fn simulate_1d(
    init: &Field1D,
    params: &CollisionParams,
    opts: &LatticeOptions,
    steps: usize,
    stride: usize,
) -> Result<Vec<Field1D>> {
    let stride = stride.max(1);
    let mut field = init.clone();
    let mut out = vec![field.clone()];
    for n in 1..=steps {
        field = field.step(params, opts)?;
        if n % stride == 0 {
            out.push(field.clone());
        }
    }
    Ok(out)
}

/// 2D counterpart of [`simulate_1d`].
pub fn simulate_2d(
    init: &Field2D,
    params: &CollisionParams,
    vset: &VelocitySet2D,
    opts: &LatticeOptions,
    steps: usize,
    stride: usize,
) -> Result<Vec<Field2D>> {
    let stride = stride.max(1);
    let mut field = init.clone();
    let mut out = vec![field.clone()];
    for n in 1..=steps {
        field = field.step(params, vset, opts)?;
        if n % stride == 0 {
            out.push(field.clone());
        }
    }
    Ok(out)
}

/// Coefficients of `d_t rho + a.grad rho + b.[(1-rho) grad rho] - div(D grad rho) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients2D {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub d: [[f64; 2]; 2],
}

impl PdeCoefficients2D {
    /// Coefficients for the opposite streaming direction (first-order terms
    /// flip sign).
    pub fn reversed(&self) -> Self {
        Self {
            a: [-self.a[0], -self.a[1]],
            b: [-self.b[0], -self.b[1]],
            d: self.d,
        }
    }

    pub fn for_streaming(&self, streaming: Streaming) -> Self {
        match streaming {
            Streaming::Forward => *self,
            Streaming::Reversed => self.reversed(),
        }
    }

    /// Largest eigenvalue of the symmetric tensor `D`.
    pub fn max_diffusivity(&self) -> f64 {
        let [[p, q], [_, r]] = self.d;
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        mean + rad
    }
}

/// Predicted macroscopic coefficients for forward streaming:
/// `a = (c/2)(c0 + c1)`, `b = (c_s/2)(c1 - c0)`,
/// `D = (nu/2)(c0 c0^T + c1 c1^T)` with Cartesian `c_i`.
///
/// With `c0 = (-1,0)`, `c1 = (1,0)` this is `b = (c_s, 0)`, `D = diag(nu, 0)`,
/// i.e. the 1D equation on every row.
pub fn predicted_coefficients_2d(
    vset: &VelocitySet2D,
    params: &CollisionParams,
    ds: f64,
    dt: f64,
) -> Result<PdeCoefficients2D> {
    let one = predicted_coefficients_1d(params, ds, dt)?;
    let c = ds / dt;
    let (c0, c1) = (vset.cartesian(0), vset.cartesian(1));
    let mut d = [[0.0; 2]; 2];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * one.nu * (c0[i] * c0[j] + c1[i] * c1[j]);
        }
    }
    Ok(PdeCoefficients2D {
        a: [0.5 * c * (c0[0] + c1[0]), 0.5 * c * (c0[1] + c1[1])],
        b: [0.5 * one.c_s * (c1[0] - c0[0]), 0.5 * one.c_s * (c1[1] - c0[1])],
        d,
    })
}

/// Coefficients the lattice actually realizes at linear order: same `a` and
/// `b`, but `D = nu W W^T` with `W = (c1 - c0)/2`.
///
/// Writing `c0 = V - W`, `c1 = V + W`, the streaming operator is an overall
/// translation by `V` times the 1D operator along `W`, so the collision only
/// diffuses along `W`. Agrees with [`predicted_coefficients_2d`] when
/// `c0 = -c1`.
pub fn effective_coefficients_2d(
    vset: &VelocitySet2D,
    params: &CollisionParams,
    ds: f64,
    dt: f64,
) -> Result<PdeCoefficients2D> {
    let mut coeffs = predicted_coefficients_2d(vset, params, ds, dt)?;
    let nu = predicted_coefficients_1d(params, ds, dt)?.nu;
    let (c0, c1) = (vset.cartesian(0), vset.cartesian(1));
    let w = [0.5 * (c1[0] - c0[0]), 0.5 * (c1[1] - c0[1])];
    for i in 0..2 {
        for j in 0..2 {
            coeffs.d[i][j] = nu * w[i] * w[j];
        }
    }
    Ok(coeffs)
}
