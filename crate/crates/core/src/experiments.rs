//! Estimators over density traces and the sweep drivers built on them.
//!
//! All estimators work in lattice units (one site, one step) unless stated
//! otherwise; in the diffusive scaling `dx^2/dt = 1`, so lattice
//! viscosities are also physical ones.

use rayon::prelude::*;

use crate::analytic::{AnalyticConfig, ColeHopf};
use crate::error::{QlgError, Result};
use crate::fdm::{run_fdm_2d, FdmState2D};
use crate::kernel::{predicted_coefficients_1d, CollisionParams};
use crate::lattice::{
    init_cosine_1d, init_cosine_2d, predicted_coefficients_2d, simulate_1d, simulate_2d, Field1D, Field2D, Grid1D,
    Grid2D, InitSplit, LatticeOptions, VelocitySet2D,
};
use crate::snapshot::{fmt_f64, CsvTable};

/// Sites whose curvature falls below this are left out of the viscosity estimate.
pub const CURVATURE_GUARD: f64 = 1e-12;

/// Density snapshots taken every `stride` steps on a 1D or 2D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrace {
    pub nx: usize,
    /// 1 for 1D traces.
    pub ny: usize,
    /// Physical extent along x.
    pub length: f64,
    pub dx: f64,
    pub dt: f64,
    pub stride: usize,
    /// Step index of every snapshot.
    pub steps: Vec<usize>,
    /// Row-major densities, one per snapshot.
    pub fields: Vec<Vec<f64>>,
}

impl DensityTrace {
    pub fn from_fields_1d(fields: &[Field1D]) -> Result<Self> {
        let first = fields.first().ok_or(QlgError::TraceTooShort { got: 0, need: 1 })?;
        let g = first.grid;
        let stride = if fields.len() > 1 {
            fields[1].step - first.step
        } else {
            1
        };
        Self::check_uniform(fields.iter().map(|f| f.step), stride)?;
        Ok(Self {
            nx: g.nx(),
            ny: 1,
            length: g.length(),
            dx: g.dx(),
            dt: g.dt(),
            stride,
            steps: fields.iter().map(|f| f.step).collect(),
            fields: fields.iter().map(Field1D::density).collect(),
        })
    }

    pub fn from_fields_2d(fields: &[Field2D]) -> Result<Self> {
        let first = fields.first().ok_or(QlgError::TraceTooShort { got: 0, need: 1 })?;
        let g = first.grid;
        let stride = if fields.len() > 1 {
            fields[1].step - first.step
        } else {
            1
        };
        Self::check_uniform(fields.iter().map(|f| f.step), stride)?;
        Ok(Self {
            nx: g.nx(),
            ny: g.ny(),
            length: g.ds() * g.nx() as f64,
            dx: g.ds(),
            dt: g.dt(),
            stride,
            steps: fields.iter().map(|f| f.step).collect(),
            fields: fields.iter().map(Field2D::density).collect(),
        })
    }

    /// Trace from `(step, rho)` pairs such as an [`crate::fdm::FdmTrace`].
    pub fn from_snapshots(nx: usize, ny: usize, dx: f64, dt: f64, snapshots: &[(usize, Vec<f64>)]) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(QlgError::TraceTooShort { got: 0, need: 1 });
        }
        if let Some((_, bad)) = snapshots.iter().find(|(_, r)| r.len() != nx * ny) {
            return Err(QlgError::GridMismatch(format!("{} values for {nx}x{ny}", bad.len())));
        }
        let stride = if snapshots.len() > 1 {
            snapshots[1].0 - snapshots[0].0
        } else {
            1
        };
        Self::check_uniform(snapshots.iter().map(|s| s.0), stride)?;
        Ok(Self {
            nx,
            ny,
            length: dx * nx as f64,
            dx,
            dt,
            stride,
            steps: snapshots.iter().map(|s| s.0).collect(),
            fields: snapshots.iter().map(|s| s.1.clone()).collect(),
        })
    }

    fn check_uniform(mut steps: impl Iterator<Item = usize>, stride: usize) -> Result<()> {
        if stride == 0 {
            return Err(QlgError::InvalidArgument("snapshot stride must be positive".into()));
        }
        let Some(mut prev) = steps.next() else { return Ok(()) };
        for s in steps {
            if s != prev + stride {
                return Err(QlgError::InvalidArgument(format!(
                    "non-uniform snapshot steps: {prev} then {s} with stride {stride}"
                )));
            }
            prev = s;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.steps[k] as f64 * self.dt
    }

    /// Lattice speed `dx/dt`.
    pub fn speed(&self) -> f64 {
        self.dx / self.dt
    }
}

/// Sign of the advection correction in the pointwise estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorSign {
    /// `[d_t rho + alpha (rho - 1) d_x rho] / d_xx rho`.
    AsPrinted,
    /// `[d_t rho - alpha (rho - 1) d_x rho] / d_xx rho`, consistent with the
    /// advection term of the 1D equation.
    #[default]
    PdeConsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityEstimate {
    /// Filtered spatial mean for each pair of consecutive snapshots; `None`
    /// where no point survived.
    pub per_step: Vec<Option<f64>>,
    /// Time mean of the per-step values; `None` when every step was skipped.
    pub aggregate: Option<f64>,
    /// Kept points over all candidate points.
    pub kept_fraction: f64,
    pub skipped_steps: usize,
}

/// Pointwise viscosity estimates for snapshot `k` (using `k + 1` for the
/// time difference). Sites under the curvature guard are `None`.
pub fn pointwise_viscosity(trace: &DensityTrace, k: usize, alpha: f64, sign: EstimatorSign) -> Vec<Option<f64>> {
    let n = trace.nx;
    let (now, next) = (&trace.fields[k], &trace.fields[k + 1]);
    let s = match sign {
        EstimatorSign::AsPrinted => 1.0,
        EstimatorSign::PdeConsistent => -1.0,
    };
    let dt = trace.stride as f64;
    (0..n)
        .map(|x| {
            let (l, c, r) = (now[(x + n - 1) % n], now[x], now[(x + 1) % n]);
            let den = l - 2.0 * c + r;
            if den.abs() < CURVATURE_GUARD {
                return None;
            }
            let num = (next[x] - c) / dt + s * alpha * (c - 1.0) * (r - c);
            let v = num / den;
            v.is_finite().then_some(v)
        })
        .collect()
}

/// Keeps points within one population standard deviation of the mean and
/// returns their mean and count.
pub fn sigma_filter(values: &[f64]) -> Option<(f64, usize)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let kept: Vec<f64> = values.iter().copied().filter(|v| (v - mean).abs() <= sd).collect();
    if kept.is_empty() {
        return None;
    }
    Some((kept.iter().sum::<f64>() / kept.len() as f64, kept.len()))
}

/// Viscosity measured from a 1D trace, in lattice units.
pub fn experimental_viscosity(trace: &DensityTrace, alpha: f64, sign: EstimatorSign) -> Result<ViscosityEstimate> {
    if trace.ny != 1 {
        return Err(QlgError::InvalidArgument("viscosity estimate needs a 1D trace".into()));
    }
    if trace.len() < 2 {
        return Err(QlgError::TraceTooShort {
            got: trace.len(),
            need: 2,
        });
    }
    let mut per_step = Vec::with_capacity(trace.len() - 1);
    let (mut kept, mut total) = (0usize, 0usize);
    for k in 0..trace.len() - 1 {
        let pts: Vec<f64> = pointwise_viscosity(trace, k, alpha, sign)
            .into_iter()
            .flatten()
            .collect();
        total += trace.nx;
        match sigma_filter(&pts) {
            Some((m, c)) => {
                per_step.push(Some(m));
                kept += c;
            }
            None => per_step.push(None),
        }
    }
    let valid: Vec<f64> = per_step.iter().flatten().copied().collect();
    let aggregate = (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64);
    Ok(ViscosityEstimate {
        skipped_steps: per_step.len() - valid.len(),
        per_step,
        aggregate,
        kept_fraction: kept as f64 / total as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteepnessUnits {
    /// `c = 1`: largest one-site density jump.
    #[default]
    Lattice,
    /// `c = dx/dt`.
    Physical,
}

/// Largest one-cell jump of `c (1 - rho)` over the whole 1D trace.
pub fn shock_steepness(trace: &DensityTrace, units: SteepnessUnits) -> f64 {
    let jump = trace
        .fields
        .iter()
        .map(|f| max_jump(f, trace.nx, 1))
        .fold(0.0, f64::max);
    match units {
        SteepnessUnits::Lattice => jump,
        SteepnessUnits::Physical => jump * trace.speed(),
    }
}

/// Largest forward-difference magnitude on a periodic `nx x ny` field
/// (Euclidean over both axes in 2D).
fn max_jump(rho: &[f64], nx: usize, ny: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let c = rho[j * nx + i];
            let gx = rho[j * nx + (i + 1) % nx] - c;
            let g = if ny > 1 {
                let gy = rho[((j + 1) % ny) * nx + i] - c;
                gx.hypot(gy)
            } else {
                gx.abs()
            };
            worst = worst.max(g);
        }
    }
    worst
}

/// Snapshot index at which the density gradient peaks (first on ties).
pub fn shock_formation_index(trace: &DensityTrace) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, f) in trace.fields.iter().enumerate() {
        let g = max_jump(f, trace.nx, trace.ny);
        if g > best.1 {
            best = (k, g);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuVariant {
    Corrected,
    Yepez,
}

/// Analytic configuration matching a 1D lattice run.
pub fn analytic_config(
    params: &CollisionParams,
    grid: &Grid1D,
    rho_b: f64,
    rho_a: f64,
    variant: NuVariant,
    truncation: usize,
) -> Result<AnalyticConfig> {
    let coeffs = predicted_coefficients_1d(params, grid.dx(), grid.dt())?;
    Ok(AnalyticConfig {
        length: grid.length(),
        rho_a,
        rho_b,
        c: grid.speed(),
        alpha: params.alpha(),
        nu: match variant {
            NuVariant::Corrected => coeffs.nu,
            NuVariant::Yepez => coeffs.nu_yepez,
        },
        truncation,
    })
}

/// Per-snapshot mean squared difference between the trace and the
/// analytic density at the lattice sites: `(t, mse)`.
pub fn mse_compare(trace: &DensityTrace, cfg: &AnalyticConfig) -> Result<Vec<(f64, f64)>> {
    if trace.ny != 1 || (trace.length - cfg.length).abs() > 1e-12 * cfg.length {
        return Err(QlgError::GridMismatch(format!(
            "trace of length {} ({}x{}) against analytic length {}",
            trace.length, trace.nx, trace.ny, cfg.length
        )));
    }
    let sol = ColeHopf::new(*cfg)?;
    let xs: Vec<f64> = (0..trace.nx).map(|i| i as f64 * trace.dx).collect();
    trace
        .fields
        .par_iter()
        .enumerate()
        .map(|(k, rho)| {
            let t = trace.time(k);
            let exact = sol.profile(&xs, t)?;
            let mse = rho.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / rho.len() as f64;
            Ok((t, mse))
        })
        .collect()
}

/// `||qlg - fdm|| / ||qlg - rho_b||` per common snapshot, `None` where the
/// denominator vanishes. Stops at the shorter trace, so a reference that
/// diverged truncates the series.
pub fn l2_compare_2d(qlg: &DensityTrace, fdm: &DensityTrace, rho_b: f64) -> Result<Vec<(f64, Option<f64>)>> {
    if qlg.nx != fdm.nx || qlg.ny != fdm.ny || qlg.stride != fdm.stride {
        return Err(QlgError::GridMismatch(format!(
            "{}x{} stride {} against {}x{} stride {}",
            qlg.nx, qlg.ny, qlg.stride, fdm.nx, fdm.ny, fdm.stride
        )));
    }
    let n = qlg.len().min(fdm.len());
    Ok((0..n)
        .map(|k| {
            let (a, b) = (&qlg.fields[k], &fdm.fields[k]);
            let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            let den: f64 = a.iter().map(|p| (p - rho_b) * (p - rho_b)).sum();
            let metric = (den > 0.0).then(|| (num / den).sqrt());
            (qlg.time(k), metric)
        })
        .collect())
}

/// `t,metric` table; undefined metrics are written as `nan`.
pub fn metric_csv(series: &[(f64, Option<f64>)]) -> CsvTable {
    let mut table = CsvTable::new(&["t", "metric"]);
    for (t, m) in series {
        let cell = m.map_or_else(|| "nan".to_string(), fmt_f64);
        table.push_mixed(&[fmt_f64(*t), cell]);
    }
    table
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Settings shared by the 1D sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep1D {
    pub thetas: Vec<f64>,
    pub zeta: f64,
    pub xi: f64,
    pub nx: usize,
    pub length: f64,
    pub rho_b: f64,
    pub rho_a: f64,
    pub split: InitSplit,
    pub options: LatticeOptions,
}

impl Sweep1D {
    fn run(&self, theta: f64, nx: usize, steps: usize) -> Result<(CollisionParams, Grid1D, Vec<Field1D>)> {
        let params = CollisionParams::new(theta, self.zeta, self.xi)?;
        let grid = Grid1D::new(nx, self.length)?;
        let init = init_cosine_1d(grid, self.rho_b, self.rho_a, &params, self.split)?;
        let fields = simulate_1d(&init, &params, &self.options, steps, 1)?;
        Ok((params, grid, fields))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub nu_pred: f64,
    pub nu_yepez: f64,
    pub nu_exp: Option<f64>,
    pub kept_fraction: f64,
    pub steps: usize,
    /// Why this row has no measurement, if it failed.
    pub error: Option<String>,
}

/// Runs every `theta` for `steps` steps and measures its viscosity.
/// Failures are recorded per row.
pub fn viscosity_sweep(sweep: &Sweep1D, steps: usize, sign: EstimatorSign) -> Vec<SweepRow> {
    sweep
        .thetas
        .par_iter()
        .map(|&theta| {
            let mut row = SweepRow {
                theta,
                nu_pred: f64::NAN,
                nu_yepez: f64::NAN,
                nu_exp: None,
                kept_fraction: 0.0,
                steps,
                error: None,
            };
            let outcome = (|| -> Result<()> {
                let (params, grid, fields) = sweep.run(theta, sweep.nx, steps)?;
                let coeffs = predicted_coefficients_1d(&params, grid.dx(), grid.dt())?;
                row.nu_pred = coeffs.nu;
                row.nu_yepez = coeffs.nu_yepez;
                let trace = DensityTrace::from_fields_1d(&fields)?;
                let est = experimental_viscosity(&trace, params.alpha(), sign)?;
                row.nu_exp = est.aggregate;
                row.kept_fraction = est.kept_fraction;
                Ok(())
            })();
            if let Err(e) = outcome {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> CsvTable {
    let mut table = CsvTable::new(&["theta", "nu_pred", "nu_yepez", "nu_exp", "kept_fraction", "T"]);
    for r in rows {
        table.push_mixed(&[
            fmt_f64(r.theta),
            fmt_f64(r.nu_pred),
            fmt_f64(r.nu_yepez),
            r.nu_exp.map_or_else(|| "nan".to_string(), fmt_f64),
            fmt_f64(r.kept_fraction),
            r.steps.to_string(),
        ]);
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteepnessRow {
    pub theta: f64,
    pub nx: usize,
    pub steps: usize,
    /// `None` when the run failed.
    pub delta: Option<f64>,
}

/// Steepness for every `(theta, nx)` pair at each horizon in `horizons`
/// (one run per pair, up to the longest horizon).
pub fn steepness_sweep(
    sweep: &Sweep1D,
    grids: &[usize],
    horizons: &[usize],
    units: SteepnessUnits,
) -> Vec<SteepnessRow> {
    let pairs: Vec<(f64, usize)> = grids
        .iter()
        .flat_map(|&nx| sweep.thetas.iter().map(move |&t| (t, nx)))
        .collect();
    let longest = horizons.iter().copied().max().unwrap_or(0);
    pairs
        .par_iter()
        .flat_map_iter(|&(theta, nx)| {
            let run = sweep.run(theta, nx, longest);
            horizons
                .iter()
                .map(|&h| {
                    let delta = run.as_ref().ok().map(|(_, _, fields)| {
                        let trace = DensityTrace::from_fields_1d(&fields[..=h]).expect("uniform stride");
                        shock_steepness(&trace, units)
                    });
                    SteepnessRow {
                        theta,
                        nx,
                        steps: h,
                        delta,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn steepness_csv(rows: &[SteepnessRow]) -> CsvTable {
    let mut table = CsvTable::new(&["theta", "nx", "T", "delta"]);
    for r in rows {
        table.push_mixed(&[
            fmt_f64(r.theta),
            r.nx.to_string(),
            r.steps.to_string(),
            r.delta.map_or_else(|| "nan".to_string(), fmt_f64),
        ]);
    }
    table
}

/// Lattice run and its analytic comparison.
#[derive(Debug, Clone)]
pub struct AnalyticComparison {
    pub trace: DensityTrace,
    pub corrected: Vec<(f64, f64)>,
    pub yepez: Vec<(f64, f64)>,
    pub shock_index: usize,
}

/// Runs the 1D cosine problem and compares it with both analytic solutions.
#[allow(clippy::too_many_arguments)]
pub fn compare_analytic(
    params: &CollisionParams,
    grid: Grid1D,
    rho_b: f64,
    rho_a: f64,
    split: InitSplit,
    options: &LatticeOptions,
    steps: usize,
    stride: usize,
    truncation: usize,
) -> Result<AnalyticComparison> {
    let init = init_cosine_1d(grid, rho_b, rho_a, params, split)?;
    let fields = simulate_1d(&init, params, options, steps, stride)?;
    let trace = DensityTrace::from_fields_1d(&fields)?;
    let corrected = mse_compare(
        &trace,
        &analytic_config(params, &grid, rho_b, rho_a, NuVariant::Corrected, truncation)?,
    )?;
    let yepez = mse_compare(
        &trace,
        &analytic_config(params, &grid, rho_b, rho_a, NuVariant::Yepez, truncation)?,
    )?;
    Ok(AnalyticComparison {
        shock_index: shock_formation_index(&trace),
        trace,
        corrected,
        yepez,
    })
}

/// QLG and FDM runs on the same 2D grid.
#[derive(Debug, Clone)]
pub struct Comparison2D {
    pub qlg: DensityTrace,
    pub fdm: DensityTrace,
    pub l2: Vec<(f64, Option<f64>)>,
    pub fdm_diverged_at: Option<usize>,
    /// Step at which the QLG density gradient peaks.
    pub shock_step: usize,
}

/// Runs the lattice and the finite-difference reference from the same
/// cosine initial density and compares them. The reference uses the
/// predicted coefficients of the set's index-space shifts.
#[allow(clippy::too_many_arguments)]
pub fn compare_2d(
    params: &CollisionParams,
    vset: &VelocitySet2D,
    grid: Grid2D,
    rho_b: f64,
    rho_a: f64,
    split: InitSplit,
    options: &LatticeOptions,
    steps: usize,
    stride: usize,
) -> Result<Comparison2D> {
    let init = init_cosine_2d(grid, rho_b, rho_a, params, split)?;
    let fields = simulate_2d(&init, params, vset, options, steps, stride)?;
    let qlg = DensityTrace::from_fields_2d(&fields)?;

    let coeffs =
        predicted_coefficients_2d(&vset.index_space(), params, grid.ds(), grid.dt())?.for_streaming(options.streaming);
    let state = FdmState2D::new(
        init.density(),
        grid.nx(),
        grid.ny(),
        grid.ds(),
        coeffs,
        grid.dt(),
        rho_b,
        rho_a,
    )?;
    let run = run_fdm_2d(&state, steps, stride);
    let fdm = DensityTrace::from_snapshots(grid.nx(), grid.ny(), grid.ds(), grid.dt(), &run.snapshots)?;
    let l2 = l2_compare_2d(&qlg, &fdm, rho_b)?;
    Ok(Comparison2D {
        shock_step: qlg.steps[shock_formation_index(&qlg)],
        qlg,
        fdm,
        l2,
        fdm_diverged_at: run.diverged_at,
    })
}
