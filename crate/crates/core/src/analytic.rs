//! Cole-Hopf solution of `w_t + w w_x = nu w_xx` for the cosine initial
//! density `rho_b + rho_a cos(beta x)`, with `w = c alpha (1 - rho)`.
//!
//! In the frame moving with `w_bar = c alpha (1 - rho_b)` the potential is
//! `psi(phi, tau) = I_0(A) + 2 sum_l I_l(A) exp(-l^2 tau) cos(l (phi - pi/2))`
//! with `phi = beta (x - w_bar t)`, `tau = nu beta^2 t` and
//! `A = c alpha rho_a / (2 nu beta)`. The `cos(l (phi - pi/2))` factor is the
//! cos/sin selector pair `cos(l pi/2) cos(l phi) + sin(l pi/2) sin(l phi)`;
//! odd `l` contribute odd sine modes.
//!
//! For large `A` and small `tau` the series is a sum of O(1) terms that
//! cancel down to `exp(-A)` near the density trough. When that cancellation
//! costs more than four digits the potential is evaluated instead as the
//! heat-kernel convolution of `exp(A sin s)`, in log space.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{QlgError, Result};
use crate::kernel::ALPHA_EPS;
use crate::snapshot::CsvTable;

pub const DEFAULT_TRUNCATION: usize = 80;

/// Series terms may cancel by this factor before switching to quadrature.
const MAX_CANCELLATION: f64 = 1e4;

/// Extra recurrence depth used by [`bessel_ratios`].
const RECURRENCE_PAD: usize = 60;

/// `I_l(A) / I_0(A)` for `l = 0..=l_max`, by normalized backward recurrence.
///
/// Works for any `A > 0` without forming `I_l` itself.
pub fn bessel_ratios(l_max: usize, a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(QlgError::InvalidArgument(format!(
            "Bessel argument A = {a} must be positive"
        )));
    }
    let start = l_max + a.ceil() as usize + RECURRENCE_PAD;
    // r[k] = I_k / I_{k-1}
    let mut r = vec![0.0; l_max + 1];
    let mut next = 0.0;
    for k in (1..=start).rev() {
        next = 1.0 / (2.0 * k as f64 / a + next);
        if k <= l_max {
            r[k] = next;
        }
    }
    let mut out = Vec::with_capacity(l_max + 1);
    let mut acc = 1.0;
    out.push(1.0);
    for rk in r.iter().skip(1) {
        acc *= rk;
        out.push(acc);
    }
    Ok(out)
}

/// `I_l(A) / I_0(A)`.
pub fn bessel_ratio(l: usize, a: f64) -> Result<f64> {
    Ok(bessel_ratios(l, a)?[l])
}

/// Parameters of the analytic solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConfig {
    pub length: f64,
    pub rho_a: f64,
    pub rho_b: f64,
    /// Lattice speed `dx/dt`.
    pub c: f64,
    pub alpha: f64,
    pub nu: f64,
    pub truncation: usize,
}

impl AnalyticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(QlgError::InvalidArgument(format!("nu = {} must be positive", self.nu)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(QlgError::InvalidArgument(format!(
                "length = {} must be positive",
                self.length
            )));
        }
        if self.truncation < 1 {
            return Err(QlgError::InvalidArgument("truncation must be at least 1".into()));
        }
        if (self.c * self.alpha).abs() < ALPHA_EPS || !(self.c * self.alpha).is_finite() {
            return Err(QlgError::InvalidArgument(format!(
                "advection speed c*alpha = {} must be nonzero",
                self.c * self.alpha
            )));
        }
        if !self.rho_a.is_finite() || !self.rho_b.is_finite() {
            return Err(QlgError::InvalidArgument("densities must be finite".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// `c alpha`.
    pub fn speed(&self) -> f64 {
        self.c * self.alpha
    }

    /// Series argument `A = c alpha rho_a / (2 nu beta)`.
    pub fn bessel_argument(&self) -> f64 {
        self.speed() * self.rho_a / (2.0 * self.nu * self.beta())
    }

    /// Mean velocity `c alpha (1 - rho_b)`.
    pub fn mean_velocity(&self) -> f64 {
        self.speed() * (1.0 - self.rho_b)
    }
}

/// Precomputed solution for one configuration.
#[derive(Debug, Clone)]
pub struct ColeHopf {
    cfg: AnalyticConfig,
    a: f64,
    /// `I_l(A)/I_0(A)` with the sign `(-1)^l` folded in for `A < 0`.
    ratios: Vec<f64>,
}

impl ColeHopf {
    pub fn new(cfg: AnalyticConfig) -> Result<Self> {
        cfg.validate()?;
        let a = cfg.bessel_argument();
        let ratios = if a == 0.0 {
            Vec::new()
        } else {
            let mut r = bessel_ratios(cfg.truncation, a.abs())?;
            if a < 0.0 {
                for (l, v) in r.iter_mut().enumerate() {
                    if l % 2 == 1 {
                        *v = -*v;
                    }
                }
            }
            r
        };
        Ok(Self { cfg, a, ratios })
    }

    pub fn config(&self) -> &AnalyticConfig {
        &self.cfg
    }

    /// `d(ln psi)/d(phi)` at phase `phi` and diffusive time `tau`.
    fn log_derivative(&self, phi: f64, tau: f64, x: f64, t: f64) -> Result<f64> {
        if tau == 0.0 {
            return Ok(self.a * phi.cos());
        }
        let mut psi = 1.0;
        let mut dpsi = 0.0;
        let mut scale = 1.0;
        for (l, r) in self.ratios.iter().enumerate().skip(1) {
            let lf = l as f64;
            let damp = (-lf * lf * tau).exp();
            if damp == 0.0 {
                break;
            }
            let arg = lf * (phi - FRAC_PI_2);
            let term = 2.0 * r * damp;
            psi += term * arg.cos();
            dpsi -= term * lf * arg.sin();
            scale += term.abs();
        }
        if psi > 0.0 && scale / psi <= MAX_CANCELLATION {
            return Ok(dpsi / psi);
        }
        if scale / psi.abs() > MAX_CANCELLATION {
            return Ok(self.kernel_log_derivative(phi, tau));
        }
        Err(QlgError::NonPositivePsi { psi, x, t })
    }

    /// `psi = (4 pi tau)^(-1/2) int exp(-(phi - s)^2 / (4 tau)) exp(A sin s) ds`;
    /// its log-derivative is the mean of `A cos s` under that weight.
    fn kernel_log_derivative(&self, phi: f64, tau: f64) -> f64 {
        let a = self.a;
        let half_width = 2.0 * (tau * (2.0 * a.abs() + 50.0)).sqrt();
        let h = tau.sqrt().min(1.0 / a.abs().max(1.0).sqrt()) / 8.0;
        let n = (half_width / h).ceil() as i64;
        let log_weight = |s: f64| -(phi - s) * (phi - s) / (4.0 * tau) + a * s.sin();
        let peak = (-n..=n)
            .map(|k| log_weight(phi + k as f64 * h))
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for k in -n..=n {
            let s = phi + k as f64 * h;
            let w = (log_weight(s) - peak).exp();
            num += w * a * s.cos();
            den += w;
        }
        num / den
    }

    /// Density at position `x` and time `t`.
    pub fn density(&self, x: f64, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(QlgError::InvalidArgument(format!("t = {t} must be non-negative")));
        }
        let cfg = &self.cfg;
        if self.a == 0.0 {
            return Ok(cfg.rho_b);
        }
        let beta = cfg.beta();
        let phi = beta * (x - cfg.mean_velocity() * t);
        let tau = cfg.nu * beta * beta * t;
        let dlog = self.log_derivative(phi, tau, x, t)?;
        // w - w_bar = -2 nu beta dlog, rho = 1 - w / (c alpha)
        Ok(cfg.rho_b + 2.0 * cfg.nu * beta * dlog / cfg.speed())
    }

    /// `w = c alpha (1 - rho)`.
    pub fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.cfg.speed() * (1.0 - self.density(x, t)?))
    }

    pub fn profile(&self, xs: &[f64], t: f64) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.density(x, t)).collect()
    }

    /// Samples at `x_i = i L / n` as a `t,x,rho` table.
    pub fn snapshot_csv(&self, n: usize, t: f64) -> Result<CsvTable> {
        let mut table = CsvTable::new(&["t", "x", "rho"]);
        let dx = self.cfg.length / n as f64;
        for i in 0..n {
            let x = i as f64 * dx;
            table.push_row(&[t, x, self.density(x, t)?]);
        }
        Ok(table)
    }
}

/// Convenience wrapper building a [`ColeHopf`] for a single evaluation.
pub fn cole_hopf_density(x: f64, t: f64, cfg: &AnalyticConfig) -> Result<f64> {
    ColeHopf::new(*cfg)?.density(x, t)
}

/// Maximum Burgers residual `|w_t + w w_x - nu w_xx|` of the solution over a
/// fixed set of sample points, using central differences with spatial step
/// `h L` and time step `h t_s`, where `t_s = 1 / (beta |c alpha rho_a|)` is
/// the steepening time scale. Samples sit at 32 positions and times
/// `t_s / 4, t_s / 2, t_s`.
pub fn residual_check(cfg: &AnalyticConfig, h: f64) -> Result<f64> {
    let sol = ColeHopf::new(*cfg)?;
    if sol.a == 0.0 {
        return Ok(0.0);
    }
    let ts = 1.0 / (cfg.beta() * (cfg.speed() * cfg.rho_a).abs());
    let (hx, ht) = (h * cfg.length, h * ts);
    let w = |x: f64, t: f64| sol.velocity(x, t);
    let mut worst: f64 = 0.0;
    for &t in &[0.25 * ts, 0.5 * ts, ts] {
        for i in 0..32 {
            let x = cfg.length * i as f64 / 32.0;
            let w0 = w(x, t)?;
            let wt = (w(x, t + ht)? - w(x, t - ht)?) / (2.0 * ht);
            let (wp, wm) = (w(x + hx, t)?, w(x - hx, t)?);
            let wx = (wp - wm) / (2.0 * hx);
            let wxx = (wp - 2.0 * w0 + wm) / (hx * hx);
            worst = worst.max((wt + w0 * wx - cfg.nu * wxx).abs());
        }
    }
    Ok(worst)
}
