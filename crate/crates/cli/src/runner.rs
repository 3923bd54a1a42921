//! Subcommand implementations. Every command writes CSV artifacts into the
//! output directory plus a `manifest.json` that can be passed back as
//! `--config`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use qlg_core::analytic::ColeHopf;
use qlg_core::error::QlgError;
use qlg_core::experiments::{
    analytic_config, compare_2d, compare_analytic, metric_csv, steepness_csv, steepness_sweep, sweep_csv,
    viscosity_sweep, Sweep1D,
};
use qlg_core::fdm::{run_fdm_1d, run_fdm_2d, FdmState1D, FdmState2D};
use qlg_core::kernel::predicted_coefficients_1d;
use qlg_core::lattice::{
    init_cosine_1d, init_cosine_2d, predicted_coefficients_2d, simulate_1d, simulate_2d, Grid1D, Grid2D,
};
use qlg_core::snapshot::{snapshot_path, CsvTable};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate1d,
    Simulate2d,
    Fdm1d,
    Fdm2d,
    Analytic,
    ViscositySweep,
    SteepnessSweep,
    CompareAnalytic,
    Compare2d,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate1d => "simulate1d",
            Command::Simulate2d => "simulate2d",
            Command::Fdm1d => "fdm1d",
            Command::Fdm2d => "fdm2d",
            Command::Analytic => "analytic",
            Command::ViscositySweep => "viscosity-sweep",
            Command::SteepnessSweep => "steepness-sweep",
            Command::CompareAnalytic => "compare-analytic",
            Command::Compare2d => "compare-2d",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("finite-difference run diverged at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Model(#[from] QlgError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// 1 for configuration problems, 2 for reference-solver divergence,
    /// 3 for anything else that stops a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Diverged { .. } => 2,
            RunError::Model(_) | RunError::Io { .. } => 3,
        }
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub results: Value,
    pub manifest: PathBuf,
}

struct Sink<'a> {
    dir: &'a Path,
    outputs: Vec<PathBuf>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, table: &CsvTable) -> Result<(), RunError> {
        self.put(self.dir.join(name), table)
    }

    fn put(&mut self, path: PathBuf, table: &CsvTable) -> Result<(), RunError> {
        table.write_to(&path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        self.outputs.push(path);
        Ok(())
    }
}

fn grid_1d(cfg: &RunConfig) -> Result<Grid1D, RunError> {
    Ok(Grid1D::new(cfg.grid.nx, cfg.grid.length)?)
}

fn grid_2d(cfg: &RunConfig) -> Result<Grid2D, RunError> {
    Ok(Grid2D::new(
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.grid.length / cfg.grid.nx as f64,
    )?)
}

fn opt_json(v: Option<usize>) -> Value {
    v.map_or(Value::Null, |s| json!(s))
}

/// Runs `command` with `cfg`, writing into `out` (created if missing).
/// A diverged reference run still writes its snapshots and manifest before
/// returning `RunError::Diverged`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path, gnuplot: bool) -> Result<RunReport, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let started = Instant::now();
    let mut sink = Sink {
        dir: out,
        outputs: Vec::new(),
    };
    let results = execute(command, cfg, &mut sink)?;
    let elapsed = started.elapsed().as_secs_f64();

    if gnuplot {
        let script = gnuplot_script(command, &sink.outputs);
        let path = out.join(format!("{}.gp", cfg.run_id));
        std::fs::write(&path, script).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        sink.outputs.push(path);
    }

    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "timings": { "total_seconds": elapsed },
        "outputs": sink.outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "results": results,
    });
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text).map_err(|source| RunError::Io {
        path: manifest_path.clone(),
        source,
    })?;

    if let Some(step) = results.get("fdm_diverged_at").and_then(Value::as_u64) {
        if matches!(command, Command::Fdm1d | Command::Fdm2d) {
            return Err(RunError::Diverged { step: step as usize });
        }
    }
    Ok(RunReport {
        outputs: sink.outputs,
        results,
        manifest: manifest_path,
    })
}

fn execute(command: Command, cfg: &RunConfig, sink: &mut Sink) -> Result<Value, RunError> {
    let params = cfg.params();
    let opts = cfg.options();
    let (rho_b, rho_a) = (cfg.init.rho_b, cfg.init.rho_a);
    let id = cfg.run_id.as_str();
    match command {
        Command::Simulate1d => {
            let init = init_cosine_1d(grid_1d(cfg)?, rho_b, rho_a, &params, cfg.split())?;
            let fields = simulate_1d(&init, &params, &opts, cfg.steps, cfg.stride)?;
            for f in &fields {
                sink.put(snapshot_path(sink.dir, id, f.step), &f.to_csv())?;
            }
            Ok(json!({ "snapshots": fields.len() }))
        }
        Command::Simulate2d => {
            let vset = cfg.velocity_set()?;
            let init = init_cosine_2d(grid_2d(cfg)?, rho_b, rho_a, &params, cfg.split())?;
            let fields = simulate_2d(&init, &params, &vset, &opts, cfg.steps, cfg.stride)?;
            for f in &fields {
                sink.put(snapshot_path(sink.dir, id, f.step), &f.to_csv())?;
            }
            Ok(json!({ "snapshots": fields.len() }))
        }
        Command::Fdm1d => {
            let grid = grid_1d(cfg)?;
            let init = init_cosine_1d(grid, rho_b, rho_a, &params, cfg.split())?;
            let coeffs = predicted_coefficients_1d(&params, grid.dx(), grid.dt())?;
            let c_s = match opts.streaming {
                qlg_core::lattice::Streaming::Forward => coeffs.c_s,
                qlg_core::lattice::Streaming::Reversed => -coeffs.c_s,
            };
            let state = FdmState1D::new(init.density(), grid.dx(), c_s, coeffs.nu, grid.dt(), rho_b, rho_a)?;
            let trace = run_fdm_1d(&state, cfg.steps, cfg.stride);
            for (step, rho) in &trace.snapshots {
                let snap = FdmState1D {
                    rho: rho.clone(),
                    step: *step,
                    ..state.clone()
                };
                sink.put(snapshot_path(sink.dir, id, *step), &snap.to_csv())?;
            }
            Ok(json!({
                "c_s": c_s,
                "nu": coeffs.nu,
                "snapshots": trace.snapshots.len(),
                "fdm_diverged_at": opt_json(trace.diverged_at),
            }))
        }
        Command::Fdm2d => {
            let grid = grid_2d(cfg)?;
            let vset = cfg.velocity_set()?;
            let init = init_cosine_2d(grid, rho_b, rho_a, &params, cfg.split())?;
            let coeffs = predicted_coefficients_2d(&vset.index_space(), &params, grid.ds(), grid.dt())?
                .for_streaming(opts.streaming);
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
            let trace = run_fdm_2d(&state, cfg.steps, cfg.stride);
            for (step, rho) in &trace.snapshots {
                let snap = FdmState2D {
                    rho: rho.clone(),
                    step: *step,
                    ..state.clone()
                };
                sink.put(snapshot_path(sink.dir, id, *step), &snap.to_csv())?;
            }
            Ok(json!({
                "coefficients": { "a": coeffs.a, "b": coeffs.b, "d": coeffs.d },
                "snapshots": trace.snapshots.len(),
                "fdm_diverged_at": opt_json(trace.diverged_at),
            }))
        }
        Command::Analytic => {
            let grid = grid_1d(cfg)?;
            let acfg = analytic_config(&params, &grid, rho_b, rho_a, cfg.nu_variant(), cfg.analytic.truncation)?;
            let solution = ColeHopf::new(acfg)?;
            let mut count = 0;
            for step in (0..=cfg.steps).step_by(cfg.stride) {
                let table = solution.snapshot_csv(grid.nx(), step as f64 * grid.dt())?;
                sink.put(snapshot_path(sink.dir, id, step), &table)?;
                count += 1;
            }
            Ok(json!({ "nu": acfg.nu, "bessel_argument": acfg.bessel_argument(), "snapshots": count }))
        }
        Command::ViscositySweep => {
            let rows = viscosity_sweep(&sweep_settings(cfg), cfg.steps, cfg.estimator());
            sink.write(&format!("{id}_viscosity.csv"), &sweep_csv(&rows))?;
            let failures: Vec<Value> = rows
                .iter()
                .filter_map(|r| r.error.as_ref().map(|e| json!({ "theta": r.theta, "error": e })))
                .collect();
            Ok(json!({ "rows": rows.len(), "failures": failures }))
        }
        Command::SteepnessSweep => {
            let grids = if cfg.sweep.grids.is_empty() {
                vec![cfg.grid.nx]
            } else {
                cfg.sweep.grids.clone()
            };
            let horizons = if cfg.sweep.horizons.is_empty() {
                vec![cfg.steps]
            } else {
                cfg.sweep.horizons.clone()
            };
            let rows = steepness_sweep(&sweep_settings(cfg), &grids, &horizons, cfg.units());
            sink.write(&format!("{id}_steepness.csv"), &steepness_csv(&rows))?;
            Ok(json!({ "rows": rows.len() }))
        }
        Command::CompareAnalytic => {
            let cmp = compare_analytic(
                &params,
                grid_1d(cfg)?,
                rho_b,
                rho_a,
                cfg.split(),
                &opts,
                cfg.steps,
                cfg.stride,
                cfg.analytic.truncation,
            )?;
            let wrap = |s: &[(f64, f64)]| s.iter().map(|&(t, m)| (t, Some(m))).collect::<Vec<_>>();
            sink.write(&format!("{id}_mse_corrected.csv"), &metric_csv(&wrap(&cmp.corrected)))?;
            sink.write(&format!("{id}_mse_yepez.csv"), &metric_csv(&wrap(&cmp.yepez)))?;
            Ok(json!({ "shock_step": cmp.trace.steps[cmp.shock_index] }))
        }
        Command::Compare2d => {
            let presets = if cfg.compare.sets.is_empty() {
                vec![cfg.velocity_set.preset]
            } else {
                cfg.compare.sets.clone()
            };
            let mut per_set = serde_json::Map::new();
            for preset in presets {
                let vset = cfg.preset_set(preset)?;
                let cmp = compare_2d(
                    &params,
                    &vset,
                    grid_2d(cfg)?,
                    rho_b,
                    rho_a,
                    cfg.split(),
                    &opts,
                    cfg.steps,
                    cfg.stride,
                )?;
                sink.write(&format!("{id}_{}_l2.csv", preset.name()), &metric_csv(&cmp.l2))?;
                per_set.insert(
                    preset.name().to_string(),
                    json!({
                        "shock_step": cmp.shock_step,
                        "fdm_diverged_at": opt_json(cmp.fdm_diverged_at),
                    }),
                );
            }
            Ok(json!({ "sets": per_set }))
        }
    }
}

fn sweep_settings(cfg: &RunConfig) -> Sweep1D {
    Sweep1D {
        thetas: cfg.thetas(),
        zeta: cfg.collision.zeta,
        xi: cfg.collision.xi,
        nx: cfg.grid.nx,
        length: cfg.grid.length,
        rho_b: cfg.init.rho_b,
        rho_a: cfg.init.rho_a,
        split: cfg.split(),
        options: cfg.options(),
    }
}

fn gnuplot_script(command: Command, outputs: &[PathBuf]) -> String {
    let names: Vec<String> = outputs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    let quoted = |n: &String| format!("'{n}'");
    match command {
        Command::Simulate1d | Command::Fdm1d | Command::Analytic => {
            s.push_str("set xlabel 'x'\nset ylabel 'rho'\nplot ");
            let parts: Vec<String> = names
                .iter()
                .map(|n| format!("{} using 2:3 with lines", quoted(n)))
                .collect();
            s.push_str(&parts.join(", \\\n     "));
        }
        Command::Simulate2d | Command::Fdm2d => {
            s.push_str("set view map\nset xlabel 'x'\nset ylabel 'y'\n");
            if let Some(last) = names.last() {
                s.push_str(&format!("splot {} using 2:3:4 with points palette pt 5", quoted(last)));
            }
        }
        Command::ViscositySweep => {
            s.push_str("set xlabel 'theta'\nset ylabel 'nu'\nset logscale y\n");
            s.push_str(&format!(
                "plot {0} using 1:2 with lines, {0} using 1:3 with lines, {0} using 1:4 with points",
                quoted(&names[0])
            ));
        }
        Command::SteepnessSweep => {
            s.push_str("set xlabel 'theta'\nset ylabel 'delta'\n");
            s.push_str(&format!("plot {} using 1:4 with points", quoted(&names[0])));
        }
        Command::CompareAnalytic | Command::Compare2d => {
            let ylabel = if command == Command::Compare2d { "L2" } else { "MSE" };
            s.push_str(&format!("set xlabel 't'\nset ylabel '{ylabel}'\nset logscale y\nplot "));
            let parts: Vec<String> = names
                .iter()
                .map(|n| {
                    format!(
                        "{} using 1:2 with lines title '{}'",
                        quoted(n),
                        n.trim_end_matches(".csv")
                    )
                })
                .collect();
            s.push_str(&parts.join(", \\\n     "));
        }
    }
    s.push('\n');
    s
}
