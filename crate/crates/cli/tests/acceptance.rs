//! Acceptance suite. Prints one PASS/FAIL line per criterion (and per
//! sub-check) and exits non-zero if anything outside `KNOWN_RED` fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlg_cli::{run, Command, RunConfig};
use qlg_core::experiments::{
    compare_2d, compare_analytic, linspace, steepness_sweep, viscosity_sweep, EstimatorSign, SteepnessUnits, Sweep1D,
};
use qlg_core::kernel::{
    build_collision_unitary, collide_closed_form, collide_quantum, equilibrium, jacobian_gap, omega,
    predicted_coefficients_1d, CollisionParams, PopulationPair,
};
use qlg_core::lattice::{init_cosine_2d, Grid1D, Grid2D, InitSplit, LatticeOptions, VelocitySet2D};

/// Sub-checks that fail with the shipped model; see the README.
const KNOWN_RED: &[&str] = &["6b/orthogonal", "6b/triangular", "6c/triangular"];

struct Outcome {
    id: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    rows: Vec<Outcome>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: impl Into<String>) {
        let o = Outcome {
            id: id.to_string(),
            pass,
            detail: detail.into(),
        };
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let known = if !o.pass && KNOWN_RED.contains(&o.id.as_str()) {
            " [known red]"
        } else {
            ""
        };
        println!("{tag} criterion {}: {}{known}", o.id, o.detail);
        self.rows.push(o);
    }
}

fn criterion_1(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut unit, mut mass, mut agree, mut fixed, mut jac) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..10_000 {
        let p = CollisionParams::new(
            rng.gen_range(1e-3..=FRAC_PI_2),
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
        )
        .unwrap();
        unit = unit.max(build_collision_unitary(&p).unitarity_defect());
        let f = PopulationPair::new(rng.gen(), rng.gen()).unwrap();
        let q = collide_quantum(&f, &p).unwrap();
        let c = collide_closed_form(&f, &p).unwrap();
        mass = mass.max((q.rho() - f.rho()).abs()).max((c.rho() - f.rho()).abs());
        agree = agree.max((q.f0 - c.f0).abs()).max((q.f1 - c.f1).abs());

        let rho = rng.gen_range(0.0..=2.0);
        let eq = equilibrium(rho, &p).unwrap();
        for out in [collide_closed_form(&eq, &p).unwrap(), collide_quantum(&eq, &p).unwrap()] {
            fixed = fixed.max((out.f0 - eq.f0).abs()).max((out.f1 - eq.f1).abs());
        }

        let p = CollisionParams::new(rng.gen_range(0.05..=FRAC_PI_2), rng.gen_range(-PI..PI), 0.0).unwrap();
        let rho = rng.gen_range(0.05..1.95);
        let eq = equilibrium(rho, &p).unwrap();
        // the sqrt terms curve sharply near the population bounds
        let h = (1e-3 * eq.f0.min(1.0 - eq.f0).min(eq.f1).min(1.0 - eq.f1)).clamp(1e-9, 1e-6);
        let om = |f0: f64, f1: f64| omega(&PopulationPair { f0, f1 }, &p);
        let numeric =
            (om(eq.f0, eq.f1 + h) - om(eq.f0, eq.f1 - h) - om(eq.f0 + h, eq.f1) + om(eq.f0 - h, eq.f1)) / (2.0 * h);
        jac = jac.max(((jacobian_gap(rho, &p).unwrap() - numeric) / numeric).abs());
    }
    r.check(
        "1/unitarity",
        unit < 1e-12,
        format!("max |U^H U - I| = {unit:.2e} (< 1e-12)"),
    );
    r.check(
        "1/mass",
        mass < 1e-12,
        format!("max per-site mass change = {mass:.2e} (< 1e-12)"),
    );
    r.check(
        "1/paths",
        agree < 1e-12,
        format!("quantum vs closed form over 1e4 samples = {agree:.2e} (< 1e-12)"),
    );
    r.check(
        "1/fixed-point",
        fixed < 1e-10,
        format!("equilibrium drift = {fixed:.2e} (< 1e-10)"),
    );
    r.check(
        "1/jacobian",
        jac < 1e-5,
        format!("max relative Jacobian error = {jac:.2e} (< 1e-5)"),
    );
}

fn criterion_2(r: &mut Report) {
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    let c = predicted_coefficients_1d(&p, 1.0, 1.0).unwrap();
    r.check(
        "2/values",
        (c.nu - 0.077351).abs() < 1e-5 && (c.nu_yepez - 0.166667).abs() < 1e-5,
        format!("theta = pi/3: nu = {:.6}, nu_yepez = {:.6}", c.nu, c.nu_yepez),
    );
    let worst = (1..=100)
        .map(|k| {
            let p = CollisionParams::with_theta(k as f64 * FRAC_PI_2 / 101.0).unwrap();
            let c = predicted_coefficients_1d(&p, 1.0, 1.0).unwrap();
            c.nu - c.nu_yepez
        })
        .fold(f64::NEG_INFINITY, f64::max);
    r.check(
        "2/ordering",
        worst < 0.0,
        format!("max(nu - nu_yepez) over 100 angles = {worst:.3e} (< 0)"),
    );
}

fn sweep(thetas: Vec<f64>, rho_a: f64) -> Sweep1D {
    Sweep1D {
        thetas,
        zeta: 0.0,
        xi: 0.0,
        nx: 64,
        length: 2.0,
        rho_b: 1.0,
        rho_a,
        split: InitSplit::Equilibrium,
        options: LatticeOptions::default(),
    }
}

fn criterion_3(r: &mut Report) {
    let rows = viscosity_sweep(&sweep(linspace(1.2, 1.5, 7), 0.005), 2000, EstimatorSign::PdeConsistent);
    let mut worst = 0f64;
    let mut closer = true;
    for row in &rows {
        let Some(exp) = row.nu_exp else {
            closer = false;
            worst = f64::INFINITY;
            continue;
        };
        worst = worst.max((exp - row.nu_pred).abs() / row.nu_pred);
        closer &= (exp - row.nu_pred).abs() < (exp - row.nu_yepez).abs();
    }
    r.check(
        "3/within-15%",
        worst <= 0.15,
        format!(
            "7 angles in [1.2, 1.5], T = 2000: max relative error = {:.2}%",
            100.0 * worst
        ),
    );
    r.check(
        "3/closer",
        closer,
        "measured viscosity closer to the corrected prediction at every angle",
    );
}

fn criterion_4(r: &mut Report) {
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    let grid = Grid1D::new(64, 2.0).unwrap();
    let cmp = compare_analytic(
        &p,
        grid,
        1.0,
        0.4,
        InitSplit::Equilibrium,
        &LatticeOptions::default(),
        2000,
        20,
        80,
    )
    .unwrap();
    let after = cmp.shock_index + 1..cmp.corrected.len();
    let better = after.clone().filter(|&k| cmp.corrected[k].1 < cmp.yepez[k].1).count();
    let frac = better as f64 / after.len() as f64;
    r.check(
        "4/corrected-better",
        frac >= 0.9,
        format!(
            "corrected MSE lower at {better}/{} snapshots after shock (t = {:.4})",
            after.len(),
            cmp.trace.time(cmp.shock_index)
        ),
    );
    let late = &cmp.corrected[cmp.corrected.len() / 2..];
    let decreasing = late.windows(2).all(|w| w[1].1 < w[0].1);
    r.check(
        "4/late-decay",
        decreasing,
        format!(
            "corrected MSE strictly decreasing over the second half: {:.2e} -> {:.2e}",
            late[0].1,
            late[late.len() - 1].1
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let thetas = linspace(0.05, FRAC_PI_2, 30);
    let rows = steepness_sweep(
        &sweep(thetas.clone(), 0.4),
        &[64, 128],
        &[200, 2000],
        SteepnessUnits::Lattice,
    );
    let mut delta = BTreeMap::new();
    for row in &rows {
        delta.insert((row.theta.to_bits(), row.nx, row.steps), row.delta.unwrap_or(f64::NAN));
    }
    let d = |t: f64, n: usize, s: usize| delta[&(t.to_bits(), n, s)];
    let mut interior = true;
    for n in [64, 128] {
        for s in [200, 2000] {
            let curve: Vec<f64> = thetas.iter().map(|&t| d(t, n, s)).collect();
            let arg = (0..curve.len()).max_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
            interior &= arg > 0 && arg + 1 < curve.len();
        }
    }
    r.check(
        "5/interior-max",
        interior,
        "every (N, T) curve peaks strictly inside the angle range",
    );
    let top = &thetas[thetas.len() - 3..];
    let longer = top
        .iter()
        .all(|&t| [64, 128].iter().all(|&n| d(t, n, 2000) >= d(t, n, 200)));
    r.check(
        "5/longer-steeper",
        longer,
        "Delta(T = 2000) >= Delta(T = 200) at the three largest angles",
    );
    let finer = top
        .iter()
        .all(|&t| [200, 2000].iter().all(|&s| d(t, 128, s) < d(t, 64, s)));
    let pairs: Vec<String> = top
        .iter()
        .map(|&t| format!("{:.3}: {:.4} -> {:.4}", t, d(t, 64, 2000), d(t, 128, 2000)))
        .collect();
    r.check(
        "5/finer-smoother",
        finer,
        format!(
            "N 64 -> 128 lowers Delta at the three largest angles ({})",
            pairs.join(", ")
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    let grid = Grid2D::new(64, 64, 1.0 / 32.0).unwrap();
    let opts = LatticeOptions::default();

    let mut f2 = init_cosine_2d(grid, 1.0, 0.2, &p, InitSplit::Equilibrium).unwrap();
    let mut rows: Vec<_> = (0..64).map(|y| f2.row(y)).collect();
    for _ in 0..1000 {
        f2 = f2.step(&p, &VelocitySet2D::axis(), &opts).unwrap();
        for row in rows.iter_mut() {
            *row = row.step(&p, &opts).unwrap();
        }
    }
    let same = rows.iter().enumerate().all(|(y, row)| f2.row(y) == *row);
    r.check(
        "6a",
        same,
        "axis set on 64x64: every row equals the 1D run bitwise after 1000 steps",
    );

    for (name, vset) in [
        ("axis", VelocitySet2D::axis()),
        ("orthogonal", VelocitySet2D::orthogonal()),
        ("triangular", VelocitySet2D::triangular()),
    ] {
        let cmp = compare_2d(&p, &vset, grid, 1.0, 0.2, InitSplit::Equilibrium, &opts, 1000, 20).unwrap();
        let worst = cmp.l2.iter().filter_map(|&(_, v)| v).fold(0f64, f64::max);
        let until = cmp
            .fdm_diverged_at
            .map_or("step 1000".to_string(), |s| format!("divergence at step {s}"));
        r.check(
            &format!("6b/{name}"),
            worst < 5e-2,
            format!("{name}: max relative L2 = {worst:.3e} until {until} (< 5e-2)"),
        );
        match cmp.fdm_diverged_at {
            Some(step) => r.check(
                &format!("6c/{name}"),
                step >= cmp.shock_step,
                format!(
                    "{name}: FDM diverged at step {step}, shock forms at step {}",
                    cmp.shock_step
                ),
            ),
            None => r.check(
                &format!("6c/{name}"),
                true,
                format!("{name}: FDM did not diverge in 1000 steps"),
            ),
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn criterion_7(r: &mut Report) {
    let jobs: &[(&str, &[Command])] = &[
        ("fig3_short", &[Command::ViscositySweep]),
        ("fig3_long", &[Command::ViscositySweep]),
        (
            "fig4",
            &[
                Command::Simulate1d,
                Command::CompareAnalytic,
                Command::Analytic,
                Command::Fdm1d,
            ],
        ),
        ("fig6", &[Command::SteepnessSweep]),
        ("fig8_set1", &[Command::Simulate2d]),
        ("fig8_set2", &[Command::Simulate2d]),
        ("fig8_set3", &[Command::Simulate2d]),
        ("fig8_set4", &[Command::Simulate2d]),
        ("fig9", &[Command::Compare2d]),
    ];
    let mut all = true;
    let mut files = 0;
    for (name, commands) in jobs {
        let path = configs_dir().join(format!("{name}.toml"));
        let cfg: RunConfig = qlg_cli::load(Some(&path), &[]).unwrap();
        for &command in *commands {
            let runs: Vec<BTreeMap<String, Vec<u8>>> = (0..2)
                .map(|_| {
                    let dir = tempfile::tempdir().unwrap();
                    run(command, &cfg, dir.path(), false).unwrap();
                    csv_files(dir.path())
                })
                .collect();
            let same = !runs[0].is_empty() && runs[0] == runs[1];
            if !same {
                println!("  {name} {}: outputs differ", command.name());
            }
            files += runs[0].len();
            all &= same;
        }
    }
    r.check(
        "7",
        all,
        format!("two runs of every checked-in config give identical CSVs ({files} files)"),
    );
}

fn main() {
    let mut report = Report::default();
    type Stage = (&'static str, fn(&mut Report));
    let stages: [Stage; 7] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
    ];
    for (id, stage) in stages {
        let t = Instant::now();
        stage(&mut report);
        println!("  (criterion {id}: {:.1}s)", t.elapsed().as_secs_f64());
    }
    let unexpected: Vec<&str> = report
        .rows
        .iter()
        .filter(|o| !o.pass && !KNOWN_RED.contains(&o.id.as_str()))
        .map(|o| o.id.as_str())
        .collect();
    let fixed: Vec<&str> = report
        .rows
        .iter()
        .filter(|o| o.pass && KNOWN_RED.contains(&o.id.as_str()))
        .map(|o| o.id.as_str())
        .collect();
    let red = report.rows.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} checks, {} pass, {red} fail ({} known red)",
        report.rows.len(),
        report.rows.len() - red,
        red - unexpected.len()
    );
    if !fixed.is_empty() {
        println!("acceptance: listed as known red but passing: {}", fixed.join(", "));
    }
    if !unexpected.is_empty() {
        println!("acceptance: unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
