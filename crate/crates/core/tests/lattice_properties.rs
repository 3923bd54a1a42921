use std::f64::consts::{FRAC_PI_3, PI};

use proptest::prelude::*;
use qlg_core::kernel::{predicted_coefficients_1d, CollisionParams, PopulationPair};
use qlg_core::lattice::{
    effective_coefficients_2d, init_cosine_1d, init_cosine_2d, predicted_coefficients_2d, simulate_1d, Field1D,
    Field2D, Grid1D, Grid2D, InitSplit, LatticeOptions, Streaming, VelocitySet2D,
};

fn random_field(grid: Grid1D, values: &[(f64, f64)]) -> Field1D {
    let pairs: Vec<PopulationPair> = values.iter().map(|&(a, b)| PopulationPair { f0: a, f1: b }).collect();
    Field1D::from_pairs(grid, &pairs).unwrap()
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), n)
}

fn forward() -> LatticeOptions {
    LatticeOptions::default()
}

fn reversed() -> LatticeOptions {
    LatticeOptions {
        streaming: Streaming::Reversed,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streaming_alone_is_a_permutation(values in field_strategy(12), rev in any::<bool>()) {
        let grid = Grid1D::new(12, 1.0).unwrap();
        let f = random_field(grid, &values);
        let dir = if rev { Streaming::Reversed } else { Streaming::Forward };
        let mut g = f.clone();
        for _ in 0..12 {
            g = g.stream(dir);
        }
        prop_assert_eq!(&g.f0, &f.f0);
        prop_assert_eq!(&g.f1, &f.f1);
    }

    #[test]
    fn streaming_2d_returns_after_its_period(
        values in field_strategy(6 * 4),
        set in 0usize..4,
    ) {
        let vset = [
            VelocitySet2D::axis(),
            VelocitySet2D::diagonal(),
            VelocitySet2D::orthogonal(),
            VelocitySet2D::triangular(),
        ][set];
        let grid = Grid2D::new(6, 4, 0.1).unwrap();
        let f = Field2D {
            grid,
            f0: values.iter().map(|v| v.0).collect(),
            f1: values.iter().map(|v| v.1).collect(),
            step: 0,
        };
        let period = vset.period(6, 4);
        let mut h = f.clone();
        for _ in 0..period {
            h = h.stream(&vset, Streaming::Forward);
        }
        prop_assert_eq!(&h.f0, &f.f0);
        prop_assert_eq!(&h.f1, &f.f1);
    }

    #[test]
    fn translation_commutes_with_stepping(
        k in 0usize..16,
        theta in 0.3..1.5f64,
        rho_a in 0.0..0.5f64,
        rev in any::<bool>(),
    ) {
        let grid = Grid1D::new(16, 1.0).unwrap();
        let p = CollisionParams::with_theta(theta).unwrap();
        let opts = if rev { reversed() } else { forward() };
        let f = init_cosine_1d(grid, 1.0, rho_a, &p, InitSplit::Symmetric).unwrap();
        let shift = |g: &Field1D| {
            let mut s = g.clone();
            s.f0.rotate_right(k);
            s.f1.rotate_right(k);
            s
        };
        let a = shift(&f.step(&p, &opts).unwrap());
        let b = shift(&f).step(&p, &opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mirror_with_flipped_alpha_commutes(theta in 0.3..1.5f64, rho_b in 0.6..1.4f64, rho_a in 0.0..0.3f64) {
        // x -> -x exchanges the two velocities, so f0 <-> f1 and alpha -> -alpha
        let n = 16;
        let grid = Grid1D::new(n, 1.0).unwrap();
        let p = CollisionParams::new(theta, 0.0, 0.0).unwrap();
        let flipped = CollisionParams::new(theta, PI, 0.0).unwrap();
        let f = init_cosine_1d(grid, rho_b, rho_a, &p, InitSplit::Symmetric).unwrap();
        let mirror = |g: &Field1D| {
            let mut m = g.clone();
            for i in 0..n {
                let j = (n - i) % n;
                m.f0[j] = g.f1[i];
                m.f1[j] = g.f0[i];
            }
            m
        };
        let mut a = f.clone();
        let mut b = mirror(&f);
        for _ in 0..20 {
            a = a.step(&p, &forward()).unwrap();
            b = b.step(&flipped, &forward()).unwrap();
        }
        let ma = mirror(&a);
        for i in 0..n {
            prop_assert!((ma.f0[i] - b.f0[i]).abs() < 1e-14);
            prop_assert!((ma.f1[i] - b.f1[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn axis_set_rows_match_1d_bitwise(theta in 0.3..1.5f64, rho_a in 0.0..0.2f64, rev in any::<bool>()) {
        let p = CollisionParams::with_theta(theta).unwrap();
        let opts = if rev { reversed() } else { forward() };
        let grid = Grid2D::new(12, 5, 1.0 / 6.0).unwrap();
        let mut f2 = init_cosine_2d(grid, 1.0, rho_a, &p, InitSplit::Equilibrium).unwrap();
        let mut rows: Vec<Field1D> = (0..5).map(|y| f2.row(y)).collect();
        for _ in 0..30 {
            f2 = f2.step(&p, &VelocitySet2D::axis(), &opts).unwrap();
            for r in rows.iter_mut() {
                *r = r.step(&p, &opts).unwrap();
            }
        }
        for (y, r) in rows.iter().enumerate() {
            prop_assert_eq!(&f2.row(y), r);
        }
    }
}

#[test]
fn mass_conserved_over_ten_thousand_steps() {
    let grid = Grid1D::new(64, 2.0).unwrap();
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    let mut f = init_cosine_1d(grid, 1.0, 0.4, &p, InitSplit::Equilibrium).unwrap();
    let m0 = f.mass();
    for _ in 0..10_000 {
        f = f.step(&p, &forward()).unwrap();
    }
    assert!((f.mass() - m0).abs() < 1e-12 * 64.0 * 10.0, "{}", f.mass() - m0);
}

#[test]
fn mass_conserved_in_2d() {
    let grid = Grid2D::new(64, 64, 1.0 / 32.0).unwrap();
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    for vset in [VelocitySet2D::orthogonal(), VelocitySet2D::triangular()] {
        let mut f = init_cosine_2d(grid, 1.0, 0.2, &p, InitSplit::Equilibrium).unwrap();
        let m0 = f.mass();
        for _ in 0..1000 {
            f = f.step(&p, &vset, &forward()).unwrap();
        }
        assert!((f.mass() - m0).abs() < 1e-8);
    }
}

#[test]
fn runs_are_bitwise_repeatable() {
    let grid = Grid1D::new(64, 2.0).unwrap();
    let p = CollisionParams::new(1.1, 0.3, 0.1).unwrap();
    let init = init_cosine_1d(grid, 1.0, 0.3, &p, InitSplit::Equilibrium).unwrap();
    let a = simulate_1d(&init, &p, &forward(), 500, 50).unwrap();
    let b = simulate_1d(&init, &p, &forward(), 500, 50).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 11);

    let grid = Grid2D::new(64, 64, 1.0 / 32.0).unwrap();
    let init = init_cosine_2d(grid, 1.0, 0.2, &p, InitSplit::Equilibrium).unwrap();
    let run = || {
        let mut f = init.clone();
        for _ in 0..50 {
            f = f.step(&p, &VelocitySet2D::triangular(), &forward()).unwrap();
        }
        f
    };
    assert_eq!(run(), run());
}

/// Magnitude of the Fourier coefficient of `rho - 1` at index wavevector `(kx, ky)`.
fn mode_amplitude(f: &Field2D, kx: f64, ky: f64) -> f64 {
    let (nx, ny) = (f.grid.nx(), f.grid.ny());
    let rho = f.density();
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..ny {
        for i in 0..nx {
            let ph = 2.0 * PI * (kx * i as f64 / nx as f64 + ky * j as f64 / ny as f64);
            let v = rho[j * nx + i] - 1.0;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
    }
    re.hypot(im)
}

#[test]
fn linear_modes_decay_with_the_effective_tensor() {
    let n = 32;
    let steps = 1500;
    let p = CollisionParams::with_theta(FRAC_PI_3).unwrap();
    let grid = Grid2D::new(n, n, 1.0).unwrap();
    for vset in [
        VelocitySet2D::axis(),
        VelocitySet2D::orthogonal(),
        VelocitySet2D::triangular().index_space(),
    ] {
        for (kx, ky) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let rho: Vec<f64> = (0..n * n)
                .map(|s| {
                    let (i, j) = ((s % n) as f64, (s / n) as f64);
                    1.0 + 1e-4 * (2.0 * PI * (kx * i + ky * j) / n as f64).cos()
                })
                .collect();
            let mut f = Field2D::from_density(grid, &rho, &p, InitSplit::Equilibrium).unwrap();
            let a0 = mode_amplitude(&f, kx, ky);
            for _ in 0..steps {
                f = f.step(&p, &vset, &forward()).unwrap();
            }
            let measured = -(mode_amplitude(&f, kx, ky) / a0).ln() / steps as f64;
            let k = [2.0 * PI * kx / n as f64, 2.0 * PI * ky / n as f64];
            let rate = |d: [[f64; 2]; 2]| k[0] * k[0] * d[0][0] + 2.0 * k[0] * k[1] * d[0][1] + k[1] * k[1] * d[1][1];
            let eff = rate(effective_coefficients_2d(&vset, &p, 1.0, 1.0).unwrap().d);
            let predicted = rate(predicted_coefficients_2d(&vset, &p, 1.0, 1.0).unwrap().d);
            if eff == 0.0 {
                assert!(measured.abs() < 1e-6, "{vset:?} k=({kx},{ky}): {measured}");
                continue;
            }
            assert!(
                ((measured - eff) / eff).abs() < 0.02,
                "{vset:?} k=({kx},{ky}): {measured} vs {eff} (predicted {predicted})"
            );
        }
    }
}

#[test]
fn axis_set_reduces_to_1d_coefficients() {
    let p = CollisionParams::with_theta(1.2).unwrap();
    let one = predicted_coefficients_1d(&p, 0.5, 0.25).unwrap();
    let two = predicted_coefficients_2d(&VelocitySet2D::axis(), &p, 0.5, 0.25).unwrap();
    assert_eq!(two.b, [one.c_s, 0.0]);
    assert_eq!(two.d, [[one.nu, 0.0], [0.0, 0.0]]);
    // the opposite streaming direction flips the first-order terms
    assert_eq!(two.reversed().b, [-one.c_s, -0.0]);
}
