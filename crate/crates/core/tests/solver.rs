use nsrl_core::field::{Generator, NormKind};
use nsrl_core::solver::{simulate, SolverConfig};
use nsrl_core::{Field, GridSpec};

fn l2_diff(a: &Field, b: &Field) -> f64 {
    a.add(&b.scale(-1.0))
        .unwrap()
        .norm(NormKind::Lp(2.0))
        .unwrap()
}

fn taylor_green_exact(g: GridSpec, t: f64) -> Field {
    let d = (-2.0 * g.nu() * t).exp();
    Field::from_fn(g, |x| {
        [
            d * x[0].sin() * x[1].cos(),
            -d * x[0].cos() * x[1].sin(),
            0.0,
        ]
    })
}

fn random_flow(n: usize, nu: f64, seed: u64) -> Field {
    Generator::RandomDivfree {
        slope: -5.0 / 3.0,
        k_min: 1.0,
        k_max: 4.0,
        rms: 1.0,
        seed,
    }
    .generate(GridSpec::periodic(n, nu).unwrap())
    .unwrap()
}

#[test]
fn taylor_green_matches_exact_solution() {
    let g = GridSpec::periodic(32, 0.1).unwrap();
    let u0 = taylor_green_exact(g, 0.0);
    let cfg = SolverConfig {
        dt: 1e-3,
        t_end: 1.0,
        stats_stride: 100,
        ..Default::default()
    };
    let traj = simulate(&u0, &cfg).unwrap();
    let err = l2_diff(traj.final_field(), &taylor_green_exact(g, 1.0));
    assert!(err <= 1e-6, "L2 error {err}");
}

#[test]
fn fourth_order_in_time_on_nonlinear_flow() {
    let u0 = random_flow(16, 0.05, 11);
    let run = |dt: f64| {
        let cfg = SolverConfig {
            dt,
            t_end: 0.4,
            stats_stride: 1000,
            ..Default::default()
        };
        simulate(&u0, &cfg).unwrap().final_field().clone()
    };
    let reference = run(0.0025);
    let e1 = l2_diff(&run(0.04), &reference);
    let e2 = l2_diff(&run(0.02), &reference);
    assert!(e1 / e2 >= 12.0, "errors {e1} {e2}, ratio {}", e1 / e2);
}

#[test]
fn energy_decays_and_balances_dissipation() {
    let u0 = random_flow(16, 0.05, 5);
    let cfg = SolverConfig {
        dt: 2e-3,
        t_end: 0.4,
        ..Default::default()
    };
    let traj = simulate(&u0, &cfg).unwrap();
    let s = &traj.stats;
    let e0 = s[0].energy;
    let nu = u0.grid().nu();
    for w in s.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-8 * e0);
        let h = w[1].t - w[0].t;
        let diss = 0.5 * h * nu * (w[0].enstrophy + w[1].enstrophy);
        assert!((w[1].energy - w[0].energy + diss).abs() <= 1e-6 * e0);
    }
    // centred finite difference of E against −ν‖∇u‖²
    for j in 1..s.len() - 1 {
        let de = (s[j + 1].energy - s[j - 1].energy) / (s[j + 1].t - s[j - 1].t);
        let expect = -nu * s[j].enstrophy;
        assert!((de - expect).abs() <= 0.01 * expect.abs());
    }
}

#[test]
fn snapshots_stay_divergence_free() {
    let u0 = random_flow(16, 0.05, 8);
    let cfg = SolverConfig {
        dt: 5e-3,
        t_end: 0.2,
        snapshot_stride: 10,
        ..Default::default()
    };
    let traj = simulate(&u0, &cfg).unwrap();
    assert_eq!(traj.snapshots.len(), 5);
    assert!(traj.snapshots.windows(2).all(|w| w[0].0 < w[1].0));
    for (_, f) in &traj.snapshots {
        assert!(f.spectral_divergence_ratio() <= 1e-10);
    }
}
