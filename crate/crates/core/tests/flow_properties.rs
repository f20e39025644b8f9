//! Invariants of whole trajectories: monotone particle positions, the energy
//! split, ½-Hölder continuity, flat singular zones and the sign of the forcing.

use chforce::diagnostics::{energy, forcing_integral};
use chforce::eulerian::interpolate_u;
use chforce::numerics::{trapezoid, trapezoid_weights};
use chforce::{build_initial_state, integrate, to_eulerian, Preset, SolverConfig, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(preset: Preset, n: usize, dt: f64, t_end: f64, k: f64, interval: f64) -> Trajectory {
    let data = preset.initial_data(20.0).unwrap();
    let cfg = SolverConfig::new(n, dt, t_end, k).with_output_interval(interval);
    let initial = build_initial_state(&data, &cfg).unwrap();
    let traj = integrate(&initial, &cfg).unwrap();
    assert!(traj.is_complete(), "{:?}", traj.error);
    traj
}

fn pair() -> Preset {
    Preset::PeakonPair {
        c: 1.0,
        d: -1.0,
        offset: 2.0,
    }
}

/// Largest `|u(x) − u(x′)|/√|x − x′|` over random pairs of the Eulerian
/// interpolant, half of them uniform and half at log-uniform separations, and
/// the smallest `2√E` over the snapshots.
fn holder_quotient(traj: &Trajectory, pairs: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut bound = f64::INFINITY;
    for s in &traj.states {
        bound = bound.min(2.0 * energy(s).sqrt());
        let snap = to_eulerian(s, 1e-3);
        let (lo, hi) = snap.x_range();
        for p in 0..pairs {
            let a = lo + (hi - lo) * rng.gen::<f64>();
            let b = if p % 2 == 0 {
                lo + (hi - lo) * rng.gen::<f64>()
            } else {
                (a + 10f64.powf(-6.0 * rng.gen::<f64>())).min(hi)
            };
            let dx = (b - a).abs();
            if dx > 0.0 {
                let du = interpolate_u(&snap, a).unwrap() - interpolate_u(&snap, b).unwrap();
                worst = worst.max(du.abs() / dx.sqrt());
            }
        }
    }
    (worst, bound)
}

#[test]
fn positions_stay_monotone_through_breaking() {
    let traj = run(pair(), 2048, 1e-3, 3.5, 0.0, 0.05);
    for s in &traj.states {
        let snap = to_eulerian(s, 1e-3);
        for i in 0..s.len() - 1 {
            let flagged = snap.singular[i] || snap.singular[i + 1];
            let dx = snap.x[i + 1] - snap.x[i];
            assert!(dx >= 0.0, "t = {}: x decreases at {i}", s.t);
            if !flagged {
                assert!(dx > 0.0, "t = {}: flat cell {i} off the singular set", s.t);
                // Particles only overshoot inside collapsing cells.
                assert!(s.x[i + 1] > s.x[i], "t = {}: particles cross at {i}", s.t);
            }
        }
    }
}

#[test]
fn energy_split_is_exhaustive() {
    let traj = run(pair(), 1024, 2e-3, 3.0, 0.0, 0.25);
    for s in &traj.states {
        let sin2: Vec<f64> =
            s.v.iter()
                .zip(&s.xi)
                .map(|(v, xi)| xi * (0.5 * v).sin().powi(2))
                .collect();
        let split = trapezoid(&s.grid_y, &sin2);
        let e = energy(s);
        let f = forcing_integral(s);
        assert!((split - (e - f)).abs() <= 1e-12 * e);
        assert!(f <= e);
        let snap = to_eulerian(s, 1e-3);
        assert!((snap.regular_energy() + snap.singular_mass - e).abs() <= 1e-12 * e);
    }
}

#[test]
fn flagged_runs_are_flat() {
    let traj = run(pair(), 2048, 1e-3, 3.0, 0.0, 0.01);
    let mut flagged_snapshots = 0;
    for s in &traj.states {
        let snap = to_eulerian(s, 1e-3);
        let h = s.grid_y[1] - s.grid_y[0];
        let scale = energy(s);
        let mut i = 0;
        while i < s.len() {
            if snap.singular[i] {
                let start = i;
                while i + 1 < s.len() && snap.singular[i + 1] {
                    i += 1;
                }
                let run = &s.u[start..=i];
                let spread = run.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - run.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(spread <= 10.0 * h * scale, "t = {}: spread {spread}", s.t);
                flagged_snapshots += 1;
            }
            i += 1;
        }
    }
    assert!(flagged_snapshots > 0, "the collision was never flagged");
}

#[test]
fn half_holder_bound_holds_before_and_after_breaking() {
    for traj in [
        run(pair(), 1024, 2e-3, 3.5, 0.0, 0.1),
        run(Preset::Gaussian { a: 1.0, w: 2.0 }, 512, 2e-3, 1.0, 0.1, 0.25),
    ] {
        let (q, bound) = holder_quotient(&traj, 10_000, 7);
        assert!(q < bound, "quotient {q} exceeds {bound}");
    }
}

#[test]
fn forcing_sign_sets_energy_trend() {
    for k in [0.2, -0.2] {
        let traj = run(Preset::Gaussian { a: 0.8, w: 1.5 }, 512, 2e-3, 0.2, k, 0.05);
        let e0 = traj.diagnostics[0].energy;
        for r in &traj.diagnostics[1..] {
            assert_eq!((r.energy - e0).signum(), k.signum(), "t = {}", r.t);
        }
    }
}

#[test]
fn backward_run_retraces_forward_run() {
    let forward = run(Preset::Gaussian { a: 1.0, w: 2.0 }, 256, 5e-3, 0.5, 0.1, 0.5);
    let mut start = forward.last().clone();
    start.t = 0.0;
    let cfg = SolverConfig::new(256, 5e-3, -0.5, 0.1);
    let back = integrate(&start, &cfg).unwrap();
    let end = back.last();
    let first = &forward.states[0];
    let dev = end
        .u
        .iter()
        .zip(&first.u)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(dev < 1e-8, "deviation {dev}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_is_trapezoid_of_density(a in -1.5f64..1.5, w in 0.5f64..3.0) {
        let data = Preset::Gaussian { a, w }.initial_data(20.0).unwrap();
        let s = build_initial_state(&data, &SolverConfig::new(1025, 1e-3, 1.0, 0.0)).unwrap();
        let wts = trapezoid_weights(&s.grid_y);
        let direct: f64 = (0..s.len())
            .map(|i| {
                let (sn, c) = (0.5 * s.v[i]).sin_cos();
                wts[i] * s.xi[i] * (s.u[i] * s.u[i] * c * c + sn * sn)
            })
            .sum();
        prop_assert!((energy(&s) - direct).abs() <= 1e-12 * (1.0 + direct));
        // H¹ norm of the Gaussian: a²w√(π/2)(1 + 1/w²).
        let exact = a * a * w * (std::f64::consts::PI / 2.0).sqrt() * (1.0 + 1.0 / (w * w));
        prop_assert!((energy(&s) - exact).abs() <= 1e-4 * (1.0 + exact));
    }
}
