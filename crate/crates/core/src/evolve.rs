//! Time integration of the characteristic system
//!
//! ```text
//! u_T = −P_x + kQ
//! v_T = −sin²(v/2) + 2cos²(v/2)(u² − P + kQ_x)
//! ξ_T = ξ sin v (½ + u² − P + kQ_x)
//! x_T = u
//! ```
//!
//! by classical RK4 with a fixed step. The angle `v` lives on the circle and is
//! re-wrapped to (−π, π] after every step; only its trigonometric functions enter
//! the right-hand side.
//!
//! The system is not stiff; `dt ≤ 0.5·min ΔY` is a safe choice.

use crate::diagnostics::{self, DiagnosticRecord};
use crate::error::{Error, Result};
use crate::initmap::{LagrangianState, SolverConfig};
use crate::nonlocal::{FastSweep, NonlocalOperator};
use crate::numerics::wrap_angle;

/// Time derivatives of `(u, v, ξ, x)` at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dxi: Vec<f64>,
    pub dx: Vec<f64>,
}

/// Snapshots at the requested output times, with diagnostics.
///
/// If the march stopped early, `error` holds the reason and `states` ends at the
/// last output time reached.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<LagrangianState>,
    pub diagnostics: Vec<DiagnosticRecord>,
    pub config: SolverConfig,
    pub error: Option<Error>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &LagrangianState {
        self.states.last().expect("a trajectory always holds its initial state")
    }

    /// The snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> &LagrangianState {
        self.states
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("a trajectory always holds its initial state")
    }
}

/// Right-hand side with the O(N) nonlocal sweep.
pub fn rhs(state: &LagrangianState, k: f64) -> StateDerivative {
    rhs_with(&FastSweep, state, k)
}

/// Right-hand side with an arbitrary nonlocal operator.
pub fn rhs_with<O: NonlocalOperator + ?Sized>(op: &O, state: &LagrangianState, k: f64) -> StateDerivative {
    let n = state.len();
    let nl = op.evaluate(state);
    let mut d = StateDerivative {
        du: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        dxi: Vec::with_capacity(n),
        dx: state.u.clone(),
    };
    for i in 0..n {
        let u = state.u[i];
        let (s, c) = (0.5 * state.v[i]).sin_cos();
        let w = u * u - nl.p[i] + k * nl.q_x[i];
        d.du.push(-nl.p_x[i] + k * nl.q[i]);
        d.dv.push(-s * s + 2.0 * c * c * w);
        // sin v = 2 sin(v/2) cos(v/2)
        d.dxi.push(state.xi[i] * 2.0 * s * c * (0.5 + w));
    }
    d
}

fn axpy(base: &LagrangianState, d: &StateDerivative, h: f64) -> LagrangianState {
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a + h * b).collect();
    LagrangianState {
        t: base.t + h,
        grid_y: base.grid_y.clone(),
        u: add(&base.u, &d.du),
        v: add(&base.v, &d.dv),
        xi: add(&base.xi, &d.dxi),
        x: add(&base.x, &d.dx),
    }
}

/// One RK4 step with the fast nonlocal sweep.
pub fn step_rk4(state: &LagrangianState, dt: f64, k: f64, xi_floor: f64) -> Result<LagrangianState> {
    step_rk4_with(&FastSweep, state, dt, k, xi_floor)
}

/// One classical RK4 step of size `dt` (negative steps march backwards).
///
/// Fails with [`Error::Instability`] if any `ξ` ends at or below `xi_floor`.
pub fn step_rk4_with<O: NonlocalOperator + ?Sized>(
    op: &O,
    state: &LagrangianState,
    dt: f64,
    k: f64,
    xi_floor: f64,
) -> Result<LagrangianState> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::Usage(format!("step size must be finite and nonzero, got {dt}")));
    }
    let k1 = rhs_with(op, state, k);
    let k2 = rhs_with(op, &axpy(state, &k1, 0.5 * dt), k);
    let k3 = rhs_with(op, &axpy(state, &k2, 0.5 * dt), k);
    let k4 = rhs_with(op, &axpy(state, &k3, dt), k);

    let n = state.len();
    let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    let next = LagrangianState {
        t: state.t + dt,
        grid_y: state.grid_y.clone(),
        u: combine(&state.u, &k1.du, &k2.du, &k3.du, &k4.du),
        v: combine(&state.v, &k1.dv, &k2.dv, &k3.dv, &k4.dv)
            .into_iter()
            .map(wrap_angle)
            .collect(),
        xi: combine(&state.xi, &k1.dxi, &k2.dxi, &k3.dxi, &k4.dxi),
        x: combine(&state.x, &k1.dx, &k2.dx, &k3.dx, &k4.dx),
    };
    if let Some(index) = next.xi.iter().position(|&xi| !(xi > xi_floor)) {
        return Err(Error::Instability {
            index,
            t: next.t,
            xi: next.xi[index],
            floor: xi_floor,
        });
    }
    Ok(next)
}

/// Marches `initial` to every output time of `cfg` with the fast nonlocal sweep.
pub fn integrate(initial: &LagrangianState, cfg: &SolverConfig) -> Result<Trajectory> {
    integrate_with(&FastSweep, initial, cfg)
}

/// Fixed-step RK4 march through the output times of `cfg`.
///
/// Each interval between consecutive output times is split into the smallest
/// number of equal sub-steps no longer than `cfg.dt`, so every output time is hit
/// exactly. The first snapshot is `initial` itself. A negative `t_end` marches
/// backwards in time. An instability ends the march and is reported in
/// [`Trajectory::error`]; configuration and state errors are returned directly.
pub fn integrate_with<O: NonlocalOperator + ?Sized>(
    op: &O,
    initial: &LagrangianState,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    initial.validate()?;
    let mut traj = Trajectory {
        states: vec![initial.clone()],
        diagnostics: vec![diagnostics::record(initial)],
        config: cfg.clone(),
        error: None,
    };
    let mut current = initial.clone();
    for &target in &cfg.output_times {
        let span = target - current.t;
        if span.abs() <= 1e-12 * (1.0 + target.abs()) {
            continue;
        }
        let steps = (span.abs() / cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            match step_rk4_with(op, &current, h, cfg.k, cfg.xi_floor) {
                Ok(next) => current = next,
                Err(e) => {
                    traj.error = Some(e);
                    return Ok(traj);
                }
            }
        }
        current.t = target;
        traj.diagnostics.push(diagnostics::record(&current));
        traj.states.push(current.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initmap::build_initial_state;
    use crate::nonlocal::{NaiveQuadrature, NonlocalTerms};
    use crate::numerics::{linspace, max_abs};
    use crate::presets::Preset;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    struct ZeroOperator;

    impl NonlocalOperator for ZeroOperator {
        fn evaluate(&self, state: &LagrangianState) -> NonlocalTerms {
            NonlocalTerms::zeros(state.len())
        }
    }

    fn preset_state(p: Preset, n: usize) -> LagrangianState {
        let data = p.initial_data(20.0).unwrap();
        build_initial_state(&data, &SolverConfig::new(n, 1e-3, 1.0, 0.0)).unwrap()
    }

    fn max_dev(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let st = LagrangianState::zero(linspace(-5.0, 5.0, 64));
        let d = rhs(&st, 0.3);
        for arr in [&d.du, &d.dv, &d.dxi, &d.dx] {
            assert!(arr.iter().all(|&v| v == 0.0));
        }
        let next = step_rk4(&st, 0.01, 0.3, 1e-8).unwrap();
        assert_eq!(next.u, st.u);
        assert_eq!(next.v, st.v);
        assert_eq!(next.xi, st.xi);
        assert_eq!(next.x, st.x);
        assert_eq!(next.t, 0.01);
    }

    #[test]
    fn antipodal_angle_has_unit_decay_and_frozen_xi() {
        let mut st = LagrangianState::zero(linspace(-5.0, 5.0, 41));
        st.u = st.grid_y.iter().map(|y| 0.3 * (-y * y).exp()).collect();
        st.v[20] = PI;
        let d = rhs(&st, 0.2);
        assert_abs_diff_eq!(d.dv[20], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dxi[20], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn peakon_crest_moves_with_unit_speed_and_zero_acceleration() {
        let st = preset_state(Preset::Peakon { c: 1.0 }, 2049);
        let mid = 1024;
        assert_eq!(st.x[mid], 0.0);
        let fast = rhs(&st, 0.0);
        assert_abs_diff_eq!(fast.du[mid], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fast.dx[mid], 1.0, epsilon = 1e-15);
        let small = preset_state(Preset::Peakon { c: 1.0 }, 257);
        let naive = rhs_with(&NaiveQuadrature, &small, 0.0);
        assert_abs_diff_eq!(naive.du[128], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_angle_equation_is_fourth_order() {
        // With P ≡ 0 and u ≡ 0, v' = −sin²(v/2), so cot(v/2) = cot(v₀/2) + t/2.
        let exact = 2.0 * (2.0_f64 / 3.0).atan();
        let run = |dt: f64| {
            let mut st = LagrangianState::zero(linspace(0.0, 1.0, 3));
            st.v = vec![PI / 2.0; 3];
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                st = step_rk4_with(&ZeroOperator, &st, dt, 0.0, 1e-8).unwrap();
            }
            (st.v[1] - exact).abs()
        };
        let (e1, e2) = (run(0.1), run(0.05));
        assert!(e1 < 1e-6);
        let ratio = e1 / e2;
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn fixed_interval_error_scales_with_dt_to_the_fourth() {
        let st = preset_state(
            Preset::PeakonPair {
                c: 1.0,
                d: -0.5,
                offset: 2.0,
            },
            256,
        );
        let run = |dt: f64| {
            let mut s = st.clone();
            let steps = (0.4 / dt).round() as usize;
            for _ in 0..steps {
                s = step_rk4(&s, dt, 0.1, 1e-8).unwrap();
            }
            s
        };
        let reference = run(0.005);
        let err = |s: &LagrangianState| max_dev(&s.u, &reference.u).max(max_dev(&s.xi, &reference.xi));
        let (e1, e2) = (err(&run(0.1)), err(&run(0.05)));
        let ratio = e1 / e2;
        assert!(ratio > 12.0, "ratio {ratio}, errors {e1:e} {e2:e}");
    }

    #[test]
    fn wrapping_preserves_the_right_hand_side() {
        let mut st = preset_state(Preset::Gaussian { a: 1.0, w: 1.0 }, 128);
        st.v = st.v.iter().map(|v| v * 2.5).collect();
        let mut unwrapped = st.clone();
        for (i, v) in unwrapped.v.iter_mut().enumerate() {
            *v += 2.0 * PI * ((i % 3) as f64 - 1.0);
        }
        let mut wrapped = unwrapped.clone();
        wrapped.v = wrapped.v.iter().map(|&v| wrap_angle(v)).collect();
        let (a, b) = (rhs(&unwrapped, 0.1), rhs(&wrapped, 0.1));
        for (x, y) in [(&a.du, &b.du), (&a.dv, &b.dv), (&a.dxi, &b.dxi), (&a.dx, &b.dx)] {
            assert!(max_dev(x, y) <= 1e-12 * (1.0 + max_abs(y)));
        }
    }

    #[test]
    fn integrate_hits_output_times_and_is_deterministic() {
        let st = preset_state(Preset::Gaussian { a: 1.0, w: 2.0 }, 128);
        let cfg = SolverConfig {
            output_times: vec![0.0, 0.13, 0.3],
            ..SolverConfig::new(128, 0.04, 0.3, 0.1)
        };
        let a = integrate(&st, &cfg).unwrap();
        let b = integrate(&st, &cfg).unwrap();
        assert_eq!(a.times(), vec![0.0, 0.13, 0.3]);
        assert_eq!(a.diagnostics.len(), 3);
        assert!(a.is_complete());
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let st = preset_state(Preset::Zero, 64);
        let cfg = SolverConfig::new(64, 0.1, 1.0, 0.5).with_output_interval(0.25);
        let traj = integrate(&st, &cfg).unwrap();
        assert_eq!(traj.states.len(), 5);
        for s in &traj.states {
            assert!(s.u.iter().chain(&s.v).all(|&v| v == 0.0));
            assert!(s.xi.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn backward_march_returns_to_the_start() {
        let st = preset_state(Preset::Gaussian { a: 0.5, w: 2.0 }, 128);
        let fwd = integrate(&st, &SolverConfig::new(128, 0.01, 0.5, 0.1)).unwrap();
        let mut end = fwd.last().clone();
        end.t = 0.0;
        let back = integrate(&end, &SolverConfig::new(128, 0.01, -0.5, 0.1)).unwrap();
        assert!(max_dev(&back.last().u, &st.u) < 1e-8);
        assert!(max_dev(&back.last().x, &st.x) < 1e-8);
    }

    #[test]
    fn xi_floor_violation_stops_with_partial_trajectory() {
        let st = preset_state(Preset::Gaussian { a: 1.0, w: 1.0 }, 128);
        let cfg = SolverConfig {
            xi_floor: 0.999,
            ..SolverConfig::new(128, 0.01, 1.0, 0.0).with_output_interval(0.001_f64.max(0.01))
        };
        let traj = integrate(&st, &cfg).unwrap();
        match traj.error {
            Some(Error::Instability { index, t, xi, floor }) => {
                assert!(index < 128);
                assert!(t > 0.0);
                assert!(xi <= floor);
            }
            ref other => panic!("expected instability, got {other:?}"),
        }
        assert!(traj.states.len() < cfg.output_times.len());
    }
}
