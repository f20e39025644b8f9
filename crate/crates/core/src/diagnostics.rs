//! Energy, forced energy balance, pointwise identities and weak-form residuals.
//!
//! The energy of a state is
//!
//! ```text
//! E = ∫ (u² ξ cos²(v/2) + ξ sin²(v/2)) dY,
//! ```
//!
//! which equals `∫(u² + u_x²)dx` plus the singular mass. It evolves by
//! `dE/dt = 2k F` with `F = ∫ u² ξ cos²(v/2) dY ≤ E`, so that
//! `E(0)e^{−2|k|t} ≤ E(t) ≤ E(0)e^{2|k|t}`.

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::initmap::LagrangianState;
use crate::nonlocal::eval_nonlocal_fast;
use crate::numerics::trapezoid_weights;

/// Scalar diagnostics of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub energy: f64,
    pub forcing_integral: f64,
    pub uy_residual: f64,
    pub xy_residual: f64,
}

/// Energy, forcing integral and identity residuals of `state`.
pub fn record(state: &LagrangianState) -> DiagnosticRecord {
    let (uy_residual, xy_residual) = identity_residuals(state);
    DiagnosticRecord {
        t: state.t,
        energy: energy(state),
        forcing_integral: forcing_integral(state),
        uy_residual,
        xy_residual,
    }
}

fn weighted_sum(state: &LagrangianState, density: impl Fn(usize, f64, f64) -> f64) -> f64 {
    let w = trapezoid_weights(&state.grid_y);
    (0..state.len())
        .map(|i| {
            let (s, c) = (0.5 * state.v[i]).sin_cos();
            w[i] * density(i, s * s, c * c)
        })
        .sum()
}

/// Trapezoid of `u² ξ cos²(v/2) + ξ sin²(v/2)` over the grid.
pub fn energy(state: &LagrangianState) -> f64 {
    weighted_sum(state, |i, s2, c2| state.xi[i] * (state.u[i] * state.u[i] * c2 + s2))
}

/// Trapezoid of `u² ξ cos²(v/2)` over the grid.
pub fn forcing_integral(state: &LagrangianState) -> f64 {
    weighted_sum(state, |i, _, c2| state.xi[i] * state.u[i] * state.u[i] * c2)
}

/// Sup-norm defects of `u_Y = ½ξ sin v` and `x_Y = ξ cos²(v/2)`.
///
/// Derivatives are cell differences `(f_{i+1} − f_i)/ΔY` compared with the cell
/// mean of the right-hand side. This is second order on smooth states like a
/// centered difference, and stays bounded across a crest where `v` jumps.
pub fn identity_residuals(state: &LagrangianState) -> (f64, f64) {
    let n = state.len();
    let mut uy: f64 = 0.0;
    let mut xy: f64 = 0.0;
    let rhs = |i: usize| {
        let (s, c) = (0.5 * state.v[i]).sin_cos();
        (state.xi[i] * s * c, state.xi[i] * c * c)
    };
    let mut prev = rhs(0);
    for i in 0..n.saturating_sub(1) {
        let next = rhs(i + 1);
        let h = state.grid_y[i + 1] - state.grid_y[i];
        let du = (state.u[i + 1] - state.u[i]) / h;
        let dx = (state.x[i + 1] - state.x[i]) / h;
        uy = uy.max((du - 0.5 * (prev.0 + next.0)).abs());
        xy = xy.max((dx - 0.5 * (prev.1 + next.1)).abs());
        prev = next;
    }
    (uy, xy)
}

/// `max_j |E(t_j) − E(0) − 2k∫₀^{t_j} F| / (1 + E(0))`, the time integral by the
/// trapezoid rule over the diagnostic records.
pub fn energy_balance_residual(traj: &Trajectory, k: f64) -> f64 {
    let recs = &traj.diagnostics;
    let Some(first) = recs.first() else {
        return 0.0;
    };
    let mut integral = 0.0;
    let mut worst: f64 = 0.0;
    for w in recs.windows(2) {
        integral += 0.5 * (w[1].t - w[0].t) * (w[0].forcing_integral + w[1].forcing_integral);
        let defect = w[1].energy - first.energy - 2.0 * k * integral;
        worst = worst.max(defect.abs());
    }
    worst / (1.0 + first.energy)
}

/// Outcome of the two-sided exponential energy bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
    /// `max_t E(t) / (E(0) e^{2|k|t})`.
    pub upper_ratio: f64,
    /// `min_t E(t) / (E(0) e^{−2|k|t})`.
    pub lower_ratio: f64,
    pub passed: bool,
}

/// Relative slack allowed on both exponential bounds.
pub const GRONWALL_TOLERANCE: f64 = 1e-3;

/// Checks `E(0)e^{−2|k|t}(1 − tol) ≤ E(t) ≤ E(0)e^{2|k|t}(1 + tol)` at all records.
pub fn gronwall_check(traj: &Trajectory, k: f64) -> GronwallReport {
    let recs = &traj.diagnostics;
    let e0 = recs.first().map_or(0.0, |r| r.energy);
    let (mut upper, mut lower) = (1.0_f64, 1.0_f64);
    if e0 > 0.0 {
        upper = f64::NEG_INFINITY;
        lower = f64::INFINITY;
        for r in recs {
            let growth = (2.0 * k.abs() * (r.t - recs[0].t).abs()).exp();
            upper = upper.max(r.energy / (e0 * growth));
            lower = lower.min(r.energy * growth / e0);
        }
    }
    GronwallReport {
        upper_ratio: upper,
        lower_ratio: lower,
        passed: upper <= 1.0 + GRONWALL_TOLERANCE && lower >= 1.0 - GRONWALL_TOLERANCE,
    }
}

/// `∫_{−1}^{1} exp(−1/(1−r²)) dr`.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_4;

/// Smooth compactly supported test function
/// `φ(t, x) = B((t−t₀)/σ_t)·B((x−x₀)/σ_x)` with `B(r) = exp(−1/(1−r²))` on `|r| < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTestFunction {
    pub t0: f64,
    pub x0: f64,
    pub sigma_t: f64,
    pub sigma_x: f64,
}

fn bump(r: f64) -> (f64, f64) {
    let q = 1.0 - r * r;
    if q <= 0.0 {
        return (0.0, 0.0);
    }
    let b = (-1.0 / q).exp();
    (b, b * (-2.0 * r / (q * q)))
}

impl BumpTestFunction {
    pub fn new(t0: f64, x0: f64, sigma_t: f64, sigma_x: f64) -> Self {
        Self {
            t0,
            x0,
            sigma_t,
            sigma_x,
        }
    }

    /// `(φ, φ_t, φ_x)` at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (bt, dbt) = bump((t - self.t0) / self.sigma_t);
        let (bx, dbx) = bump((x - self.x0) / self.sigma_x);
        (bt * bx, dbt * bx / self.sigma_t, bt * dbx / self.sigma_x)
    }

    /// `∫∫ |φ| dx dt`.
    pub fn l1_norm(&self) -> f64 {
        self.sigma_t * self.sigma_x * BUMP_INTEGRAL * BUMP_INTEGRAL
    }
}

/// Residuals of the weak momentum equation and the weak energy balance,
///
/// ```text
/// ∫∫ −u_x φ_t − u u_x φ_x + (−½u_x² − u² + P − kQ_x) φ  dx dt
/// ∫∫ u_x² φ_t + u u_x² φ_x + 2u_x(u² − P + kQ_x) φ    dx dt
/// ```
///
/// each divided by `∫∫|φ|`. The space integrals are evaluated on the Lagrangian
/// grid through `u_x dx = ½ξ sin v dY`, `u_x² dx = ξ sin²(v/2) dY` and
/// `dx = ξ cos²(v/2) dY`, which stays finite through breaking and accounts for
/// the singular part of the energy measure. The time integral is the trapezoid
/// rule over the trajectory snapshots.
pub fn weak_residuals(traj: &Trajectory, k: f64, phi: &BumpTestFunction) -> Result<(f64, f64)> {
    let (t_lo, t_hi) = (phi.t0 - phi.sigma_t, phi.t0 + phi.sigma_t);
    let first = traj.states.first().map_or(0.0, |s| s.t);
    let last = traj.states.last().map_or(0.0, |s| s.t);
    if !(phi.sigma_t > 0.0 && phi.sigma_x > 0.0) {
        return Err(Error::Usage("test function widths must be positive".into()));
    }
    if !(t_lo > 0.0 && t_lo >= first && t_hi <= last) {
        return Err(Error::Usage(format!(
            "test function time support [{t_lo}, {t_hi}] is not inside the computed window ({first}, {last}] with t > 0"
        )));
    }
    let mut slices = Vec::with_capacity(traj.states.len());
    for st in &traj.states {
        let (x_lo, x_hi) = (st.x[0], st.x[st.len() - 1]);
        let active = st.t > t_lo && st.t < t_hi;
        if active && !(phi.x0 - phi.sigma_x >= x_lo && phi.x0 + phi.sigma_x <= x_hi) {
            return Err(Error::Usage(format!(
                "test function space support [{}, {}] leaves the computed range [{x_lo}, {x_hi}] at t = {}",
                phi.x0 - phi.sigma_x,
                phi.x0 + phi.sigma_x,
                st.t
            )));
        }
        slices.push(if active {
            space_integrals(st, k, phi)
        } else {
            (0.0, 0.0)
        });
    }
    let (mut r1, mut r2) = (0.0, 0.0);
    for i in 0..traj.states.len().saturating_sub(1) {
        let dt = traj.states[i + 1].t - traj.states[i].t;
        r1 += 0.5 * dt * (slices[i].0 + slices[i + 1].0);
        r2 += 0.5 * dt * (slices[i].1 + slices[i + 1].1);
    }
    let norm = phi.l1_norm();
    Ok((r1 / norm, r2 / norm))
}

fn space_integrals(st: &LagrangianState, k: f64, phi: &BumpTestFunction) -> (f64, f64) {
    let nl = eval_nonlocal_fast(st);
    let w = trapezoid_weights(&st.grid_y);
    let (mut m, mut b) = (0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        let (p, pt, px) = phi.eval(st.t, st.x[i]);
        if p == 0.0 && pt == 0.0 && px == 0.0 {
            continue;
        }
        let (s, c) = (0.5 * st.v[i]).sin_cos();
        let xi = st.xi[i];
        let u = st.u[i];
        let ux_dx = xi * s * c;
        let ux2_dx = xi * s * s;
        let dx = xi * c * c;
        let w_src = u * u - nl.p[i] + k * nl.q_x[i];
        m += wi * (-ux_dx * pt - u * ux_dx * px - 0.5 * ux2_dx * p - w_src * p * dx);
        b += wi * (ux2_dx * (pt + u * px) + 2.0 * ux_dx * w_src * p);
    }
    (m, b)
}
