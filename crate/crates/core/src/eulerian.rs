//! Eulerian view of a Lagrangian state: `u(t, x)` with `x = x(t, Y)`, and the
//! part of the energy measure concentrated where `cos(v/2)` (numerically) vanishes.
//!
//! Where `cos(v/2) = 0` the map `Y ↦ x` is flat and `u_Y = ½ξ sin v = 0`, so `u` is
//! single-valued in `x`. The energy density `ξ sin²(v/2)` over such `Y`-intervals
//! has no Eulerian counterpart `u_x² dx` and is reported as singular mass.

use crate::error::{Error, Result};
use crate::initmap::LagrangianState;
use crate::numerics::{locate_cell, trapezoid_weights};

#[derive(Debug, Clone, PartialEq)]
pub struct EulerianSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// The Lagrangian data the snapshot was built from, kept for mass bookkeeping.
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    /// Nodes with `cos²(v/2)` below the threshold.
    pub singular: Vec<bool>,
    pub singular_mass: f64,
    /// `x`-extent of each maximal run of flagged nodes.
    pub singular_support: Vec<(f64, f64)>,
}

/// Energy density `ξ sin²(v/2)` at node `i` of a state-like triple.
pub(crate) fn sin2_density(v: f64, xi: f64) -> f64 {
    let s = (0.5 * v).sin();
    xi * s * s
}

/// Builds the snapshot, flagging nodes with `cos²(v/2) < threshold` (0 < threshold < 1).
///
/// `singular_mass` is the trapezoid-weighted sum of `ξ sin²(v/2)` over flagged nodes.
/// Positions are the running maximum of the particle positions, so `x` is
/// nondecreasing even where collapsing cells overshoot by a discretization error.
pub fn to_eulerian(state: &LagrangianState, threshold: f64) -> EulerianSnapshot {
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    let n = state.len();
    let singular: Vec<bool> = state
        .v
        .iter()
        .map(|&v| {
            let c = (0.5 * v).cos();
            c * c < threshold
        })
        .collect();
    let weights = trapezoid_weights(&state.grid_y);
    let singular_mass = (0..n)
        .filter(|&i| singular[i])
        .map(|i| weights[i] * sin2_density(state.v[i], state.xi[i]))
        .fold(0.0, |a, b| a + b);

    let mut x = state.x.clone();
    for i in 1..n {
        x[i] = x[i].max(x[i - 1]);
    }

    let mut singular_support = Vec::new();
    let mut i = 0;
    while i < n {
        if singular[i] {
            let start = i;
            while i + 1 < n && singular[i + 1] {
                i += 1;
            }
            singular_support.push((x[start], x[i]));
        }
        i += 1;
    }

    EulerianSnapshot {
        t: state.t,
        x,
        u: state.u.clone(),
        y: state.grid_y.clone(),
        v: state.v.clone(),
        xi: state.xi.clone(),
        singular,
        singular_mass,
        singular_support,
    }
}

impl EulerianSnapshot {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Absolutely continuous part of the energy, `∫u² dx + ∫u_x² dx` in Lagrangian
    /// form: the trapezoid of `u²ξcos²(v/2)` over all nodes plus that of `ξ sin²(v/2)`
    /// over unflagged nodes. Together with `singular_mass` it gives the total energy.
    pub fn regular_energy(&self) -> f64 {
        let w = trapezoid_weights(&self.y);
        (0..self.len())
            .map(|i| {
                let (s, c) = (0.5 * self.v[i]).sin_cos();
                let u2 = self.u[i] * self.u[i] * self.xi[i] * c * c;
                let ux2 = if self.singular[i] { 0.0 } else { self.xi[i] * s * s };
                w[i] * (u2 + ux2)
            })
            .fold(0.0, |a, b| a + b)
    }

    /// `∫(u² + u_x²)dx` over cells with no flagged endpoint, with `u_x` the cell slope
    /// and `u²` by the trapezoid rule.
    pub fn absolutely_continuous_energy(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            if self.singular[i] || self.singular[i + 1] {
                continue;
            }
            let dx = self.x[i + 1] - self.x[i];
            if dx <= 0.0 {
                continue;
            }
            let du = self.u[i + 1] - self.u[i];
            e += 0.5 * dx * (self.u[i] * self.u[i] + self.u[i + 1] * self.u[i + 1]) + du * du / dx;
        }
        e
    }
}

/// Piecewise-linear `u` at `x_query`; on a flat cell the left node value is returned.
pub fn interpolate_u(snap: &EulerianSnapshot, x_query: f64) -> Result<f64> {
    let (lo, hi) = snap.x_range();
    if !(x_query >= lo && x_query <= hi) {
        return Err(Error::Domain(format!(
            "x = {x_query} lies outside the snapshot range [{lo}, {hi}]"
        )));
    }
    let i = locate_cell(&snap.x, x_query);
    let dx = snap.x[i + 1] - snap.x[i];
    if dx <= 0.0 {
        return Ok(snap.u[i]);
    }
    let th = ((x_query - snap.x[i]) / dx).clamp(0.0, 1.0);
    Ok(snap.u[i] + th * (snap.u[i + 1] - snap.u[i]))
}

/// Distance between two snapshots at the same time, resampled on `common_grid`:
/// `(sup|Δu|, (Σ h (δΔu/h)²)^{1/2})` with `δ` the forward difference on the grid.
pub fn h1_distance(a: &EulerianSnapshot, b: &EulerianSnapshot, common_grid: &[f64]) -> Result<(f64, f64)> {
    if (a.t - b.t).abs() > 1e-12 * (1.0 + a.t.abs()) {
        return Err(Error::Usage(format!(
            "snapshots are at different times {} and {}",
            a.t, b.t
        )));
    }
    let diff = common_grid
        .iter()
        .map(|&x| Ok(interpolate_u(a, x)? - interpolate_u(b, x)?))
        .collect::<Result<Vec<f64>>>()?;
    let sup = diff.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mut sq = 0.0;
    for i in 0..diff.len().saturating_sub(1) {
        let h = common_grid[i + 1] - common_grid[i];
        if h > 0.0 {
            let s = (diff[i + 1] - diff[i]) / h;
            sq += h * s * s;
        }
    }
    Ok((sup, sq.sqrt()))
}
