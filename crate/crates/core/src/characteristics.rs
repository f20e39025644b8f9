//! Generalized characteristics in the energy coordinate
//!
//! ```text
//! β = x + μ_t((−∞, x)),
//! ```
//!
//! where `μ_t` is the energy measure `u_x² dx` plus its singular part. At fixed
//! time `β ↦ x` is nondecreasing and 1-Lipschitz. A characteristic solves
//! `dβ/dt = G(t, β)` with
//!
//! ```text
//! G(t, β) = ∫_{−∞}^{x(t,β)} [u_x + 2(u² − P + kQ_x) u_x] dx,
//! ```
//!
//! and along it `d/dt u = −(P_x − kQ)` and
//! `d/dt v = 2(u² − P + kQ_x)cos²(v/2) − sin²(v/2)`.
//!
//! A snapshot is represented by a table over the Lagrangian nodes: `β_i`, `x_i`
//! and field values at the nodes. Between nodes everything is linear in the table
//! parameter, which makes `x(β)` piecewise linear with slope `Δx/Δβ ≤ 1`.

use crate::error::{Error, Result};
use crate::eulerian::{sin2_density, to_eulerian, EulerianSnapshot};
use crate::evolve::Trajectory;
use crate::nonlocal::eval_nonlocal_fast;
use crate::numerics::{angle_difference, wrap_angle};

/// A traced characteristic sampled at the trajectory's snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub times: Vec<f64>,
    pub beta: Vec<f64>,
    pub x_path: Vec<f64>,
    pub u_path: Vec<f64>,
    /// Lagrangian label `Y` of the path point.
    pub y_path: Vec<f64>,
}

/// Cumulative `β` over the nodes of a snapshot, with the positions it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    pub t: f64,
    /// Node positions of the snapshot (nondecreasing).
    pub x: Vec<f64>,
    pub beta: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl BetaTable {
    /// Cell masses are the trapezoid of `ξ sin²(v/2) dY`, which is `u_x² dx` on
    /// regular cells and includes the singular part of the measure where `x` is flat.
    pub fn from_snapshot(snap: &EulerianSnapshot) -> Self {
        let n = snap.len();
        let mut x = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        let mut mass = 0.0;
        x.push(snap.x[0]);
        beta.push(snap.x[0]);
        let mut prev = sin2_density(snap.v[0], snap.xi[0]);
        for i in 1..n {
            let xi = snap.x[i];
            let cur = sin2_density(snap.v[i], snap.xi[i]);
            mass += 0.5 * (snap.y[i] - snap.y[i - 1]) * (prev + cur);
            prev = cur;
            x.push(xi);
            beta.push(xi + mass);
        }
        Self {
            t: snap.t,
            x,
            beta,
            y: snap.y.clone(),
            u: snap.u.clone(),
            v: snap.v.clone(),
        }
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta[0], self.beta[self.beta.len() - 1])
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// `β(x)`; at an atom (several nodes at the same `x`) the lower end of its bracket.
    pub fn beta_of_x(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_range();
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain(format!("x = {x} lies outside [{lo}, {hi}]")));
        }
        let j = self.x.partition_point(|&v| v < x);
        if self.x[j] == x {
            return Ok(self.beta[j]);
        }
        let th = (x - self.x[j - 1]) / (self.x[j] - self.x[j - 1]);
        Ok(self.beta[j - 1] + th * (self.beta[j] - self.beta[j - 1]))
    }

    /// Cell index and position within it of `beta`.
    pub fn locate(&self, beta: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.beta_range();
        if !(beta >= lo && beta <= hi) {
            return Err(Error::Domain(format!("beta = {beta} lies outside [{lo}, {hi}]")));
        }
        let n = self.beta.len();
        let j = self.beta.partition_point(|&b| b <= beta).clamp(1, n - 1);
        let db = self.beta[j] - self.beta[j - 1];
        let th = if db > 0.0 {
            ((beta - self.beta[j - 1]) / db).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok((j - 1, th))
    }

    /// Linear interpolation of nodal `values` at `beta`.
    pub fn interp(&self, values: &[f64], beta: f64) -> Result<f64> {
        let (i, th) = self.locate(beta)?;
        Ok(values[i] + th * (values[i + 1] - values[i]))
    }

    pub fn x_of_beta(&self, beta: f64) -> Result<f64> {
        self.interp(&self.x, beta)
    }

    /// `v` at `beta`, interpolated along the shorter arc of the circle.
    pub fn v_of_beta(&self, beta: f64) -> Result<f64> {
        let (i, th) = self.locate(beta)?;
        Ok(wrap_angle(self.v[i] + th * angle_difference(self.v[i], self.v[i + 1])))
    }
}

/// `β` at position `x` of a snapshot.
pub fn beta_of_x(snap: &EulerianSnapshot, x: f64) -> Result<f64> {
    BetaTable::from_snapshot(snap).beta_of_x(x)
}

/// Position with energy coordinate `beta`; inside an atom this is the atom's `x`.
pub fn x_of_beta(snap: &EulerianSnapshot, beta: f64) -> Result<f64> {
    BetaTable::from_snapshot(snap).x_of_beta(beta)
}

/// A snapshot prepared for characteristic tracing.
#[derive(Debug, Clone)]
pub struct CharacteristicField {
    pub table: BetaTable,
    /// `G` at the nodes.
    pub g: Vec<f64>,
    /// `u² − P + kQ_x` at the nodes.
    pub w: Vec<f64>,
    /// `P_x − kQ` at the nodes.
    pub drift: Vec<f64>,
}

impl CharacteristicField {
    pub fn new(state: &crate::initmap::LagrangianState, k: f64, threshold: f64) -> Self {
        let snap = to_eulerian(state, threshold);
        let table = BetaTable::from_snapshot(&snap);
        let nl = eval_nonlocal_fast(state);
        let n = state.len();
        let w: Vec<f64> = (0..n)
            .map(|i| state.u[i] * state.u[i] - nl.p[i] + k * nl.q_x[i])
            .collect();
        let drift: Vec<f64> = (0..n).map(|i| nl.p_x[i] - k * nl.q[i]).collect();
        // G_i = u_i + ∫ 2w u_x dx, cellwise 2·(mean w)·Δu; u vanishes to the left.
        let mut g = Vec::with_capacity(n);
        let mut acc = 0.0;
        g.push(state.u[0]);
        for i in 1..n {
            acc += (w[i] + w[i - 1]) * (state.u[i] - state.u[i - 1]);
            g.push(state.u[i] + acc);
        }
        Self { table, g, w, drift }
    }

    pub fn g_at(&self, beta: f64) -> Result<f64> {
        self.table.interp(&self.g, beta)
    }
}

/// Snapshot fields of a whole trajectory.
pub fn characteristic_fields(traj: &Trajectory, k: f64) -> Vec<CharacteristicField> {
    let threshold = traj.config.singular_threshold;
    traj.states
        .iter()
        .map(|s| CharacteristicField::new(s, k, threshold))
        .collect()
}

/// Traces the characteristic through `x0` at the first snapshot.
///
/// `dβ/dt = G` is integrated by RK4 with one step per snapshot interval, `G`
/// being linear in time between snapshots.
pub fn trace_characteristic(traj: &Trajectory, k: f64, x0: f64) -> Result<CharacteristicPath> {
    let fields = characteristic_fields(traj, k);
    trace_in_fields(&fields, x0)
}

/// As [`trace_characteristic`], reusing prepared fields.
pub fn trace_in_fields(fields: &[CharacteristicField], x0: f64) -> Result<CharacteristicPath> {
    let first = fields
        .first()
        .ok_or_else(|| Error::Usage("trajectory has no snapshots".into()))?;
    let beta0 = first.table.beta_of_x(x0)?;
    let mut path = CharacteristicPath {
        times: Vec::with_capacity(fields.len()),
        beta: Vec::with_capacity(fields.len()),
        x_path: Vec::with_capacity(fields.len()),
        u_path: Vec::with_capacity(fields.len()),
        y_path: Vec::with_capacity(fields.len()),
    };
    let mut beta = beta0;
    for (j, field) in fields.iter().enumerate() {
        if j > 0 {
            let prev = &fields[j - 1];
            let (t0, t1) = (prev.table.t, field.table.t);
            let h = t1 - t0;
            let g = |theta: f64, b: f64| -> Result<f64> {
                let t = t0 + theta * h;
                let a = prev.g_at(b).map_err(|_| Error::Truncation { t, beta: b })?;
                let c = field.g_at(b).map_err(|_| Error::Truncation { t, beta: b })?;
                Ok((1.0 - theta) * a + theta * c)
            };
            let k1 = g(0.0, beta)?;
            let k2 = g(0.5, beta + 0.5 * h * k1)?;
            let k3 = g(0.5, beta + 0.5 * h * k2)?;
            let k4 = g(1.0, beta + h * k3)?;
            beta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let tab = &field.table;
        let t = tab.t;
        let x = tab.x_of_beta(beta).map_err(|_| Error::Truncation { t, beta })?;
        path.times.push(t);
        path.beta.push(beta);
        path.x_path.push(x);
        path.u_path.push(tab.interp(&tab.u, beta)?);
        path.y_path.push(tab.interp(&tab.y, beta)?);
    }
    Ok(path)
}

/// Defects of the evolution laws of `u` and `v` along `path`, each the maximum
/// over path times of `|f(t) − f(0) − ∫₀^t rhs|` with the time integral by the
/// trapezoid rule (the `v` defect measured on the circle).
pub fn verify_along_path(traj: &Trajectory, k: f64, path: &CharacteristicPath) -> Result<(f64, f64)> {
    let fields = characteristic_fields(traj, k);
    verify_in_fields(&fields, path)
}

/// As [`verify_along_path`], reusing prepared fields.
pub fn verify_in_fields(fields: &[CharacteristicField], path: &CharacteristicPath) -> Result<(f64, f64)> {
    let (du, dv) = path_defects(fields, path)?;
    let sup = |d: &[f64]| d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok((sup(&du), sup(&dv)))
}

/// Running defects `f(t_j) − f(0) − ∫₀^{t_j} rhs` of `u` and `v` at every path time.
pub fn path_defects(fields: &[CharacteristicField], path: &CharacteristicPath) -> Result<(Vec<f64>, Vec<f64>)> {
    if fields.len() != path.times.len() {
        return Err(Error::Usage(format!(
            "path has {} samples but the trajectory has {} snapshots",
            path.times.len(),
            fields.len()
        )));
    }
    let mut u_rhs = Vec::with_capacity(fields.len());
    let mut v_rhs = Vec::with_capacity(fields.len());
    let mut v_path = Vec::with_capacity(fields.len());
    for (f, &b) in fields.iter().zip(&path.beta) {
        let v = f.table.v_of_beta(b)?;
        let w = f.table.interp(&f.w, b)?;
        let (s, c) = (0.5 * v).sin_cos();
        u_rhs.push(-f.table.interp(&f.drift, b)?);
        v_rhs.push(2.0 * w * c * c - s * s);
        v_path.push(v);
    }
    let (mut iu, mut iv) = (0.0, 0.0);
    let mut du = vec![0.0; fields.len()];
    let mut dv = vec![0.0; fields.len()];
    let mut v_unwrapped = v_path[0];
    for j in 1..fields.len() {
        let h = path.times[j] - path.times[j - 1];
        iu += 0.5 * h * (u_rhs[j - 1] + u_rhs[j]);
        iv += 0.5 * h * (v_rhs[j - 1] + v_rhs[j]);
        v_unwrapped += angle_difference(v_path[j - 1], v_path[j]);
        du[j] = path.u_path[j] - path.u_path[0] - iu;
        dv[j] = v_unwrapped - v_path[0] - iv;
    }
    Ok((du, dv))
}

/// `max |ΔG/Δβ|` over the cells of all snapshots, the Lipschitz constant of the
/// characteristic flow.
pub fn g_beta_bound(fields: &[CharacteristicField]) -> f64 {
    let mut c: f64 = 0.0;
    for f in fields {
        for i in 0..f.g.len() - 1 {
            let db = f.table.beta[i + 1] - f.table.beta[i];
            if db > 0.0 {
                c = c.max(((f.g[i + 1] - f.g[i]) / db).abs());
            }
        }
    }
    c
}
