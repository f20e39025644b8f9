//! Initial Lagrangian labelling.
//!
//! The label of a particle starting at `x` is `Y(x) = x + ∫₀ˣ (u₀)_x² dx`.
//! The solver grid is uniform in `Y`; the starting positions `x₀(Y)` are
//! recovered by inverting a dense cumulative table of `Y(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{linspace, wrap_angle};

/// A real function of one variable, shareable between threads.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Oversampling factor of the dense `Y(x)` table relative to the grid size.
pub const TABLE_OVERSAMPLING: usize = 8;

/// Initial data `u₀` on a truncated domain `[−L, L]`.
#[derive(Clone)]
pub struct InitialData {
    profile: Profile,
    derivative: Option<Profile>,
    half_width: f64,
    description: String,
}

impl InitialData {
    pub fn new<F>(profile: F, half_width: f64, description: impl Into<String>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidData(format!(
                "half width L must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self {
            profile: Arc::new(profile),
            derivative: None,
            half_width,
            description: description.into(),
        })
    }

    /// Attaches the analytic derivative `(u₀)_x`.
    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn domain(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.profile)(x)
    }

    /// `(u₀)_x(x)`: the analytic derivative if one was supplied, otherwise a
    /// centered difference with step `fd_step`.
    pub fn derivative(&self, x: f64, fd_step: f64) -> f64 {
        match &self.derivative {
            Some(d) => d(x),
            None => (self.value(x + fd_step) - self.value(x - fd_step)) / (2.0 * fd_step),
        }
    }

    /// Largest of `|u₀|` and `|(u₀)_x|` at the two ends of the domain.
    ///
    /// The nonlocal terms treat data outside `[−L, L]` as zero, so this should be
    /// negligible compared with the amplitude of the data.
    pub fn tail_magnitude(&self) -> f64 {
        let l = self.half_width;
        let h = 1e-6 * l;
        [
            self.value(-l),
            self.value(l),
            self.derivative(-l, h),
            self.derivative(l, h),
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `u₀ + scale·other` on this domain.
    pub fn plus_scaled(&self, other: &InitialData, scale: f64) -> InitialData {
        let (p1, p2) = (self.profile.clone(), other.profile.clone());
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(d1), Some(d2)) => {
                let (d1, d2) = (d1.clone(), d2.clone());
                Some(Arc::new(move |x: f64| d1(x) + scale * d2(x)) as Profile)
            }
            _ => None,
        };
        InitialData {
            profile: Arc::new(move |x| p1(x) + scale * p2(x)),
            derivative,
            half_width: self.half_width,
            description: format!("{} + {scale}·({})", self.description, other.description),
        }
    }
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("description", &self.description)
            .field("half_width", &self.half_width)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// The evolved unknowns on the fixed `Y` grid, plus the particle positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub t: f64,
    pub grid_y: Vec<f64>,
    pub u: Vec<f64>,
    /// Angle variable `2·arctan(u_x)`, stored in (−π, π].
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
}

impl LagrangianState {
    /// The state `u ≡ 0`, `v ≡ 0`, `ξ ≡ 1`, `x = Y`.
    pub fn zero(grid_y: Vec<f64>) -> Self {
        let n = grid_y.len();
        Self {
            t: 0.0,
            x: grid_y.clone(),
            grid_y,
            u: vec![0.0; n],
            v: vec![0.0; n],
            xi: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grid_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_y.is_empty()
    }

    /// Checks the structural invariants: aligned arrays of length ≥ 2, a strictly
    /// increasing grid, positive ξ, finite values. Monotonicity of `x` is not
    /// enforced here since a discrete solution may violate it at round-off level.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid_y.len();
        if n < 2 {
            return Err(Error::InvalidState(format!("need at least 2 points, got {n}")));
        }
        for (name, arr) in [("u", &self.u), ("v", &self.v), ("xi", &self.xi), ("x", &self.x)] {
            if arr.len() != n {
                return Err(Error::InvalidState(format!(
                    "array {name} has length {} but the grid has {n} points",
                    arr.len()
                )));
            }
            if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidState(format!("{name}[{i}] is not finite")));
            }
        }
        if let Some(i) = self.grid_y.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState(format!(
                "grid_y is not strictly increasing at index {i}"
            )));
        }
        if let Some(i) = self.xi.iter().position(|&xi| !(xi > 0.0)) {
            return Err(Error::InvalidState(format!("xi[{i}] = {} is not positive", self.xi[i])));
        }
        Ok(())
    }
}

/// Run parameters of the time integration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Forcing coefficient `k` of the term `ku`.
    pub k: f64,
    pub output_times: Vec<f64>,
    pub singular_threshold: f64,
    pub xi_floor: f64,
}

impl SolverConfig {
    pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-3;
    pub const DEFAULT_XI_FLOOR: f64 = 1e-8;

    /// Output at `t_end` only, default threshold and ξ floor.
    pub fn new(n_points: usize, dt: f64, t_end: f64, k: f64) -> Self {
        Self {
            n_points,
            dt,
            t_end,
            k,
            output_times: vec![t_end],
            singular_threshold: Self::DEFAULT_SINGULAR_THRESHOLD,
            xi_floor: Self::DEFAULT_XI_FLOOR,
        }
    }

    /// Replaces the output times by `0, Δ, 2Δ, …, t_end` (the last interval may be shorter).
    pub fn with_output_interval(mut self, interval: f64) -> Self {
        let span = self.t_end.abs();
        let count = (span / interval - 1e-9).ceil().max(1.0) as usize;
        let sign = self.t_end.signum();
        let mut times: Vec<f64> = (0..count).map(|i| sign * i as f64 * interval).collect();
        times.push(self.t_end);
        self.output_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::Usage(format!("n_points must be ≥ 2, got {}", self.n_points)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Usage(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::Usage("t_end must be finite".into()));
        }
        if self.t_end != 0.0 && self.dt > self.t_end.abs() {
            return Err(Error::Usage(format!(
                "dt = {} exceeds |t_end| = {}",
                self.dt,
                self.t_end.abs()
            )));
        }
        if !(self.singular_threshold > 0.0 && self.singular_threshold < 1.0) {
            return Err(Error::Usage(format!(
                "singular_threshold must lie in (0, 1), got {}",
                self.singular_threshold
            )));
        }
        if !(self.xi_floor > 0.0) {
            return Err(Error::Usage(format!(
                "xi_floor must be positive, got {}",
                self.xi_floor
            )));
        }
        let (lo, hi) = if self.t_end >= 0.0 {
            (0.0, self.t_end)
        } else {
            (self.t_end, 0.0)
        };
        for &t in &self.output_times {
            if !(t >= lo && t <= hi) {
                return Err(Error::Usage(format!("output time {t} lies outside [{lo}, {hi}]")));
            }
        }
        let ordered = self
            .output_times
            .windows(2)
            .all(|w| if self.t_end >= 0.0 { w[1] >= w[0] } else { w[1] <= w[0] });
        if !ordered {
            return Err(Error::Usage(
                "output times must be sorted in the direction of time".into(),
            ));
        }
        Ok(())
    }
}

/// `Y(x_j) = x_j + ∫₀^{x_j} (u₀)_x² dx` by the composite trapezoid rule on the samples.
///
/// The samples must be strictly increasing, lie inside the data domain and contain
/// `x = 0` exactly; the integral is accumulated outwards from that point.
pub fn cumulative_coordinate(data: &InitialData, x_samples: &[f64]) -> Result<Vec<f64>> {
    if x_samples.len() < 2 {
        return Err(Error::InvalidGrid("need at least two samples".into()));
    }
    if let Some(i) = x_samples.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "samples are not strictly increasing at index {i}"
        )));
    }
    let (lo, hi) = data.domain();
    if x_samples[0] < lo || x_samples[x_samples.len() - 1] > hi {
        return Err(Error::InvalidGrid(format!(
            "samples [{}, {}] exceed the data domain [{lo}, {hi}]",
            x_samples[0],
            x_samples[x_samples.len() - 1]
        )));
    }
    let origin = x_samples
        .iter()
        .position(|&x| x == 0.0)
        .ok_or_else(|| Error::InvalidGrid("samples must contain x = 0".into()))?;

    let fd_step = min_spacing(x_samples);
    // One-sided limits of (u₀)_x² at both ends of every cell, so that a kink at a
    // sample point is integrated from each side with its own slope.
    let mut left = Vec::with_capacity(x_samples.len());
    let mut right = Vec::with_capacity(x_samples.len());
    for &x in x_samples {
        let (dl, dr) = one_sided_derivatives(data, x, fd_step);
        if !(dl.is_finite() && dr.is_finite()) {
            return Err(Error::InvalidData(format!("derivative is not finite at x = {x}")));
        }
        left.push(1.0 + dl * dl);
        right.push(1.0 + dr * dr);
    }

    let mut y = vec![0.0; x_samples.len()];
    for j in origin + 1..x_samples.len() {
        y[j] = y[j - 1] + 0.5 * (x_samples[j] - x_samples[j - 1]) * (right[j - 1] + left[j]);
    }
    for j in (0..origin).rev() {
        y[j] = y[j + 1] - 0.5 * (x_samples[j + 1] - x_samples[j]) * (right[j] + left[j + 1]);
    }
    Ok(y)
}

/// Builds the state at `t = 0`: uniform `Y` grid, `x₀(Y)` by monotone inversion of
/// the cumulative table, `u = u₀(x₀)`, `v = 2·arctan((u₀)_x(x₀))`, `ξ = 1`.
pub fn build_initial_state(data: &InitialData, cfg: &SolverConfig) -> Result<LagrangianState> {
    let n = cfg.n_points;
    if n < 2 {
        return Err(Error::Usage(format!("n_points must be ≥ 2, got {n}")));
    }
    let l = data.half_width();
    // Odd sample count: the table is symmetric and contains x = 0 exactly.
    let m = TABLE_OVERSAMPLING * n + 1;
    let xs = linspace(-l, l, m);
    let fd_step = xs[1] - xs[0];
    let ys = cumulative_coordinate(data, &xs)?;
    if let Some(j) = ys.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidData(format!(
            "cumulative table is not increasing near x = {}",
            xs[j]
        )));
    }

    // Slopes dx/dY = 1/(1 + (u₀)_x²) at the table nodes.
    let slopes: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let (dl, dr) = one_sided_derivatives(data, x, fd_step);
            0.5 / (1.0 + dl * dl) + 0.5 / (1.0 + dr * dr)
        })
        .collect();
    let inverse = MonotoneHermite::new(&ys, &xs, &slopes);

    let grid_y = linspace(ys[0], ys[m - 1], n);
    let mut x = Vec::with_capacity(n);
    for (i, &y) in grid_y.iter().enumerate() {
        let xi = if i == 0 {
            xs[0]
        } else if i == n - 1 {
            xs[m - 1]
        } else {
            inverse.eval(y)
        };
        if !xi.is_finite() {
            return Err(Error::InvalidData(format!("inverse interpolation failed at Y = {y}")));
        }
        x.push(xi);
    }

    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for &xi in &x {
        let value = data.value(xi);
        let slope = data.derivative(xi, FD_STEP_FRACTION * fd_step);
        if !value.is_finite() || !slope.is_finite() {
            return Err(Error::InvalidData(format!("initial data not finite at x = {xi}")));
        }
        u.push(value);
        v.push(wrap_angle(2.0 * slope.atan()));
    }

    let state = LagrangianState {
        t: 0.0,
        grid_y,
        u,
        v,
        xi: vec![1.0; n],
        x,
    };
    state.validate()?;
    Ok(state)
}

/// Offset, in units of the sample spacing, at which one-sided limits are taken.
const ONE_SIDED_OFFSET: f64 = 1e-7;
/// Finite-difference step, in units of the sample spacing, when no derivative is supplied.
const FD_STEP_FRACTION: f64 = 1e-3;

/// Derivative just left and just right of `x`. With an analytic derivative it is
/// evaluated a tiny distance to either side; otherwise second-order one-sided
/// differences are used, so a kink at a sample point is resolved either way.
fn one_sided_derivatives(data: &InitialData, x: f64, spacing: f64) -> (f64, f64) {
    if data.has_analytic_derivative() {
        let eps = ONE_SIDED_OFFSET * spacing;
        (data.derivative(x - eps, spacing), data.derivative(x + eps, spacing))
    } else {
        let h = FD_STEP_FRACTION * spacing;
        let f = |z: f64| data.value(z);
        let f0 = f(x);
        (
            (3.0 * f0 - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h),
            (-3.0 * f0 + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h),
        )
    }
}

fn min_spacing(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slope limiting, so that
/// monotone data stays monotone.
struct MonotoneHermite<'a> {
    knots: &'a [f64],
    values: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> MonotoneHermite<'a> {
    fn new(knots: &'a [f64], values: &'a [f64], slopes: &[f64]) -> Self {
        let mut slopes = slopes.to_vec();
        for j in 0..knots.len() - 1 {
            let secant = (values[j + 1] - values[j]) / (knots[j + 1] - knots[j]);
            if secant == 0.0 {
                slopes[j] = 0.0;
                slopes[j + 1] = 0.0;
                continue;
            }
            let a = slopes[j] / secant;
            let b = slopes[j + 1] / secant;
            if a < 0.0 {
                slopes[j] = 0.0;
            }
            if b < 0.0 {
                slopes[j + 1] = 0.0;
            }
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[j] = tau * a * secant;
                slopes[j + 1] = tau * b * secant;
            }
        }
        Self { knots, values, slopes }
    }

    fn eval(&self, y: f64) -> f64 {
        let j = crate::numerics::locate_cell(self.knots, y);
        let h = self.knots[j + 1] - self.knots[j];
        let s = ((y - self.knots[j]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[j] + h10 * h * self.slopes[j] + h01 * self.values[j + 1] + h11 * h * self.slopes[j + 1]
    }
}
