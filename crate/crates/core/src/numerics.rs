//! Small numerical helpers shared by the solver modules.

use std::f64::consts::PI;

/// Maps an angle onto the circle representative in (−π, π].
pub fn wrap_angle(v: f64) -> f64 {
    let r = v.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest difference `b − a` on the circle, in (−π, π].
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(b - a)
}

/// `n` evenly spaced points on `[a, b]`.
///
/// Written so that a symmetric interval (`a == −b`) yields an exactly
/// antisymmetric array, which keeps even/odd data symmetric to the last bit.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let m = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let i = i as f64;
                    ((m - i) * a + i * b) / m
                })
                .collect()
        }
    }
}

/// Composite trapezoid of `f` sampled on the (possibly nonuniform) grid `y`.
pub fn trapezoid(y: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), f.len());
    y.windows(2)
        .zip(f.windows(2))
        .map(|(y, f)| 0.5 * (y[1] - y[0]) * (f[0] + f[1]))
        .sum()
}

/// Nodal weights of the composite trapezoid rule on `y`.
pub fn trapezoid_weights(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (y[i + 1] - y[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Running trapezoid integral of `f` on `y`, starting from zero at `y[0]`.
pub fn cumulative_trapezoid(y: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for i in 0..y.len() {
        if i > 0 {
            acc += 0.5 * (y[i] - y[i - 1]) * (f[i] + f[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Index `i` of the cell `[xs[i], xs[i+1]]` containing `x`, for nondecreasing `xs`.
///
/// Values at or beyond the ends map to the first/last cell.
pub fn locate_cell(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    let j = xs.partition_point(|&v| v <= x);
    j.clamp(1, xs.len() - 1) - 1
}

/// Piecewise-linear interpolation of `(xs, fs)` at `x`; flat cells return the left value.
pub fn interp_linear(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    let i = locate_cell(xs, x);
    let dx = xs[i + 1] - xs[i];
    if dx <= 0.0 {
        return fs[i];
    }
    let th = ((x - xs[i]) / dx).clamp(0.0, 1.0);
    fs[i] + th * (fs[i + 1] - fs[i])
}

/// Sup-norm of a slice.
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
