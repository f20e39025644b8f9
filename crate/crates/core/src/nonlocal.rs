//! Nonlocal terms `P`, `P_x`, `Q`, `Q_x` on the Lagrangian grid.
//!
//! In Eulerian form these are convolutions with the Green kernel `½e^{−|x|}` of
//! `(1 − ∂²_x)⁻¹`:
//!
//! ```text
//! P = ½e^{−|x|} ∗ (u² + ½u_x²),    Q = ½e^{−|x|} ∗ u,
//! ```
//!
//! and `P_x`, `Q_x` their derivatives. In the `Y` variable the kernel distance is
//! the arc length `s(Y) = ∫ ξ cos²(v/2) dY`, and the integrands become
//!
//! ```text
//! f_P = (u² cos²(v/2) + ½ sin²(v/2)) ξ,    f_Q = u cos²(v/2) ξ.
//! ```
//!
//! Both `f` and `s` are taken piecewise linear in `Y`; each cell is integrated
//! exactly against the exponential weight. Splitting each integral at the
//! evaluation point into a left part `A` and right part `B` gives `P = (A+B)/2`
//! and `P_x = (B−A)/2`, and `A`, `B` satisfy first-order recursions across cells,
//! so [`eval_nonlocal_fast`] costs O(N). [`eval_nonlocal_naive`] evaluates the same
//! piecewise rule by direct Gauss–Legendre quadrature of every (node, cell) pair
//! and is the O(N²) reference.

use crate::error::{Error, Result};
use crate::initmap::LagrangianState;

/// `P`, `P_x`, `Q`, `Q_x` sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalTerms {
    pub p: Vec<f64>,
    pub p_x: Vec<f64>,
    pub q: Vec<f64>,
    pub q_x: Vec<f64>,
}

impl NonlocalTerms {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            p_x: vec![0.0; n],
            q: vec![0.0; n],
            q_x: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Something that can produce the nonlocal terms of a state.
pub trait NonlocalOperator {
    fn evaluate(&self, state: &LagrangianState) -> NonlocalTerms;
}

/// The O(N) recursive sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct FastSweep;

/// The O(N²) direct quadrature.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveQuadrature;

impl NonlocalOperator for FastSweep {
    fn evaluate(&self, state: &LagrangianState) -> NonlocalTerms {
        eval_nonlocal_fast(state)
    }
}

impl NonlocalOperator for NaiveQuadrature {
    fn evaluate(&self, state: &LagrangianState) -> NonlocalTerms {
        eval_nonlocal_naive(state)
    }
}

/// Integrands `f_P` and `f_Q` at the nodes.
pub fn integrands(state: &LagrangianState) -> (Vec<f64>, Vec<f64>) {
    let n = state.len();
    let mut fp = Vec::with_capacity(n);
    let mut fq = Vec::with_capacity(n);
    for i in 0..n {
        let (s, c) = (0.5 * state.v[i]).sin_cos();
        let (s2, c2) = (s * s, c * c);
        let u = state.u[i];
        fp.push((u * u * c2 + 0.5 * s2) * state.xi[i]);
        fq.push(u * c2 * state.xi[i]);
    }
    (fp, fq)
}

/// Arc-length coordinate `s_i`: running trapezoid of `ξ cos²(v/2)` from the first node.
///
/// Up to a constant this is the Eulerian position, since `x_Y = ξ cos²(v/2)`.
pub fn arc_distances(state: &LagrangianState) -> Vec<f64> {
    let n = state.len();
    let mut s = Vec::with_capacity(n);
    let density = |i: usize| {
        let c = (0.5 * state.v[i]).cos();
        state.xi[i] * c * c
    };
    let mut acc = 0.0;
    let mut prev = density(0);
    s.push(0.0);
    for i in 1..n {
        let cur = density(i);
        acc += 0.5 * (state.grid_y[i] - state.grid_y[i - 1]) * (prev + cur);
        s.push(acc);
        prev = cur;
    }
    s
}

/// Below this arc increment the cell weights are evaluated by their Taylor series.
const SERIES_CUTOFF: f64 = 0.5;
const SERIES_TERMS: usize = 24;

/// Weights of the near and far endpoint of a cell with arc increment `delta`:
///
/// ```text
/// near = ∫₀¹ (1−φ) e^{−δφ} dφ,    far = ∫₀¹ φ e^{−δφ} dφ.
/// ```
///
/// Both tend to ½ (the trapezoid rule) as `δ → 0`.
pub fn cell_weights(delta: f64) -> (f64, f64) {
    if delta < SERIES_CUTOFF {
        // Σ (−δ)ⁿ/n! · 1/((n+1)(n+2))  and  Σ (−δ)ⁿ/n! · 1/(n+2)
        let mut term = 1.0;
        let mut near = 0.0;
        let mut far = 0.0;
        for n in 0..SERIES_TERMS {
            let nf = n as f64;
            near += term / ((nf + 1.0) * (nf + 2.0));
            far += term / (nf + 2.0);
            term *= -delta / (nf + 1.0);
        }
        (near, far)
    } else {
        let e = (-delta).exp();
        let d2 = delta * delta;
        ((delta - 1.0 + e) / d2, (1.0 - (1.0 + delta) * e) / d2)
    }
}

/// O(N) evaluation of `P`, `P_x`, `Q`, `Q_x` by forward and backward sweeps.
///
/// Data beyond the first and last node is treated as zero.
pub fn eval_nonlocal_fast(state: &LagrangianState) -> NonlocalTerms {
    let n = state.len();
    let (fp, fq) = integrands(state);
    let s = arc_distances(state);
    let cells = n.saturating_sub(1);

    let mut decay = Vec::with_capacity(cells);
    let mut near = Vec::with_capacity(cells);
    let mut far = Vec::with_capacity(cells);
    for j in 0..cells {
        let delta = (s[j + 1] - s[j]).max(0.0);
        let h = state.grid_y[j + 1] - state.grid_y[j];
        let (wn, wf) = cell_weights(delta);
        decay.push((-delta).exp());
        near.push(h * wn);
        far.push(h * wf);
    }

    let mut a_p = vec![0.0; n];
    let mut a_q = vec![0.0; n];
    for j in 0..cells {
        a_p[j + 1] = decay[j] * a_p[j] + far[j] * fp[j] + near[j] * fp[j + 1];
        a_q[j + 1] = decay[j] * a_q[j] + far[j] * fq[j] + near[j] * fq[j + 1];
    }
    let mut b_p = vec![0.0; n];
    let mut b_q = vec![0.0; n];
    for j in (0..cells).rev() {
        b_p[j] = decay[j] * b_p[j + 1] + near[j] * fp[j] + far[j] * fp[j + 1];
        b_q[j] = decay[j] * b_q[j + 1] + near[j] * fq[j] + far[j] * fq[j + 1];
    }

    assemble(&a_p, &b_p, &a_q, &b_q)
}

fn assemble(a_p: &[f64], b_p: &[f64], a_q: &[f64], b_q: &[f64]) -> NonlocalTerms {
    let n = a_p.len();
    let mut t = NonlocalTerms::zeros(n);
    for i in 0..n {
        t.p[i] = 0.5 * (a_p[i] + b_p[i]);
        t.p_x[i] = 0.5 * (b_p[i] - a_p[i]);
        t.q[i] = 0.5 * (a_q[i] + b_q[i]);
        t.q_x[i] = 0.5 * (b_q[i] - a_q[i]);
    }
    t
}

/// Gauss–Legendre nodes and weights on [0, 1], 8 points.
const GL8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 - 0.5 * X[3], 0.5 * W[3]),
        (0.5 - 0.5 * X[2], 0.5 * W[2]),
        (0.5 - 0.5 * X[1], 0.5 * W[1]),
        (0.5 - 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[1], 0.5 * W[1]),
        (0.5 + 0.5 * X[2], 0.5 * W[2]),
        (0.5 + 0.5 * X[3], 0.5 * W[3]),
    ]
};

/// O(N²) evaluation: every node against every cell, each cell integrated by
/// 8-point Gauss–Legendre with the kernel `e^{−|s_i − s(Y)|}` evaluated directly.
pub fn eval_nonlocal_naive(state: &LagrangianState) -> NonlocalTerms {
    let n = state.len();
    let (fp, fq) = integrands(state);
    let s = arc_distances(state);

    let mut a_p = vec![0.0; n];
    let mut a_q = vec![0.0; n];
    let mut b_p = vec![0.0; n];
    let mut b_q = vec![0.0; n];
    for i in 0..n {
        for j in 0..n.saturating_sub(1) {
            let h = state.grid_y[j + 1] - state.grid_y[j];
            let mut ip = 0.0;
            let mut iq = 0.0;
            for &(theta, w) in &GL8 {
                let sy = s[j] + theta * (s[j + 1] - s[j]);
                let kernel = (-(s[i] - sy).abs()).exp();
                ip += w * kernel * ((1.0 - theta) * fp[j] + theta * fp[j + 1]);
                iq += w * kernel * ((1.0 - theta) * fq[j] + theta * fq[j + 1]);
            }
            if j < i {
                a_p[i] += h * ip;
                a_q[i] += h * iq;
            } else {
                b_p[i] += h * ip;
                b_q[i] += h * iq;
            }
        }
    }
    assemble(&a_p, &b_p, &a_q, &b_q)
}

/// Centered-difference `∂_Y` of a nodal array (one-sided at the ends).
pub fn y_derivative(grid_y: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid_y.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    d[0] = (values[1] - values[0]) / (grid_y[1] - grid_y[0]);
    d[n - 1] = (values[n - 1] - values[n - 2]) / (grid_y[n - 1] - grid_y[n - 2]);
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (grid_y[i + 1] - grid_y[i - 1]);
    }
    d
}

/// `g(z) = min{1, exp((C⁻/2)(B²/2 − |z|))}`, the tail envelope of the kernel
/// when `‖v‖_{L²} ≤ B` and `ξ ≥ C⁻`.
pub fn kernel_tail_g(z: f64, b: f64, c_minus: f64) -> f64 {
    (0.5 * c_minus * (0.5 * b * b - z.abs())).exp().min(1.0)
}

/// `‖g‖_{L¹} = B² + 4/C⁻`.
pub fn kernel_tail_l1(b: f64, c_minus: f64) -> Result<f64> {
    if !(c_minus > 0.0) {
        return Err(Error::Domain(format!("c_minus must be positive, got {c_minus}")));
    }
    if !(b >= 0.0) {
        return Err(Error::Domain(format!("B must be nonnegative, got {b}")));
    }
    Ok(b * b + 4.0 / c_minus)
}

/// `h(z) = min{1, exp((2D₁D₀² − |z|)/(2D₁))}`, the tail envelope under an energy
/// bound `D₀²` and `1/D₁ ≤ ξ ≤ D₁`.
pub fn kernel_tail_h(z: f64, d0: f64, d1: f64) -> f64 {
    ((2.0 * d1 * d0 * d0 - z.abs()) / (2.0 * d1)).exp().min(1.0)
}

/// `‖h‖_{L¹} = 4D₁D₀² + 4D₁`.
pub fn kernel_tail_l1_h(d0: f64, d1: f64) -> Result<f64> {
    if !(d0 > 0.0 && d1 > 0.0) {
        return Err(Error::Domain(format!(
            "d0 and d1 must be positive, got d0 = {d0}, d1 = {d1}"
        )));
    }
    Ok(4.0 * d1 * d0 * d0 + 4.0 * d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initmap::{build_initial_state, SolverConfig};
    use crate::numerics::{linspace, max_abs};
    use crate::presets::Preset;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn uniform_state(n: usize, half: f64, u: impl Fn(f64) -> f64) -> LagrangianState {
        let mut s = LagrangianState::zero(linspace(-half, half, n));
        s.u = s.grid_y.iter().map(|&y| u(y)).collect();
        s
    }

    fn smooth_state(n: usize, amp: f64, phase: f64, width: f64) -> LagrangianState {
        let y = linspace(-10.0, 10.0, n);
        let env = |y: f64| (-(y * y) / (width * width)).exp();
        let u: Vec<f64> = y
            .iter()
            .map(|&y| amp * env(y) * (1.0 + 0.3 * (y + phase).sin()))
            .collect();
        let v: Vec<f64> = y.iter().map(|&y| 2.5 * env(y) * (0.7 * y + phase).sin()).collect();
        let xi: Vec<f64> = y.iter().map(|&y| 1.0 + 0.5 * env(y) * (y - phase).cos()).collect();
        let mut state = LagrangianState {
            t: 0.0,
            x: y.clone(),
            grid_y: y,
            u,
            v,
            xi,
        };
        state.x = arc_distances(&state).iter().map(|s| s - 10.0).collect();
        state
    }

    fn max_dev(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn arc_distance_examples() {
        let s = arc_distances(&LagrangianState::zero(linspace(0.0, 1.0, 11)));
        for (i, si) in s.iter().enumerate() {
            assert_abs_diff_eq!(*si, 0.1 * i as f64, epsilon = 1e-15);
        }
        let mut st = LagrangianState::zero(linspace(0.0, 1.0, 5));
        st.v[2] = std::f64::consts::PI;
        st.v[3] = std::f64::consts::PI;
        let s = arc_distances(&st);
        assert_abs_diff_eq!(s[3] - s[2], 0.0, epsilon = 1e-16);
    }

    #[test]
    fn arc_distance_matches_initial_positions() {
        let data = Preset::Peakon { c: 1.0 }.initial_data(20.0).unwrap();
        let st = build_initial_state(&data, &SolverConfig::new(2048, 1e-3, 1.0, 0.0)).unwrap();
        let s = arc_distances(&st);
        let span = st.x[st.len() - 1] - st.x[0];
        for (si, xi) in s.iter().zip(&st.x) {
            assert_abs_diff_eq!(*si, xi - st.x[0], epsilon = 1e-5 * span);
        }
    }

    #[test]
    fn cell_weights_are_continuous_across_the_series_cutoff() {
        let below = cell_weights(SERIES_CUTOFF * (1.0 - 1e-12));
        let above = cell_weights(SERIES_CUTOFF);
        assert_relative_eq!(below.0, above.0, max_relative = 1e-12);
        assert_relative_eq!(below.1, above.1, max_relative = 1e-12);
        assert_eq!(cell_weights(0.0), (0.5, 0.5));
        // Exact integrals at δ = 2.
        let e = (-2.0_f64).exp();
        let (n, f) = cell_weights(2.0);
        assert_relative_eq!(n, (1.0 + e) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(f, (1.0 - 3.0 * e) / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_state_has_zero_terms() {
        let st = LagrangianState::zero(linspace(-5.0, 5.0, 101));
        for t in [eval_nonlocal_fast(&st), eval_nonlocal_naive(&st)] {
            assert!(t.p.iter().chain(&t.p_x).chain(&t.q).chain(&t.q_x).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn peakon_crest_values() {
        // ½e^{−|x|} ∗ (3/2)e^{−2|x|} and ½e^{−|x|} ∗ e^{−|x|} both equal ½ at the crest.
        let data = Preset::Peakon { c: 1.0 }.initial_data(20.0).unwrap();
        let st = build_initial_state(&data, &SolverConfig::new(4096, 1e-3, 1.0, 0.0)).unwrap();
        let t = eval_nonlocal_fast(&st);
        let right = st.x.iter().position(|&x| x > 0.0).unwrap();
        let crest_p = 0.5 * (t.p[right] + t.p[right - 1]);
        let crest_q = 0.5 * (t.q[right] + t.q[right - 1]);
        assert_abs_diff_eq!(crest_p, 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(crest_q, 0.5, epsilon = 1e-4);
        // P_x is odd about the crest.
        assert_abs_diff_eq!(t.p_x[right] + t.p_x[right - 1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_profile_on_truncated_domain() {
        let st = uniform_state(4001, 20.0, |_| 1.0);
        let t = eval_nonlocal_fast(&st);
        assert_relative_eq!(t.q[2000], 1.0 - (-20.0_f64).exp(), max_relative = 1e-6);
        assert_abs_diff_eq!(t.q_x[2000], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn naive_and_fast_agree_on_peakon() {
        let data = Preset::Peakon { c: 1.0 }.initial_data(20.0).unwrap();
        let st = build_initial_state(&data, &SolverConfig::new(400, 1e-3, 1.0, 0.0)).unwrap();
        let (f, n) = (eval_nonlocal_fast(&st), eval_nonlocal_naive(&st));
        for (a, b) in [(&f.p, &n.p), (&f.p_x, &n.p_x), (&f.q, &n.q), (&f.q_x, &n.q_x)] {
            assert!(max_dev(a, b) <= 1e-12 * (1.0 + max_abs(b)));
        }
    }

    #[test]
    fn symmetric_state_gives_even_p_and_odd_px() {
        let mut st = uniform_state(301, 8.0, |y| (-(y * y) / 3.0).exp());
        st.v = st
            .grid_y
            .iter()
            .map(|&y| 2.0 * (-0.5 * y * (-(y * y) / 3.0).exp()).atan())
            .collect();
        st.xi = st.grid_y.iter().map(|&y| 1.0 + 0.2 * (-(y * y)).exp()).collect();
        let t = eval_nonlocal_fast(&st);
        let n = st.len();
        for i in 0..n {
            assert_abs_diff_eq!(t.p[i], t.p[n - 1 - i], epsilon = 1e-13);
            assert_abs_diff_eq!(t.p_x[i], -t.p_x[n - 1 - i], epsilon = 1e-13);
        }
    }

    #[test]
    fn matches_direct_convolution_on_flat_map() {
        // v ≡ 0, ξ ≡ 1: s = Y = x and P = ½e^{−|x|} ∗ u². Plain trapezoid double sum
        // as the independent check; the two rules differ at O(h²).
        let st = uniform_state(2401, 12.0, |x| (-(x * x) / 4.0).exp() * (1.0 + 0.2 * x.sin()));
        let t = eval_nonlocal_fast(&st);
        let h = st.grid_y[1] - st.grid_y[0];
        for &i in &[300usize, 1200, 1950] {
            let xi = st.grid_y[i];
            let mut acc = 0.0;
            for j in 0..st.len() {
                let w = if j == 0 || j == st.len() - 1 { 0.5 * h } else { h };
                acc += w * 0.5 * (-(xi - st.grid_y[j]).abs()).exp() * st.u[j] * st.u[j];
            }
            assert_abs_diff_eq!(t.p[i], acc, epsilon = 1e-4);
        }
    }

    #[test]
    fn kernel_formula_examples() {
        assert_eq!(kernel_tail_l1(0.0, 1.0).unwrap(), 4.0);
        assert_eq!(kernel_tail_l1(2.0, 1.0).unwrap(), 8.0);
        assert!(matches!(kernel_tail_l1(1.0, 0.0), Err(Error::Domain(_))));
        assert_eq!(kernel_tail_l1_h(1.0, 1.0).unwrap(), 8.0);
        assert_relative_eq!(kernel_tail_l1_h(1e-9, 2.5).unwrap(), 10.0, max_relative = 1e-12);
        assert!(matches!(kernel_tail_l1_h(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(kernel_tail_l1_h(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn kernel_formulas_match_quadrature() {
        let quad = |f: &dyn Fn(f64) -> f64, kink: f64, rate: f64| {
            // ∫_ℝ of an even function: flat part plus a tail integrated far enough.
            let tail_end = kink + 60.0 / rate;
            2.0 * (crate::oracle::adaptive_simpson(f, 0.0, kink, 1e-13)
                + crate::oracle::adaptive_simpson(f, kink, tail_end, 1e-13))
        };
        let (b, c) = (1.3, 0.8);
        let g = |z: f64| kernel_tail_g(z, b, c);
        assert_relative_eq!(
            quad(&g, 0.5 * b * b, 0.5 * c),
            kernel_tail_l1(b, c).unwrap(),
            max_relative = 1e-8
        );
        let (d0, d1) = (0.7, 2.3);
        let h = |z: f64| kernel_tail_h(z, d0, d1);
        assert_relative_eq!(
            quad(&h, 2.0 * d1 * d0 * d0, 1.0 / (2.0 * d1)),
            kernel_tail_l1_h(d0, d1).unwrap(),
            max_relative = 1e-8
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fast_matches_naive(amp in -2.0..2.0f64, phase in -3.0..3.0f64, width in 1.0..5.0f64, n in 16usize..160) {
            let st = smooth_state(n, amp, phase, width);
            let (f, g) = (eval_nonlocal_fast(&st), eval_nonlocal_naive(&st));
            for (a, b) in [(&f.p, &g.p), (&f.p_x, &g.p_x), (&f.q, &g.q), (&f.q_x, &g.q_x)] {
                prop_assert!(max_dev(a, b) <= 1e-12 * (1.0 + max_abs(b)));
            }
        }

        #[test]
        fn p_is_nonnegative_and_dominates_px(amp in -2.0..2.0f64, phase in -3.0..3.0f64, width in 1.0..5.0f64) {
            let st = smooth_state(120, amp, phase, width);
            let t = eval_nonlocal_fast(&st);
            for i in 0..st.len() {
                prop_assert!(t.p[i] >= 0.0);
                prop_assert!(t.p_x[i].abs() <= t.p[i] * (1.0 + 1e-14));
            }
        }
    }
}
