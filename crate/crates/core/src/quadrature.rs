//! Numerical integration used by the normalization diagnostics.
//!
//! Densities fitted here routinely blow up like `u^(α-1)` at the ends of
//! the unit interval, so [`integrate_unit`] maps each half of (0, 1) through
//! a power substitution before handing it to an adaptive Gauss–Legendre
//! rule. The integrand receives both `u` and `1 - u` so the upper end keeps
//! its resolution.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            deriv = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, dp) = legendre_with_derivative(n, x);
                deriv = dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A fixed Gauss–Legendre rule, reusable across panels.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    /// ∫_a^b f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

const PANEL_ORDER: usize = 15;
const MAX_DEPTH: u32 = 40;

/// Adaptive ∫_a^b f by panel bisection with a 15-point Gauss rule.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let rule = GaussRule::new(PANEL_ORDER);
    let mut f = f;
    let whole = rule.integrate(a, b, &mut f);
    refine(&rule, &mut f, a, b, whole, abs_tol, 0)
}

fn refine<F: FnMut(f64) -> f64>(
    rule: &GaussRule,
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let split = left + right;
    if depth >= MAX_DEPTH || (split - whole).abs() <= tol || !split.is_finite() {
        return split;
    }
    refine(rule, f, a, mid, left, 0.5 * tol, depth + 1)
        + refine(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}

const SUBSTITUTION_POWER: i32 = 12;

/// ∫_0^1 f(u, 1 - u) du for integrands with integrable power singularities
/// at either end. Each half is integrated in s with u = s^p (resp.
/// 1 - u = s^p), which turns u^(α-1) into s^(pα-1).
pub fn integrate_unit<F: FnMut(f64, f64) -> f64>(mut f: F, abs_tol: f64) -> f64 {
    let p = SUBSTITUTION_POWER;
    let pf = p as f64;
    let s_max = 0.5f64.powf(1.0 / pf);
    let lower = integrate(
        |s| {
            let u = s.powi(p);
            pf * s.powi(p - 1) * f(u, 1.0 - u)
        },
        0.0,
        s_max,
        0.5 * abs_tol,
    );
    let upper = integrate(
        |s| {
            let w = s.powi(p);
            pf * s.powi(p - 1) * f(1.0 - w, w)
        },
        0.0,
        s_max,
        0.5 * abs_tol,
    );
    lower + upper
}
