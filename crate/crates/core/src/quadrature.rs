//! Deterministic quadrature: Gauss–Legendre rules, composite tensor
//! products over boxes, and radial integrals for rotation-invariant
//! integrands.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One-dimensional composite rule: `q` Gauss points on each panel between
/// consecutive `breaks`.
pub fn composite_rule(breaks: &[f64], q: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(q);
    let mut xs = Vec::with_capacity((breaks.len() - 1) * q);
    let mut ws = Vec::with_capacity(xs.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Visits every node of the `dim`-fold tensor product of a 1-D rule,
/// passing the point and its product weight.
pub fn for_each_tensor_node<F>(dim: usize, xs: &[f64], ws: &[f64], mut visit: F)
where
    F: FnMut(&[f64], f64),
{
    let k = xs.len();
    let mut idx = vec![0usize; dim];
    let mut point: Vec<f64> = vec![xs[0]; dim];
    if dim == 0 {
        visit(&point, 1.0);
        return;
    }
    loop {
        let w: f64 = idx.iter().map(|&i| ws[i]).product();
        visit(&point, w);
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < k {
                point[axis] = xs[idx[axis]];
                break;
            }
            idx[axis] = 0;
            point[axis] = xs[0];
            axis += 1;
            if axis == dim {
                return;
            }
        }
    }
}

/// Integrates a vector of integrands over `[lo, hi]^dim` with a composite
/// tensor Gauss rule, doubling the per-panel order until two successive
/// results agree within `tol` (max-abs over components).
///
/// `eval` writes the integrand values at a point into the output slice.
pub fn adaptive_tensor_integral<F>(
    dim: usize,
    breaks: &[f64],
    outputs: usize,
    tol: f64,
    max_points: usize,
    mut eval: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let panels = breaks.len() - 1;
    let mut q = 2usize;
    let mut previous: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    let mut scratch = vec![0.0; outputs];
    loop {
        let npts = checked_pow(panels * q, dim);
        match npts {
            Some(n) if n <= max_points => {}
            _ => {
                return Err(Error::QuadratureBudget {
                    achieved: last_change,
                    requested: tol,
                })
            }
        }
        let (xs, ws) = composite_rule(breaks, q);
        let mut acc = vec![0.0; outputs];
        for_each_tensor_node(dim, &xs, &ws, |p, w| {
            scratch.iter_mut().for_each(|s| *s = 0.0);
            eval(p, &mut scratch);
            for (a, s) in acc.iter_mut().zip(&scratch) {
                *a += w * s;
            }
        });
        if let Some(prev) = &previous {
            last_change = acc
                .iter()
                .zip(prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if last_change <= tol {
                return Ok(acc);
            }
        }
        previous = Some(acc);
        q *= 2;
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut out = 1usize;
    for _ in 0..exp {
        out = out.checked_mul(base)?;
    }
    Some(out)
}

/// Volume of the Euclidean unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// Integral over `R^d` of `g(‖u‖₂)` restricted to `‖u‖₂ ≤ radius`, computed
/// as `S_{d-1} ∫₀^radius g(r) r^{d-1} dr` with a composite Gauss rule.
/// In dimension zero the integral is the point evaluation `g(0)`.
pub fn radial_integral<G>(d: usize, radius: f64, panels: usize, q: usize, g: G) -> f64
where
    G: Fn(f64) -> f64,
{
    if d == 0 {
        return g(0.0);
    }
    let surface = d as f64 * unit_ball_volume(d);
    let breaks: Vec<f64> = (0..=panels)
        .map(|k| radius * k as f64 / panels as f64)
        .collect();
    let (xs, ws) = composite_rule(&breaks, q);
    let s: f64 = xs
        .iter()
        .zip(&ws)
        .map(|(&r, &w)| w * g(r) * libm::pow(r, (d - 1) as f64))
        .sum();
    surface * s
}
