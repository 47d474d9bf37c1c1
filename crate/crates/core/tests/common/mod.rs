//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Cubic coefficients for `(b, m, Ω)`, highest power first.
pub const SR_COEFFS: [[f64; 4]; 3] = [
    [-4.7943e-8, 5.5784e-6, -2.1344e-4, 3.271e-2],
    [6.3739e-5, 5.8533e-4, -1.5973e-1, 3.5156],
    [1.4428e-5, -2.3798e-3, 1.2702e-1, -1.4864],
];

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner scheme, accurate to about twice working precision.
pub fn poly_compensated(coeffs: &[f64], x: f64) -> f64 {
    let mut s = coeffs[0];
    let mut err = 0.0;
    for &c in &coeffs[1..] {
        let (p, pi) = two_prod(s, x);
        let (t, sigma) = two_sum(p, c);
        s = t;
        err = err * x + (pi + sigma);
    }
    s + err
}

pub fn population_standardize(x: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = x.len() as f64;
    let mut out = x.to_vec();
    for d in 0..2 {
        let mean = x.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = x.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for p in out.iter_mut() {
            p[d] = (p[d] - mean) / sd;
        }
    }
    out
}

pub fn gram(z: &[[f64; 2]], width: f64) -> Vec<Vec<f64>> {
    z.iter()
        .map(|a| {
            z.iter()
                .map(|b| {
                    (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / (2.0 * width * width)).exp()
                })
                .collect()
        })
        .collect()
}

pub fn dual_objective(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ a ≤ C, Σ y_i a_i = 0}` by bisection on
/// the multiplier of the equality constraint.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c))
            .collect()
    };
    let residual = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the soft-margin dual.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

pub fn solve_dual(y: &[f64], k: &[Vec<f64>], c: f64, iterations: usize) -> QpSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    // Gershgorin bound on the largest eigenvalue of Q.
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| q(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q(i, j) * z[j]).sum::<f64>())
            .collect();
        let moved: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi + step * g).collect();
        let next = project(&moved, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = next
            .iter()
            .zip(&a)
            .map(|(x1, x0)| x1 + beta * (x1 - x0))
            .collect();
        a = next;
        t = t_next;
    }
    let f = |i: usize| (0..n).map(|j| a[j] * y[j] * k[i][j]).sum::<f64>();
    let margin = 1e-6 * c;
    let free: Vec<f64> = (0..n)
        .filter(|&i| a[i] > margin && a[i] < c - margin)
        .map(|i| y[i] - f(i))
        .collect();
    let bias = if free.is_empty() {
        // Midpoint of the feasible threshold interval.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            let r = y[i] - f(i);
            let at_zero = a[i] <= margin;
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            _ => 0.0,
        }
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    let objective = dual_objective(&a, y, k);
    QpSolution {
        alpha: a,
        bias,
        objective,
    }
}

pub fn decision(sol: &QpSolution, y: &[f64], k: &[Vec<f64>], i: usize) -> f64 {
    (0..y.len())
        .map(|j| sol.alpha[j] * y[j] * k[i][j])
        .sum::<f64>()
        + sol.bias
}
