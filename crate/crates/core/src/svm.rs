//! Soft-margin binary SVM with a Gaussian kernel, trained in the dual.
//!
//! The dual
//!
//! ```text
//! max_a  Σ a_i − ½ Σ_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t.   0 ≤ a_i ≤ C,  Σ a_i y_i = 0
//! ```
//!
//! is solved by sequential minimal optimization: pairs of multipliers are
//! moved analytically along the equality constraint and clipped to the box.
//! By default features are standardized with statistics taken from the
//! training set; the same statistics are frozen into the model and applied
//! at prediction.

use serde::{Deserialize, Serialize};

use crate::channel::Label;
use crate::error::{Error, Result};

/// Multipliers below this are not kept as support vectors.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: [f64; 2],
    /// `-1.0` or `+1.0`.
    pub y: f64,
}

impl Sample {
    pub fn new(x: [f64; 2], label: Label) -> Self {
        Self { x, y: label.sign() }
    }

    pub fn label(&self) -> Label {
        Label::from_sign(self.y)
    }
}

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; 2],
    pub scale: [f64; 2],
}

impl Standardizer {
    /// Population statistics of `data`. Constant dimensions keep unit scale.
    pub fn fit(data: &[Sample]) -> Self {
        let n = data.len().max(1) as f64;
        let mut mean = [0.0; 2];
        for s in data {
            for (m, &x) in mean.iter_mut().zip(&s.x) {
                *m += x / n;
            }
        }
        let mut var = [0.0; 2];
        for s in data {
            for d in 0..2 {
                var[d] += (s.x[d] - mean[d]).powi(2) / n;
            }
        }
        let scale = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Self { mean, scale }
    }

    /// The identity map.
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 2],
            scale: [1.0; 2],
        }
    }

    pub fn apply(&self, x: &[f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.mean[0]) / self.scale[0],
            (x[1] - self.mean[1]) / self.scale[1],
        ]
    }
}

fn squared_distance(x: &[f64; 2], z: &[f64; 2]) -> f64 {
    let dx = x[0] - z[0];
    let dy = x[1] - z[1];
    dx * dx + dy * dy
}

/// Gaussian kernel `exp(−‖x−z‖² / (2δ²))`.
pub fn kernel(x: &[f64; 2], z: &[f64; 2], width: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::domain(format!(
            "kernel width must be positive, got {width}"
        )));
    }
    Ok(gaussian(x, z, width))
}

#[inline]
fn gaussian(x: &[f64; 2], z: &[f64; 2], width: f64) -> f64 {
    (-squared_distance(x, z) / (2.0 * width * width)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// KKT tolerance on `y_i g(x_i)`.
    pub tol: f64,
    pub max_passes: usize,
    /// Standardize features with training-set statistics.
    pub standardize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_passes: 1000,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: [f64; 2],
    pub y: f64,
    pub alpha: f64,
}

/// A trained classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub c_reg: f64,
    pub kernel_width: f64,
    pub bias: f64,
    /// One multiplier per training sample, in training order.
    pub alphas: Vec<f64>,
    pub standardizer: Standardizer,
    pub support_samples: Vec<SupportVector>,
    pub passes: usize,
    pub converged: bool,
}

/// Training set with its feature scaling and pairwise squared distances,
/// reusable across `(C, δ)` settings.
#[derive(Debug, Clone)]
pub struct PreparedData {
    samples: Vec<Sample>,
    standardizer: Standardizer,
    sq_dist: Vec<f64>,
}

impl PreparedData {
    pub fn new(data: &[Sample], standardize: bool) -> Self {
        let standardizer = if standardize {
            Standardizer::fit(data)
        } else {
            Standardizer::identity()
        };
        let z: Vec<[f64; 2]> = data.iter().map(|s| standardizer.apply(&s.x)).collect();
        let n = data.len();
        let mut sq_dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = squared_distance(&z[i], &z[j]);
                sq_dist[i * n + j] = d;
                sq_dist[j * n + i] = d;
            }
        }
        Self {
            samples: data.to_vec(),
            standardizer,
            sq_dist,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Gram matrix at kernel width `width`.
    pub fn gram(&self, width: f64) -> Result<Gram> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::domain(format!(
                "kernel width must be positive, got {width}"
            )));
        }
        Ok(Gram {
            width,
            problem: Problem::from_distances(&self.samples, &self.sq_dist, width),
        })
    }
}

/// Kernel matrix of a [`PreparedData`] at one width.
#[derive(Debug, Clone)]
pub struct Gram {
    width: f64,
    problem: Problem,
}

impl Gram {
    pub fn width(&self) -> f64 {
        self.width
    }
}

#[derive(Debug, Clone)]
struct Problem {
    y: Vec<f64>,
    gram: Vec<f64>,
    n: usize,
}

impl Problem {
    fn new(data: &[Sample], standardizer: &Standardizer, width: f64) -> Self {
        let z: Vec<[f64; 2]> = data.iter().map(|s| standardizer.apply(&s.x)).collect();
        let n = data.len();
        let mut sq_dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sq_dist[i * n + j] = squared_distance(&z[i], &z[j]);
            }
        }
        Self::from_distances(data, &sq_dist, width)
    }

    fn from_distances(data: &[Sample], sq_dist: &[f64], width: f64) -> Self {
        let n = data.len();
        let denom = 2.0 * width * width;
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let k = (-sq_dist[i * n + j] / denom).exp();
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        Self {
            y: data.iter().map(|s| s.y).collect(),
            gram,
            n,
        }
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    /// `F_t = Σ_j a_j y_j K_tj − y_t`, the prediction error without bias.
    fn errors(&self, alphas: &[f64]) -> Vec<f64> {
        let mut f: Vec<f64> = self.y.iter().map(|y| -y).collect();
        for (j, &a) in alphas.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let w = a * self.y[j];
            for (e, k) in f.iter_mut().zip(&self.gram[j * self.n..(j + 1) * self.n]) {
                *e += w * k;
            }
        }
        f
    }

    fn objective(&self, alphas: &[f64]) -> f64 {
        let mut quad = 0.0;
        for i in 0..self.n {
            if alphas[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                quad += alphas[i] * alphas[j] * self.y[i] * self.y[j] * self.k(i, j);
            }
        }
        alphas.iter().sum::<f64>() - 0.5 * quad
    }
}

/// Dual objective of `alphas` on `data` with training-set standardization.
pub fn dual_objective(alphas: &[f64], data: &[Sample], width: f64) -> f64 {
    let problem = Problem::new(data, &Standardizer::fit(data), width);
    problem.objective(alphas)
}

// Index sets of the maximal-violating-pair view of the KKT conditions.
#[inline]
fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

#[inline]
fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

struct Extremes {
    /// `max_{I_up} −F_t` and its index.
    up: (f64, usize),
    /// `min_{I_low} −F_t` and its index.
    low: (f64, usize),
}

fn extremes(alphas: &[f64], errors: &[f64], y: &[f64], c: f64) -> Extremes {
    let mut up = (f64::NEG_INFINITY, usize::MAX);
    let mut low = (f64::INFINITY, usize::MAX);
    for t in 0..alphas.len() {
        let v = -errors[t];
        if in_up(alphas[t], y[t], c) && v > up.0 {
            up = (v, t);
        }
        if in_low(alphas[t], y[t], c) && v < low.0 {
            low = (v, t);
        }
    }
    Extremes { up, low }
}

/// Trains with default options.
pub fn train(data: &[Sample], c_reg: f64, width: f64) -> Result<SvmModel> {
    train_with(data, c_reg, width, TrainOptions::default())
}

pub fn train_with(
    data: &[Sample],
    c_reg: f64,
    width: f64,
    options: TrainOptions,
) -> Result<SvmModel> {
    train_observed(data, c_reg, width, options, |_| {})
}

/// Trains and reports the multiplier vector after every accepted pair update.
pub fn train_observed(
    data: &[Sample],
    c_reg: f64,
    width: f64,
    options: TrainOptions,
    mut observer: impl FnMut(&[f64]),
) -> Result<SvmModel> {
    validate(data, c_reg, width, &options)?;
    let prepared = PreparedData::new(data, options.standardize);
    let gram = prepared.gram(width)?;
    solve(&prepared, &gram, c_reg, options, &mut observer)
}

/// Trains on prepared data with a precomputed kernel matrix;
/// `options.standardize` is taken from `prepared`.
pub fn train_prepared(
    prepared: &PreparedData,
    gram: &Gram,
    c_reg: f64,
    options: TrainOptions,
) -> Result<SvmModel> {
    validate(&prepared.samples, c_reg, gram.width, &options)?;
    if gram.problem.n != prepared.samples.len() {
        return Err(Error::Training(
            "kernel matrix does not match the training set".into(),
        ));
    }
    solve(prepared, gram, c_reg, options, &mut |_| {})
}

fn solve(
    prepared: &PreparedData,
    gram: &Gram,
    c_reg: f64,
    options: TrainOptions,
    observer: &mut dyn FnMut(&[f64]),
) -> Result<SvmModel> {
    let data = prepared.samples.as_slice();
    let standardizer = prepared.standardizer;
    let width = gram.width;
    let problem = &gram.problem;
    let n = problem.n;
    let c = c_reg;
    let tol = options.tol;
    let y = &problem.y;

    let mut alphas = vec![0.0; n];
    let mut errors = problem.errors(&alphas);
    // (I_up, I_low) membership, refreshed only for indices that move.
    let mut sets: Vec<(bool, bool)> = y
        .iter()
        .map(|&yt| (in_up(0.0, yt, c), in_low(0.0, yt, c)))
        .collect();
    let mut passes = 0;
    let mut converged = false;

    while passes < options.max_passes {
        passes += 1;
        let mut changed = false;
        let mut ext = extremes(&alphas, &errors, y, c);
        for i in 0..n {
            if ext.up.0 - ext.low.0 < tol {
                break;
            }
            let vi = -errors[i];
            // First violator in scan order; partner maximizes |F_i − F_j|.
            let j = if in_up(alphas[i], y[i], c) && vi > ext.low.0 + tol {
                ext.low.1
            } else if in_low(alphas[i], y[i], c) && vi < ext.up.0 - tol {
                ext.up.1
            } else {
                continue;
            };
            if j == i {
                continue;
            }
            if let Some((di, dj)) =
                take_step(problem, c, (i, j), errors[i] - errors[j], &mut alphas)
            {
                changed = true;
                observer(&alphas);
                for t in [i, j] {
                    sets[t] = (in_up(alphas[t], y[t], c), in_low(alphas[t], y[t], c));
                }
                ext = update_errors(problem, (i, di), (j, dj), &sets, &mut errors);
            }
        }

        let ext = extremes(&alphas, &errors, y, c);
        if ext.up.0 - ext.low.0 < tol || !changed {
            // Refresh the error cache to drop accumulated round-off before
            // deciding convergence.
            errors = problem.errors(&alphas);
            let ext = extremes(&alphas, &errors, y, c);
            if ext.up.0 - ext.low.0 < tol {
                converged = true;
                break;
            }
            if !changed {
                break;
            }
        }
    }

    let bias = recover_bias(&alphas, &errors, y, c);
    let support_samples = data
        .iter()
        .zip(&alphas)
        .filter(|(_, &a)| a > SUPPORT_THRESHOLD)
        .map(|(s, &alpha)| SupportVector {
            x: s.x,
            y: s.y,
            alpha,
        })
        .collect();

    Ok(SvmModel {
        c_reg,
        kernel_width: width,
        bias,
        alphas,
        standardizer,
        support_samples,
        passes,
        converged,
    })
}

fn validate(data: &[Sample], c_reg: f64, width: f64, options: &TrainOptions) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 samples, got {}",
            data.len()
        )));
    }
    if let Some(bad) = data.iter().find(|s| s.y != 1.0 && s.y != -1.0) {
        return Err(Error::Training(format!("label {} is not -1 or +1", bad.y)));
    }
    if data.iter().any(|s| !s.x.iter().all(|v| v.is_finite())) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let positives = data.iter().filter(|s| s.y > 0.0).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::Training(
            "training data contains a single class".into(),
        ));
    }
    if !(c_reg > 0.0 && c_reg.is_finite()) {
        return Err(Error::domain(format!("C must be positive, got {c_reg}")));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::domain(format!(
            "kernel width must be positive, got {width}"
        )));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::domain("tolerance must be positive"));
    }
    Ok(())
}

/// Applies the multiplier changes to the error cache and returns the new
/// extremes in the same sweep.
fn update_errors(
    problem: &Problem,
    (i, di): (usize, f64),
    (j, dj): (usize, f64),
    sets: &[(bool, bool)],
    errors: &mut [f64],
) -> Extremes {
    let n = problem.n;
    let y = &problem.y;
    let (wi, wj) = (y[i] * di, y[j] * dj);
    let row_i = &problem.gram[i * n..(i + 1) * n];
    let row_j = &problem.gram[j * n..(j + 1) * n];
    let mut up = (f64::NEG_INFINITY, usize::MAX);
    let mut low = (f64::INFINITY, usize::MAX);
    let (errors, sets) = (&mut errors[..n], &sets[..n]);
    for t in 0..n {
        let e = errors[t] + (wi * row_i[t] + wj * row_j[t]);
        errors[t] = e;
        let (is_up, is_low) = sets[t];
        let v = -e;
        if is_up && v > up.0 {
            up = (v, t);
        }
        if is_low && v < low.0 {
            low = (v, t);
        }
    }
    Extremes { up, low }
}

/// Analytic update of `(a_i, a_j)`. Returns the multiplier changes, or `None`
/// when the pair cannot move.
fn take_step(
    problem: &Problem,
    c: f64,
    (i, j): (usize, usize),
    gap: f64,
    alphas: &mut [f64],
) -> Option<(f64, f64)> {
    let y = &problem.y;
    let (ai, aj) = (alphas[i], alphas[j]);
    let s = y[i] * y[j];
    let (lo, hi) = if s < 0.0 {
        ((aj - ai).max(0.0), (c + aj - ai).min(c))
    } else {
        ((ai + aj - c).max(0.0), (ai + aj).min(c))
    };
    if hi - lo <= 0.0 {
        return None;
    }
    // Duplicate points give a flat direction; a tiny curvature sends the
    // step to the bound the gradient points at.
    let eta = (problem.k(i, i) + problem.k(j, j) - 2.0 * problem.k(i, j)).max(1e-12);
    let mut aj_new = (aj + y[j] * gap / eta).clamp(lo, hi);
    let snap = 1e-12 * c;
    if aj_new < snap {
        aj_new = 0.0;
    } else if aj_new > c - snap {
        aj_new = c;
    }
    let delta_j = aj_new - aj;
    if delta_j.abs() < 1e-14 * (c + aj.abs()) {
        return None;
    }
    let mut ai_new = ai - s * delta_j;
    if ai_new < snap {
        ai_new = 0.0;
    } else if ai_new > c - snap {
        ai_new = c;
    }
    let delta_i = ai_new - ai;
    alphas[i] = ai_new;
    alphas[j] = aj_new;
    Some((delta_i, delta_j))
}

/// `b* = y_j − Σ a_i y_i K(x_i, x_j)` averaged over free support vectors;
/// the midpoint of the feasible threshold interval when none are free.
fn recover_bias(alphas: &[f64], errors: &[f64], y: &[f64], c: f64) -> f64 {
    let free: Vec<f64> = alphas
        .iter()
        .zip(errors)
        .filter(|(&a, _)| a > 0.0 && a < c)
        .map(|(_, &e)| -e)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let ext = extremes(alphas, errors, y, c);
    match (ext.up.0.is_finite(), ext.low.0.is_finite()) {
        (true, true) => 0.5 * (ext.up.0 + ext.low.0),
        (true, false) => ext.up.0,
        (false, true) => ext.low.0,
        (false, false) => 0.0,
    }
}

impl SvmModel {
    /// `g(x) = Σ a_i y_i K(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64; 2]) -> f64 {
        let z = self.standardizer.apply(x);
        self.support_samples
            .iter()
            .map(|sv| {
                sv.alpha * sv.y * gaussian(&self.standardizer.apply(&sv.x), &z, self.kernel_width)
            })
            .sum::<f64>()
            + self.bias
    }

    /// Sign of the decision value; zero maps to near.
    pub fn classify(&self, x: &[f64; 2]) -> Label {
        Label::from_sign(self.decision_value(x))
    }

    /// Fraction of `data` classified correctly.
    pub fn accuracy(&self, data: &[Sample]) -> Result<f64> {
        let svs: Vec<([f64; 2], f64)> = self
            .support_samples
            .iter()
            .map(|sv| (self.standardizer.apply(&sv.x), sv.alpha * sv.y))
            .collect();
        let denom = 2.0 * self.kernel_width * self.kernel_width;
        accuracy(data.iter().map(|s| {
            let z = self.standardizer.apply(&s.x);
            let g: f64 = svs
                .iter()
                .map(|(x, w)| w * (-squared_distance(x, &z) / denom).exp())
                .sum();
            (Label::from_sign(g + self.bias), s.label())
        }))
    }

    /// Largest KKT violation over the training set this model was fit on.
    pub fn max_kkt_violation(&self, data: &[Sample]) -> f64 {
        let c = self.c_reg;
        data.iter()
            .zip(&self.alphas)
            .map(|(s, &a)| {
                let margin = s.y * self.decision_value(&s.x);
                if a <= 0.0 {
                    (1.0 - margin).max(0.0)
                } else if a >= c {
                    (margin - 1.0).max(0.0)
                } else {
                    (margin - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn dual_objective(&self, data: &[Sample]) -> f64 {
        Problem::new(data, &self.standardizer, self.kernel_width).objective(&self.alphas)
    }
}

/// `N_t / (N_t + N_f)` over `(predicted, actual)` pairs.
pub fn accuracy(outcomes: impl IntoIterator<Item = (Label, Label)>) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for (predicted, actual) in outcomes {
        total += 1;
        if predicted == actual {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::domain("accuracy of an empty dataset is undefined"));
    }
    Ok(hits as f64 / total as f64)
}
