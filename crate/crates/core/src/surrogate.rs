//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Targets are standardized before fitting. Hyperparameters (per-dimension
//! lengthscales, output scale and noise variance) are fitted by maximizing
//! the log marginal likelihood in log space with multi-start projected
//! gradient ascent.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// First nonzero diagonal jitter tried when a factorization fails.
pub const JITTER_START: f64 = 1e-8;
/// Largest diagonal jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("too few training points: {0}")]
    TooFewPoints(usize),
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0} inputs but {1} targets")]
    LengthMismatch(usize, usize),
    #[error("non-finite training data")]
    NonFinite,
    #[error("kernel matrix is not positive definite even with jitter {JITTER_MAX}")]
    IllConditioned,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
}

/// Matérn-5/2 kernel hyperparameters in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    /// Signal variance of the (standardized) latent function.
    pub output_scale: f64,
    /// Observation noise variance on the standardized scale.
    pub noise_variance: f64,
}

impl Hyperparameters {
    /// Packs into the log-space vector used for optimization:
    /// `[ln l_1, .., ln l_d, ln output_scale, ln noise_variance]`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.output_scale.ln());
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            output_scale: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    fn check(&self, dim: usize) -> Result<(), SurrogateError> {
        if self.lengthscales.len() != dim {
            return Err(SurrogateError::Dimension { expected: dim, got: self.lengthscales.len() });
        }
        let all = self.lengthscales.iter().chain([&self.output_scale, &self.noise_variance]);
        if all.into_iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SurrogateError::InvalidHyperparameters(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Box constraints (natural units) and restart settings for [`GpModel::fit_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub lengthscale_bounds: (f64, f64),
    pub output_scale_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 100,
            lengthscale_bounds: (0.01, 5.0),
            output_scale_bounds: (1e-4, 100.0),
            noise_bounds: (1e-8, 10.0),
        }
    }
}

impl FitOptions {
    fn log_bounds(&self, dim: usize) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut b = vec![ln(self.lengthscale_bounds); dim];
        b.push(ln(self.output_scale_bounds));
        b.push(ln(self.noise_bounds));
        b
    }
}

fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled_sq_dist(a: &[f64], b: &[f64], inv_l2: &[f64]) -> f64 {
    a.iter().zip(b).zip(inv_l2).map(|((x, y), w)| (x - y) * (x - y) * w).sum()
}

/// Training data in a layout convenient for repeated likelihood evaluation.
struct TrainingSet {
    n: usize,
    dim: usize,
    /// `diff2[d][i * n + j] = (x_i[d] - x_j[d])^2`
    diff2: Vec<Vec<f64>>,
    y: DVector<f64>,
}

impl TrainingSet {
    fn new(inputs: &[Vec<f64>], y: DVector<f64>) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let mut diff2 = vec![vec![0.0; n * n]; dim];
        for (d, plane) in diff2.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let t = inputs[i][d] - inputs[j][d];
                    plane[i * n + j] = t * t;
                }
            }
        }
        Self { n, dim, diff2, y }
    }

    fn distances(&self, inv_l2: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n * self.n];
        for (plane, w) in self.diff2.iter().zip(inv_l2) {
            for (acc, v) in r.iter_mut().zip(plane) {
                *acc += v * w;
            }
        }
        r.iter_mut().for_each(|v| *v = v.sqrt());
        r
    }

    fn kernel_matrix(&self, hyper: &Hyperparameters) -> (DMatrix<f64>, Vec<f64>) {
        let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let r = self.distances(&inv_l2);
        let n = self.n;
        let k = DMatrix::from_fn(n, n, |i, j| hyper.output_scale * matern52(r[i * n + j]));
        (k, r)
    }

    /// Factorizes `K + (noise + jitter) I`, escalating jitter on failure.
    fn factor(&self, k: &DMatrix<f64>, noise: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
        jitter_ladder().find_map(|jitter| {
            let mut m = k.clone();
            for i in 0..self.n {
                m[(i, i)] += noise + jitter;
            }
            m.cholesky().map(|c| (c, jitter))
        })
    }

    /// Log marginal likelihood and its gradient w.r.t. the log-space
    /// hyperparameter vector.
    fn lml(&self, hyper: &Hyperparameters) -> Result<(f64, Vec<f64>), SurrogateError> {
        let n = self.n;
        let (k, r) = self.kernel_matrix(hyper);
        let (chol, _) = self.factor(&k, hyper.noise_variance).ok_or(SurrogateError::IllConditioned)?;
        let alpha = chol.solve(&self.y);
        let l = chol.l_dirty();
        let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
        let value = -0.5 * self.y.dot(&alpha) - log_det - 0.5 * n as f64 * LN_2PI;

        let kinv = chol.inverse();
        let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let mut grad = vec![0.0; self.dim + 2];
        let mut weights = vec![0.0; n * n];
        let mut g_scale = 0.0;
        let mut trace_w = 0.0;
        for j in 0..n {
            for i in 0..n {
                let w = alpha[i] * alpha[j] - kinv[(i, j)];
                let s = SQRT5 * r[i * n + j];
                // d k / d ln l_d = sf2 * 5/3 (1 + s) e^{-s} * diff2_d / l_d^2
                weights[i * n + j] = w * hyper.output_scale * (5.0 / 3.0) * (1.0 + s) * (-s).exp();
                g_scale += w * k[(i, j)];
                if i == j {
                    trace_w += w;
                }
            }
        }
        for (d, plane) in self.diff2.iter().enumerate() {
            let s: f64 = plane.iter().zip(&weights).map(|(a, b)| a * b).sum();
            grad[d] = 0.5 * s * inv_l2[d];
        }
        grad[self.dim] = 0.5 * g_scale;
        grad[self.dim + 1] = 0.5 * hyper.noise_variance * trace_w;
        Ok((value, grad))
    }
}

/// A fitted Gaussian process for one objective.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    y: DVector<f64>,
    target_mean: f64,
    target_scale: f64,
    hyper: Hyperparameters,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn standardize(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    if targets.len() < 2 {
        return (mean, 1.0);
    }
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
    (mean, scale)
}

fn check_data(inputs: &[Vec<f64>], targets: &[f64], min_points: usize) -> Result<usize, SurrogateError> {
    if inputs.len() != targets.len() {
        return Err(SurrogateError::LengthMismatch(inputs.len(), targets.len()));
    }
    if inputs.len() < min_points {
        return Err(SurrogateError::TooFewPoints(inputs.len()));
    }
    let dim = inputs[0].len();
    for x in inputs {
        if x.len() != dim {
            return Err(SurrogateError::Dimension { expected: dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(SurrogateError::NonFinite);
    }
    Ok(dim)
}

impl GpModel {
    /// Fits with [`FitOptions::default`].
    pub fn fit<R: Rng + ?Sized>(inputs: &[Vec<f64>], targets: &[f64], rng: &mut R) -> Result<Self, SurrogateError> {
        Self::fit_with(inputs, targets, &FitOptions::default(), rng)
    }

    /// Maximizes the log marginal likelihood from `options.restarts` starting
    /// points (the first deterministic, the rest random) and keeps the best.
    pub fn fit_with<R: Rng + ?Sized>(
        inputs: &[Vec<f64>],
        targets: &[f64],
        options: &FitOptions,
        rng: &mut R,
    ) -> Result<Self, SurrogateError> {
        let dim = check_data(inputs, targets, 2)?;
        let (mean, scale) = standardize(targets);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - mean) / scale));
        let data = TrainingSet::new(inputs, y);
        let bounds = options.log_bounds(dim);

        let mut best: Option<(f64, Vec<f64>)> = None;
        for restart in 0..options.restarts.max(1) {
            let start: Vec<f64> = if restart == 0 {
                let mut t = vec![(0.5f64 * (dim as f64).sqrt()).ln(); dim];
                t.push(0.0);
                t.push((1e-2f64).ln());
                t
            } else {
                let mut t: Vec<f64> = (0..dim).map(|_| rng.random_range((0.05f64).ln()..(5.0f64).ln())).collect();
                t.push(rng.random_range((0.2f64).ln()..(5.0f64).ln()));
                t.push(rng.random_range((1e-6f64).ln()..(0.5f64).ln()));
                t
            };
            let start = project(&start, &bounds);
            if let Some((value, theta)) = ascend(&data, start, &bounds, options.max_iters) {
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, theta));
                }
            }
        }
        let (_, theta) = best.ok_or(SurrogateError::IllConditioned)?;
        Self::build(inputs.to_vec(), data.y, mean, scale, Hyperparameters::from_log(&theta))
    }

    /// Conditions on the data with fixed hyperparameters (no fitting). A
    /// single point is accepted; its target is centred with unit scale.
    pub fn with_hyperparameters(
        inputs: &[Vec<f64>],
        targets: &[f64],
        hyper: Hyperparameters,
    ) -> Result<Self, SurrogateError> {
        let dim = check_data(inputs, targets, 1)?;
        hyper.check(dim)?;
        let (mean, scale) = standardize(targets);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| (t - mean) / scale));
        Self::build(inputs.to_vec(), y, mean, scale, hyper)
    }

    fn build(
        inputs: Vec<Vec<f64>>,
        y: DVector<f64>,
        target_mean: f64,
        target_scale: f64,
        hyper: Hyperparameters,
    ) -> Result<Self, SurrogateError> {
        let data = TrainingSet::new(&inputs, y.clone());
        let (k, _) = data.kernel_matrix(&hyper);
        let (chol, jitter) = data.factor(&k, hyper.noise_variance).ok_or(SurrogateError::IllConditioned)?;
        let alpha = chol.solve(&y);
        Ok(Self { inputs, y, target_mean, target_scale, hyper, jitter, chol, alpha })
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// Diagonal jitter that made the kernel matrix factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Mean and standard deviation used to standardize the targets.
    pub fn standardization(&self) -> (f64, f64) {
        (self.target_mean, self.target_scale)
    }

    /// Log marginal likelihood of the standardized targets, with its gradient
    /// w.r.t. `Hyperparameters::to_log()`.
    pub fn log_marginal_likelihood(&self) -> Result<(f64, Vec<f64>), SurrogateError> {
        TrainingSet::new(&self.inputs, self.y.clone()).lml(&self.hyper)
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let inv_l2: Vec<f64> = self.hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        self.hyper.output_scale * matern52(scaled_sq_dist(a, b, &inv_l2).sqrt())
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        let inv_l2: Vec<f64> = self.hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| self.hyper.output_scale * matern52(scaled_sq_dist(xi, x, &inv_l2).sqrt())),
        )
    }

    fn check_point(&self, x: &[f64]) -> Result<(), SurrogateError> {
        if x.len() != self.dim() {
            return Err(SurrogateError::Dimension { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::NonFinite);
        }
        Ok(())
    }

    /// Standardized latent mean and variance, plus `L^{-1} k(X, x)`.
    fn latent_std(&self, x: &[f64]) -> (f64, f64, DVector<f64>) {
        let kx = self.cross(x);
        let mean = kx.dot(&self.alpha);
        let l = self.chol.l_dirty();
        let v = l.solve_lower_triangular(&kx).expect("cholesky factor has a positive diagonal");
        let var = (self.hyper.output_scale - v.dot(&v)).max(0.0);
        (mean, var, v)
    }

    /// Predictive mean and variance of a new observation at `x` (latent
    /// variance plus noise), in the original target units.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64), SurrogateError> {
        self.check_point(x)?;
        let (m, v, _) = self.latent_std(x);
        let s2 = self.target_scale * self.target_scale;
        Ok((self.target_mean + self.target_scale * m, (v + self.hyper.noise_variance) * s2))
    }

    /// Posterior mean and variance of the noise-free latent function.
    pub fn latent_posterior(&self, x: &[f64]) -> Result<(f64, f64), SurrogateError> {
        self.check_point(x)?;
        let (m, v, _) = self.latent_std(x);
        Ok((self.target_mean + self.target_scale * m, v * self.target_scale * self.target_scale))
    }

    /// Joint draws of the latent function at `points`; row `i` of the result
    /// is draw `i`. Identical points receive identical values.
    pub fn sample_posterior<R: Rng + ?Sized>(
        &self,
        points: &[Vec<f64>],
        n_draws: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>, SurrogateError> {
        let joint = JointPosterior::new(self, points)?;
        Ok((0..n_draws)
            .map(|_| {
                let z: Vec<f64> = (0..joint.unique_len()).map(|_| rng.sample(StandardNormal)).collect();
                joint.draw(&z)
            })
            .collect())
    }
}

/// Joint latent posterior over a fixed set of base points, extendable by
/// one further point at a time.
///
/// Draws are `mean + L z` with `L` the Cholesky factor of the posterior
/// covariance at the (deduplicated) base points. [`extend`](Self::extend)
/// gives the conditional of one more point, so that
/// `mean_x + w · z + sd · z_x` is a joint draw together with the base.
#[derive(Debug, Clone)]
pub struct JointPosterior {
    unique: Vec<Vec<f64>>,
    /// base index -> unique index
    slots: Vec<usize>,
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    /// `L_train^{-1} k(X_train, unique)`, one column per unique point.
    projected: DMatrix<f64>,
    scale: f64,
    offset: f64,
}

/// Conditional of one extra point given the base draws, in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub mean: f64,
    /// Weights on the base standard-normal vector.
    pub weights: Vec<f64>,
    /// Residual standard deviation once the base draw is known.
    pub residual_sd: f64,
}

impl JointPosterior {
    pub fn new(model: &GpModel, points: &[Vec<f64>]) -> Result<Self, SurrogateError> {
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let mut slots = Vec::with_capacity(points.len());
        for p in points {
            model.check_point(p)?;
            match unique.iter().position(|u| u == p) {
                Some(i) => slots.push(i),
                None => {
                    slots.push(unique.len());
                    unique.push(p.clone());
                }
            }
        }
        let m = unique.len();
        let n = model.inputs.len();
        let mut projected = DMatrix::zeros(n, m);
        let mut mean = DVector::zeros(m);
        let l = model.chol.l_dirty();
        for (j, u) in unique.iter().enumerate() {
            let kx = model.cross(u);
            mean[j] = kx.dot(&model.alpha);
            let v = l.solve_lower_triangular(&kx).expect("positive diagonal");
            projected.set_column(j, &v);
        }
        let prior = DMatrix::from_fn(m, m, |i, j| model.kernel(&unique[i], &unique[j]));
        let cov = prior - projected.transpose() * &projected;
        let factor = factor_with_jitter(&cov).ok_or(SurrogateError::IllConditioned)?;
        Ok(Self { unique, slots, mean, factor, projected, scale: model.target_scale, offset: model.target_mean })
    }

    /// Number of standard normals one draw consumes.
    pub fn unique_len(&self) -> usize {
        self.unique.len()
    }

    /// Number of base points, including duplicates.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Maps a standard-normal vector to a joint draw at the base points.
    pub fn draw(&self, z: &[f64]) -> Vec<f64> {
        let m = self.unique.len();
        let mut values = vec![0.0; m];
        for (i, v) in values.iter_mut().enumerate() {
            let mut acc = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.factor[(i, j)] * zj;
            }
            *v = self.offset + self.scale * acc;
        }
        self.slots.iter().map(|&s| values[s]).collect()
    }

    /// Conditional distribution of the latent value at `x` given the base.
    pub fn extend(&self, model: &GpModel, x: &[f64]) -> Result<Extension, SurrogateError> {
        model.check_point(x)?;
        let (mean, var, v) = model.latent_std(x);
        let m = self.unique.len();
        // posterior cross-covariance between the base and x
        let mut cross = DVector::zeros(m);
        for (j, u) in self.unique.iter().enumerate() {
            cross[j] = model.kernel(u, x) - self.projected.column(j).dot(&v);
        }
        let w = self.factor.solve_lower_triangular(&cross).expect("positive diagonal");
        let residual = (var - w.dot(&w)).max(0.0);
        Ok(Extension {
            mean: self.offset + self.scale * mean,
            weights: w.iter().map(|wi| wi * self.scale).collect(),
            residual_sd: residual.sqrt() * self.scale,
        })
    }
}

/// `0, 1e-8, 1e-7, .., 1e-4`
fn jitter_ladder() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..5).map(|k| JITTER_START * 10f64.powi(k)))
}

fn factor_with_jitter(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    jitter_ladder().skip(1).find_map(|jitter| {
        let mut m = cov.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        m.cholesky().map(|c| c.unpack())
    })
}

fn project(theta: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    theta.iter().zip(bounds).map(|(t, (lo, hi))| t.clamp(*lo, *hi)).collect()
}

/// Projected gradient ascent with Barzilai–Borwein step lengths and Armijo
/// backtracking.
fn ascend(data: &TrainingSet, start: Vec<f64>, bounds: &[(f64, f64)], max_iters: usize) -> Option<(f64, Vec<f64>)> {
    let eval = |theta: &[f64]| data.lml(&Hyperparameters::from_log(theta)).ok();
    let mut theta = start;
    let (mut value, mut grad) = eval(&theta)?;
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut step = 0.1 / norm.max(1.0);
    for _ in 0..max_iters {
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + trial_step * g).collect();
            let cand = project(&cand, bounds);
            let ascent: f64 = cand.iter().zip(&theta).zip(&grad).map(|((c, t), g)| (c - t) * g).sum();
            if ascent <= 0.0 {
                break;
            }
            if let Some((v, g)) = eval(&cand) {
                if v >= value + 1e-4 * ascent {
                    accepted = Some((cand, v, g));
                    break;
                }
            }
            trial_step *= 0.5;
        }
        let Some((cand, v, g)) = accepted else { break };
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        let improvement = v - value;
        theta = cand;
        value = v;
        grad = g;
        // BB1 step for maximization: curvature along s is -sy
        step = if sy < 0.0 { (ss / -sy).clamp(1e-6, 1e3) } else { (trial_step * 2.0).min(1e3) };
        if improvement.abs() < 1e-9 * value.abs().max(1.0) && ss.sqrt() < 1e-6 {
            break;
        }
    }
    Some((value, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper(d: usize, l: f64, sf: f64, noise: f64) -> Hyperparameters {
        Hyperparameters { lengthscales: vec![l; d], output_scale: sf, noise_variance: noise }
    }

    #[test]
    fn rejects_bad_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(GpModel::fit(&[vec![0.0]], &[1.0], &mut rng).unwrap_err(), SurrogateError::TooFewPoints(1));
        assert_eq!(
            GpModel::fit(&[vec![0.0], vec![1.0]], &[1.0], &mut rng).unwrap_err(),
            SurrogateError::LengthMismatch(2, 1)
        );
        assert_eq!(
            GpModel::fit(&[vec![0.0], vec![1.0]], &[1.0, f64::NAN], &mut rng).unwrap_err(),
            SurrogateError::NonFinite
        );
        assert!(matches!(
            GpModel::fit(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0], &mut rng),
            Err(SurrogateError::Dimension { .. })
        ));
    }

    #[test]
    fn posterior_dimension_mismatch() {
        let m = GpModel::with_hyperparameters(&[vec![0.0], vec![1.0]], &[0.0, 1.0], hyper(1, 0.5, 1.0, 1e-4)).unwrap();
        assert!(matches!(m.posterior(&[0.0, 0.0]), Err(SurrogateError::Dimension { expected: 1, got: 2 })));
    }

    #[test]
    fn constant_targets_give_constant_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i * 7 % 5) as f64 / 4.0]).collect();
        let ys = vec![3.25; 6];
        let m = GpModel::fit(&xs, &ys, &mut rng).unwrap();
        let opts = FitOptions::default();
        assert!(m.hyperparameters().output_scale < 10.0 * opts.output_scale_bounds.0);
        for x in [[0.1, 0.9], [0.5, 0.5], [3.0, -2.0]] {
            let (mean, _) = m.posterior(&x).unwrap();
            assert!((mean - 3.25).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_points_draw_identically() {
        let xs = vec![vec![0.1], vec![0.4], vec![0.8]];
        let m = GpModel::with_hyperparameters(&xs, &[0.0, 1.0, -1.0], hyper(1, 0.3, 1.0, 1e-3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = m.sample_posterior(&[vec![0.6], vec![0.6], vec![0.2]], 50, &mut rng).unwrap();
        assert!(draws.iter().all(|d| d[0] == d[1]));
        let again =
            m.sample_posterior(&[vec![0.6], vec![0.6], vec![0.2]], 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(draws, again);
    }

    #[test]
    fn conflicting_duplicates_raise_noise() {
        let xs = vec![vec![0.5], vec![0.5], vec![0.1], vec![0.9]];
        let ys = [0.0, 1.0, 0.5, 0.5];
        let m = GpModel::fit(&xs, &ys, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(m.hyperparameters().noise_variance > 1e-3);
    }
}
