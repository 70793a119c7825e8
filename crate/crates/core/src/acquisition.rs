//! Monte Carlo expected hypervolume improvement.
//!
//! The noisy variant re-forms the baseline Pareto front in every scenario
//! from a joint posterior draw at all observed inputs. The candidate's value
//! is then drawn conditionally on that scenario. The noiseless variant
//! measures improvement over the observed front. Both report
//! `ln(mean improvement + LOG_FLOOR)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::{self, ObjectiveVector, ReferencePoint};
use crate::sobol::{SobolError, SobolStream};
use crate::space::{Configuration, ParameterKind, SearchSpace, SpaceError};
use crate::surrogate::{GpModel, JointPosterior, SurrogateError};

/// Added to the mean improvement before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;
pub const MIN_MC_DRAWS: usize = 16;
pub const DEFAULT_MC_DRAWS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquisitionError {
    #[error("{models} models for {objectives} objectives")]
    ModelCount { models: usize, objectives: usize },
    #[error("mc_draws must be at least {MIN_MC_DRAWS}, got {0}")]
    TooFewDraws(usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("candidate dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite posterior at candidate")]
    NonFinite,
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sobol(#[from] SobolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Noisy,
    Noiseless,
}

enum Baseline {
    Observed(Vec<Vec<f64>>),
    Scenarios {
        joints: Vec<JointPosterior>,
        /// `[objective][scenario][unique point]`
        normals: Vec<Vec<Vec<f64>>>,
        fronts: Vec<Vec<Vec<f64>>>,
    },
}

/// Everything needed to score candidates against one training history.
pub struct AcquisitionContext {
    models: Vec<GpModel>,
    inputs: Vec<Vec<f64>>,
    observed: Vec<Vec<f64>>,
    reference: Vec<f64>,
    variant: Variant,
    mc_draws: usize,
    /// `[scenario][objective]`
    candidate_normals: Vec<Vec<f64>>,
    baseline: Baseline,
}

/// Non-dominated points that strictly dominate `reference`; the rest can
/// neither add volume nor block an improving candidate.
fn front_of(points: Vec<Vec<f64>>, reference: &[f64]) -> Vec<Vec<f64>> {
    let history: Vec<((), ObjectiveVector)> = points
        .into_iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x > r))
        .map(|p| ((), ObjectiveVector(p)))
        .collect();
    pareto::pareto_set(&history, ReferencePoint(reference.to_vec()))
        .expect("dimensions checked")
        .into_members()
        .into_iter()
        .map(|(_, f)| f.0)
        .collect()
}

impl AcquisitionContext {
    /// `models[j]` must be fitted to objective `j` of `observed` at `inputs`.
    /// All objective values are in maximization orientation.
    pub fn new(
        models: Vec<GpModel>,
        inputs: Vec<Vec<f64>>,
        observed: &[ObjectiveVector],
        reference: &ReferencePoint,
        mc_draws: usize,
        variant: Variant,
        seed: u64,
    ) -> Result<Self, AcquisitionError> {
        let k = reference.len();
        if models.len() != k {
            return Err(AcquisitionError::ModelCount { models: models.len(), objectives: k });
        }
        if mc_draws < MIN_MC_DRAWS {
            return Err(AcquisitionError::TooFewDraws(mc_draws));
        }
        if inputs.len() < 2 || observed.len() != inputs.len() {
            return Err(AcquisitionError::TooFewObservations(inputs.len().min(observed.len())));
        }
        for f in observed {
            if f.len() != k {
                return Err(AcquisitionError::Dimension { expected: k, got: f.len() });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidate_normals: Vec<Vec<f64>> =
            (0..mc_draws).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let baseline = match variant {
            Variant::Noiseless => {
                Baseline::Observed(front_of(observed.iter().map(|f| f.0.clone()).collect(), &reference.0))
            }
            Variant::Noisy => {
                let joints = models.iter().map(|m| JointPosterior::new(m, &inputs)).collect::<Result<Vec<_>, _>>()?;
                let normals: Vec<Vec<Vec<f64>>> = joints
                    .iter()
                    .map(|j| {
                        (0..mc_draws)
                            .map(|_| (0..j.unique_len()).map(|_| rng.sample(StandardNormal)).collect())
                            .collect()
                    })
                    .collect();
                let fronts = (0..mc_draws)
                    .map(|s| {
                        let per_objective: Vec<Vec<f64>> =
                            joints.iter().zip(&normals).map(|(j, z)| j.draw(&z[s])).collect();
                        let points = (0..inputs.len()).map(|i| per_objective.iter().map(|v| v[i]).collect()).collect();
                        front_of(points, &reference.0)
                    })
                    .collect();
                Baseline::Scenarios { joints, normals, fronts }
            }
        };
        Ok(Self {
            models,
            inputs,
            observed: observed.iter().map(|f| f.0.clone()).collect(),
            reference: reference.0.clone(),
            variant,
            mc_draws,
            candidate_normals,
            baseline,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mc_draws(&self) -> usize {
        self.mc_draws
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    /// Encoded inputs of the observed points that are Pareto-optimal on the
    /// observed values.
    pub fn pareto_inputs(&self) -> Vec<Vec<f64>> {
        let history: Vec<(usize, ObjectiveVector)> =
            self.observed.iter().cloned().map(ObjectiveVector).enumerate().collect();
        pareto::pareto_set(&history, ReferencePoint(self.reference.clone()))
            .expect("dimensions checked")
            .into_members()
            .into_iter()
            .map(|(i, _)| self.inputs[i].clone())
            .collect()
    }

    /// Mean hypervolume improvement over the MC scenarios.
    pub fn expected_improvement(&self, candidate: &[f64]) -> Result<f64, AcquisitionError> {
        if candidate.len() != self.dim() {
            return Err(AcquisitionError::Dimension { expected: self.dim(), got: candidate.len() });
        }
        let k = self.reference.len();
        let mut draw = vec![0.0; k];
        let mut total = 0.0;
        match &self.baseline {
            Baseline::Observed(front) => {
                let mut moments = Vec::with_capacity(k);
                for m in &self.models {
                    let (mean, var) = m.latent_posterior(candidate)?;
                    moments.push((mean, var.sqrt()));
                }
                if moments.iter().any(|(m, s)| !m.is_finite() || !s.is_finite()) {
                    return Err(AcquisitionError::NonFinite);
                }
                for z in &self.candidate_normals {
                    for (d, ((mean, sd), zj)) in draw.iter_mut().zip(moments.iter().zip(z)) {
                        *d = mean + sd * zj;
                    }
                    total += pareto::improvement(&draw, front.iter().map(Vec::as_slice), &self.reference);
                }
            }
            Baseline::Scenarios { joints, normals, fronts } => {
                let mut exts = Vec::with_capacity(k);
                for (m, j) in self.models.iter().zip(joints) {
                    exts.push(j.extend(m, candidate)?);
                }
                let finite = exts.iter().all(|e| {
                    e.mean.is_finite() && e.residual_sd.is_finite() && e.weights.iter().all(|w| w.is_finite())
                });
                if !finite {
                    return Err(AcquisitionError::NonFinite);
                }
                for (s, z) in self.candidate_normals.iter().enumerate() {
                    for (j, d) in draw.iter_mut().enumerate() {
                        let e = &exts[j];
                        let shared: f64 = e.weights.iter().zip(&normals[j][s]).map(|(w, zb)| w * zb).sum();
                        *d = e.mean + shared + e.residual_sd * z[j];
                    }
                    total += pareto::improvement(&draw, fronts[s].iter().map(Vec::as_slice), &self.reference);
                }
            }
        }
        Ok(total / self.mc_draws as f64)
    }

    /// `ln(E[HVI] + LOG_FLOOR)`.
    pub fn score(&self, candidate: &[f64]) -> Result<f64, AcquisitionError> {
        Ok((self.expected_improvement(candidate)? + LOG_FLOOR).ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposeOptions {
    /// Sobol points scored before local refinement.
    pub raw_samples: usize,
    /// Best starting points that get refined.
    pub refine_starts: usize,
    /// Coordinate sweeps per start.
    pub sweeps: usize,
}

impl Default for ProposeOptions {
    fn default() -> Self {
        Self { raw_samples: 128, refine_starts: 4, sweeps: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub config: Configuration,
    pub encoded: Vec<f64>,
    pub score: f64,
    /// No candidate had a finite score; `config` is the first Sobol point.
    pub fallback: bool,
}

struct Search<'a> {
    ctx: &'a AcquisitionContext,
    space: &'a SearchSpace,
    cache: HashMap<Vec<u64>, f64>,
    best: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    /// Snaps `point` to a feasible encoding and scores it. Non-finite
    /// scores, including posterior failures, come back as `-inf`.
    fn eval(&mut self, point: &[f64]) -> Result<(Vec<f64>, f64), AcquisitionError> {
        let snapped = self.space.snap(point)?;
        let key: Vec<u64> = snapped.iter().map(|v| v.to_bits()).collect();
        if let Some(&s) = self.cache.get(&key) {
            return Ok((snapped, s));
        }
        let s = match self.ctx.score(&snapped) {
            Ok(s) if s.is_finite() => s,
            _ => f64::NEG_INFINITY,
        };
        self.cache.insert(key, s);
        if s.is_finite() && self.best.as_ref().is_none_or(|(_, b)| s > *b) {
            self.best = Some((snapped.clone(), s));
        }
        Ok((snapped, s))
    }

    fn refine(&mut self, start: Vec<f64>, score: f64, sweeps: usize) -> Result<(), AcquisitionError> {
        let (mut x, mut fx) = (start, score);
        for sweep in 0..sweeps {
            let mut improved = false;
            for (i, p) in self.space.parameters().iter().enumerate() {
                let at = self.space.offset(i);
                let trials: Vec<Vec<f64>> = match &p.kind {
                    ParameterKind::Continuous { .. } => {
                        let radius = 0.25 / (1u32 << sweep) as f64;
                        (-4..=4)
                            .filter(|&s| s != 0)
                            .map(|s| {
                                let mut t = x.clone();
                                t[at] = (x[at] + radius * s as f64 / 4.0).clamp(0.0, 1.0);
                                t
                            })
                            .collect()
                    }
                    ParameterKind::Integer { choices } if choices.len() > 1 => (0..choices.len())
                        .map(|r| {
                            let mut t = x.clone();
                            t[at] = r as f64 / (choices.len() - 1) as f64;
                            t
                        })
                        .collect(),
                    ParameterKind::Categorical { labels } if labels.len() > 1 => (0..labels.len())
                        .map(|l| {
                            let mut t = x.clone();
                            t[at..at + labels.len()].iter_mut().for_each(|v| *v = 0.0);
                            t[at + l] = 1.0;
                            t
                        })
                        .collect(),
                    _ => Vec::new(),
                };
                for t in trials {
                    let (snapped, s) = self.eval(&t)?;
                    if s > fx {
                        x = snapped;
                        fx = s;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Ok(())
    }
}

/// Maximizes the acquisition score over `space`.
///
/// Starts are a scrambled Sobol batch plus the encodings of the current
/// Pareto members; the best few are refined coordinate-wise, enumerating
/// every choice of integer and categorical parameters.
pub fn propose(
    ctx: &AcquisitionContext,
    space: &SearchSpace,
    options: &ProposeOptions,
    seed: u64,
) -> Result<Proposal, AcquisitionError> {
    if space.encoded_dim() != ctx.dim() {
        return Err(AcquisitionError::Dimension { expected: ctx.dim(), got: space.encoded_dim() });
    }
    let raw = SobolStream::new(space.encoded_dim(), seed)?.take_points(options.raw_samples.max(1));
    let mut search = Search { ctx, space, cache: HashMap::new(), best: None };
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
    for p in raw.iter().chain(ctx.pareto_inputs().iter()) {
        starts.push(search.eval(p)?);
    }
    let mut order: Vec<usize> = (0..starts.len()).filter(|&i| starts[i].1.is_finite()).collect();
    order.sort_by(|&a, &b| starts[b].1.total_cmp(&starts[a].1).then(a.cmp(&b)));
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    let mut picked = Vec::new();
    for &i in &order {
        if picked.len() == options.refine_starts {
            break;
        }
        if !seen.contains(&&starts[i].0) {
            seen.push(&starts[i].0);
            picked.push(i);
        }
    }
    for i in picked {
        let (x, s) = starts[i].clone();
        search.refine(x, s, options.sweeps)?;
    }
    match search.best {
        Some((encoded, score)) => Ok(Proposal { config: space.decode(&encoded)?, encoded, score, fallback: false }),
        None => {
            log::warn!("no finite acquisition score; falling back to a Sobol point");
            let encoded = space.snap(&raw[0])?;
            Ok(Proposal { config: space.decode(&encoded)?, encoded, score: f64::NEG_INFINITY, fallback: true })
        }
    }
}
