//! The train/test optimization loop, baselines, final selection and
//! cross-seed summaries.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{self, AcquisitionContext, ProposeOptions, Variant, DEFAULT_MC_DRAWS};
use crate::pareto::{self, ObjectiveVector, ParetoError, ReferencePoint};
use crate::simrag::{
    derive_seed, ModelCatalog, NoiseModel, ObjectiveValues, PipelineSettings, SimError, Simulator, Split, Workload,
};
use crate::sobol::{SobolError, SobolStream};
use crate::space::{Configuration, SearchSpace, SpaceError};
use crate::surrogate::GpModel;

const SOBOL_TAG: u64 = 0x0073_6f62_6f6c;
const UNIFORM_TAG: u64 = 0x756e_6966;
const FIT_TAG: u64 = 0x0066_6974;
const ACQ_TAG: u64 = 0x0061_6371;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
    #[error(transparent)]
    Sobol(#[from] SobolError),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("Pareto front is empty")]
    EmptyFront,
    #[error("histories disagree on length: {0} vs {1}")]
    MismatchedLength(usize, usize),
    #[error("no histories to summarize")]
    NoHistories,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nehvi,
    Ehvi,
    Sobol,
    Uniform,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nehvi => "nehvi",
            Algorithm::Ehvi => "ehvi",
            Algorithm::Sobol => "sobol",
            Algorithm::Uniform => "uniform",
        }
    }

    fn variant(self) -> Option<Variant> {
        match self {
            Algorithm::Nehvi => Some(Variant::Noisy),
            Algorithm::Ehvi => Some(Variant::Noiseless),
            _ => None,
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nehvi" => Ok(Algorithm::Nehvi),
            "ehvi" => Ok(Algorithm::Ehvi),
            "sobol" => Ok(Algorithm::Sobol),
            "uniform" => Ok(Algorithm::Uniform),
            other => Err(OptimizerError::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// One objective, with its reference value in reporting units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    pub direction: Direction,
    pub reference: f64,
}

impl ObjectiveSpec {
    pub fn new(name: &str, direction: Direction, reference: f64) -> Self {
        Self { name: name.into(), direction, reference }
    }

    /// Maps a reporting-unit value to maximization orientation.
    pub fn orient(&self, v: f64) -> f64 {
        match self.direction {
            Direction::Maximize => v,
            Direction::Minimize => -v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub space: SearchSpace,
    pub catalog: ModelCatalog,
    pub noise: NoiseModel,
    pub objectives: Vec<ObjectiveSpec>,
    pub iterations: usize,
    pub initial: usize,
    pub algorithm: Algorithm,
    pub mc_draws: usize,
    pub seed: u64,
    pub workload_seed: u64,
    pub train_queries: usize,
    pub test_queries: usize,
    pub propose: ProposeOptions,
}

impl RunConfig {
    /// Four objectives on the bundled space and catalog: cost ($/million
    /// queries) and latency (s) minimized, safety and alignment maximized.
    pub fn rag_default(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            space: SearchSpace::rag_default(),
            catalog: ModelCatalog::rag_default(),
            noise: NoiseModel::default(),
            objectives: vec![
                ObjectiveSpec::new("cost", Direction::Minimize, 2000.0),
                ObjectiveSpec::new("latency", Direction::Minimize, 20.0),
                ObjectiveSpec::new("safety", Direction::Maximize, 50.0),
                ObjectiveSpec::new("alignment", Direction::Maximize, 50.0),
            ],
            iterations: 50,
            initial: 20,
            algorithm,
            mc_draws: DEFAULT_MC_DRAWS,
            seed,
            workload_seed: 2024,
            train_queries: 32,
            test_queries: 32,
            propose: ProposeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::Config(m));
        if self.initial < 1 || self.initial > self.iterations {
            return bad(format!("need 1 <= initial <= iterations, got {} and {}", self.initial, self.iterations));
        }
        if self.objectives.is_empty() || self.objectives.len() > pareto::MAX_EXACT_OBJECTIVES {
            return bad(format!(
                "1..={} objectives supported, got {}",
                pareto::MAX_EXACT_OBJECTIVES,
                self.objectives.len()
            ));
        }
        for o in &self.objectives {
            if !ObjectiveValues::NAMES.contains(&o.name.as_str()) {
                return bad(format!("unknown objective '{}'", o.name));
            }
            if !o.reference.is_finite() {
                return bad(format!("reference for '{}' is not finite", o.name));
            }
        }
        if self.algorithm.variant().is_some() && self.mc_draws < acquisition::MIN_MC_DRAWS {
            return bad(format!("mc_draws must be >= {}", acquisition::MIN_MC_DRAWS));
        }
        if self.train_queries == 0 || self.test_queries == 0 {
            return bad("workloads must be non-empty".into());
        }
        Ok(())
    }

    /// Reference point in maximization orientation.
    pub fn reference_point(&self) -> ReferencePoint {
        ReferencePoint(self.objectives.iter().map(|o| o.orient(o.reference)).collect())
    }

    /// Selects and orients the configured objectives.
    pub fn canonical(&self, values: &ObjectiveValues) -> ObjectiveVector {
        ObjectiveVector(self.objectives.iter().map(|o| o.orient(values.get(&o.name).expect("validated"))).collect())
    }

    /// The quasi-random stream used for initial and baseline candidates.
    pub fn sobol_stream(&self) -> Result<SobolStream, OptimizerError> {
        Ok(SobolStream::new(self.space.encoded_dim(), derive_seed(&[self.seed, SOBOL_TAG]))?)
    }

    pub fn workloads(&self) -> (Workload, Workload) {
        (
            Workload::generate(Split::Train, self.train_queries, self.workload_seed),
            Workload::generate(Split::Test, self.test_queries, self.workload_seed),
        )
    }
}

/// Scores a configuration on one split.
pub trait Evaluator {
    fn evaluate(
        &mut self,
        config: &Configuration,
        split: Split,
        iteration: u64,
    ) -> Result<ObjectiveValues, OptimizerError>;
}

/// Evaluates on the simulated pipeline.
pub struct SimEvaluator {
    space: SearchSpace,
    simulator: Simulator,
    train: Workload,
    test: Workload,
    seed: u64,
}

impl SimEvaluator {
    pub fn new(cfg: &RunConfig) -> Self {
        let (train, test) = cfg.workloads();
        Self {
            space: cfg.space.clone(),
            simulator: Simulator::new(cfg.catalog.clone(), cfg.noise),
            train,
            test,
            seed: cfg.seed,
        }
    }
}

impl Evaluator for SimEvaluator {
    fn evaluate(
        &mut self,
        config: &Configuration,
        split: Split,
        iteration: u64,
    ) -> Result<ObjectiveValues, OptimizerError> {
        let settings = PipelineSettings::from_config(&self.space, config)?;
        let workload = match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        };
        Ok(self.simulator.evaluate(&settings, workload, self.seed, iteration)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Sobol,
    Uniform,
    Acquisition,
    /// Acquisition failed; the next Sobol point was used instead.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub iteration: usize,
    pub config: Configuration,
    pub source: CandidateSource,
    /// Reporting units: cost in $/million queries, latency in seconds.
    pub train: ObjectiveValues,
    pub test: ObjectiveValues,
    pub train_canonical: ObjectiveVector,
    pub test_canonical: ObjectiveVector,
    /// Hypervolume of all train (test) results up to this iteration.
    pub train_hv: f64,
    pub test_hv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTiming {
    pub iteration: usize,
    pub propose_seconds: f64,
    pub evaluate_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<EvaluationRecord>,
    /// Wall-clock timings, kept apart so records stay reproducible.
    pub timings: Vec<IterationTiming>,
}

impl RunHistory {
    pub fn train_hv_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_hv).collect()
    }

    pub fn test_hv_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.test_hv).collect()
    }

    pub fn train_results(&self) -> Vec<(Configuration, ObjectiveVector)> {
        self.records.iter().map(|r| (r.config.clone(), r.train_canonical.clone())).collect()
    }

    pub fn test_results(&self) -> Vec<(Configuration, ObjectiveVector)> {
        self.records.iter().map(|r| (r.config.clone(), r.test_canonical.clone())).collect()
    }
}

fn hypervolume_of(
    results: &[(Configuration, ObjectiveVector)],
    reference: &ReferencePoint,
) -> Result<f64, OptimizerError> {
    let front = pareto::pareto_set(results, reference.clone())?;
    Ok(pareto::hypervolume_exact(&front)?)
}

/// Runs the loop on the simulated pipeline.
pub fn run(cfg: &RunConfig) -> Result<RunHistory, OptimizerError> {
    run_with(cfg, &mut SimEvaluator::new(cfg), |_| {})
}

/// Runs the loop with a custom evaluator; `on_record` sees each record as
/// soon as it is complete.
pub fn run_with<E: Evaluator, F: FnMut(&EvaluationRecord)>(
    cfg: &RunConfig,
    evaluator: &mut E,
    mut on_record: F,
) -> Result<RunHistory, OptimizerError> {
    cfg.validate()?;
    let space = &cfg.space;
    let reference = cfg.reference_point();
    let mut sobol = cfg.sobol_stream()?;
    let mut uniform = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, UNIFORM_TAG]));
    let mut history = RunHistory { algorithm: cfg.algorithm, seed: cfg.seed, records: Vec::new(), timings: Vec::new() };
    let mut train: Vec<(Configuration, ObjectiveVector)> = Vec::new();
    let mut test: Vec<(Configuration, ObjectiveVector)> = Vec::new();

    for n in 1..=cfg.iterations {
        let started = Instant::now();
        let (config, source) = match (cfg.algorithm, cfg.algorithm.variant()) {
            (Algorithm::Uniform, _) => (space.sample_uniform(&mut uniform)?, CandidateSource::Uniform),
            (_, Some(variant)) if n > cfg.initial => match acquire(cfg, variant, &train, n as u64) {
                Ok(config) => (config, CandidateSource::Acquisition),
                Err(e) => {
                    log::warn!("iteration {n}: acquisition failed ({e}); using a Sobol point");
                    (space.decode(&sobol.next_point())?, CandidateSource::Fallback)
                }
            },
            _ => (space.decode(&sobol.next_point())?, CandidateSource::Sobol),
        };
        let propose_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let train_values = evaluator.evaluate(&config, Split::Train, n as u64)?;
        let test_values = evaluator.evaluate(&config, Split::Test, n as u64)?;
        let evaluate_seconds = started.elapsed().as_secs_f64();

        let train_canonical = cfg.canonical(&train_values);
        let test_canonical = cfg.canonical(&test_values);
        if !train_canonical.is_finite() || !test_canonical.is_finite() {
            return Err(OptimizerError::Evaluation(format!("non-finite objectives at iteration {n}")));
        }
        train.push((config.clone(), train_canonical.clone()));
        test.push((config.clone(), test_canonical.clone()));
        let record = EvaluationRecord {
            iteration: n,
            config,
            source,
            train: train_values,
            test: test_values,
            train_canonical,
            test_canonical,
            train_hv: hypervolume_of(&train, &reference)?,
            test_hv: hypervolume_of(&test, &reference)?,
        };
        on_record(&record);
        history.records.push(record);
        history.timings.push(IterationTiming { iteration: n, propose_seconds, evaluate_seconds });
    }
    Ok(history)
}

/// Fits one surrogate per objective on the train history and maximizes the
/// acquisition. Only train results are consulted.
fn acquire(
    cfg: &RunConfig,
    variant: Variant,
    train: &[(Configuration, ObjectiveVector)],
    iteration: u64,
) -> Result<Configuration, OptimizerError> {
    let fail = |e: &dyn std::fmt::Display| OptimizerError::Evaluation(e.to_string());
    let inputs = train.iter().map(|(c, _)| cfg.space.encode(c)).collect::<Result<Vec<_>, _>>()?;
    let observed: Vec<ObjectiveVector> = train.iter().map(|(_, f)| f.clone()).collect();
    let mut models = Vec::with_capacity(cfg.objectives.len());
    for j in 0..cfg.objectives.len() {
        let targets: Vec<f64> = observed.iter().map(|f| f.0[j]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, iteration, FIT_TAG, j as u64]));
        models.push(GpModel::fit(&inputs, &targets, &mut rng).map_err(|e| fail(&e))?);
    }
    let seed = derive_seed(&[cfg.seed, iteration, ACQ_TAG]);
    let ctx = AcquisitionContext::new(models, inputs, &observed, &cfg.reference_point(), cfg.mc_draws, variant, seed)
        .map_err(|e| fail(&e))?;
    let proposal = acquisition::propose(&ctx, &cfg.space, &cfg.propose, seed.rotate_left(17)).map_err(|e| fail(&e))?;
    if proposal.fallback {
        return Err(OptimizerError::Evaluation("no finite acquisition score".into()));
    }
    Ok(proposal.config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    PerObjectiveBest,
    Knee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection<T> {
    pub label: String,
    pub item: T,
    pub objectives: ObjectiveVector,
}

/// Picks members of a Pareto front. Per-objective-best returns one member
/// per objective (ties broken by the larger sum of the other min-max
/// normalized objectives); knee returns the member closest to the ideal
/// point after min-max normalization. Remaining ties go to the earliest
/// member.
pub fn select_from_front<T: Clone>(
    front: &[(T, ObjectiveVector)],
    names: &[String],
    mode: SelectionMode,
) -> Result<Vec<Selection<T>>, OptimizerError> {
    let Some((_, first)) = front.first() else {
        return Err(OptimizerError::EmptyFront);
    };
    let k = first.len();
    if names.len() != k {
        return Err(OptimizerError::Config(format!("{} names for {k} objectives", names.len())));
    }
    let lo: Vec<f64> = (0..k).map(|j| front.iter().map(|(_, f)| f.0[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..k).map(|j| front.iter().map(|(_, f)| f.0[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let norm = |f: &ObjectiveVector, j: usize| if hi[j] > lo[j] { (f.0[j] - lo[j]) / (hi[j] - lo[j]) } else { 1.0 };
    let pick = |label: String, i: usize| Selection { label, item: front[i].0.clone(), objectives: front[i].1.clone() };
    match mode {
        SelectionMode::PerObjectiveBest => Ok((0..k)
            .map(|j| {
                let rest = |f: &ObjectiveVector| (0..k).filter(|&o| o != j).map(|o| norm(f, o)).sum::<f64>();
                let mut best = 0;
                for i in 1..front.len() {
                    let (a, b) = (&front[i].1, &front[best].1);
                    if a.0[j] > b.0[j] || (a.0[j] == b.0[j] && rest(a) > rest(b)) {
                        best = i;
                    }
                }
                pick(names[j].clone(), best)
            })
            .collect()),
        SelectionMode::Knee => {
            let dist = |f: &ObjectiveVector| (0..k).map(|j| (1.0 - norm(f, j)).powi(2)).sum::<f64>().sqrt();
            let mut best = 0;
            for i in 1..front.len() {
                if dist(&front[i].1) < dist(&front[best].1) {
                    best = i;
                }
            }
            Ok(vec![pick("knee".into(), best)])
        }
    }
}

/// Selects from the test Pareto set of `history`.
pub fn select_optimal_config(
    history: &RunHistory,
    cfg: &RunConfig,
    mode: SelectionMode,
) -> Result<Vec<Selection<Configuration>>, OptimizerError> {
    let front = pareto::pareto_set(&history.test_results(), cfg.reference_point())?.into_members();
    let names: Vec<String> = cfg.objectives.iter().map(|o| o.name.clone()).collect();
    select_from_front(&front, &names, mode)
}

/// Linear-interpolation quantile (the common "type 7" definition) of
/// sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub iteration: usize,
    pub runs: usize,
    pub train: Band,
    pub test: Band,
}

/// Per-algorithm, per-iteration median and interquartile band of the train
/// and test hypervolume traces.
pub fn summarize(histories: &[RunHistory]) -> Result<Vec<SummaryRow>, OptimizerError> {
    let Some(first) = histories.first() else {
        return Err(OptimizerError::NoHistories);
    };
    let n = first.records.len();
    if let Some(h) = histories.iter().find(|h| h.records.len() != n) {
        return Err(OptimizerError::MismatchedLength(n, h.records.len()));
    }
    let mut algorithms: Vec<Algorithm> = histories.iter().map(|h| h.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();
    let mut rows = Vec::with_capacity(algorithms.len() * n);
    for a in algorithms {
        let group: Vec<&RunHistory> = histories.iter().filter(|h| h.algorithm == a).collect();
        for i in 0..n {
            let train: Vec<f64> = group.iter().map(|h| h.records[i].train_hv).collect();
            let test: Vec<f64> = group.iter().map(|h| h.records[i].test_hv).collect();
            rows.push(SummaryRow {
                algorithm: a,
                iteration: i + 1,
                runs: group.len(),
                train: Band::of(&train),
                test: Band::of(&test),
            });
        }
    }
    Ok(rows)
}
