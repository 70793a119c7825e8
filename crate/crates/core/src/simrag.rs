//! Simulated RAG pipeline.
//!
//! Cost and latency follow itemized token accounting over the catalog rates.
//! Safety and alignment come from synthetic logistic response surfaces. A
//! configuration is scored by averaging per-query results over a workload.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Configuration, SearchSpace, SpaceError};

const DEFAULT_CATALOG: &str = include_str!("../assets/catalog.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("configuration has no usable '{0}' parameter")]
    MissingParameter(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("workload is empty")]
    EmptyWorkload,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSpec {
    pub name: String,
    pub input_cost: f64,
    pub output_cost: f64,
    pub base_latency: f64,
    pub token_latency: f64,
    pub quality: f64,
    pub verbosity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub name: String,
    pub cost: f64,
    pub base_latency: f64,
    pub token_latency: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankerSpec {
    pub cost: f64,
    pub base_latency: f64,
    pub token_latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalog {
    pub llms: Vec<LlmSpec>,
    pub embeddings: Vec<EmbeddingSpec>,
    pub reranker: RerankerSpec,
    pub evaluation_latency: f64,
    #[serde(default = "default_template_tokens")]
    pub template_tokens: u64,
    #[serde(default = "default_output_tokens")]
    pub base_output_tokens: f64,
}

fn default_template_tokens() -> u64 {
    60
}

fn default_output_tokens() -> f64 {
    120.0
}

impl ModelCatalog {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let catalog: Self = toml::from_str(text).map_err(|e| SimError::Catalog(e.to_string()))?;
        catalog.check()?;
        Ok(catalog)
    }

    /// The bundled catalog.
    pub fn rag_default() -> Self {
        Self::from_toml_str(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    fn check(&self) -> Result<(), SimError> {
        let nonneg = |what: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SimError::Catalog(format!("{what} must be finite and >= 0, got {v}")))
            }
        };
        let unit = |what: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::Catalog(format!("{what} quality must lie in [0, 1], got {v}")))
            }
        };
        for m in &self.llms {
            for v in [m.input_cost, m.output_cost, m.base_latency, m.token_latency, m.verbosity] {
                nonneg(&m.name, v)?;
            }
            unit(&m.name, m.quality)?;
        }
        for m in &self.embeddings {
            for v in [m.cost, m.base_latency, m.token_latency] {
                nonneg(&m.name, v)?;
            }
            unit(&m.name, m.quality)?;
        }
        for v in [self.reranker.cost, self.reranker.base_latency, self.reranker.token_latency] {
            nonneg("reranker", v)?;
        }
        nonneg("evaluation_latency", self.evaluation_latency)?;
        nonneg("base_output_tokens", self.base_output_tokens)
    }

    pub fn llm(&self, name: &str) -> Result<&LlmSpec, SimError> {
        self.llms.iter().find(|m| m.name == name).ok_or_else(|| SimError::UnknownModel(name.into()))
    }

    pub fn embedding(&self, name: &str) -> Result<&EmbeddingSpec, SimError> {
        self.embeddings.iter().find(|m| m.name == name).ok_or_else(|| SimError::UnknownModel(name.into()))
    }
}

/// The pipeline knobs the simulator reads, extracted from a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub chunk_size: u64,
    pub num_chunks: u64,
    pub chunk_overlap: u64,
    pub temperature: f64,
    pub rerank_threshold: f64,
    pub llm: String,
    pub embedding_model: String,
}

impl PipelineSettings {
    /// Validates `config` against `space` and reads the pipeline parameters
    /// by name.
    pub fn from_config(space: &SearchSpace, config: &Configuration) -> Result<Self, SimError> {
        space.validate(config)?;
        let get = |name: &str| space.value(config, name).ok_or_else(|| SimError::MissingParameter(name.into()));
        let int = |name: &str| -> Result<u64, SimError> {
            get(name)?
                .as_int()
                .and_then(|v| u64::try_from(v).ok())
                .ok_or_else(|| SimError::MissingParameter(name.into()))
        };
        let real = |name: &str| get(name)?.as_f64().ok_or_else(|| SimError::MissingParameter(name.into()));
        let label = |name: &str| -> Result<String, SimError> {
            get(name)?.as_label().map(str::to_owned).ok_or_else(|| SimError::MissingParameter(name.into()))
        };
        Ok(Self {
            chunk_size: int("chunk_size")?,
            num_chunks: int("num_chunks")?,
            chunk_overlap: int("chunk_overlap")?,
            temperature: real("temperature")?,
            rerank_threshold: real("rerank_threshold")?,
            llm: label("llm")?,
            embedding_model: label("embedding_model")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 0x0074_7261_696e,
            Split::Test => 0x7465_7374,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub tokens: u64,
    pub difficulty: f64,
    /// Context length (tokens) beyond which more context stops helping.
    pub ideal_context: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub split: Split,
    pub queries: Vec<QuerySpec>,
}

impl Workload {
    /// Synthetic queries: token count log-uniform in [10, 60], difficulty
    /// uniform in [0, 1], ideal context uniform in [1024, 3072].
    pub fn generate(split: Split, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, split.tag()]));
        let queries = (0..n)
            .map(|_| {
                let log_tokens = rng.random_range(10f64.ln()..60f64.ln());
                QuerySpec {
                    tokens: log_tokens.exp().round() as u64,
                    difficulty: rng.random(),
                    ideal_context: rng.random_range(1024.0..3072.0),
                }
            })
            .collect();
        Self { split, queries }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Mixes seed components with SplitMix64 finalization.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        state = splitmix(state ^ p);
    }
    state
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub query: u64,
    pub context: u64,
    pub prompt_input: u64,
    pub output: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Log-space standard deviation of the multiplicative latency noise.
    pub latency_sigma: f64,
    /// Standard deviation of the additive score noise, truncated at 3 sigma.
    pub quality_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { latency_sigma: 0.05, quality_sigma: 2.0 }
    }
}

impl NoiseModel {
    pub fn off() -> Self {
        Self { latency_sigma: 0.0, quality_sigma: 0.0 }
    }
}

/// Per-query result in reporting units: dollars per query, seconds, scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryEvaluation {
    pub cost: f64,
    pub latency: f64,
    pub safety: f64,
    pub alignment: f64,
    pub tokens: TokenCounts,
}

/// Workload-averaged objectives. Cost is in dollars per million queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub cost: f64,
    pub latency: f64,
    pub safety: f64,
    pub alignment: f64,
}

impl ObjectiveValues {
    pub const NAMES: [&'static str; 4] = ["cost", "latency", "safety", "alignment"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "cost" => Some(self.cost),
            "latency" => Some(self.latency),
            "safety" => Some(self.safety),
            "alignment" => Some(self.alignment),
            _ => None,
        }
    }
}

/// Number of retrieved chunks kept after reranking. A threshold of 1 keeps
/// only the best chunk; 0 keeps all of them.
pub fn surviving_chunks(num_chunks: u64, rerank_threshold: f64) -> u64 {
    let kept = (num_chunks as f64 * (1.0 - rerank_threshold.clamp(0.0, 1.0).sqrt())).round() as u64;
    kept.max(1)
}

fn temperature_penalty(t: f64) -> f64 {
    if t <= 0.8 {
        0.0
    } else if t <= 1.0 {
        0.5 * ((t - 0.8) / 0.2).powi(2)
    } else {
        0.5 + 2.0 * (t - 1.0) / 0.2 + ((t - 1.0) / 0.2).powi(2)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            return z;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    pub catalog: ModelCatalog,
    pub noise: NoiseModel,
}

impl Simulator {
    pub fn new(catalog: ModelCatalog, noise: NoiseModel) -> Self {
        Self { catalog, noise }
    }

    pub fn token_accounting(&self, settings: &PipelineSettings, query: &QuerySpec) -> Result<TokenCounts, SimError> {
        let llm = self.catalog.llm(&settings.llm)?;
        let context = surviving_chunks(settings.num_chunks, settings.rerank_threshold) * settings.chunk_size;
        let output =
            (self.catalog.base_output_tokens * llm.verbosity * (1.0 + 0.25 * settings.temperature)).round() as u64;
        Ok(TokenCounts {
            query: query.tokens,
            context,
            prompt_input: query.tokens + context + self.catalog.template_tokens,
            output,
        })
    }

    /// Itemized dollar cost of one query.
    pub fn eval_cost(&self, settings: &PipelineSettings, tokens: &TokenCounts) -> Result<f64, SimError> {
        let llm = self.catalog.llm(&settings.llm)?;
        let emb = self.catalog.embedding(&settings.embedding_model)?;
        Ok(tokens.query as f64 * emb.cost
            + tokens.context as f64 * self.catalog.reranker.cost
            + tokens.prompt_input as f64 * llm.input_cost
            + tokens.output as f64 * llm.output_cost)
    }

    /// Response latency plus evaluation latency, in seconds.
    pub fn eval_latency<R: Rng + ?Sized>(
        &self,
        settings: &PipelineSettings,
        tokens: &TokenCounts,
        rng: &mut R,
    ) -> Result<f64, SimError> {
        let llm = self.catalog.llm(&settings.llm)?;
        let emb = self.catalog.embedding(&settings.embedding_model)?;
        let rr = &self.catalog.reranker;
        let mean = emb.base_latency
            + emb.token_latency * tokens.query as f64
            + rr.base_latency
            + rr.token_latency * tokens.context as f64
            + llm.base_latency
            + llm.token_latency * (tokens.prompt_input + tokens.output) as f64
            + self.catalog.evaluation_latency;
        if self.noise.latency_sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            Ok(mean * (self.noise.latency_sigma * z).exp())
        } else {
            Ok(mean)
        }
    }

    /// Noise-free safety and alignment scores in [0, 100].
    pub fn quality_mean(
        &self,
        settings: &PipelineSettings,
        query: &QuerySpec,
        tokens: &TokenCounts,
    ) -> Result<(f64, f64), SimError> {
        let llm = self.catalog.llm(&settings.llm)?;
        let emb = self.catalog.embedding(&settings.embedding_model)?;
        let fill = tokens.context as f64 / query.ideal_context;
        let sufficiency = fill.min(1.0);
        let surplus = (fill - 1.0).max(0.0);
        let overlap = settings.chunk_overlap as f64 / settings.chunk_size as f64;
        let pen = temperature_penalty(settings.temperature);
        let rerank = settings.rerank_threshold.clamp(0.0, 1.0).sqrt();
        let d = query.difficulty;

        let safety = -3.0 + 3.5 * sufficiency + 2.0 * llm.quality + 1.5 * emb.quality + 0.3 * overlap + 0.3 * rerank
            - 6.0 * pen
            - 1.5 * d;
        let alignment = -1.6 + 1.2 * sufficiency + 1.2 * llm.quality + 0.5 * emb.quality + 0.2 * rerank
            - 5.0 * pen
            - 0.8 * d
            - 0.25 * surplus
            - 0.3 * (llm.verbosity - 1.0).max(0.0);
        Ok((100.0 * sigmoid(safety), 100.0 * sigmoid(alignment)))
    }

    pub fn eval_quality<R: Rng + ?Sized>(
        &self,
        settings: &PipelineSettings,
        query: &QuerySpec,
        tokens: &TokenCounts,
        rng: &mut R,
    ) -> Result<(f64, f64), SimError> {
        let (safety, alignment) = self.quality_mean(settings, query, tokens)?;
        if self.noise.quality_sigma > 0.0 {
            let s = safety + self.noise.quality_sigma * truncated_normal(rng);
            let a = alignment + self.noise.quality_sigma * truncated_normal(rng);
            Ok((s.clamp(0.0, 100.0), a.clamp(0.0, 100.0)))
        } else {
            Ok((safety, alignment))
        }
    }

    pub fn evaluate_query<R: Rng + ?Sized>(
        &self,
        settings: &PipelineSettings,
        query: &QuerySpec,
        rng: &mut R,
    ) -> Result<QueryEvaluation, SimError> {
        let tokens = self.token_accounting(settings, query)?;
        let cost = self.eval_cost(settings, &tokens)?;
        let latency = self.eval_latency(settings, &tokens, rng)?;
        let (safety, alignment) = self.eval_quality(settings, query, &tokens, rng)?;
        Ok(QueryEvaluation { cost, latency, safety, alignment, tokens })
    }

    /// Averages per-query results over `workload`. Query `i` draws its noise
    /// from a stream keyed by `(run_seed, iteration, i, split)`.
    pub fn evaluate(
        &self,
        settings: &PipelineSettings,
        workload: &Workload,
        run_seed: u64,
        iteration: u64,
    ) -> Result<ObjectiveValues, SimError> {
        if workload.is_empty() {
            return Err(SimError::EmptyWorkload);
        }
        let mut sum = [0.0; 4];
        for (i, q) in workload.queries.iter().enumerate() {
            let seed = derive_seed(&[run_seed, iteration, i as u64, workload.split.tag()]);
            let e = self.evaluate_query(settings, q, &mut ChaCha8Rng::seed_from_u64(seed))?;
            sum[0] += e.cost;
            sum[1] += e.latency;
            sum[2] += e.safety;
            sum[3] += e.alignment;
        }
        let n = workload.len() as f64;
        Ok(ObjectiveValues { cost: sum[0] / n * 1e6, latency: sum[1] / n, safety: sum[2] / n, alignment: sum[3] / n })
    }
}
