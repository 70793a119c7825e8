//! Multi-objective Bayesian optimization of RAG pipeline configurations.

pub mod acquisition;
pub mod optimizer;
pub mod pareto;
pub mod simrag;
pub mod sobol;
pub mod space;
pub mod surrogate;

pub use acquisition::{AcquisitionContext, Proposal, ProposeOptions, Variant};
pub use optimizer::{
    run, run_with, select_optimal_config, summarize, Algorithm, CandidateSource, Direction, EvaluationRecord,
    Evaluator, IterationTiming, ObjectiveSpec, OptimizerError, RunConfig, RunHistory, Selection, SelectionMode,
    SimEvaluator, SummaryRow,
};
pub use pareto::{ObjectiveVector, ParetoFront, ReferencePoint};
pub use simrag::{ModelCatalog, NoiseModel, ObjectiveValues, PipelineSettings, Simulator, Split, Workload};
pub use sobol::SobolStream;
pub use space::{Configuration, ParamValue, ParameterSpec, SearchSpace};
pub use surrogate::{GpModel, Hyperparameters};
