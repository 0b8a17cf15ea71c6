//! Iterative hypothesis refinement driven by Bayesian beliefs over
//! retrieved evidence, with an ELO tournament as the quality signal.
//!
//! The numeric core is generic over the scalar type; the aliases below fix
//! it to `f64` or `f32` for everyday use.

pub mod belief;
pub mod evidence;
pub mod hypothesis;
pub mod judge;
pub mod linalg;
pub mod pipeline;
pub mod proposal;
pub mod providers;
pub mod refinement;
pub mod scalar;
pub mod seed;

pub use belief::{BeliefDistribution, BeliefError, ScoreTriple, WeightConfig};
pub use hypothesis::{Hypothesis, HypothesisId, Strategy};
pub use pipeline::{PipelineError, RunConfig, RunState, RunStatus};
pub use proposal::ClusterAssignment;
pub use scalar::{Real, Scalar};

pub type BeliefDistributionF64 = BeliefDistribution<f64>;
pub type BeliefDistributionF32 = BeliefDistribution<f32>;
pub type ScoreTripleF64 = ScoreTriple<f64>;
pub type ScoreTripleF32 = ScoreTriple<f32>;
pub type WeightConfigF64 = WeightConfig<f64>;
pub type WeightConfigF32 = WeightConfig<f32>;
pub type ClusterAssignmentF64 = ClusterAssignment<f64>;
pub type ClusterAssignmentF32 = ClusterAssignment<f32>;
