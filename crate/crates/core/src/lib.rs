//! Streaming semi-supervised classification with an online quantized
//! harmonic function solution.
//!
//! Incoming examples are compressed into at most `n_g` weighted
//! representatives by a doubling quantizer; each example is classified by a
//! regularized harmonic solution on the graph over the labeled store and the
//! representatives, and abstains when it is disconnected from every label.
//!
//! The core is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common choices.

// negated comparisons reject NaN; index loops mirror the matrix algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod eval;
pub mod harmonic;
pub mod learner;
pub mod linalg;
pub mod metric;
pub mod oracles;
pub mod quantizer;
pub mod scalar;
pub mod snapshot;
pub mod stream;

pub use error::{Error, Result};
pub use eval::{evaluate, run_baseline, run_learner, sweep, EvalReport, RunOutput, Scenario, SweepAxis};
pub use harmonic::{
    classify, expand_equivalence_check, solve, ClassId, HarmonicSolution, LabelEncoding, LabelMatrix, Prediction,
    QuantizedGraph, ABSTAIN_TOLERANCE,
};
pub use learner::{LearnerConfig, OnlineLearner, PredictionRecord};
pub use metric::{CenterWeights, Dissimilarity, FeatureVector, KernelParams, Metric};
pub use oracles::{full_graph_solve, mc_walk_estimate, nn_classify, regret_decompose, RegretReport, WalkEstimate};
pub use quantizer::{coverage_audit, AssignmentOutcome, CoverageHistory, RepresentativeSet};
pub use scalar::Scalar;
pub use stream::{generate_drift_stream, load_stream, save_stream, DriftKind, DriftSpec, Stream, StreamRecord};

pub type Learner = OnlineLearner<f64>;
pub type Learner32 = OnlineLearner<f32>;
pub type Config = LearnerConfig<f64>;
pub type Config32 = LearnerConfig<f32>;
pub type Graph = QuantizedGraph<f64>;
pub type Graph32 = QuantizedGraph<f32>;
pub type Representatives = RepresentativeSet<f64>;
pub type Representatives32 = RepresentativeSet<f32>;
pub type Features = FeatureVector<f64>;
pub type Features32 = FeatureVector<f32>;
pub type Kernel = KernelParams<f64>;
pub type Kernel32 = KernelParams<f32>;
