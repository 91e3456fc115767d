//! Per-step orchestration of the online quantized harmonic solution.
//!
//! Each incoming example is scored as a temporary vertex of the graph over
//! the labeled store and the current representatives. Outliers (no kept
//! edge, or a zero score) abstain and never reach the quantizer; every
//! other example is absorbed after its prediction is made.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{solve, ClassId, LabelEncoding, LabelMatrix, Prediction, QuantizedGraph, ABSTAIN_TOLERANCE};
use crate::metric::{FeatureVector, KernelParams, Metric};
use crate::quantizer::{AssignmentOutcome, RepresentativeSet};
use crate::scalar::Scalar;

/// Engine parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig<T> {
    pub dim: usize,
    pub metric: Metric<T>,
    pub kernel: KernelParams<T>,
    pub gamma_g: T,
    /// Maximum number of representatives, `n_g`.
    pub budget: usize,
}

impl<T: Scalar> LearnerConfig<T> {
    /// `gamma_g` defaults to `10 epsilon`.
    pub fn new(dim: usize, metric: Metric<T>, kernel: KernelParams<T>, budget: usize) -> Result<Self> {
        let gamma_g = kernel.default_gamma();
        Self { dim, metric, kernel, gamma_g, budget }.validated()
    }

    pub fn with_gamma(mut self, gamma_g: T) -> Result<Self> {
        self.gamma_g = gamma_g;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget n_g must be positive".into()));
        }
        if !(self.gamma_g >= T::zero()) || !self.gamma_g.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma_g must be non-negative, got {}", self.gamma_g)));
        }
        KernelParams::new(self.kernel.sigma, self.kernel.epsilon)?;
        self.metric.validate_dim(self.dim)?;
        Ok(self)
    }
}

/// Outcome of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord<T> {
    pub step: u64,
    pub prediction: Prediction,
    pub confidence: T,
    /// Raw score row of the example (empty before any label exists).
    pub scores: Vec<T>,
    pub outlier: bool,
    /// Graph build and solve time.
    pub solve_time: Duration,
    /// Vertices in the solved graph, the temporary one included.
    pub graph_size: usize,
    pub assignment: Option<AssignmentOutcome>,
}

impl<T: Scalar> PredictionRecord<T> {
    /// Everything but the timing, for determinism comparisons.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.step == other.step
            && self.prediction == other.prediction
            && self.confidence == other.confidence
            && self.scores == other.scores
            && self.outlier == other.outlier
            && self.graph_size == other.graph_size
            && self.assignment == other.assignment
    }
}

#[derive(Debug, Clone)]
pub struct OnlineLearner<T> {
    pub(crate) config: LearnerConfig<T>,
    pub(crate) quantizer: RepresentativeSet<T>,
    pub(crate) labeled: Vec<(FeatureVector<T>, ClassId)>,
    pub(crate) encoding: LabelEncoding,
    pub(crate) step: u64,
}

impl<T: Scalar> OnlineLearner<T> {
    pub fn new(config: LearnerConfig<T>) -> Result<Self> {
        let config = config.validated()?;
        let quantizer = RepresentativeSet::new(config.budget)?;
        Ok(Self { config, quantizer, labeled: Vec::new(), encoding: LabelEncoding::new([]), step: 0 })
    }

    pub fn config(&self) -> &LearnerConfig<T> {
        &self.config
    }

    pub fn quantizer(&self) -> &RepresentativeSet<T> {
        &self.quantizer
    }

    pub fn labeled(&self) -> &[(FeatureVector<T>, ClassId)] {
        &self.labeled
    }

    pub fn encoding(&self) -> &LabelEncoding {
        &self.encoding
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Fixes classes up front so the score columns do not change as
    /// labels arrive mid-stream.
    pub fn declare_classes(&mut self, classes: impl IntoIterator<Item = ClassId>) {
        self.encoding = LabelEncoding::new(self.encoding.classes().iter().copied().chain(classes));
    }

    /// Appends to the labeled store. Labeled examples are never quantized
    /// and duplicates are kept.
    pub fn add_labeled(&mut self, x: FeatureVector<T>, class: ClassId) -> Result<()> {
        x.check_dim(self.config.dim)?;
        self.labeled.push((x, class));
        if !self.encoding.classes().contains(&class) {
            self.encoding = LabelEncoding::new(self.encoding.classes().iter().copied().chain([class]));
        }
        Ok(())
    }

    /// Predicts on `x`, then absorbs it unless it is an outlier.
    pub fn step(&mut self, x: &FeatureVector<T>) -> Result<PredictionRecord<T>> {
        x.check_dim(self.config.dim)?;
        self.step += 1;
        let step = self.step;

        if self.labeled.is_empty() {
            // no boundary yet: track the data, predict nothing
            let assignment = self.quantizer.observe(x.as_slice(), &self.config.metric);
            return Ok(PredictionRecord {
                step,
                prediction: Prediction::Abstain,
                confidence: T::zero(),
                scores: Vec::new(),
                outlier: false,
                solve_time: Duration::ZERO,
                graph_size: 0,
                assignment: Some(assignment),
            });
        }

        let start = Instant::now();
        let (scores, graph_size, connected) = self.score(x.as_slice())?;
        let solve_time = start.elapsed();

        let tau = T::of(ABSTAIN_TOLERANCE);
        let outlier = !connected || scores.iter().all(|s| s.abs() < tau);
        let (prediction, confidence) =
            if outlier { (Prediction::Abstain, T::zero()) } else { self.encoding.decide(&scores) };
        let assignment = if outlier { None } else { Some(self.quantizer.observe(x.as_slice(), &self.config.metric)) };

        Ok(PredictionRecord { step, prediction, confidence, scores, outlier, solve_time, graph_size, assignment })
    }

    /// Scores `x` as a temporary vertex without touching the state.
    /// Returns the score row, the graph size and whether `x` has any edge.
    pub fn score(&self, x: &[T]) -> Result<(Vec<T>, usize, bool)> {
        let labeled: Vec<&[T]> = self.labeled.iter().map(|(p, _)| p.as_slice()).collect();
        let mut unlabeled: Vec<&[T]> = self.quantizer.centers().iter().map(Vec::as_slice).collect();
        unlabeled.push(x);
        let mut mult = self.quantizer.multiplicities().to_vec();
        mult.push(1);
        let graph = QuantizedGraph::build(&labeled, &unlabeled, &mult, &self.config.metric, &self.config.kernel)?;
        let last = graph.n_vertices() - 1;
        let connected = graph.weights().row(last).iter().any(|&w| w > T::zero());
        let cols = self.encoding.columns();
        if !connected {
            return Ok((vec![T::zero(); cols], graph.n_vertices(), false));
        }
        let classes: Vec<ClassId> = self.labeled.iter().map(|(_, c)| *c).collect();
        let labels = LabelMatrix::with_encoding(self.encoding.clone(), &classes)?;
        let sol = solve(&graph, &labels, self.config.gamma_g)?;
        Ok((sol.scores(sol.n_unlabeled() - 1).to_vec(), graph.n_vertices(), true))
    }
}
