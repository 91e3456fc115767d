//! Reference implementations used to validate the main path: the
//! nearest-neighbor baseline, the unquantized full-graph solution, a
//! Monte-Carlo absorbing random walk, and the streaming error decomposition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{
    expand_equivalence_check, solve, ClassId, HarmonicSolution, LabelEncoding, LabelMatrix, Prediction, QuantizedGraph,
    EXPANSION_CAP,
};
use crate::learner::{LearnerConfig, OnlineLearner};
use crate::linalg::DenseMatrix;
use crate::metric::{Dissimilarity, FeatureVector, KernelParams};
use crate::scalar::Scalar;
use crate::stream::StreamRecord;

/// Largest example count the full-graph oracle accepts.
pub const ORACLE_CAP: usize = 2000;

/// `argmax_c sum_{i in l} 1[y_i = c] 1[w_it >= eps] w_it`; ties go to the
/// lowest class id, all-zero sums abstain.
pub fn nn_classify<T, M>(
    x: &[T],
    labeled: &[(FeatureVector<T>, ClassId)],
    metric: &M,
    params: &KernelParams<T>,
) -> Prediction
where
    T: Scalar,
    M: Dissimilarity<T> + ?Sized,
{
    let mut sums: Vec<(ClassId, T)> = Vec::new();
    for (p, c) in labeled {
        let w = params.edge_weight(metric.distance(x, p.as_slice()));
        match sums.iter_mut().find(|(k, _)| k == c) {
            Some((_, s)) => *s += w,
            None => sums.push((*c, w)),
        }
    }
    sums.sort_by_key(|(c, _)| *c);
    let mut best: Option<(ClassId, T)> = None;
    for (c, s) in sums {
        if s > T::zero() && best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map_or(Prediction::Abstain, |(c, _)| Prediction::Class(c))
}

/// Regularized harmonic solution on the complete, unquantized graph.
/// Scores come back in the order of `unlabeled`.
pub fn full_graph_solve<T, M>(
    unlabeled: &[&[T]],
    labeled: &[(FeatureVector<T>, ClassId)],
    encoding: &LabelEncoding,
    metric: &M,
    params: &KernelParams<T>,
    gamma_g: T,
) -> Result<HarmonicSolution<T>>
where
    T: Scalar,
    M: Dissimilarity<T> + ?Sized,
{
    let size = unlabeled.len() + labeled.len();
    if size > ORACLE_CAP {
        return Err(Error::CapExceeded { size, cap: ORACLE_CAP });
    }
    let points: Vec<&[T]> = labeled.iter().map(|(p, _)| p.as_slice()).collect();
    let ones = vec![1; unlabeled.len()];
    let graph = QuantizedGraph::build(&points, unlabeled, &ones, metric, params)?;
    let classes: Vec<ClassId> = labeled.iter().map(|(_, c)| *c).collect();
    let labels = LabelMatrix::with_encoding(encoding.clone(), &classes)?;
    solve(&graph, &labels, gamma_g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Estimates the score of `start` in label column `column` by simulating
/// absorbing random walks on `W^ = V W V`. At unlabeled vertex `i` the walk
/// stops at the sink (value 0) with probability
/// `gamma_g v_i / (d^_i + gamma_g v_i)` and otherwise moves to `j` with
/// probability proportional to `W^_ij`; reaching labeled `j` stops with its
/// label value.
#[allow(clippy::too_many_arguments)]
pub fn mc_walk_estimate<T: Scalar>(
    graph: &QuantizedGraph<T>,
    labels: &LabelMatrix<T>,
    column: usize,
    gamma_g: T,
    start: usize,
    n_walks: usize,
    seed: u64,
    max_steps: usize,
) -> Result<WalkEstimate> {
    if n_walks == 0 {
        return Err(Error::InvalidParameter("n_walks must be at least 1".into()));
    }
    if labels.n_rows() != graph.n_labeled() || column >= labels.columns() {
        return Err(Error::Misaligned("labels do not match the graph".into()));
    }
    if start >= graph.n_vertices() {
        return Err(Error::InvalidParameter(format!("start vertex {start} out of range")));
    }
    let nl = graph.n_labeled();
    if start < nl {
        return Ok(WalkEstimate { estimate: labels.values().get(start, column).as_f64(), std_error: 0.0 });
    }

    // per unlabeled vertex: neighbors, cumulative weights, sink weight
    let n = graph.n_vertices();
    let gamma = gamma_g.as_f64();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cumulative: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut sink = vec![0.0; n];
    for i in nl..n {
        let mut acc = 0.0;
        for j in 0..n {
            let w = graph.weighted(i, j).as_f64();
            if w > 0.0 {
                acc += w;
                neighbors[i].push(j);
                cumulative[i].push(acc);
            }
        }
        sink[i] = gamma * graph.multiplicity(i).as_f64();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_walks {
        let mut at = start;
        let mut steps = 0;
        let value = loop {
            if at < nl {
                break labels.values().get(at, column).as_f64();
            }
            let degree = cumulative[at].last().copied().unwrap_or(0.0);
            let total = degree + sink[at];
            if total <= 0.0 || steps >= max_steps {
                return Err(Error::WalkCutoff { start, max_steps });
            }
            let u = rng.random::<f64>() * total;
            if u < sink[at] {
                break 0.0;
            }
            let target = u - sink[at];
            let k = cumulative[at].partition_point(|&c| c <= target).min(neighbors[at].len() - 1);
            at = neighbors[at][k];
            steps += 1;
        };
        sum += value;
        sum_sq += value * value;
    }
    let n = n_walks as f64;
    let mean = sum / n;
    let var = if n_walks > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(WalkEstimate { estimate: mean, std_error: (var / n).sqrt() })
}

/// Running averages of the decomposition after `t` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: usize,
    pub term_hfs: f64,
    pub term_online: f64,
    pub term_quant: f64,
    pub total_lhs: f64,
    /// `t^(-1/2)` reference curve.
    pub reference_rate: f64,
}

/// Streaming squared error split into harmonic-solution, online-learning and
/// quantization terms, each scaled by `9 / (2n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub n: usize,
    pub term_hfs: f64,
    pub term_online: f64,
    pub term_quant: f64,
    pub total_lhs: f64,
    pub trajectory: Vec<RegretPoint>,
}

impl RegretReport {
    pub fn bound(&self) -> f64 {
        self.term_hfs + self.term_online + self.term_quant
    }

    pub fn inequality_holds(&self) -> bool {
        self.total_lhs <= self.bound()
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum()
}

/// Runs the online learner over `records` and compares its per-step scores
/// against the full-graph solution on each prefix and on the whole stream.
///
/// Every record needs a ground-truth label (`None` is an error). Supervised
/// records are revealed to the learner and contribute zero error. The
/// target of a record is its class's encoding row; classes never seen as
/// supervision have an all-zero target.
pub fn regret_decompose<T: Scalar>(records: &[StreamRecord<T>], config: LearnerConfig<T>) -> Result<RegretReport> {
    if records.len() > ORACLE_CAP {
        return Err(Error::CapExceeded { size: records.len(), cap: ORACLE_CAP });
    }
    let truths = records
        .iter()
        .enumerate()
        .map(|(i, r)| r.true_label.ok_or(Error::MissingTruth(i)))
        .collect::<Result<Vec<_>>>()?;
    let encoding = LabelEncoding::new(records.iter().filter(|r| r.supervised).filter_map(|r| r.true_label));
    let cols = encoding.columns();
    let target = |c: ClassId| encoding.target::<T>(c).unwrap_or_else(|| vec![T::zero(); cols]);
    let n = records.len();

    // online scores
    let mut learner = OnlineLearner::new(config.clone())?;
    learner.declare_classes(encoding.classes().iter().copied());
    let mut online = Vec::with_capacity(n);
    for (r, &y) in records.iter().zip(&truths) {
        if r.supervised {
            learner.add_labeled(r.features.clone(), y)?;
            online.push(target(y));
        } else {
            let rec = learner.step(&r.features)?;
            online.push(if rec.scores.is_empty() { vec![T::zero(); cols] } else { rec.scores });
        }
    }

    let solve_upto = |end: usize| -> Result<Option<HarmonicSolution<T>>> {
        let labeled: Vec<(FeatureVector<T>, ClassId)> = records[..end]
            .iter()
            .zip(&truths)
            .filter(|(r, _)| r.supervised)
            .map(|(r, &y)| (r.features.clone(), y))
            .collect();
        if labeled.is_empty() {
            return Ok(None);
        }
        let unlabeled: Vec<&[T]> =
            records[..end].iter().filter(|r| !r.supervised).map(|r| r.features.as_slice()).collect();
        full_graph_solve(&unlabeled, &labeled, &encoding, &config.metric, &config.kernel, config.gamma_g).map(Some)
    };

    // the last unlabeled vertex of each prefix is x_t
    let prefix: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|t| {
            if records[t].supervised {
                return Ok(target(truths[t]));
            }
            Ok(match solve_upto(t + 1)? {
                Some(sol) => sol.scores(sol.n_unlabeled() - 1).to_vec(),
                None => vec![T::zero(); cols],
            })
        })
        .collect::<Result<_>>()?;

    let full = solve_upto(n)?;
    let mut ideal = Vec::with_capacity(n);
    let mut u = 0;
    for (r, &y) in records.iter().zip(&truths) {
        if r.supervised {
            ideal.push(target(y));
        } else {
            ideal.push(full.as_ref().map_or_else(|| vec![T::zero(); cols], |s| s.scores(u).to_vec()));
            u += 1;
        }
    }

    let mut acc = [0.0f64; 4];
    let mut trajectory = Vec::with_capacity(n);
    for t in 0..n {
        let y = target(truths[t]);
        acc[0] += sq_dist(&ideal[t], &y);
        acc[1] += sq_dist(&prefix[t], &ideal[t]);
        acc[2] += sq_dist(&online[t], &prefix[t]);
        acc[3] += sq_dist(&online[t], &y);
        let k = t + 1;
        let scale = 9.0 / (2.0 * k as f64);
        trajectory.push(RegretPoint {
            t: k,
            term_hfs: scale * acc[0],
            term_online: scale * acc[1],
            term_quant: scale * acc[2],
            total_lhs: acc[3] / k as f64,
            reference_rate: (k as f64).powf(-0.5),
        });
    }
    let last = trajectory.last().cloned().unwrap_or(RegretPoint {
        t: 0,
        term_hfs: 0.0,
        term_online: 0.0,
        term_quant: 0.0,
        total_lhs: 0.0,
        reference_rate: 0.0,
    });
    Ok(RegretReport {
        n,
        term_hfs: last.term_hfs,
        term_online: last.term_online,
        term_quant: last.term_quant,
        total_lhs: last.total_lhs,
        trajectory,
    })
}

/// A random small graph with binary labels, for the self-check suites.
/// Every vertex is joined to an earlier one, so the graph is connected.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_vertices: usize,
    max_multiplicity: u64,
) -> Result<(QuantizedGraph<f64>, LabelMatrix<f64>)> {
    let n = rng.random_range(2..=max_vertices.max(2));
    let nl = rng.random_range(1..n);
    let mut w = DenseMatrix::zeros(n, n);
    for i in 1..n {
        let j = rng.random_range(0..i);
        let v = rng.random_range(0.05..1.0);
        w.set(i, j, v);
        w.set(j, i, v);
        for j in 0..i {
            if w.get(i, j) == 0.0 && rng.random_bool(0.4) {
                let v = rng.random_range(0.05..1.0);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }
    let mult = (0..n).map(|_| rng.random_range(1..=max_multiplicity.max(1))).collect();
    let graph = QuantizedGraph::from_parts(w, mult, nl)?;
    let enc = LabelEncoding::new([ClassId(-1), ClassId(1)]);
    let mut y = DenseMatrix::zeros(nl, 1);
    for i in 0..nl {
        y.set(i, 0, if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    }
    Ok((graph, LabelMatrix::from_values(enc, y)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// Largest compact-versus-expanded difference, or largest error in
    /// standard errors for the walk suite.
    pub worst: f64,
    pub seconds: f64,
}

impl SuiteResult {
    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }
}

/// Compact solve against the expanded-graph solve on random graphs, with
/// `gamma_g` cycling through 0, 0.1 and 1.
pub fn expansion_suite(instances: usize, tolerance: f64, seed: u64) -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas = [0.0, 0.1, 1.0];
    let mut worst = 0.0f64;
    let mut passed = 0;
    for k in 0..instances {
        let (g, y) = random_instance(&mut rng, 12, 5)?;
        let diff = expand_equivalence_check(&g, &y, gammas[k % 3], EXPANSION_CAP)?;
        worst = worst.max(diff);
        passed += usize::from(diff <= tolerance);
    }
    Ok(SuiteResult { name: "expansion".into(), instances, passed, worst, seconds: start.elapsed().as_secs_f64() })
}

/// Monte-Carlo walk estimates against the linear solve, at the first
/// unlabeled vertex of each random graph. An instance passes when the
/// estimate is within `z` standard errors.
pub fn walk_suite(instances: usize, n_walks: usize, z: f64, seed: u64) -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..instances)
        .map(|_| {
            let (g, y) = random_instance(&mut rng, 12, 5)?;
            let gamma = rng.random_range(0.05..1.0);
            Ok((g, y, gamma, rng.random::<u64>()))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores = cases
        .par_iter()
        .map(|(g, y, gamma, walk_seed)| {
            let exact = solve(g, y, *gamma)?.scores(0)[0];
            let est = mc_walk_estimate(g, y, 0, *gamma, g.n_labeled(), n_walks, *walk_seed, 100_000)?;
            let err = (est.estimate - exact).abs();
            Ok(if est.std_error > 0.0 {
                err / est.std_error
            } else if err < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuiteResult {
        name: "random_walk".into(),
        instances,
        passed: scores.iter().filter(|&&s| s <= z).count(),
        worst: scores.iter().copied().fold(0.0, f64::max),
        seconds: start.elapsed().as_secs_f64(),
    })
}
