//! Graph assembly and the regularized, multiplicity-weighted harmonic
//! function solution.
//!
//! Vertices are ordered labeled first, then unlabeled. With similarity
//! matrix `W` and multiplicities `V`, the compact graph is `W^ = V W V` and
//! the unlabeled scores solve
//!
//! ```text
//! (L^_uu + gamma_g V_uu) l_u = W^_ul l_l
//! ```
//!
//! where `L^` is the Laplacian of `W^`. With `V = I` this is the plain
//! regularized harmonic solution; with `gamma_g = 0` the unregularized one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gauss_solve, Cholesky, DenseMatrix};
use crate::metric::{Dissimilarity, FeatureVector, KernelParams};
use crate::quantizer::RepresentativeSet;
use crate::scalar::Scalar;

/// Scores with magnitude below this are treated as exact zeros.
pub const ABSTAIN_TOLERANCE: f64 = 1e-12;

/// Default cap on the expanded graph size of `expand_equivalence_check`.
pub const EXPANSION_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub i32);

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Class(ClassId),
    Abstain,
}

impl Prediction {
    pub fn class(self) -> Option<ClassId> {
        match self {
            Prediction::Class(c) => Some(c),
            Prediction::Abstain => None,
        }
    }

    pub fn is_abstain(self) -> bool {
        matches!(self, Prediction::Abstain)
    }
}

/// Similarity graph over labeled and unlabeled vertices.
#[derive(Debug, Clone)]
pub struct QuantizedGraph<T> {
    weights: DenseMatrix<T>,
    multiplicities: Vec<u64>,
    n_labeled: usize,
}

impl<T: Scalar> QuantizedGraph<T> {
    /// Validates symmetry, non-negativity, the zero diagonal and positive
    /// multiplicities.
    pub fn from_parts(weights: DenseMatrix<T>, multiplicities: Vec<u64>, n_labeled: usize) -> Result<Self> {
        let n = weights.rows();
        if weights.cols() != n || multiplicities.len() != n {
            return Err(Error::Misaligned("weights and multiplicities disagree on the vertex count".into()));
        }
        if n_labeled > n {
            return Err(Error::Misaligned("more labeled vertices than vertices".into()));
        }
        if multiplicities.contains(&0) {
            return Err(Error::InvalidParameter("multiplicities must be positive".into()));
        }
        for i in 0..n {
            if weights.get(i, i) != T::zero() {
                return Err(Error::InvalidParameter(format!("non-zero diagonal at vertex {i}")));
            }
            for j in 0..i {
                let w = weights.get(i, j);
                if !(w >= T::zero()) || !w.is_finite() || w != weights.get(j, i) {
                    return Err(Error::InvalidParameter(format!("bad weight between {i} and {j}")));
                }
            }
        }
        Ok(Self { weights, multiplicities, n_labeled })
    }

    /// Builds the sparsified kernel graph. Labeled vertices get multiplicity 1.
    pub fn build<M: Dissimilarity<T> + ?Sized>(
        labeled: &[&[T]],
        unlabeled: &[&[T]],
        unlabeled_multiplicities: &[u64],
        metric: &M,
        params: &KernelParams<T>,
    ) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::NoLabeledVertices);
        }
        if unlabeled.len() != unlabeled_multiplicities.len() {
            return Err(Error::Misaligned("unlabeled points and multiplicities differ in length".into()));
        }
        let points: Vec<&[T]> = labeled.iter().chain(unlabeled).copied().collect();
        let dim = points[0].len();
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
        }
        let n = points.len();
        let mut weights = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let w = params.edge_weight(metric.distance(points[i], points[j]));
                weights.set(i, j, w);
                weights.set(j, i, w);
            }
        }
        let multiplicities =
            std::iter::repeat_n(1, labeled.len()).chain(unlabeled_multiplicities.iter().copied()).collect();
        Self::from_parts(weights, multiplicities, labeled.len())
    }

    pub fn n_vertices(&self) -> usize {
        self.multiplicities.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n_vertices() - self.n_labeled
    }

    pub fn labeled_index(&self) -> std::ops::Range<usize> {
        0..self.n_labeled
    }

    pub fn unlabeled_index(&self) -> std::ops::Range<usize> {
        self.n_labeled..self.n_vertices()
    }

    pub fn weights(&self) -> &DenseMatrix<T> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights.get(i, j)
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn multiplicity(&self, i: usize) -> T {
        T::from_count(self.multiplicities[i])
    }

    /// Entry of `W^ = V W V`.
    pub fn weighted(&self, i: usize, j: usize) -> T {
        self.multiplicity(i) * self.weights.get(i, j) * self.multiplicity(j)
    }

    /// Degree in `W^`.
    pub fn weighted_degree(&self, i: usize) -> T {
        let vi = self.multiplicity(i);
        let row = self.weights.row(i);
        let mut s = T::zero();
        for (j, &w) in row.iter().enumerate() {
            if w != T::zero() {
                s += w * self.multiplicity(j);
            }
        }
        vi * s
    }

    /// Connected components of the unlabeled subgraph (graph indices), each
    /// flagged with whether any member has an edge to a labeled vertex.
    pub fn unlabeled_components(&self) -> Vec<(Vec<usize>, bool)> {
        let n = self.n_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in self.unlabeled_index() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut members = Vec::new();
            let mut anchored = false;
            while let Some(i) = stack.pop() {
                members.push(i);
                let row = self.weights.row(i);
                if row[..self.n_labeled].iter().any(|&w| w > T::zero()) {
                    anchored = true;
                }
                for j in self.unlabeled_index() {
                    if !seen[j] && row[j] > T::zero() {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            out.push((members, anchored));
        }
        out
    }
}

/// Builds the graph over the labeled store and the quantizer's centers.
pub fn build_graph<T, M>(
    centers: &RepresentativeSet<T>,
    labeled: &[(FeatureVector<T>, ClassId)],
    metric: &M,
    params: &KernelParams<T>,
) -> Result<QuantizedGraph<T>>
where
    T: Scalar,
    M: Dissimilarity<T> + ?Sized,
{
    let labeled_points: Vec<&[T]> = labeled.iter().map(|(x, _)| x.as_slice()).collect();
    let unlabeled: Vec<&[T]> = centers.centers().iter().map(Vec::as_slice).collect();
    QuantizedGraph::build(&labeled_points, &unlabeled, centers.multiplicities(), metric, params)
}

/// How class ids map onto score columns.
///
/// One class: a single `+1` column (target versus everything else).
/// Two classes: a single column, `+1` for the larger id, `-1` for the
/// smaller. Three or more: one-versus-all `+1/-1` columns with argmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    classes: Vec<ClassId>,
}

impl LabelEncoding {
    pub fn new(classes: impl IntoIterator<Item = ClassId>) -> Self {
        let mut classes: Vec<ClassId> = classes.into_iter().collect();
        classes.sort_unstable();
        classes.dedup();
        Self { classes }
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn columns(&self) -> usize {
        match self.classes.len() {
            0..=2 => 1,
            k => k,
        }
    }

    /// Target row for a vertex of class `class`; `None` if unknown.
    pub fn target<T: Scalar>(&self, class: ClassId) -> Option<Vec<T>> {
        let idx = self.classes.binary_search(&class).ok()?;
        Some(match self.classes.len() {
            1 => vec![T::one()],
            2 => vec![if idx == 1 { T::one() } else { -T::one() }],
            k => (0..k).map(|c| if c == idx { T::one() } else { -T::one() }).collect(),
        })
    }

    /// Maps a score row to a decision and a confidence in `[0, 1]`.
    pub fn decide<T: Scalar>(&self, scores: &[T]) -> (Prediction, T) {
        let tau = T::of(ABSTAIN_TOLERANCE);
        let clamp = |v: T| v.max(T::zero()).min(T::one());
        match self.classes.len() {
            0 => (Prediction::Abstain, T::zero()),
            1 => {
                let s = scores[0];
                if s.abs() < tau || s <= T::zero() {
                    (Prediction::Abstain, T::zero())
                } else {
                    (Prediction::Class(self.classes[0]), clamp(s))
                }
            }
            2 => {
                let s = scores[0];
                if s.abs() < tau {
                    (Prediction::Abstain, T::zero())
                } else if s > T::zero() {
                    (Prediction::Class(self.classes[1]), clamp(s))
                } else {
                    (Prediction::Class(self.classes[0]), clamp(-s))
                }
            }
            _ => {
                let mut best = 0;
                for (c, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = c;
                    }
                }
                let max_abs = scores.iter().fold(T::zero(), |m, s| m.max(s.abs()));
                if scores[best] <= T::zero() || max_abs < tau {
                    (Prediction::Abstain, T::zero())
                } else {
                    (Prediction::Class(self.classes[best]), clamp(scores[best]))
                }
            }
        }
    }
}

/// Targets of the labeled vertices, one row per vertex.
#[derive(Debug, Clone)]
pub struct LabelMatrix<T> {
    encoding: LabelEncoding,
    values: DenseMatrix<T>,
}

impl<T: Scalar> LabelMatrix<T> {
    pub fn new(labels: &[ClassId]) -> Self {
        let encoding = LabelEncoding::new(labels.iter().copied());
        Self::with_encoding(encoding, labels).expect("every label is in its own encoding")
    }

    pub fn with_encoding(encoding: LabelEncoding, labels: &[ClassId]) -> Result<Self> {
        let mut values = DenseMatrix::zeros(labels.len(), encoding.columns());
        for (i, &c) in labels.iter().enumerate() {
            let row = encoding
                .target(c)
                .ok_or_else(|| Error::InvalidParameter(format!("class {c} is not in the encoding")))?;
            values.row_mut(i).copy_from_slice(&row);
        }
        Ok(Self { encoding, values })
    }

    /// Raw target rows (e.g. the binary `+1/-1` vector as a single column).
    pub fn from_values(encoding: LabelEncoding, values: DenseMatrix<T>) -> Result<Self> {
        if values.cols() != encoding.columns() {
            return Err(Error::Misaligned("label columns disagree with the encoding".into()));
        }
        Ok(Self { encoding, values })
    }

    pub fn encoding(&self) -> &LabelEncoding {
        &self.encoding
    }

    pub fn values(&self) -> &DenseMatrix<T> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn columns(&self) -> usize {
        self.values.cols()
    }
}

/// Scores on the unlabeled vertices, one row per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSolution<T> {
    encoding: LabelEncoding,
    scores: DenseMatrix<T>,
}

impl<T: Scalar> HarmonicSolution<T> {
    pub fn new(encoding: LabelEncoding, scores: DenseMatrix<T>) -> Result<Self> {
        if scores.cols() != encoding.columns() {
            return Err(Error::Misaligned("score columns disagree with the encoding".into()));
        }
        Ok(Self { encoding, scores })
    }

    pub fn encoding(&self) -> &LabelEncoding {
        &self.encoding
    }

    pub fn n_unlabeled(&self) -> usize {
        self.scores.rows()
    }

    /// Scores of the `u`-th unlabeled vertex (0-based within the unlabeled set).
    pub fn scores(&self, u: usize) -> &[T] {
        self.scores.row(u)
    }

    pub fn score_matrix(&self) -> &DenseMatrix<T> {
        &self.scores
    }

    pub fn confidence(&self, u: usize) -> T {
        self.classify(u).1
    }

    pub fn classify(&self, u: usize) -> (Prediction, T) {
        classify(self, u)
    }
}

/// Prediction and confidence of the `u`-th unlabeled vertex.
pub fn classify<T: Scalar>(sol: &HarmonicSolution<T>, u: usize) -> (Prediction, T) {
    sol.encoding.decide(sol.scores(u))
}

fn check_inputs<T: Scalar>(graph: &QuantizedGraph<T>, labels: &LabelMatrix<T>, gamma_g: T) -> Result<()> {
    if !(gamma_g >= T::zero()) || !gamma_g.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma_g must be non-negative, got {gamma_g}")));
    }
    if graph.n_labeled() == 0 {
        return Err(Error::NoLabeledVertices);
    }
    if labels.n_rows() != graph.n_labeled() {
        return Err(Error::Misaligned(format!(
            "{} label rows for {} labeled vertices",
            labels.n_rows(),
            graph.n_labeled()
        )));
    }
    Ok(())
}

/// Solves `(L^_uu + gamma_g V_uu) l_u = W^_ul l_l` for every label column.
///
/// Unlabeled components with no edge to a labeled vertex have an all-zero
/// right-hand side and get exact zero scores; with `gamma_g = 0` such a
/// component of more than one vertex makes the system singular and is
/// reported instead.
pub fn solve<T: Scalar>(graph: &QuantizedGraph<T>, labels: &LabelMatrix<T>, gamma_g: T) -> Result<HarmonicSolution<T>> {
    check_inputs(graph, labels, gamma_g)?;
    let nl = graph.n_labeled();
    let nu = graph.n_unlabeled();
    let cols = labels.columns();

    let mut active = Vec::with_capacity(nu);
    for (members, anchored) in graph.unlabeled_components() {
        if anchored {
            active.extend(members);
        } else if gamma_g == T::zero() && members.len() > 1 {
            return Err(Error::Singular { component: members });
        }
    }
    active.sort_unstable();

    let m = active.len();
    let mut system = DenseMatrix::zeros(m, m);
    let mut rhs = DenseMatrix::zeros(m, cols);
    for (a, &i) in active.iter().enumerate() {
        let vi = graph.multiplicity(i);
        system.set(a, a, graph.weighted_degree(i) + gamma_g * vi);
        for (b, &j) in active.iter().enumerate().take(a) {
            let w = -graph.weighted(i, j);
            system.set(a, b, w);
            system.set(b, a, w);
        }
        for j in 0..nl {
            let w = graph.weighted(i, j);
            if w != T::zero() {
                for c in 0..cols {
                    let v = rhs.get(a, c) + w * labels.values().get(j, c);
                    rhs.set(a, c, v);
                }
            }
        }
    }

    let mut scores = DenseMatrix::zeros(nu, cols);
    if m > 0 {
        let chol = Cholesky::factor(&system)?;
        let mut col = vec![T::zero(); m];
        for c in 0..cols {
            for a in 0..m {
                col[a] = rhs.get(a, c);
            }
            chol.solve_in_place(&mut col);
            for (a, &i) in active.iter().enumerate() {
                scores.set(i - nl, c, col[a]);
            }
        }
    }
    HarmonicSolution::new(labels.encoding().clone(), scores)
}

/// Expands every vertex into `v_i` identical copies (copies inherit the
/// original's edges, no edges between copies of one vertex), solves the
/// plain regularized system on the expanded graph by Gaussian elimination,
/// and returns the largest absolute difference to the compact solution on
/// the unlabeled vertices.
pub fn expand_equivalence_check<T: Scalar>(
    graph: &QuantizedGraph<T>,
    labels: &LabelMatrix<T>,
    gamma_g: T,
    cap: usize,
) -> Result<T> {
    check_inputs(graph, labels, gamma_g)?;
    let total: u64 = graph.multiplicities().iter().sum();
    if total as usize > cap {
        return Err(Error::CapExceeded { size: total as usize, cap });
    }
    let compact = solve(graph, labels, gamma_g)?;

    // origin[k] = compact vertex that expanded vertex k copies
    let mut origin_l = Vec::new();
    let mut origin_u = Vec::new();
    for i in 0..graph.n_vertices() {
        let target = if i < graph.n_labeled() { &mut origin_l } else { &mut origin_u };
        target.extend(std::iter::repeat_n(i, graph.multiplicities()[i] as usize));
    }
    let mu = origin_u.len();
    let cols = labels.columns();
    let mut a = DenseMatrix::zeros(mu, mu);
    let mut b = DenseMatrix::zeros(mu, cols);
    let mut keep = Vec::new();
    for (p, &i) in origin_u.iter().enumerate() {
        let mut degree = T::zero();
        for &j in origin_l.iter() {
            let w = graph.weight(i, j);
            degree += w;
            for c in 0..cols {
                b.set(p, c, b.get(p, c) + w * labels.values().get(j, c));
            }
        }
        for (q, &j) in origin_u.iter().enumerate() {
            if q != p && j != i {
                let w = graph.weight(i, j);
                degree += w;
                a.set(p, q, -w);
            }
        }
        a.set(p, p, degree + gamma_g);
        if a.get(p, p) != T::zero() {
            keep.push(p);
        }
    }
    // isolated copies with gamma_g = 0 score zero, like the compact route
    let mut reduced_a = DenseMatrix::zeros(keep.len(), keep.len());
    let mut reduced_b = DenseMatrix::zeros(keep.len(), cols);
    for (r, &p) in keep.iter().enumerate() {
        for (s, &q) in keep.iter().enumerate() {
            reduced_a.set(r, s, a.get(p, q));
        }
        for c in 0..cols {
            reduced_b.set(r, c, b.get(p, c));
        }
    }
    let expanded = if keep.is_empty() { reduced_b.clone() } else { gauss_solve(&reduced_a, &reduced_b)? };

    let nl = graph.n_labeled();
    let mut worst = T::zero();
    let mut expanded_score = vec![vec![T::zero(); cols]; mu];
    for (r, &p) in keep.iter().enumerate() {
        for c in 0..cols {
            expanded_score[p][c] = expanded.get(r, c);
        }
    }
    for (p, &i) in origin_u.iter().enumerate() {
        for c in 0..cols {
            worst = worst.max((expanded_score[p][c] - compact.scores(i - nl)[c]).abs());
        }
    }
    Ok(worst)
}
