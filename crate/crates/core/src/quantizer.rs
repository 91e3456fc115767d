//! Online doubling quantizer over unlabeled examples.
//!
//! Keeps at most `budget` representative points (plus one transiently)
//! whose pairwise distances are at least the current radius `R`. A new
//! example merges into the nearest representative closer than `R` or
//! becomes a representative itself. When the set overflows, `R` doubles
//! and the set is greedily repartitioned in insertion order.
//!
//! Representatives are original data points, never centroids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Dissimilarity;
use crate::scalar::Scalar;

/// Quantizer state: centers, their multiplicities, radius and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet<T> {
    centers: Vec<Vec<T>>,
    multiplicities: Vec<u64>,
    radius: T,
    budget: usize,
}

/// What `observe` did with the incoming example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignmentOutcome {
    Merged(usize),
    Created(usize),
    /// The set was repartitioned first. `remap[old]` is the post-repartition
    /// index of every pre-step center; `created` tells whether the example
    /// then became a new center.
    RepartitionedThenAssigned {
        center: usize,
        created: bool,
        remap: Vec<usize>,
    },
}

impl AssignmentOutcome {
    pub fn center(&self) -> usize {
        match self {
            AssignmentOutcome::Merged(c) | AssignmentOutcome::Created(c) => *c,
            AssignmentOutcome::RepartitionedThenAssigned { center, .. } => *center,
        }
    }
}

// R = 0 admits exact duplicates only.
fn within<T: Scalar>(d: T, radius: T) -> bool {
    d < radius || d == T::zero()
}

const MAX_DOUBLINGS: usize = 4096;

impl<T: Scalar> RepresentativeSet<T> {
    pub fn new(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParameter("budget n_g must be positive".into()));
        }
        Ok(Self { centers: Vec::new(), multiplicities: Vec::new(), radius: T::zero(), budget })
    }

    /// Rebuilds a state from raw parts, validating the structural invariants.
    pub fn from_parts(centers: Vec<Vec<T>>, multiplicities: Vec<u64>, radius: T, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParameter("budget n_g must be positive".into()));
        }
        if centers.len() != multiplicities.len() {
            return Err(Error::Misaligned("centers and multiplicities differ in length".into()));
        }
        if multiplicities.contains(&0) {
            return Err(Error::InvalidParameter("multiplicities must be positive".into()));
        }
        if !(radius >= T::zero()) {
            return Err(Error::InvalidParameter("radius must be non-negative".into()));
        }
        Ok(Self { centers, multiplicities, radius, budget })
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.multiplicities.iter().sum()
    }

    /// Nearest center admitting `x`, ties to the lowest index.
    pub fn nearest_within<M: Dissimilarity<T> + ?Sized>(&self, x: &[T], metric: &M) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, c) in self.centers.iter().enumerate() {
            let d = metric.distance(x, c);
            if within(d, self.radius) && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Absorbs one example. Repartitions first when the set holds
    /// `budget + 1` centers on entry.
    pub fn observe<M: Dissimilarity<T> + ?Sized>(&mut self, x: &[T], metric: &M) -> AssignmentOutcome {
        let remap = if self.len() > self.budget {
            let mut remap: Vec<usize> = (0..self.len()).collect();
            let mut rounds = 0;
            while self.len() > self.budget && rounds < MAX_DOUBLINGS {
                let step = self.repartition(metric);
                for r in remap.iter_mut() {
                    *r = step[*r];
                }
                rounds += 1;
            }
            Some(remap)
        } else {
            None
        };

        let (center, created) = match self.nearest_within(x, metric) {
            Some(i) => {
                self.multiplicities[i] += 1;
                (i, false)
            }
            None => {
                self.centers.push(x.to_vec());
                self.multiplicities.push(1);
                (self.centers.len() - 1, true)
            }
        };

        match (remap, created) {
            (Some(remap), created) => AssignmentOutcome::RepartitionedThenAssigned { center, created, remap },
            (None, false) => AssignmentOutcome::Merged(center),
            (None, true) => AssignmentOutcome::Created(center),
        }
    }

    /// Doubles `R` and greedily re-merges the centers: walking in insertion
    /// order, every not-yet-absorbed center survives and absorbs all later
    /// unabsorbed centers closer than `R`. Returns `old index -> new index`.
    ///
    /// From `R = 0` the radius is first set to the smallest pairwise center
    /// distance so that the doubling makes progress.
    pub fn repartition<M: Dissimilarity<T> + ?Sized>(&mut self, metric: &M) -> Vec<usize> {
        let n = self.len();
        if self.radius == T::zero() {
            let mut min = T::infinity();
            for i in 0..n {
                for j in (i + 1)..n {
                    min = min.min(metric.distance(&self.centers[i], &self.centers[j]));
                }
            }
            if min.is_finite() {
                self.radius = min;
            }
        }
        self.radius = self.radius + self.radius;

        let mut assigned: Vec<Option<usize>> = vec![None; n];
        let mut survivors = Vec::new();
        let mut multiplicities = Vec::new();
        for i in 0..n {
            if assigned[i].is_some() {
                continue;
            }
            let idx = survivors.len();
            assigned[i] = Some(idx);
            let mut total = self.multiplicities[i];
            for j in (i + 1)..n {
                if assigned[j].is_none() && within(metric.distance(&self.centers[i], &self.centers[j]), self.radius) {
                    assigned[j] = Some(idx);
                    total += self.multiplicities[j];
                }
            }
            survivors.push(i);
            multiplicities.push(total);
        }

        let mut old: Vec<Option<Vec<T>>> = std::mem::take(&mut self.centers).into_iter().map(Some).collect();
        self.centers = survivors.iter().map(|&i| old[i].take().expect("survivor taken once")).collect();
        self.multiplicities = multiplicities;
        assigned.into_iter().map(|a| a.expect("every center assigned")).collect()
    }
}

/// Maximum distance from any absorbed point to its current representative.
/// `history` pairs each observed point with the index of the center that
/// currently represents it.
pub fn coverage_audit<T, M>(history: &[(Vec<T>, usize)], state: &RepresentativeSet<T>, metric: &M) -> T
where
    T: Scalar,
    M: Dissimilarity<T> + ?Sized,
{
    history.iter().map(|(x, c)| metric.distance(x, &state.centers()[*c])).fold(T::zero(), T::max)
}

/// Tracks every absorbed point's current representative across repartitions.
#[derive(Debug, Clone, Default)]
pub struct CoverageHistory<T> {
    entries: Vec<(Vec<T>, usize)>,
}

impl<T: Scalar> CoverageHistory<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn record(&mut self, x: &[T], outcome: &AssignmentOutcome) {
        if let AssignmentOutcome::RepartitionedThenAssigned { remap, .. } = outcome {
            for (_, c) in self.entries.iter_mut() {
                *c = remap[*c];
            }
        }
        self.entries.push((x.to_vec(), outcome.center()));
    }

    pub fn entries(&self) -> &[(Vec<T>, usize)] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::euclidean;

    fn line(points: &[f64], mults: &[u64], radius: f64, budget: usize) -> RepresentativeSet<f64> {
        RepresentativeSet::from_parts(points.iter().map(|&p| vec![p]).collect(), mults.to_vec(), radius, budget)
            .unwrap()
    }

    fn metric(a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    #[test]
    fn duplicate_is_absorbed() {
        let mut s = line(&[0.5], &[1], 1.0, 4);
        assert_eq!(s.observe(&[0.5], &metric), AssignmentOutcome::Merged(0));
        assert_eq!(s.multiplicities(), &[2]);
    }

    #[test]
    fn boundary_distance_creates() {
        let mut s = line(&[0.0], &[1], 1.0, 4);
        assert_eq!(s.observe(&[1.0], &metric), AssignmentOutcome::Created(1));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn nearest_center_wins_ties_lowest() {
        let mut s = line(&[0.0, 2.0, 1.0], &[1, 1, 1], 5.0, 8);
        assert_eq!(s.observe(&[1.2], &metric), AssignmentOutcome::Merged(2));
        // 1.0 is equidistant from 0.0 and 2.0 once 2 is gone from the picture
        let mut t = line(&[0.0, 2.0], &[1, 1], 5.0, 8);
        assert_eq!(t.observe(&[1.0], &metric), AssignmentOutcome::Merged(0));
    }

    #[test]
    fn repartition_line_example() {
        let mut s = line(&[0.0, 1.0, 2.0, 3.0], &[1, 1, 1, 1], 1.0, 3);
        let remap = s.repartition(&metric);
        assert_eq!(s.radius(), 2.0);
        assert_eq!(s.centers(), &[vec![0.0], vec![2.0]]);
        assert_eq!(s.multiplicities(), &[2, 2]);
        assert_eq!(remap, vec![0, 0, 1, 1]);
    }

    #[test]
    fn repartition_single_and_identical() {
        let mut s = line(&[0.7], &[3], 1.5, 1);
        s.repartition(&metric);
        assert_eq!(s.centers(), &[vec![0.7]]);
        assert_eq!(s.multiplicities(), &[3]);
        assert_eq!(s.radius(), 3.0);

        let mut s = line(&[0.4, 0.4, 0.4], &[1, 2, 3], 0.0, 2);
        s.repartition(&metric);
        assert_eq!(s.len(), 1);
        assert_eq!(s.multiplicities(), &[6]);
    }

    #[test]
    fn first_repartition_seeds_radius_from_closest_pair() {
        let mut s = line(&[0.0, 10.0, 10.5], &[1, 1, 1], 0.0, 2);
        s.repartition(&metric);
        assert_eq!(s.radius(), 1.0);
        assert_eq!(s.centers(), &[vec![0.0], vec![10.0]]);
        assert_eq!(s.multiplicities(), &[1, 2]);
    }

    #[test]
    fn stream_of_distant_points_triggers_doubling() {
        // n_g = 4, six points 1, 2, 4, 8, 16, 32 apart on a line
        let budget = 4;
        let mut s = RepresentativeSet::<f64>::new(budget).unwrap();
        let pts = [0.0, 1.0, 3.0, 7.0, 15.0, 31.0];
        let mut outcomes = Vec::new();
        for p in pts {
            outcomes.push(s.observe(&[p], &metric));
        }
        // Hand simulation: R = 0 admits no merges, so the fifth point makes
        // |C| = 5 = n_g + 1. The sixth observe repartitions: R = 2 * 1 = 2,
        // 0 absorbs 1 and the survivors are {0, 3, 7, 15}; 31 is then created.
        assert!(matches!(outcomes[5], AssignmentOutcome::RepartitionedThenAssigned { center: 4, created: true, .. }));
        assert_eq!(s.radius(), 2.0);
        assert_eq!(s.centers(), &[vec![0.0], vec![3.0], vec![7.0], vec![15.0], vec![31.0]]);
        assert_eq!(s.multiplicities(), &[2, 1, 1, 1, 1]);
        assert!(s.len() <= budget + 1);
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                assert!(metric(&s.centers()[i], &s.centers()[j]) >= s.radius());
            }
        }
    }

    #[test]
    fn coverage_audit_edge_cases() {
        let s = RepresentativeSet::<f64>::new(3).unwrap();
        assert_eq!(coverage_audit(&[], &s, &metric), 0.0);

        let mut s = line(&[0.0], &[1], 1.0, 3);
        let mut h = CoverageHistory::new();
        h.record(&[0.0], &AssignmentOutcome::Created(0));
        for p in [0.3, 0.6, 1.5, 2.9] {
            let o = s.observe(&[p], &metric);
            h.record(&[p], &o);
        }
        let audit = coverage_audit(h.entries(), &s, &metric);
        assert!(audit < s.radius());
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(RepresentativeSet::<f64>::new(0).is_err());
        assert!(RepresentativeSet::<f64>::from_parts(vec![vec![0.0]], vec![0], 0.0, 1).is_err());
    }
}
