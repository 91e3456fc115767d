use ohfs::metric::euclidean;
use ohfs::quantizer::{coverage_audit, AssignmentOutcome, CoverageHistory, RepresentativeSet};
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants_hold_after_every_step(pts in points(), budget in 1usize..10) {
        let mut q = RepresentativeSet::<f64>::new(budget).unwrap();
        let mut hist = CoverageHistory::new();
        for (t, x) in pts.iter().enumerate() {
            let out = q.observe(x, &euclidean);
            hist.record(x, &out);
            prop_assert_eq!(q.total_multiplicity(), t as u64 + 1);
            prop_assert!(q.len() <= budget + 1);
            let r = q.radius();
            let c = q.centers();
            for i in 0..c.len() {
                for j in 0..i {
                    prop_assert!(euclidean(&c[i], &c[j]) >= r);
                }
            }
            prop_assert!(coverage_audit(hist.entries(), &q, &euclidean) <= 2.0 * r);
            // representatives are observed points
            prop_assert!(c.iter().all(|ci| pts[..=t].contains(ci)));
        }
    }

    #[test]
    fn radius_never_shrinks(pts in points(), budget in 1usize..6) {
        let mut q = RepresentativeSet::<f64>::new(budget).unwrap();
        let mut last = 0.0;
        for x in &pts {
            q.observe(x, &euclidean);
            prop_assert!(q.radius() >= last);
            last = q.radius();
        }
    }

    #[test]
    fn remap_tracks_surviving_indices(pts in points(), budget in 1usize..6) {
        let mut q = RepresentativeSet::<f64>::new(budget).unwrap();
        for x in &pts {
            let before = q.len();
            match q.observe(x, &euclidean) {
                AssignmentOutcome::RepartitionedThenAssigned { remap, center, .. } => {
                    prop_assert_eq!(remap.len(), before);
                    prop_assert!(remap.iter().all(|&r| r < q.len()));
                    prop_assert!(center < q.len());
                }
                AssignmentOutcome::Merged(c) => {
                    prop_assert_eq!(q.len(), before);
                    prop_assert!(c < before);
                }
                AssignmentOutcome::Created(c) => prop_assert_eq!(c, before),
            }
        }
    }
}
