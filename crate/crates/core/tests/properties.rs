use ohfs::harmonic::{
    expand_equivalence_check, solve, ClassId, LabelEncoding, LabelMatrix, Prediction, QuantizedGraph, EXPANSION_CAP,
};
use ohfs::linalg::DenseMatrix;
use ohfs::metric::{KernelParams, Metric};
use ohfs::stream::{generate_drift_stream, DriftSpec, Stream};
use ohfs::{evaluate, sweep, LearnerConfig, Scenario, SweepAxis};
use proptest::prelude::*;

/// Connected weighted graph: edge (i, i-1) always present, others optional.
fn graph_strategy() -> impl Strategy<Value = (QuantizedGraph<f64>, LabelMatrix<f64>, f64)> {
    (2usize..9)
        .prop_flat_map(|n| {
            (
                Just(n),
                1..n,
                prop::collection::vec(prop::option::weighted(0.4, 0.01f64..1.0), n * n),
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(1u64..=5, n),
                prop::collection::vec(prop::bool::ANY, n),
                prop::sample::select(vec![0.0, 0.1, 1.0]),
            )
        })
        .prop_map(|(n, nl, extra, chain, mult, signs, gamma)| {
            let mut w = DenseMatrix::zeros(n, n);
            for i in 1..n {
                for j in 0..i {
                    let v = if j == i - 1 { Some(chain[i]) } else { extra[i * n + j] };
                    if let Some(v) = v {
                        w.set(i, j, v);
                        w.set(j, i, v);
                    }
                }
            }
            let mut y = DenseMatrix::zeros(nl, 1);
            for (i, &positive) in signs.iter().take(nl).enumerate() {
                y.set(i, 0, if positive { 1.0 } else { -1.0 });
            }
            let g = QuantizedGraph::from_parts(w, mult, nl).unwrap();
            let labels = LabelMatrix::from_values(LabelEncoding::new([ClassId(-1), ClassId(1)]), y).unwrap();
            (g, labels, gamma)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compact_equals_expanded((g, y, gamma) in graph_strategy()) {
        prop_assert!(expand_equivalence_check(&g, &y, gamma, EXPANSION_CAP).unwrap() <= 1e-10);
    }

    #[test]
    fn scores_stay_in_label_range((g, y, gamma) in graph_strategy()) {
        let sol = solve(&g, &y, gamma).unwrap();
        for u in 0..sol.n_unlabeled() {
            prop_assert!(sol.scores(u)[0].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn regularization_shrinks_scores((g, y, _gamma) in graph_strategy(), gamma in 0.01f64..2.0) {
        // same-sign labels: a larger sink pulls every score toward zero
        let ones = LabelMatrix::from_values(
            y.encoding().clone(),
            DenseMatrix::from_rows(&vec![vec![1.0]; y.n_rows()]).unwrap(),
        ).unwrap();
        let small = solve(&g, &ones, gamma).unwrap();
        let large = solve(&g, &ones, 2.0 * gamma).unwrap();
        for u in 0..small.n_unlabeled() {
            prop_assert!(large.scores(u)[0] <= small.scores(u)[0] + 1e-12);
        }
    }
}

#[test]
fn perfect_predictions_score_one() {
    let spec = DriftSpec { n_points: 50, seed: 9, ..DriftSpec::default() };
    let s: Stream<f64> = generate_drift_stream(&spec).unwrap();
    let preds: Vec<Prediction> = s
        .records
        .iter()
        .map(|r| if r.supervised { Prediction::Abstain } else { Prediction::Class(r.true_label.unwrap()) })
        .collect();
    let r = evaluate(&s, &preds).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
}

#[test]
fn repeated_sweep_values_give_identical_reports() {
    let spec = DriftSpec { n_points: 120, dim: 3, noise: 0.2, seed: 10, ..DriftSpec::default() };
    let stream: Stream<f64> = generate_drift_stream(&spec).unwrap();
    let config = LearnerConfig::new(3, Metric::Euclidean, KernelParams::new(0.2, 1e-3).unwrap(), 16).unwrap();
    let scenario = Scenario { stream, config, gamma_override: None };
    let reports = sweep(SweepAxis::Epsilon, &[1e-3, 1e-3], &scenario).unwrap();
    let strip = |mut r: ohfs::EvalReport| {
        r.mean_latency_ms = 0.0;
        r.p95_latency_ms = 0.0;
        r.fps = 0.0;
        r
    };
    assert_eq!(strip(reports[0].clone()), strip(reports[1].clone()));
    assert_eq!(sweep(SweepAxis::NG, &[8.0], &scenario).unwrap().len(), 1);
    assert!(sweep(SweepAxis::NG, &[], &scenario).is_err());
    assert!(sweep(SweepAxis::NG, &[2.5], &scenario).is_err());
}
