//! Replays a fixed 50-record stream with n_g = 8 and compares every step
//! with the stored trace. Set `OHFS_BLESS=1` to rewrite the fixture.

use std::fmt::Write as _;
use std::path::PathBuf;

use ohfs::metric::{KernelParams, Metric};
use ohfs::stream::{generate_drift_stream, DriftKind, DriftSpec, Stream};
use ohfs::{LearnerConfig, OnlineLearner, Prediction};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_trace.csv")
}

fn trace() -> String {
    let spec = DriftSpec {
        n_points: 46,
        classes: 2,
        dim: 3,
        drift: DriftKind::Shift,
        displacement: 0.5,
        noise: 0.2,
        outlier_fraction: 0.1,
        outlier_scale: 30.0,
        labeled_per_class: 2,
        seed: 2024,
        ..DriftSpec::default()
    };
    let stream: Stream<f64> = generate_drift_stream(&spec).unwrap();
    assert_eq!(stream.records.len(), 50);
    let cfg = LearnerConfig::new(3, Metric::Euclidean, KernelParams::new(0.3, 1e-3).unwrap(), 8).unwrap();
    let mut learner = OnlineLearner::new(cfg).unwrap();
    let mut out = String::from("frame,prediction,outlier,confidence,centers,radius\n");
    for r in &stream.records {
        if r.supervised {
            learner.add_labeled(r.features.clone(), r.true_label.unwrap()).unwrap();
            continue;
        }
        let rec = learner.step(&r.features).unwrap();
        let p = match rec.prediction {
            Prediction::Class(c) => c.to_string(),
            Prediction::Abstain => "abstain".into(),
        };
        let q = learner.quantizer();
        writeln!(
            out,
            "{},{p},{},{:.9},{},{:.9}",
            r.frame_id,
            u8::from(rec.outlier),
            rec.confidence,
            q.len(),
            q.radius()
        )
        .unwrap();
    }
    out
}

#[test]
fn matches_stored_trace() {
    let got = trace();
    if std::env::var_os("OHFS_BLESS").is_some() {
        std::fs::write(fixture(), &got).unwrap();
    }
    let want = std::fs::read_to_string(fixture()).expect("fixture missing; run with OHFS_BLESS=1");
    for (i, (g, w)) in got.lines().zip(want.lines()).enumerate() {
        assert_eq!(g, w, "line {}", i + 1);
    }
    assert_eq!(got.lines().count(), want.lines().count());
}

#[test]
fn replay_is_deterministic() {
    assert_eq!(trace(), trace());
}
