//! Per-frame evaluation, run drivers, parameter sweeps and report output.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{ClassId, Prediction};
use crate::learner::{LearnerConfig, OnlineLearner};
use crate::metric::{FeatureVector, KernelParams, Metric};
use crate::oracles::{nn_classify, RegretReport};
use crate::scalar::Scalar;
use crate::stream::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Share of unsupervised records that abstained.
    pub abstention_rate: f64,
    pub predicted_frames: usize,
    pub correct_frames: usize,
    /// Frames holding at least one unsupervised record with a known label.
    pub target_frames: usize,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub fps: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regret: Option<RegretReport>,
}

impl EvalReport {
    /// Fills the latency statistics from per-step wall-clock times.
    pub fn with_latencies(mut self, latencies: &[Duration]) -> Self {
        if latencies.is_empty() {
            return self;
        }
        let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let mean = ms.iter().sum::<f64>() / ms.len() as f64;
        let rank = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        self.mean_latency_ms = mean;
        self.p95_latency_ms = ms[rank - 1];
        self.fps = if mean > 0.0 { 1e3 / mean } else { f64::INFINITY };
        self
    }
}

/// Scores predictions frame by frame. Supervised records are skipped.
///
/// A frame is predicted if it has a non-abstaining prediction, and a
/// predicted frame is correct when all its non-abstaining predictions name
/// the same class and each matches its record's truth. With nothing
/// predicted, precision is 1 and recall 0.
pub fn evaluate<T: Scalar>(stream: &Stream<T>, predictions: &[Prediction]) -> Result<EvalReport> {
    if predictions.len() != stream.records.len() {
        return Err(Error::Misaligned(format!(
            "{} predictions for {} records",
            predictions.len(),
            stream.records.len()
        )));
    }

    #[derive(Default)]
    struct Frame {
        predicted: Option<ClassId>,
        conflict: bool,
        wrong: bool,
        target: bool,
    }

    let mut frames: BTreeMap<u64, Frame> = BTreeMap::new();
    let mut unsupervised = 0usize;
    let mut abstained = 0usize;
    for (r, &p) in stream.records.iter().zip(predictions) {
        if r.supervised {
            continue;
        }
        unsupervised += 1;
        let f = frames.entry(r.frame_id).or_default();
        f.target |= r.true_label.is_some();
        match p {
            Prediction::Abstain => abstained += 1,
            Prediction::Class(c) => {
                if f.predicted.is_some_and(|q| q != c) {
                    f.conflict = true;
                }
                f.predicted.get_or_insert(c);
                f.wrong |= r.true_label != Some(c);
            }
        }
    }

    let predicted = frames.values().filter(|f| f.predicted.is_some()).count();
    let correct = frames.values().filter(|f| f.predicted.is_some() && !f.conflict && !f.wrong).count();
    let targets = frames.values().filter(|f| f.target).count();
    let precision = if predicted == 0 { 1.0 } else { correct as f64 / predicted as f64 };
    let recall = if targets == 0 { 0.0 } else { correct as f64 / targets as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        precision,
        recall,
        f1,
        abstention_rate: if unsupervised == 0 { 0.0 } else { abstained as f64 / unsupervised as f64 },
        predicted_frames: predicted,
        correct_frames: correct,
        target_frames: targets,
        mean_latency_ms: 0.0,
        p95_latency_ms: 0.0,
        fps: 0.0,
        axis_value: None,
        regret: None,
    })
}

/// Per-record output of a run, aligned with the stream. Supervised records
/// carry `Abstain` and no latency entry.
#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub predictions: Vec<Prediction>,
    pub confidences: Vec<T>,
    pub outliers: Vec<bool>,
    pub latencies: Vec<Duration>,
}

/// Feeds the stream through a fresh learner. Supervised records go to the
/// labeled store; all class ids in the stream are declared up front.
pub fn run_learner<T: Scalar>(stream: &Stream<T>, config: LearnerConfig<T>) -> Result<RunOutput<T>> {
    let mut learner = OnlineLearner::new(config)?;
    learner.declare_classes(stream.records.iter().filter(|r| r.supervised).filter_map(|r| r.true_label));
    let n = stream.records.len();
    let mut out = RunOutput {
        predictions: Vec::with_capacity(n),
        confidences: Vec::with_capacity(n),
        outliers: Vec::new(),
        latencies: Vec::new(),
    };
    for r in &stream.records {
        if r.supervised {
            learner.add_labeled(r.features.clone(), r.true_label.expect("supervised implies labeled"))?;
            out.predictions.push(Prediction::Abstain);
            out.confidences.push(T::zero());
            out.outliers.push(false);
            continue;
        }
        let start = Instant::now();
        let rec = learner.step(&r.features)?;
        out.latencies.push(start.elapsed());
        out.predictions.push(rec.prediction);
        out.confidences.push(rec.confidence);
        out.outliers.push(rec.outlier);
    }
    Ok(out)
}

/// Nearest-neighbor baseline over the supervised records seen so far.
pub fn run_baseline<T: Scalar>(
    stream: &Stream<T>,
    metric: &Metric<T>,
    params: &KernelParams<T>,
) -> Result<RunOutput<T>> {
    let mut labeled: Vec<(FeatureVector<T>, ClassId)> = Vec::new();
    let n = stream.records.len();
    let mut out = RunOutput {
        predictions: Vec::with_capacity(n),
        confidences: Vec::with_capacity(n),
        outliers: Vec::new(),
        latencies: Vec::new(),
    };
    for r in &stream.records {
        r.features.check_dim(stream.dim)?;
        if r.supervised {
            labeled.push((r.features.clone(), r.true_label.expect("supervised implies labeled")));
            out.predictions.push(Prediction::Abstain);
        } else {
            let start = Instant::now();
            let p = nn_classify(r.features.as_slice(), &labeled, metric, params);
            out.latencies.push(start.elapsed());
            out.predictions.push(p);
        }
        out.confidences.push(T::zero());
        out.outliers.push(false);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    NG,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepAxis::Epsilon),
            "n_g" => Ok(SweepAxis::NG),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// A stream plus the base configuration the sweep varies.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub stream: Stream<T>,
    pub config: LearnerConfig<T>,
    /// Fixed `gamma_g`; otherwise it follows `10 epsilon`.
    pub gamma_override: Option<T>,
}

impl<T: Scalar> Scenario<T> {
    fn config_at(&self, axis: SweepAxis, value: f64) -> Result<LearnerConfig<T>> {
        let mut cfg = self.config.clone();
        match axis {
            SweepAxis::Epsilon => {
                cfg.kernel = KernelParams::new(cfg.kernel.sigma, T::of(value))?;
                let gamma = self.gamma_override.unwrap_or_else(|| cfg.kernel.default_gamma());
                cfg = cfg.with_gamma(gamma)?;
            }
            SweepAxis::NG => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("n_g must be a positive integer, got {value}")));
                }
                cfg.budget = value as usize;
                if let Some(g) = self.gamma_override {
                    cfg = cfg.with_gamma(g)?;
                }
            }
        }
        Ok(cfg)
    }

    fn point(&self, axis: SweepAxis, value: f64) -> Result<EvalReport> {
        let out = run_learner(&self.stream, self.config_at(axis, value)?)?;
        let mut report = evaluate(&self.stream, &out.predictions)?.with_latencies(&out.latencies);
        report.axis_value = Some(value);
        Ok(report)
    }
}

/// One independent run per value, reported in input order. Epsilon points
/// run in parallel; n_g points run one at a time so latencies stay
/// comparable.
pub fn sweep<T: Scalar>(axis: SweepAxis, values: &[f64], scenario: &Scenario<T>) -> Result<Vec<EvalReport>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    match axis {
        SweepAxis::Epsilon => values.par_iter().map(|&v| scenario.point(axis, v)).collect(),
        SweepAxis::NG => values.iter().map(|&v| scenario.point(axis, v)).collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "axis_value,precision,recall,f1,abstention_rate,predicted_frames,correct_frames,target_frames,mean_latency_ms,p95_latency_ms,fps"
    )?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            opt(r.axis_value),
            r.precision,
            r.recall,
            r.f1,
            r.abstention_rate,
            r.predicted_frames,
            r.correct_frames,
            r.target_frames,
            r.mean_latency_ms,
            r.p95_latency_ms,
            r.fps
        )?;
    }
    Ok(())
}

pub fn write_regret_csv<W: Write>(report: &RegretReport, mut out: W) -> Result<()> {
    writeln!(out, "t,term_hfs,term_online,term_quant,bound,total_lhs,reference_rate")?;
    for p in &report.trajectory {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.t,
            p.term_hfs,
            p.term_online,
            p.term_quant,
            p.term_hfs + p.term_online + p.term_quant,
            p.total_lhs,
            p.reference_rate
        )?;
    }
    Ok(())
}

pub fn write_predictions_csv<T: Scalar, W: Write>(stream: &Stream<T>, run: &RunOutput<T>, mut out: W) -> Result<()> {
    writeln!(out, "frame_id,supervised,prediction,confidence,outlier")?;
    for (i, r) in stream.records.iter().enumerate() {
        let p = match run.predictions[i] {
            Prediction::Class(c) => c.to_string(),
            Prediction::Abstain => "abstain".into(),
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            r.frame_id,
            u8::from(r.supervised),
            p,
            run.confidences[i],
            u8::from(run.outliers[i])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamRecord;

    fn rec(frame: u64, label: Option<i32>, supervised: bool) -> StreamRecord<f64> {
        StreamRecord::new(frame, FeatureVector::from_f64(&[0.0]).unwrap(), label.map(ClassId), supervised).unwrap()
    }

    fn stream(records: Vec<StreamRecord<f64>>) -> Stream<f64> {
        Stream { dim: 1, num_classes: 2, records }
    }

    const A: Prediction = Prediction::Class(ClassId(1));
    const B: Prediction = Prediction::Class(ClassId(2));

    #[test]
    fn single_correct_frame() {
        let r = evaluate(&stream(vec![rec(0, Some(1), false)]), &[A]).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
    }

    #[test]
    fn conflicting_predictions_make_frame_wrong() {
        let s = stream(vec![rec(0, Some(1), false), rec(0, Some(2), false)]);
        let r = evaluate(&s, &[A, B]).unwrap();
        assert_eq!(r.predicted_frames, 1);
        assert_eq!(r.correct_frames, 0);
        assert_eq!(r.precision, 0.0);
    }

    #[test]
    fn all_abstain_convention() {
        let s = stream(vec![rec(0, Some(1), false), rec(1, Some(2), false)]);
        let r = evaluate(&s, &[Prediction::Abstain; 2]).unwrap();
        assert_eq!((r.precision, r.recall, r.predicted_frames), (1.0, 0.0, 0));
        assert_eq!(r.abstention_rate, 1.0);
    }

    #[test]
    fn misaligned_is_rejected() {
        assert!(matches!(evaluate(&stream(vec![rec(0, Some(1), false)]), &[]), Err(Error::Misaligned(_))));
    }

    #[test]
    fn supervised_and_unknown_truth_records() {
        let s = stream(vec![rec(0, Some(1), true), rec(1, None, false), rec(2, Some(2), false)]);
        let r = evaluate(&s, &[A, A, B]).unwrap();
        // the outlier frame is predicted but cannot be correct
        assert_eq!(r.predicted_frames, 2);
        assert_eq!(r.correct_frames, 1);
        assert_eq!(r.target_frames, 1);
    }

    #[test]
    fn permutation_within_frame_is_irrelevant() {
        let s1 = stream(vec![rec(0, Some(1), false), rec(0, Some(1), false), rec(1, Some(2), false)]);
        let s2 = stream(vec![rec(1, Some(2), false), rec(0, Some(1), false), rec(0, Some(1), false)]);
        let r1 = evaluate(&s1, &[A, Prediction::Abstain, B]).unwrap();
        let r2 = evaluate(&s2, &[B, Prediction::Abstain, A]).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn latency_stats() {
        let ms = |v: u64| Duration::from_millis(v);
        let lat: Vec<Duration> = (1..=20).map(ms).collect();
        let r = evaluate(&stream(vec![]), &[]).unwrap().with_latencies(&lat);
        assert!((r.mean_latency_ms - 10.5).abs() < 1e-9);
        assert!((r.p95_latency_ms - 19.0).abs() < 1e-9);
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("n_g".parse::<SweepAxis>().unwrap(), SweepAxis::NG);
        assert!("sigma".parse::<SweepAxis>().is_err());
    }
}
