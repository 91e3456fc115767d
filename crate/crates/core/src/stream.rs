//! Stream records, the text stream format and synthetic drifting streams.
//!
//! Stream files are plain text. The first line is a header
//! `#ohfs-stream v1 d=<d> k=<K>`; each following line is one record
//! `frame_id,label_or_?,supervised_flag,feat_1,...,feat_d`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::ClassId;
use crate::metric::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord<T> {
    pub frame_id: u64,
    pub features: FeatureVector<T>,
    pub true_label: Option<ClassId>,
    /// The label is revealed to the learner.
    pub supervised: bool,
}

impl<T: Scalar> StreamRecord<T> {
    pub fn new(
        frame_id: u64,
        features: FeatureVector<T>,
        true_label: Option<ClassId>,
        supervised: bool,
    ) -> Result<Self> {
        if supervised && true_label.is_none() {
            return Err(Error::InvalidParameter("supervised record without a label".into()));
        }
        Ok(Self { frame_id, features, true_label, supervised })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream<T> {
    pub dim: usize,
    pub num_classes: usize,
    pub records: Vec<StreamRecord<T>>,
}

impl<T: Scalar> Stream<T> {
    /// `(features, class)` pairs of the supervised records.
    pub fn labeled_seed(&self) -> Vec<(FeatureVector<T>, ClassId)> {
        self.records
            .iter()
            .filter(|r| r.supervised)
            .map(|r| (r.features.clone(), r.true_label.expect("supervised implies labeled")))
            .collect()
    }

    pub fn classes(&self) -> Vec<ClassId> {
        let mut c: Vec<ClassId> = self.records.iter().filter_map(|r| r.true_label).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

const HEADER_PREFIX: &str = "#ohfs-stream v1";

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let err = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
    let rest = line.trim().strip_prefix(HEADER_PREFIX).ok_or_else(|| err("missing '#ohfs-stream v1' header"))?;
    let mut dim = None;
    let mut classes = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("d=") {
            dim = Some(v.parse::<usize>().map_err(|_| err("bad d= value"))?);
        } else if let Some(v) = tok.strip_prefix("k=") {
            classes = Some(v.parse::<usize>().map_err(|_| err("bad k= value"))?);
        } else {
            return Err(err(&format!("unexpected header token '{tok}'")));
        }
    }
    let dim = dim.ok_or_else(|| err("header lacks d="))?;
    if dim == 0 {
        return Err(err("d must be positive"));
    }
    Ok((dim, classes.ok_or_else(|| err("header lacks k="))?))
}

fn parse_record<T: Scalar>(line: &str, lineno: usize, dim: usize) -> Result<StreamRecord<T>> {
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let mut fields = line.split(',').map(str::trim);
    let frame_id = fields.next().and_then(|f| f.parse::<u64>().ok()).ok_or_else(|| err("bad frame id".into()))?;
    let label = match fields.next() {
        Some("?") => None,
        Some(f) => Some(ClassId(f.parse::<i32>().map_err(|_| err(format!("bad label '{f}'")))?)),
        None => return Err(err("missing label".into())),
    };
    let supervised = match fields.next() {
        Some("1") => true,
        Some("0") => false,
        other => return Err(err(format!("bad supervised flag {other:?}"))),
    };
    let values = fields
        .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad feature '{f}'"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != dim {
        return Err(err(format!("expected {dim} features, found {}", values.len())));
    }
    let features = FeatureVector::from_f64(&values).map_err(|e| err(e.to_string()))?;
    StreamRecord::new(frame_id, features, label, supervised).map_err(|e| err(e.to_string()))
}

pub fn read_stream<T: Scalar, R: Read>(reader: R) -> Result<Stream<T>> {
    let mut lines = BufReader::new(reader).lines();
    let header = loop {
        match lines.next() {
            None => return Ok(Stream { dim: 0, num_classes: 0, records: Vec::new() }),
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let (dim, num_classes) = parse_header(&header)?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 2, dim)?);
    }
    Ok(Stream { dim, num_classes, records })
}

/// Loads a stream file; an empty file yields an empty stream.
pub fn load_stream<T: Scalar>(path: impl AsRef<Path>) -> Result<Stream<T>> {
    read_stream(std::fs::File::open(path)?)
}

pub fn write_stream<T: Scalar, W: Write>(stream: &Stream<T>, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER_PREFIX} d={} k={}", stream.dim, stream.num_classes)?;
    let mut line = String::new();
    for r in &stream.records {
        line.clear();
        let label = r.true_label.map_or_else(|| "?".to_string(), |c| c.0.to_string());
        write!(line, "{},{},{}", r.frame_id, label, u8::from(r.supervised)).expect("write to string");
        for v in r.features.as_slice() {
            write!(line, ",{}", v.as_f64()).expect("write to string");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_stream<T: Scalar>(stream: &Stream<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_stream(stream, file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    /// Class means rotate in the plane of the first two coordinates.
    Rotate,
    /// Class means translate continuously along the drift direction.
    Shift,
    /// Class means jump by the displacement at each segment boundary.
    Relocate,
}

impl std::str::FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotate" => Ok(DriftKind::Rotate),
            "shift" => Ok(DriftKind::Shift),
            "relocate" => Ok(DriftKind::Relocate),
            other => Err(Error::InvalidParameter(format!("unknown drift kind '{other}'"))),
        }
    }
}

/// Parameters of a synthetic drifting stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftSpec {
    /// Unlabeled records, outliers included.
    pub n_points: usize,
    pub classes: usize,
    pub dim: usize,
    pub drift: DriftKind,
    /// Number of segments for `Relocate`.
    pub segments: usize,
    /// Total translation (shift, per relocate segment) or rotation angle
    /// in radians (rotate).
    pub displacement: f64,
    /// Per-coordinate standard deviation around the class mean.
    pub noise: f64,
    /// Distance between consecutive class means.
    pub separation: f64,
    pub outlier_fraction: f64,
    /// Outliers are uniform in `[-outlier_scale, outlier_scale]^d`.
    pub outlier_scale: f64,
    /// Supervised records per class at the head of the stream.
    pub labeled_per_class: usize,
    pub seed: u64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            n_points: 500,
            classes: 2,
            dim: 8,
            drift: DriftKind::Relocate,
            segments: 2,
            displacement: 0.05,
            noise: 0.01,
            separation: 1.0,
            outlier_fraction: 0.0,
            outlier_scale: 5.0,
            labeled_per_class: 4,
            seed: 0,
        }
    }
}

impl DriftSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.classes == 0 || self.dim == 0 {
            return bad("classes and dim must be positive");
        }
        if self.drift == DriftKind::Rotate && self.dim < 2 {
            return bad("rotate drift needs dim >= 2");
        }
        if self.segments == 0 {
            return bad("segments must be positive");
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier fraction must lie in [0, 1]");
        }
        if !(self.noise >= 0.0) || !self.displacement.is_finite() || !(self.outlier_scale > 0.0) {
            return bad("noise, displacement and outlier scale must be finite and non-negative");
        }
        Ok(())
    }

    /// Mean of class `class` at stream progress `progress` in `[0, 1)`.
    pub fn class_mean(&self, class: usize, progress: f64) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        // classes sit on the coordinate axes, wrapping with growing radius
        mean[class % self.dim] += self.separation * (1.0 + (class / self.dim) as f64);
        let axis = self.dim - 1;
        match self.drift {
            DriftKind::Shift => mean[axis] += progress * self.displacement,
            DriftKind::Relocate => {
                let segment = ((progress * self.segments as f64).floor() as usize).min(self.segments - 1);
                mean[axis] += segment as f64 * self.displacement;
            }
            DriftKind::Rotate => {
                let (s, c) = (progress * self.displacement).sin_cos();
                let (a, b) = (mean[0], mean[1]);
                mean[0] = c * a - s * b;
                mean[1] = s * a + c * b;
            }
        }
        mean
    }

    /// Segment index of unlabeled record `i` (0-based among unlabeled).
    pub fn segment_of(&self, i: usize) -> usize {
        let progress = i as f64 / self.n_points.max(1) as f64;
        ((progress * self.segments as f64).floor() as usize).min(self.segments - 1)
    }
}

/// Class ids of generated streams are `0..classes`.
pub fn generate_drift_stream<T: Scalar>(spec: &DriftSpec) -> Result<Stream<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut records = Vec::with_capacity(spec.n_points + spec.classes * spec.labeled_per_class);
    let mut frame = 0u64;
    let mut push =
        |features: Vec<f64>, label: Option<ClassId>, supervised: bool, records: &mut Vec<StreamRecord<T>>| {
            let r = StreamRecord::new(frame, FeatureVector::from_f64(&features)?, label, supervised)?;
            records.push(r);
            frame += 1;
            Ok::<(), Error>(())
        };

    for class in 0..spec.classes {
        for _ in 0..spec.labeled_per_class {
            let x: Vec<f64> = spec.class_mean(class, 0.0).iter().map(|m| m + noise.sample(&mut rng)).collect();
            push(x, Some(ClassId(class as i32)), true, &mut records)?;
        }
    }
    for i in 0..spec.n_points {
        let progress = i as f64 / spec.n_points as f64;
        if rng.random::<f64>() < spec.outlier_fraction {
            let x: Vec<f64> =
                (0..spec.dim).map(|_| rng.random_range(-spec.outlier_scale..=spec.outlier_scale)).collect();
            push(x, None, false, &mut records)?;
        } else {
            let class = rng.random_range(0..spec.classes);
            let x: Vec<f64> = spec.class_mean(class, progress).iter().map(|m| m + noise.sample(&mut rng)).collect();
            push(x, Some(ClassId(class as i32)), false, &mut records)?;
        }
    }
    Ok(Stream { dim: spec.dim, num_classes: spec.classes, records })
}
