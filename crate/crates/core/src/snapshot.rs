//! Versioned little-endian binary snapshots of a learner.
//!
//! Layout: magic `OHFS`, format version (u32), dimensionality (u64),
//! params (sigma, epsilon, gamma_g as f64, budget as u64, metric tag u8 and
//! optional length-prefixed weights), labeled store (count, then class i32
//! and `d` f64 per entry), declared classes (count, then i32 each), centers
//! (count, then `d` f64 each), multiplicities (count, then u64 each), radius (f64), step counter (u64).
//! Reals are always written as f64.

use crate::error::{Error, Result};
use crate::harmonic::{ClassId, LabelEncoding};
use crate::learner::{LearnerConfig, OnlineLearner};
use crate::metric::{CenterWeights, FeatureVector, KernelParams, Metric};
use crate::quantizer::RepresentativeSet;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"OHFS";
pub const FORMAT_VERSION: u32 = 1;

const TAG_EUCLIDEAN: u8 = 0;
const TAG_WEIGHTED: u8 = 1;
const TAG_FACE: u8 = 2;

fn corrupt(e: Error) -> Error {
    Error::CorruptSnapshot(e.to_string())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn real<T: Scalar>(&mut self, v: T) {
        self.0.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fn reals<T: Scalar>(&mut self, vs: &[T]) {
        for &v in vs {
            self.real(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::CorruptSnapshot(format!("truncated payload: need {n} bytes at offset {}", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn real<T: Scalar>(&mut self) -> Result<T> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        T::from_f64(v).ok_or_else(|| Error::CorruptSnapshot("unrepresentable real".into()))
    }
    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        // bound the allocation by what the buffer can actually hold
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::CorruptSnapshot(format!("truncated payload: {n} reals at offset {}", self.pos)));
        }
        (0..n).map(|_| self.real()).collect()
    }
    fn count(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CorruptSnapshot("count overflows usize".into()))
    }
}

impl<T: Scalar> OnlineLearner<T> {
    pub fn snapshot(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        let cfg = &self.config;
        w.u64(cfg.dim as u64);
        w.real(cfg.kernel.sigma);
        w.real(cfg.kernel.epsilon);
        w.real(cfg.gamma_g);
        w.u64(cfg.budget as u64);
        match &cfg.metric {
            Metric::Euclidean => w.u8(TAG_EUCLIDEAN),
            Metric::WeightedL2(psi) | Metric::Face(psi) => {
                w.u8(if matches!(cfg.metric, Metric::Face(_)) { TAG_FACE } else { TAG_WEIGHTED });
                w.u64(psi.dim() as u64);
                w.reals(psi.as_slice());
            }
        }
        w.u64(self.labeled.len() as u64);
        for (x, c) in &self.labeled {
            w.i32(c.0);
            w.reals(x.as_slice());
        }
        w.u64(self.encoding.classes().len() as u64);
        for c in self.encoding.classes() {
            w.i32(c.0);
        }
        let q = &self.quantizer;
        w.u64(q.len() as u64);
        for c in q.centers() {
            w.reals(c);
        }
        w.u64(q.multiplicities().len() as u64);
        for &m in q.multiplicities() {
            w.u64(m);
        }
        w.real(q.radius());
        w.u64(self.step);
        w.0
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptSnapshot("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::SnapshotVersion { found: version, expected: FORMAT_VERSION });
        }
        let dim = r.count()?;
        let sigma = r.real()?;
        let epsilon = r.real()?;
        let gamma_g = r.real()?;
        let budget = r.count()?;
        let metric = match r.u8()? {
            TAG_EUCLIDEAN => Metric::Euclidean,
            tag @ (TAG_WEIGHTED | TAG_FACE) => {
                let n = r.count()?;
                let psi = CenterWeights::new(r.reals(n)?).map_err(corrupt)?;
                if tag == TAG_FACE {
                    Metric::Face(psi)
                } else {
                    Metric::WeightedL2(psi)
                }
            }
            other => return Err(Error::CorruptSnapshot(format!("unknown metric tag {other}"))),
        };
        let config = KernelParams::new(sigma, epsilon)
            .and_then(|k| LearnerConfig::new(dim, metric, k, budget))
            .and_then(|c| c.with_gamma(gamma_g))
            .map_err(corrupt)?;

        let n_labeled = r.count()?;
        let mut labeled = Vec::new();
        for _ in 0..n_labeled {
            let class = ClassId(r.i32()?);
            labeled.push((FeatureVector::new(r.reals(dim)?).map_err(corrupt)?, class));
        }
        let n_classes = r.count()?;
        if n_classes > bytes.len() {
            return Err(Error::CorruptSnapshot("class count exceeds payload".into()));
        }
        let classes = (0..n_classes).map(|_| r.i32().map(ClassId)).collect::<Result<Vec<_>>>()?;
        let n_centers = r.count()?;
        let mut centers = Vec::new();
        for _ in 0..n_centers {
            centers.push(r.reals(dim)?);
        }
        let n_mult = r.count()?;
        if n_mult != n_centers || n_mult > bytes.len() {
            return Err(Error::CorruptSnapshot("multiplicity count differs from center count".into()));
        }
        let multiplicities = (0..n_mult).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let radius = r.real()?;
        let step = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::CorruptSnapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let quantizer = RepresentativeSet::from_parts(centers, multiplicities, radius, budget).map_err(corrupt)?;
        let encoding = LabelEncoding::new(classes.into_iter().chain(labeled.iter().map(|(_, c)| *c)));
        Ok(Self { config, quantizer, labeled, encoding, step })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn learner() -> OnlineLearner<f64> {
        let cfg = LearnerConfig::new(2, Metric::Euclidean, KernelParams::new(0.5, 1e-4).unwrap(), 4).unwrap();
        OnlineLearner::new(cfg).unwrap()
    }

    #[test]
    fn empty_round_trip() {
        let l = learner();
        let back = OnlineLearner::<f64>::restore(&l.snapshot()).unwrap();
        assert_eq!(back.snapshot(), l.snapshot());
        assert_eq!(back.config(), l.config());
        assert_eq!(back.quantizer(), l.quantizer());
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let bytes = learner().snapshot();
        for cut in [0, 3, 8, bytes.len() - 1] {
            let err = OnlineLearner::<f64>::restore(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::CorruptSnapshot(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = learner().snapshot();
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(OnlineLearner::<f64>::restore(&bytes), Err(Error::SnapshotVersion { found: 7, expected: 1 })));
    }

    #[test]
    fn header_layout() {
        let bytes = learner().snapshot();
        assert_eq!(&bytes[..4], b"OHFS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0.5);
    }

    #[test]
    fn face_metric_survives() {
        let psi = CenterWeights::new(vec![1.0, 0.5]).unwrap();
        let cfg = LearnerConfig::new(2, Metric::Face(psi), KernelParams::new(0.5, 1e-4).unwrap(), 4).unwrap();
        let l = OnlineLearner::new(cfg).unwrap();
        let back = OnlineLearner::<f64>::restore(&l.snapshot()).unwrap();
        assert_eq!(back.config(), l.config());
    }
}
