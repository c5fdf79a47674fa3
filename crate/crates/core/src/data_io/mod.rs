//! Feature-sequence datasets, their file formats, and a synthetic generator.

mod gdmf;
mod metrics;
mod synthetic;
mod text;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

pub use gdmf::{
    decode_gdmf, encode_gdmf, GDMF_HEADER_SIZE, GDMF_MAGIC, GDMF_RECORD_HEADER_SIZE, GDMF_VERSION,
};
pub use metrics::{
    export_metrics, parse_metrics_table, parse_summary, render_metrics, MetricsFormat,
    METRICS_FORMAT_VERSION,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use text::{decode_text, encode_text};

use crate::error::{GdmError, Result};
use crate::gamma_gwr::Label;

pub type SessionId = u32;
pub type SequenceId = u32;

/// One feature frame with its labels and position.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub session: SessionId,
    pub sequence: SequenceId,
    pub frame: u32,
    pub instance: Label,
    pub category: Label,
    pub features: Vec<f64>,
}

/// A contiguous run of frames sharing a sequence id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInfo {
    pub sequence: SequenceId,
    pub session: SessionId,
    pub instance: Label,
    pub category: Label,
    pub start: usize,
    pub len: usize,
}

/// Validated, ordered frames grouped into sequences.
///
/// Feature reads go through [`SequenceDataset::frame`] and friends, which
/// count every frame handed out.
#[derive(Debug)]
pub struct SequenceDataset {
    dim: usize,
    frames: Vec<FrameRecord>,
    sequences: Vec<SequenceInfo>,
    reads: AtomicU64,
}

impl Clone for SequenceDataset {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            frames: self.frames.clone(),
            sequences: self.sequences.clone(),
            reads: AtomicU64::new(0),
        }
    }
}

impl PartialEq for SequenceDataset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.frames == other.frames
    }
}

/// Validation failure pointing at a record.
#[derive(Debug)]
pub(crate) struct RecordError {
    pub index: usize,
    pub message: String,
}

impl SequenceDataset {
    pub fn new(dim: usize, frames: Vec<FrameRecord>) -> Result<Self> {
        Self::validated(dim, frames)
            .map_err(|e| GdmError::Dataset(format!("record {}: {}", e.index, e.message)))
    }

    pub(crate) fn validated(
        dim: usize,
        frames: Vec<FrameRecord>,
    ) -> std::result::Result<Self, RecordError> {
        let fail = |index: usize, message: String| RecordError { index, message };
        if dim == 0 && !frames.is_empty() {
            return Err(fail(0, "feature dimension must be positive".into()));
        }
        let mut sequences: Vec<SequenceInfo> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut category_of = std::collections::BTreeMap::new();
        for (i, f) in frames.iter().enumerate() {
            if f.features.len() != dim {
                return Err(fail(
                    i,
                    format!(
                        "has {} features, dataset dimension is {dim}",
                        f.features.len()
                    ),
                ));
            }
            if f.features.iter().any(|v| !v.is_finite()) {
                return Err(fail(i, "contains a non-finite feature".into()));
            }
            match category_of.insert(f.instance, f.category) {
                Some(c) if c != f.category => {
                    return Err(fail(
                        i,
                        format!(
                            "instance {} appears under categories {c} and {}",
                            f.instance, f.category
                        ),
                    ))
                }
                _ => {}
            }
            match sequences.last_mut() {
                Some(s) if s.sequence == f.sequence => {
                    let expected = frames[i - 1].frame.checked_add(1);
                    if expected != Some(f.frame) {
                        return Err(fail(
                            i,
                            format!(
                                "frame index {} in sequence {} does not follow {}",
                                f.frame,
                                f.sequence,
                                frames[i - 1].frame
                            ),
                        ));
                    }
                    if (s.session, s.instance, s.category) != (f.session, f.instance, f.category) {
                        return Err(fail(
                            i,
                            format!("labels or session change inside sequence {}", f.sequence),
                        ));
                    }
                    s.len += 1;
                }
                _ => {
                    if !seen.insert(f.sequence) {
                        return Err(fail(
                            i,
                            format!("sequence {} is not contiguous", f.sequence),
                        ));
                    }
                    sequences.push(SequenceInfo {
                        sequence: f.sequence,
                        session: f.session,
                        instance: f.instance,
                        category: f.category,
                        start: i,
                        len: 1,
                    });
                }
            }
        }
        Ok(Self {
            dim,
            frames,
            sequences,
            reads: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sequences(&self) -> &[SequenceInfo] {
        &self.sequences
    }

    /// Record `index`; counts as one frame read.
    pub fn frame(&self, index: usize) -> &FrameRecord {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.frames[index]
    }

    /// Frames of sequence `seq` in order; each yielded frame counts as a read.
    pub fn sequence_frames(&self, seq: usize) -> impl Iterator<Item = &FrameRecord> + '_ {
        let s = &self.sequences[seq];
        self.frames[s.start..s.start + s.len].iter().inspect(|_| {
            self.reads.fetch_add(1, Ordering::Relaxed);
        })
    }

    /// Every record; counts as reading all of them.
    pub fn records(&self) -> &[FrameRecord] {
        self.reads
            .fetch_add(self.frames.len() as u64, Ordering::Relaxed);
        &self.frames
    }

    /// Frames handed out so far.
    pub fn frame_reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// A view with its own read counter; reads also count here.
    pub fn reader(&self) -> FrameReader<'_> {
        FrameReader {
            dataset: self,
            reads: AtomicU64::new(0),
        }
    }

    pub fn into_records(self) -> Vec<FrameRecord> {
        self.frames
    }

    pub fn categories(&self) -> Vec<Label> {
        let mut c: Vec<Label> = self.sequences.iter().map(|s| s.category).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn sessions(&self) -> Vec<SessionId> {
        let mut s: Vec<SessionId> = self.sequences.iter().map(|s| s.session).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Counted access to one dataset, private to a single consumer.
#[derive(Debug)]
pub struct FrameReader<'a> {
    dataset: &'a SequenceDataset,
    reads: AtomicU64,
}

impl<'a> FrameReader<'a> {
    pub fn dataset(&self) -> &'a SequenceDataset {
        self.dataset
    }

    pub fn sequence_frames(&self, seq: usize) -> impl Iterator<Item = &'a FrameRecord> + '_ {
        self.dataset.sequence_frames(seq).inspect(|_| {
            self.reads.fetch_add(1, Ordering::Relaxed);
        })
    }

    /// Frames read through this view.
    pub fn frame_reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }
}

/// Train/test partition of a dataset's sequences, by session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    /// Sessions listed in `test_sessions` go to the test side.
    pub fn by_sessions(dataset: &SequenceDataset, test_sessions: &[SessionId]) -> Result<Self> {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..dataset.sequences().len())
            .partition(|&i| test_sessions.contains(&dataset.sequences()[i].session));
        if train.is_empty() {
            return Err(GdmError::Empty("training split"));
        }
        if test.is_empty() {
            return Err(GdmError::Empty("test split"));
        }
        Ok(Self { train, test })
    }
}

/// Loads a `GDMF` binary file, or a comma-separated text file (`.csv`/`.txt`).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<SequenceDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let is_text = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("csv") | Some("txt")
    );
    if is_text && !bytes.starts_with(GDMF_MAGIC) {
        decode_text(&bytes)
    } else {
        decode_gdmf(&bytes)
    }
}

/// Writes `GDMF` unless the path ends in `.csv`/`.txt`.
pub fn write_dataset(dataset: &SequenceDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("txt") => encode_text(dataset)?,
        _ => encode_gdmf(dataset),
    };
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seq: u32, frame: u32, instance: Label, category: Label) -> FrameRecord {
        FrameRecord {
            session: 1,
            sequence: seq,
            frame,
            instance,
            category,
            features: vec![frame as f64, 0.5],
        }
    }

    #[test]
    fn groups_sequences() {
        let ds = SequenceDataset::new(
            2,
            vec![
                rec(4, 0, 1, 0),
                rec(4, 1, 1, 0),
                rec(9, 3, 2, 0),
                rec(9, 4, 2, 0),
            ],
        )
        .unwrap();
        assert_eq!(ds.sequences().len(), 2);
        assert_eq!(ds.sequences()[1].start, 2);
        assert_eq!(ds.sequences()[1].len, 2);
        assert_eq!(ds.frame_reads(), 0);
        assert_eq!(ds.sequence_frames(1).count(), 2);
        assert_eq!(ds.frame_reads(), 2);
        let r = ds.reader();
        assert_eq!(r.sequence_frames(0).count(), 2);
        assert_eq!((r.frame_reads(), ds.frame_reads()), (2, 4));
    }

    #[test]
    fn rejects_inconsistent_instance_category() {
        let err = SequenceDataset::new(2, vec![rec(1, 0, 7, 0), rec(2, 0, 7, 3)]).unwrap_err();
        assert!(err.to_string().contains("instance 7"), "{err}");
    }

    #[test]
    fn rejects_gaps_and_split_sequences() {
        assert!(SequenceDataset::new(2, vec![rec(1, 0, 1, 0), rec(1, 2, 1, 0)]).is_err());
        assert!(
            SequenceDataset::new(2, vec![rec(1, 0, 1, 0), rec(2, 0, 1, 0), rec(1, 1, 1, 0)])
                .is_err()
        );
        let mut r = rec(1, 1, 1, 0);
        r.features.push(1.0);
        assert!(SequenceDataset::new(2, vec![rec(1, 0, 1, 0), r]).is_err());
    }

    #[test]
    fn session_split() {
        let mut frames = Vec::new();
        for s in 1..=4u32 {
            let mut r = rec(s, 0, 1, 0);
            r.session = s;
            frames.push(r);
        }
        let ds = SequenceDataset::new(2, frames).unwrap();
        let split = DatasetSplit::by_sessions(&ds, &[3]).unwrap();
        assert_eq!(split.test, vec![2]);
        assert_eq!(split.train, vec![0, 1, 3]);
        assert!(DatasetSplit::by_sessions(&ds, &[8]).is_err());
        assert!(DatasetSplit::by_sessions(&ds, &[1, 2, 3, 4]).is_err());
    }
}
