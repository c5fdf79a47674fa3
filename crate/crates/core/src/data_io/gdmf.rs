//! `GDMF` binary feature files.
//!
//! Layout (little-endian): magic `GDMF`, `u32` version, `u32` dimension,
//! `u64` record count, then per record five `u32` fields (session,
//! sequence, frame, instance, category) followed by `dim` `f32` features.

use super::{FrameRecord, SequenceDataset};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::Result;

pub const GDMF_MAGIC: &[u8; 4] = b"GDMF";
pub const GDMF_VERSION: u32 = 1;
pub const GDMF_HEADER_SIZE: usize = 20;
pub const GDMF_RECORD_HEADER_SIZE: usize = 20;

/// Encodes a dataset. Features are narrowed to `f32`.
pub fn encode_gdmf(dataset: &SequenceDataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(GDMF_MAGIC);
    w.u32(GDMF_VERSION);
    w.u32(dataset.dim() as u32);
    w.u64(dataset.frames.len() as u64);
    for f in &dataset.frames {
        w.u32(f.session);
        w.u32(f.sequence);
        w.u32(f.frame);
        w.u32(f.instance);
        w.u32(f.category);
        for &v in &f.features {
            w.f32(v as f32);
        }
    }
    w.into_inner()
}

pub fn decode_gdmf(bytes: &[u8]) -> Result<SequenceDataset> {
    let mut r = ByteReader::new("feature file", bytes);
    r.magic(GDMF_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != GDMF_VERSION {
        return Err(r.error_at(at, format!("unsupported version {version}")));
    }
    let at = r.offset();
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(r.error_at(at, "feature dimension must be positive"));
    }
    let count = r.u64("record count")?;
    let record_size = GDMF_RECORD_HEADER_SIZE + 4 * dim;
    let mut frames = Vec::with_capacity((r.remaining() / record_size).min(count as usize));
    for i in 0..count {
        if r.remaining() < record_size {
            return Err(r.error(format!(
                "truncated: record {i} of {count} needs {record_size} bytes, {} left",
                r.remaining()
            )));
        }
        let session = r.u32("session")?;
        let sequence = r.u32("sequence")?;
        let frame = r.u32("frame")?;
        let instance = r.u32("instance")?;
        let category = r.u32("category")?;
        let features = (0..dim)
            .map(|_| r.f32("feature").map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        frames.push(FrameRecord {
            session,
            sequence,
            frame,
            instance,
            category,
            features,
        });
    }
    r.finish()?;
    SequenceDataset::validated(dim, frames).map_err(|e| {
        let offset = (GDMF_HEADER_SIZE + e.index * record_size) as u64;
        r.error_at(offset, format!("record {}: {}", e.index, e.message))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::GdmError;

    fn dataset(dim: usize, n: u32) -> SequenceDataset {
        let frames = (0..n)
            .map(|i| FrameRecord {
                session: 2,
                sequence: 5,
                frame: i,
                instance: 3,
                category: 1,
                features: (0..dim).map(|k| (k as f64) * 0.25 - i as f64).collect(),
            })
            .collect();
        SequenceDataset::new(dim, frames).unwrap()
    }

    #[test]
    fn file_size_matches_layout() {
        let bytes = encode_gdmf(&dataset(256, 3));
        assert_eq!(bytes.len(), 3152);
        assert_eq!(&bytes[..4], b"GDMF");
    }

    #[test]
    fn round_trip() {
        let ds = dataset(7, 4);
        let back = decode_gdmf(&encode_gdmf(&ds)).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.sequences(), ds.sequences());
    }

    #[test]
    fn bad_magic_at_offset_zero() {
        let mut bytes = encode_gdmf(&dataset(2, 1));
        bytes[0] = b'X';
        match decode_gdmf(&bytes).unwrap_err() {
            GdmError::Format { offset, .. } => assert_eq!(offset, 0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = encode_gdmf(&dataset(2, 1));
        bytes[4] = 9;
        let e = decode_gdmf(&bytes).unwrap_err();
        assert!(e.to_string().contains("version 9"), "{e}");
    }

    #[test]
    fn truncation_names_record() {
        let bytes = encode_gdmf(&dataset(4, 3));
        let cut = &bytes[..bytes.len() - 5];
        let e = decode_gdmf(cut).unwrap_err();
        assert!(e.to_string().contains("record 2 of 3"), "{e}");
    }

    #[test]
    fn validation_error_carries_record_offset() {
        let mut bytes = encode_gdmf(&dataset(2, 3));
        // frame index of record 1 -> 7
        let rec = GDMF_HEADER_SIZE + (GDMF_RECORD_HEADER_SIZE + 8);
        bytes[rec + 8..rec + 12].copy_from_slice(&7u32.to_le_bytes());
        match decode_gdmf(&bytes).unwrap_err() {
            GdmError::Format {
                offset, message, ..
            } => {
                assert_eq!(offset, rec as u64);
                assert!(message.contains("record 1"), "{message}");
            }
            e => panic!("{e}"),
        }
    }
}
