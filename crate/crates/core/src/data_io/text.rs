//! Comma-separated feature files.
//!
//! One frame per line: `session,sequence,frame,instance,category,f_1,...,f_D`.
//! Blank lines and lines starting with `#` are ignored. No header row.

use super::{FrameRecord, SequenceDataset};
use crate::error::{GdmError, Result};

const LABEL_COLUMNS: usize = 5;

pub fn decode_text(bytes: &[u8]) -> Result<SequenceDataset> {
    // Comment and blank lines are dropped up front so rows map back to
    // their original line numbers.
    let mut kept = Vec::with_capacity(bytes.len());
    let mut line_of = Vec::new();
    for (n, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let trimmed = line.trim_ascii();
        if trimmed.is_empty() || trimmed.starts_with(b"#") {
            continue;
        }
        kept.extend_from_slice(line);
        kept.push(b'\n');
        line_of.push(n + 1);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(kept.as_slice());
    let mut frames = Vec::new();
    let mut lines = Vec::new();
    let mut dim = None;
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| GdmError::Dataset(format!("text feature file: {e}")))?;
        let line = line_of.get(i).copied().unwrap_or(0);
        let bad = |msg: String| GdmError::Dataset(format!("text feature file line {line}: {msg}"));
        if row.len() <= LABEL_COLUMNS {
            return Err(bad(format!(
                "expected at least {} columns, found {}",
                LABEL_COLUMNS + 1,
                row.len()
            )));
        }
        let d = row.len() - LABEL_COLUMNS;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(bad(format!("{d} features, earlier lines have {expected}")))
            }
            _ => {}
        }
        let field = |i: usize, name: &str| -> Result<u32> {
            row[i]
                .parse()
                .map_err(|_| bad(format!("{name} {:?} is not an unsigned integer", &row[i])))
        };
        let features = row
            .iter()
            .skip(LABEL_COLUMNS)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("feature {s:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(FrameRecord {
            session: field(0, "session")?,
            sequence: field(1, "sequence")?,
            frame: field(2, "frame")?,
            instance: field(3, "instance")?,
            category: field(4, "category")?,
            features,
        });
        lines.push(line);
    }
    SequenceDataset::validated(dim.unwrap_or(0), frames).map_err(|e| {
        GdmError::Dataset(format!(
            "text feature file line {}: record {}: {}",
            lines[e.index], e.index, e.message
        ))
    })
}

/// Writes features with shortest round-trip formatting.
pub fn encode_text(dataset: &SequenceDataset) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for f in &dataset.frames {
        let mut row = vec![
            f.session.to_string(),
            f.sequence.to_string(),
            f.frame.to_string(),
            f.instance.to_string(),
            f.category.to_string(),
        ];
        row.extend(f.features.iter().map(|v| v.to_string()));
        w.write_record(&row)
            .map_err(|e| GdmError::Dataset(format!("text feature file: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| GdmError::Dataset(format!("text feature file: {e}")))
}
