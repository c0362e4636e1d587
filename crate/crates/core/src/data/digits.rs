use std::path::Path;

use super::{Dataset, Split, NUM_CLASSES};
use crate::error::{Error, Result};

const SIDE: usize = 8;
const MAX_PIXEL: u32 = 16;

/// Reads an optdigits-style CSV: 64 integer pixels in `[0, 16]` followed by
/// the label, one sample per line.
pub fn load_digits(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != SIDE * SIDE + 1 {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields, found {}",
                    SIDE * SIDE + 1,
                    fields.len()
                ),
            ));
        }
        for (col, f) in fields[..SIDE * SIDE].iter().enumerate() {
            let v: u32 = f
                .parse()
                .map_err(|_| parse_err(line, format!("feature {col}: `{f}` is not an integer")))?;
            if v > MAX_PIXEL {
                return Err(parse_err(
                    line,
                    format!("feature {col}: {v} outside [0, 16]"),
                ));
            }
            pixels.push(f64::from(v));
        }
        let f = fields[SIDE * SIDE];
        let label: usize = f
            .parse()
            .ok()
            .filter(|&l| l < NUM_CLASSES)
            .ok_or_else(|| parse_err(line, format!("bad label `{f}`")))?;
        labels.push(label);
    }
    Dataset::new("digits", Split::Train, (SIDE, SIDE), pixels, labels)
}
