use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DatagenError, LabeledExample};

/// One JSON record per line, newline-terminated.
pub fn to_jsonl(examples: &[LabeledExample]) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(e).expect("examples serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(src: &str) -> Result<Vec<LabeledExample>, DatagenError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: LabeledExample = serde_json::from_str(line).map_err(|e| DatagenError::Record {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if e.rewrite.is_empty() {
            return Err(DatagenError::Record {
                line: i + 1,
                msg: "empty rewrite".into(),
            });
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_dataset(examples: &[LabeledExample], path: &Path) -> Result<(), DatagenError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in examples {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledExample>, DatagenError> {
    parse_jsonl(&fs::read_to_string(path)?)
}
