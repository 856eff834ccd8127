//! JSON-lines import for transitions produced elsewhere.

use std::io::BufRead;
use std::path::Path;

use ilq_core::envs::{DatasetMeta, TransitionDataset};
use serde::Deserialize;

use crate::error::{IoError, Result};

#[derive(Deserialize)]
#[serde(untagged)]
enum Flag {
    Bool(bool),
    Int(u8),
}

#[derive(Deserialize)]
struct Row {
    observation: Vec<f64>,
    action: Vec<f64>,
    reward: f64,
    next_observation: Vec<f64>,
    terminal: Flag,
}

/// Parses one transition per non-blank line. Dimensions come from the first
/// row; every later row must agree. An empty input yields an empty dataset
/// with both dimensions zero, which [`require_dims`] rejects.
pub fn parse_jsonl(reader: impl BufRead) -> Result<TransitionDataset> {
    let meta = DatasetMeta { env_tag: String::new(), source_tag: "jsonl".into(), seed: 0 };
    let mut data: Option<TransitionDataset> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| IoError::Jsonl { line: line_no, message };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let terminal = match row.terminal {
            Flag::Bool(b) => b,
            Flag::Int(0) => false,
            Flag::Int(1) => true,
            Flag::Int(v) => return Err(err(format!("terminal must be 0 or 1, found {v}"))),
        };
        let d = data.get_or_insert_with(|| {
            TransitionDataset::empty(row.observation.len(), row.action.len(), meta.clone())
        });
        for (what, expected, found) in [
            ("observation", d.obs_dim(), row.observation.len()),
            ("action", d.act_dim(), row.action.len()),
            ("next_observation", d.obs_dim(), row.next_observation.len()),
        ] {
            if expected != found {
                return Err(err(format!("{what} has {found} entries, expected {expected}")));
            }
        }
        let values = row.observation.iter().chain(&row.action).chain(&row.next_observation);
        if !row.reward.is_finite() || values.clone().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        d.push(&row.observation, &row.action, row.reward, &row.next_observation, terminal);
    }
    Ok(data.unwrap_or_else(|| TransitionDataset::empty(0, 0, meta)))
}

pub fn import_jsonl(path: impl AsRef<Path>) -> Result<TransitionDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    parse_jsonl(std::io::BufReader::new(file))
}

/// Fails on datasets whose dimensions were never established.
pub fn require_dims(data: &TransitionDataset) -> Result<()> {
    if data.obs_dim() == 0 || data.act_dim() == 0 {
        Err(IoError::UndefinedDims)
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW: &str = r#"{"observation":[0.1,0.2],"action":[0.5],"reward":-1,"next_observation":[0.2,0.3],"terminal":false}"#;

    #[test]
    fn consistent_rows_load() {
        let text = format!("{ROW}\n{}\n", ROW.replace("false", "1"));
        let d = parse_jsonl(text.as_bytes()).unwrap();
        assert_eq!((d.len(), d.obs_dim(), d.act_dim()), (2, 2, 1));
        assert_eq!(d.terminals(), &[false, true]);
        require_dims(&d).unwrap();
    }

    #[test]
    fn wrong_dims_cite_the_line() {
        let bad = ROW.replace(r#""action":[0.5]"#, r#""action":[0.5,0.1]"#);
        let text = format!("{ROW}\n{ROW}\n{bad}\n");
        match parse_jsonl(text.as_bytes()) {
            Err(IoError::Jsonl { line: 3, message }) => assert!(message.contains("action")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_json_cites_the_line() {
        let text = format!("{ROW}\n{{not json\n");
        assert!(matches!(parse_jsonl(text.as_bytes()), Err(IoError::Jsonl { line: 2, .. })));
    }

    #[test]
    fn empty_input_has_undefined_dims() {
        let d = parse_jsonl("".as_bytes()).unwrap();
        assert!(d.is_empty());
        assert!(matches!(require_dims(&d), Err(IoError::UndefinedDims)));
    }
}
