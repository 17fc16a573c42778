use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A labelled pair of texts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RelationRecord {
    pub label: u32,
    pub left: String,
    pub right: String,
}

impl RelationRecord {
    pub fn new(label: u32, left: impl Into<String>, right: impl Into<String>) -> Self {
        RelationRecord {
            label,
            left: left.into(),
            right: right.into(),
        }
    }
}

fn parse_label(field: &str, line: usize) -> Result<u32> {
    match field.parse::<i64>() {
        Ok(v) if v < 0 => Err(Error::parse(line, format!("negative label {v}"))),
        Ok(v) => u32::try_from(v).map_err(|_| Error::parse(line, format!("label {v} too large"))),
        Err(_) => Err(Error::parse(line, format!("invalid label `{field}`"))),
    }
}

pub(crate) fn parse_tid(field: &str, line: usize) -> Result<String> {
    if field.is_empty() || field.chars().any(char::is_whitespace) {
        Err(Error::parse(line, format!("invalid tid `{field}`")))
    } else {
        Ok(field.to_string())
    }
}

/// Parses `label<TAB>tid_left<TAB>tid_right` lines.
pub fn parse_relations(text: &str) -> Result<Vec<RelationRecord>> {
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            let line_no = n + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            let [label, left, right] = fields[..] else {
                return Err(Error::parse(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            Ok(RelationRecord {
                label: parse_label(label, line_no)?,
                left: parse_tid(left, line_no)?,
                right: parse_tid(right, line_no)?,
            })
        })
        .collect()
}

pub fn write_relations(relations: &[RelationRecord]) -> String {
    let mut out = String::new();
    for r in relations {
        let _ = writeln!(out, "{}\t{}\t{}", r.label, r.left, r.right);
    }
    out
}
