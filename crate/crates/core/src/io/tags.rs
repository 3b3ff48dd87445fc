//! User-requested header tags.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// A header tag named by DICOM keyword (`StationName`) or by number
/// (`(0008,1010)`, `0008,1010` or `00081010`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TagName {
    Keyword(String),
    Numeric {
        group: u16,
        element: u16,
        text: String,
    },
}

impl TagName {
    /// Parses one entry of a tag list; `None` for malformed names.
    pub fn parse(raw: &str) -> Option<TagName> {
        let s = raw.trim();
        if s.is_empty() {
            return None;
        }
        let hex: String = s
            .trim_start_matches('(')
            .trim_end_matches(')')
            .chars()
            .filter(|c| *c != ',')
            .collect();
        let looks_numeric = s.starts_with('(')
            || s.contains(',')
            || (s.len() == 8 && s.chars().all(|c| c.is_ascii_hexdigit()));
        if looks_numeric {
            if hex.len() == 8 && hex.chars().all(|c| c.is_ascii_hexdigit()) {
                let group = u16::from_str_radix(&hex[..4], 16).ok()?;
                let element = u16::from_str_radix(&hex[4..], 16).ok()?;
                return Some(TagName::Numeric {
                    group,
                    element,
                    text: s.to_string(),
                });
            }
            return None;
        }
        let mut chars = s.chars();
        let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic());
        if first_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Some(TagName::Keyword(s.to_string()))
        } else {
            None
        }
    }

    /// The name as written by the user; used as the output column name.
    pub fn as_str(&self) -> &str {
        match self {
            TagName::Keyword(k) => k,
            TagName::Numeric { text, .. } => text,
        }
    }
}

impl fmt::Display for TagName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses tag-list text: one tag per line, LF or CRLF. Blank lines are
/// ignored; malformed names are skipped with a warning.
pub fn parse_tag_list(text: &str) -> Vec<TagName> {
    let mut out: Vec<TagName> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        match TagName::parse(line) {
            Some(tag) if !out.contains(&tag) => out.push(tag),
            Some(tag) => log::warn!("tag list line {}: duplicate tag {tag}", n + 1),
            None => log::warn!(
                "tag list line {}: malformed tag name {line:?}, skipped",
                n + 1
            ),
        }
    }
    out
}

pub fn read_tag_list(path: &Path) -> Result<Vec<TagName>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_tag_list(&text))
}
