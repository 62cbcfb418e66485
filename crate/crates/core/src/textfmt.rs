//! Line-oriented `key = value` text format shared by the catalog and
//! checkpoint files.
//!
//! ```text
//! <header line>
//! # comment
//! [section]
//! key = value
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug)]
pub(crate) struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
    path: PathBuf,
}

impl Section {
    fn find(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn raw(&self, key: &str) -> Result<&Entry> {
        self.find(key).ok_or_else(|| {
            Error::malformed(
                &self.path,
                self.line,
                format!("section [{}] is missing key `{key}`", self.name),
            )
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let entry = self.raw(key)?;
        entry.value.parse().map_err(|_| {
            Error::malformed(
                &self.path,
                entry.line,
                format!("cannot parse `{key}` value `{}`", entry.value),
            )
        })
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let entry = self.raw(key)?;
        entry
            .value
            .split_whitespace()
            .map(|tok| {
                tok.parse().map_err(|_| {
                    Error::malformed(&self.path, entry.line, format!("cannot parse `{key}` element `{tok}`"))
                })
            })
            .collect()
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        let line = self.find(key).map_or(self.line, |e| e.line);
        Error::malformed(&self.path, line, message)
    }
}

pub(crate) fn parse(path: &Path, text: &str, header: &str) -> Result<Vec<Section>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let first = lines.by_ref().find(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let Some((line_no, first)) = first else {
        return Err(Error::malformed(
            path,
            1,
            format!("empty file, expected header `{header}`"),
        ));
    };
    if first != header {
        let family = header.split_whitespace().next().unwrap_or_default();
        if first.split_whitespace().next() == Some(family) {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                expected: header.to_string(),
                found: first.to_string(),
            });
        }
        return Err(Error::malformed(
            path,
            line_no,
            format!("expected header `{header}`, found `{first}`"),
        ));
    }

    let mut sections: Vec<Section> = Vec::new();
    for (line_no, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push(Section {
                name: name.trim().to_string(),
                line: line_no,
                entries: Vec::new(),
                path: path.to_path_buf(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::malformed(
                path,
                line_no,
                format!("expected `key = value`, found `{line}`"),
            ));
        };
        let Some(section) = sections.last_mut() else {
            return Err(Error::malformed(path, line_no, "key outside of any section"));
        };
        let key = key.trim().to_string();
        if section.find(&key).is_some() {
            return Err(Error::malformed(path, line_no, format!("duplicate key `{key}`")));
        }
        section.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(sections)
}

/// Rejects keys a section is not expected to carry.
pub(crate) fn check_keys(section: &Section, allowed: &[&str]) -> Result<()> {
    let allowed: HashSet<&str> = allowed.iter().copied().collect();
    for entry in &section.entries {
        if !allowed.contains(entry.key.as_str()) {
            return Err(section.error(&entry.key, format!("unknown key `{}`", entry.key)));
        }
    }
    Ok(())
}

#[derive(Debug, Default)]
pub(crate) struct Writer {
    out: String,
}

impl Writer {
    pub fn new(header: &str) -> Self {
        Writer {
            out: format!("{header}\n"),
        }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.out, "# {text}");
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.out, "\n[{name}]");
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key} = {value}");
    }

    /// Floats use Rust's shortest round-trip formatting, so parsing gives
    /// back the identical bits.
    pub fn floats(&mut self, key: &str, values: &[f64]) {
        let _ = write!(self.out, "{key} =");
        for v in values {
            let _ = write!(self.out, " {v:?}");
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}
