//! Parsing of pip-style requirement files into sets of canonical package names.
//!
//! Only package identity survives parsing: version pins, extras, environment
//! markers and hash options are dropped. Option lines (`-r`, `-c`,
//! `--index-url`, ...) are skipped and counted. Editable or URL requirements
//! are kept only when they name their package through an `#egg=` fragment.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("package name is empty")]
    EmptyName,
    #[error("invalid package name {raw:?}: {reason}")]
    InvalidName { raw: String, reason: &'static str },
}

/// A canonical package name: lowercase ASCII letters and digits separated by
/// single hyphens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LibraryName(String);

impl LibraryName {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LibraryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for LibraryName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for LibraryName {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl FromStr for LibraryName {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_name(s)
    }
}

/// Deserialization is strict: the stored text must already be canonical.
impl TryFrom<String> for LibraryName {
    type Error = NameError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let name = normalize_name(&value)?;
        if name.0 != value {
            return Err(NameError::InvalidName {
                raw: value,
                reason: "not in canonical form",
            });
        }
        Ok(name)
    }
}

impl From<LibraryName> for String {
    fn from(name: LibraryName) -> Self {
        name.0
    }
}

/// Canonicalizes a raw package name.
///
/// The name is lowercased and every run of `-`, `_` and `.` collapses to a
/// single hyphen, so `Zope.Interface`, `zope_interface` and `zope--interface`
/// all become `zope-interface`.
pub fn normalize_name(raw: &str) -> Result<LibraryName, NameError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(NameError::EmptyName);
    }
    let mut out = String::with_capacity(trimmed.len());
    let mut in_separator = false;
    for ch in trimmed.chars() {
        if matches!(ch, '-' | '_' | '.') {
            in_separator = true;
            continue;
        }
        if in_separator {
            out.push('-');
            in_separator = false;
        }
        if !ch.is_ascii_alphanumeric() {
            return Err(NameError::InvalidName {
                raw: raw.to_string(),
                reason: "only ASCII letters, digits and separators are allowed",
            });
        }
        out.push(ch.to_ascii_lowercase());
    }
    if in_separator {
        out.push('-');
    }
    if out.starts_with('-') || out.ends_with('-') {
        return Err(NameError::InvalidName {
            raw: raw.to_string(),
            reason: "name may not start or end with a separator",
        });
    }
    Ok(LibraryName(out))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    /// 1-based physical line where the logical line starts.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub names: BTreeSet<LibraryName>,
    /// Logical lines that produced a name.
    pub dependency_lines: usize,
    /// Comment-only, option and unparseable lines.
    pub skipped_lines: usize,
    pub blank_lines: usize,
    pub warnings: Vec<ParseWarning>,
}

impl ParseReport {
    /// A file without a single dependency is not a usable snapshot.
    pub fn is_skippable(&self) -> bool {
        self.names.is_empty()
    }

    /// Number of logical lines (after joining continuations).
    pub fn logical_lines(&self) -> usize {
        self.dependency_lines + self.skipped_lines + self.blank_lines
    }

    fn skip(&mut self, line: usize, reason: impl Into<String>) {
        self.skipped_lines += 1;
        self.warnings.push(ParseWarning {
            line,
            reason: reason.into(),
        });
    }
}

enum LineOutcome {
    Name(LibraryName),
    Egg(LibraryName),
    Blank,
    Comment,
    Skip(String),
}

/// Joins backslash continuations. Returns `(first physical line number, text)`.
fn logical_lines(content: &str) -> Vec<(usize, String)> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (idx, line) in content.lines().enumerate() {
        let (start, mut buf) = pending.take().unwrap_or((idx + 1, String::new()));
        match line.strip_suffix('\\') {
            Some(head) => {
                buf.push_str(head);
                pending = Some((start, buf));
            }
            None => {
                buf.push_str(line);
                out.push((start, buf));
            }
        }
    }
    if let Some(rest) = pending {
        out.push(rest);
    }
    out
}

/// Strips a `#` comment that starts the line or follows whitespace. URL
/// fragments such as `#egg=` are left alone.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn egg_name(text: &str) -> Option<&str> {
    let (_, fragment) = text.split_once('#')?;
    fragment.split('&').find_map(|part| {
        let value = part.strip_prefix("egg=")?;
        let end = value
            .find(|c: char| c == '[' || c.is_whitespace())
            .unwrap_or(value.len());
        Some(&value[..end]).filter(|v| !v.is_empty())
    })
}

fn looks_like_url_or_path(text: &str) -> bool {
    text.contains("://")
        || text.starts_with("git+")
        || text.starts_with("hg+")
        || text.starts_with("svn+")
        || text.starts_with("bzr+")
        || text.starts_with("file:")
        || text.starts_with('.')
        || text.starts_with('/')
        || text.starts_with('~')
}

fn name_from_egg(text: &str) -> LineOutcome {
    match egg_name(text).map(normalize_name) {
        Some(Ok(name)) => LineOutcome::Egg(name),
        Some(Err(err)) => LineOutcome::Skip(format!("bad egg name: {err}")),
        None => LineOutcome::Skip("URL or path requirement without #egg= name".into()),
    }
}

fn parse_option_line(text: &str) -> LineOutcome {
    let (flag, rest) = match text.split_once(|c: char| c.is_whitespace() || c == '=') {
        Some((flag, rest)) => (flag, rest.trim()),
        None => (text, ""),
    };
    match flag {
        "-e" | "--editable" => name_from_egg(rest),
        _ => LineOutcome::Skip(format!("option line {flag} skipped")),
    }
}

fn parse_requirement(text: &str) -> LineOutcome {
    // Environment markers.
    let text = text.split(';').next().unwrap_or_default().trim();
    // Per-requirement options such as --hash.
    let text = match text.find(" --").or_else(|| text.find("\t--")) {
        Some(pos) => text[..pos].trim(),
        None => text,
    };
    if text.is_empty() {
        return LineOutcome::Skip("requirement has no package name".into());
    }
    let end = text
        .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')))
        .unwrap_or(text.len());
    let (head, tail) = text.split_at(end);
    let tail = tail.trim_start();
    if !head.is_empty() && tail.starts_with('@') {
        // PEP 508 direct reference: `name @ url`.
        return match normalize_name(head) {
            Ok(name) => LineOutcome::Name(name),
            Err(err) => LineOutcome::Skip(err.to_string()),
        };
    }
    if looks_like_url_or_path(text) {
        return name_from_egg(text);
    }
    if head.is_empty() {
        return LineOutcome::Skip(format!("unparseable requirement {text:?}"));
    }
    let valid_tail = tail.is_empty()
        || tail.starts_with(['[', '<', '>', '=', '!', '~', '(', '@', ',']);
    if !valid_tail {
        return LineOutcome::Skip(format!("unparseable requirement {text:?}"));
    }
    match normalize_name(head) {
        Ok(name) => LineOutcome::Name(name),
        Err(err) => LineOutcome::Skip(err.to_string()),
    }
}

fn classify(line: &str) -> LineOutcome {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return LineOutcome::Blank;
    }
    let text = strip_comment(trimmed).trim();
    if text.is_empty() {
        return LineOutcome::Comment;
    }
    if text.starts_with('-') {
        parse_option_line(text)
    } else {
        parse_requirement(text)
    }
}

/// Parses the text of a requirements file. Never fails: lines that cannot be
/// understood are counted as skipped and described in `warnings`.
pub fn parse_requirements(content: &str) -> ParseReport {
    let mut report = ParseReport::default();
    for (line_no, line) in logical_lines(content) {
        match classify(&line) {
            LineOutcome::Blank => report.blank_lines += 1,
            LineOutcome::Comment => report.skipped_lines += 1,
            LineOutcome::Skip(reason) => report.skip(line_no, reason),
            LineOutcome::Name(name) => {
                report.dependency_lines += 1;
                report.names.insert(name);
            }
            LineOutcome::Egg(name) => {
                report.warnings.push(ParseWarning {
                    line: line_no,
                    reason: format!("package name {name} taken from #egg= fragment"),
                });
                report.dependency_lines += 1;
                report.names.insert(name);
            }
        }
    }
    report
}
