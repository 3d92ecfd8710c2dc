//! Credential records, the tab-separated corpus format and cleaning.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::similarity::{validate_password, PasswordError};

/// Users with more passwords than this are dropped by cleaning.
pub const MAX_PASSWORDS_PER_USER: usize = 1000;

/// A cleaned credential with a canonical username.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Credential {
    username: String,
    password: String,
}

impl Credential {
    /// Canonicalizes the username and validates both fields.
    pub fn new(username: &str, password: &str) -> Result<Self, CredentialError> {
        let username = canonicalize_username(username);
        if username.is_empty() {
            return Err(CredentialError::EmptyUsername);
        }
        validate_password(password)?;
        Ok(Credential {
            username,
            password: password.to_owned(),
        })
    }

    pub fn username(&self) -> &str {
        &self.username
    }

    pub fn password(&self) -> &str {
        &self.password
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("username is empty after canonicalization")]
    EmptyUsername,
    #[error(transparent)]
    Password(#[from] PasswordError),
}

/// Trims ASCII whitespace and lowercases.
pub fn canonicalize_username(username: &str) -> String {
    username.trim_matches(|c: char| c.is_ascii_whitespace()).to_lowercase()
}

/// One input line before cleaning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawRecord {
    Pair(String, String),
    /// No tab separator, a bad escape, or invalid UTF-8.
    Malformed,
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {source}")]
pub struct CorpusError {
    pub line: usize,
    #[source]
    pub source: io::Error,
}

/// Reads `username<TAB>password` lines. Fields may escape tab, newline and
/// backslash as `\t`, `\n` and `\\`.
pub fn read_raw_records<R: BufRead>(mut reader: R) -> Result<Vec<RawRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut line = 0;
    loop {
        buf.clear();
        line += 1;
        let read = reader
            .read_until(b'\n', &mut buf)
            .map_err(|source| CorpusError { line, source })?;
        if read == 0 {
            break;
        }
        if buf.ends_with(b"\n") {
            buf.pop();
            if buf.ends_with(b"\r") {
                buf.pop();
            }
        }
        out.push(parse_line(&buf));
    }
    Ok(out)
}

fn parse_line(bytes: &[u8]) -> RawRecord {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return RawRecord::Malformed;
    };
    let fields: Vec<&str> = text.split('\t').collect();
    let [u, w] = fields.as_slice() else {
        return RawRecord::Malformed;
    };
    match (unescape(u), unescape(w)) {
        (Some(u), Some(w)) => RawRecord::Pair(u, w),
        _ => RawRecord::Malformed,
    }
}

pub fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            't' => out.push('\t'),
            'n' => out.push('\n'),
            '\\' => out.push('\\'),
            _ => return None,
        }
    }
    Some(out)
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\\' => out.push_str("\\\\"),
            _ => out.push(c),
        }
    }
    out
}

pub fn write_corpus<W: Write>(mut writer: W, creds: &[Credential]) -> io::Result<()> {
    for c in creds {
        writeln!(writer, "{}\t{}", escape(c.username()), escape(c.password()))?;
    }
    writer.flush()
}

/// Reads an already cleaned corpus, failing on the first invalid line.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Credential>, CorpusError> {
    read_raw_records(reader)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let invalid = |msg: String| CorpusError {
                line: i + 1,
                source: io::Error::new(io::ErrorKind::InvalidData, msg),
            };
            match r {
                RawRecord::Pair(u, w) => Credential::new(&u, &w).map_err(|e| invalid(e.to_string())),
                RawRecord::Malformed => Err(invalid("malformed record".into())),
            }
        })
        .collect()
}

/// Per-class line counts; the classes partition the input.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CleanReport {
    pub total: usize,
    pub kept: usize,
    pub malformed: usize,
    pub empty_username: usize,
    pub empty_password: usize,
    pub non_ascii: usize,
    pub too_long: usize,
    /// Lines belonging to users with more than the per-user limit.
    pub heavy_user: usize,
    pub heavy_users_dropped: usize,
}

impl CleanReport {
    pub fn rejected(&self) -> usize {
        self.malformed + self.empty_username + self.empty_password + self.non_ascii + self.too_long + self.heavy_user
    }
}

impl fmt::Display for CleanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total\t{}", self.total)?;
        writeln!(f, "kept\t{}", self.kept)?;
        writeln!(f, "malformed\t{}", self.malformed)?;
        writeln!(f, "empty_username\t{}", self.empty_username)?;
        writeln!(f, "empty_password\t{}", self.empty_password)?;
        writeln!(f, "non_ascii\t{}", self.non_ascii)?;
        writeln!(f, "too_long\t{}", self.too_long)?;
        writeln!(f, "heavy_user\t{}", self.heavy_user)?;
        write!(f, "heavy_users_dropped\t{}", self.heavy_users_dropped)
    }
}

/// Applies the cleaning rules, preserving input order of the kept records.
pub fn clean_corpus<I>(raw: I) -> (Vec<Credential>, CleanReport)
where
    I: IntoIterator<Item = RawRecord>,
{
    let mut report = CleanReport::default();
    let mut valid = Vec::new();
    for record in raw {
        report.total += 1;
        let RawRecord::Pair(u, w) = record else {
            report.malformed += 1;
            continue;
        };
        match Credential::new(&u, &w) {
            Ok(c) => valid.push(c),
            Err(CredentialError::EmptyUsername) => report.empty_username += 1,
            Err(CredentialError::Password(PasswordError::Empty)) => report.empty_password += 1,
            Err(CredentialError::Password(PasswordError::NonAscii)) => report.non_ascii += 1,
            Err(CredentialError::Password(PasswordError::TooLong)) => report.too_long += 1,
        }
    }
    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for c in &valid {
        *per_user.entry(c.username()).or_default() += 1;
    }
    let heavy: std::collections::HashSet<String> = per_user
        .into_iter()
        .filter(|(_, n)| *n > MAX_PASSWORDS_PER_USER)
        .map(|(u, _)| u.to_owned())
        .collect();
    report.heavy_users_dropped = heavy.len();
    let kept: Vec<Credential> = valid
        .into_iter()
        .filter(|c| {
            let drop = heavy.contains(c.username());
            report.heavy_user += usize::from(drop);
            !drop
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}
