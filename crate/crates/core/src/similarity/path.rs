//! Unit transformations, shortest transformation paths and their application.

use std::fmt;

use super::keypress::{keypress_decode, keypress_encode, validate_password, KeySymbol};
use super::SimilarityError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditOp {
    Insert,
    Delete,
    Substitute,
}

impl EditOp {
    fn tag(self) -> &'static str {
        match self {
            EditOp::Insert => "ins",
            EditOp::Delete => "del",
            EditOp::Substitute => "sub",
        }
    }
}

/// A single `(edit, symbol, location)` edit on the keypress sequence.
///
/// Locations are 1-based from the start when positive and from the end when
/// negative (`-1` is the last symbol, or the append slot for inserts). A
/// delete normally carries no symbol; the built-in case-toggle rule uses a
/// guarded delete that only fires when the addressed symbol matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitTransformation {
    op: EditOp,
    symbol: Option<KeySymbol>,
    location: i32,
}

impl UnitTransformation {
    pub fn insert(symbol: KeySymbol, location: i32) -> Self {
        Self::checked(EditOp::Insert, Some(symbol), location)
    }

    pub fn delete(location: i32) -> Self {
        Self::checked(EditOp::Delete, None, location)
    }

    /// A delete that is inapplicable unless `symbol` is at `location`.
    pub fn delete_if(symbol: KeySymbol, location: i32) -> Self {
        Self::checked(EditOp::Delete, Some(symbol), location)
    }

    pub fn substitute(symbol: KeySymbol, location: i32) -> Self {
        Self::checked(EditOp::Substitute, Some(symbol), location)
    }

    fn checked(op: EditOp, symbol: Option<KeySymbol>, location: i32) -> Self {
        assert!(location != 0, "edit locations are nonzero");
        UnitTransformation {
            op,
            symbol,
            location,
        }
    }

    pub fn op(&self) -> EditOp {
        self.op
    }

    pub fn symbol(&self) -> Option<KeySymbol> {
        self.symbol
    }

    pub fn location(&self) -> i32 {
        self.location
    }

    /// Applies the edit in place; `false` when it is inapplicable.
    fn apply(&self, seq: &mut Vec<KeySymbol>) -> bool {
        let len = seq.len();
        match self.op {
            EditOp::Insert => match slot_from_location(self.location, len) {
                Some(slot) => {
                    seq.insert(slot, self.symbol.expect("insert carries a symbol"));
                    true
                }
                None => false,
            },
            EditOp::Delete => match index_from_location(self.location, len) {
                Some(idx) if self.symbol.map_or(true, |s| seq[idx] == s) => {
                    seq.remove(idx);
                    true
                }
                _ => false,
            },
            EditOp::Substitute => match index_from_location(self.location, len) {
                Some(idx) => {
                    let sym = self.symbol.expect("substitute carries a symbol");
                    if seq[idx] == sym {
                        return false;
                    }
                    seq[idx] = sym;
                    true
                }
                None => false,
            },
        }
    }
}

impl fmt::Display for UnitTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = self.symbol.map(escape_symbol).unwrap_or_default();
        write!(f, "{}:{}:{}", self.op.tag(), sym, self.location)
    }
}

/// Location of symbol index `idx` in a sequence of `len` symbols, using the
/// representation with the smaller magnitude (ties go to the start).
pub fn location_for_index(idx: usize, len: usize) -> i32 {
    debug_assert!(idx < len);
    pick_location(idx + 1, len - idx)
}

/// Location of insertion slot `slot` (0 = before the first symbol,
/// `len` = append) in a sequence of `len` symbols.
pub fn location_for_slot(slot: usize, len: usize) -> i32 {
    debug_assert!(slot <= len);
    pick_location(slot + 1, len + 1 - slot)
}

fn pick_location(from_start: usize, from_end: usize) -> i32 {
    if from_end < from_start {
        -(from_end as i32)
    } else {
        from_start as i32
    }
}

fn index_from_location(location: i32, len: usize) -> Option<usize> {
    let len = len as i64;
    let loc = location as i64;
    let idx = if loc > 0 { loc - 1 } else { len + loc };
    (0..len).contains(&idx).then_some(idx as usize)
}

fn slot_from_location(location: i32, len: usize) -> Option<usize> {
    let len = len as i64;
    let loc = location as i64;
    let slot = if loc > 0 { loc - 1 } else { len + 1 + loc };
    (0..=len).contains(&slot).then_some(slot as usize)
}

/// An ordered edit program. Paths compare structurally on their edits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransformationPath {
    edits: Vec<UnitTransformation>,
}

impl TransformationPath {
    pub fn new(edits: Vec<UnitTransformation>) -> Result<Self, SimilarityError> {
        if edits.is_empty() {
            return Err(SimilarityError::EmptyPath);
        }
        Ok(TransformationPath { edits })
    }

    pub fn single(edit: UnitTransformation) -> Self {
        TransformationPath { edits: vec![edit] }
    }

    pub fn edits(&self) -> &[UnitTransformation] {
        &self.edits
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    /// Applies the edits in order to the keypress encoding of `password`.
    /// Returns `None` when any edit is out of range, a substitute would be a
    /// no-op, the result is not a valid password, or nothing changed.
    pub fn apply(&self, password: &str) -> Option<String> {
        let mut seq = keypress_encode(password).ok()?;
        for edit in &self.edits {
            if !edit.apply(&mut seq) {
                return None;
            }
        }
        let out = keypress_decode(&seq);
        if out == password || validate_password(&out).is_err() {
            return None;
        }
        Some(out)
    }
}

impl fmt::Display for TransformationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.edits.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parses the `Display` form.
impl std::str::FromStr for TransformationPath {
    type Err = SimilarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s.trim())
    }
}

pub fn apply_path(path: &TransformationPath, password: &str) -> Option<String> {
    path.apply(password)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Keep,
    Substitute,
    Delete,
    Insert,
}

/// The shortest edit program turning `from` into `to` on keypress sequences.
///
/// Among several shortest alignments the backtrace prefers substitute over
/// delete over insert, which settles shared symbols as late as possible and
/// pushes the edits toward the start of the string. Edits are listed left to
/// right, each located relative to the sequence as it stands when applied.
pub fn derive_path(from: &str, to: &str) -> Result<TransformationPath, SimilarityError> {
    if from == to {
        return Err(SimilarityError::IdenticalPair);
    }
    let a = keypress_encode(from)?;
    let b = keypress_encode(to)?;
    let steps = align(&a, &b);

    let mut cur = a.clone();
    let mut pos = 0usize;
    let mut j = 0usize;
    let mut edits = Vec::new();
    for step in steps {
        match step {
            Step::Keep => {
                pos += 1;
                j += 1;
            }
            Step::Substitute => {
                edits.push(UnitTransformation::substitute(
                    b[j],
                    location_for_index(pos, cur.len()),
                ));
                cur[pos] = b[j];
                pos += 1;
                j += 1;
            }
            Step::Delete => {
                edits.push(UnitTransformation::delete(location_for_index(pos, cur.len())));
                cur.remove(pos);
            }
            Step::Insert => {
                edits.push(UnitTransformation::insert(
                    b[j],
                    location_for_slot(pos, cur.len()),
                ));
                cur.insert(pos, b[j]);
                pos += 1;
                j += 1;
            }
        }
    }
    debug_assert_eq!(cur, b);
    TransformationPath::new(edits)
}

/// Levenshtein distance between two symbol sequences.
pub fn edit_distance(a: &[KeySymbol], b: &[KeySymbol]) -> usize {
    dp_table(a, b)[a.len()][b.len()]
}

fn dp_table(a: &[KeySymbol], b: &[KeySymbol]) -> Vec<Vec<usize>> {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        dp[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let diag = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = diag.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp
}

fn align(a: &[KeySymbol], b: &[KeySymbol]) -> Vec<Step> {
    let dp = dp_table(a, b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut steps = Vec::with_capacity(a.len().max(b.len()));
    while i > 0 || j > 0 {
        let here = dp[i][j];
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] && here == dp[i - 1][j - 1] {
            steps.push(Step::Keep);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == dp[i - 1][j - 1] + 1 {
            steps.push(Step::Substitute);
            i -= 1;
            j -= 1;
        } else if i > 0 && here == dp[i - 1][j] + 1 {
            steps.push(Step::Delete);
            i -= 1;
        } else {
            steps.push(Step::Insert);
            j -= 1;
        }
    }
    steps.reverse();
    steps
}

pub(crate) fn escape_symbol(sym: KeySymbol) -> String {
    match sym {
        KeySymbol::Shift => "<shift>".to_owned(),
        KeySymbol::Caps => "<caps>".to_owned(),
        KeySymbol::Char(c) => match c {
            b':' => "\\:".into(),
            b';' => "\\;".into(),
            b'|' => "\\|".into(),
            b'\\' => "\\\\".into(),
            b' ' => "\\s".into(),
            b'\t' => "\\t".into(),
            _ => (c as char).to_string(),
        },
    }
}

pub(crate) fn parse_symbol(field: &str) -> Result<KeySymbol, SimilarityError> {
    match field {
        "<shift>" => return Ok(KeySymbol::Shift),
        "<caps>" => return Ok(KeySymbol::Caps),
        _ => {}
    }
    let bad = || SimilarityError::Parse(format!("bad symbol {field:?}"));
    let bytes = field.as_bytes();
    let c = match bytes {
        [b'\\', b's'] => b' ',
        [b'\\', b't'] => b'\t',
        [b'\\', c] => *c,
        [c] if *c != b'\\' => *c,
        _ => return Err(bad()),
    };
    if !c.is_ascii() {
        return Err(bad());
    }
    Ok(KeySymbol::Char(c))
}

/// Splits on `sep`, honouring backslash escapes (escapes are kept in the
/// pieces so [`parse_symbol`] can interpret them).
pub(crate) fn split_escaped(s: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            cur.push(c);
            if let Some(n) = chars.next() {
                cur.push(n);
            }
        } else if c == sep {
            parts.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    parts.push(cur);
    parts
}

pub(crate) fn parse_edit(s: &str) -> Result<UnitTransformation, SimilarityError> {
    let fields = split_escaped(s, ':');
    let [op, sym, loc] = fields.as_slice() else {
        return Err(SimilarityError::Parse(format!("bad edit {s:?}")));
    };
    let location: i32 = loc
        .trim()
        .parse()
        .map_err(|_| SimilarityError::Parse(format!("bad location in {s:?}")))?;
    if location == 0 {
        return Err(SimilarityError::Parse(format!("zero location in {s:?}")));
    }
    let symbol = if sym.is_empty() {
        None
    } else {
        Some(parse_symbol(sym)?)
    };
    let op = match (op.as_str(), symbol) {
        ("ins", Some(_)) => EditOp::Insert,
        ("sub", Some(_)) => EditOp::Substitute,
        ("del", _) => EditOp::Delete,
        _ => return Err(SimilarityError::Parse(format!("bad edit {s:?}"))),
    };
    Ok(UnitTransformation {
        op,
        symbol,
        location,
    })
}

pub(crate) fn parse_path(s: &str) -> Result<TransformationPath, SimilarityError> {
    let edits = split_escaped(s, ';')
        .iter()
        .map(|e| parse_edit(e))
        .collect::<Result<Vec<_>, _>>()?;
    TransformationPath::new(edits)
}
