//! Keypress representation of passwords.
//!
//! Uppercase letters become `<shift>` + lowercase, except for fully
//! uppercase words (two letters or more), which become `<caps>` followed by
//! the lowercased string. Edits are computed on this representation so that
//! case changes cost a single keystroke.

use std::fmt;

use thiserror::Error;

/// Longest password kept by corpus cleaning and accepted by the rule engine.
pub const MAX_PASSWORD_LEN: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PasswordError {
    #[error("password is empty")]
    Empty,
    #[error("password longer than {MAX_PASSWORD_LEN} characters")]
    TooLong,
    #[error("password contains a non-printable or non-ASCII character")]
    NonAscii,
}

/// Checks the cleaning rules: 1 to 30 printable ASCII characters.
pub fn validate_password(password: &str) -> Result<(), PasswordError> {
    if password.is_empty() {
        return Err(PasswordError::Empty);
    }
    if !password.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
        return Err(PasswordError::NonAscii);
    }
    if password.len() > MAX_PASSWORD_LEN {
        return Err(PasswordError::TooLong);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeySymbol {
    Char(u8),
    Shift,
    Caps,
}

impl fmt::Display for KeySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeySymbol::Char(c) => write!(f, "{}", *c as char),
            KeySymbol::Shift => f.write_str("<shift>"),
            KeySymbol::Caps => f.write_str("<caps>"),
        }
    }
}

pub fn keypress_encode(password: &str) -> Result<Vec<KeySymbol>, PasswordError> {
    validate_password(password)?;
    let bytes = password.as_bytes();
    let letters = bytes.iter().filter(|b| b.is_ascii_alphabetic()).count();
    let all_upper = letters >= 2 && !bytes.iter().any(|b| b.is_ascii_lowercase());

    let mut out = Vec::with_capacity(bytes.len() + 1);
    if all_upper {
        out.push(KeySymbol::Caps);
        out.extend(bytes.iter().map(|b| KeySymbol::Char(b.to_ascii_lowercase())));
    } else {
        for &b in bytes {
            if b.is_ascii_uppercase() {
                out.push(KeySymbol::Shift);
                out.push(KeySymbol::Char(b.to_ascii_lowercase()));
            } else {
                out.push(KeySymbol::Char(b));
            }
        }
    }
    Ok(out)
}

/// Total inverse of [`keypress_encode`]. `<caps>` toggles case inversion for
/// the letters that follow; `<shift>` uppercases the next symbol if it is a
/// letter and is dropped otherwise.
pub fn keypress_decode(seq: &[KeySymbol]) -> String {
    let mut out = String::with_capacity(seq.len());
    let mut caps = false;
    for (i, sym) in seq.iter().enumerate() {
        match *sym {
            KeySymbol::Caps => caps = !caps,
            KeySymbol::Shift => {}
            KeySymbol::Char(c) => {
                let shifted = i > 0 && seq[i - 1] == KeySymbol::Shift;
                let ch = if c.is_ascii_alphabetic() {
                    if shifted {
                        c.to_ascii_uppercase()
                    } else if caps {
                        invert_case(c)
                    } else {
                        c
                    }
                } else {
                    c
                };
                out.push(ch as char);
            }
        }
    }
    out
}

fn invert_case(c: u8) -> u8 {
    if c.is_ascii_lowercase() {
        c.to_ascii_uppercase()
    } else {
        c.to_ascii_lowercase()
    }
}
