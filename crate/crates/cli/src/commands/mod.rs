pub mod data;
pub mod lab;
pub mod net;
pub mod store;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use migp_core::pipeline::unescape;

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// `a<TAB>b` lines with backslash escapes; blank lines are skipped.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = || anyhow!("{}:{}: expected `password<TAB>password`", path.display(), i + 1);
        let (a, b) = line.split_once('\t').ok_or_else(bad)?;
        out.push((unescape(a).ok_or_else(bad)?, unescape(b).ok_or_else(bad)?));
    }
    Ok(out)
}
