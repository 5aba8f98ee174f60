//! Coordinate-list export of parity-check matrices.
//!
//! One `row col` pair per line, zero-based, preceded by a `# rows cols`
//! comment giving the shape. Other `#` lines are ignored on import.

use std::fmt::Write as _;
use std::path::Path;

use super::expand::ParityCheck;
use super::LdpcError;

pub fn h_to_text(h: &ParityCheck) -> String {
    let mut out = String::with_capacity(h.n_edges() * 12);
    writeln!(out, "# {} {}", h.n_rows, h.n_cols).unwrap();
    for (r, row) in h.rows.iter().enumerate() {
        for &c in row {
            writeln!(out, "{r} {c}").unwrap();
        }
    }
    out
}

pub fn h_from_text(text: &str) -> Result<ParityCheck, LdpcError> {
    let mut shape = None;
    let mut entries = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        let err = |m: &str| LdpcError::Format(format!("line {}: {m}", ln + 1));
        if line.is_empty() {
            continue;
        }
        let parse = |s: &str| -> Result<Vec<usize>, LdpcError> {
            s.split_whitespace()
                .map(|t| t.parse().map_err(|_| err("expected integers")))
                .collect()
        };
        if let Some(rest) = line.strip_prefix('#') {
            if shape.is_none() {
                if let Ok(v) = parse(rest) {
                    if v.len() == 2 {
                        shape = Some((v[0], v[1]));
                    }
                }
            }
            continue;
        }
        let v = parse(line)?;
        if v.len() != 2 {
            return Err(err("expected `row col`"));
        }
        entries.push((v[0], v[1]));
    }
    let (rows, cols) = shape.ok_or_else(|| LdpcError::Format("missing `# rows cols` header".into()))?;
    if let Some(&(r, c)) = entries.iter().find(|&&(r, c)| r >= rows || c >= cols) {
        return Err(LdpcError::Format(format!("entry ({r}, {c}) outside {rows}×{cols}")));
    }
    let mut sorted = entries.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != entries.len() {
        return Err(LdpcError::Format("duplicate entry".into()));
    }
    Ok(ParityCheck::from_entries(rows, cols, &entries))
}

pub fn write_h(h: &ParityCheck, path: &Path) -> Result<(), LdpcError> {
    std::fs::write(path, h_to_text(h))?;
    Ok(())
}

pub fn read_h(path: &Path) -> Result<ParityCheck, LdpcError> {
    h_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{expand_protograph, GirthTarget, Protograph};

    #[test]
    fn round_trip() {
        let code = expand_protograph(&Protograph::default_code(), 48, 2, GirthTarget::Six).unwrap();
        let text = h_to_text(&code.h);
        assert_eq!(text.lines().count(), code.h.n_edges() + 1);
        assert_eq!(h_from_text(&text).unwrap(), code.h);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(h_from_text("0 1\n").is_err());
        assert!(h_from_text("# 2 2\n0 5\n").is_err());
        assert!(h_from_text("# 2 2\n0 1\n0 1\n").is_err());
        assert!(h_from_text("# 2 2\n0 x\n").is_err());
    }
}
