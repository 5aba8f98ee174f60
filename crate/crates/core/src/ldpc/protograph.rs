//! Protograph base matrices and their text format.
//!
//! One row per line, whitespace-separated edge multiplicities. Lines starting
//! with `#` are comments, except these directives:
//!
//! ```text
//! # info: 0 1 2              information columns
//! # punctured: 0             columns never transmitted
//! # puncturable: 15 14 13    columns for rate-adaptive puncturing, in order
//! # shortenable: 1 2         columns for shortening
//! # shift: 0 3 1             fixed circulant shift for row 0, column 3
//! ```

use std::fmt::Write as _;

use super::LdpcError;

#[derive(Debug, Clone, PartialEq)]
pub struct Protograph {
    /// `base[row][col]` is the number of parallel edges.
    pub base: Vec<Vec<u8>>,
    pub info_cols: Vec<usize>,
    /// Columns whose bits are never sent (state puncturing).
    pub punctured_cols: Vec<usize>,
    /// Columns available for rate-adaptive puncturing, consumed in order.
    pub puncturable_cols: Vec<usize>,
    pub shortenable_cols: Vec<usize>,
    /// Fixed shifts `(row, col, shift)`; for parallel edges the k-th fixed
    /// shift listed for an entry applies to its k-th edge.
    pub fixed_shifts: Vec<(usize, usize, usize)>,
}

/// The shipped stand-in R = 0.2 protograph.
pub const DEFAULT_PROTOGRAPH: &str = "\
# R = 0.2 protograph: a state-punctured information column (0) on every
# check, two sent information columns (1, 2), three core parity columns
# (3..5) and ten degree-1 extension parity columns (6..15).
# info: 0 1 2
# punctured: 0
# puncturable: 15 14 13 12 11 10 9 8 7 6
# shortenable: 1 2
1 1 1 1 1 0 0 0 0 0 0 0 0 0 0 0
1 1 1 1 1 1 0 0 0 0 0 0 0 0 0 0
1 1 1 1 0 1 0 0 0 0 0 0 0 0 0 0
1 1 0 0 0 0 1 0 0 0 0 0 0 0 0 0
1 0 1 0 0 0 0 1 0 0 0 0 0 0 0 0
1 0 0 1 0 1 0 0 1 0 0 0 0 0 0 0
1 0 1 1 0 0 0 0 0 1 0 0 0 0 0 0
1 0 1 1 0 0 0 0 0 0 1 0 0 0 0 0
1 0 0 1 0 0 0 0 0 0 0 1 0 0 0 0
1 0 1 0 1 0 0 0 0 0 0 0 1 0 0 0
1 1 0 0 0 0 0 0 0 0 0 0 0 1 0 0
1 0 1 0 0 1 0 0 0 0 0 0 0 0 1 0
1 0 1 0 0 0 0 0 0 0 0 0 0 0 0 1
";

/// Lift giving 8190 transmitted bits with the default protograph.
pub const DEFAULT_LIFT: usize = 546;

impl Protograph {
    pub fn default_code() -> Self {
        Self::parse(DEFAULT_PROTOGRAPH).expect("shipped protograph parses")
    }

    pub fn rows(&self) -> usize {
        self.base.len()
    }

    pub fn cols(&self) -> usize {
        self.base.first().map_or(0, |r| r.len())
    }

    /// Information bits per transmitted bit for a full-rank base matrix:
    /// `(cols − rows)/(cols − state-punctured columns)`.
    pub fn design_rate(&self) -> f64 {
        let tx = self.cols() - self.punctured_cols.len();
        (self.cols() - self.rows()) as f64 / tx as f64
    }

    pub fn col_degree(&self, c: usize) -> usize {
        self.base.iter().map(|r| r[c] as usize).sum()
    }

    /// Parses the text format.
    pub fn parse(text: &str) -> Result<Self, LdpcError> {
        let mut base: Vec<Vec<u8>> = Vec::new();
        let mut info = None;
        let mut punctured = Vec::new();
        let mut puncturable = Vec::new();
        let mut shortenable = None;
        let mut shifts = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |m: String| LdpcError::Format(format!("line {}: {m}", ln + 1));
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                let Some((key, val)) = rest.split_once(':') else {
                    continue;
                };
                let nums = || -> Result<Vec<usize>, LdpcError> {
                    val.split_whitespace()
                        .map(|t| t.parse::<usize>().map_err(|e| err(format!("{t:?}: {e}"))))
                        .collect()
                };
                match key.trim() {
                    "info" => info = Some(nums()?),
                    "punctured" => punctured = nums()?,
                    "puncturable" => puncturable = nums()?,
                    "shortenable" => shortenable = Some(nums()?),
                    "shift" => {
                        let v = nums()?;
                        if v.len() != 3 {
                            return Err(err("shift needs `row col value`".into()));
                        }
                        shifts.push((v[0], v[1], v[2]));
                    }
                    _ => {}
                }
                continue;
            }
            let row: Result<Vec<u8>, _> = line
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|e| err(format!("{t:?}: {e}"))))
                .collect();
            base.push(row?);
        }
        if base.is_empty() {
            return Err(LdpcError::Format("no matrix rows".into()));
        }
        let cols = base[0].len();
        if base.iter().any(|r| r.len() != cols) {
            return Err(LdpcError::Format("rows have different lengths".into()));
        }
        if cols <= base.len() {
            return Err(LdpcError::Format(format!(
                "{} rows and {cols} columns leave no information columns",
                base.len()
            )));
        }
        let info = info.unwrap_or_else(|| (0..cols - base.len()).collect());
        let shortenable = shortenable.unwrap_or_else(|| {
            info.iter().copied().filter(|c| !punctured.contains(c)).collect()
        });
        let p = Protograph {
            base,
            info_cols: info,
            punctured_cols: punctured,
            puncturable_cols: puncturable,
            shortenable_cols: shortenable,
            fixed_shifts: shifts,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LdpcError> {
        let (rows, cols) = (self.rows(), self.cols());
        let bad = |m: String| Err(LdpcError::Format(m));
        if self.info_cols.len() != cols - rows {
            return bad(format!(
                "{} information columns declared, base matrix implies {}",
                self.info_cols.len(),
                cols - rows
            ));
        }
        for list in [
            &self.info_cols,
            &self.punctured_cols,
            &self.puncturable_cols,
            &self.shortenable_cols,
        ] {
            if let Some(&c) = list.iter().find(|&&c| c >= cols) {
                return bad(format!("column {c} out of range"));
            }
            let mut s = list.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != list.len() {
                return bad("repeated column in a directive".into());
            }
        }
        for &c in &self.puncturable_cols {
            if self.info_cols.contains(&c) || self.punctured_cols.contains(&c) {
                return bad(format!("puncturable column {c} must be a sent parity column"));
            }
        }
        for &c in &self.shortenable_cols {
            if !self.info_cols.contains(&c) || self.punctured_cols.contains(&c) {
                return bad(format!("shortenable column {c} must be a sent information column"));
            }
        }
        for &(r, c, _) in &self.fixed_shifts {
            if r >= rows || c >= cols || self.base[r][c] == 0 {
                return bad(format!("fixed shift at ({r}, {c}) has no edge"));
            }
        }
        for c in 0..cols {
            if self.col_degree(c) == 0 {
                return bad(format!("column {c} has no edges"));
            }
        }
        Ok(())
    }

    /// Serializes to the text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |v: &[usize]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "# info: {}", list(&self.info_cols)).unwrap();
        if !self.punctured_cols.is_empty() {
            writeln!(out, "# punctured: {}", list(&self.punctured_cols)).unwrap();
        }
        if !self.puncturable_cols.is_empty() {
            writeln!(out, "# puncturable: {}", list(&self.puncturable_cols)).unwrap();
        }
        writeln!(out, "# shortenable: {}", list(&self.shortenable_cols)).unwrap();
        for &(r, c, s) in &self.fixed_shifts {
            writeln!(out, "# shift: {r} {c} {s}").unwrap();
        }
        for row in &self.base {
            let line: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_protograph_shape() {
        let p = Protograph::default_code();
        assert_eq!((p.rows(), p.cols()), (13, 16));
        assert!((p.design_rate() - 0.2).abs() < 1e-15);
        assert_eq!(p.col_degree(0), 13);
        for c in 6..16 {
            assert_eq!(p.col_degree(c), 1);
        }
        assert_eq!(p.puncturable_cols.len(), 10);
    }

    #[test]
    fn text_round_trip() {
        let p = Protograph::default_code();
        assert_eq!(Protograph::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn minimal_matrix_and_defaults() {
        let p = Protograph::parse("# a comment\n1 1\n").unwrap();
        assert_eq!(p.info_cols, vec![0]);
        assert_eq!(p.shortenable_cols, vec![0]);
        assert!((p.design_rate() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs() {
        assert!(Protograph::parse("").is_err());
        assert!(Protograph::parse("1 1\n1\n").is_err());
        assert!(Protograph::parse("1 x\n").is_err());
        assert!(Protograph::parse("1 1\n1 1\n").is_err());
        assert!(Protograph::parse("# info: 5\n1 1\n").is_err());
        assert!(Protograph::parse("# shift: 0 1\n1 1\n").is_err());
        assert!(Protograph::parse("1 0 1\n").is_err());
    }
}
