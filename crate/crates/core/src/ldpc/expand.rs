//! Quasi-cyclic lifting with short-cycle avoidance.
//!
//! Edge `(r, c)` with shift `s` connects check `r·Z + j` to variable
//! `c·Z + (j + s) mod Z`. A closed walk through base edges
//! `e₁ e₂ … e₂ₖ` (alternating rows and columns, consecutive edges distinct)
//! lifts to cycles of length `2k` iff `s₁ − s₂ + s₃ − … − s₂ₖ ≡ 0 (mod Z)`.

use rand::Rng;

use super::encoder::Encoder;
use super::protograph::Protograph;
use super::LdpcError;
use crate::rng::{derive_seed, sim_rng};

/// Sparse binary parity-check matrix with row and column adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    pub n_rows: usize,
    pub n_cols: usize,
    pub rows: Vec<Vec<u32>>,
    pub cols: Vec<Vec<u32>>,
}

impl ParityCheck {
    pub fn from_entries(n_rows: usize, n_cols: usize, entries: &[(usize, usize)]) -> Self {
        let mut rows = vec![Vec::new(); n_rows];
        let mut cols = vec![Vec::new(); n_cols];
        for &(r, c) in entries {
            rows[r].push(c as u32);
            cols[c].push(r as u32);
        }
        for v in rows.iter_mut().chain(cols.iter_mut()) {
            v.sort_unstable();
        }
        Self {
            n_rows,
            n_cols,
            rows,
            cols,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `H·cᵀ` over GF(2).
    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(0u8, |acc, &c| acc ^ word[c as usize]))
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().fold(0u8, |acc, &c| acc ^ word[c as usize]) == 0)
    }

    /// Exhaustive search for a 4-cycle: two rows sharing two columns.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for r in &self.rows {
            for (i, &a) in r.iter().enumerate() {
                for &b in &r[i + 1..] {
                    if a == b || !seen.insert((a, b)) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Cycle-avoidance target for the lifting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GirthTarget {
    Six,
    Eight,
}

impl GirthTarget {
    pub fn value(self) -> usize {
        match self {
            GirthTarget::Six => 6,
            GirthTarget::Eight => 8,
        }
    }
}

/// Lifted code: protograph, lift size, circulant shifts, `H` and its encoder.
#[derive(Debug, Clone)]
pub struct ExpandedCode {
    pub protograph: Protograph,
    pub lift: usize,
    /// `(row, col, shift)` per base edge.
    pub shifts: Vec<(usize, usize, usize)>,
    pub h: ParityCheck,
    /// Lower bound on the girth guaranteed by construction.
    pub girth: usize,
    encoder: Encoder,
}

#[derive(Debug, Clone, Copy)]
struct BaseEdge {
    row: usize,
    col: usize,
}

struct CycleChecker<'a> {
    edges: &'a [BaseEdge],
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
    z: i64,
}

impl<'a> CycleChecker<'a> {
    fn new(edges: &'a [BaseEdge], rows: usize, cols: usize, z: usize) -> Self {
        let mut by_row = vec![Vec::new(); rows];
        let mut by_col = vec![Vec::new(); cols];
        for (i, e) in edges.iter().enumerate() {
            by_row[e.row].push(i);
            by_col[e.col].push(i);
        }
        Self {
            edges,
            by_row,
            by_col,
            z: z as i64,
        }
    }

    /// Whether edge `e` with the shifts in `s` (unassigned = `None`) closes a
    /// zero-sum walk of length 2, 4 or (with `eight`) 6 through assigned edges.
    fn closes_cycle(&self, e: usize, s: &[Option<usize>], eight: bool) -> bool {
        let sh = |i: usize| s[i].map(|v| v as i64);
        let Some(s1) = sh(e) else { return false };
        let (row, col) = (self.edges[e].row, self.edges[e].col);
        let zero = |v: i64| v.rem_euclid(self.z) == 0;
        // parallel edges in the same base entry need distinct shifts
        for &f in &self.by_row[row] {
            if f != e && self.edges[f].col == col && sh(f) == Some(s1) {
                return true;
            }
        }
        // e1 = e (row → col), e2 in col, e3 in row j, e4 back in row of e
        for &e2 in &self.by_col[col] {
            if e2 == e {
                continue;
            }
            let Some(s2) = sh(e2) else { continue };
            let j = self.edges[e2].row;
            for &e3 in &self.by_row[j] {
                if e3 == e2 {
                    continue;
                }
                let Some(s3) = sh(e3) else { continue };
                let l = self.edges[e3].col;
                for &e4 in &self.by_col[l] {
                    if e4 == e3 {
                        continue;
                    }
                    let Some(s4) = sh(e4) else { continue };
                    let m = self.edges[e4].row;
                    let partial = s1 - s2 + s3 - s4;
                    if m == row {
                        if e4 != e && zero(partial) {
                            return true;
                        }
                        continue;
                    }
                    if !eight {
                        continue;
                    }
                    for &e5 in &self.by_row[m] {
                        if e5 == e4 {
                            continue;
                        }
                        let Some(s5) = sh(e5) else { continue };
                        let n = self.edges[e5].col;
                        for &e6 in &self.by_col[n] {
                            if e6 == e5 || e6 == e || self.edges[e6].row != row {
                                continue;
                            }
                            let Some(s6) = sh(e6) else { continue };
                            if zero(partial + s5 - s6) {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        false
    }
}

const ATTEMPTS_PER_EDGE: usize = 500;
const RESTARTS: u64 = 20;

/// Lifts `p` by `lift` with randomly drawn circulant shifts, rejecting any
/// shift that closes a cycle shorter than the girth target.
pub fn expand_protograph(
    p: &Protograph,
    lift: usize,
    seed: u64,
    girth: GirthTarget,
) -> Result<ExpandedCode, LdpcError> {
    p.validate()?;
    if lift == 0 {
        return Err(LdpcError::InvalidLift(lift));
    }
    let mut edges = Vec::new();
    for (r, row) in p.base.iter().enumerate() {
        for (c, &m) in row.iter().enumerate() {
            for _ in 0..m {
                edges.push(BaseEdge { row: r, col: c });
            }
        }
    }
    let checker = CycleChecker::new(&edges, p.rows(), p.cols(), lift);
    let eight = girth == GirthTarget::Eight;

    let mut fixed: Vec<Option<usize>> = vec![None; edges.len()];
    for &(r, c, s) in &p.fixed_shifts {
        let slot = edges
            .iter()
            .enumerate()
            .position(|(i, e)| e.row == r && e.col == c && fixed[i].is_none())
            .ok_or_else(|| LdpcError::Format(format!("too many fixed shifts for ({r}, {c})")))?;
        fixed[slot] = Some(s % lift);
    }
    for i in 0..edges.len() {
        if fixed[i].is_some() && checker.closes_cycle(i, &fixed, eight) {
            return Err(LdpcError::InfeasibleGirth {
                lift,
                girth: girth.value(),
            });
        }
    }

    let mut singular = 0;
    'restart: for attempt in 0..RESTARTS {
        let mut rng = sim_rng(derive_seed(seed, &[attempt]));
        let mut s = fixed.clone();
        for i in 0..edges.len() {
            if s[i].is_some() {
                continue;
            }
            let mut placed = false;
            for _ in 0..ATTEMPTS_PER_EDGE {
                s[i] = Some(rng.gen_range(0..lift));
                if !checker.closes_cycle(i, &s, eight) {
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        let shifts: Vec<(usize, usize, usize)> = edges
            .iter()
            .zip(&s)
            .map(|(e, v)| (e.row, e.col, v.expect("all shifts assigned")))
            .collect();
        match ExpandedCode::from_shifts(p.clone(), lift, shifts, girth.value()) {
            // a singular parity part is a property of this draw, not of the protograph
            Err(LdpcError::EncoderConstruction(_)) => singular += 1,
            other => return other,
        }
    }
    if singular > 0 {
        return Err(LdpcError::EncoderConstruction(format!(
            "parity part singular in {singular} of {RESTARTS} liftings of size {lift}"
        )));
    }
    Err(LdpcError::InfeasibleGirth {
        lift,
        girth: girth.value(),
    })
}

impl ExpandedCode {
    /// Builds `H` from explicit shifts and constructs the encoder.
    pub fn from_shifts(
        protograph: Protograph,
        lift: usize,
        shifts: Vec<(usize, usize, usize)>,
        girth: usize,
    ) -> Result<Self, LdpcError> {
        let z = lift;
        let mut entries = Vec::with_capacity(shifts.len() * z);
        for &(r, c, s) in &shifts {
            for j in 0..z {
                entries.push((r * z + j, c * z + (j + s) % z));
            }
        }
        let h = ParityCheck::from_entries(protograph.rows() * z, protograph.cols() * z, &entries);
        Self::from_matrix(protograph, lift, shifts, h, girth)
    }

    /// Wraps an explicit parity-check matrix laid out by protograph columns.
    pub fn from_matrix(
        protograph: Protograph,
        lift: usize,
        shifts: Vec<(usize, usize, usize)>,
        h: ParityCheck,
        girth: usize,
    ) -> Result<Self, LdpcError> {
        if h.n_rows != protograph.rows() * lift || h.n_cols != protograph.cols() * lift {
            return Err(LdpcError::Format(format!(
                "H is {}×{}, protograph and lift imply {}×{}",
                h.n_rows,
                h.n_cols,
                protograph.rows() * lift,
                protograph.cols() * lift
            )));
        }
        let info = positions(&protograph.info_cols, lift);
        let encoder = Encoder::build(&h, &info)?;
        Ok(Self {
            protograph,
            lift,
            shifts,
            h,
            girth,
            encoder,
        })
    }

    /// Number of variable nodes, including state-punctured ones.
    pub fn n_vars(&self) -> usize {
        self.h.n_cols
    }

    /// Transmitted blocklength `N`.
    pub fn n(&self) -> usize {
        self.n_vars() - self.protograph.punctured_cols.len() * self.lift
    }

    /// Information length `K`.
    pub fn k(&self) -> usize {
        self.protograph.info_cols.len() * self.lift
    }

    pub fn design_rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    /// Variable indices of the information bits, in order.
    pub fn info_positions(&self) -> Vec<usize> {
        positions(&self.protograph.info_cols, self.lift)
    }

    /// Variable indices of the state-punctured bits.
    pub fn state_punctured_positions(&self) -> Vec<usize> {
        positions(&self.protograph.punctured_cols, self.lift)
    }

    /// Variable indices that are transmitted, ascending.
    pub fn transmitted_positions(&self) -> Vec<usize> {
        let z = self.lift;
        (0..self.protograph.cols())
            .filter(|c| !self.protograph.punctured_cols.contains(c))
            .flat_map(|c| c * z..(c + 1) * z)
            .collect()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Systematic codeword over all variable nodes, state-punctured ones
    /// included.
    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>, LdpcError> {
        self.encoder.encode(&self.h, info_bits)
    }
}

fn positions(cols: &[usize], z: usize) -> Vec<usize> {
    cols.iter().flat_map(|&c| c * z..(c + 1) * z).collect()
}
