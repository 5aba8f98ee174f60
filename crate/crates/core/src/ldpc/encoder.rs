//! Sparse systematic encoder.
//!
//! Parity bits are resolved by peeling: a check with a single unknown parity
//! bit determines it. When peeling stalls, one unknown is declared a
//! reference variable and peeling resumes. Checks left over once every
//! parity bit is resolved give a small dense system `A·r = b` in the
//! reference variables, solved by a precomputed GF(2) inverse. Encoding runs
//! the peeling schedule twice: once with `r = 0` to read off `b`, once with
//! the solved `r`.

use std::collections::VecDeque;

use rand::Rng;

use super::expand::ParityCheck;
use super::LdpcError;
use crate::rng::sim_rng;

#[derive(Debug, Clone)]
pub struct Encoder {
    n_vars: usize,
    info: Vec<u32>,
    /// `(check, var)`: `var` is the XOR of the other variables of `check`.
    steps: Vec<(u32, u32)>,
    refs: Vec<u32>,
    /// Leftover checks used to solve for the references.
    pivot_rows: Vec<u32>,
    /// Inverse of `A` restricted to the pivot rows, one bit row per reference.
    a_inv: Vec<Vec<u64>>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl Encoder {
    /// Builds the encoder for `h` with information bits at `info`.
    pub fn build(h: &ParityCheck, info: &[usize]) -> Result<Self, LdpcError> {
        let n = h.n_cols;
        let mut is_info = vec![false; n];
        for &i in info {
            if i >= n || is_info[i] {
                return Err(LdpcError::EncoderConstruction(format!("bad information index {i}")));
            }
            is_info[i] = true;
        }
        let n_parity = n - info.len();
        if n_parity > h.n_rows {
            return Err(LdpcError::EncoderConstruction(format!(
                "{n_parity} parity bits but only {} checks",
                h.n_rows
            )));
        }

        let mut resolved = is_info.clone();
        let mut unresolved: Vec<usize> = h
            .rows
            .iter()
            .map(|r| r.iter().filter(|&&v| !resolved[v as usize]).count())
            .collect();
        let mut used = vec![false; h.n_rows];
        let mut steps = Vec::with_capacity(n_parity);
        let mut refs = Vec::new();
        let mut queue: VecDeque<usize> = (0..h.n_rows).filter(|&r| unresolved[r] == 1).collect();
        let mut remaining = n_parity;

        let resolve = |v: usize,
                       resolved: &mut Vec<bool>,
                       unresolved: &mut Vec<usize>,
                       queue: &mut VecDeque<usize>| {
            resolved[v] = true;
            for &r in &h.cols[v] {
                let r = r as usize;
                unresolved[r] -= 1;
                if unresolved[r] == 1 {
                    queue.push_back(r);
                }
            }
        };

        while remaining > 0 {
            if let Some(r) = queue.pop_front() {
                if used[r] || unresolved[r] != 1 {
                    continue;
                }
                let v = h.rows[r]
                    .iter()
                    .map(|&v| v as usize)
                    .find(|&v| !resolved[v])
                    .expect("one unresolved variable");
                used[r] = true;
                steps.push((r as u32, v as u32));
                resolve(v, &mut resolved, &mut unresolved, &mut queue);
                remaining -= 1;
                continue;
            }
            // stalled: promote the best-connected unknown of the sparsest open check
            let row = (0..h.n_rows)
                .filter(|&r| !used[r] && unresolved[r] >= 2)
                .min_by_key(|&r| unresolved[r]);
            let v = match row {
                Some(r) => h.rows[r]
                    .iter()
                    .map(|&v| v as usize)
                    .filter(|&v| !resolved[v])
                    .max_by_key(|&v| h.cols[v].len())
                    .expect("open check has unknowns"),
                None => (0..n).find(|&v| !resolved[v]).expect("remaining > 0"),
            };
            refs.push(v as u32);
            resolve(v, &mut resolved, &mut unresolved, &mut queue);
            remaining -= 1;
        }

        let leftover: Vec<usize> = (0..h.n_rows).filter(|&r| !used[r]).collect();
        let nr = refs.len();
        let w = words(nr);
        let mut enc = Encoder {
            n_vars: n,
            info: info.iter().map(|&i| i as u32).collect(),
            steps,
            refs,
            pivot_rows: Vec::new(),
            a_inv: Vec::new(),
        };

        if nr > 0 {
            // A[row] as bit rows: response of each leftover check to unit references
            let mut val = vec![0u64; n * w];
            for (k, &v) in enc.refs.iter().enumerate() {
                val[v as usize * w + k / 64] |= 1u64 << (k % 64);
            }
            for &(r, v) in &enc.steps {
                let mut acc = vec![0u64; w];
                for &u in &h.rows[r as usize] {
                    if u != v {
                        for (a, b) in acc.iter_mut().zip(&val[u as usize * w..(u as usize + 1) * w]) {
                            *a ^= b;
                        }
                    }
                }
                val[v as usize * w..(v as usize + 1) * w].copy_from_slice(&acc);
            }
            let a: Vec<Vec<u64>> = leftover
                .iter()
                .map(|&r| {
                    let mut acc = vec![0u64; w];
                    for &u in &h.rows[r] {
                        for (a, b) in acc.iter_mut().zip(&val[u as usize * w..(u as usize + 1) * w]) {
                            *a ^= b;
                        }
                    }
                    acc
                })
                .collect();
            let (pivots, inv) = invert_square(&a, nr).ok_or_else(|| {
                LdpcError::EncoderConstruction(format!(
                    "parity part is rank deficient ({nr} reference variables, {} leftover checks)",
                    leftover.len()
                ))
            })?;
            enc.pivot_rows = pivots.iter().map(|&i| leftover[i] as u32).collect();
            enc.a_inv = inv;
        }

        let mut rng = sim_rng(0x5eed);
        for _ in 0..8 {
            let bits: Vec<u8> = (0..info.len()).map(|_| rng.gen_range(0..2)).collect();
            let c = enc.encode(h, &bits)?;
            if !h.is_codeword(&c) {
                return Err(LdpcError::EncoderConstruction(
                    "leftover checks are not implied by the solved system".into(),
                ));
            }
        }
        Ok(enc)
    }

    pub fn k(&self) -> usize {
        self.info.len()
    }

    pub fn n_references(&self) -> usize {
        self.refs.len()
    }

    /// Codeword over all variable nodes with `info_bits` at the information
    /// positions.
    pub fn encode(&self, h: &ParityCheck, info_bits: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if info_bits.len() != self.info.len() {
            return Err(LdpcError::LengthMismatch {
                expected: self.info.len(),
                got: info_bits.len(),
            });
        }
        let mut c = vec![0u8; self.n_vars];
        for (&i, &b) in self.info.iter().zip(info_bits) {
            c[i as usize] = b & 1;
        }
        self.run(h, &mut c);
        if !self.refs.is_empty() {
            let b: Vec<u8> = self
                .pivot_rows
                .iter()
                .map(|&r| h.rows[r as usize].iter().fold(0u8, |a, &u| a ^ c[u as usize]))
                .collect();
            for (k, row) in self.a_inv.iter().enumerate() {
                let mut bit = 0u8;
                for (j, &bj) in b.iter().enumerate() {
                    bit ^= bj & ((row[j / 64] >> (j % 64)) & 1) as u8;
                }
                c[self.refs[k] as usize] = bit;
            }
            self.run(h, &mut c);
        }
        Ok(c)
    }

    fn run(&self, h: &ParityCheck, c: &mut [u8]) {
        for &(r, v) in &self.steps {
            let mut acc = 0u8;
            for &u in &h.rows[r as usize] {
                if u != v {
                    acc ^= c[u as usize];
                }
            }
            c[v as usize] = acc;
        }
    }
}

/// Picks `n` linearly independent rows of `a` (bit rows of width `n`) and
/// returns their indices with the inverse of the selected square matrix.
fn invert_square(a: &[Vec<u64>], n: usize) -> Option<(Vec<usize>, Vec<Vec<u64>>)> {
    let w = words(n);
    let bit = |v: &[u64], j: usize| (v[j / 64] >> (j % 64)) & 1 == 1;
    let mut basis: Vec<(Vec<u64>, usize)> = Vec::new();
    let mut chosen = Vec::new();
    for (i, r) in a.iter().enumerate() {
        let mut v = r.clone();
        for (b, lead) in &basis {
            if bit(&v, *lead) {
                v.iter_mut().zip(b).for_each(|(x, y)| *x ^= y);
            }
        }
        if let Some(lead) = (0..n).find(|&j| bit(&v, j)) {
            basis.push((v, lead));
            chosen.push(i);
            if chosen.len() == n {
                break;
            }
        }
    }
    if chosen.len() != n {
        return None;
    }
    let sub: Vec<Vec<u64>> = chosen.iter().map(|&i| a[i].clone()).collect();
    // Gauss–Jordan on [sub | I]
    let mut m: Vec<(Vec<u64>, Vec<u64>)> = sub
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut e = vec![0u64; w];
            e[i / 64] |= 1 << (i % 64);
            (r, e)
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&i| bit(&m[i].0, col))?;
        m.swap(col, p);
        let (pa, pe) = m[col].clone();
        for (i, r) in m.iter_mut().enumerate() {
            if i != col && bit(&r.0, col) {
                r.0.iter_mut().zip(&pa).for_each(|(x, y)| *x ^= y);
                r.1.iter_mut().zip(&pe).for_each(|(x, y)| *x ^= y);
            }
        }
    }
    Some((chosen, m.into_iter().map(|(_, e)| e).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{expand_protograph, GirthTarget, Protograph};

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = sim_rng(seed);
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    #[test]
    fn default_code_encodes() {
        let code = expand_protograph(&Protograph::default_code(), 96, 1, GirthTarget::Six).unwrap();
        let enc = code.encoder();
        assert!(enc.n_references() < code.lift, "{}", enc.n_references());
        for s in 0..20 {
            let info = random_bits(code.k(), s);
            let c = code.encode(&info).unwrap();
            assert!(code.h.is_codeword(&c));
            let sys: Vec<u8> = code.info_positions().iter().map(|&i| c[i]).collect();
            assert_eq!(sys, info);
        }
    }

    #[test]
    fn linearity() {
        let code = expand_protograph(&Protograph::default_code(), 64, 2, GirthTarget::Six).unwrap();
        let zero = code.encode(&vec![0; code.k()]).unwrap();
        assert!(zero.iter().all(|&b| b == 0));
        let a = random_bits(code.k(), 5);
        let b = random_bits(code.k(), 6);
        let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        let cs = code.encode(&sum).unwrap();
        let xor: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
        assert_eq!(xor, cs);
    }

    #[test]
    fn dense_fallback_on_random_matrix() {
        // random 20×40 matrix: peeling stalls almost immediately
        let mut rng = sim_rng(17);
        let mut entries = Vec::new();
        for r in 0..20 {
            for c in 0..40 {
                if rng.gen_bool(0.3) {
                    entries.push((r, c));
                }
            }
        }
        let h = ParityCheck::from_entries(20, 40, &entries);
        let info: Vec<usize> = (0..20).collect();
        match Encoder::build(&h, &info) {
            Ok(enc) => {
                for s in 0..10 {
                    let c = enc.encode(&h, &random_bits(20, s)).unwrap();
                    assert!(h.is_codeword(&c));
                }
            }
            Err(LdpcError::EncoderConstruction(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn rank_deficiency_is_a_build_error() {
        // two identical checks over the same two parity bits
        let h = ParityCheck::from_entries(2, 3, &[(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
        assert!(matches!(
            Encoder::build(&h, &[0]),
            Err(LdpcError::EncoderConstruction(_))
        ));
    }

    #[test]
    fn wrong_info_length() {
        let code = expand_protograph(&Protograph::default_code(), 32, 2, GirthTarget::Six).unwrap();
        assert!(matches!(
            code.encode(&[0, 1]),
            Err(LdpcError::LengthMismatch { .. })
        ));
    }
}
