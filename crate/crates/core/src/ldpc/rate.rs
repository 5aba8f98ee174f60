//! sp rate adaptation: puncturing raises the rate, shortening lowers it.
//!
//! Positions are indices into the transmitted word (`0..N`), the order in
//! which [`ExpandedCode::transmitted_positions`] lists variable nodes.

use serde::{Deserialize, Serialize};

use super::expand::ExpandedCode;
use super::LdpcError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateAdaptation {
    pub n_punctured: usize,
    pub n_shortened: usize,
    /// Transmitted indices withheld from the channel, ascending.
    pub punctured: Vec<usize>,
    /// Transmitted indices fixed to zero and known to both sides, ascending.
    pub shortened: Vec<usize>,
}

impl RateAdaptation {
    pub fn none() -> Self {
        Self {
            n_punctured: 0,
            n_shortened: 0,
            punctured: Vec::new(),
            shortened: Vec::new(),
        }
    }

    /// `(K − s)/(N − p − s)`.
    pub fn effective_rate(&self, n: usize, k: usize) -> f64 {
        (k - self.n_shortened) as f64 / (n - self.n_punctured - self.n_shortened) as f64
    }

    /// Bits sent over the channel per frame, `N − p − s`.
    pub fn n_sent(&self, n: usize) -> usize {
        n - self.n_punctured - self.n_shortened
    }

    /// Length of the LLR vector the decoder expects, `N − s`.
    pub fn n_llrs(&self, n: usize) -> usize {
        n - self.n_shortened
    }
}

/// `(p, s)` for a length-`n`, dimension-`k` code at `target`.
///
/// At or above the mother rate only puncturing is used and `p` is the
/// smallest count with rate ≥ target; below it only shortening is used and
/// `s` is the smallest count with rate ≤ target.
pub fn sp_counts(n: usize, k: usize, target: f64) -> Result<(usize, usize), LdpcError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(LdpcError::InvalidRate(target));
    }
    let rate = |p: usize, s: usize| (k - s) as f64 / (n - p - s) as f64;
    if rate(0, 0) >= target {
        if rate(0, 0) == target {
            return Ok((0, 0));
        }
        // k/(n − s') falls as s' rises: smallest s with (k − s)/(n − s) ≤ t
        let mut s = ((k as f64 - target * n as f64) / (1.0 - target)).ceil().max(0.0) as usize;
        while s > 0 && rate(0, s - 1) <= target {
            s -= 1;
        }
        while s < k && rate(0, s) > target {
            s += 1;
        }
        Ok((0, s))
    } else {
        let mut p = (n as f64 - k as f64 / target).ceil().max(0.0) as usize;
        p = p.min(n - k);
        while p > 0 && rate(p - 1, 0) >= target {
            p -= 1;
        }
        while p < n - k && rate(p, 0) < target {
            p += 1;
        }
        Ok((p, 0))
    }
}

/// Spreads `count` picks evenly over `0..len`.
fn spread(len: usize, count: usize) -> impl Iterator<Item = usize> {
    (0..count).map(move |i| i * len / count)
}

/// Chooses the sp counts and positions for `target` on `code`.
///
/// Puncturing consumes the designated puncturable columns whole, in order;
/// the last partially used column is thinned evenly across its lift group.
/// Shortening is spread evenly over all shortenable positions.
pub fn choose_sp(target: f64, code: &ExpandedCode) -> Result<RateAdaptation, LdpcError> {
    let (n, k, z) = (code.n(), code.k(), code.lift);
    let (p, s) = sp_counts(n, k, target)?;
    let proto = &code.protograph;
    let tx = code.transmitted_positions();
    let tx_index = |var: usize| tx.binary_search(&var).expect("transmitted variable");

    let mut punctured = Vec::with_capacity(p);
    let available = proto.puncturable_cols.len() * z;
    if p > available {
        return Err(LdpcError::InfeasibleRate {
            target,
            kind: "puncturable",
            needed: p,
            available,
        });
    }
    let mut left = p;
    for &c in &proto.puncturable_cols {
        if left == 0 {
            break;
        }
        let take = left.min(z);
        punctured.extend(spread(z, take).map(|j| tx_index(c * z + j)));
        left -= take;
    }

    let pool: Vec<usize> = proto
        .shortenable_cols
        .iter()
        .flat_map(|&c| c * z..(c + 1) * z)
        .collect();
    if s > pool.len() {
        return Err(LdpcError::InfeasibleRate {
            target,
            kind: "shortenable",
            needed: s,
            available: pool.len(),
        });
    }
    let mut shortened: Vec<usize> = spread(pool.len(), s).map(|i| tx_index(pool[i])).collect();
    punctured.sort_unstable();
    shortened.sort_unstable();
    Ok(RateAdaptation {
        n_punctured: p,
        n_shortened: s,
        punctured,
        shortened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{expand_protograph, GirthTarget, Protograph};

    /// Exhaustive oracle over puncture-only and shorten-only counts.
    fn search(n: usize, k: usize, t: f64) -> (usize, usize) {
        let rate = |p: usize, s: usize| (k - s) as f64 / (n - p - s) as f64;
        if rate(0, 0) >= t {
            ((0), (0..=k).find(|&s| rate(0, s) <= t).unwrap())
        } else {
            ((0..=n - k).find(|&p| rate(p, 0) >= t).unwrap(), 0)
        }
    }

    #[test]
    fn worked_examples() {
        assert_eq!(sp_counts(100_000, 20_000, 0.3).unwrap(), (33_334, 0));
        assert_eq!(sp_counts(1000, 200, 0.1).unwrap(), (0, 112));
        assert_eq!(sp_counts(1000, 200, 0.2).unwrap(), (0, 0));
        assert!(matches!(sp_counts(1000, 200, 1.0), Err(LdpcError::InvalidRate(_))));
        assert!(matches!(sp_counts(1000, 200, 0.0), Err(LdpcError::InvalidRate(_))));
    }

    #[test]
    fn matches_exhaustive_search() {
        for &(n, k) in &[(1000usize, 200usize), (8190, 1638), (10_000, 2000), (999, 333)] {
            for i in 0..=80 {
                let t = 0.1 + 0.4 * i as f64 / 80.0;
                assert_eq!(sp_counts(n, k, t).unwrap(), search(n, k, t), "n={n} k={k} t={t}");
            }
        }
    }

    #[test]
    fn within_one_step_of_target() {
        let (n, k) = (10_000usize, 2000usize);
        for i in 0..=40 {
            let t = 0.1 + 0.4 * i as f64 / 40.0;
            let (p, s) = sp_counts(n, k, t).unwrap();
            let r = (k - s) as f64 / (n - p - s) as f64;
            if p > 0 {
                assert!(r >= t && (k as f64 / (n - p + 1) as f64) < t);
            }
            if s > 0 {
                assert!(r <= t && ((k - s + 1) as f64 / (n - s + 1) as f64) > t);
            }
        }
    }

    #[test]
    fn positions_are_disjoint_and_in_range() {
        let code = expand_protograph(&Protograph::default_code(), 64, 1, GirthTarget::Six).unwrap();
        for &t in &[0.1, 0.15, 0.2, 0.25, 0.3, 0.45, 0.55] {
            let ra = choose_sp(t, &code).unwrap();
            assert_eq!(ra.punctured.len(), ra.n_punctured);
            assert_eq!(ra.shortened.len(), ra.n_shortened);
            assert!(ra.punctured.iter().chain(&ra.shortened).all(|&i| i < code.n()));
            assert!(ra.punctured.iter().all(|i| ra.shortened.binary_search(i).is_err()));
            let mut p = ra.punctured.clone();
            p.dedup();
            assert_eq!(p.len(), ra.n_punctured);
        }
    }

    #[test]
    fn whole_columns_at_rate_three_tenths() {
        let z = 64;
        let code = expand_protograph(&Protograph::default_code(), z, 1, GirthTarget::Six).unwrap();
        let ra = choose_sp(0.3, &code).unwrap();
        assert_eq!(ra.n_punctured, 5 * z);
        assert!((ra.effective_rate(code.n(), code.k()) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn infeasible_targets() {
        let code = expand_protograph(&Protograph::default_code(), 32, 1, GirthTarget::Six).unwrap();
        assert!(matches!(choose_sp(0.7, &code), Err(LdpcError::InfeasibleRate { .. })));
        assert!(matches!(choose_sp(0.01, &code), Err(LdpcError::InfeasibleRate { .. })));
    }
}
