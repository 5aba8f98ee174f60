//! Frame verification by universal hashing.
//!
//! The digest is `T·s` over GF(2) for a random 64 × n Hankel matrix `T`
//! (`T[i][j] = k[i + j]`, a Toeplitz matrix with reversed rows) drawn from a
//! seeded key of `n + 63` bits. For any fixed `s ≠ ŝ`, the digests collide
//! with probability exactly 2⁻⁶⁴ over the key.

use rand::RngCore;

use super::LdpcError;
use crate::rng::sim_rng;

pub type Digest = u64;

#[derive(Debug, Clone)]
pub struct ToeplitzHash {
    n: usize,
    key: Vec<u64>,
}

impl ToeplitzHash {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = sim_rng(seed);
        let key = (0..(n + 63).div_ceil(64) + 1).map(|_| rng.next_u64()).collect();
        Self { n, key }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Column `j` of `T`: key bits `j..j + 64`.
    fn column(&self, j: usize) -> u64 {
        let (w, b) = (j / 64, j % 64);
        if b == 0 {
            self.key[w]
        } else {
            (self.key[w] >> b) | (self.key[w + 1] << (64 - b))
        }
    }

    /// Digest of a bit vector (one bit per byte).
    pub fn digest(&self, bits: &[u8]) -> Result<Digest, LdpcError> {
        if bits.len() != self.n {
            return Err(LdpcError::LengthMismatch {
                expected: self.n,
                got: bits.len(),
            });
        }
        Ok(bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b & 1 == 1)
            .fold(0, |acc, (j, _)| acc ^ self.column(j)))
    }
}

/// Compares `s` and `ŝ` through their digests.
pub fn verify(hash: &ToeplitzHash, s: &[u8], s_hat: &[u8]) -> Result<bool, LdpcError> {
    if s.len() != s_hat.len() {
        return Err(LdpcError::LengthMismatch {
            expected: s.len(),
            got: s_hat.len(),
        });
    }
    Ok(hash.digest(s)? == hash.digest(s_hat)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn equal_and_flipped() {
        let h = ToeplitzHash::new(1000, 3);
        let mut rng = sim_rng(1);
        let s: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..2)).collect();
        assert!(verify(&h, &s, &s).unwrap());
        for i in [0, 1, 63, 64, 500, 999] {
            let mut t = s.clone();
            t[i] ^= 1;
            assert!(!verify(&h, &s, &t).unwrap());
        }
    }

    #[test]
    fn digest_is_linear() {
        let h = ToeplitzHash::new(300, 9);
        let mut rng = sim_rng(2);
        let a: Vec<u8> = (0..300).map(|_| rng.gen_range(0..2)).collect();
        let b: Vec<u8> = (0..300).map(|_| rng.gen_range(0..2)).collect();
        let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        assert_eq!(h.digest(&x).unwrap(), h.digest(&a).unwrap() ^ h.digest(&b).unwrap());
    }

    #[test]
    fn matches_dense_matrix_product() {
        let n = 130;
        let h = ToeplitzHash::new(n, 5);
        let key_bit = |i: usize| (h.key[i / 64] >> (i % 64)) & 1;
        let mut rng = sim_rng(4);
        let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let mut want = 0u64;
        for i in 0..64 {
            let bit = (0..n).fold(0, |acc, j| acc ^ (key_bit(i + j) & s[j] as u64));
            want |= bit << i;
        }
        assert_eq!(h.digest(&s).unwrap(), want);
    }

    #[test]
    fn length_mismatch() {
        let h = ToeplitzHash::new(10, 0);
        assert!(verify(&h, &[0; 10], &[0; 9]).is_err());
        assert!(h.digest(&[0; 11]).is_err());
    }
}
