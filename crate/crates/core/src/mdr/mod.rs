//! Multi-dimensional reverse reconciliation.
//!
//! Bob normalizes his data in chunks of `d` real values, maps code bits onto
//! the sphere as `u_i = ±1/√d`, and discloses an orthogonal map `M` with
//! `M(ŷ) = u` together with `‖y‖`. Alice applies `M` to her own normalized
//! chunk and obtains a noisy copy of `u`, which behaves like a binary-input
//! AWGN channel that becomes exact as `d` grows.
//!
//! For `d ≤ 8` the map is multiplication by `m = u ⋆ ŷ*` in the division
//! algebra of that dimension. Above 8 it is a product of two Householder
//! reflections through a coordinate axis.

pub mod algebra;
pub mod fidelity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fidelity::{virtual_channel_fidelity, virtual_channel_llrs};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdrError {
    #[error("dimension {0} is not one of 1, 2, 4, …, 256")]
    InvalidDimension(usize),
    #[error("chunk {0} has zero norm")]
    DegenerateChunk(usize),
    #[error("input vector is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("malformed rotation message: {0}")]
    Malformed(String),
}

/// Reconciliation dimension: a power of two between 1 and 256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub const MAX: usize = 256;

    pub fn new(d: usize) -> Result<Self, MdrError> {
        if d.is_power_of_two() && d <= Self::MAX {
            Ok(Self(d))
        } else {
            Err(MdrError::InvalidDimension(d))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Whether the division-algebra construction applies.
    pub fn uses_algebra(self) -> bool {
        self.0 <= 8
    }
}

impl TryFrom<usize> for Dimension {
    type Error = MdrError;
    fn try_from(d: usize) -> Result<Self, MdrError> {
        Dimension::new(d)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

const UNIT_TOL: f64 = 1e-9;

/// A normalized chunk and the norm it had.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub unit: Vec<f64>,
    pub norm: f64,
}

/// Splits `y` into chunks of `d` values (dropping the remainder) and scales
/// each to unit norm.
pub fn chunk_and_normalize(y: &[f64], d: Dimension) -> Result<Vec<Chunk>, MdrError> {
    y.chunks_exact(d.get())
        .enumerate()
        .map(|(i, c)| {
            let norm = algebra::norm(c);
            if !(norm > 0.0) {
                return Err(MdrError::DegenerateChunk(i));
            }
            Ok(Chunk {
                unit: c.iter().map(|v| v / norm).collect(),
                norm,
            })
        })
        .collect()
}

/// Spherical image of `d` code bits: bit 0 ↦ `+1/√d`, bit 1 ↦ `−1/√d`.
pub fn spherical_word(bits: &[u8]) -> Vec<f64> {
    let a = 1.0 / (bits.len() as f64).sqrt();
    bits.iter().map(|&b| if b == 0 { a } else { -a }).collect()
}

/// The orthogonal map Bob discloses for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub enum RotationMessage {
    /// Left multiplier `m` with `m ⋆ ŷ = u`.
    Algebra(Vec<f64>),
    /// `Q = H(w₂)·H(w₁)` with unit reflection vectors.
    Reflections { w1: Vec<f64>, w2: Vec<f64> },
}

fn check_unit(v: &[f64]) -> Result<(), MdrError> {
    let n = algebra::norm(v);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(MdrError::NotNormalized(n));
    }
    Ok(())
}

/// Builds the map sending `y_hat` to `u`.
pub fn encode_rotation(y_hat: &[f64], u: &[f64], d: Dimension) -> Result<RotationMessage, MdrError> {
    let n = d.get();
    for v in [y_hat, u] {
        if v.len() != n {
            return Err(MdrError::Length {
                expected: n,
                got: v.len(),
            });
        }
        check_unit(v)?;
    }
    if d.uses_algebra() {
        return Ok(RotationMessage::Algebra(algebra::mul(u, &algebra::conj(y_hat))));
    }
    let diff = y_hat.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if diff < 1e-12 {
        // H(w)·H(w) = I
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        return Ok(RotationMessage::Reflections {
            w1: e1.clone(),
            w2: e1,
        });
    }
    // reflect ŷ onto s·e₁ with s opposite to ŷ₀, so ‖ŷ − s·e₁‖² ≥ 2, then
    // reflect s·e₁ onto u, where ‖s·e₁ − u‖² ≥ 2 − 2/√d
    let s = if y_hat[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut w1 = y_hat.to_vec();
    w1[0] -= s;
    let mut w2: Vec<f64> = u.iter().map(|v| -v).collect();
    w2[0] += s;
    let (n1, n2) = (algebra::norm(&w1), algebra::norm(&w2));
    w1.iter_mut().for_each(|v| *v /= n1);
    w2.iter_mut().for_each(|v| *v /= n2);
    Ok(RotationMessage::Reflections { w1, w2 })
}

fn reflect(w: &[f64], x: &mut [f64]) {
    let dot: f64 = w.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    for (xi, wi) in x.iter_mut().zip(w) {
        *xi -= 2.0 * dot * wi;
    }
}

/// Applies the disclosed map to `x_hat`.
pub fn apply_rotation(msg: &RotationMessage, x_hat: &[f64]) -> Vec<f64> {
    match msg {
        RotationMessage::Algebra(m) => algebra::mul(m, x_hat),
        RotationMessage::Reflections { w1, w2 } => {
            let mut out = x_hat.to_vec();
            reflect(w1, &mut out);
            reflect(w2, &mut out);
            out
        }
    }
}

impl RotationMessage {
    /// Canonical wire form: a little-endian `u64` count followed by that many
    /// little-endian `f64` values (`m`, or `w₁` then `w₂`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let values: Vec<f64> = match self {
            RotationMessage::Algebra(m) => m.clone(),
            RotationMessage::Reflections { w1, w2 } => w1.iter().chain(w2).copied().collect(),
        };
        let mut out = Vec::with_capacity(8 + 8 * values.len());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses one message from the front of `bytes`; returns it and the number
    /// of bytes consumed.
    pub fn from_bytes(bytes: &[u8], d: Dimension) -> Result<(Self, usize), MdrError> {
        let head: [u8; 8] = bytes
            .get(..8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| MdrError::Malformed("missing length prefix".into()))?;
        let count = u64::from_le_bytes(head) as usize;
        let expected = if d.uses_algebra() { d.get() } else { 2 * d.get() };
        if count != expected {
            return Err(MdrError::Malformed(format!(
                "expected {expected} values for d = {d}, prefix says {count}"
            )));
        }
        let body = bytes
            .get(8..8 + 8 * count)
            .ok_or_else(|| MdrError::Malformed("truncated body".into()))?;
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let msg = if d.uses_algebra() {
            RotationMessage::Algebra(values)
        } else {
            let (a, b) = values.split_at(d.get());
            RotationMessage::Reflections {
                w1: a.to_vec(),
                w2: b.to_vec(),
            }
        };
        Ok((msg, 8 + 8 * count))
    }
}

/// Alice's knowledge of the quantum channel for one block: amplitude gain
/// `t = sqrt(η·T/2)` and noise variance per quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualChannel {
    pub gain: f64,
    pub noise: f64,
}

impl VirtualChannel {
    /// Unit-noise channel with the given per-quadrature SNR for input variance
    /// `variance`.
    pub fn from_snr(snr: f64, variance: f64) -> Self {
        Self {
            gain: (snr / variance).sqrt(),
            noise: 1.0,
        }
    }
}

/// Log-likelihood ratios for one chunk.
///
/// From `y = t·x + z`, the rotated vector is `M(x̂) = (‖y‖·u − M(z))/(t·‖x‖)`;
/// treating `M(z)` as Gaussian with variance `σ²` per component gives
/// `LLR_i = 2·t·‖x‖·‖y‖·r_i/(σ²·√d)`. Positive values favour bit 0.
pub fn compute_llrs(rotated: &[f64], norm_x: f64, norm_y: f64, ch: &VirtualChannel) -> Vec<f64> {
    let d = rotated.len() as f64;
    let gamma = ch.gain * norm_x * norm_y / (2.0 * ch.noise);
    let k = 4.0 * gamma / d.sqrt();
    rotated.iter().map(|r| k * r).collect()
}
