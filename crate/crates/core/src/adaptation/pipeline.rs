//! Reverse reconciliation of one quantum block, frame by frame.
//!
//! Bob draws key bits, encodes them and hides each `d`-bit piece of the
//! codeword in a rotation of a chunk of his measurements. Alice applies the
//! rotations to her matching chunks, decodes, and keeps a frame only if its
//! hash matches Bob's.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AdaptationError;
use crate::fso_channel::QuantumBlock;
use crate::ldpc::{Decoder, DecoderConfig, ExpandedCode, Digest, RateAdaptation, ToeplitzHash};
use crate::mdr::{
    apply_rotation, chunk_and_normalize, compute_llrs, encode_rotation, spherical_word, Dimension, RotationMessage,
    VirtualChannel,
};
use crate::rng::{derive_seed, BitSource, SeededQrng};

use super::table::assemble_llrs;

/// Parameters the two sides agree on before reconciling a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    /// Alice's estimate of the channel, used for her LLRs.
    pub channel: VirtualChannel,
    /// Seed of Bob's random bit source.
    pub qrng_seed: u64,
    /// Seed of the public verification hash.
    pub hash_seed: u64,
    pub decoder: DecoderConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub index: usize,
    pub converged: bool,
    /// Decoded and verified; only these frames contribute key bits.
    pub success: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub beta_used: Option<f64>,
    pub fer_predicted: Option<f64>,
    pub skr_achieved: Option<f64>,
    pub frames: Vec<FrameOutcome>,
    pub frames_total: usize,
    pub frames_failed: usize,
    /// Bob's key bits from verified frames, in frame order.
    pub key_bob: Vec<u8>,
    /// Alice's corrected key bits from verified frames.
    pub key_alice: Vec<u8>,
}

impl BlockOutcome {
    pub fn fer_empirical(&self) -> f64 {
        self.frames_failed as f64 / self.frames_total as f64
    }

    /// Records the operating point and `(1 − FER_emp)(β·I_AB − χ_BE)`.
    pub fn with_operating_point(mut self, beta: f64, fer_predicted: f64, i_ab: f64, chi_be: f64) -> Self {
        self.beta_used = Some(beta);
        self.fer_predicted = Some(fer_predicted);
        self.skr_achieved = Some((1.0 - self.fer_empirical()) * (beta * i_ab - chi_be));
        self
    }
}

/// Geometry of frames inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    /// Code bits sent per frame, `N − p − s`.
    pub n_sent: usize,
    pub chunks: usize,
    /// Real quadrature values consumed per frame, `chunks·d`.
    pub reals: usize,
}

impl FrameLayout {
    /// The last chunk is padded with random bits when `d` does not divide
    /// `N − p − s`.
    pub fn new(code: &ExpandedCode, ra: &RateAdaptation, d: Dimension) -> Self {
        let n_sent = ra.n_sent(code.n());
        let chunks = n_sent.div_ceil(d.get());
        Self {
            n_sent,
            chunks,
            reals: chunks * d.get(),
        }
    }

    pub fn frames_in(&self, reals: usize) -> usize {
        reals / self.reals
    }
}

/// Which information bits are shortened, by position in the info vector.
fn shortened_info_mask(code: &ExpandedCode, ra: &RateAdaptation) -> Vec<bool> {
    let tx = code.transmitted_positions();
    let info = code.info_positions();
    let mut slot = vec![usize::MAX; code.n_vars()];
    for (k, &v) in info.iter().enumerate() {
        slot[v] = k;
    }
    let mut mask = vec![false; info.len()];
    for &t in &ra.shortened {
        mask[slot[tx[t]]] = true;
    }
    mask
}

/// Bob's information word for `frame`: QRNG bits with shortened positions
/// zeroed, plus the padding bits of the last chunk.
fn bob_bits(qrng_seed: u64, frame: usize, k: usize, pad: usize, mask: &[bool]) -> (Vec<u8>, Vec<u8>) {
    let mut qrng = SeededQrng::new(derive_seed(qrng_seed, &[frame as u64]));
    let mut info = vec![0u8; k];
    qrng.fill_bits(&mut info);
    for (b, &m) in info.iter_mut().zip(mask) {
        if m {
            *b = 0;
        }
    }
    let mut padding = vec![0u8; pad];
    qrng.fill_bits(&mut padding);
    (info, padding)
}

fn key_bits(info: &[u8], mask: &[bool]) -> Vec<u8> {
    info.iter().zip(mask).filter(|(_, &m)| !m).map(|(&b, _)| b).collect()
}

/// Bob's key bits for `frame` (information bits minus shortened ones).
pub fn bob_key_bits(code: &ExpandedCode, ra: &RateAdaptation, qrng_seed: u64, frame: usize) -> Vec<u8> {
    let mask = shortened_info_mask(code, ra);
    key_bits(&bob_bits(qrng_seed, frame, code.k(), 0, &mask).0, &mask)
}

/// What crosses the classical channel for one frame.
struct BobMessage {
    rotations: Vec<(RotationMessage, f64)>,
    digest: Digest,
}

/// Reconciles every frame that fits in `b`.
///
/// Frames are independent: each uses its own slice of the block and its own
/// bit-source stream, and results are gathered in frame order.
pub fn reconcile_block(
    b: &QuantumBlock,
    code: &ExpandedCode,
    ra: &RateAdaptation,
    d: Dimension,
    roles: &Roles,
) -> Result<BlockOutcome, AdaptationError> {
    if b.x.len() != b.y.len() {
        return Err(AdaptationError::Config("x and y lengths differ".into()));
    }
    let layout = FrameLayout::new(code, ra, d);
    let n_frames = layout.frames_in(b.y.len());
    if n_frames == 0 {
        return Err(AdaptationError::BlockTooShort {
            needed: layout.reals,
            got: b.y.len(),
        });
    }
    let n = code.n();
    let tx = code.transmitted_positions();
    let info_pos = code.info_positions();
    let mask = shortened_info_mask(code, ra);
    let key_len = mask.iter().filter(|&&m| !m).count();
    let hash = ToeplitzHash::new(key_len, roles.hash_seed);
    let pad = layout.reals - layout.n_sent;
    // transmitted indices that go over the channel, in order
    let sent_vars: Vec<usize> = {
        let (mut pi, mut si) = (0, 0);
        let mut v = Vec::with_capacity(layout.n_sent);
        for (t, &var) in tx.iter().enumerate() {
            if si < ra.shortened.len() && ra.shortened[si] == t {
                si += 1;
            } else if pi < ra.punctured.len() && ra.punctured[pi] == t {
                pi += 1;
            } else {
                v.push(var);
            }
        }
        v
    };
    let decoder = Decoder::new(code, ra, roles.decoder);

    let results: Vec<Result<(FrameOutcome, Vec<u8>, Vec<u8>), AdaptationError>> = (0..n_frames)
        .into_par_iter()
        .map_init(
            || decoder.clone(),
            |dec, f| {
                let span = f * layout.reals..(f + 1) * layout.reals;

                // Bob
                let (info, padding) = bob_bits(roles.qrng_seed, f, code.k(), pad, &mask);
                let word = code.encode(&info)?;
                let mut bits: Vec<u8> = sent_vars.iter().map(|&v| word[v]).collect();
                bits.extend_from_slice(&padding);
                let ys = chunk_and_normalize(&b.y[span.clone()], d)?;
                let rotations = ys
                    .iter()
                    .zip(bits.chunks_exact(d.get()))
                    .map(|(c, piece)| Ok((encode_rotation(&c.unit, &spherical_word(piece), d)?, c.norm)))
                    .collect::<Result<Vec<_>, AdaptationError>>()?;
                let s = key_bits(&info, &mask);
                let msg = BobMessage {
                    rotations,
                    digest: hash.digest(&s)?,
                };

                // Alice
                let xs = chunk_and_normalize(&b.x[span], d)?;
                let mut llrs = Vec::with_capacity(layout.reals);
                for (c, (rot, norm_y)) in xs.iter().zip(&msg.rotations) {
                    llrs.extend(compute_llrs(&apply_rotation(rot, &c.unit), c.norm, *norm_y, &roles.channel));
                }
                llrs.truncate(layout.n_sent);
                let r = dec.decode(&assemble_llrs(ra, n, &llrs))?;
                let info_hat: Vec<u8> = info_pos.iter().map(|&v| r.hard_bits[v]).collect();
                let s_hat = key_bits(&info_hat, &mask);
                let matches = hash.digest(&s_hat)? == msg.digest;
                let success = r.converged && matches;
                Ok((
                    FrameOutcome {
                        index: f,
                        converged: r.converged,
                        success,
                        iterations: r.iterations_used,
                    },
                    s,
                    s_hat,
                ))
            },
        )
        .collect();

    let mut frames = Vec::with_capacity(n_frames);
    let mut key_bob = Vec::new();
    let mut key_alice = Vec::new();
    for r in results {
        let (outcome, s, s_hat) = r?;
        if outcome.success {
            key_bob.extend_from_slice(&s);
            key_alice.extend_from_slice(&s_hat);
        }
        frames.push(outcome);
    }
    let frames_failed = frames.iter().filter(|f| !f.success).count();
    Ok(BlockOutcome {
        beta_used: None,
        fer_predicted: None,
        skr_achieved: None,
        frames_total: n_frames,
        frames_failed,
        frames,
        key_bob,
        key_alice,
    })
}
