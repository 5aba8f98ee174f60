//! Monte Carlo β–FER table and per-block β selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AdaptationError;
use crate::constellation::Modulation;
use crate::ldpc::{choose_sp, Decoder, DecoderConfig, ExpandedCode, LdpcError, RateAdaptation};
use crate::mdr::fidelity::{biawgn_llrs, virtual_channel_llrs};
use crate::mdr::Dimension;
use crate::rng::derive_seed;
use crate::security::rate_for_efficiency;
use crate::stats::{isotonic_non_decreasing, wilson_interval, Z95};

/// Where a frame's soft information comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrModel {
    /// The virtual channel of reconciliation in dimension `d`.
    Mdr(Dimension),
    /// BPSK over real AWGN at the same SNR, bypassing the rotation.
    BiAwgn,
}

impl LlrModel {
    pub fn label(&self) -> String {
        match self {
            LlrModel::Mdr(d) => format!("d={d}"),
            LlrModel::BiAwgn => "bi-awgn".into(),
        }
    }

    /// `n` sign-corrected LLRs (the all-zero word) at per-quadrature `snr`.
    pub fn sample(&self, m: &Modulation, snr: f64, n: usize, seed: u64) -> Vec<f64> {
        match *self {
            LlrModel::Mdr(d) => {
                let mut v = virtual_channel_llrs(d, m, snr, n.div_ceil(d.get()), seed);
                v.truncate(n);
                v
            }
            LlrModel::BiAwgn => biawgn_llrs(snr, n, seed),
        }
    }
}

/// Places the channel LLRs of the sent bits into the decoder's input vector,
/// with zeros at punctured positions.
pub fn assemble_llrs(ra: &RateAdaptation, n: usize, sent: &[f64]) -> Vec<f64> {
    debug_assert_eq!(sent.len(), ra.n_sent(n));
    let mut out = Vec::with_capacity(ra.n_llrs(n));
    let (mut pi, mut si, mut next) = (0, 0, 0);
    for t in 0..n {
        if si < ra.shortened.len() && ra.shortened[si] == t {
            si += 1;
        } else if pi < ra.punctured.len() && ra.punctured[pi] == t {
            pi += 1;
            out.push(0.0);
        } else {
            out.push(sent[next]);
            next += 1;
        }
    }
    out
}

/// One (SNR, β) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FerCell {
    pub snr: f64,
    pub beta: f64,
    /// Code rate per real quadrature, `β·I_AB/2`.
    pub rate: f64,
    /// False when the rate cannot be reached by puncturing or shortening.
    pub available: bool,
    pub trials: u64,
    pub failures: u64,
    pub fer_raw: f64,
    /// After the isotonic pass over β.
    pub fer: f64,
    /// Wilson 95% half-width of the raw estimate.
    pub fer_ci: f64,
    pub mean_iterations: f64,
}

impl FerCell {
    fn unavailable(snr: f64, beta: f64, rate: f64) -> Self {
        Self {
            snr,
            beta,
            rate,
            available: false,
            trials: 0,
            failures: 0,
            fer_raw: 1.0,
            fer: 1.0,
            fer_ci: 0.0,
            mean_iterations: 0.0,
        }
    }
}

/// Frames failed out of `trials` at code rate `rate`.
///
/// Trial `i` draws its LLRs from `derive_seed(seed, [i])`; results do not
/// depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn measure_fer(
    code: &ExpandedCode,
    model: LlrModel,
    m: &Modulation,
    snr: f64,
    rate: f64,
    trials: u64,
    cfg: DecoderConfig,
    seed: u64,
) -> Result<(RateAdaptation, u64, f64), LdpcError> {
    let ra = choose_sp(rate, code)?;
    let decoder = Decoder::new(code, &ra, cfg);
    let n = code.n();
    let n_sent = ra.n_sent(n);
    let outcomes: Vec<(bool, usize)> = (0..trials)
        .into_par_iter()
        .map_init(
            || decoder.clone(),
            |dec, i| {
                let sent = model.sample(m, snr, n_sent, derive_seed(seed, &[i]));
                let r = dec.decode(&assemble_llrs(&ra, n, &sent)).expect("length matches");
                (r.converged && r.hard_bits.iter().all(|&b| b == 0), r.iterations_used)
            },
        )
        .collect();
    let failures = outcomes.iter().filter(|o| !o.0).count() as u64;
    let iters = outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / trials.max(1) as f64;
    Ok((ra, failures, iters))
}

fn half_width(failures: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson_interval(failures, trials, Z95);
    0.5 * (hi - lo)
}

/// Identifies the code a table was measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub lift: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
}

impl CodeSpec {
    pub fn of(code: &ExpandedCode, seed: u64) -> Self {
        Self {
            lift: code.lift,
            seed,
            n: code.n(),
            k: code.k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFerTable {
    pub model: LlrModel,
    pub code: CodeSpec,
    pub decoder: DecoderConfig,
    pub snr_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Row-major: `cells[i·beta_grid.len() + j]` is SNR `i`, β `j`.
    pub cells: Vec<FerCell>,
}

/// Parameters of a table measurement.
#[derive(Debug, Clone)]
pub struct TableSpec<'a> {
    pub model: LlrModel,
    pub modulation: &'a Modulation,
    pub snr_grid: &'a [f64],
    pub beta_grid: &'a [f64],
    pub trials: u64,
    pub decoder: DecoderConfig,
    pub seed: u64,
}

/// Measures every (SNR, β) cell and makes each SNR row non-decreasing in β.
///
/// The rate of a cell is `β·I_AB(snr)/2` with `I_AB` the modulation's mutual
/// information; cells whose rate cannot be reached are kept but marked
/// unavailable.
pub fn build_table(code: &ExpandedCode, code_seed: u64, spec: &TableSpec) -> Result<BetaFerTable, AdaptationError> {
    if spec.snr_grid.is_empty() || spec.beta_grid.is_empty() {
        return Err(AdaptationError::Config("table grids must be non-empty".into()));
    }
    if spec.trials == 0 {
        return Err(AdaptationError::Config("trials must be positive".into()));
    }
    let mut cells = Vec::with_capacity(spec.snr_grid.len() * spec.beta_grid.len());
    for (i, &snr) in spec.snr_grid.iter().enumerate() {
        let i_ab = spec.modulation.mutual_information(snr);
        let mut row = Vec::with_capacity(spec.beta_grid.len());
        for (j, &beta) in spec.beta_grid.iter().enumerate() {
            let rate = rate_for_efficiency(beta, i_ab);
            let seed = derive_seed(spec.seed, &[i as u64, j as u64]);
            match measure_fer(code, spec.model, spec.modulation, snr, rate, spec.trials, spec.decoder, seed) {
                Ok((_, failures, iters)) => {
                    let fer = failures as f64 / spec.trials as f64;
                    row.push(FerCell {
                        snr,
                        beta,
                        rate,
                        available: true,
                        trials: spec.trials,
                        failures,
                        fer_raw: fer,
                        fer,
                        fer_ci: half_width(failures, spec.trials),
                        mean_iterations: iters,
                    });
                }
                Err(LdpcError::InfeasibleRate { .. }) | Err(LdpcError::InvalidRate(_)) => {
                    row.push(FerCell::unavailable(snr, beta, rate))
                }
                Err(e) => return Err(e.into()),
            }
        }
        smooth_row(&mut row);
        cells.extend(row);
    }
    Ok(BetaFerTable {
        model: spec.model,
        code: CodeSpec::of(code, code_seed),
        decoder: spec.decoder,
        snr_grid: spec.snr_grid.to_vec(),
        beta_grid: spec.beta_grid.to_vec(),
        cells,
    })
}

/// Isotonic regression over the available cells of one row, weighted by
/// trial counts.
fn smooth_row(row: &mut [FerCell]) {
    let idx: Vec<usize> = (0..row.len()).filter(|&j| row[j].available).collect();
    let values: Vec<f64> = idx.iter().map(|&j| row[j].fer_raw).collect();
    let weights: Vec<f64> = idx.iter().map(|&j| row[j].trials as f64).collect();
    for (&j, v) in idx.iter().zip(isotonic_non_decreasing(&values, &weights)) {
        row[j].fer = v.clamp(0.0, 1.0);
    }
}

/// How FER is read off the table for a block whose SNR falls between rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrLookup {
    #[default]
    Nearest,
    /// Linear in dB of SNR and in log FER between the bracketing rows.
    LogFer,
}

/// FER floor used when interpolating in log FER.
const LOG_FER_FLOOR: f64 = 1e-6;

impl BetaFerTable {
    pub fn cell(&self, snr_idx: usize, beta_idx: usize) -> &FerCell {
        &self.cells[snr_idx * self.beta_grid.len() + beta_idx]
    }

    pub fn row(&self, snr_idx: usize) -> &[FerCell] {
        let w = self.beta_grid.len();
        &self.cells[snr_idx * w..(snr_idx + 1) * w]
    }

    /// Index of the grid SNR closest to `snr` in dB.
    pub fn nearest_snr(&self, snr: f64) -> usize {
        let db = |s: f64| 10.0 * s.max(f64::MIN_POSITIVE).log10();
        let target = db(snr);
        let mut best = 0;
        for (i, &s) in self.snr_grid.iter().enumerate() {
            if (db(s) - target).abs() < (db(self.snr_grid[best]) - target).abs() {
                best = i;
            }
        }
        best
    }

    /// `(β, FER)` candidates for a block at `snr`; unavailable cells omitted.
    pub fn candidates(&self, snr: f64, lookup: SnrLookup) -> Vec<(f64, f64)> {
        let near = self.nearest_snr(snr);
        let other = match lookup {
            SnrLookup::Nearest => None,
            SnrLookup::LogFer => self.bracket(snr),
        };
        (0..self.beta_grid.len())
            .filter_map(|j| match other {
                None => {
                    let c = self.cell(near, j);
                    c.available.then_some((c.beta, c.fer))
                }
                Some((a, b, w)) => {
                    let (ca, cb) = (self.cell(a, j), self.cell(b, j));
                    if !(ca.available && cb.available) {
                        return None;
                    }
                    let la = ca.fer.max(LOG_FER_FLOOR).ln();
                    let lb = cb.fer.max(LOG_FER_FLOOR).ln();
                    let fer = ((1.0 - w) * la + w * lb).exp();
                    let fer = if fer <= LOG_FER_FLOOR { 0.0 } else { fer.min(1.0) };
                    Some((ca.beta, fer))
                }
            })
            .collect()
    }

    /// Rows bracketing `snr` and the dB weight of the second; `None` outside
    /// the grid.
    fn bracket(&self, snr: f64) -> Option<(usize, usize, f64)> {
        let mut order: Vec<usize> = (0..self.snr_grid.len()).collect();
        order.sort_by(|&a, &b| self.snr_grid[a].total_cmp(&self.snr_grid[b]));
        order.windows(2).find_map(|w| {
            let (lo, hi) = (self.snr_grid[w[0]], self.snr_grid[w[1]]);
            (snr >= lo && snr <= hi && hi > lo).then(|| {
                let t = (snr / lo).log10() / (hi / lo).log10();
                (w[0], w[1], t)
            })
        })
    }

    /// FER at `β` for a block at `snr`, or `None` if the cell is missing.
    pub fn fer_at(&self, snr: f64, beta: f64, lookup: SnrLookup) -> Option<f64> {
        self.candidates(snr, lookup)
            .into_iter()
            .find(|&(b, _)| (b - beta).abs() < 1e-9)
            .map(|(_, f)| f)
    }
}

/// Outcome of the per-block choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Use { beta: f64, fer: f64, skr: f64 },
    /// No row yields a positive key rate.
    Skip,
}

/// Picks the `(β, FER)` pair maximizing `(1 − FER)(β·I_AB − χ_BE)` among
/// `candidates`; ties go to the lower β.
pub fn select_from(candidates: &[(f64, f64)], i_ab: f64, chi_be: f64) -> Selection {
    let mut best: Option<(f64, f64, f64)> = None;
    for &(beta, fer) in candidates {
        let skr = (1.0 - fer) * (beta * i_ab - chi_be);
        let better = match best {
            None => true,
            Some((b, _, s)) => skr > s || (skr == s && beta < b),
        };
        if better {
            best = Some((beta, fer, skr));
        }
    }
    match best {
        Some((beta, fer, skr)) if skr > 0.0 => Selection::Use { beta, fer, skr },
        _ => Selection::Skip,
    }
}

/// Per-block adaptive β from the table row at the block's SNR.
pub fn select_beta(table: &BetaFerTable, snr: f64, i_ab: f64, chi_be: f64, lookup: SnrLookup) -> Selection {
    select_from(&table.candidates(snr, lookup), i_ab, chi_be)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{expand_protograph, GirthTarget, Protograph};

    fn toy_table(rows: &[(f64, f64)]) -> BetaFerTable {
        BetaFerTable {
            model: LlrModel::BiAwgn,
            code: CodeSpec {
                lift: 1,
                seed: 0,
                n: 10,
                k: 2,
            },
            decoder: DecoderConfig::default(),
            snr_grid: vec![0.5],
            beta_grid: rows.iter().map(|r| r.0).collect(),
            cells: rows
                .iter()
                .map(|&(beta, fer)| FerCell {
                    snr: 0.5,
                    beta,
                    rate: 0.0,
                    available: true,
                    trials: 100,
                    failures: (fer * 100.0) as u64,
                    fer_raw: fer,
                    fer,
                    fer_ci: 0.01,
                    mean_iterations: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn two_row_example() {
        let t = toy_table(&[(0.90, 0.05), (0.95, 0.5)]);
        match select_beta(&t, 0.5, 0.3, 0.2, SnrLookup::Nearest) {
            Selection::Use { beta, fer, skr } => {
                assert_eq!((beta, fer), (0.90, 0.05));
                assert!((skr - 0.95 * 0.07).abs() < 1e-12);
            }
            Selection::Skip => panic!("expected a row"),
        }
    }

    #[test]
    fn single_row_and_skip() {
        let t = toy_table(&[(0.9, 0.2)]);
        assert!(matches!(select_beta(&t, 0.5, 0.3, 0.2, SnrLookup::Nearest), Selection::Use { beta, .. } if beta == 0.9));
        assert_eq!(select_beta(&t, 0.5, 0.3, 0.29, SnrLookup::Nearest), Selection::Skip);
        let dead = toy_table(&[(0.9, 1.0)]);
        assert_eq!(select_beta(&dead, 0.5, 0.3, 0.1, SnrLookup::Nearest), Selection::Skip);
    }

    #[test]
    fn ties_go_to_lower_beta() {
        // (1 − f)(β·1 − 0) equal for both rows
        let c = [(0.8, 0.0), (1.0, 0.2)];
        assert!(matches!(select_from(&c, 1.0, 0.0), Selection::Use { beta, .. } if beta == 0.8));
        let c = [(1.0, 0.2), (0.8, 0.0)];
        assert!(matches!(select_from(&c, 1.0, 0.0), Selection::Use { beta, .. } if beta == 0.8));
    }

    #[test]
    fn nearest_snr_is_in_db() {
        let mut t = toy_table(&[(0.9, 0.1)]);
        t.snr_grid = vec![0.1, 1.0];
        t.cells.push(FerCell { snr: 1.0, ..t.cells[0].clone() });
        // 0.3 is nearer 1.0 on a linear scale but nearer 0.1 in dB
        assert_eq!(t.nearest_snr(0.3), 0);
        assert_eq!(t.nearest_snr(0.33), 1);
    }

    #[test]
    fn log_fer_interpolation_stays_between_rows() {
        let mut t = toy_table(&[(0.9, 0.01)]);
        t.snr_grid = vec![0.4, 0.6];
        t.cells.push(FerCell { snr: 0.6, fer: 0.001, ..t.cells[0].clone() });
        t.cells[0].fer = 0.1;
        let f = t.fer_at(0.5, 0.9, SnrLookup::LogFer).unwrap();
        assert!(f < 0.1 && f > 0.001, "{f}");
        assert_eq!(t.fer_at(0.45, 0.9, SnrLookup::Nearest), Some(0.1));
        // outside the grid the nearest row is used
        assert_eq!(t.fer_at(0.9, 0.9, SnrLookup::LogFer), Some(0.001));
    }

    #[test]
    fn assemble_places_zeros_at_punctured() {
        let ra = RateAdaptation {
            n_punctured: 2,
            n_shortened: 1,
            punctured: vec![1, 4],
            shortened: vec![2],
        };
        let v = assemble_llrs(&ra, 6, &[1.0, 2.0, 3.0]);
        assert_eq!(v, vec![1.0, 0.0, 2.0, 0.0, 3.0]);
    }

    #[test]
    fn small_table_is_monotone_with_unavailable_cells() {
        let code = expand_protograph(&Protograph::default_code(), 128, 1, GirthTarget::Six).unwrap();
        let m = Modulation::Gaussian { variance: 7.44 };
        let snr = 0.5139;
        // β = 5 asks for rate ≈ 1.5: unreachable
        let betas = [0.3, 0.6, 0.9, 1.0, 5.0];
        let spec = TableSpec {
            model: LlrModel::Mdr(Dimension::new(8).unwrap()),
            modulation: &m,
            snr_grid: &[snr],
            beta_grid: &betas,
            trials: 40,
            decoder: DecoderConfig::sum_product(40),
            seed: 3,
        };
        let t = build_table(&code, 1, &spec).unwrap();
        assert!(!t.cell(0, 4).available);
        let row: Vec<f64> = t.row(0)[..4].iter().map(|c| c.fer).collect();
        assert!(row.windows(2).all(|w| w[0] <= w[1]), "{row:?}");
        assert!(t.row(0)[..4].iter().all(|c| c.fer_ci > 0.0 && (0.0..=1.0).contains(&c.fer)));
        assert!(t.cell(0, 3).fer > 0.9, "{:?}", t.cell(0, 3));
        assert_eq!(t.cell(0, 0).fer, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn selection_dominates_every_fixed_candidate(
                fers in proptest::collection::vec(0.0f64..1.0, 1..16),
                i_ab in 0.1f64..2.0,
                chi in 0.0f64..1.5,
            ) {
                let cands: Vec<(f64, f64)> = fers
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| (0.85 + 0.01 * j as f64, f))
                    .collect();
                let best = match select_from(&cands, i_ab, chi) {
                    Selection::Use { skr, .. } => skr,
                    Selection::Skip => 0.0,
                };
                for &(beta, fer) in &cands {
                    let fixed = ((1.0 - fer) * (beta * i_ab - chi)).max(0.0);
                    prop_assert!(best >= fixed);
                }
            }
        }
    }
}
