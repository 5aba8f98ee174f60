//! β–FER lookup table, per-block β selection and the end-to-end
//! reconciliation pipeline.
//!
//! The table is conditioned on the per-quadrature SNR of a block, not on the
//! turbulence setting that produced it.

mod campaign;
mod pipeline;
mod table;

use thiserror::Error;

use crate::fso_channel::ChannelError;
use crate::ldpc::LdpcError;
use crate::mdr::MdrError;
use crate::security::SecurityError;

pub use campaign::{
    run_campaign, CampaignConfig, CampaignReport, CampaignRow, EmpiricalCheck, Mode, SettingSummary, CSV_HEADER,
    SUMMARY_HEADER,
};
pub use pipeline::{bob_key_bits, reconcile_block, BlockOutcome, FrameLayout, FrameOutcome, Roles};
pub use table::{
    assemble_llrs, build_table, measure_fer, select_beta, select_from, BetaFerTable, CodeSpec, FerCell, LlrModel,
    Selection, SnrLookup, TableSpec,
};

#[derive(Debug, Error)]
pub enum AdaptationError {
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
    #[error(transparent)]
    Mdr(#[from] MdrError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error("block holds {got} quadrature values, one frame needs {needed}")]
    BlockTooShort { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
