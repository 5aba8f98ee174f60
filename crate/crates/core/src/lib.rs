pub mod constellation;
pub mod rng;
pub mod stats;
pub mod security;
pub mod fso_channel;
pub mod mdr;
pub mod ldpc;
pub mod adaptation;
