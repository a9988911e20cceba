//! Configuration, orchestration and verification for the delayed
//! KdV-Burgers solver. The `kdvb` binary exposes `simulate`, `certify`,
//! `verify` and `compare-oracle` on top of this library.

pub mod acceptance;
pub mod config;
pub mod pipeline;
pub mod presets;
