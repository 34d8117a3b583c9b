//! Blind super-resolution active-user detection and channel estimation for
//! crowded massive-MIMO random access.
//!
//! Pipeline: [`scene`] synthesizes partially observed uplink snapshots,
//! [`dualsdp`] solves the dual atomic-norm SDP, [`spectrum`] localizes
//! angles on the dual polynomial, [`cluster`] groups angles into users,
//! [`als`] recovers gains and data, and [`metrics`] scores the result.
//! [`pipeline`] chains the stages and runs seeded Monte-Carlo sweeps.

pub mod als;
pub mod cluster;
pub mod dualsdp;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod scene;
pub mod serde_cx;
pub mod spectrum;

pub use error::{Error, Result};
