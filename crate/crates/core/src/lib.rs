//! Multi-objective planning of wireless mesh backbones.
//!
//! Given candidate sites on a grid and scattered demand points, the crate
//! builds feasible networks (AP placement, relays, gateways, channelized
//! links and routed flows) and searches the cost / coverage / balance
//! trade-off with a particle-swarm optimizer. A brute-force enumerator is
//! included for checking results on tiny instances.

pub mod construct;
pub mod error;
pub mod flow;
pub mod instance;
pub mod model;
pub mod mopso;
pub mod oracle;

pub use error::{Error, Result};
