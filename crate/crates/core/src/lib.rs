//! Dynamic channel allocation for 2.4 GHz wireless networks driven by
//! low-cost spectrum analyzers.
//!
//! The crate has two halves. A deterministic simulator ([`rfsim`],
//! [`sensors`]) produces what RSSI analyzers, threshold-flag receivers and
//! built-in Wi-Fi cards would observe. A controller ([`allocator`],
//! [`server`]) harmonizes those observations ([`estimation`]) into
//! per-channel occupancy and moves every access point to its emptiest
//! channel, round after round. [`protocol`] is the line-delimited wire
//! format between the two, [`scenario`] the TOML description of a setup and
//! [`sim`] the in-process harness.
//!
//! ```
//! use chanalloc::{scenario::Scenario, sim::simulate};
//!
//! let report = simulate(Scenario::bundled("single_jammer").unwrap(), 3).unwrap();
//! let ch = report.final_channels["ap-1"];
//! assert!(ch.distance(chanalloc::spectrum::ChannelId::new(6).unwrap()) >= 4);
//! ```

pub mod allocator;
pub mod client;
pub mod estimation;
pub mod protocol;
pub mod rfsim;
pub mod scenario;
pub mod seed;
pub mod sensors;
pub mod server;
pub mod sim;
pub mod spectrum;

pub use allocator::{AllocationState, AllocatorConfig};
pub use protocol::Message;
pub use scenario::Scenario;
pub use sim::{simulate, RunReport};
pub use spectrum::{ChannelId, LevelDbm};
