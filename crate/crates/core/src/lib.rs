//! Spatio-temporal infected-rate queries over trajectories stored in an
//! ordered key-value store under XZ2T row keys.
//!
//! - [`store::SegmentStore`] ingests trajectories and answers padded range queries.
//! - [`irq::irq`] finds every stored trajectory whose infected rate against a query exceeds `θ`.
//! - [`sft::irjq`] answers the same question for a batch of queries at once.

pub mod bench;
pub mod error;
pub mod input;
pub mod irq;
pub mod metric;
pub mod sft;
pub mod store;
pub mod synth;
pub mod trajectory;
pub mod xz;

pub use error::{Error, Result};
pub use irq::{irq, irq_unpruned, IrqOutcome, LemmaSet};
pub use metric::QueryParams;
pub use sft::{irjq, irjq_unpruned, JoinOutcome, PairKey, SftConfig};
pub use store::{LogBackend, MemoryBackend, SegmentStore, StoreBackend};
pub use trajectory::{Location, Mbr, Segment, SegmentationConfig, TimeRange, Trajectory};
pub use xz::XzConfig;
