//! Hours-of-service analysis for tachograph activity logs.
//!
//! The crate covers the whole pipeline: parsing raw driver logs, recognising
//! them against the EU 561/2006 hours-of-service tree, explaining illegal
//! regions, embedding driving days as documents, clustering them, and
//! grouping drivers into behaviour profiles.

pub mod activity_log;
pub mod cluster;
pub mod embed;
pub mod encoder;
pub mod error;
pub mod exec;
pub mod gmm;
pub mod infraction;
pub mod labeller;
pub mod pipeline;
pub mod profiler;
pub mod regulation;
pub mod synth;

pub use activity_log::{ActivityKind, ActivityRecord, DriverLog};
pub use error::{Error, Result};
pub use exec::Execution;
pub use labeller::{label_log, ContextSet, LabeledActivity};
pub use regulation::{RegulationParameters, Token};
