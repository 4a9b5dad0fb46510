//! Prioritized replay: the ring buffer, the priority formulas and the
//! diagnostics and snapshot surfaces built on them.

mod buffer;
mod diagnostics;
mod priority;
mod snapshot;
mod transition;

pub use buffer::{PrioritizedBuffer, PriorityRecord, SlotId};
pub use diagnostics::{HistogramBin, PhaseDiagnostics, PriorityDiagnostics, HISTOGRAM_DECADES};
pub use priority::{compute_priority, PriorityParams, Strategy};
pub use snapshot::{MAGIC as SNAPSHOT_MAGIC, VERSION as SNAPSHOT_VERSION};
pub use transition::Transition;
