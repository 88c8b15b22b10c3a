//! Order and rack allocation for pickers in a robotic mobile fulfilment
//! system, rack sequencing at a picker, and exhaustive oracles for checking
//! both on small instances.

pub mod allocation;
pub mod bench;
#[doc(hidden)]
pub mod fixtures;
pub mod gen;
pub mod heuristics;
pub mod instance;
pub mod io;
pub mod oracles;
pub mod plan;
pub mod sequencing;
pub mod verify;

pub use allocation::{solve_allocation, verify_allocation, Allocation, AllocationOptions, AllocationResult, Status};
pub use instance::{units, Instance, Units};
pub use sequencing::{solve_sequencing, SequenceSolution, SequencingInstance, SequencingMode};
pub use verify::{verify_sequence, VerifyReport};
