//! Packet scheduling inside one user's context.

pub mod decomposed;
pub mod order;
pub mod simple;

pub use decomposed::{
    decomposed_schedule, DecomposedOutcome, DuContinuation, DuTables, NoContinuation, RoundParams, RoundPrice,
};
pub use order::{dependency_order_check, Dag};
pub use simple::{edf_schedule, fifo_schedule, hdf_schedule, SimpleScheduler};
