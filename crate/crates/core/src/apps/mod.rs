//! Applications built on the sorter: the self-time-reversal diagnostic, the
//! nonlinear-sign gate, the Bell-analyzer table and parameter sweeps.

pub mod bell;
pub mod ns_gate;
pub mod sweeps;
pub mod time_reversal;

pub use bell::{bell_table, BellRow, BellState};
pub use ns_gate::{ns_closed_form, ns_gate, ns_gate_with_tolerance, NsGateResult};
pub use time_reversal::{mode_reversal_overlap, second_scatter_overlap, time_reversal_fit, TimeReversalFit};
