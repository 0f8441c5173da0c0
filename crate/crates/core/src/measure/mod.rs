//! Coincidence counts: ideal statistics, finite-shot sampling and readout
//! confusion.

mod confusion;
mod counts;

pub use confusion::{apply_confusion, mitigate_confusion, mitigate_confusion_with, ConfusionMatrix, Mitigation};
pub use counts::{ideal_counts, parse_bitstring, sample_counts, to_bitstring, CountsTensor};
