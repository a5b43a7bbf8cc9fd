//! Difference matrices, local enhancement and sequence search.

mod difference;
mod enhance;
pub mod io;
mod sad;
mod search;

pub use difference::{code_difference, difference_matrix, DifferenceMatrix, Metric};
pub use enhance::enhance_local;
pub use sad::{sad_difference, sad_feature};
pub use search::{best_match, detect_loops, route_row, sequence_score, MatchResult, SeqParams};
