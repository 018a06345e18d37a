use super::StanceLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aggregate {
    pub retained: bool,
    pub label: Option<StanceLabel>,
}

/// Majority vote over exactly three annotations. An example is retained when
/// at least two annotators chose the same label.
pub fn aggregate_votes(votes: &[StanceLabel]) -> Result<Aggregate> {
    if votes.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected 3 votes, got {}",
            votes.len()
        )));
    }
    let majority = if votes[0] == votes[1] || votes[0] == votes[2] {
        Some(votes[0])
    } else if votes[1] == votes[2] {
        Some(votes[1])
    } else {
        None
    };
    Ok(Aggregate {
        retained: majority.is_some(),
        label: majority,
    })
}
