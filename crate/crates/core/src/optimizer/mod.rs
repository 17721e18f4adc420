//! Candidate pattern families, their energy ranking, and stochastic
//! minimization over voxel fields.

mod anneal;
mod candidate;
mod compare;

pub use anneal::{anneal, anneal_chains, AnnealOutcome, AnnealSchedule, ProposalMix, TraceRow};
pub use candidate::{make_candidate, CandidateSpec, LatticeKind};
pub use compare::{compare_candidates, CandidateRow, Functional};
