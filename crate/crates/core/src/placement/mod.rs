//! Pose placement by annealing grouped constraint costs over free spaces.

pub mod anneal;
pub mod cost;
pub mod free_space;
pub mod groups;
pub mod pose;

pub use anneal::{
    anneal_group, group_seed, optimize_keyframe, propose_move, AnnealSchedule, GroupOutcome, GroupReport,
    KeyframePlacement, PlacedPose, ProposalSigmas, ScheduleError,
};
pub use cost::{acceptance_probability, collision_cost, metropolis_accept, positional_cost, rotational_cost};
pub use free_space::{free_space_for, generate_sitting_points, FreeSpace, PlacementError, SittingPoint};
pub use groups::{build_groups, group_cost, ActivityGroup, Anchor, GroupMember, Term};
pub use pose::CharacterPose;
