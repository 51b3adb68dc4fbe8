//! Continuously calibrated learning dynamics on finite games.

pub mod game;
pub mod response;
pub mod run;

pub use game::GameSpec;
pub use response::{softmax_response, SoftmaxResponse};
pub use run::{
    engine_weights, mixed_gap_check, ne_fraction, run_dynamics, DynamicsAborted, DynamicsOptions, DynamicsScores, MixedGap,
    NeFraction, Trajectory,
};
