//! Outgoing solvers: fixed points, minimax distributions, δ-local distributions.

pub mod almost_det;
pub mod caratheodory;
pub mod certificate;
pub mod field;
pub mod fixed_point;
pub mod minimax;
pub mod nash;

pub use almost_det::{outgoing_almost_det, AlmostDetSolution};
pub use caratheodory::{caratheodory_reduce, Reduction};
pub use certificate::{point_certificate, point_violation, OutgoingCertificate, Verification};
pub use field::{AffineField, FnField, TentInterpolant, VectorField};
pub use fixed_point::{outgoing_fixed_point, FixedPointOptions, FixedPointSolution, SolverStage};
pub use minimax::{outgoing_minimax, MaximizerSet, MinimaxOptions, MinimaxSolution};
pub use nash::{nash_via_outgoing, NashSolution};
