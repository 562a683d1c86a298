//! Random operator models, orbits, memory-loss detection and exact sampling
//! of the invariant measure.

mod coupling;
mod invariant;
mod law;
mod trajectory;

pub use coupling::{coupling_time, detect_coupling, CouplingStats};
pub use invariant::{
    default_invariant_depth, forward_distance_to_invariant, sample_invariant,
    sample_invariant_many, stationarity_test, InvariantSample, StationarityReport,
};
pub use law::{parse_law, parse_probability, Noise, OperatorLaw, SupportPoint};
pub use trajectory::{iterate, Trajectory, Walker};
