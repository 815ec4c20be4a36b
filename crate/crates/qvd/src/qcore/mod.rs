//! Quantum core: complex matrices, density operators, channels and their
//! representations, norms, random channels, and the diamond-distance
//! estimator.

pub mod channel;
pub mod diamond;
pub mod matrix;
pub mod random;
pub mod serial;
pub mod state;

pub use channel::{
    channel_distance_choi, partial_trace, verify_cptp, Channel, CptpReport, Representation,
    Subsystem,
};
pub use diamond::{diamond_brute_force, diamond_distance, diamond_sandwich};
pub use matrix::{
    dagger, hermitian_eigen, hermitize, identity, op_norm, schatten_norm, spectral_apply, trace,
    trace_norm, unvec_col, vec_col, zeros, CMatrix, SchattenP, DEFAULT_TOL, POS_FLOOR,
    ROUND_TRIP_TOL,
};
pub use random::{random_cptp, random_state, random_unitary};
pub use serial::{ChannelJson, MatrixJson};
pub use state::{diag_state, make_density, DensityOperator};
