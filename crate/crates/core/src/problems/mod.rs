//! Benchmark systems: double pendulum, Kepler, an anharmonic oscillator, and
//! finite-difference KdV and Camassa–Holm.

pub mod camassa_holm;
pub mod double_pendulum;
pub mod fd;
pub mod kdv;
pub mod kepler;
pub mod oscillator;

pub use camassa_holm::{camassa_holm, default_camassa_holm, default_peakon, peakon};
pub use double_pendulum::{double_pendulum, PendulumMap, Potential};
pub use fd::{PeriodicDifference, PeriodicGrid};
pub use kdv::{default_kdv, default_soliton, kdv, soliton};
pub use kepler::kepler;
pub use oscillator::oscillator;
