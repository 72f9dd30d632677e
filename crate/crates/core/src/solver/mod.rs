//! Damped Newton iteration over banded systems.

mod banded;
mod newton;

pub use banded::{banded_solve, BandedLu, BandedMatrix};
pub use newton::{newton_solve, Damping, NewtonOptions, NewtonReport};
