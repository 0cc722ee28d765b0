//! Finite-dimensional operator-algebra toolkit: unital *-subalgebras of `M_n`,
//! states, completely positive maps, and certified decisions of the
//! independence notions for pairs of subalgebras.

pub mod algebra;
pub mod channels;
pub mod error;
pub mod families;
pub mod independence;
pub mod io;
pub mod numerics;
pub mod states;

pub use algebra::MatrixStarAlgebra;
pub use channels::ChannelMap;
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, Tolerances};
pub use states::AlgebraState;
