//! Numerical laboratory for quantum reference frames.
//!
//! Dense finite-dimensional implementations of the phase-shift symmetrisation
//! map, the relativisation map built from a covariant phase POVM of a
//! reference system, the restriction channel, and the experiments that relate
//! "absolute" system descriptions to invariant system-plus-reference ones.

pub mod coherence;
pub mod config;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod povm;
pub mod random;
pub mod relativise;
pub mod symmetry;
pub mod table;

pub use error::{Error, Result};
pub use hilbert::{Operator, SpaceShape, State, Vector, C64};
pub use povm::{ArcPartition, NumberPhasePair, PhasePovm, PovmKind};
pub use relativise::{RelativisationContext, SuperOperator};
pub use symmetry::{CompositeNumber, NumberOperator, PhaseGroup};
