pub mod cgst;
pub mod error;
pub mod grw;
pub mod lattice;
pub mod random_field;
pub mod reactive;
pub mod richards;
pub mod scenario;

pub use error::{Error, Result};
pub use grw::{Algorithm, SplitMode};
pub use lattice::{BoundarySpec, LatticeSpec, ParticleField, SideRule};
pub use scenario::{ScenarioConfig, ScenarioId};
