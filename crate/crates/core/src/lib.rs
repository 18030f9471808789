//! Energy densities of a massless scalar field after a detector-mediated
//! quantum energy teleportation protocol, in 1+1 and 3+1 dimensions.

pub mod cli;
pub mod error;
pub mod field1d;
pub mod lattice_oracle;
pub mod optimizer;
pub mod fieldnd;
pub mod protocol;
pub mod pvquad;
pub mod quad;
pub mod scaling;
pub mod smearing;
pub mod special;

pub use error::{Error, Result};
pub use field1d::{Components, DensityProfile, ProtocolConfig, WellMetrics};
pub use protocol::{Branch, DetectorState};
pub use smearing::{compose_bobs, Family, Smearing, SmearingSpec};
