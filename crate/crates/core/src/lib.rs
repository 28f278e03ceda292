//! Simulation and verification toolkit for the Manhattan pinball (mirror)
//! model: bond configurations on the tilted lattice, light trajectories, the
//! pattern enhancement, closed-path event detectors and a Monte Carlo
//! harness that replays the trapping argument sample by sample.

pub mod configuration;
pub mod enhancement;
pub mod error;
pub mod events;
pub mod geometry;
pub mod io;
pub mod montecarlo;
pub mod rng;
pub mod tracer;

pub use configuration::{Configuration, Provenance, UniformField};
pub use enhancement::Pattern;
pub use error::{Error, Result};
pub use geometry::{Direction, Orientation, RegionKind, Site, TiltedRegion, TiltedVertex};
pub use tracer::{RayState, TraceStatus, Trajectory};
