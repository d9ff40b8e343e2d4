//! Networks of circuits: topology, construction from generative models,
//! top-down scaling, serialization, and the lockstep scheduler.

pub mod format;
pub mod model;
pub mod runtime;
pub mod topdown;
pub mod topology;

pub use format::{read_topology, write_topology};
pub use model::{build_from_model, Binding, ModelSpec, Variable};
pub use runtime::{Network, NetworkParams};
pub use topdown::{td_factor, PhiParams, TdPolicy};
pub use topology::{
    build_hierarchical, build_integration, CircuitSpec, Cube, DownEdge, NetworkTopology, SensoryGrid, SensorySpec,
    Source, UpEdge,
};
