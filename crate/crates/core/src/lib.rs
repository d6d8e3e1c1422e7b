//! Reactive layer store with an interactive street model.
//!
//! Edits arrive as change sets. Triggers validate and reinterpret them,
//! then regenerate the dependent parts of the street model inside the same
//! atomic commit.

pub mod auxiliary;
pub mod collab;
pub mod config;
pub mod demo;
pub mod engine;
pub mod error;
pub mod model;
pub mod project;
pub mod store;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod trigger;

pub use config::{Config, Handedness};
pub use error::EngineError;

/// Registers every layer, view and trigger of the engine.
pub fn install(store: &mut store::Store) -> trigger::Result<()> {
    model::install(store)?;
    auxiliary::install(store)?;
    collab::install(store)
}

/// Every store-wide invariant violation, as text.
pub fn violations(store: &store::Store) -> Vec<String> {
    let mut out = model::check::violations(store);
    out.extend(collab::violations(store));
    out
}
