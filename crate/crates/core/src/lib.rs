//! A provenance-aware knowledge base engine.
//!
//! Facts are s-expression terms organized into monotonic microtheory
//! contexts. Retrieval is unification over a coarse-coded mention index.
//! Every fact is tagged with the provenance event that introduced it, and
//! facts left without support when an event is retracted are forgotten.

pub mod error;
pub mod intern;
pub mod krf;
pub mod kv;
pub mod log;
pub mod mt;
pub mod parse;
pub mod provenance;
pub mod store;
pub mod term;

pub use error::{KbError, Result};
pub use intern::EntityId;
pub use mt::MtId;
pub use parse::parse_term;
pub use provenance::EventId;
pub use store::FactId;
pub use term::{unify, Bindings, Term};
