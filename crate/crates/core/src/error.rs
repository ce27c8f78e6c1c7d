//! Error types shared across the knowledge base.

use thiserror::Error;

use crate::intern::EntityId;
use crate::store::FactId;
use crate::term::Term;

#[derive(Debug, Error)]
pub enum KbError {
    /// Unbalanced parentheses, bad escapes, malformed tokens. Parsing stops
    /// at the first error. Line and column are 1-based.
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },

    /// A directive head with arguments that violate its arity or keyword rules.
    #[error("malformed directive: {0}")]
    MalformedDirective(String),

    /// A genlMt edge that would create a directed cycle (including self-loops).
    #[error("genlMt cycle: adding ({child} -> {parent}) would create a cycle")]
    Cycle { child: Term, parent: Term },

    /// Removal of a genlMt edge that is not present.
    #[error("no genlMt edge ({child} -> {parent})")]
    MissingEdge { child: Term, parent: Term },

    /// Persistence failure. The in-memory store stays consistent; once a log
    /// append has failed the store refuses further mutations.
    #[error("storage error: {0}")]
    Storage(String),

    /// forget_fact_in_mt on a (fact, mt) pair that is not stored.
    #[error("fact {fact} is not stored in microtheory {mt}")]
    MissingFact { fact: FactId, mt: EntityId },

    #[error("unknown fact id {0}")]
    UnknownFact(FactId),

    #[error("unknown provenance event {0}")]
    UnknownEvent(EntityId),

    /// A special-fact handler was given a pattern it does not support
    /// (special facts bypass the mentions map and only answer predefined
    /// query shapes).
    #[error("unsupported pattern for special predicate: {0}")]
    UnsupportedPattern(String),

    /// A pattern with no mentions requires a full store scan, which is
    /// disabled unless explicitly allowed.
    #[error("query pattern has no mentions; full scans are disabled (enable with allow_scan)")]
    ScanRefused,

    /// declare_index for a predicate that already has a different key
    /// position, or whose storage is handled specially.
    #[error("conflicting index declaration for {predicate}: {message}")]
    ConflictingIndex { predicate: Term, message: String },

    /// register_special for a predicate that is already special or indexed.
    #[error("duplicate special handler for predicate {0}")]
    DuplicateHandler(String),

    /// Provenance meta chains are limited to two layers.
    #[error("meta-provenance depth exceeded: event {0} already has a meta event")]
    MetaDepthExceeded(EntityId),

    /// store_fact requires an active provenance event.
    #[error("no active provenance event; begin one before storing facts")]
    NoActiveEvent,

    #[error("expected a compound term, got {0}")]
    NotCompound(Term),

    #[error("{message} at {line}:{column}")]
    Located {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl KbError {
    pub(crate) fn syntax(line: u32, column: u32, message: impl Into<String>) -> Self {
        KbError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    /// Wrap an error with the file location of the item that caused it.
    pub fn at(self, line: u32, column: u32) -> Self {
        match self {
            KbError::Syntax { .. } | KbError::Located { .. } => self,
            other => KbError::Located {
                line,
                column,
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, KbError>;
