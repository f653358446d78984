use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An element or multiset was used with a context it does not belong to.
    #[error("context mismatch: {0}")]
    ContextMismatch(String),

    /// A size guard tripped. `requested` is what the operation would have
    /// needed, `limit` the configured cap.
    #[error("budget exceeded for {what}: needed {requested}, limit {limit}")]
    Budget {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    /// Malformed input: unparseable word, bad generator spec, empty multiset.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numeric parameter is outside its documented range.
    #[error("out of range: {0}")]
    Range(String),

    /// The requested method exists but does not apply to this input
    /// (e.g. an exact oracle asked for a group it has no closed form for).
    #[error("method not applicable: {0}")]
    MethodNotApplicable(String),

    /// A value with insufficient provenance was offered where a certified
    /// one is required.
    #[error("provenance violation: {0}")]
    Provenance(String),

    /// Lossless coercion between function representations failed.
    #[error("coercion failed: {0}")]
    Coercion(String),

    /// A supplied action map is inconsistent (an entry is not inverted by
    /// its inverse entry on some visited point).
    #[error("action error: {0}")]
    Action(String),

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
}
