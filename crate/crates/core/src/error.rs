use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("budget exceeded for `{what}`: {size} > {limit}")]
    Budget {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("no route from ({},{}) to ({},{})", .from.x, .from.y, .to.x, .to.y)]
    NoRoute {
        from: crate::NodeId,
        to: crate::NodeId,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("insufficient data: {0}")]
    Statistics(String),
    #[error("monoid law violated: {0}")]
    LawViolation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
