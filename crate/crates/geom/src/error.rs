use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("{what} {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("offset of {0} m collapses the polyline")]
    OffsetDegenerate(f64),
    #[error("fillet radius {0} m does not fit between the borders")]
    FilletTooLarge(f64),
    #[error("orientation vote has no positive weight")]
    EmptyVote,
}

impl GeomError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GeomError::InvalidGeometry(msg.into())
    }
}
