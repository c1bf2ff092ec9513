use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: unparsable files, bad parameters.
    Input,
    /// Well-formed input that disagrees with a schema, world or policy.
    Consistency,
}

#[derive(Debug, Error)]
pub enum Error {
    // knowledge layer
    #[error("duplicate attribute `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("attribute `{0}` has a duplicated domain value `{1}`")]
    DuplicateDomainValue(String, String),
    #[error("numeric attribute `{name}` has low {low} > high {high}")]
    InvalidRange { name: String, low: f64, high: f64 },
    #[error("class attribute `{0}` is not a categorical or boolean attribute of the schema")]
    InvalidClassAttribute(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("value `{value}` is outside the domain of `{attribute}`")]
    OutOfDomainValue { attribute: String, value: String },
    #[error("missing required attribute `{0}`")]
    MissingRequiredAttribute(String),

    // object level
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("position ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfGrid { x: u32, y: u32, width: u32, height: u32 },
    #[error("strategy `{0}` is not in the control domain")]
    UnknownStrategy(String),

    // introspection
    #[error("invalid metadata provider: {0}")]
    InvalidProvider(String),
    #[error("attribute `{0}` is not recorded in the trace")]
    AttributeNotInTrace(String),
    #[error("reports do not share one schema and column layout")]
    ReportMismatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("numeric attribute `{0}` must be discretised before mining")]
    NotDiscretised(String),

    // mining
    #[error("invalid mining configuration: {0}")]
    InvalidConfig(String),
    #[error("`{0}` is the class attribute")]
    ClassAttributeNotAllowed(String),
    #[error("no transactions")]
    NoTransactions,
    #[error("{folds} folds requested for {instances} instances")]
    TooManyFolds { folds: usize, instances: usize },
    #[error("fewer than two classes present")]
    FewerThanTwoClasses,

    // operationalisation
    #[error("model predicts `{found}`, expected the control attribute `{expected}`")]
    NotControlAttribute { expected: String, found: String },
    #[error("rule set violates the priority order at position {0}")]
    RuleOrder(usize),
    #[error("control attribute mismatch: `{0}` vs `{1}`")]
    ControlMismatch(String, String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Csv(_)
            | Error::Json(_)
            | Error::Parse(_)
            | Error::InvalidConfig(_)
            | Error::InvalidWorld(_)
            | Error::DuplicateAttribute(_)
            | Error::EmptyDomain(_)
            | Error::DuplicateDomainValue(..)
            | Error::InvalidRange { .. }
            | Error::InvalidClassAttribute(_)
            | Error::NoTransactions
            | Error::EmptyDataset => ErrorClass::Input,
            _ => ErrorClass::Consistency,
        }
    }
}
