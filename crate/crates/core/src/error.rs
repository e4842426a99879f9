use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Vertex indices in messages are 1-based, matching the labels used in
/// graph and layer files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} appears in more than one layer")]
    LayerOverlap { vertex: usize },
    #[error("vertex {vertex} is not assigned to any layer")]
    UncoveredVertex { vertex: usize },
    #[error("layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("vertex {vertex} is out of range for a graph with {p} vertices")]
    VertexOutOfRange { vertex: usize, p: usize },
    #[error("self loop on vertex {vertex}")]
    SelfLoop { vertex: usize },
    #[error("directed edge {from}->{to} does not point to a later layer")]
    BackwardDirectedEdge { from: usize, to: usize },
    #[error("undirected edge {u}-{v} joins different layers")]
    CrossLayerUndirectedEdge { u: usize, v: usize },
    #[error("vertex labels violate layer order: {lower} is in a later layer than {higher}")]
    LabelOrderViolation { lower: usize, higher: usize },
    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("matrix factorization failed: {0}")]
    FactorizationFailure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical underflow in {0}")]
    NumericalUnderflow(&'static str),
    #[error("column `{0}` has zero variance")]
    DegenerateColumn(String),
    #[error("chain retained no iterations")]
    EmptyTrace,
    #[error("edge {0} is not permitted by the layer map")]
    StructureInconsistent(String),

    #[error("no edge exceeds the threshold")]
    EmptySelection,
    #[error("truth contains only one class; ROC is undefined")]
    DegenerateTruth,
    #[error("edge {0} is outside the candidate universe")]
    EdgeOutsideUniverse(String),

    #[error("column `{0}` has no entry in the layer map")]
    MissingColumnInLayerMap(String),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("non-numeric cell `{cell}` at row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String, cell: String },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
