use thiserror::Error;

/// Errors raised by graph construction, loop manipulation and the numeric kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("torus side length {0} is too small (need L >= 3)")]
    TorusTooSmall(usize),
    #[error("torus dimension {0} is too small (need n >= 2)")]
    TorusDimension(usize),
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("graph has a self-loop or repeated edge at {0}")]
    SelfLoopOrMultiEdge(String),
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("operation requires a discrete torus")]
    NotATorus,
    #[error("({0}, {1}) is not an edge of the graph")]
    NotAnEdge(String, String),
    #[error("path step {0} -> {1} is not an edge")]
    InvalidPath(u32, u32),
    #[error("loop is not geodesic")]
    NotGeodesic,
    #[error("network is not Eulerian at vertex {0}")]
    NotEulerian(u32),
    #[error("network is not a flow on edge ({0}, {1})")]
    NotAFlow(u32, u32),
    #[error("channel has zero rate for this collection")]
    ZeroRateChannel,
    #[error("matrix is not antihermitian (defect {0:e})")]
    NotAntihermitian(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("connection or gauge field belongs to a different graph")]
    GraphMismatch,
    #[error("spanning tree does not match the graph")]
    TreeMismatch,
    #[error("plaquette action has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
