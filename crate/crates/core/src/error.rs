use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("case file, line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("case file is missing the `{0}` table")]
    MissingTable(&'static str),

    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),

    #[error("duplicate line id {0}")]
    DuplicateLine(u32),

    #[error("unknown bus id {0}")]
    UnknownBus(u32),

    #[error("unknown line id {0}")]
    UnknownLine(u32),

    #[error("line {line}: {msg}")]
    InvalidLine { line: u32, msg: String },

    #[error("grid is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("island {island} is unbalanced by {imbalance:e} p.u.")]
    UnbalancedIsland { island: usize, imbalance: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("area certification failed after {attempts} attempts")]
    Certification { attempts: u32 },

    #[error("invalid attack: {0}")]
    InvalidAttack(String),

    #[error("injection rebalancing infeasible: {0}")]
    Rebalance(String),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("prior mismatch: {0}")]
    Prior(String),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
