use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model parse error: {0}")]
    Parse(String),

    #[error("invalid layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    #[error("unsupported stride {0}")]
    UnsupportedStride(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported Winograd configuration F({m}x{m},{r}x{r})")]
    UnsupportedWinograd { m: usize, r: usize },

    #[error("field `{field}` value {value} exceeds {bits}-bit width")]
    FieldOverflow { field: &'static str, value: u64, bits: u32 },

    #[error("invalid opcode {0}")]
    InvalidOpcode(u8),

    #[error("invalid instruction word: {0}")]
    InvalidWord(String),

    #[error("invalid program file: {0}")]
    ProgramFormat(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("layer {layer} cannot be mapped: {reason}")]
    Unmappable { layer: usize, reason: String },

    #[error("DRAM capacity exceeded: need {needed} words, have {available}")]
    DramCapacity { needed: u64, available: u64 },

    #[error("invalid hardware configuration: {0}")]
    InvalidHw(String),

    #[error("token deadlock: {consumer} #{index} waits on {producer} that never produced the data")]
    Deadlock {
        consumer: &'static str,
        producer: &'static str,
        index: usize,
    },

    #[error("buffer overrun in {buffer} at instruction #{index}: {detail}")]
    BufferOverrun {
        buffer: &'static str,
        index: usize,
        detail: String,
    },

    #[error("DRAM access out of bounds at instruction #{index}: address {address}")]
    DramOutOfBounds { index: usize, address: u64 },

    #[error("dependency violation at instruction #{index}: {detail}")]
    Dependency { index: usize, detail: String },

    #[error("no feasible hardware configuration: {0}")]
    NoFeasibleHw(String),

    #[error("empty candidate list")]
    NoCandidates,

    #[error("platform error: {0}")]
    Platform(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
