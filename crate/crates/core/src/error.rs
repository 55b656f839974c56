use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A data file (key table, chart, weights, observations...) could not be loaded.
    #[error("{source_name}: {message}")]
    Load { source_name: String, message: String },

    #[error("written pitch {midi} is outside the chart range {min}..={max}{context}")]
    OutOfRange {
        midi: i32,
        min: i32,
        max: i32,
        context: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("too few usable frames: {found} retained, {required} required")]
    TooFewFrames { found: usize, required: usize },

    #[error("degenerate trill: both pitch clusters map to MIDI {0}")]
    DegenerateTrill(i32),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("polyphony unsupported: {0}")]
    Polyphony(String),

    #[error("score error: {0}")]
    Score(String),

    #[error("report does not match document: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn load(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            source_name: source_name.into(),
            message: message.into(),
        }
    }
}
