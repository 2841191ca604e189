use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("invalid STFT parameters: {0}")]
    InvalidParams(String),

    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    SignalTooShort { len: usize, window: usize },

    #[error("overlap-add condition violated: {0}")]
    NotCola(String),

    #[error(
        "{n_mels} mel channels exceed the usable resolution: channel {channel} covers no DFT bin"
    )]
    TooManyMels { n_mels: usize, channel: usize },

    #[error("non-positive speech energy ({which}: {energy})")]
    NonPositiveEnergy { which: &'static str, energy: f64 },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("utterance {0} contains no speech according to the trimming authority")]
    AllSilent(String),

    #[error("infeasible overlap target {target:.4}: {constraint}; {}", feasible_text(*.lo, *.hi))]
    InfeasibleOverlap {
        target: f64,
        constraint: String,
        lo: f64,
        hi: f64,
    },

    #[error("silence bank is empty but {0} gap samples need filling")]
    EmptySilenceBank(usize),

    #[error("insufficient corpus: {0}")]
    InsufficientCorpus(String),

    #[error("need at least {k} distinct embedding points, found {found}")]
    TooFewPoints { k: usize, found: usize },

    #[error("invalid cluster count {0}")]
    InvalidClusterCount(usize),

    #[error("{k} speakers do not fit in {dim} embedding dimensions")]
    TooManySpeakers { k: usize, dim: usize },

    #[error("bad magic in embedding file (expected \"EMB1\")")]
    BadMagic,

    #[error(
        "embedding file truncated: header promises {expected} payload bytes, file has {actual}"
    )]
    Truncated { expected: u64, actual: u64 },

    #[error("embedding dimensions {frames}x{freqs}x{dim} overflow the addressable size")]
    DimensionOverflow { frames: u32, freqs: u32, dim: u32 },

    #[error("malformed embedding header: {0}")]
    BadHeader(String),

    #[error("missing speaker-Id embeddings for segment {0}; supply the second (speaker-Id) embedding file")]
    MissingSpeakerId(usize),

    #[error("missing embeddings for multi-speaker segment {0}")]
    MissingEmbeddings(usize),

    #[error("segment {0} has no assignment")]
    Unassigned(usize),

    #[error("invalid segmentation: {0}")]
    InvalidSegments(String),

    #[error("silent reference signal")]
    SilentReference,

    #[error("malformed input {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

fn feasible_text(lo: f64, hi: f64) -> String {
    if lo.is_finite() && hi.is_finite() {
        format!("feasible overlap interval is [{lo:.4}, {hi:.4}]")
    } else {
        "no overlap target is feasible".into()
    }
}
