//! On-disk artifacts: the FSEQ container for frames, saliency maps and flow,
//! PGM frame directories, ground-truth annotations and the CSV streams the
//! pipeline stages exchange.

mod annotations;
mod fseq;
mod pgm;
pub mod tables;

pub use annotations::{
    format_annotations, parse_annotations, read_annotations, GroundTruthEvent, NONE_LABEL,
};
pub use fseq::{
    decode_fseq, encode_fseq, read_flow, read_frames, read_fseq, read_saliency, write_fseq,
    ChannelType, FlowSequence, FrameSequence, FseqPayload, SaliencySequence, FSEQ_HEADER_LEN,
    FSEQ_MAGIC,
};
pub use pgm::{decode_pnm, read_pgm_sequence, write_pgm};

use std::path::PathBuf;

/// Frame rate assumed when no metadata is available.
pub const DEFAULT_FRAME_RATE: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("not an FSEQ file (bad magic)")]
    MagicMismatch,
    #[error("payload holds {actual} bytes, header implies {expected}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("expected {expected} payload, found {found}")]
    WrongPayload {
        expected: &'static str,
        found: &'static str,
    },
    #[error("frame {frame}: {reason}")]
    InvariantViolation { frame: usize, reason: String },
    #[error("missing frame index {index} in {dir}")]
    MissingIndex { dir: PathBuf, index: usize },
    #[error("unsupported PGM {path}: {reason}")]
    UnsupportedPgm { path: PathBuf, reason: String },
    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MediaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MediaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, reason: impl Into<String>) -> Self {
        MediaError::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
