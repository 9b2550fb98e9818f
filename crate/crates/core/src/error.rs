use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its documented range.
    InvalidConfig(String),
    /// Data dimensions disagree with a declared or required shape.
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    UnknownChannel(String),
    DuplicateChannel(String),
    InvalidTrial(String),
    UnknownLabel(String),
    /// Requested decision window does not fit in any trial.
    WindowTooLong {
        window: usize,
        longest_trial: usize,
    },
    /// A (subject, label) group cannot populate train, validation and test.
    GroupTooSmall {
        subject: String,
        label: String,
        blocks: usize,
    },
    ZeroVariance {
        channel: String,
        trial: usize,
    },
    BandOutOfRange(String),
    NoBinsInBand {
        low: f64,
        high: f64,
        n_fft: usize,
    },
    CoincidentElectrodes(String, String),
    Degenerate(String),
    NonFinite(String),
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    Singular,
    TooShort {
        needed: usize,
        found: usize,
    },
    Diverged {
        epoch: usize,
    },
    Empty(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            Error::UnknownChannel(c) => write!(f, "unknown channel `{c}`"),
            Error::DuplicateChannel(c) => write!(f, "duplicate channel `{c}`"),
            Error::InvalidTrial(m) => write!(f, "invalid trial: {m}"),
            Error::UnknownLabel(l) => write!(f, "unknown attention label `{l}`"),
            Error::WindowTooLong {
                window,
                longest_trial,
            } => write!(
                f,
                "decision window of {window} samples exceeds every trial (longest {longest_trial})"
            ),
            Error::GroupTooSmall {
                subject,
                label,
                blocks,
            } => write!(
                f,
                "subject `{subject}` label {label}: {blocks} block(s) cannot fill train/validation/test"
            ),
            Error::ZeroVariance { channel, trial } => {
                write!(f, "zero variance in channel `{channel}`, trial {trial}")
            }
            Error::BandOutOfRange(m) => write!(f, "band out of range: {m}"),
            Error::NoBinsInBand { low, high, n_fft } => {
                write!(f, "no FFT bin of a {n_fft}-point transform lies in [{low}, {high}] Hz")
            }
            Error::CoincidentElectrodes(a, b) => {
                write!(f, "electrodes `{a}` and `{b}` project to the same point")
            }
            Error::Degenerate(m) => write!(f, "degenerate geometry: {m}"),
            Error::NonFinite(m) => write!(f, "non-finite value in {m}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range (len {len})")
            }
            Error::Singular => write!(f, "singular normal equations; use a positive ridge parameter"),
            Error::TooShort { needed, found } => {
                write!(f, "series too short: need more than {needed} samples, found {found}")
            }
            Error::Diverged { epoch } => write!(f, "training diverged (non-finite loss) in epoch {epoch}"),
            Error::Empty(what) => write!(f, "empty {what}"),
        }
    }
}

impl core::error::Error for Error {}
