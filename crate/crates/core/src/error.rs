use serde::Serialize;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the handshake stack can report.
///
/// Variants are deliberately coarse: a peer that fails verification learns
/// nothing beyond `AuthenticationFailed`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "error", content = "detail")]
pub enum Error {
    #[error("unknown cipher suite {0}")]
    UnknownSuite(i64),
    #[error("cipher suite {0} is reserved for private use")]
    ReservedSuite(i64),
    #[error("cipher suite {0} has no primitive backend")]
    UnsupportedSuite(i64),
    #[error("unknown authentication method {0}")]
    UnknownMethod(i64),
    #[error("authentication method {0} not accepted by this responder")]
    UnsupportedMethod(u8),
    #[error("no common cipher suite; responder supports {supported:?}")]
    NoCommonSuite { supported: Vec<i32> },
    #[error("initiator selected suite {selected}; responder supports {supported:?}")]
    WrongSelectedSuite { selected: i32, supported: Vec<i32> },
    #[error("invalid or low-order public key")]
    InvalidPoint,
    #[error("invalid key material")]
    InvalidKey,
    #[error("malformed message: {0}")]
    MalformedMessage(&'static str),
    #[error("requested {requested} bytes, at most {max} can be expanded")]
    LengthTooLarge { requested: usize, max: usize },
    #[error("static DH secret presence disagrees with the authentication kind")]
    MissingStaticSecret,
    #[error("no trusted credential matches the peer identifier")]
    UntrustedPeer,
    #[error("peer is trusted but is not the intended peer")]
    UnintendedPeer,
    #[error("authentication failed")]
    AuthenticationFailed,
    #[error("unrecognized critical EAD item with label {0}")]
    CriticalEadUnrecognized(u64),
    #[error("message is a replay or arrived out of order")]
    ReplayOrOutOfOrder,
    #[error("key confirmation has not been received")]
    NotConfirmed,
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("peer sent error message code {code}")]
    PeerError { code: u64, info: Vec<u8> },
    #[error("error code {0} is not defined")]
    InvalidErrorCode(u64),
    #[error("exporter label {0} is inside the internal label band")]
    InvalidExporterLabel(u64),
    #[error("an AEAD key/nonce pair would be used twice")]
    NonceReuse,
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("session already aborted")]
    SessionAborted,
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable name, used for process exit messages and JSON output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnknownSuite(_) => "UnknownSuite",
            Error::ReservedSuite(_) => "ReservedSuite",
            Error::UnsupportedSuite(_) => "UnsupportedSuite",
            Error::UnknownMethod(_) => "UnknownMethod",
            Error::UnsupportedMethod(_) => "UnsupportedMethod",
            Error::NoCommonSuite { .. } => "NoCommonSuite",
            Error::WrongSelectedSuite { .. } => "WrongSelectedSuite",
            Error::InvalidPoint => "InvalidPoint",
            Error::InvalidKey => "InvalidKey",
            Error::MalformedMessage(_) => "MalformedMessage",
            Error::LengthTooLarge { .. } => "LengthTooLarge",
            Error::MissingStaticSecret => "MissingStaticSecret",
            Error::UntrustedPeer => "UntrustedPeer",
            Error::UnintendedPeer => "UnintendedPeer",
            Error::AuthenticationFailed => "AuthenticationFailed",
            Error::CriticalEadUnrecognized(_) => "CriticalEadUnrecognized",
            Error::ReplayOrOutOfOrder => "ReplayOrOutOfOrder",
            Error::NotConfirmed => "NotConfirmed",
            Error::ConfigError(_) => "ConfigError",
            Error::PeerError { .. } => "PeerError",
            Error::InvalidErrorCode(_) => "InvalidErrorCode",
            Error::InvalidExporterLabel(_) => "InvalidExporterLabel",
            Error::NonceReuse => "NonceReuse",
            Error::Timeout => "Timeout",
            Error::SessionAborted => "SessionAborted",
            Error::UnknownScenario(_) => "UnknownScenario",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
