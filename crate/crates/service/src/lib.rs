//! Chat service over the dialogue engine: a JSON HTTP API, a WebSocket
//! channel per session, and the command-line tools behind the `flowbot`
//! binary.

pub mod api;
pub mod cli;

pub use api::{router, ApiError, Frame, FrameKind};
