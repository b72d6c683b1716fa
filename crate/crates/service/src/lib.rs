//! Session service for the SSVEP search interface: HTTP and WebSocket
//! endpoints, plus the pieces shared with the command-line tools.

pub mod app;
pub mod bench;
pub mod setup;
pub mod wire;

pub use app::{router, AppState, Shared};
