//! Teleoperation service: streams live simulation state over a websocket at
//! the control rate and takes steering commands, recording demonstrations
//! for behavior cloning.
//!
//! Endpoints: `GET /health`, `GET /tracks`, and the socket `/teleop/{session}`.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ServerMessage, StateFrame};
pub use server::{bind, router, serve, spawn, ServiceConfig, ServiceError};
pub use session::TeleopSession;
