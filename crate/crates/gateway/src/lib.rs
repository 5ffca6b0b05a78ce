//! Live session service: one simulator ticking at a fixed rate, streamed to
//! WebSocket clients that can drive it, record from it or hand it to a
//! trained policy.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{
    decode_frame_message, encode_frame_message, quantize_depth, ClientMessage, FrameMessage, Mode, Pose,
    ServerMessage, StateMessage, DEPTH_TRAILER, PROTOCOL_VERSION,
};
pub use server::{serve, Gateway, GatewayConfig};
pub use session::{SessionConfig, SessionCore, TickOutput};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("cannot bind {0}: {1}")]
    Bind(String, #[source] std::io::Error),
    #[error("startup failed: {0}")]
    Startup(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("frame encoding failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Sim(#[from] macpilot_sim::SimError),
    #[error(transparent)]
    Dataset(#[from] macpilot_dataset::DatasetError),
}
