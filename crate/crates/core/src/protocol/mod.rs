//! Live scoring protocol: newline-delimited JSON over any ordered byte
//! stream. See [`message`] for the wire types.

pub mod connection;
pub mod log;
pub mod message;
pub mod server;

pub use connection::{CompletedTrial, Connection};
pub use log::{
    read_session_log, read_session_log_file, replay, ReplayOutput, SessionLog, SessionLogWriter,
};
pub use message::{
    decode_client, encode_client, ClientMessage, DecodeError, ErrorCode, ServerMessage,
    PROTOCOL_VERSION,
};
pub use server::{run_connection, serve, Recorder, ServerOptions};
