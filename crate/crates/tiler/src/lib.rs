//! Interactive completion of finite patches of a two-dimensional SFT, served as JSON over HTTP.
//!
//! Endpoints: `GET /state`, `POST /pin`, `POST /unpin`, `POST /complete`, `POST /resize`.

mod server;
mod session;

pub use server::{router, serve, serve_blocking, CompleteResponse, PinRequest, ResizeResponse, UnpinRequest};
pub use session::{
    Assignment, CompletionJob, Geometry, NodeJson, StateView, Status, TilerError, TilerSession, Window,
    DEFAULT_NODE_CAP, DEFAULT_SIDE,
};
