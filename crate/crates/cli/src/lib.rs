//! Command interpreter: runs scripts of `%`-commands against a registry of named objects.

mod repl;
mod session;

pub use repl::{repl, ReplBuffer};
pub use session::{format_bound, RunError, Session, SessionError, TilerMode};
