//! Command-line front end and HTTP session service for `stabsim-core`.

pub mod server;
pub mod session;
