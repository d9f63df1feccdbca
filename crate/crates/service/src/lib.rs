//! HTTP service, event store and command line for the news dialogue system.

pub mod cli;
pub mod config;
pub mod http;
pub mod service;
pub mod simulate;
pub mod store;

pub use config::ServiceConfig;
pub use service::{SdsService, ServiceError, TurnRequest, TurnResponsePayload};
