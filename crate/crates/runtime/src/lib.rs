//! Networked half of Sally: the WebSocket broker, the client connection,
//! the in-process service host, the mock application driver and the
//! scenario runner.

pub mod broker;
pub mod client;
pub mod mockapp;
pub mod scenario;
pub mod services;

pub use broker::{BrokerConfig, BrokerHandle};
pub use client::{Client, ClientError};
