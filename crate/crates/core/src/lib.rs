//! Crawler for I2P eepsites and the analytics over the link graph it
//! collects, plus a simulated darknet to run both against.

pub mod clock;
pub mod graphlab;
pub mod model;
pub mod simnet;
pub mod spider;
pub mod transport;
pub mod discovery;
pub mod store;
pub mod config;
pub mod manager;
pub mod report;
