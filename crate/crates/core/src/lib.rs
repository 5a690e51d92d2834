//! Market prediction game: price data, session engine, behavioral
//! analytics and a population simulator.

pub mod domain;
pub mod market;
pub mod session;
pub mod analytics;
pub mod sim;
