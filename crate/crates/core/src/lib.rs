pub mod activation;
pub mod autonomous;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod io;
pub mod lisprott;
pub mod metrics;
pub mod reservoir;
pub mod sparse;
pub mod spectrum;
pub mod training;
