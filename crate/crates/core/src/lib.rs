pub mod bho;
pub mod cq;
pub mod error;
pub mod fixtures;
pub mod fuzz;
pub mod kernels;
pub mod model;
pub mod report;
pub mod stationarity;
