pub mod conic;
pub mod baselines;
pub mod covertness;
pub mod dcp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod solver;
