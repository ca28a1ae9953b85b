pub mod error;
pub mod io;
pub mod model;
pub mod poly;
pub mod solver;
pub mod sweep;
pub mod data;
pub mod gmm;
