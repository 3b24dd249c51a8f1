pub mod cli;
pub mod divergence;
pub mod error;
pub mod estimate;
pub mod family;
pub mod io;
pub mod lp;
pub mod measures;
pub mod oracle;
pub mod projection;
pub mod sampling;
pub mod solver;
pub mod sufficiency;
