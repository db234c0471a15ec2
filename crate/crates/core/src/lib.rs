pub mod density_engine;
pub mod error;
pub mod experiment;
pub mod nonlocal_calculus;
pub mod quadrature;
pub mod resolvent_solver;
pub mod sde_lab;
pub mod seed;
pub mod stable_model;

pub use error::{Error, Result};
