pub mod error;
pub mod evans;
pub mod linalg;
pub mod limits;
pub mod linearize;
pub mod model;
pub mod ode;
pub mod profile;
pub mod roots;

pub use error::{Error, Result};
