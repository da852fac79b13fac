pub mod error;
pub mod exec;
pub mod extreme;
pub mod hull;
pub mod json;
pub mod linalg;
pub mod model;
pub mod pencil;
pub mod tol;
