pub mod consts;
pub mod error;
pub mod elliptic;
pub mod geometry;
pub mod linalg;
pub mod monotone;
pub mod builders;
pub mod scenario;
pub mod verify;
pub mod config;
pub mod expr;
pub mod output;

pub use error::{Error, Result, Stage};
pub use geometry::*;
