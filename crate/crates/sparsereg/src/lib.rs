pub mod data;
pub mod error;
pub mod lasso;
pub mod linear;
pub mod ordinal;
pub mod pipeline;
pub mod report;
pub mod screening;

pub use error::{Error, Result};
