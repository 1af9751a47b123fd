//! Weighted shifts on directed trees.

pub mod family;
pub mod linalg;
pub mod measure;
pub mod tree;
pub mod weights;
pub mod shift;
pub mod oracle;
pub mod classify;
pub mod models;
pub mod io;
