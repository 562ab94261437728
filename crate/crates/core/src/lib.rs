//! Critical loci and critical values of the amoeba, coamoeba and rolled
//! coamoeba maps of a generic affine plane V ⊂ C⁴.

// `!(x > t)` is used on purpose so that NaN fails the comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covering;
pub mod error;
pub mod fiber;
pub mod linalg;
pub mod locus;
pub mod plane;
pub mod projective;
pub mod render;
pub mod report;

pub use error::{AtlasError, Result};
