//! File formats: `.fvecs` point sets and PGM spy images. Matrix Market
//! and permutation files live with their types in [`crate::model`].

mod fvecs;
mod spy;

pub use fvecs::{parse_fvecs, read_fvecs, read_fvecs_prefix, write_fvecs, write_fvecs_to};
pub use spy::{spy_image, spy_pixels, write_pgm, Roi};
