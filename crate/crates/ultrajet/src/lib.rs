//! Desk-scale numerical and exact-combinatorial calculus for
//! ultradifferentiable function classes on R^n.
//!
//! The crate is organized along the pipeline:
//! [`weightseq`] (weight/rate sequences and their growth conditions) ->
//! [`jet`] (exact truncated Taylor algebra) -> [`funcdsl`] (expression
//! language feeding the jets) -> [`classnorms`] (seminorm estimation on
//! sampled functions) -> [`explaw`] (curry/uncurry and the norm
//! inequalities of the exponential law) -> [`diffgroup`] (near-identity
//! diffeomorphisms: composition, inversion, bound certificates).

pub mod classnorms;
pub mod diffgroup;
pub mod explaw;
pub mod funcdsl;
pub mod grid;
pub mod jet;
pub mod multiindex;
pub mod sampled;
pub mod scalar;
pub mod weightseq;

pub use jet::{fdb_partition_sum, Jet, JetError};
pub use multiindex::MultiIndex;
pub use scalar::{Rat, Scalar};
