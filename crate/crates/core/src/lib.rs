//! Pseudo-sense detection and removal for multi-sense word embeddings.
//!
//! Sense vectors of the same word often differ along a handful of shared
//! directions that carry no meaning. This crate stacks all same-word sense
//! differences into a matrix, splits it into low-rank, Gaussian and sparse
//! parts, and projects the low-rank directions out of every sense vector.
//!
//! ```
//! use pseudosense::{DiffMatrix, EmbeddingStore, SenseRecord};
//!
//! let store = EmbeddingStore::from_records(2, vec![
//!     SenseRecord::new("bank", 0, vec![1.0, 0.0]),
//!     SenseRecord::new("bank", 1, vec![0.0, 1.0]),
//! ]).unwrap();
//! let m = DiffMatrix::build(&store).unwrap();
//! assert_eq!(m.ncols(), 2);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod decompose;
pub mod diffmat;
pub mod dump;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod projection;
pub mod store;
pub mod synth;

pub use decompose::{decompose, Decomposition, Method, SolverConfig};
pub use diffmat::{DiffMatrix, PairLabel};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport, Metric, SimilarityDataset};
pub use projection::ProjectionMatrix;
pub use store::{EmbeddingFormat, EmbeddingStore, SenseRecord, SenseVector};

#[cfg(doctest)]
mod book {
    macro_rules! chapters {
        ($($name:ident => $file:literal),* $(,)?) => {
            $(
                #[doc = include_str!(concat!("../../../book/src/", $file))]
                pub struct $name;
            )*
        };
    }
    chapters! {
        Overview => "overview.md",
        Store => "store.md",
        DiffMatrix => "diff-matrix.md",
        Decompositions => "decompositions.md",
        Projection => "projection.md",
        Evaluation => "evaluation.md",
        Analysis => "analysis.md",
        Synthetic => "synthetic.md",
        Pipeline => "pipeline.md",
        Formats => "formats.md",
    }
}
