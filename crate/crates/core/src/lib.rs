pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod simplex;
pub mod structure;
pub mod synth;

pub use dataset::{SemanticSpace, ZslDataset};
pub use error::{ClaError, Result};
pub use linalg::DenseMatrix;
pub use model::{ClaModel, LabelMatrix};
pub use pipeline::ClaConfig;
