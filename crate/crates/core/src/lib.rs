//! Overlap-save fast convolution with a bandwidth that can be changed per
//! block at the cost of a handful of real multiplications.

pub mod artifact;
pub mod cholesky;
pub mod coeffs;
pub mod complexity;
pub mod design;
pub mod engine;
pub mod error;
pub mod lptv;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod spec;

pub use artifact::DesignArtifact;
pub use coeffs::{build_coefficients, retune, DftCoefficientSet, TransitionCoeffs};
pub use engine::{BlockTransform, EngineMode, OlsEngine, RealFft, TailPolicy};
pub use design::{assemble, assemble_weighted, derive_weights, solve, DesignWeights, LsSystem, PhaseLimitMode};
pub use error::{Error, Result};
pub use lptv::{PtvirSet, ResponseGrid};
pub use metrics::{evaluate, DesignMetrics, Evaluation, StopbandSummary};
pub use pipeline::{design, Design, DesignOptions};
pub use scalar::Real;
pub use spec::{discretize, plan, DiscretizedSpec, FilterSpec};

pub type TransitionCoeffs64 = TransitionCoeffs<f64>;
pub type DftCoefficientSet64 = DftCoefficientSet<f64>;
pub type LsSystem64 = LsSystem<f64>;
pub type PtvirSet64 = PtvirSet<f64>;
pub type OlsEngine64 = OlsEngine<f64>;
pub type OlsEngine32 = OlsEngine<f32>;
