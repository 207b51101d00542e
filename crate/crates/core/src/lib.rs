//! Tests of a Poisson null against self-correcting point-process
//! alternatives: path simulation, finite-horizon statistics, the Gaussian
//! limit experiment and the experiment driver behind the `sctest` binary.

pub mod dist;
pub mod error;
pub mod experiment;
pub mod limit;
pub mod parallel;
pub mod path;
pub mod psi;
pub mod quadrature;
pub mod rng;
pub mod sequential;
pub mod sim;
pub mod statistics;

pub use error::{Error, Result};
pub use limit::{
    a_epsilon, h_of_u, limit_power_score, z_of_u, Calibration, CurveTest, Ensemble, Estimate, Functional,
    LimitTest, McConfig, PowerCurve, PowerPoint, StatSummary, Thresholds,
};
pub use path::{OuPath, PointProcessPath, WienerPath};
pub use psi::{PsiFunction, PsiShape, PsiSpec};
pub use rng::RngStream;
pub use sequential::{sequential_score_test, SequentialOutcome};
pub use statistics::{MleResult, PathReport, PathStats, TestConfig, TestVerdict};
