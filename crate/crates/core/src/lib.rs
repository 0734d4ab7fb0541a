//! Scale-invariant online linear learning.
//!
//! The crate is organised the way the pieces are used:
//!
//! * [`model`]: sparse examples, convex losses and prediction primitives.
//! * [`learners`]: the NG, NAG and sNAG normalized updates next to diagonal
//!   AdaGrad and plain SGD, all behind one observe/predict/update interface.
//! * [`conditioners`]: diagonal conditioners for the update
//!   `w <- w - A^-1 g` (hindsight, transductive and streaming) and the
//!   projection onto the bounded-output comparator ball.
//! * [`regret`]: the scaling adversary, best-in-hindsight oracles and numeric
//!   evaluators for the regret bounds.
//! * [`data`]: svmlight and delimited readers, synthetic generators and the
//!   max-norm / square-norm pre-normalizers.
//! * [`eval`]: progressive validation, learning-rate sweeps and the KL
//!   Chernoff significance test.
//! * [`report`]: the JSON report types shared by the CLI and the bindings.

pub mod conditioners;
pub mod data;
pub mod error;
pub mod eval;
pub mod learners;
pub mod model;
pub mod regret;
pub mod report;

pub use error::{Error, Result};
pub use learners::{EtaDecay, Learner, LearnerConfig, LearnerKind, LearnerState};
pub use model::{Loss, Prediction, SparseExample};
