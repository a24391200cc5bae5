//! Tea-leaf coin-flip simulation, the models trained on it, and the audit
//! tooling that explains their accuracy.

pub mod error;
pub mod leakage;
pub mod lottery;
pub mod models;
pub mod repro;
pub mod rng;
pub mod stats;
pub mod tessim;

pub use error::{Error, Result};
pub use leakage::{AuditReport, ContingencyTable, Finding};
pub use lottery::{BitVector, LotteryDraw, ProbabilityReport};
pub use models::{Architecture, EvalReport, FeatureScheme, LossKind, ModelState, TrainConfig};
pub use tessim::{Dataset, FlipOutcome, SimConfig, SplitStrategy, TeaImage};
