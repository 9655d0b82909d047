//! Entropic latent-confounder discovery for classical probability tables
//! and quantum density matrices.
//!
//! The search looks for a latent system Z that makes the observed pair
//! conditionally independent while keeping S(Z) small. A low-entropy Z
//! points to a common cause; otherwise the pair is reported as directly
//! connected (or confounded and directly connected).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod io;
pub mod models;
pub mod qmath;
pub mod quantum;
pub mod seeds;
pub mod states;
pub mod sweep;
pub mod verdict;

pub use classical::{infer_graph, latent_search, ConditionalTable, JointPmf, SearchParams};
pub use error::{Error, Result};
pub use models::{Amplitudes, Rotation};
pub use qmath::{CMatrix, Spectrum, SystemLayout};
pub use quantum::{q_infer_graph, q_latent_search, QuantumSearchParams, QuantumVerdict, SweepRuns, UpdateRule};
pub use sweep::{run_sweep, Engine, ModelKind, Profile, SweepConfig, VerdictGrid};
pub use states::{ConditionalState, DensityMatrix, KetVector};
pub use verdict::{BetaRun, GraphKind, Verdict};
