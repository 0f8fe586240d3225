//! Singular-value split adapters for linear layers.
//!
//! A pretrained weight `W₀` is split by SVD into a trainable principal part
//! `U_p·diag(S_p)·V_pᵀ` (top `r` triplets) and a frozen residual. Training
//! updates the three factors directly, with an orthonormality penalty on
//! `U_p` and `V_p`. LoRA, PiSSA, and full updates are provided as baselines,
//! together with the measurement tools used to compare them: spectral drift,
//! condition-number traces, Weyl perturbation probes, and convergence-rate
//! fits.

pub mod adapters;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod regularizer;
pub mod rng;

pub use adapters::{Adapter, Method, SorsaAdapter};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use optimizer::TrainConfig;
