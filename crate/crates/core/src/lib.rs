//! Surrogate model-based neuroevolution (SMB-NE) for classic control tasks.
//!
//! Networks are encoded with Cartesian genetic programming ([`cgp`]) and
//! evaluated on native CartPole and MountainCar environments ([`envs`]).
//! A Kriging model ([`kriging`]) over a phenotypic distance ([`phd`]), the
//! Manhattan distance between network outputs on a shared set of states,
//! predicts the fitness of unseen networks, so most candidates are screened
//! by expected improvement instead of a costly episode ([`smbne`]).
//! [`harness`] runs seeded comparisons against the model-free (1+4)-ES and
//! random search and computes Kruskal-Wallis / Conover statistics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cgp;
pub mod envs;
pub mod error;
pub mod harness;
pub mod kriging;
pub mod phd;
pub mod seed;
pub mod smbne;

pub use cgp::{ActiveNetwork, CgpConfig, Genotype, NodeGene, TransferFn, WeightRange};
pub use envs::{EnvKind, EnvSpec, EnvState, EpisodeResult};
pub use error::{Error, Result};
pub use harness::{ExperimentPlan, ResultTable};
pub use kriging::{KrigingModel, Prediction, ThetaBounds};
pub use phd::{InputStrategy, InputVector, Phenotype};
pub use smbne::{Algorithm, Archive, RunResult, SmbneConfig};
