//! Discrete-time simulator of UCB-bandit beam searching on a mmWave
//! high-speed-train backhaul link.
//!
//! The numeric core ([`channel`], [`codebook`], [`bandit`], [`baselines`],
//! [`regret`]) is generic over the scalar type through [`Real`]; the traverse
//! simulator in [`sim`] runs in `f64`. Concrete aliases for both precisions are
//! exported below.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod baselines;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod linalg;
pub mod regret;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CMatrix32 = linalg::CMatrix<f32>;

pub type ArrayGeometry64 = channel::ArrayGeometry<f64>;
pub type ArrayGeometry32 = channel::ArrayGeometry<f32>;
pub type PathState64 = channel::PathState<f64>;
pub type ChannelSnapshot64 = channel::ChannelSnapshot<f64>;
pub type PathDynamicsConfig64 = channel::PathDynamicsConfig<f64>;
pub type SceneGeometry64 = channel::SceneGeometry<f64>;

pub type Codebook64 = codebook::Codebook<f64>;
pub type Codebook32 = codebook::Codebook<f32>;
pub type MeasurementConfig64 = codebook::MeasurementConfig<f64>;
pub type MeasurementRecord64 = codebook::MeasurementRecord<f64>;

pub type BanditTable64 = bandit::BanditTable<f64>;
pub type BanditTable32 = bandit::BanditTable<f32>;
pub type PolicyConfig64 = bandit::PolicyConfig<f64>;

pub type RegretTrace64 = regret::RegretTrace<f64>;
pub type SyntheticBanditSpec64 = regret::SyntheticBanditSpec<f64>;
