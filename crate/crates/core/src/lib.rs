//! Data-driven synthesis of Kazantzis-Kravaris/Luenberger observers for planar
//! limit-cycle systems.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: simulate snapshot pairs `(x, x+)` of the plant.
//! 2. [`eigfit`]: regress Koopman eigenfunctions for prescribed eigenvalues
//!    over a polynomial dictionary ([`basis`]).
//! 3. [`injection`]: fit each component of the injective map `T` as a linear
//!    combination of product eigenfunctions on the lattice `m mu_real + i n omega`.
//! 4. [`inverse`]: fit `T^+` by kernel ridge regression.
//! 5. [`observer`]: run `z' = -Lambda z + 1 y`, `x_hat = T^+(z)`.
//!
//! Every routine is generic over the [`Real`] scalar; the `*64` aliases below
//! fix it to `f64`, which is what the accuracy targets assume.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod dataset;
pub mod dynamics;
pub mod eigfit;
pub mod error;
pub mod injection;
pub mod inverse;
pub mod numerics;
pub mod observer;
pub mod scalar;

pub use basis::PolyBasis;
pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type Brusselator64 = dynamics::Brusselator<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type SnapshotPairs64 = dataset::SnapshotPairs<f64>;
pub type SamplingSpec64 = dataset::SamplingSpec<f64>;
pub type Eigenfunction64 = eigfit::Eigenfunction<f64>;
pub type EigenLattice64 = injection::EigenLattice<f64>;
pub type InjectionModel64 = injection::InjectionModel<f64>;
pub type KrrModel64 = inverse::KrrModel<f64>;
pub type ObserverRun64 = observer::ObserverRun<f64>;

pub type Brusselator32 = dynamics::Brusselator<f32>;
pub type SnapshotPairs32 = dataset::SnapshotPairs<f32>;
pub type InjectionModel32 = injection::InjectionModel<f32>;
pub type KrrModel32 = inverse::KrrModel<f32>;
