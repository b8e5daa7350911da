//! Sparse coarse correlated equilibria in lifted extensive-form games.
//!
//! A bimatrix game `G` is repeated `H` times with an auxiliary third player
//! (the Kibitzer) who is paid for pointing out profitable unilateral
//! deviations. No-regret dynamics on the lifted game produce a sparse
//! coarse correlated equilibrium, and [`extraction::extract_nash`] turns such
//! a mixture back into an approximate Nash equilibrium of `G` by running an
//! exponential-weights posterior over the mixture components at every state.
//!
//! Everything is desk scale: trees are walked explicitly, so the lifted game
//! stays small (`(2m³)^H` leaves).

pub mod correlated;
pub mod density;
pub mod error;
pub mod extraction;
pub mod learners;
pub mod lifted;
pub mod nfg;
pub mod oracles;
pub mod rng;
pub mod strategies;

pub use correlated::SparseCorrelated;
pub use error::{Error, Result};
pub use lifted::{JointAction, KibitzerAction, LiftedGame, Player, StateId};
pub use nfg::{BimatrixGame, Game, MixedProfile, MixedStrategy, NormalFormGame};
pub use strategies::{BehavioralProfile, BehavioralStrategy};

/// Absolute tolerance used for probability-simplex checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
