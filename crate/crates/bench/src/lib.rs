//! Shared fixtures for the benchmarks.

use sparse_cce::learners::run_hedge_lifted;
use sparse_cce::lifted::lift;
use sparse_cce::nfg::random_bimatrix;
use sparse_cce::{BehavioralProfile, LiftedGame, SparseCorrelated};

pub struct Fixture {
    pub game: sparse_cce::BimatrixGame,
    pub lifted: LiftedGame,
    pub mixture: SparseCorrelated<BehavioralProfile>,
}

/// Random `m × m` game lifted to horizon `h`, with a Hedge mixture of `t` iterates.
pub fn fixture(m: usize, h: usize, t: usize, seed: u64) -> Fixture {
    let game = random_bimatrix(m, seed);
    let lifted = lift(&game, h).expect("valid horizon");
    let mixture = run_hedge_lifted(&lifted, [0.2; 3], t, Some(seed)).expect("hedge run").mixture;
    Fixture { game, lifted, mixture }
}
