//! No-regret dynamics: MWU and OMWU self-play on normal-form games, and a
//! per-state counterfactual Hedge learner on the lifted game.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::correlated::SparseCorrelated;
use crate::error::{Error, Result};
use crate::lifted::{JointAction, LiftedGame, Player, StateId};
use crate::nfg::{self, MixedProfile, MixedStrategy, NormalFormGame};
use crate::rng;
use crate::strategies::BehavioralProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mwu,
    Omwu,
    /// Per-state Hedge on counterfactual utilities; on a normal-form game
    /// this is plain MWU.
    HedgeCfr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// `None` selects `√(log m / T)`.
    pub learning_rate: Option<f64>,
    /// `None` starts from the uniform distribution.
    pub initial: Option<MixedStrategy>,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, learning_rate: f64) -> Self {
        Self {
            algorithm,
            learning_rate: Some(learning_rate),
            initial: None,
        }
    }
}

/// `√(log m / T)`; 1 for single-action players, whose updates are trivial.
pub fn default_learning_rate(actions: usize, iterations: usize) -> f64 {
    if actions <= 1 {
        return 1.0;
    }
    ((actions as f64).ln() / iterations.max(1) as f64).sqrt()
}

fn check_rate(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLearningRate(eta))
    }
}

/// `x'[a] ∝ x[a] · exp(η g[a])`, in the log domain.
fn exponentiated_step(x: &MixedStrategy, g: &[f64], eta: f64) -> Result<MixedStrategy> {
    check_rate(eta)?;
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            player: 0,
            expected: x.len(),
            found: g.len(),
        });
    }
    if let Some(index) = x.probs().iter().position(|&p| p <= 0.0) {
        return Err(Error::NotInterior { index });
    }
    let logits: Vec<f64> = x
        .probs()
        .iter()
        .zip(g)
        .map(|(p, v)| p.ln() + eta * v)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|p| *p /= total);
    Ok(MixedStrategy::from_trusted(w))
}

pub fn mwu_step(x: &MixedStrategy, u: &[f64], eta: f64) -> Result<MixedStrategy> {
    exponentiated_step(x, u, eta)
}

/// OMWU with `u_prev = None` meaning the zero prediction.
pub fn omwu_step(x: &MixedStrategy, u_now: &[f64], u_prev: Option<&[f64]>, eta: f64) -> Result<MixedStrategy> {
    let g: Vec<f64> = match u_prev {
        Some(prev) => {
            if prev.len() != u_now.len() {
                return Err(Error::DimensionMismatch {
                    player: 0,
                    expected: u_now.len(),
                    found: prev.len(),
                });
            }
            u_now.iter().zip(prev).map(|(a, b)| 2.0 * a - b).collect()
        }
        None => u_now.iter().map(|a| 2.0 * a).collect(),
    };
    exponentiated_step(x, &g, eta)
}

/// A single MWU or OMWU learner.
#[derive(Debug, Clone)]
pub struct ExpWeightsLearner {
    strategy: MixedStrategy,
    eta: f64,
    optimistic: bool,
    previous: Option<Vec<f64>>,
}

impl ExpWeightsLearner {
    pub fn new(initial: MixedStrategy, eta: f64, optimistic: bool) -> Result<Self> {
        check_rate(eta)?;
        if let Some(index) = initial.probs().iter().position(|&p| p <= 0.0) {
            return Err(Error::NotInterior { index });
        }
        Ok(Self {
            strategy: initial,
            eta,
            optimistic,
            previous: None,
        })
    }

    pub fn strategy(&self) -> &MixedStrategy {
        &self.strategy
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn update(&mut self, u: &[f64]) -> Result<()> {
        self.strategy = if self.optimistic {
            let next = omwu_step(&self.strategy, u, self.previous.as_deref(), self.eta)?;
            self.previous = Some(u.to_vec());
            next
        } else {
            mwu_step(&self.strategy, u, self.eta)?
        };
        Ok(())
    }
}

/// External-regret bookkeeping for one player.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretLedger {
    /// `Σ_t u^(t)`.
    pub cumulative_utility: Vec<f64>,
    /// `Σ_t ⟨x^(t), u^(t)⟩`.
    pub realized: f64,
    pub steps: usize,
    #[serde(skip)]
    audit: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl RegretLedger {
    pub fn new(actions: usize, audit: bool) -> Self {
        Self {
            cumulative_utility: vec![0.0; actions],
            realized: 0.0,
            steps: 0,
            audit: audit.then(Vec::new),
        }
    }

    pub fn record(&mut self, x: &MixedStrategy, u: &[f64]) {
        for (c, v) in self.cumulative_utility.iter_mut().zip(u) {
            *c += v;
        }
        self.realized += x.dot(u);
        self.steps += 1;
        if let Some(log) = &mut self.audit {
            log.push((x.probs().to_vec(), u.to_vec()));
        }
    }

    /// `max_a Σ_t u^(t)[a] − Σ_t ⟨x^(t), u^(t)⟩`.
    pub fn regret(&self) -> f64 {
        nfg::argmax(&self.cumulative_utility).1 - self.realized
    }

    /// Regret recomputed from the stored per-step data, when auditing.
    pub fn audited_regret(&self) -> Option<f64> {
        let log = self.audit.as_ref()?;
        let n = self.cumulative_utility.len();
        let best = (0..n)
            .map(|a| log.iter().map(|(_, u)| u[a]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        let realized: f64 = log
            .iter()
            .map(|(x, u)| x.iter().zip(u).map(|(p, v)| p * v).sum::<f64>())
            .sum();
        Some(best - realized)
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub trajectory: Vec<MixedProfile>,
    pub ledgers: Vec<RegretLedger>,
    pub mixture: SparseCorrelated<MixedProfile>,
    pub learning_rates: Vec<f64>,
}

impl DynamicsRun {
    pub fn regrets(&self) -> Vec<f64> {
        self.ledgers.iter().map(RegretLedger::regret).collect()
    }
}

/// Simultaneous self-play under expected-utility feedback for `iterations` rounds.
pub fn run_dynamics(game: &NormalFormGame, configs: &[LearnerConfig], iterations: usize) -> Result<DynamicsRun> {
    if iterations == 0 {
        return Err(Error::NoIterations);
    }
    let n = game.player_count();
    if configs.len() != n {
        return Err(Error::PlayerCountMismatch {
            expected: n,
            found: configs.len(),
        });
    }
    let mut learners = Vec::with_capacity(n);
    for (player, cfg) in configs.iter().enumerate() {
        let actions = game.action_counts()[player];
        let initial = cfg.initial.clone().unwrap_or_else(|| MixedStrategy::uniform(actions));
        if initial.len() != actions {
            return Err(Error::DimensionMismatch {
                player,
                expected: actions,
                found: initial.len(),
            });
        }
        let eta = cfg
            .learning_rate
            .unwrap_or_else(|| default_learning_rate(actions, iterations));
        learners.push(ExpWeightsLearner::new(initial, eta, cfg.algorithm == Algorithm::Omwu)?);
    }
    let mut ledgers: Vec<RegretLedger> = game
        .action_counts()
        .iter()
        .map(|&c| RegretLedger::new(c, false))
        .collect();
    let mut trajectory = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let profile = MixedProfile::new(learners.iter().map(|l| l.strategy().clone()).collect());
        let opp = profile.as_opponents();
        let feedback: Vec<Vec<f64>> = (0..n)
            .map(|p| nfg::utility_vector(game, p, &opp))
            .collect::<Result<_>>()?;
        for (p, u) in feedback.iter().enumerate() {
            ledgers[p].record(profile.strategy(p), u);
            learners[p].update(u)?;
        }
        trajectory.push(profile);
    }
    Ok(DynamicsRun {
        mixture: SparseCorrelated::uniform(trajectory.clone())?,
        learning_rates: learners.iter().map(|l| l.eta()).collect(),
        trajectory,
        ledgers,
    })
}

/// `u_i^(t)` at the lifted game's root state; re-exported for symmetry with the
/// normal-form API.
pub use crate::nfg::utility_vector;

/// Counterfactual utility vectors `v_{i,s}[a] = π_{−i}(s) · E[round + continuation | a]`
/// for every player at every decision state, from one tree pass.
pub fn counterfactual_utilities(lg: &LiftedGame, profile: &BehavioralProfile) -> [BTreeMap<StateId, Vec<f64>>; 3] {
    let mut out: [BTreeMap<StateId, Vec<f64>>; 3] = Default::default();
    let mut path = Vec::with_capacity(lg.horizon());
    cf_pass(lg, profile, &mut path, [1.0; 3], &mut out);
    out
}

fn cf_pass(
    lg: &LiftedGame,
    profile: &BehavioralProfile,
    path: &mut Vec<JointAction>,
    reach: [f64; 3],
    out: &mut [BTreeMap<StateId, Vec<f64>>; 3],
) -> [f64; 3] {
    let x = Player::ALL.map(|p| profile.strategy(p).at(path).clone());
    let last = path.len() + 1 == lg.horizon();
    let mut cf: [Vec<f64>; 3] = Player::ALL.map(|p| vec![0.0; lg.action_count(p)]);
    let mut value = [0.0; 3];
    for j in lg.joint_actions() {
        let probs = [x[0][j.a1], x[1][j.a2], x[2][j.kibitzer]];
        let continuation = if last {
            [0.0; 3]
        } else {
            let child_reach = [reach[0] * probs[0], reach[1] * probs[1], reach[2] * probs[2]];
            path.push(j);
            let v = cf_pass(lg, profile, path, child_reach, out);
            path.pop();
            v
        };
        let u = lg.round_utility(&j);
        let p_all = probs[0] * probs[1] * probs[2];
        for player in Player::ALL {
            let i = player.index();
            let [o1, o2] = player.others();
            let p_others = probs[o1.index()] * probs[o2.index()];
            let total = u[i] + continuation[i];
            cf[i][j.action_of(player)] += p_others * total;
            value[i] += p_all * total;
        }
    }
    let state = StateId::from_history(path.clone());
    for player in Player::ALL {
        let [o1, o2] = player.others();
        let pi_others = reach[o1.index()] * reach[o2.index()];
        let v: Vec<f64> = cf[player.index()].iter().map(|c| pi_others * c).collect();
        out[player.index()].insert(state.clone(), v);
    }
    value
}

/// Per-state Hedge for all three players of the lifted game.
#[derive(Debug, Clone)]
pub struct HedgeLifted {
    lg: LiftedGame,
    etas: [f64; 3],
    current: BehavioralProfile,
    iterations: usize,
}

impl HedgeLifted {
    /// Uniform start when `seed` is `None`; otherwise every state starts at a
    /// seeded interior point (stream = player index).
    pub fn new(lg: &LiftedGame, etas: [f64; 3], seed: Option<u64>) -> Result<Self> {
        etas.iter().try_for_each(|&e| check_rate(e))?;
        let mut current = BehavioralProfile::uniform(lg);
        for player in Player::ALL {
            let n = lg.action_count(player);
            let mut r = seed.map(|s| rng::stream(s, player.index() as u64));
            let strategy = current.strategy_mut(player);
            for s in lg.states() {
                let x = match r.as_mut() {
                    Some(r) => MixedStrategy::from_trusted(rng::interior_simplex_point(r, n)),
                    None => MixedStrategy::uniform(n),
                };
                strategy.set(s, x);
            }
        }
        Ok(Self {
            lg: lg.clone(),
            etas,
            current,
            iterations: 0,
        })
    }

    pub fn current(&self) -> &BehavioralProfile {
        &self.current
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// One simultaneous update of every state of every player.
    pub fn step(&mut self) -> Result<()> {
        let cf = counterfactual_utilities(&self.lg, &self.current);
        for player in Player::ALL {
            let eta = self.etas[player.index()];
            let strategy = self.current.strategy_mut(player);
            for (state, u) in &cf[player.index()] {
                let next = mwu_step(strategy.at(state.history()), u, eta)?;
                strategy.set(state.clone(), next);
            }
        }
        self.iterations += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HedgeRun {
    pub components: Vec<BehavioralProfile>,
    pub mixture: SparseCorrelated<BehavioralProfile>,
}

/// `iterations` rounds of per-state Hedge; component `t` is the profile played at round `t`.
pub fn run_hedge_lifted(lg: &LiftedGame, etas: [f64; 3], iterations: usize, seed: Option<u64>) -> Result<HedgeRun> {
    if iterations == 0 {
        return Err(Error::NoIterations);
    }
    let mut learner = HedgeLifted::new(lg, etas, seed)?;
    let mut components = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        components.push(learner.current().clone());
        learner.step()?;
    }
    Ok(HedgeRun {
        mixture: SparseCorrelated::uniform(components.clone())?,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted::lift;
    use crate::nfg::{random_bimatrix, BimatrixGame, StandardGame};
    use crate::strategies::cce_gap_lifted;

    fn ms(p: &[f64]) -> MixedStrategy {
        MixedStrategy::new(p.to_vec()).unwrap()
    }

    #[test]
    fn utility_vector_examples() {
        let g = StandardGame::MatchingPennies.build().to_nfg();
        let u = MixedStrategy::uniform(2);
        assert_eq!(utility_vector(&g, 0, &[None, Some(&u)]).unwrap(), vec![0.0, 0.0]);
        let x1 = ms(&[0.6, 0.4]);
        let v = utility_vector(&g, 1, &[Some(&x1), None]).unwrap();
        assert!((v[0] + 0.2).abs() < 1e-12 && (v[1] - 0.2).abs() < 1e-12);

        // self-recommending Kibitzer zeroes the round for players 1 and 2
        let lg = lift(&random_bimatrix(3, 4), 2).unwrap();
        let round = lg.round_game();
        let x2 = ms(&[0.2, 0.3, 0.5]);
        let k = MixedStrategy::pure(6, 1);
        let p1 = MixedStrategy::pure(3, 1);
        assert_eq!(utility_vector(&round, 0, &[None, Some(&x2), Some(&k)]).unwrap()[1], 0.0);
        assert!(utility_vector(&round, 1, &[Some(&p1), None, Some(&k)])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn mwu_examples() {
        let half = MixedStrategy::uniform(2);
        let x = mwu_step(&half, &[1.0, 0.0], std::f64::consts::LN_2).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);

        let y = ms(&[0.2, 0.3, 0.5]);
        let z = mwu_step(&y, &[0.7, 0.7, 0.7], 0.4).unwrap();
        for a in 0..3 {
            assert!((z[a] - y[a]).abs() < 1e-15);
        }

        // closed form 1/(1+e^{0.04}) evaluated at 30 digits: 0.490001333120034534...
        let w = mwu_step(&half, &[-0.2, 0.2], 0.1).unwrap();
        assert!((w[0] - 0.490_001_333_120_035).abs() < 1e-12);
        assert!((w[1] - 0.509_998_666_879_965).abs() < 1e-12);
    }

    #[test]
    fn mwu_rejects_boundary_and_bad_rates() {
        let x = ms(&[1.0, 0.0]);
        assert_eq!(mwu_step(&x, &[0.0, 1.0], 0.1).unwrap_err(), Error::NotInterior { index: 1 });
        let half = MixedStrategy::uniform(2);
        assert!(mwu_step(&half, &[0.0, 1.0], 0.0).is_err());
        assert!(mwu_step(&half, &[0.0, 1.0], f64::NAN).is_err());
    }

    #[test]
    fn omwu_examples() {
        let x = ms(&[0.3, 0.7]);
        let u = [0.4, -0.9];
        assert_eq!(
            omwu_step(&x, &u, Some(&u), 0.25).unwrap(),
            mwu_step(&x, &u, 0.25).unwrap()
        );
        let half = MixedStrategy::uniform(2);
        let y = omwu_step(&half, &[1.0, 0.0], None, std::f64::consts::LN_2 / 2.0).unwrap();
        assert!((y[0] - 2.0 / 3.0).abs() < 1e-15);
        // 2·u_now − u_prev constant
        let z = omwu_step(&x, &[0.5, 0.25], Some(&[0.5, 0.0]), 0.3).unwrap();
        assert!((z[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pennies_uniform_is_fixed_point() {
        let g = StandardGame::MatchingPennies.build().to_nfg();
        for eta in [0.05, 0.7] {
            let cfg = LearnerConfig::new(Algorithm::Mwu, eta);
            let run = run_dynamics(&g, &[cfg.clone(), cfg], 25).unwrap();
            assert!(run.trajectory.iter().all(|p| p == &MixedProfile::uniform(&[2, 2])));
            assert_eq!(run.regrets(), vec![0.0, 0.0]);
            assert_eq!(nfg::cce_gap(&g, &run.mixture).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn single_step_regret_is_best_response_gap() {
        let g = random_bimatrix(3, 11).to_nfg();
        let cfg = LearnerConfig::new(Algorithm::Omwu, 0.2);
        let run = run_dynamics(&g, &[cfg.clone(), cfg], 1).unwrap();
        let p = &run.trajectory[0];
        for player in 0..2 {
            let (br, _) = nfg::best_response(&g, player, &p.as_opponents()).unwrap();
            let eu = nfg::expected_utility(&g, p, player).unwrap();
            assert!((run.ledgers[player].regret() - (br - eu)).abs() < 1e-12);
        }
    }

    #[test]
    fn regret_equals_cce_gap_times_t() {
        let g = random_bimatrix(3, 7).to_nfg();
        let cfg = LearnerConfig::new(Algorithm::Mwu, 0.1);
        let run = run_dynamics(&g, &[cfg.clone(), cfg], 200).unwrap();
        let gap = nfg::cce_gap(&g, &run.mixture).unwrap();
        for (p, r) in run.regrets().iter().enumerate() {
            assert!((gap[p] - r / 200.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn audited_ledger_agrees() {
        let mut ledger = RegretLedger::new(2, true);
        ledger.record(&ms(&[0.5, 0.5]), &[1.0, -1.0]);
        ledger.record(&ms(&[0.9, 0.1]), &[-0.5, 0.25]);
        assert!((ledger.regret() - ledger.audited_regret().unwrap()).abs() < 1e-15);
        assert!(RegretLedger::new(2, false).audited_regret().is_none());
    }

    #[test]
    fn default_rate() {
        assert!((default_learning_rate(4, 100) - (4f64.ln() / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(default_learning_rate(1, 100), 1.0);
    }

    #[test]
    fn hedge_single_state_matches_round_game_dynamics() {
        let lg = lift(&StandardGame::MatchingPennies.build(), 1).unwrap();
        let etas = [0.3, 0.2, 0.1];
        let init = HedgeLifted::new(&lg, etas, Some(5)).unwrap();
        let root = StateId::root();
        let configs: Vec<LearnerConfig> = Player::ALL
            .iter()
            .map(|p| LearnerConfig {
                algorithm: Algorithm::Mwu,
                learning_rate: Some(etas[p.index()]),
                initial: Some(init.current().strategy(*p).at(root.history()).clone()),
            })
            .collect();
        let nf = run_dynamics(&lg.round_game(), &configs, 30).unwrap();
        let hedge = run_hedge_lifted(&lg, etas, 30, Some(5)).unwrap();
        for (c, p) in hedge.components.iter().zip(&nf.trajectory) {
            for player in Player::ALL {
                let a = c.strategy(player).at(&[]);
                let b = p.strategy(player.index());
                for i in 0..a.len() {
                    assert!((a[i] - b[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_game_stays_uniform() {
        let zero = BimatrixGame::new(vec![vec![0.0; 2]; 2], vec![vec![0.0; 2]; 2]).unwrap();
        let lg = lift(&zero, 2).unwrap();
        let run = run_hedge_lifted(&lg, [0.5; 3], 10, None).unwrap();
        let uniform = BehavioralProfile::uniform(&lg);
        for c in &run.components {
            for s in lg.states() {
                for p in Player::ALL {
                    assert_eq!(c.strategy(p).at(s.history()), uniform.strategy(p).at(&[]));
                }
            }
        }
    }

    #[test]
    fn hedge_gap_shrinks() {
        let lg = lift(&StandardGame::MatchingPennies.build(), 2).unwrap();
        let run = run_hedge_lifted(&lg, [0.2; 3], 50, Some(3)).unwrap();
        let early = SparseCorrelated::uniform(run.components[..5].to_vec()).unwrap();
        let g5 = cce_gap_lifted(&lg, &early).unwrap();
        let g50 = cce_gap_lifted(&lg, &run.mixture).unwrap();
        let max = |g: [f64; 3]| g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(max(g50) <= max(g5), "{g50:?} vs {g5:?}");
    }
}
