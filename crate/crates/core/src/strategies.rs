//! Behavioral strategies over the lifted game, profile evaluation, and the
//! exact best-response dynamic program against sparse mixtures.
//!
//! Histories are public, so a behavioral strategy keyed by [`StateId`] is as
//! expressive as the sequence form. Each strategy carries a state-independent
//! default and per-state overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::correlated::SparseCorrelated;
use crate::error::{Error, Result};
use crate::lifted::{JointAction, LiftedGame, Player, StateId};
use crate::nfg::MixedStrategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyRepr", into = "StrategyRepr")]
pub struct BehavioralStrategy {
    default: MixedStrategy,
    overrides: BTreeMap<StateId, MixedStrategy>,
}

#[derive(Serialize, Deserialize)]
struct StrategyRepr {
    default: MixedStrategy,
    #[serde(default)]
    overrides: BTreeMap<String, MixedStrategy>,
}

impl TryFrom<StrategyRepr> for BehavioralStrategy {
    type Error = Error;

    fn try_from(r: StrategyRepr) -> Result<Self> {
        let overrides = r
            .overrides
            .into_iter()
            .map(|(k, v)| Ok((k.parse::<StateId>()?, v)))
            .collect::<Result<_>>()?;
        Ok(Self {
            default: r.default,
            overrides,
        })
    }
}

impl From<BehavioralStrategy> for StrategyRepr {
    fn from(s: BehavioralStrategy) -> Self {
        StrategyRepr {
            default: s.default,
            overrides: s.overrides.into_iter().map(|(k, v)| (k.key(), v)).collect(),
        }
    }
}

impl BehavioralStrategy {
    /// Plays `default` at every state.
    pub fn stationary(default: MixedStrategy) -> Self {
        Self {
            default,
            overrides: BTreeMap::new(),
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self::stationary(MixedStrategy::uniform(n))
    }

    pub fn set(&mut self, state: StateId, strategy: MixedStrategy) {
        self.overrides.insert(state, strategy);
    }

    pub fn with_override(mut self, state: StateId, strategy: MixedStrategy) -> Self {
        self.set(state, strategy);
        self
    }

    /// Distribution played at the state reached by `history`.
    pub fn at(&self, history: &[JointAction]) -> &MixedStrategy {
        self.overrides.get(history).unwrap_or(&self.default)
    }

    pub fn default_strategy(&self) -> &MixedStrategy {
        &self.default
    }

    pub fn overrides(&self) -> &BTreeMap<StateId, MixedStrategy> {
        &self.overrides
    }

    pub fn arity(&self) -> usize {
        self.default.len()
    }
}

/// Behavioral strategies of players 1, 2 and the Kibitzer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralProfile {
    pub p1: BehavioralStrategy,
    pub p2: BehavioralStrategy,
    pub k: BehavioralStrategy,
}

impl BehavioralProfile {
    pub fn new(p1: BehavioralStrategy, p2: BehavioralStrategy, k: BehavioralStrategy) -> Self {
        Self { p1, p2, k }
    }

    pub fn uniform(lg: &LiftedGame) -> Self {
        let [a, b, c] = lg.action_counts();
        Self::new(
            BehavioralStrategy::uniform(a),
            BehavioralStrategy::uniform(b),
            BehavioralStrategy::uniform(c),
        )
    }

    pub fn strategy(&self, player: Player) -> &BehavioralStrategy {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
            Player::Kibitzer => &self.k,
        }
    }

    pub fn strategy_mut(&mut self, player: Player) -> &mut BehavioralStrategy {
        match player {
            Player::One => &mut self.p1,
            Player::Two => &mut self.p2,
            Player::Kibitzer => &mut self.k,
        }
    }

    /// Probability that this profile plays `j` at `history`.
    pub fn joint_prob(&self, history: &[JointAction], j: &JointAction) -> f64 {
        self.p1.at(history)[j.a1] * self.p2.at(history)[j.a2] * self.k.at(history)[j.kibitzer]
    }

    /// Arity of every distribution and validity of every override key.
    pub fn check(&self, lg: &LiftedGame) -> Result<()> {
        for player in Player::ALL {
            let expected = lg.action_count(player);
            let s = self.strategy(player);
            let arity_err = |found| Error::DimensionMismatch {
                player: player.index(),
                expected,
                found,
            };
            if s.arity() != expected {
                return Err(arity_err(s.arity()));
            }
            for (state, x) in &s.overrides {
                lg.check_state(state)?;
                if x.len() != expected {
                    return Err(arity_err(x.len()));
                }
            }
        }
        Ok(())
    }
}

/// Both players of `G` play the stationary profile `(q1, q2)` and the
/// Kibitzer always recommends to player 1 the first action in `q1`'s support.
/// When `(q1, q2)` is a Nash equilibrium of the base game this is a Nash
/// equilibrium of the lifted game.
pub fn stationary_nash_component(lg: &LiftedGame, q1: &MixedStrategy, q2: &MixedStrategy) -> BehavioralProfile {
    let m = lg.m();
    let first = q1.probs().iter().position(|&p| p > 0.0).unwrap_or(0);
    BehavioralProfile::new(
        BehavioralStrategy::stationary(q1.clone()),
        BehavioralStrategy::stationary(q2.clone()),
        BehavioralStrategy::stationary(MixedStrategy::pure(2 * m, first)),
    )
}

/// Seeded profile with an interior override at every decision state.
pub fn random_profile(lg: &LiftedGame, seed: u64) -> BehavioralProfile {
    let mut r = crate::rng::seeded(seed);
    let mut profile = BehavioralProfile::uniform(lg);
    for s in lg.states() {
        for p in Player::ALL {
            let x = crate::rng::interior_simplex_point(&mut r, lg.action_count(p));
            profile.strategy_mut(p).set(s.clone(), MixedStrategy::from_trusted(x));
        }
    }
    profile
}

/// Expected leaf utilities of all three players.
pub fn eval_all(lg: &LiftedGame, profile: &BehavioralProfile) -> Result<[f64; 3]> {
    profile.check(lg)?;
    let mut acc = [0.0; 3];
    let mut path = Vec::with_capacity(lg.horizon());
    forward(lg, profile, &mut path, 1.0, &mut acc);
    Ok(acc)
}

pub fn eval_profile(lg: &LiftedGame, profile: &BehavioralProfile, player: Player) -> Result<f64> {
    Ok(eval_all(lg, profile)?[player.index()])
}

fn forward(
    lg: &LiftedGame,
    profile: &BehavioralProfile,
    path: &mut Vec<JointAction>,
    reach: f64,
    acc: &mut [f64; 3],
) {
    let last = path.len() + 1 == lg.horizon();
    for j in lg.joint_actions() {
        let p = profile.joint_prob(path, &j);
        if p == 0.0 {
            continue;
        }
        let r = reach * p;
        let u = lg.round_utility(&j);
        for (a, v) in acc.iter_mut().zip(u) {
            *a += r * v;
        }
        if !last {
            path.push(j);
            forward(lg, profile, path, r, acc);
            path.pop();
        }
    }
}

/// `Σ_t w_t · u(x^(t))` for every player.
pub fn mixture_value(lg: &LiftedGame, mu: &SparseCorrelated<BehavioralProfile>) -> Result<[f64; 3]> {
    let mut total = [0.0; 3];
    for (w, c) in mu.iter() {
        let v = eval_all(lg, c)?;
        for (t, x) in total.iter_mut().zip(v) {
            *t += w * x;
        }
    }
    Ok(total)
}

/// Value of the best behavioral deviation of `player` against the weighted
/// mixture of the other two players' products.
///
/// Bottom-up DP over public histories. Each component carries the
/// unnormalized weight `w_t · Π(opponent reach)`; the deviator picks, at
/// every state, the action maximizing the weighted round utility plus
/// continuation.
pub fn best_response_value(
    lg: &LiftedGame,
    player: Player,
    mu: &SparseCorrelated<BehavioralProfile>,
) -> Result<f64> {
    for c in mu.components() {
        c.check(lg)?;
    }
    let mut path = Vec::with_capacity(lg.horizon());
    Ok(deviation_dp(lg, player, mu.components(), &mut path, mu.weights()))
}

fn deviation_dp(
    lg: &LiftedGame,
    player: Player,
    components: &[BehavioralProfile],
    path: &mut Vec<JointAction>,
    weights: &[f64],
) -> f64 {
    let [o1, o2] = player.others();
    let n1 = lg.action_count(o1);
    let n2 = lg.action_count(o2);
    let opp: Vec<(&MixedStrategy, &MixedStrategy)> = components
        .iter()
        .map(|c| (c.strategy(o1).at(path), c.strategy(o2).at(path)))
        .collect();
    let last = path.len() + 1 == lg.horizon();
    let template = JointAction { a1: 0, a2: 0, kibitzer: 0 };
    let mut child_w = vec![0.0; components.len()];
    let mut best = f64::NEG_INFINITY;
    for a in 0..lg.action_count(player) {
        let mut total = 0.0;
        for b1 in 0..n1 {
            for b2 in 0..n2 {
                let mut mass = 0.0;
                for (t, (x1, x2)) in opp.iter().enumerate() {
                    child_w[t] = weights[t] * x1[b1] * x2[b2];
                    mass += child_w[t];
                }
                if mass == 0.0 {
                    continue;
                }
                let j = template
                    .with_action(player, a)
                    .with_action(o1, b1)
                    .with_action(o2, b2);
                total += mass * lg.round_utility(&j)[player.index()];
                if !last {
                    path.push(j);
                    total += deviation_dp(lg, player, components, path, &child_w);
                    path.pop();
                }
            }
        }
        if total > best {
            best = total;
        }
    }
    best
}

/// `gap_i = best_response_value(i) − Σ_t w_t u_i(x^(t))` for players 1, 2, K.
pub fn cce_gap_lifted(lg: &LiftedGame, mu: &SparseCorrelated<BehavioralProfile>) -> Result<[f64; 3]> {
    let on_path = mixture_value(lg, mu)?;
    let mut gaps = [0.0; 3];
    for p in Player::ALL {
        gaps[p.index()] = best_response_value(lg, p, mu)? - on_path[p.index()];
    }
    Ok(gaps)
}
