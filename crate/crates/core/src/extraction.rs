//! Recovering an approximate Nash equilibrium of the base game from a sparse
//! CCE of the lifted game.
//!
//! At each state `s` the components are reweighted by the likelihood of
//! player `i`'s observed past actions (an exponential-weights posterior over
//! `[T]`), and `q̂_{i,s}` is the posterior mixture of the components'
//! strategies at `s`. States are scanned depth by depth until `(q̂₁, q̂₂)` is
//! within the threshold of a Nash equilibrium.

use serde::Serialize;

use crate::correlated::SparseCorrelated;
use crate::density::{log_loss, mixture, posterior_from_log_weights};
use crate::error::{Error, Result};
use crate::lifted::{prev_states, state_to_seq, LiftedGame, Player, StateId};
use crate::nfg::{self, BimatrixGame, MixedProfile, MixedStrategy};
use crate::strategies::BehavioralProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionConfig {
    pub ne_threshold: f64,
    /// Keep scanning after the first success and record every state's gap.
    pub enumerate_all: bool,
}

impl ExtractionConfig {
    pub fn new(ne_threshold: f64) -> Self {
        Self {
            ne_threshold,
            enumerate_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Found {
        profile: [MixedStrategy; 2],
        state: StateId,
        depth: usize,
        gap: f64,
    },
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateGap {
    pub state: String,
    pub depth: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub outcome: Outcome,
    pub states_scanned: usize,
    pub min_gap: f64,
    pub min_gap_state: StateId,
    /// Every scanned state's gap in scan order, when `enumerate_all` is set.
    pub gaps: Option<Vec<StateGap>>,
}

impl ExtractionReport {
    pub fn is_found(&self) -> bool {
        matches!(self.outcome, Outcome::Found { .. })
    }

    pub fn found_profile(&self) -> Option<&[MixedStrategy; 2]> {
        match &self.outcome {
            Outcome::Found { profile, .. } => Some(profile),
            Outcome::Failed => None,
        }
    }
}

#[derive(Serialize)]
struct ReportRepr<'a> {
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<&'a [MixedStrategy; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    states_scanned: usize,
    min_gap: f64,
    min_gap_state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaps: Option<&'a [StateGap]>,
}

impl Serialize for ExtractionReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (outcome, profile, state, depth, gap) = match &self.outcome {
            Outcome::Found {
                profile,
                state,
                depth,
                gap,
            } => ("found", Some(profile), Some(state.key()), Some(*depth), Some(*gap)),
            Outcome::Failed => ("failed", None, None, None, None),
        };
        ReportRepr {
            outcome,
            profile,
            state,
            depth,
            gap,
            states_scanned: self.states_scanned,
            min_gap: self.min_gap,
            min_gap_state: self.min_gap_state.key(),
            gaps: self.gaps.as_deref(),
        }
        .serialize(serializer)
    }
}

fn check_base_player(player: Player) {
    assert!(player != Player::Kibitzer, "posteriors are formed for players 1 and 2 only");
}

/// Log-likelihood of `player`'s actions along the history of `s`, per component.
fn history_log_likelihood(player: Player, s: &StateId, components: &[BehavioralProfile]) -> Vec<f64> {
    let actions = state_to_seq(s);
    let prefixes = prev_states(s);
    components
        .iter()
        .map(|c| {
            let strategy = c.strategy(player);
            let mut lw = 0.0;
            for (prefix, joint) in prefixes.iter().zip(actions) {
                lw -= log_loss(strategy.at(prefix.history()).probs(), joint.action_of(player));
            }
            lw
        })
        .collect()
}

fn uniform_weights(t: usize) -> Vec<f64> {
    vec![1.0 / t as f64; t]
}

/// Posterior over component indices at `s` for `player` ∈ {One, Two}; uniform
/// when no component can produce the observed history.
pub fn posterior(player: Player, s: &StateId, components: &[BehavioralProfile]) -> Vec<f64> {
    check_base_player(player);
    let lw = history_log_likelihood(player, s, components);
    posterior_from_log_weights(&lw).unwrap_or_else(|| uniform_weights(components.len()))
}

/// `q̂_{i,s} = Σ_t posterior[t] · x^(t)_{i,s}`.
pub fn estimate(player: Player, s: &StateId, components: &[BehavioralProfile]) -> MixedStrategy {
    let post = posterior(player, s, components);
    mix_at(player, s, components, &post)
}

fn mix_at(player: Player, s: &StateId, components: &[BehavioralProfile], post: &[f64]) -> MixedStrategy {
    let q = mixture(post, components.iter().map(|c| c.strategy(player).at(s.history()).probs()));
    MixedStrategy::from_trusted(q)
}

/// Largest gain from the Kibitzer's best recommendation against `(q1, q2)`,
/// computed from the payoff matrices directly.
pub fn kibitzer_gap(game: &BimatrixGame, q1: &MixedStrategy, q2: &MixedStrategy) -> f64 {
    let m = game.m();
    let row = |a1: usize| (0..m).map(|a2| q2[a2] * game.m1(a1, a2)).sum::<f64>();
    let col = |a2: usize| (0..m).map(|a1| q1[a1] * game.m2(a1, a2)).sum::<f64>();
    let rows: Vec<f64> = (0..m).map(row).collect();
    let cols: Vec<f64> = (0..m).map(col).collect();
    let v1: f64 = (0..m).map(|a| q1[a] * rows[a]).sum();
    let v2: f64 = (0..m).map(|a| q2[a] * cols[a]).sum();
    let best1 = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best2 = cols.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (best1 - v1).max(best2 - v2)
}

/// Scans the lifted game's states and returns the first `(q̂₁, q̂₂)` whose
/// Nash gap in `game` is at most `cfg.ne_threshold`.
pub fn extract_nash(
    game: &BimatrixGame,
    lg: &LiftedGame,
    mu: &SparseCorrelated<BehavioralProfile>,
    cfg: &ExtractionConfig,
) -> Result<ExtractionReport> {
    if lg.base() != game {
        return Err(Error::GameMismatch);
    }
    if cfg.ne_threshold.is_nan() || cfg.ne_threshold < 0.0 {
        return Err(Error::InvalidInput(format!("threshold {}", cfg.ne_threshold)));
    }
    if !mu.is_uniform() {
        return Err(Error::NonUniformWeights);
    }
    let components = mu.components();
    for c in components {
        c.check(lg)?;
    }
    let nf = game.to_nfg();
    let t = components.len();
    let players = [Player::One, Player::Two];

    let mut outcome = Outcome::Failed;
    let mut scanned = 0;
    let mut min_gap = f64::INFINITY;
    let mut min_state = StateId::root();
    let mut gaps = cfg.enumerate_all.then(Vec::new);

    // states of the current depth in lexicographic order, each with its
    // per-player history log-likelihoods
    let mut layer: Vec<(StateId, [Vec<f64>; 2])> = vec![(StateId::root(), [vec![0.0; t], vec![0.0; t]])];
    for depth in 1..=lg.horizon() {
        for (s, lw) in &layer {
            let q: [MixedStrategy; 2] = [0, 1].map(|i| {
                let post = posterior_from_log_weights(&lw[i]).unwrap_or_else(|| uniform_weights(t));
                mix_at(players[i], s, components, &post)
            });
            let gap = nfg::ne_gap(&nf, &MixedProfile::new(q.to_vec()))?;
            scanned += 1;
            if gap < min_gap {
                min_gap = gap;
                min_state = s.clone();
            }
            if let Some(g) = gaps.as_mut() {
                g.push(StateGap {
                    state: s.key(),
                    depth,
                    gap,
                });
            }
            if gap <= cfg.ne_threshold && outcome == Outcome::Failed {
                outcome = Outcome::Found {
                    profile: q,
                    state: s.clone(),
                    depth,
                    gap,
                };
                if !cfg.enumerate_all {
                    return Ok(ExtractionReport {
                        outcome,
                        states_scanned: scanned,
                        min_gap,
                        min_gap_state: min_state,
                        gaps,
                    });
                }
            }
        }
        if depth == lg.horizon() {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * lg.joint_action_count());
        for (s, lw) in &layer {
            let here = [0, 1].map(|i| {
                components
                    .iter()
                    .map(|c| c.strategy(players[i]).at(s.history()))
                    .collect::<Vec<_>>()
            });
            for j in lg.joint_actions() {
                let child = [0, 1].map(|i| {
                    let a = j.action_of(players[i]);
                    lw[i]
                        .iter()
                        .zip(&here[i])
                        .map(|(l, x)| l - log_loss(x.probs(), a))
                        .collect::<Vec<f64>>()
                });
                next.push((s.child(j), child));
            }
        }
        layer = next;
    }
    Ok(ExtractionReport {
        outcome,
        states_scanned: scanned,
        min_gap,
        min_gap_state: min_state,
        gaps,
    })
}
