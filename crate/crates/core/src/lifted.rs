//! The three-player lifted game: `H` repetitions of a bimatrix game plus
//! the Kibitzer, with every joint action publicly observed.
//!
//! States are identified by their joint-action history and the tree is never
//! materialized; [`LiftedGame::states_at_depth`] enumerates it on demand.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nfg::{BimatrixGame, NormalFormGame};

/// Players of the lifted game; `Kibitzer` is player index 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
    Kibitzer,
}

impl Player {
    pub const ALL: [Player; 3] = [Player::One, Player::Two, Player::Kibitzer];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
            Player::Kibitzer => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// The two players other than `self`, in index order.
    pub fn others(self) -> [Player; 2] {
        match self {
            Player::One => [Player::Two, Player::Kibitzer],
            Player::Two => [Player::One, Player::Kibitzer],
            Player::Kibitzer => [Player::One, Player::Two],
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::One => "p1",
            Player::Two => "p2",
            Player::Kibitzer => "k",
        })
    }
}

/// A Kibitzer recommendation: "player `target` should have played `action`".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KibitzerAction {
    pub target: Player,
    pub action: usize,
}

impl KibitzerAction {
    pub fn new(target: Player, action: usize) -> Self {
        assert!(target != Player::Kibitzer, "the Kibitzer only targets players 1 and 2");
        Self { target, action }
    }

    /// Canonical index `target·m + action` in `[0, 2m)`.
    pub fn index(self, m: usize) -> usize {
        self.target.index() * m + self.action
    }

    pub fn from_index(index: usize, m: usize) -> Self {
        let target = if index < m { Player::One } else { Player::Two };
        Self {
            target,
            action: index % m,
        }
    }
}

/// Actions of all three players in one round; the Kibitzer's is stored by
/// canonical index. Ordering is lexicographic on `(a1, a2, kibitzer)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction {
    pub a1: usize,
    pub a2: usize,
    pub kibitzer: usize,
}

impl JointAction {
    pub fn new(a1: usize, a2: usize, kibitzer: KibitzerAction, m: usize) -> Self {
        Self {
            a1,
            a2,
            kibitzer: kibitzer.index(m),
        }
    }

    pub fn action_of(&self, player: Player) -> usize {
        match player {
            Player::One => self.a1,
            Player::Two => self.a2,
            Player::Kibitzer => self.kibitzer,
        }
    }

    pub fn with_action(mut self, player: Player, action: usize) -> Self {
        match player {
            Player::One => self.a1 = action,
            Player::Two => self.a2 = action,
            Player::Kibitzer => self.kibitzer = action,
        }
        self
    }

    pub fn kibitzer_action(&self, m: usize) -> KibitzerAction {
        KibitzerAction::from_index(self.kibitzer, m)
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.a1, self.a2, self.kibitzer)
    }
}

/// A decision state, identified by the joint actions leading to it. The
/// root has an empty history; a state at repetition `h` has `h − 1` entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StateId(Vec<JointAction>);

impl StateId {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_history(history: Vec<JointAction>) -> Self {
        Self(history)
    }

    pub fn history(&self) -> &[JointAction] {
        &self.0
    }

    /// Repetition index `h` (1 for the root).
    pub fn depth(&self) -> usize {
        self.0.len() + 1
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, joint: JointAction) -> Self {
        let mut history = self.0.clone();
        history.push(joint);
        Self(history)
    }

    /// Canonical byte encoding: one big-endian `u16` triple `(a1, a2, k)` per round.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.0.len() * 6);
        for j in &self.0 {
            for v in [j.a1, j.a2, j.kibitzer] {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            }
        }
        out
    }

    /// Text key used in JSON files: rounds `a1.a2.k` joined by `/`; the root is `""`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl Borrow<[JointAction]> for StateId {
    fn borrow(&self) -> &[JointAction] {
        &self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

impl FromStr for StateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Self::root());
        }
        let bad = || Error::InvalidState(format!("cannot parse state key `{s}`"));
        s.split('/')
            .map(|round| {
                let parts: Vec<usize> = round
                    .split('.')
                    .map(|p| p.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                match parts.as_slice() {
                    &[a1, a2, kibitzer] => Ok(JointAction { a1, a2, kibitzer }),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Joint actions leading to `s`.
pub fn state_to_seq(s: &StateId) -> &[JointAction] {
    s.history()
}

/// All proper prefixes of `s`, root first; empty for the root.
pub fn prev_states(s: &StateId) -> Vec<StateId> {
    (0..s.0.len()).map(|k| StateId(s.0[..k].to_vec())).collect()
}

/// `Σ_{k=0}^{H} (2m³)^k`, counting every history prefix of length ≤ H.
pub fn node_count(m: usize, horizon: usize) -> Result<u128> {
    let branching = branching(m)?;
    let mut level: u128 = 1;
    let mut total: u128 = 1;
    for _ in 0..horizon {
        level = level.checked_mul(branching).ok_or(Error::Overflow("node count"))?;
        total = total.checked_add(level).ok_or(Error::Overflow("node count"))?;
    }
    Ok(total)
}

/// `2^{H+1} · m^{3H+3}`.
pub fn node_count_bound(m: usize, horizon: usize) -> Result<u128> {
    let exp = u32::try_from(3 * horizon + 3).map_err(|_| Error::Overflow("node bound"))?;
    let pow_m = (m as u128).checked_pow(exp).ok_or(Error::Overflow("node bound"))?;
    let pow_2 = 2u128
        .checked_pow(u32::try_from(horizon + 1).map_err(|_| Error::Overflow("node bound"))?)
        .ok_or(Error::Overflow("node bound"))?;
    pow_2.checked_mul(pow_m).ok_or(Error::Overflow("node bound"))
}

fn branching(m: usize) -> Result<u128> {
    (m as u128)
        .checked_pow(3)
        .and_then(|c| c.checked_mul(2))
        .ok_or(Error::Overflow("branching factor"))
}

/// `T(G)`: `H` repetitions of `G` with the Kibitzer.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedGame {
    base: BimatrixGame,
    horizon: usize,
}

/// Largest `m` whose Kibitzer index fits the `u16` state encoding.
pub const MAX_ACTIONS: usize = (u16::MAX as usize) / 2;

pub fn lift(base: &BimatrixGame, horizon: usize) -> Result<LiftedGame> {
    LiftedGame::new(base.clone(), horizon)
}

impl LiftedGame {
    pub fn new(base: BimatrixGame, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidHorizon);
        }
        if base.m() > MAX_ACTIONS {
            return Err(Error::TooManyActions(base.m()));
        }
        Ok(Self { base, horizon })
    }

    pub fn base(&self) -> &BimatrixGame {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    /// `m` for players 1 and 2, `2m` for the Kibitzer.
    pub fn action_count(&self, player: Player) -> usize {
        match player {
            Player::Kibitzer => 2 * self.m(),
            _ => self.m(),
        }
    }

    pub fn action_counts(&self) -> [usize; 3] {
        Player::ALL.map(|p| self.action_count(p))
    }

    /// `2m³`, the number of joint actions at every state.
    pub fn joint_action_count(&self) -> usize {
        2 * self.m().pow(3)
    }

    /// Joint action with canonical index `index` (lexicographic, Kibitzer fastest).
    pub fn joint_action(&self, index: usize) -> JointAction {
        let k = 2 * self.m();
        JointAction {
            a1: index / (self.m() * k),
            a2: (index / k) % self.m(),
            kibitzer: index % k,
        }
    }

    pub fn joint_actions(&self) -> impl Iterator<Item = JointAction> + '_ {
        (0..self.joint_action_count()).map(move |i| self.joint_action(i))
    }

    pub fn check_joint(&self, j: &JointAction) -> Result<()> {
        if j.a1 < self.m() && j.a2 < self.m() && j.kibitzer < 2 * self.m() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("joint action {j} out of range for m = {}", self.m())))
        }
    }

    /// Checks that `s` is a decision state of this game.
    pub fn check_state(&self, s: &StateId) -> Result<()> {
        if s.0.len() >= self.horizon {
            return Err(Error::InvalidState(format!(
                "history of length {} in a game with H = {}",
                s.0.len(),
                self.horizon
            )));
        }
        s.0.iter().try_for_each(|j| self.check_joint(j))
    }

    /// Per-round payoffs `(u1, u2, uK)`; they sum to exactly zero.
    pub fn round_utility(&self, j: &JointAction) -> [f64; 3] {
        let scale = 1.0 / self.horizon as f64;
        let rec = j.kibitzer_action(self.m());
        match rec.target {
            Player::One => {
                let u1 = scale * (self.base.m1(j.a1, j.a2) - self.base.m1(rec.action, j.a2));
                [u1, 0.0, -u1]
            }
            _ => {
                let u2 = scale * (self.base.m2(j.a1, j.a2) - self.base.m2(j.a1, rec.action));
                [0.0, u2, -u2]
            }
        }
    }

    /// Cumulative payoffs of a complete play of length `H`.
    pub fn leaf_utility(&self, path: &[JointAction]) -> Result<[f64; 3]> {
        if path.len() != self.horizon {
            return Err(Error::WrongPathLength {
                expected: self.horizon,
                found: path.len(),
            });
        }
        let mut total = [0.0; 3];
        for j in path {
            self.check_joint(j)?;
            let u = self.round_utility(j);
            for (t, v) in total.iter_mut().zip(u) {
                *t += v;
            }
        }
        Ok(total)
    }

    pub fn node_count(&self) -> Result<u128> {
        node_count(self.m(), self.horizon)
    }

    /// Decision states at repetition `h` in lexicographic order.
    pub fn states_at_depth(&self, h: usize) -> StatesAtDepth<'_> {
        assert!(h >= 1 && h <= self.horizon, "depth {h} outside 1..={}", self.horizon);
        StatesAtDepth {
            game: self,
            digits: vec![0; h - 1],
            done: false,
        }
    }

    /// All decision states, depth by depth.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (1..=self.horizon).flat_map(move |h| self.states_at_depth(h))
    }

    /// The one-shot three-player round game at repetition weight `1/H`.
    ///
    /// Its payoffs can reach `2/H`, so for `H = 1` they exceed `[-1, 1]`.
    pub fn round_game(&self) -> NormalFormGame {
        let utilities = self
            .joint_actions()
            .map(|j| self.round_utility(&j).to_vec())
            .collect();
        NormalFormGame::new_unbounded(self.action_counts().to_vec(), utilities)
            .expect("round game is well formed")
    }

    /// Sequential-move view of the tree: at every state player 1 moves, then
    /// player 2, then the Kibitzer, each without seeing the earlier moves of
    /// the same round.
    pub fn to_sequential(&self, budget: u128) -> Result<SequentialTree> {
        let m = self.m() as u128;
        let per_state = 1 + m + m * m;
        let states = node_count(self.m(), self.horizon - 1)?;
        let needed = states
            .checked_mul(per_state)
            .and_then(|n| n.checked_add(self.node_count().ok()? - states))
            .ok_or(Error::Overflow("sequential node count"))?;
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let mut tree = SequentialTree { nodes: Vec::new() };
        self.export_state(&StateId::root(), None, &mut tree);
        Ok(tree)
    }

    fn export_state(&self, s: &StateId, parent: Option<(usize, usize)>, tree: &mut SequentialTree) {
        let m = self.m();
        let key = s.key();
        let p1 = tree.push(SequentialNode::decision(Player::One, &key, parent));
        for a1 in 0..m {
            let p2 = tree.push(SequentialNode::decision(Player::Two, &key, Some((p1, a1))));
            for a2 in 0..m {
                let pk = tree.push(SequentialNode::decision(Player::Kibitzer, &key, Some((p2, a2))));
                for k in 0..2 * m {
                    let child = s.child(JointAction { a1, a2, kibitzer: k });
                    if child.0.len() == self.horizon {
                        let payoffs = self.leaf_utility(child.history()).expect("full path");
                        tree.push(SequentialNode {
                            player: None,
                            infoset: None,
                            parent: Some(pk),
                            action: Some(k),
                            payoffs: Some(payoffs),
                        });
                    } else {
                        self.export_state(&child, Some((pk, k)), tree);
                    }
                }
            }
        }
    }
}

pub struct StatesAtDepth<'a> {
    game: &'a LiftedGame,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for StatesAtDepth<'_> {
    type Item = StateId;

    fn next(&mut self) -> Option<StateId> {
        if self.done {
            return None;
        }
        let state = StateId(self.digits.iter().map(|&d| self.game.joint_action(d)).collect());
        // odometer, last position fastest
        let base = self.game.joint_action_count();
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < base {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(state)
    }
}

/// Flat node list of the sequential-move export.
#[derive(Debug, Clone, Serialize)]
pub struct SequentialTree {
    pub nodes: Vec<SequentialNode>,
}

impl SequentialTree {
    fn push(&mut self, node: SequentialNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SequentialNode {
    /// Acting player, `None` at leaves.
    pub player: Option<Player>,
    /// Information set key (the public state), `None` at leaves.
    pub infoset: Option<String>,
    pub parent: Option<usize>,
    /// Action taken at `parent` to reach this node.
    pub action: Option<usize>,
    pub payoffs: Option<[f64; 3]>,
}

impl SequentialNode {
    fn decision(player: Player, key: &str, parent: Option<(usize, usize)>) -> Self {
        Self {
            player: Some(player),
            infoset: Some(key.to_owned()),
            parent: parent.map(|p| p.0),
            action: parent.map(|p| p.1),
            payoffs: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfg::StandardGame;

    fn pennies(h: usize) -> LiftedGame {
        lift(&StandardGame::MatchingPennies.build(), h).unwrap()
    }

    fn ja(a1: usize, a2: usize, target: Player, action: usize) -> JointAction {
        JointAction::new(a1, a2, KibitzerAction::new(target, action), 2)
    }

    #[test]
    fn lift_rejects_zero_horizon() {
        assert_eq!(
            lift(&StandardGame::MatchingPennies.build(), 0).unwrap_err(),
            Error::InvalidHorizon
        );
    }

    #[test]
    fn one_round_root_has_sixteen_joint_actions() {
        let lg = pennies(1);
        assert_eq!(lg.joint_action_count(), 16);
        assert_eq!(lg.states().count(), 1);
        assert_eq!(lg.node_count().unwrap(), 17);
        assert_eq!(pennies(2).states().count(), 17);
    }

    #[test]
    fn round_utility_examples() {
        let lg = pennies(2);
        assert_eq!(lg.round_utility(&ja(0, 0, Player::One, 1)), [1.0, 0.0, -1.0]);
        assert_eq!(lg.round_utility(&ja(0, 1, Player::Two, 0)), [0.0, 1.0, -1.0]);
        for j in lg.joint_actions() {
            let u = lg.round_utility(&j);
            assert_eq!(u[0] + u[1] + u[2], 0.0);
            let self_rec = match j.kibitzer_action(2).target {
                Player::One => j.kibitzer_action(2).action == j.a1,
                _ => j.kibitzer_action(2).action == j.a2,
            };
            if self_rec {
                assert_eq!(u, [0.0, 0.0, 0.0]);
            }
            assert!(u.iter().all(|v| v.abs() <= 2.0 / 2.0));
        }
    }

    #[test]
    fn leaf_utility_examples() {
        let lg = pennies(2);
        let path = [ja(0, 0, Player::One, 1), ja(0, 0, Player::One, 0)];
        assert_eq!(lg.leaf_utility(&path).unwrap(), [1.0, 0.0, -1.0]);
        let quiet = [ja(1, 0, Player::One, 1), ja(0, 1, Player::Two, 1)];
        assert_eq!(lg.leaf_utility(&quiet).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(
            lg.leaf_utility(&path[..1]).unwrap_err(),
            Error::WrongPathLength {
                expected: 2,
                found: 1
            }
        );
        // the raw sum can reach 2 when M1 spans [-1, 1]
        let big = [ja(0, 0, Player::One, 1), ja(0, 0, Player::One, 1)];
        assert_eq!(lg.leaf_utility(&big).unwrap(), [2.0, 0.0, -2.0]);
    }

    #[test]
    fn node_count_examples() {
        assert_eq!(node_count(2, 1).unwrap(), 17);
        assert_eq!(node_count_bound(2, 1).unwrap(), 256);
        assert_eq!(node_count(2, 2).unwrap(), 273);
        assert_eq!(node_count_bound(2, 2).unwrap(), 4096);
        assert_eq!(node_count(3, 2).unwrap(), 2971);
        assert_eq!(node_count_bound(3, 2).unwrap(), 157_464);
        assert!(matches!(node_count(1000, 40), Err(Error::Overflow(_))));
    }

    #[test]
    fn node_count_matches_tree_walk() {
        fn walk(lg: &LiftedGame, s: &StateId) -> u128 {
            1 + lg
                .joint_actions()
                .map(|j| {
                    let c = s.child(j);
                    if c.history().len() == lg.horizon() {
                        1
                    } else {
                        walk(lg, &c)
                    }
                })
                .sum::<u128>()
        }
        for h in 1..=3 {
            let lg = pennies(h);
            assert_eq!(walk(&lg, &StateId::root()), lg.node_count().unwrap());
        }
    }

    #[test]
    fn state_helpers() {
        let root = StateId::root();
        assert!(state_to_seq(&root).is_empty());
        assert!(prev_states(&root).is_empty());
        let j1 = ja(0, 1, Player::Two, 1);
        let j2 = ja(1, 1, Player::One, 0);
        let s = StateId::from_history(vec![j1, j2]);
        assert_eq!(prev_states(&s), vec![root.clone(), StateId::from_history(vec![j1])]);
        assert_eq!(StateId::from_history(state_to_seq(&s).to_vec()), s);
        assert_eq!(s.key(), "0.1.3/1.1.0");
        assert_eq!(s.key().parse::<StateId>().unwrap(), s);
        assert_eq!("".parse::<StateId>().unwrap(), root);
        assert!("1.2".parse::<StateId>().is_err());
    }

    #[test]
    fn depth_enumeration_is_lexicographic_by_bytes() {
        let lg = pennies(3);
        let states: Vec<StateId> = lg.states_at_depth(3).collect();
        assert_eq!(states.len(), 256);
        for w in states.windows(2) {
            assert!(w[0] < w[1]);
            assert!(w[0].to_bytes() < w[1].to_bytes());
        }
        assert!(states.iter().all(|s| lg.check_state(s).is_ok()));
    }

    #[test]
    fn check_state_rejects_leaves_and_bad_actions() {
        let lg = pennies(1);
        assert!(lg.check_state(&StateId::from_history(vec![ja(0, 0, Player::One, 0)])).is_err());
        let lg = pennies(2);
        let bad = JointAction { a1: 2, a2: 0, kibitzer: 0 };
        assert!(lg.check_state(&StateId::from_history(vec![bad])).is_err());
    }

    #[test]
    fn sequential_export_node_count() {
        let lg = pennies(1);
        let tree = lg.to_sequential(1_000).unwrap();
        // root P1 node, 2 P2 nodes, 4 K nodes, 16 leaves
        assert_eq!(tree.nodes.len(), 1 + 2 + 4 + 16);
        assert_eq!(tree.nodes.iter().filter(|n| n.payoffs.is_some()).count(), 16);
        assert!(matches!(lg.to_sequential(5), Err(Error::BudgetExceeded { .. })));
        let tree = pennies(2).to_sequential(10_000).unwrap();
        assert_eq!(tree.nodes.len(), 17 * 7 + 256);
    }
}
