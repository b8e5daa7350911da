//! Normal-form games, mixed strategies, and equilibrium gaps.
//!
//! Players are indexed from 0 in code and arrays. Joint actions are
//! flattened row-major: the last player's action varies fastest.

use serde::{Deserialize, Serialize};

use crate::correlated::SparseCorrelated;
use crate::error::{Error, Result};
use crate::{rng, SIMPLEX_TOL};

/// A probability distribution over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self(probs))
    }

    /// Normalizes a nonnegative weight vector with positive mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over zero actions");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, action: usize) -> Self {
        assert!(action < n, "action {action} out of range {n}");
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Wraps probabilities that are already known to be a distribution.
    pub(crate) fn from_trusted(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        Self(probs)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(value: MixedStrategy) -> Self {
        value.0
    }
}

impl std::ops::Index<usize> for MixedStrategy {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedProfile(Vec<MixedStrategy>);

impl MixedProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Self {
        Self(strategies)
    }

    pub fn uniform(action_counts: &[usize]) -> Self {
        Self(action_counts.iter().map(|&n| MixedStrategy::uniform(n)).collect())
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.0
    }

    pub fn strategy(&self, player: usize) -> &MixedStrategy {
        &self.0[player]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every player's strategy as an opponent view (the caller ignores its own slot).
    pub fn as_opponents(&self) -> Vec<Option<&MixedStrategy>> {
        self.0.iter().map(Some).collect()
    }
}

/// An `n`-player game in normal form with payoffs in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NfgRepr", into = "NfgRepr")]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    strides: Vec<usize>,
    // joint_count × player_count, row-major
    utilities: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NfgRepr {
    actions: Vec<usize>,
    utilities: Vec<Vec<f64>>,
}

impl TryFrom<NfgRepr> for NormalFormGame {
    type Error = Error;

    fn try_from(r: NfgRepr) -> Result<Self> {
        Self::new(r.actions, r.utilities)
    }
}

impl From<NormalFormGame> for NfgRepr {
    fn from(g: NormalFormGame) -> Self {
        let n = g.player_count();
        NfgRepr {
            utilities: g.utilities.chunks(n).map(<[f64]>::to_vec).collect(),
            actions: g.action_counts,
        }
    }
}

fn check_payoff(value: f64) -> Result<()> {
    if value.is_finite() && value.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::PayoffOutOfRange { value })
    }
}

impl NormalFormGame {
    /// `utilities[j]` is the payoff vector at flattened joint action `j`.
    pub fn new(action_counts: Vec<usize>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(action_counts, utilities, true)
    }

    /// Same as [`new`](Self::new) but only requires finite payoffs. Used for
    /// derived games such as the lifted round game whose payoffs reach `2/H`.
    pub(crate) fn new_unbounded(action_counts: Vec<usize>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(action_counts, utilities, false)
    }

    fn build(action_counts: Vec<usize>, utilities: Vec<Vec<f64>>, bounded: bool) -> Result<Self> {
        let n = action_counts.len();
        if n == 0 || action_counts.contains(&0) {
            return Err(Error::MalformedGame(
                "every player needs at least one action".into(),
            ));
        }
        let joint = action_counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or(Error::Overflow("joint action count"))?;
        if utilities.len() != joint {
            return Err(Error::MalformedGame(format!(
                "{} payoff vectors for {joint} joint actions",
                utilities.len()
            )));
        }
        let mut flat = Vec::with_capacity(joint * n);
        for u in utilities {
            if u.len() != n {
                return Err(Error::MalformedGame(format!(
                    "payoff vector of length {} for {n} players",
                    u.len()
                )));
            }
            for &v in &u {
                if bounded {
                    check_payoff(v)?;
                } else if !v.is_finite() {
                    return Err(Error::PayoffOutOfRange { value: v });
                }
            }
            flat.extend(u);
        }
        let mut strides = vec![1; n];
        for p in (0..n - 1).rev() {
            strides[p] = strides[p + 1] * action_counts[p + 1];
        }
        Ok(Self {
            action_counts,
            strides,
            utilities: flat,
        })
    }

    pub fn player_count(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn joint_count(&self) -> usize {
        self.utilities.len() / self.player_count()
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.action_counts)
            .map(|(s, c)| (index / s) % c)
            .collect()
    }

    pub fn payoff(&self, joint_index: usize, player: usize) -> f64 {
        self.utilities[joint_index * self.player_count() + player]
    }

    pub fn payoff_at(&self, actions: &[usize], player: usize) -> f64 {
        self.payoff(self.joint_index(actions), player)
    }

    fn check_profile(&self, profile: &MixedProfile) -> Result<()> {
        if profile.len() != self.player_count() {
            return Err(Error::PlayerCountMismatch {
                expected: self.player_count(),
                found: profile.len(),
            });
        }
        for (player, (s, &c)) in profile.0.iter().zip(&self.action_counts).enumerate() {
            if s.len() != c {
                return Err(Error::DimensionMismatch {
                    player,
                    expected: c,
                    found: s.len(),
                });
            }
        }
        Ok(())
    }
}

/// Expected utility of `player` under the product distribution of `profile`.
pub fn expected_utility(game: &NormalFormGame, profile: &MixedProfile, player: usize) -> Result<f64> {
    game.check_profile(profile)?;
    let mut total = 0.0;
    for j in 0..game.joint_count() {
        let actions = game.decode(j);
        let prob: f64 = actions
            .iter()
            .enumerate()
            .map(|(p, &a)| profile.0[p][a])
            .product();
        if prob != 0.0 {
            total += prob * game.payoff(j, player);
        }
    }
    Ok(total)
}

/// `u[a] = E_{a_{-i} ~ x_{-i}} u_i(a, a_{-i})`. The entry at `player` in
/// `opponents` is ignored.
pub fn utility_vector(
    game: &NormalFormGame,
    player: usize,
    opponents: &[Option<&MixedStrategy>],
) -> Result<Vec<f64>> {
    let n = game.player_count();
    if opponents.len() != n {
        return Err(Error::PlayerCountMismatch {
            expected: n,
            found: opponents.len(),
        });
    }
    for (p, s) in opponents.iter().enumerate() {
        if p == player {
            continue;
        }
        let s = s.ok_or(Error::MissingOpponent { player: p })?;
        if s.len() != game.action_counts[p] {
            return Err(Error::DimensionMismatch {
                player: p,
                expected: game.action_counts[p],
                found: s.len(),
            });
        }
    }
    let mut u = vec![0.0; game.action_counts[player]];
    for j in 0..game.joint_count() {
        let actions = game.decode(j);
        let prob: f64 = actions
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != player)
            .map(|(p, &a)| opponents[p].expect("checked above")[a])
            .product();
        if prob != 0.0 {
            u[actions[player]] += prob * game.payoff(j, player);
        }
    }
    Ok(u)
}

/// Index and value of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Best pure response of `player`; returns `(value, action)`.
pub fn best_response(
    game: &NormalFormGame,
    player: usize,
    opponents: &[Option<&MixedStrategy>],
) -> Result<(f64, usize)> {
    let u = utility_vector(game, player, opponents)?;
    let (a, v) = argmax(&u);
    Ok((v, a))
}

/// Largest unilateral improvement available to any player.
pub fn ne_gap(game: &NormalFormGame, profile: &MixedProfile) -> Result<f64> {
    game.check_profile(profile)?;
    let opp = profile.as_opponents();
    let mut gap = f64::NEG_INFINITY;
    for player in 0..game.player_count() {
        let u = utility_vector(game, player, &opp)?;
        let realized = profile.0[player].dot(&u);
        gap = gap.max(argmax(&u).1 - realized);
    }
    Ok(gap)
}

/// Per-player CCE gap `max_a E_μ[u_i(a, a_{-i})] − E_μ[u_i(a)]`.
pub fn cce_gap(game: &NormalFormGame, mu: &SparseCorrelated<MixedProfile>) -> Result<Vec<f64>> {
    let n = game.player_count();
    let mut deviation: Vec<Vec<f64>> = game.action_counts.iter().map(|&c| vec![0.0; c]).collect();
    let mut realized = vec![0.0; n];
    for (w, profile) in mu.iter() {
        game.check_profile(profile)?;
        let opp = profile.as_opponents();
        for player in 0..n {
            let u = utility_vector(game, player, &opp)?;
            realized[player] += w * profile.0[player].dot(&u);
            for (d, x) in deviation[player].iter_mut().zip(&u) {
                *d += w * x;
            }
        }
    }
    Ok((0..n)
        .map(|p| argmax(&deviation[p]).1 - realized[p])
        .collect())
}

/// Two-player game where both players have `m` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BimatrixRepr", into = "BimatrixRepr")]
pub struct BimatrixGame {
    m: usize,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BimatrixRepr {
    m: usize,
    #[serde(rename = "M1")]
    m1: Vec<Vec<f64>>,
    #[serde(rename = "M2")]
    m2: Vec<Vec<f64>>,
}

impl TryFrom<BimatrixRepr> for BimatrixGame {
    type Error = Error;

    fn try_from(r: BimatrixRepr) -> Result<Self> {
        let g = Self::new(r.m1, r.m2)?;
        if g.m != r.m {
            return Err(Error::MalformedGame(format!(
                "declared m = {} but matrices are {}×{}",
                r.m, g.m, g.m
            )));
        }
        Ok(g)
    }
}

impl From<BimatrixGame> for BimatrixRepr {
    fn from(g: BimatrixGame) -> Self {
        BimatrixRepr {
            m: g.m,
            m1: g.m1.chunks(g.m).map(<[f64]>::to_vec).collect(),
            m2: g.m2.chunks(g.m).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl BimatrixGame {
    pub fn new(m1: Vec<Vec<f64>>, m2: Vec<Vec<f64>>) -> Result<Self> {
        let m = m1.len();
        if m == 0 {
            return Err(Error::MalformedGame("empty payoff matrix".into()));
        }
        let flatten = |rows: Vec<Vec<f64>>| -> Result<Vec<f64>> {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::MalformedGame(format!("payoff matrices must be {m}×{m}")));
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            flat.iter().try_for_each(|&v| check_payoff(v))?;
            Ok(flat)
        };
        Ok(Self {
            m,
            m1: flatten(m1)?,
            m2: flatten(m2)?,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m1(&self, a1: usize, a2: usize) -> f64 {
        self.m1[a1 * self.m + a2]
    }

    pub fn m2(&self, a1: usize, a2: usize) -> f64 {
        self.m2[a1 * self.m + a2]
    }

    pub fn to_nfg(&self) -> NormalFormGame {
        let utilities = (0..self.m * self.m)
            .map(|j| vec![self.m1[j], self.m2[j]])
            .collect();
        NormalFormGame::new(vec![self.m, self.m], utilities).expect("bimatrix is a valid nfg")
    }
}

/// Either game kind as it appears in JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Game {
    Bimatrix(BimatrixGame),
    Nfg(NormalFormGame),
}

impl Game {
    pub fn to_nfg(&self) -> NormalFormGame {
        match self {
            Game::Bimatrix(g) => g.to_nfg(),
            Game::Nfg(g) => g.clone(),
        }
    }

    pub fn as_bimatrix(&self) -> Option<&BimatrixGame> {
        match self {
            Game::Bimatrix(g) => Some(g),
            Game::Nfg(_) => None,
        }
    }
}

/// Built-in games.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardGame {
    MatchingPennies,
    PrisonersDilemma,
    RockPaperScissors,
    RandomBimatrix { m: usize, seed: u64 },
}

impl StandardGame {
    /// `name` is one of `matching_pennies`, `prisoners_dilemma`,
    /// `rock_paper_scissors`, `random_bimatrix` (the last needs `m` and `seed`).
    pub fn parse(name: &str, m: Option<usize>, seed: Option<u64>) -> Result<Self> {
        match name {
            "matching_pennies" => Ok(Self::MatchingPennies),
            "prisoners_dilemma" => Ok(Self::PrisonersDilemma),
            "rock_paper_scissors" => Ok(Self::RockPaperScissors),
            "random_bimatrix" => match (m, seed) {
                (Some(m), Some(seed)) if m > 0 => Ok(Self::RandomBimatrix { m, seed }),
                _ => Err(Error::UnknownGame(
                    "random_bimatrix needs m >= 1 and a seed".into(),
                )),
            },
            other => Err(Error::UnknownGame(other.into())),
        }
    }

    pub fn build(self) -> BimatrixGame {
        match self {
            Self::MatchingPennies => {
                let m1 = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
                BimatrixGame::new(m1.clone(), negate(&m1)).unwrap()
            }
            Self::PrisonersDilemma => {
                // (R, S, T, P) = (3, 0, 5, 1) mapped affinely onto [-1, 1]; action 1 = defect
                let m1 = vec![vec![0.2, -1.0], vec![1.0, -0.6]];
                BimatrixGame::new(m1.clone(), transpose(&m1)).unwrap()
            }
            Self::RockPaperScissors => {
                let m1 = vec![
                    vec![0.0, -1.0, 1.0],
                    vec![1.0, 0.0, -1.0],
                    vec![-1.0, 1.0, 0.0],
                ];
                BimatrixGame::new(m1.clone(), negate(&m1)).unwrap()
            }
            Self::RandomBimatrix { m, seed } => random_bimatrix(m, seed),
        }
    }
}

pub fn make_standard_game(name: &str, m: Option<usize>, seed: Option<u64>) -> Result<BimatrixGame> {
    Ok(StandardGame::parse(name, m, seed)?.build())
}

fn negate(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|r| r.iter().map(|v| -v).collect()).collect()
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a.len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Entries uniform on `[-1, 1]`, rounded to 6 decimals; M1 is drawn before M2.
pub fn random_bimatrix(m: usize, seed: u64) -> BimatrixGame {
    let mut rng = rng::seeded(seed);
    let mut draw = || -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..m).map(|_| rng::unit_payoff(&mut rng)).collect())
            .collect()
    };
    let m1 = draw();
    let m2 = draw();
    BimatrixGame::new(m1, m2).expect("random payoffs are in range")
}

/// Random `n`-player game with the same entry distribution as [`random_bimatrix`].
pub fn random_nfg(action_counts: &[usize], seed: u64) -> NormalFormGame {
    let mut rng = rng::seeded(seed);
    let joint: usize = action_counts.iter().product();
    let utilities = (0..joint)
        .map(|_| {
            (0..action_counts.len())
                .map(|_| rng::unit_payoff(&mut rng))
                .collect()
        })
        .collect();
    NormalFormGame::new(action_counts.to_vec(), utilities).expect("random payoffs are in range")
}
