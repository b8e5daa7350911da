//! Slow, independent reference implementations used to cross-check the fast
//! paths: leaf enumeration, pure-strategy enumeration, an explicit node arena,
//! from-scratch extraction rescans and a support-enumeration Nash solver.

use serde::Serialize;

use crate::correlated::SparseCorrelated;
use crate::error::{Error, Result};
use crate::extraction::{estimate, kibitzer_gap};
use crate::lifted::{JointAction, LiftedGame, Player, StateId};
use crate::nfg::{ne_gap, BimatrixGame, MixedProfile, MixedStrategy};
use crate::strategies::{BehavioralProfile, BehavioralStrategy};

/// Largest number of leaves any enumeration here will visit.
pub const LEAF_BUDGET: u128 = 1_000_000;

fn leaf_count(lg: &LiftedGame) -> Result<u128> {
    (lg.joint_action_count() as u128)
        .checked_pow(lg.horizon() as u32)
        .ok_or(Error::Overflow("leaf count"))
}

fn check_budget(lg: &LiftedGame) -> Result<()> {
    let leaves = leaf_count(lg)?;
    if leaves > LEAF_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: leaves,
            budget: LEAF_BUDGET,
        });
    }
    Ok(())
}

/// Calls `f` with every terminal path in lexicographic order.
fn for_each_leaf(lg: &LiftedGame, mut f: impl FnMut(&[JointAction])) {
    let n = lg.joint_action_count();
    let h = lg.horizon();
    let mut idx = vec![0usize; h];
    let mut path: Vec<JointAction> = vec![lg.joint_action(0); h];
    loop {
        for (p, &i) in path.iter_mut().zip(&idx) {
            *p = lg.joint_action(i);
        }
        f(&path);
        let mut k = h;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafReport {
    pub leaves: u128,
    pub max_abs_sum: f64,
    pub max_abs_component: f64,
    /// Leaves with some utility component outside `[-1, 1]`.
    pub out_of_unit: u128,
}

/// Checks every leaf of the lifted game: utilities sum to zero and each
/// component stays within the per-round maximum swing.
pub fn exhaustive_leaf_check(lg: &LiftedGame) -> Result<LeafReport> {
    check_budget(lg)?;
    let mut report = LeafReport {
        leaves: 0,
        max_abs_sum: 0.0,
        max_abs_component: 0.0,
        out_of_unit: 0,
    };
    let mut failure = None;
    for_each_leaf(lg, |path| {
        let u = lg.leaf_utility(path).expect("full-length path");
        report.leaves += 1;
        let sum = u.iter().sum::<f64>().abs();
        let comp = u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        report.max_abs_sum = report.max_abs_sum.max(sum);
        report.max_abs_component = report.max_abs_component.max(comp);
        if comp > 1.0 {
            report.out_of_unit += 1;
        }
        if failure.is_none() && (sum > 1e-12 || comp > 2.0 + 1e-12) {
            failure = Some(format!("leaf {:?} has utilities {:?}", StateId::from_history(path.to_vec()).key(), u));
        }
    });
    match failure {
        Some(msg) => Err(Error::InvariantViolated(msg)),
        None => Ok(report),
    }
}

/// Expected utilities by summing reach probability times leaf utility over
/// every terminal path.
pub fn exhaustive_eval(lg: &LiftedGame, profile: &BehavioralProfile) -> Result<[f64; 3]> {
    check_budget(lg)?;
    profile.check(lg)?;
    let mut total = [0.0; 3];
    for_each_leaf(lg, |path| {
        let mut reach = 1.0;
        for (k, j) in path.iter().enumerate() {
            reach *= profile.joint_prob(&path[..k], j);
            if reach == 0.0 {
                return;
            }
        }
        let u = lg.leaf_utility(path).expect("full-length path");
        for p in 0..3 {
            total[p] += reach * u[p];
        }
    });
    Ok(total)
}

fn mixture_eval(lg: &LiftedGame, mu: &SparseCorrelated<BehavioralProfile>, player: Player) -> Result<f64> {
    let mut v = 0.0;
    for (w, c) in mu.iter() {
        v += w * exhaustive_eval(lg, c)?[player.index()];
    }
    Ok(v)
}

/// Reduced pure strategies of `player`: an action at every state reachable
/// under the player's own earlier choices.
fn reduced_plans(lg: &LiftedGame, player: Player, s: &StateId) -> Vec<Vec<(StateId, usize)>> {
    let mut plans = Vec::new();
    for a in 0..lg.action_count(player) {
        let mut partial: Vec<Vec<(StateId, usize)>> = vec![vec![(s.clone(), a)]];
        if s.history().len() + 1 < lg.horizon() {
            for j in lg.joint_actions().filter(|j| j.action_of(player) == a) {
                let sub = reduced_plans(lg, player, &s.child(j));
                let mut next = Vec::with_capacity(partial.len() * sub.len());
                for p in &partial {
                    for q in &sub {
                        let mut r = p.clone();
                        r.extend(q.iter().cloned());
                        next.push(r);
                    }
                }
                partial = next;
            }
        }
        plans.extend(partial);
    }
    plans
}

fn reduced_plan_count(lg: &LiftedGame, player: Player, depth: usize) -> Option<u128> {
    let n = lg.action_count(player) as u128;
    if depth + 1 == lg.horizon() {
        return Some(n);
    }
    let per_action = (lg.joint_action_count() / lg.action_count(player)) as u32;
    let sub = reduced_plan_count(lg, player, depth + 1)?;
    n.checked_mul(sub.checked_pow(per_action)?)
}

/// Largest number of reduced pure strategies [`pure_deviation_enum`] evaluates.
pub const PLAN_BUDGET: u128 = 1 << 16;

/// Best deviation value found by trying every reduced pure strategy of
/// `player` against the mixture.
pub fn pure_deviation_enum(lg: &LiftedGame, player: Player, mu: &SparseCorrelated<BehavioralProfile>) -> Result<f64> {
    check_budget(lg)?;
    let count = reduced_plan_count(lg, player, 0).ok_or(Error::Overflow("plan count"))?;
    if count > PLAN_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget: PLAN_BUDGET,
        });
    }
    let n = lg.action_count(player);
    let mut best = f64::NEG_INFINITY;
    for plan in reduced_plans(lg, player, &StateId::root()) {
        let mut strategy = BehavioralStrategy::stationary(MixedStrategy::pure(n, 0));
        for (s, a) in plan {
            strategy.set(s, MixedStrategy::pure(n, a));
        }
        let mut value = 0.0;
        for (w, c) in mu.iter() {
            let mut deviated = c.clone();
            *deviated.strategy_mut(player) = strategy.clone();
            value += w * exhaustive_eval(lg, &deviated)?[player.index()];
        }
        best = best.max(value);
    }
    Ok(best)
}

struct ArenaNode {
    history: Vec<JointAction>,
    /// First child's arena index; children are contiguous in joint-action order.
    first_child: Option<usize>,
}

/// CCE gaps computed by materializing the whole history tree and running
/// backward induction over it.
pub fn materialized_cce_gap(lg: &LiftedGame, mu: &SparseCorrelated<BehavioralProfile>) -> Result<[f64; 3]> {
    check_budget(lg)?;
    let n = lg.joint_action_count();
    let mut arena = vec![ArenaNode {
        history: Vec::new(),
        first_child: None,
    }];
    let mut i = 0;
    while i < arena.len() {
        if arena[i].history.len() < lg.horizon() {
            let first = arena.len();
            arena[i].first_child = Some(first);
            let base = arena[i].history.clone();
            for j in lg.joint_actions() {
                let mut h = base.clone();
                h.push(j);
                arena.push(ArenaNode {
                    history: h,
                    first_child: None,
                });
            }
        }
        i += 1;
    }

    let t = mu.len();
    let mut gaps = [0.0; 3];
    for player in Player::ALL {
        let [o1, o2] = player.others();
        // top-down: weight of each component times the opponents' reach
        let mut weight = vec![vec![0.0; t]; arena.len()];
        weight[0].copy_from_slice(mu.weights());
        for idx in 0..arena.len() {
            let Some(first) = arena[idx].first_child else { continue };
            for k in 0..n {
                let j = lg.joint_action(k);
                for (c, comp) in mu.components().iter().enumerate() {
                    let h = &arena[idx].history;
                    let r = comp.strategy(o1).at(h)[j.action_of(o1)] * comp.strategy(o2).at(h)[j.action_of(o2)];
                    weight[first + k][c] = weight[idx][c] * r;
                }
            }
        }
        // bottom-up over reverse arena order
        let mut value = vec![0.0; arena.len()];
        for idx in (0..arena.len()).rev() {
            let Some(first) = arena[idx].first_child else { continue };
            let mut per_action = vec![0.0; lg.action_count(player)];
            for k in 0..n {
                let j = lg.joint_action(k);
                let mass: f64 = weight[first + k].iter().sum();
                per_action[j.action_of(player)] += mass * lg.round_utility(&j)[player.index()] + value[first + k];
            }
            value[idx] = per_action.into_iter().fold(f64::NEG_INFINITY, f64::max);
        }
        gaps[player.index()] = value[0] - mixture_eval(lg, mu, player)?;
    }
    Ok(gaps)
}

/// Extraction gap at every state, each posterior recomputed from the empty
/// history, measured with the Kibitzer's best-recommendation formula.
pub fn rescan_from_scratch(lg: &LiftedGame, mu: &SparseCorrelated<BehavioralProfile>) -> Vec<(StateId, f64)> {
    lg.states()
        .map(|s| {
            let q1 = estimate(Player::One, &s, mu.components());
            let q2 = estimate(Player::Two, &s, mu.components());
            let gap = kibitzer_gap(lg.base(), &q1, &q2);
            (s, gap)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NashMethod {
    SupportEnumeration,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCertificate {
    pub profile: [MixedStrategy; 2],
    pub gap: f64,
    pub method: NashMethod,
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Mixed strategy over `cols` that makes every row in `rows` indifferent
/// under `payoff(row, col)`.
fn indifference(m: usize, rows: &[usize], cols: &[usize], payoff: impl Fn(usize, usize) -> f64) -> Option<MixedStrategy> {
    let k = cols.len();
    let mut a = Vec::with_capacity(k + 1);
    let mut b = Vec::with_capacity(k + 1);
    for &r in rows {
        let mut eq: Vec<f64> = cols.iter().map(|&c| payoff(r, c)).collect();
        eq.push(-1.0);
        a.push(eq);
        b.push(0.0);
    }
    let mut sum = vec![1.0; k];
    sum.push(0.0);
    a.push(sum);
    b.push(1.0);
    let x = solve(a, b)?;
    let mut p = vec![0.0; m];
    for (&c, &v) in cols.iter().zip(&x) {
        if v.is_nan() || v < -1e-12 {
            return None;
        }
        p[c] = v.max(0.0);
    }
    let total: f64 = p.iter().sum();
    MixedStrategy::new(p.into_iter().map(|v| v / total).collect()).ok()
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// Nash equilibrium tolerance accepted from support enumeration.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Finds a Nash equilibrium of a bimatrix game by enumerating equal-size
/// support pairs. Falls back to the best point of a grid over the simplices
/// when no support pair yields a certified equilibrium.
pub fn support_enumeration_ne(game: &BimatrixGame) -> Result<NashCertificate> {
    let m = game.m();
    let nf = game.to_nfg();
    for k in 1..=m {
        for s1 in subsets(m, k) {
            for s2 in subsets(m, k) {
                // q2 makes player 1 indifferent over s1, and vice versa
                let Some(q2) = indifference(m, &s1, &s2, |r, c| game.m1(r, c)) else { continue };
                let Some(q1) = indifference(m, &s2, &s1, |r, c| game.m2(c, r)) else { continue };
                let gap = ne_gap(&nf, &MixedProfile::new(vec![q1.clone(), q2.clone()]))?;
                if gap <= SUPPORT_TOL {
                    return Ok(NashCertificate {
                        profile: [q1, q2],
                        gap,
                        method: NashMethod::SupportEnumeration,
                    });
                }
            }
        }
    }
    grid_ne(game)
}

/// Grid points per simplex kept under this so the pairwise search stays cheap.
const GRID_POINTS: usize = 2_000;

fn grid(m: usize, steps: usize) -> Vec<MixedStrategy> {
    fn rec(m: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<MixedStrategy>) {
        if cur.len() + 1 == m {
            cur.push(left);
            out.push(MixedStrategy::from_trusted(cur.iter().map(|&c| c as f64 / steps as f64).collect()));
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(m, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, steps, steps, &mut Vec::with_capacity(m), &mut out);
    out
}

fn grid_points(m: usize, steps: usize) -> u128 {
    // C(steps + m - 1, m - 1)
    let mut c: u128 = 1;
    for i in 0..(m as u128 - 1) {
        c = c * (steps as u128 + 1 + i) / (i + 1);
    }
    c
}

fn grid_ne(game: &BimatrixGame) -> Result<NashCertificate> {
    let m = game.m();
    let steps = if m == 2 {
        1000
    } else {
        let mut s = 1;
        while grid_points(m, s + 1) <= GRID_POINTS as u128 {
            s += 1;
        }
        s
    };
    let points = grid(m, steps);
    let mut best: Option<NashCertificate> = None;
    for q1 in &points {
        for q2 in &points {
            let gap = kibitzer_gap(game, q1, q2);
            if best.as_ref().is_none_or(|b| gap < b.gap) {
                best = Some(NashCertificate {
                    profile: [q1.clone(), q2.clone()],
                    gap,
                    method: NashMethod::Grid,
                });
            }
        }
    }
    best.ok_or_else(|| Error::InvariantViolated("empty grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::run_hedge_lifted;
    use crate::lifted::lift;
    use crate::nfg::{random_bimatrix, StandardGame};
    use crate::strategies::{cce_gap_lifted, random_profile, stationary_nash_component};

    #[test]
    fn leaf_check_pennies() {
        let lg = lift(&StandardGame::MatchingPennies.build(), 2).unwrap();
        let r = exhaustive_leaf_check(&lg).unwrap();
        assert_eq!(r.leaves, 256);
        assert_eq!(r.max_abs_sum, 0.0);
        assert!(r.max_abs_component <= 2.0);
    }

    #[test]
    fn leaf_budget_enforced() {
        let lg = lift(&random_bimatrix(4, 0), 3).unwrap();
        assert!(matches!(exhaustive_leaf_check(&lg), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn plan_count_matches_enumeration() {
        let lg = lift(&StandardGame::MatchingPennies.build(), 2).unwrap();
        for p in Player::ALL {
            let plans = reduced_plans(&lg, p, &StateId::root());
            assert_eq!(plans.len() as u128, reduced_plan_count(&lg, p, 0).unwrap());
        }
        assert_eq!(reduced_plan_count(&lg, Player::One, 0), Some(2 * 256));
        assert_eq!(reduced_plan_count(&lg, Player::Kibitzer, 0), Some(4 * 256));
    }

    #[test]
    fn arena_matches_dp() {
        let lg = lift(&random_bimatrix(2, 4), 2).unwrap();
        let comps = (0..3).map(|i| random_profile(&lg, i)).collect();
        let mu = SparseCorrelated::uniform(comps).unwrap();
        let a = materialized_cce_gap(&lg, &mu).unwrap();
        let b = cce_gap_lifted(&lg, &mu).unwrap();
        for p in 0..3 {
            assert!((a[p] - b[p]).abs() < 1e-10, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn support_enumeration_known_equilibria() {
        let c = support_enumeration_ne(&StandardGame::MatchingPennies.build()).unwrap();
        assert_eq!(c.method, NashMethod::SupportEnumeration);
        assert_eq!(c.profile, [MixedStrategy::uniform(2), MixedStrategy::uniform(2)]);

        let c = support_enumeration_ne(&StandardGame::PrisonersDilemma.build()).unwrap();
        assert_eq!(c.profile, [MixedStrategy::pure(2, 1), MixedStrategy::pure(2, 1)]);

        let c = support_enumeration_ne(&StandardGame::RockPaperScissors.build()).unwrap();
        for q in &c.profile {
            for &p in q.probs() {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        for seed in 0..20 {
            let g = random_bimatrix(3, seed);
            let c = support_enumeration_ne(&g).unwrap();
            assert!(c.gap <= SUPPORT_TOL || c.method == NashMethod::Grid);
        }
    }

    #[test]
    fn grid_fallback_is_reasonable() {
        let g = StandardGame::MatchingPennies.build();
        let c = grid_ne(&g).unwrap();
        assert_eq!(c.gap, 0.0);
        assert!(grid(3, 4).len() == 15 && grid_points(3, 4) == 15);
    }

    #[test]
    fn rescan_agrees_with_extraction() {
        use crate::extraction::{extract_nash, ExtractionConfig};
        let g = random_bimatrix(2, 11);
        let lg = lift(&g, 2).unwrap();
        let run = run_hedge_lifted(&lg, [0.3; 3], 6, Some(5)).unwrap();
        let cfg = ExtractionConfig {
            ne_threshold: -0.0,
            enumerate_all: true,
        };
        let report = extract_nash(&g, &lg, &run.mixture, &cfg).unwrap();
        let scan = rescan_from_scratch(&lg, &run.mixture);
        let gaps = report.gaps.unwrap();
        assert_eq!(gaps.len(), scan.len());
        for (a, (s, b)) in gaps.iter().zip(&scan) {
            assert_eq!(a.state, s.key());
            assert!((a.gap - b).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_fixture_zero_gap_in_arena() {
        let g = random_bimatrix(3, 42);
        let c = support_enumeration_ne(&g).unwrap();
        let lg = lift(&g, 1).unwrap();
        let comp = stationary_nash_component(&lg, &c.profile[0], &c.profile[1]);
        let mu = SparseCorrelated::uniform(vec![comp]).unwrap();
        assert!(materialized_cce_gap(&lg, &mu).unwrap().iter().all(|x| x.abs() < 1e-9));
    }
}
