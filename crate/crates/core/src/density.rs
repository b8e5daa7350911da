//! Online density estimation under logarithmic loss with the aggregating
//! (exponential-weights) algorithm over a finite expert class.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nfg::MixedStrategy;
use crate::rng;

/// `log(1/q[o])`, `+∞` when `q[o] = 0`.
pub fn log_loss(q: &[f64], outcome: usize) -> f64 {
    let p = q[outcome];
    if p <= 0.0 {
        f64::INFINITY
    } else {
        -p.ln()
    }
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            player: 0,
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Softmax of log weights with max subtraction; `−∞` entries get weight 0.
/// `None` when no entry is finite.
pub fn posterior_from_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_weights
        .iter()
        .map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Some(w)
}

/// `Σ_e posterior[e] · predictions[e]`, accumulated in expert order.
pub fn mixture<'a>(posterior: &[f64], predictions: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (w, p) in posterior.iter().zip(predictions) {
        if out.is_empty() {
            out = vec![0.0; p.len()];
        }
        for (o, x) in out.iter_mut().zip(p) {
            *o += w * x;
        }
    }
    out
}

/// Tabulated experts: `table[e][c]` is expert `e`'s prediction in context `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSet {
    outcomes: usize,
    table: Vec<Vec<MixedStrategy>>,
}

impl ExpertSet {
    pub fn new(table: Vec<Vec<MixedStrategy>>) -> Result<Self> {
        let first = table
            .first()
            .ok_or_else(|| Error::InvalidDistribution("no experts".into()))?;
        let contexts = first.len();
        let outcomes = first
            .first()
            .ok_or_else(|| Error::InvalidDistribution("no contexts".into()))?
            .len();
        for (e, row) in table.iter().enumerate() {
            if row.len() != contexts {
                return Err(Error::DimensionMismatch {
                    player: e,
                    expected: contexts,
                    found: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|p| p.len() != outcomes) {
                return Err(Error::DimensionMismatch {
                    player: e,
                    expected: outcomes,
                    found: bad.len(),
                });
            }
        }
        Ok(Self { outcomes, table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes
    }

    pub fn context_count(&self) -> usize {
        self.table[0].len()
    }

    pub fn prediction(&self, expert: usize, context: usize) -> &MixedStrategy {
        &self.table[expert][context]
    }
}

/// Cumulative log-likelihood per expert (`−∞` once an expert is ruled out).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorState {
    pub log_weights: Vec<f64>,
    /// Index `h` of the next prediction, starting at 1.
    pub step: usize,
}

impl AggregatorState {
    /// Uniform prior over `n` experts.
    pub fn new(n: usize) -> Self {
        Self {
            log_weights: vec![0.0; n],
            step: 1,
        }
    }

    pub fn posterior(&self) -> Result<Vec<f64>> {
        posterior_from_log_weights(&self.log_weights).ok_or(Error::Unrealizable)
    }

    pub fn predict(&self, experts: &ExpertSet, context: usize) -> Result<MixedStrategy> {
        let post = self.posterior()?;
        let q = mixture(
            &post,
            (0..experts.len()).map(|e| experts.prediction(e, context).probs()),
        );
        Ok(MixedStrategy::from_trusted(q))
    }

    pub fn observe(&self, experts: &ExpertSet, context: usize, outcome: usize) -> Self {
        let mut next = self.clone();
        next.observe_mut(experts, context, outcome);
        next
    }

    pub fn observe_mut(&mut self, experts: &ExpertSet, context: usize, outcome: usize) {
        for (e, w) in self.log_weights.iter_mut().enumerate() {
            *w -= log_loss(experts.prediction(e, context).probs(), outcome);
        }
        self.step += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub context: usize,
    pub prediction: MixedStrategy,
    pub outcome: usize,
}

/// Learner's cumulative log loss minus the best expert's.
pub fn expert_regret(trace: &[TraceStep], experts: &ExpertSet) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidDistribution("empty trace".into()));
    }
    let learner: f64 = trace
        .iter()
        .map(|s| log_loss(s.prediction.probs(), s.outcome))
        .sum();
    let best = (0..experts.len())
        .map(|e| {
            trace
                .iter()
                .map(|s| log_loss(experts.prediction(e, s.context).probs(), s.outcome))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(learner - best)
}

/// Parameters of a realizable simulation: contexts are drawn uniformly, the
/// true expert uniformly, and outcomes from the true expert's prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizableConfig {
    pub experts: usize,
    pub outcomes: usize,
    pub contexts: usize,
    pub horizon: usize,
}

impl Default for RealizableConfig {
    fn default() -> Self {
        Self {
            experts: 32,
            outcomes: 4,
            contexts: 8,
            horizon: 64,
        }
    }
}

impl RealizableConfig {
    /// `√(log|E| / H)`.
    pub fn tv_bound(&self) -> f64 {
        ((self.experts as f64).ln() / self.horizon as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub true_expert: usize,
    /// `(1/H) Σ_h TV(q̂_h, p^(e★)(c_h))`.
    pub mean_tv: f64,
    pub regret: f64,
    pub trace: Vec<TraceStep>,
}

pub fn random_experts<R: Rng + ?Sized>(rng: &mut R, cfg: &RealizableConfig) -> ExpertSet {
    let table = (0..cfg.experts)
        .map(|_| {
            (0..cfg.contexts)
                .map(|_| MixedStrategy::from_trusted(rng::interior_simplex_point(rng, cfg.outcomes)))
                .collect()
        })
        .collect();
    ExpertSet::new(table).expect("consistent table")
}

fn sample<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// One realizable run of the aggregating algorithm.
pub fn simulate_realizable(cfg: &RealizableConfig, seed: u64) -> SimulationResult {
    let mut r = rng::seeded(seed);
    let experts = random_experts(&mut r, cfg);
    let true_expert = r.gen_range(0..cfg.experts);
    let mut state = AggregatorState::new(cfg.experts);
    let mut trace = Vec::with_capacity(cfg.horizon);
    let mut tv_sum = 0.0;
    for _ in 0..cfg.horizon {
        let context = r.gen_range(0..cfg.contexts);
        let q = state.predict(&experts, context).expect("realizable");
        let truth = experts.prediction(true_expert, context);
        tv_sum += tv_distance(q.probs(), truth.probs()).expect("same outcome space");
        let outcome = sample(&mut r, truth.probs());
        state.observe_mut(&experts, context, outcome);
        trace.push(TraceStep {
            context,
            prediction: q,
            outcome,
        });
    }
    let regret = expert_regret(&trace, &experts).expect("nonempty trace");
    SimulationResult {
        true_expert,
        mean_tv: tv_sum / cfg.horizon as f64,
        regret,
        trace,
    }
}
