//! generate → lift → learn → extract, with a hashed manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sparse_cce::extraction::{extract_nash, ExtractionConfig, ExtractionReport};
use sparse_cce::learners::run_hedge_lifted;
use sparse_cce::lifted::lift;
use sparse_cce::nfg::make_standard_game;
use sparse_cce::strategies::cce_gap_lifted;
use sparse_cce::{BehavioralProfile, BimatrixGame, Game, LiftedGame, SparseCorrelated};

use crate::io::{read_bimatrix, read_json, sha256_file, write_bytes, write_json};
use crate::{check_node_budget, exit};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSource {
    Named {
        name: String,
        m: Option<usize>,
        seed: Option<u64>,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum ThresholdPolicy {
    Explicit(f64),
    /// `ε̂ = max(measured gap, √(ln T / H))`, threshold `9ε̂`.
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSpec {
    pub game: GameSource,
    pub horizon: usize,
    pub eta: f64,
    pub iterations: usize,
    pub threshold: ThresholdPolicy,
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub node_budget: u128,
    /// Use this CCE file instead of running the learner.
    pub inject_cce: Option<PathBuf>,
    /// Metrics row every this many iterations.
    pub metrics_every: usize,
}

impl PipelineSpec {
    pub fn new(game: GameSource, horizon: usize, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            game,
            horizon,
            eta: 0.2,
            iterations: 20,
            threshold: ThresholdPolicy::Theorem,
            seed: 0,
            out_dir: out_dir.into(),
            node_budget: crate::DEFAULT_NODE_BUDGET,
            inject_cce: None,
            metrics_every: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRecord {
    pub policy: &'static str,
    pub epsilon_hat: Option<f64>,
    pub threshold: f64,
    /// The threshold is at least the payoff range, so any profile passes.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub versions: Versions,
    pub spec: PipelineSpec,
    pub node_count: u128,
    pub cce_gap: [f64; 3],
    pub threshold: ThresholdRecord,
    pub outcome: &'static str,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub core: &'static str,
    pub cli: &'static str,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub exit_code: i32,
    pub manifest: Manifest,
    pub extraction: ExtractionReport,
}

/// Files written into the output directory whose hashes go into the manifest.
pub const HASHED_ARTIFACTS: [&str; 5] = ["game.json", "lifted.json", "cce.json", "metrics.csv", "extraction.json"];

#[derive(Serialize)]
struct Timings {
    phases: Vec<(&'static str, f64)>,
}

pub fn resolve_game(source: &GameSource, default_seed: u64) -> Result<BimatrixGame> {
    match source {
        GameSource::Named { name, m, seed } => {
            Ok(make_standard_game(name, *m, Some(seed.unwrap_or(default_seed)))?)
        }
        GameSource::File(path) => read_bimatrix(path),
    }
}

#[derive(Serialize)]
pub struct LiftedDescriptor<'a> {
    pub base: &'a BimatrixGame,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub node_count: u128,
}

/// Writes `iteration`, per-player regret (`t · gap`) and per-player gap rows
/// for prefix mixtures at every `every`-th iteration and at the last one.
pub fn lifted_metrics_csv(lg: &LiftedGame, components: &[BehavioralProfile], every: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "regret_p1", "regret_p2", "regret_k", "gap_p1", "gap_p2", "gap_k"])?;
    let every = every.max(1);
    let t = components.len();
    for i in (1..=t).filter(|i| i % every == 0 || *i == t) {
        let prefix = SparseCorrelated::uniform(components[..i].to_vec())?;
        let gap = cce_gap_lifted(lg, &prefix)?;
        let mut row = vec![i.to_string()];
        row.extend(gap.iter().map(|g| (g * i as f64).to_string()));
        row.extend(gap.iter().map(|g| g.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

fn threshold_record(policy: ThresholdPolicy, measured: f64, iterations: usize, horizon: usize) -> ThresholdRecord {
    match policy {
        ThresholdPolicy::Explicit(x) => ThresholdRecord {
            policy: "explicit",
            epsilon_hat: None,
            threshold: x,
            vacuous: x >= 2.0,
        },
        ThresholdPolicy::Theorem => {
            let floor = ((iterations.max(1) as f64).ln() / horizon as f64).sqrt();
            let eps = measured.max(floor);
            let threshold = 9.0 * eps;
            ThresholdRecord {
                policy: "theorem",
                epsilon_hat: Some(eps),
                threshold,
                vacuous: threshold >= 2.0,
            }
        }
    }
}

/// Runs every phase and writes the report bundle into `spec.out_dir`.
pub fn run_pipeline(spec: &PipelineSpec) -> Result<PipelineResult> {
    let out = spec.out_dir.as_path();
    let mut timings = Timings { phases: Vec::new() };
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Timings| {
        timings.phases.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let game = resolve_game(&spec.game, spec.seed).context("phase game")?;
    write_json(&out.join("game.json"), &Game::Bimatrix(game.clone()))?;
    lap("game", &mut timings);

    let node_count = check_node_budget(game.m(), spec.horizon, spec.node_budget).context("phase lift")?;
    let lg = lift(&game, spec.horizon).context("phase lift")?;
    write_json(
        &out.join("lifted.json"),
        &LiftedDescriptor {
            base: &game,
            horizon: spec.horizon,
            node_count,
        },
    )?;
    lap("lift", &mut timings);

    let mu: SparseCorrelated<BehavioralProfile> = match &spec.inject_cce {
        Some(path) => read_json(path).context("phase learn")?,
        None => {
            let run = run_hedge_lifted(&lg, [spec.eta; 3], spec.iterations, Some(spec.seed)).context("phase learn")?;
            run.mixture
        }
    };
    for c in mu.components() {
        c.check(&lg).context("phase learn")?;
    }
    write_json(&out.join("cce.json"), &mu)?;
    let metrics = lifted_metrics_csv(&lg, mu.components(), spec.metrics_every).context("phase learn")?;
    write_bytes(&out.join("metrics.csv"), &metrics)?;
    lap("learn", &mut timings);

    let gap = cce_gap_lifted(&lg, &mu).context("phase extract")?;
    let measured = gap.iter().copied().fold(0.0_f64, f64::max);
    let threshold = threshold_record(spec.threshold, measured, mu.len(), spec.horizon);
    let report = extract_nash(&game, &lg, &mu, &ExtractionConfig::new(threshold.threshold)).context("phase extract")?;
    write_json(&out.join("extraction.json"), &report)?;
    lap("extract", &mut timings);

    let artifacts = HASHED_ARTIFACTS
        .iter()
        .map(|name| {
            Ok(Artifact {
                name: name.to_string(),
                sha256: sha256_file(&out.join(name))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let found = report.is_found();
    let manifest = Manifest {
        tool: "sparse-cce",
        versions: Versions {
            core: sparse_cce::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        spec: spec.clone(),
        node_count,
        cce_gap: gap,
        threshold,
        outcome: if found { "found" } else { "failed" },
        artifacts,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("timings.json"), &timings)?;

    Ok(PipelineResult {
        exit_code: if found { exit::SUCCESS } else { exit::EXTRACTION_FAILED },
        manifest,
        extraction: report,
    })
}

/// SHA-256 of every deterministic artifact in a bundle directory, manifest included.
pub fn bundle_hashes(dir: &Path) -> Result<Vec<(String, String)>> {
    HASHED_ARTIFACTS
        .iter()
        .chain(std::iter::once(&"manifest.json"))
        .map(|name| Ok((name.to_string(), sha256_file(&dir.join(name))?)))
        .collect()
}
