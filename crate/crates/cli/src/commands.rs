use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sparse_cce::density::{simulate_realizable, RealizableConfig};
use sparse_cce::extraction::{extract_nash, ExtractionConfig};
use sparse_cce::learners::{default_learning_rate, run_dynamics, run_hedge_lifted, Algorithm, LearnerConfig};
use sparse_cce::lifted::lift;
use sparse_cce::nfg::{cce_gap, make_standard_game, ne_gap, random_nfg};
use sparse_cce::oracles::{exhaustive_leaf_check, materialized_cce_gap, LEAF_BUDGET};
use sparse_cce::strategies::cce_gap_lifted;
use sparse_cce::{BehavioralProfile, Game, MixedProfile, SparseCorrelated};

use crate::io::{read_bimatrix, read_game, read_json, resolve, to_json_string, write_bytes, write_json};
use crate::pipeline::{lifted_metrics_csv, run_pipeline, GameSource, LiftedDescriptor, PipelineSpec, ThresholdPolicy};
use crate::{check_node_budget, exit, DEFAULT_NODE_BUDGET};

#[derive(Debug, Parser)]
#[command(name = "sparse-cce", version, about = "Sparse CCEs in Kibitzer-lifted games")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel phases (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Alg {
    Hedge,
    Mwu,
    Omwu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyWhat {
    CceGap,
    LiftedCceGap,
    NeGap,
    ZeroSum,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in or random game as JSON.
    GenGame {
        /// matching_pennies, prisoners_dilemma, rock_paper_scissors or random_bimatrix
        #[arg(long, conflicts_with = "actions")]
        name: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        /// Random n-player game with these action counts, e.g. `2,2,2`.
        #[arg(long, value_delimiter = ',')]
        actions: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the lifted game of a bimatrix game.
    Lift {
        #[arg(long)]
        game: PathBuf,
        #[arg(long = "lift")]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the sequential-move tree to this file.
        #[arg(long)]
        export_sequential: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u128,
    },
    /// Run no-regret dynamics and write the uniform mixture of iterates.
    Learn {
        #[arg(long)]
        game: PathBuf,
        /// Learn on the lifted game with this horizon (hedge only).
        #[arg(long = "lift")]
        horizon: Option<usize>,
        #[arg(long, value_enum, default_value_t = Alg::Hedge)]
        alg: Alg,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV path (default: alongside `--out` with a `.metrics.csv` suffix).
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u128,
    },
    /// Recover an approximate Nash equilibrium from a lifted-game CCE.
    Extract {
        #[arg(long)]
        game: PathBuf,
        #[arg(long = "lift")]
        horizon: usize,
        #[arg(long)]
        cce: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Scan every state and record all gaps.
        #[arg(long)]
        enumerate_all: bool,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u128,
    },
    /// Recompute a quantity and print a JSON verdict.
    Verify {
        #[arg(long, value_enum)]
        what: VerifyWhat,
        #[arg(long)]
        game: PathBuf,
        #[arg(long = "lift")]
        horizon: Option<usize>,
        #[arg(long)]
        cce: Option<PathBuf>,
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Largest gap (or leaf sum) still reported as `ok`.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// generate → lift → learn → extract with a hashed manifest.
    Pipeline {
        #[arg(long, conflicts_with = "game_file")]
        game: Option<String>,
        #[arg(long)]
        game_file: Option<PathBuf>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "lift")]
        horizon: usize,
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        /// Explicit NE-gap threshold; without it the theorem policy is used.
        #[arg(long)]
        threshold: Option<f64>,
        /// Skip learning and use this CCE.
        #[arg(long)]
        inject_cce: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        every: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u128,
    },
    /// Realizable density-estimation runs: one CSV row per seed.
    DensityBench {
        #[arg(long, default_value_t = 200)]
        seeds: u64,
        #[arg(long, default_value_t = 32)]
        experts: usize,
        #[arg(long, default_value_t = 4)]
        outcomes: usize,
        #[arg(long, default_value_t = 8)]
        contexts: usize,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return exit::INVALID_INPUT;
        }
    }
    match dispatch(&cli.global, cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            crate::exit_code_for(&e)
        }
    }
}

fn emit(global: &Global, out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_bytes(&resolve(global.out_dir.as_deref(), p), text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn dispatch(global: &Global, command: Command) -> Result<i32> {
    let path = |p: &PathBuf| resolve(global.out_dir.as_deref(), p);
    match command {
        Command::GenGame { name, m, actions, out } => {
            let game = match (name, actions) {
                (_, Some(actions)) => {
                    if actions.is_empty() || actions.contains(&0) {
                        bail!("--actions needs positive counts");
                    }
                    Game::Nfg(random_nfg(&actions, global.seed))
                }
                (Some(name), None) => Game::Bimatrix(make_standard_game(&name, m, Some(global.seed))?),
                (None, None) => bail!("gen-game needs --name or --actions"),
            };
            emit(global, out.as_ref(), &to_json_string(&game)?)?;
            Ok(exit::SUCCESS)
        }
        Command::Lift {
            game,
            horizon,
            out,
            export_sequential,
            node_budget,
        } => {
            let g = read_bimatrix(&game)?;
            let node_count = check_node_budget(g.m(), horizon, node_budget)?;
            let lg = lift(&g, horizon)?;
            let desc = LiftedDescriptor {
                base: &g,
                horizon,
                node_count,
            };
            emit(global, out.as_ref(), &to_json_string(&desc)?)?;
            if let Some(p) = export_sequential {
                let tree = lg.to_sequential(node_budget)?;
                write_json(&path(&p), &tree)?;
            }
            Ok(exit::SUCCESS)
        }
        Command::Learn {
            game,
            horizon,
            alg,
            eta,
            iters,
            out,
            metrics,
            every,
            node_budget,
        } => {
            let out = path(&out);
            let metrics = metrics
                .map(|p| path(&p))
                .unwrap_or_else(|| out.with_extension("metrics.csv"));
            let game = read_game(&game)?;
            match (horizon, alg) {
                (Some(h), Alg::Hedge) => {
                    let g = game
                        .as_bimatrix()
                        .context("lifting needs a two-player square game")?;
                    check_node_budget(g.m(), h, node_budget)?;
                    let lg = lift(g, h)?;
                    let eta = eta.unwrap_or_else(|| default_learning_rate(2 * g.m(), iters));
                    let run = run_hedge_lifted(&lg, [eta; 3], iters, Some(global.seed))?;
                    write_json(&out, &run.mixture)?;
                    write_bytes(&metrics, &lifted_metrics_csv(&lg, &run.components, every)?)?;
                }
                (Some(_), _) => bail!("mwu and omwu run on the normal-form game; use --alg hedge with --lift"),
                (None, Alg::Hedge) => bail!("--alg hedge needs --lift"),
                (None, alg) => {
                    let nf = game.to_nfg();
                    let algorithm = if alg == Alg::Mwu { Algorithm::Mwu } else { Algorithm::Omwu };
                    let configs: Vec<LearnerConfig> = nf
                        .action_counts()
                        .iter()
                        .map(|_| LearnerConfig {
                            algorithm,
                            learning_rate: eta,
                            initial: None,
                        })
                        .collect();
                    let run = run_dynamics(&nf, &configs, iters)?;
                    write_json(&out, &run.mixture)?;
                    write_bytes(&metrics, &normal_form_metrics(&nf, &run.trajectory, every)?)?;
                }
            }
            Ok(exit::SUCCESS)
        }
        Command::Extract {
            game,
            horizon,
            cce,
            threshold,
            report,
            enumerate_all,
            node_budget,
        } => {
            let g = read_bimatrix(&game)?;
            check_node_budget(g.m(), horizon, node_budget)?;
            let lg = lift(&g, horizon)?;
            let mu: SparseCorrelated<BehavioralProfile> = read_json(&cce)?;
            let cfg = ExtractionConfig {
                ne_threshold: threshold,
                enumerate_all,
            };
            let r = extract_nash(&g, &lg, &mu, &cfg)?;
            emit(global, report.as_ref(), &to_json_string(&r)?)?;
            Ok(if r.is_found() { exit::SUCCESS } else { exit::EXTRACTION_FAILED })
        }
        Command::Verify {
            what,
            game,
            horizon,
            cce,
            profile,
            tol,
        } => {
            let verdict = verify(what, &game, horizon, cce.as_ref(), profile.as_ref(), tol)?;
            let text = match global.format {
                Format::Json => to_json_string(&verdict)?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["what", "ok", "value"])?;
                    w.write_record([
                        verdict["what"].as_str().unwrap_or_default().to_string(),
                        verdict["ok"].to_string(),
                        verdict["value"].to_string(),
                    ])?;
                    String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?
                }
            };
            emit(global, None, &text)?;
            Ok(exit::SUCCESS)
        }
        Command::Pipeline {
            game,
            game_file,
            m,
            horizon,
            eta,
            iters,
            threshold,
            inject_cce,
            every,
            node_budget,
        } => {
            let source = match (game, game_file) {
                (_, Some(f)) => GameSource::File(f),
                (Some(name), None) => GameSource::Named { name, m, seed: None },
                (None, None) => bail!("pipeline needs --game or --game-file"),
            };
            let out_dir = global.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let spec = PipelineSpec {
                game: source,
                horizon,
                eta,
                iterations: iters,
                threshold: threshold.map_or(ThresholdPolicy::Theorem, ThresholdPolicy::Explicit),
                seed: global.seed,
                out_dir,
                node_budget,
                inject_cce,
                metrics_every: every,
            };
            let result = run_pipeline(&spec)?;
            println!("{}", serde_json::to_string(&result.manifest)?);
            Ok(result.exit_code)
        }
        Command::DensityBench {
            seeds,
            experts,
            outcomes,
            contexts,
            horizon,
            out,
        } => {
            let cfg = RealizableConfig {
                experts,
                outcomes,
                contexts,
                horizon,
            };
            if experts == 0 || outcomes == 0 || contexts == 0 || horizon == 0 {
                bail!("density-bench sizes must be positive");
            }
            let rows: Vec<DensityRow> = (0..seeds)
                .into_par_iter()
                .map(|seed| DensityRow {
                    seed,
                    horizon,
                    experts,
                    mean_tv: simulate_realizable(&cfg, seed).mean_tv,
                    bound: cfg.tv_bound(),
                })
                .collect();
            let text = match global.format {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for r in &rows {
                        w.serialize(r)?;
                    }
                    String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?
                }
                Format::Json => to_json_string(&rows)?,
            };
            emit(global, out.as_ref(), &text)?;
            Ok(exit::SUCCESS)
        }
    }
}

#[derive(Debug, Serialize)]
struct DensityRow {
    seed: u64,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "E")]
    experts: usize,
    mean_tv: f64,
    bound: f64,
}

fn normal_form_metrics(nf: &sparse_cce::NormalFormGame, trajectory: &[MixedProfile], every: usize) -> Result<Vec<u8>> {
    let n = nf.player_count();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=n).map(|p| format!("regret_p{p}")));
    header.extend((1..=n).map(|p| format!("gap_p{p}")));
    w.write_record(&header)?;
    let every = every.max(1);
    let t = trajectory.len();
    for i in (1..=t).filter(|i| i % every == 0 || *i == t) {
        let gap = cce_gap(nf, &SparseCorrelated::uniform(trajectory[..i].to_vec())?)?;
        let mut row = vec![i.to_string()];
        row.extend(gap.iter().map(|g| (g * i as f64).to_string()));
        row.extend(gap.iter().map(|g| g.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

fn verify(
    what: VerifyWhat,
    game: &std::path::Path,
    horizon: Option<usize>,
    cce: Option<&PathBuf>,
    profile: Option<&PathBuf>,
    tol: f64,
) -> Result<serde_json::Value> {
    let need_h = || horizon.context("--lift is required for this check");
    Ok(match what {
        VerifyWhat::CceGap => {
            let nf = read_game(game)?.to_nfg();
            let mu: SparseCorrelated<MixedProfile> = read_json(cce.context("--cce is required")?)?;
            let gaps = cce_gap(&nf, &mu)?;
            let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            json!({"what": "cce-gap", "gaps": gaps, "value": max, "tol": tol, "ok": max <= tol})
        }
        VerifyWhat::LiftedCceGap => {
            let g = read_bimatrix(game)?;
            let lg = lift(&g, need_h()?)?;
            let mu: SparseCorrelated<BehavioralProfile> = read_json(cce.context("--cce is required")?)?;
            let gaps = cce_gap_lifted(&lg, &mu)?;
            let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // the arena cross-check only runs on trees within the leaf budget
            let dual = match materialized_cce_gap(&lg, &mu) {
                Ok(d) => Some(d),
                Err(sparse_cce::Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let agree = dual.map(|d| d.iter().zip(&gaps).all(|(a, b)| (a - b).abs() <= 1e-10));
            json!({
                "what": "lifted-cce-gap", "gaps": gaps, "value": max, "tol": tol,
                "dual_gaps": dual, "dual_agrees": agree,
                "ok": max <= tol && agree != Some(false),
            })
        }
        VerifyWhat::NeGap => {
            let nf = read_game(game)?.to_nfg();
            let p: MixedProfile = read_json(profile.context("--profile is required")?)?;
            let gap = ne_gap(&nf, &p)?;
            json!({"what": "ne-gap", "value": gap, "tol": tol, "ok": gap <= tol})
        }
        VerifyWhat::ZeroSum => {
            let g = read_bimatrix(game)?;
            let lg = lift(&g, need_h()?)?;
            let r = exhaustive_leaf_check(&lg)?;
            json!({
                "what": "zero-sum", "value": r.max_abs_sum, "tol": tol, "leaves": r.leaves,
                "leaf_budget": LEAF_BUDGET, "max_abs_component": r.max_abs_component,
                "out_of_unit": r.out_of_unit, "ok": r.max_abs_sum <= tol,
            })
        }
    })
}
