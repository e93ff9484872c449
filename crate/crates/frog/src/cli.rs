//! Command surface: six subcommands over the library, each writing a
//! self-describing run directory (config echo with content hash, JSON and
//! CSV reports). Exit codes: 0 success, 2 configuration error, 1 runtime
//! failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ForgetSelector};
use crate::data::{
    generate_synthetic, load_dataset, make_split, save_dataset, DatasetBundle, ForgetMode,
    SplitSpec,
};
use crate::error::{FrogError, Result};
use crate::graph::Edge;
use crate::metrics::{
    bound_grid_spec, check_theorem_3_1, check_theorem_5_1, random_masked_instance, BoundReport,
};
use crate::models::{Checkpoint, DeletionOperator};
use crate::trainer::{
    evaluate_run, run_method, train_original, EvalMetrics, TrainedModel, UnlearnOutcome,
};
use crate::worstcase::{select_worst_case, WorstCaseObjective, WorstCaseParams};

pub const CSV_HEADER: &str = "dataset,method,seed,forget_pct,auroc_test,knowledge_gap,mi_ratio,\
                              delta_dp,delta_eo,delta_sp,rho_before,rho_after,wall_seconds";

#[derive(Parser, Debug)]
#[command(
    name = "frog",
    about = "Fair graph unlearning: train, unlearn, audit",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Train the original link predictor and store checkpoints.
    Train(RunArgs),
    /// Unlearn the forget set with the configured method and write reports.
    Unlearn(RunArgs),
    /// Select an adversarial forget set and emit a forget file.
    Worstcase(WorstArgs),
    /// Recompute reports for a finished run directory.
    Evaluate(EvalArgs),
    /// Check the analytical bounds numerically.
    Verify(VerifyArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
}

/// Config file plus flag overrides shared by train/unlearn/worstcase.
#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    over: Overrides,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Dataset directory (overrides synthetic generation).
    #[arg(long)]
    dataset: Option<String>,
    /// frog, frog-joint, retrain, ga or gnndelete.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Run directory (default: $FROG_OUT_DIR or ./runs, auto-named).
    #[arg(long)]
    out_dir: Option<String>,
    /// uniform, worst-unlearn, worst-fair or file.
    #[arg(long)]
    forget_mode: Option<String>,
    #[arg(long)]
    forget_pct: Option<f64>,
    /// Edge list consumed when forget_mode = file.
    #[arg(long)]
    forget_file: Option<String>,
    /// Fairness weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Structure-distance weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Structure modification budget.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            };
            ($field:ident, plain) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(dataset);
        set!(method, plain);
        set!(seeds, plain);
        set!(out_dir);
        set!(forget_mode, plain);
        if let Some(v) = self.forget_pct {
            cfg.forget_pct = v;
        }
        set!(forget_file);
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = Some(v);
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
    }
}

#[derive(Args, Debug)]
struct WorstArgs {
    #[command(flatten)]
    run: RunArgs,
    /// unlearning or fairness; default derived from forget_mode.
    #[arg(long)]
    objective: Option<String>,
    /// Forget-set size; default matches the configured forget_pct.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// A run directory produced by `unlearn`.
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// 3.1 (disparity vs homophily) or 5.1 (embedding deviation).
    #[arg(long)]
    theorem: String,
    /// Monte-Carlo trials per grid cell (theorem 3.1).
    #[arg(long, default_value_t = 48)]
    trials: usize,
    /// Random instances (theorem 5.1).
    #[arg(long, default_value_t = 500)]
    instances: usize,
    #[arg(long)]
    out_dir: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target directory; defaults to the output root plus the dataset name.
    #[arg(long)]
    out_dir: Option<String>,
}

/// Parses the process arguments and runs the selected command.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Train(a) => cmd_train(&load_config(&a)?),
        Cmd::Unlearn(a) => cmd_unlearn(&load_config(&a)?),
        Cmd::Worstcase(a) => {
            let cfg = load_config(&a.run)?;
            cmd_worstcase(&cfg, a.objective.as_deref(), a.k)
        }
        Cmd::Evaluate(a) => cmd_evaluate(&a.run_dir),
        Cmd::Verify(a) => cmd_verify(&a),
        Cmd::Synth(a) => cmd_synth(&a),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    args.over.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn load_bundle(cfg: &ExperimentConfig) -> Result<DatasetBundle> {
    match &cfg.dataset {
        Some(dir) => load_dataset(Path::new(dir)),
        None => generate_synthetic(&cfg.synthetic_spec()),
    }
}

/// Creates the run directory and writes the config echo plus its hash.
fn prepare_run_dir(cfg: &ExperimentConfig, kind: &str) -> Result<PathBuf> {
    let dir = if cfg.out_dir.is_some() {
        cfg.out_root()
    } else {
        cfg.out_root()
            .join(format!("{kind}-{}-{}", cfg.dataset_name, cfg.method))
    };
    std::fs::create_dir_all(&dir)?;
    let echo = cfg.to_toml_string()?;
    std::fs::write(dir.join("config.toml"), &echo)?;
    std::fs::write(
        dir.join("config.sha256"),
        format!("{}\n", sha256_hex(echo.as_bytes())),
    )?;
    Ok(dir)
}

fn write_forget_file(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut s = String::from("src\tdst\n");
    for &(u, v) in edges {
        s.push_str(&format!("{u}\t{v}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Reads a forget file: tab-separated pairs, optional `src\tdst` header.
pub fn read_forget_file(path: &Path) -> Result<Vec<Edge>> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| FrogError::Data(format!("forget file {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (num, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split('\t');
        let pair = (toks.next().unwrap_or(""), toks.next().unwrap_or(""));
        match (pair.0.trim().parse(), pair.1.trim().parse()) {
            (Ok(u), Ok(v)) => out.push(crate::graph::canonical(u, v)),
            _ if num == 0 => continue, // header row
            _ => {
                return Err(FrogError::Data(format!(
                    "forget file {} line {}: expected two integers, got {line:?}",
                    path.display(),
                    num + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(FrogError::Data(format!(
            "forget file {} contains no edges",
            path.display()
        )));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Train split and original model for one seed; the train set is fixed by
/// the base split, so worst-case forget selections can swap the forget set
/// afterwards without invalidating the model.
fn train_base(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    seed: u64,
) -> Result<(SplitSpec, TrainedModel)> {
    let base = make_split(
        &bundle.graph,
        cfg.forget_pct,
        &ForgetMode::NearTest {
            hops: cfg.forget_hops,
        },
        seed,
    )?;
    let model = train_original(&bundle.graph, &base, &cfg.hyperparams(), seed)?;
    Ok((base, model))
}

fn resolve_forget(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
    base: &SplitSpec,
    model: &TrainedModel,
    seed: u64,
) -> Result<SplitSpec> {
    match cfg.forget_selector()? {
        ForgetSelector::Uniform => Ok(base.clone()),
        ForgetSelector::File => {
            let path = cfg.forget_file.as_ref().expect("validated");
            base.with_forget(read_forget_file(Path::new(path))?)
        }
        sel @ (ForgetSelector::WorstUnlearn | ForgetSelector::WorstFair) => {
            let objective = if sel == ForgetSelector::WorstFair {
                WorstCaseObjective::Fairness
            } else {
                WorstCaseObjective::Unlearning
            };
            let pool = base.train_edges();
            let k = base.forget.len().max(1);
            let sel = select_worst_case(
                &bundle.graph,
                &pool,
                &model.encoder,
                k,
                objective,
                &WorstCaseParams::default(),
                seed,
            )?;
            base.with_forget(sel.edges)
        }
    }
}

#[derive(Serialize)]
struct ReportRow {
    dataset: String,
    method: String,
    seed: u64,
    forget_pct: f64,
    #[serde(flatten)]
    metrics: EvalMetrics,
    wall_seconds: f64,
}

impl ReportRow {
    fn csv(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.dataset,
            self.method,
            self.seed,
            self.forget_pct,
            m.auroc_test,
            m.knowledge_gap,
            m.mi_ratio,
            m.delta_dp,
            m.delta_eo,
            m.delta_sp,
            m.rho_before,
            m.rho_after,
            self.wall_seconds
        )
    }
}

fn write_report(dir: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r.csv());
        csv.push('\n');
    }
    std::fs::write(dir.join("report.csv"), csv)?;
    let json = serde_json::to_string_pretty(&rows)?;
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}

/// Structure diff and deletion scope of one unlearning run, stored so that
/// evaluation can reconstruct the unlearned model without re-running it.
#[derive(Serialize, Deserialize)]
struct StructureDiff {
    adds: Vec<Edge>,
    removals: Vec<Edge>,
    affected: Vec<usize>,
    edges: Vec<Edge>,
}

fn write_seed_artifacts(
    dir: &Path,
    seed: u64,
    split: &SplitSpec,
    original: &TrainedModel,
    outcome: &UnlearnOutcome,
) -> Result<()> {
    let ck_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ck_dir)?;
    Checkpoint::new(seed, &original.encoder).save(&ck_dir.join(format!("original_{seed}.json")))?;
    let mut ck = Checkpoint::new(seed, &outcome.encoder).with_deletion(&outcome.deletion);
    if let Some(a) = &outcome.augmenter {
        ck = ck.with_augmenter(a);
    }
    if let Some(p) = &outcome.pruner {
        ck = ck.with_pruner(p);
    }
    ck.save(&ck_dir.join(format!("unlearned_{seed}.json")))?;

    write_forget_file(&dir.join(format!("forget_{seed}.tsv")), &split.forget)?;
    let diff = StructureDiff {
        adds: outcome.adds.clone(),
        removals: outcome.removals.clone(),
        affected: outcome.affected.clone(),
        edges: outcome.structure.clone(),
    };
    std::fs::write(
        dir.join(format!("structure_{seed}.json")),
        serde_json::to_string_pretty(&diff)?,
    )?;

    let mut trace = String::from("round,phase,loss\n");
    for t in &outcome.trace {
        trace.push_str(&format!("{},{},{:.6}\n", t.round, t.phase, t.loss));
    }
    std::fs::write(dir.join(format!("trace_{seed}.csv")), trace)?;
    Ok(())
}

/// Hard invariants of every finalized structure: no forgotten edge survives
/// and the diff respects the modification budget.
fn assert_structure_invariants(
    split: &SplitSpec,
    outcome: &UnlearnOutcome,
    budget: Option<usize>,
) -> Result<()> {
    let structure: std::collections::BTreeSet<Edge> = outcome.structure.iter().copied().collect();
    for e in &split.forget {
        if structure.contains(e) {
            return Err(FrogError::Structure(format!(
                "forgotten edge ({}, {}) survived in the final structure",
                e.0, e.1
            )));
        }
    }
    let cap = budget.unwrap_or(split.forget.len());
    let mods = outcome.adds.len() + outcome.removals.len();
    if mods > cap {
        return Err(FrogError::Structure(format!(
            "{mods} structure modifications exceed the budget {cap}"
        )));
    }
    Ok(())
}

fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let bundle = load_bundle(cfg)?;
    let dir = prepare_run_dir(cfg, "train")?;
    let ck_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ck_dir)?;

    #[derive(Serialize)]
    struct TrainRow {
        seed: u64,
        val_auroc: f64,
        epochs_run: usize,
    }
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let (split, model) = train_base(cfg, &bundle, seed)?;
        Checkpoint::new(seed, &model.encoder)
            .save(&ck_dir.join(format!("original_{seed}.json")))?;
        write_forget_file(&dir.join(format!("forget_{seed}.tsv")), &split.forget)?;
        println!(
            "trained seed {seed}: val_auroc {:.4} after {} epochs",
            model.val_auroc, model.epochs_run
        );
        rows.push(TrainRow {
            seed,
            val_auroc: model.val_auroc,
            epochs_run: model.epochs_run,
        });
    }
    std::fs::write(dir.join("train.json"), serde_json::to_string_pretty(&rows)?)?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_unlearn(cfg: &ExperimentConfig) -> Result<()> {
    let method = cfg.method()?;
    let bundle = load_bundle(cfg)?;
    let dir = prepare_run_dir(cfg, "unlearn")?;
    std::fs::write(
        dir.join("dataset.json"),
        serde_json::to_string_pretty(&bundle.provenance)?,
    )?;

    let hp = cfg.hyperparams();
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let started = Instant::now();
        let (base, model) = train_base(cfg, &bundle, seed)?;
        let split = resolve_forget(cfg, &bundle, &base, &model, seed)?;
        let outcome = run_method(&bundle.graph, &split, &model.encoder, method, &hp, seed)?;
        assert_structure_invariants(&split, &outcome, hp.budget)?;
        let metrics = evaluate_run(
            &bundle.graph,
            &split,
            &model.encoder,
            &outcome,
            bundle.node_labels.as_deref(),
            seed,
        )?;
        let wall_seconds = started.elapsed().as_secs_f64();
        write_seed_artifacts(&dir, seed, &split, &model, &outcome)?;
        println!(
            "{} seed {seed}: auroc_test {:.2} knowledge_gap {:.2} mi_ratio {:.3} delta_dp {:.4} ({:.1}s)",
            method.name(),
            metrics.auroc_test,
            metrics.knowledge_gap,
            metrics.mi_ratio,
            metrics.delta_dp,
            wall_seconds
        );
        rows.push(ReportRow {
            dataset: bundle.name.clone(),
            method: method.name().to_string(),
            seed,
            forget_pct: cfg.forget_pct,
            metrics,
            wall_seconds,
        });
    }
    write_report(&dir, &rows)?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_worstcase(cfg: &ExperimentConfig, objective: Option<&str>, k: Option<usize>) -> Result<()> {
    let objective = match objective {
        Some(s) => WorstCaseObjective::parse(s)?,
        None => match cfg.forget_selector()? {
            ForgetSelector::WorstFair => WorstCaseObjective::Fairness,
            _ => WorstCaseObjective::Unlearning,
        },
    };
    let bundle = load_bundle(cfg)?;
    let dir = prepare_run_dir(cfg, "worstcase")?;

    #[derive(Serialize)]
    struct SelectionOut {
        seed: u64,
        objective: &'static str,
        edges: Vec<Edge>,
    }
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let (base, model) = train_base(cfg, &bundle, seed)?;
        let pool = base.train_edges();
        let k = k.unwrap_or_else(|| base.forget.len().max(1));
        let sel = select_worst_case(
            &bundle.graph,
            &pool,
            &model.encoder,
            k,
            objective,
            &WorstCaseParams::default(),
            seed,
        )?;
        write_forget_file(&dir.join(format!("forget_{seed}.tsv")), &sel.edges)?;
        println!(
            "seed {seed}: selected {} edges for the {} objective",
            sel.edges.len(),
            objective.name()
        );
        out.push(SelectionOut {
            seed,
            objective: objective.name(),
            edges: sel.edges,
        });
    }
    std::fs::write(
        dir.join("selection.json"),
        serde_json::to_string_pretty(&out)?,
    )?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_evaluate(run_dir: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let method = cfg.method()?;
    let bundle = load_bundle(&cfg)?;
    let hp = cfg.hyperparams();

    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let started = Instant::now();
        let ck_dir = run_dir.join("checkpoints");
        let original = Checkpoint::load(&ck_dir.join(format!("original_{seed}.json")))?;
        let unlearned = Checkpoint::load(&ck_dir.join(format!("unlearned_{seed}.json")))?;
        let raw = std::fs::read_to_string(run_dir.join(format!("structure_{seed}.json")))?;
        let diff: StructureDiff = serde_json::from_str(&raw)?;
        let forget = read_forget_file(&run_dir.join(format!("forget_{seed}.tsv")))?;

        let base = make_split(
            &bundle.graph,
            cfg.forget_pct,
            &ForgetMode::NearTest {
                hops: cfg.forget_hops,
            },
            seed,
        )?;
        let split = base.with_forget(forget)?;
        let encoder = unlearned.encoder()?;
        let deletion = unlearned
            .deletion()?
            .unwrap_or_else(|| DeletionOperator::identity(encoder.out_dim()));
        let outcome = UnlearnOutcome {
            structure: diff.edges,
            encoder,
            deletion,
            affected: diff.affected,
            adds: diff.adds,
            removals: diff.removals,
            augmenter: None,
            pruner: None,
            trace: Vec::new(),
        };
        assert_structure_invariants(&split, &outcome, hp.budget)?;
        let metrics = evaluate_run(
            &bundle.graph,
            &split,
            &original.encoder()?,
            &outcome,
            bundle.node_labels.as_deref(),
            seed,
        )?;
        println!(
            "seed {seed}: auroc_test {:.2} knowledge_gap {:.2} mi_ratio {:.3} delta_dp {:.4}",
            metrics.auroc_test, metrics.knowledge_gap, metrics.mi_ratio, metrics.delta_dp
        );
        rows.push(ReportRow {
            dataset: bundle.name.clone(),
            method: method.name().to_string(),
            seed,
            forget_pct: cfg.forget_pct,
            metrics,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    write_report(run_dir, &rows)?;
    println!("report refreshed in {}", run_dir.display());
    Ok(())
}

/// Grid of the disparity-bound verification: every combination is checked
/// and all must satisfy the bound.
pub fn verify_grid(trials: usize) -> Result<Vec<(String, BoundReport)>> {
    let rhos = [0.5, 0.6, 0.8, 0.95];
    let deltas = [("zero", 0.0), ("small", 0.25), ("large", 1.0)];
    let caps = [1.0, 2.0];
    let mut out = Vec::new();
    for (i, &rho) in rhos.iter().enumerate() {
        for (j, &(dname, delta)) in deltas.iter().enumerate() {
            for (l, &cap) in caps.iter().enumerate() {
                let seed = 1000 + (i * deltas.len() + j) as u64 * caps.len() as u64 + l as u64;
                let spec = bound_grid_spec(rho, delta, cap, seed);
                let report = check_theorem_3_1(&spec, trials, None)?;
                let label = format!("rho={rho} delta={dname} K={cap}");
                out.push((label, report));
            }
        }
    }
    Ok(out)
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let out_dir: PathBuf = match &args.out_dir {
        Some(d) => d.into(),
        None => std::env::var("FROG_OUT_DIR")
            .ok()
            .filter(|d| !d.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| "runs".into())
            .join("verify"),
    };
    std::fs::create_dir_all(&out_dir)?;

    match args.theorem.as_str() {
        "3.1" => {
            let reports = verify_grid(args.trials)?;
            let mut failures = 0usize;
            for (label, r) in &reports {
                let status = if r.satisfied { "PASS" } else { "FAIL" };
                println!(
                    "{status} {label}: empirical {:.6} bound {:.6} tolerance {:.6}",
                    r.empirical_value, r.bound_value, r.tolerance
                );
                failures += usize::from(!r.satisfied);
            }
            let json: Vec<serde_json::Value> = reports
                .iter()
                .map(|(label, r)| {
                    serde_json::json!({ "cell": label, "report": r })
                })
                .collect();
            std::fs::write(
                out_dir.join("verify_3_1.json"),
                serde_json::to_string_pretty(&json)?,
            )?;
            if failures > 0 {
                return Err(FrogError::Numeric(format!(
                    "{failures} of {} grid cells violate the disparity bound",
                    reports.len()
                )));
            }
            println!("all {} cells satisfied", reports.len());
        }
        "5.1" => {
            let forget = [(0usize, 1usize)];
            let mut reports = Vec::with_capacity(args.instances);
            let mut failures = 0usize;
            for i in 0..args.instances {
                let inst = random_masked_instance(9000 + i as u64);
                let r = check_theorem_5_1((0, 1), &forget, &inst)?;
                failures += usize::from(!r.satisfied);
                reports.push(r);
            }
            std::fs::write(
                out_dir.join("verify_5_1.json"),
                serde_json::to_string_pretty(&reports)?,
            )?;
            if failures > 0 {
                return Err(FrogError::Numeric(format!(
                    "{failures} of {} instances violate the deviation bound",
                    args.instances
                )));
            }
            println!("all {} instances satisfied", args.instances);
        }
        other => {
            return Err(FrogError::Config(format!(
                "unknown theorem '{other}'; expected 3.1 or 5.1"
            )))
        }
    }
    println!("reports written to {}", out_dir.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let bundle = generate_synthetic(&cfg.synthetic_spec())?;
    let dir: PathBuf = match &args.out_dir {
        Some(d) => d.into(),
        None => cfg.out_root().join(&cfg.dataset_name),
    };
    save_dataset(&dir, &bundle)?;
    println!(
        "wrote {} nodes / {} edges to {}",
        bundle.graph.num_nodes(),
        bundle.graph.num_edges(),
        dir.display()
    );
    Ok(())
}
