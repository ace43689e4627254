mod artifacts;
mod config;
mod error;
mod report;
mod stages;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use artifacts::Workspace;
use config::{FamilyChoice, Overrides, PipelineConfig, Tuning};
use error::CliError;
use report::{Checks, DataSummary, ModelReport, Reference, RunReport};

#[derive(Parser)]
#[command(
    name = "shapcausal",
    version,
    about = "Boosted-tree price models, SHAP attributions and causal effect alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML pipeline config; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    model: Option<FamilyChoice>,
    /// Length of each model's importance list.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Feature for the what-if run and the heterogeneity/policy trees.
    #[arg(long, global = true)]
    treatment: Option<String>,
    /// What-if value.
    #[arg(long, global = true)]
    value: Option<String>,
    /// Per-unit treatment cost for the policy tree.
    #[arg(long, global = true)]
    cost: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load, derive, clean and split the data.
    Ingest,
    /// Cross-validated grid search.
    Tune,
    /// Fit the models on the training split.
    Train,
    /// Tree SHAP on the test split and global importance.
    Explain,
    /// Per-feature effects, significance table, heterogeneity and policy trees.
    Causal,
    /// Counterfactual mean prediction on the test split.
    Whatif,
    /// Rank alignment between importance and causal significance.
    Align,
    /// Every stage, then report.json / report.txt.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Tune => "tune",
            Command::Train => "train",
            Command::Explain => "explain",
            Command::Causal => "causal",
            Command::Whatif => "whatif",
            Command::Align => "align",
            Command::All => "all",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        data: cli.data.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
        model: cli.model,
        top_k: cli.top_k,
        treatment: cli.treatment.clone(),
        value: cli.value.clone(),
        cost: cli.cost,
    };
    let command = cli.command;
    let mut out_dir = cli.out.clone();
    let result = PipelineConfig::load(cli.config.as_deref(), &ov).and_then(|cfg| {
        out_dir = Some(cfg.output.dir.clone());
        let mut ws = Workspace::open(&cfg.output.dir)?;
        run(command, &cfg, &mut ws)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = e.record(command.name());
            let line = serde_json::to_string(&record).expect("error record serializes");
            eprintln!("{line}");
            if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
                let _ = std::fs::write(dir.join("error.json"), format!("{line}\n"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command, cfg: &PipelineConfig, ws: &mut Workspace) -> Result<(), CliError> {
    let _ = std::fs::remove_file(ws.path("error.json"));
    match command {
        Command::Ingest => {
            let s = stages::ingest(cfg, ws)?;
            println!(
                "ingest: {} rows -> {} clean, {} train / {} test",
                s.n_raw,
                s.n_clean,
                s.train_rows.len(),
                s.test_rows.len()
            );
        }
        Command::Tune => {
            for f in cfg.families() {
                let r = stages::tune(cfg, ws, f)?;
                println!("tune {}: best #{} mean CV R2 {:.4}", f.as_str(), r.best_index, r.best().mean_r2);
            }
        }
        Command::Train => {
            for f in cfg.families() {
                let m = stages::train(cfg, ws, f)?;
                println!("train {}: test R2 {:.4}", f.as_str(), m.test_r2);
            }
        }
        Command::Explain => {
            for f in cfg.families() {
                let e = stages::explain(ws, f)?;
                let top: Vec<&str> = e.ranking.entries.iter().take(5).map(|(n, _)| n.as_str()).collect();
                println!("explain {}: top {}", f.as_str(), top.join(", "));
            }
        }
        Command::Causal => {
            let c = stages::causal(cfg, ws)?;
            println!(
                "causal: {} contrasts, {} significant features; {} ate {:.2} (p {:.3e})",
                c.significance.effects.len(),
                c.significance.ranking.len(),
                c.heterogeneity.treatment,
                c.heterogeneity.effect.ate,
                c.heterogeneity.effect.p_value
            );
        }
        Command::Whatif => {
            for f in cfg.families() {
                let w = stages::run_whatif(cfg, ws, f)?;
                println!(
                    "whatif {}: {} := {}: {:.2} -> {:.2} ({} rows)",
                    f.as_str(),
                    w.feature,
                    w.value,
                    w.baseline_mean,
                    w.counterfactual_mean,
                    w.n_affected
                );
            }
        }
        Command::Align => {
            for a in stages::align(cfg, ws)? {
                println!("align {}: n = {}, rho = {:.4}", a.family.as_str(), a.result.n, a.result.rho);
            }
        }
        Command::All => run_all(cfg, ws)?,
    }
    Ok(())
}

fn run_all(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<(), CliError> {
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let mut timed = |name: String, t: Instant| {
        let secs = t.elapsed().as_secs_f64();
        eprintln!("[{name}] {secs:.1}s");
        timings.insert(name, secs);
    };

    let t = Instant::now();
    let split = stages::ingest(cfg, ws)?;
    timed("ingest".into(), t);

    let mut per_family = Vec::new();
    for f in cfg.families() {
        let cv = if cfg.model.tuning == Tuning::Grid {
            let t = Instant::now();
            let r = stages::tune(cfg, ws, f)?;
            timed(format!("tune_{}", f.as_str()), t);
            Some(r)
        } else {
            None
        };
        let t = Instant::now();
        let metrics = stages::train(cfg, ws, f)?;
        timed(format!("train_{}", f.as_str()), t);
        let t = Instant::now();
        let explanation = stages::explain(ws, f)?;
        timed(format!("explain_{}", f.as_str()), t);
        let t = Instant::now();
        let whatif = stages::run_whatif(cfg, ws, f)?;
        timed(format!("whatif_{}", f.as_str()), t);
        per_family.push((f, cv, metrics, explanation, whatif));
    }

    let t = Instant::now();
    let causal = stages::causal(cfg, ws)?;
    timed("causal".into(), t);
    let t = Instant::now();
    let alignments = stages::align(cfg, ws)?;
    timed("align".into(), t);

    let models: Vec<ModelReport> = per_family
        .into_iter()
        .zip(alignments)
        .map(|((family, cv, metrics, explanation, whatif), alignment)| ModelReport {
            family,
            cv_best_index: cv.as_ref().map(|c| c.best_index),
            cv_table: cv.map(|c| c.table).unwrap_or_default(),
            metrics,
            shap_base_value: explanation.base_value,
            shap_max_relative_residual: explanation.max_relative_residual,
            importance: explanation.ranking.entries,
            whatif,
            alignment,
        })
        .collect();
    let checks = Checks::compute(&models, &causal.significance, &causal.heterogeneity, &cfg.whatif.feature);
    let report = RunReport {
        config: cfg.clone(),
        data: DataSummary::from(&split),
        models,
        causal: causal.significance,
        heterogeneity: causal.heterogeneity,
        checks,
        reference: Reference::default(),
    };
    let names: Vec<String> = ws.manifest().artifacts.keys().cloned().collect();
    let inputs: Vec<&str> = names.iter().map(String::as_str).collect();
    ws.write("report.json", report.to_json().as_bytes(), &inputs)?;
    ws.write("report.txt", report.render_text().as_bytes(), &["report.json"])?;
    let mut text = serde_json::to_string_pretty(&timings)?;
    text.push('\n');
    std::fs::write(ws.path("timings.json"), text).map_err(|e| CliError::Stage(format!("cannot write timings.json: {e}")))?;
    print!("{}", report.render_text());
    Ok(())
}
