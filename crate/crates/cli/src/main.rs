use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use omniact_core::evaluator::compare_reports;
use omniact_core::export::{to_jsonl as examples_to_jsonl, LegacyTask};
use omniact_core::prompt::{select_fewshots_actions, select_fewshots_target};
use omniact_core::{
    ablation_grid, build_action_prompt, build_backend, build_cot_generation_prompt, build_target_prompt,
    compute_stats, eval_actions, eval_target, export_finetune_chat, export_finetune_legacy, generate_cots,
    generate_synthetic, load_corpus, save_corpus, Backend, BackendConfig, ContextVariant, DiaryEntry, EvalConfig,
    EvalReport, FewShotStore, Level, MockBackend, ModalityFilter, SynthConfig, Technique,
};
use omniact_service::{promotable_entries, read_log, ServiceConfig};

#[derive(Parser)]
#[command(name = "omniact", version, about = "Context-aware follow-up action prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, summarize or synthesize diary corpora.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Inspect assembled prompts and exemplar selection.
    #[command(subcommand)]
    Prompt(PromptCmd),
    /// Manage exemplar stores.
    #[command(subcommand)]
    Fewshots(FewshotsCmd),
    /// Generate reasoning text from participants' goal/reason.
    #[command(subcommand)]
    Cot(CotCmd),
    /// Write fine-tuning datasets.
    #[command(subcommand)]
    Export(ExportCmd),
    /// Run evaluations.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    Validate { path: PathBuf },
    Stats {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 382)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PromptKind {
    Action,
    Target,
    Cot,
}

#[derive(Subcommand)]
enum PromptCmd {
    Show {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        entry: String,
        #[arg(long, value_enum, default_value = "action")]
        kind: PromptKind,
        #[arg(long, default_value = "specific")]
        level: Level,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "full")]
        context: ContextVariant,
        /// Exemplar pool; exemplars are selected from it. Omit for zero-shot.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    Fewshots {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        target: bool,
    },
}

#[derive(Subcommand)]
enum FewshotsCmd {
    /// Append exemplars learned from the service's feedback log.
    Promote {
        #[arg(long)]
        log: PathBuf,
        /// Existing exemplar file to extend.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CotCmd {
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        backend: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Chat,
    Legacy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportTask {
    Action,
    Target,
}

#[derive(Subcommand)]
enum ExportCmd {
    Finetune {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long, default_value = "specific")]
        level: Level,
        /// Legacy format only.
        #[arg(long, value_enum, default_value = "action")]
        task: ExportTask,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "icl")]
    technique: Technique,
    #[arg(long, default_value = "specific")]
    level: Level,
    #[arg(long, default_value_t = 3)]
    top_n: usize,
    #[arg(long, default_value = "full")]
    context: ContextVariant,
    #[arg(long, default_value = "all")]
    filter: ModalityFilter,
    #[arg(long)]
    corpus: PathBuf,
    /// Backend config (TOML or JSON). Optional for the dominant and oracle
    /// techniques.
    #[arg(long)]
    backend: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.75)]
    ratio: f64,
    #[arg(long)]
    stratified: bool,
    /// Test on everything except the selected exemplars.
    #[arg(long)]
    holdout_fewshots_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Confusion matrix as CSV (action evaluations only).
    #[arg(long)]
    confusion_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    Actions(EvalArgs),
    Ablation(EvalArgs),
    Target(EvalArgs),
    /// Compare two saved reports.
    Compare { base: PathBuf, other: PathBuf },
}

fn load(path: &Path) -> Result<Vec<DiaryEntry>> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn backend_from(path: &Path) -> Result<Arc<dyn Backend>> {
    let config = BackendConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(build_backend(&config, base)?)
}

fn corpus_cmd(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Validate { path } => {
            let corpus = load(&path)?;
            let labeled = corpus.iter().filter(|e| e.labels.is_some()).count();
            println!("ok: {} entries ({labeled} labeled)", corpus.len());
        }
        CorpusCmd::Stats { path, json } => {
            let stats = compute_stats(&load(&path)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("entries {}", stats.entries);
                println!("visual {} | audio-only {}", stats.visual_entries, stats.audio_only_entries);
                println!("actions per entry {:?}", stats.action_count_histogram);
                println!("targets");
                for (t, c) in &stats.target_counts {
                    println!("  {t:<8} {c}");
                }
                println!("general actions");
                for (g, c) in &stats.general_counts {
                    println!("  {g:<18} {c}");
                }
                println!("specific actions");
                for (s, c) in &stats.specific_counts {
                    println!("  {s:<18} {c}");
                }
            }
        }
        CorpusCmd::Synth { seed, n, out } => {
            let corpus = generate_synthetic(SynthConfig { seed, n });
            save_corpus(&out, &corpus)?;
            println!("wrote {} entries to {}", corpus.len(), out.display());
        }
    }
    Ok(())
}

fn prompt_cmd(cmd: PromptCmd) -> Result<()> {
    match cmd {
        PromptCmd::Show { corpus, entry, kind, level, n, context, pool } => {
            let corpus = load(&corpus)?;
            let e = corpus.iter().find(|e| e.id == entry).with_context(|| format!("no entry {entry:?}"))?;
            let pool = pool.map(|p| load(&p)).transpose()?;
            let bundle = match kind {
                PromptKind::Action => {
                    let store = pool.map(|p| select_fewshots_actions(&p).store);
                    build_action_prompt(e, level, n, store.as_ref(), context)?
                }
                PromptKind::Target => {
                    let store = pool.map(|p| select_fewshots_target(&p)).transpose()?;
                    build_target_prompt(e, e.kind(), store.as_ref())?
                }
                PromptKind::Cot => build_cot_generation_prompt(e)?,
            };
            print!("{}", bundle.render());
        }
        PromptCmd::Fewshots { pool, target } => {
            let pool = load(&pool)?;
            if target {
                let store = select_fewshots_target(&pool)?;
                for e in &store.entries {
                    println!("{}  {}", e.id, e.labels.as_ref().expect("selected entries are labeled").target);
                }
            } else {
                let sel = select_fewshots_actions(&pool);
                for e in &sel.store.entries {
                    let names: Vec<&str> = e
                        .labels
                        .as_ref()
                        .expect("selected entries are labeled")
                        .specific_actions
                        .iter()
                        .map(|s| s.canonical_name())
                        .collect();
                    println!("{}  {}", e.id, names.join(", "));
                }
                println!("{} exemplars", sel.store.entries.len());
                if sel.uncovered.is_empty() {
                    println!("all actions covered");
                } else {
                    let names: Vec<&str> = sel.uncovered.iter().map(|s| s.canonical_name()).collect();
                    println!("warning: uncovered actions: {}", names.join(", "));
                }
            }
        }
    }
    Ok(())
}

fn fewshots_cmd(cmd: FewshotsCmd) -> Result<()> {
    let FewshotsCmd::Promote { log, store, out } = cmd;
    let rows = read_log(&log).with_context(|| format!("reading {}", log.display()))?;
    let (entries, skipped) = promotable_entries(&rows);
    for s in &skipped {
        eprintln!("skipped {s}");
    }
    let base = match store {
        Some(p) => FewShotStore::fixed(load(&p)?),
        None => FewShotStore::fixed(Vec::new()),
    };
    let before = base.entries.len();
    let promoted = base.promote(entries);
    save_corpus(&out, &promoted.entries)?;
    println!(
        "promoted {} exemplars ({} total) to {}",
        promoted.entries.len() - before,
        promoted.entries.len(),
        out.display()
    );
    Ok(())
}

fn cot_cmd(cmd: CotCmd) -> Result<()> {
    let CotCmd::Generate { corpus, backend, out, overwrite } = cmd;
    let corpus = load(&corpus)?;
    let backend = backend_from(&backend)?;
    let (filled, failures) = generate_cots(&corpus, backend.as_ref(), overwrite);
    for f in &failures {
        eprintln!("{}: {}", f.id, f.reason);
    }
    save_corpus(&out, &filled)?;
    println!("wrote {} entries, {} failures, to {}", filled.len(), failures.len(), out.display());
    if !failures.is_empty() {
        bail!("{} entries have no reasoning text", failures.len());
    }
    Ok(())
}

fn export_cmd(cmd: ExportCmd) -> Result<()> {
    let ExportCmd::Finetune { corpus, format, level, task, out } = cmd;
    let corpus = load(&corpus)?;
    let (text, count) = match format {
        ExportFormat::Chat => {
            let ex = export_finetune_chat(&corpus, level)?;
            (examples_to_jsonl(&ex), ex.len())
        }
        ExportFormat::Legacy => {
            let task = match task {
                ExportTask::Action => LegacyTask::Action(level),
                ExportTask::Target => LegacyTask::Target,
            };
            let ex = export_finetune_legacy(&corpus, task)?;
            (examples_to_jsonl(&ex), ex.len())
        }
    };
    write(&out, &text)?;
    println!("wrote {count} examples to {}", out.display());
    Ok(())
}

fn run_eval(which: &str, args: EvalArgs) -> Result<()> {
    let corpus = load(&args.corpus)?;
    let config = EvalConfig {
        technique: args.technique,
        level: args.level,
        top_n: args.top_n,
        context_variant: args.context,
        modality_filter: args.filter,
        split_seed: args.seed,
        split_ratio: args.ratio,
        stratified: args.stratified,
        holdout_fewshots_only: args.holdout_fewshots_only,
    };
    let backend: Arc<dyn Backend> = match (&args.backend, args.technique) {
        (Some(p), _) => backend_from(p)?,
        (None, Technique::Oracle) => Arc::new(MockBackend::oracle(&corpus)?),
        (None, Technique::Dominant) => Arc::new(MockBackend::empty_rules()),
        (None, t) => bail!("technique {t:?} needs --backend"),
    };
    let report: EvalReport = match which {
        "actions" => eval_actions(&config, &corpus, backend.as_ref())?,
        "ablation" => ablation_grid(&config, &corpus, backend.as_ref())?,
        _ => eval_target(&config, &corpus, backend.as_ref())?,
    };
    print!("{}", report.render_text());
    if let Some(out) = &args.out {
        write(out, &report.to_json())?;
    }
    if let Some(csv) = &args.confusion_csv {
        let matrix = report.confusion.as_ref().context("this report has no confusion matrix")?;
        write(csv, &matrix.to_csv())?;
    }
    Ok(())
}

fn eval_cmd(cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Actions(a) => run_eval("actions", a),
        EvalCmd::Ablation(a) => run_eval("ablation", a),
        EvalCmd::Target(a) => run_eval("target", a),
        EvalCmd::Compare { base, other } => {
            let read = |p: &Path| -> Result<EvalReport> {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(serde_json::from_str(&text)?)
            };
            print!("{}", compare_reports(&read(&base)?, &read(&other)?));
            Ok(())
        }
    }
}

fn serve_cmd(config: Option<PathBuf>, host: &str, port: u16) -> Result<()> {
    let config = match config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid host")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(omniact_service::serve(&config, addr))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Corpus(c) => corpus_cmd(c),
        Command::Prompt(c) => prompt_cmd(c),
        Command::Fewshots(c) => fewshots_cmd(c),
        Command::Cot(c) => cot_cmd(c),
        Command::Export(c) => export_cmd(c),
        Command::Eval(c) => eval_cmd(c),
        Command::Serve { config, port, host } => serve_cmd(config, &host, port),
    }
}
