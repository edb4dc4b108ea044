//! `kgatax <command>`: prepare, train, eval, recommend, gradcheck,
//! gridsearch, and synth for generating the synthetic dataset.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use kgatax_core::checks::{gradcheck_suite, DEFAULT_STEP, DEFAULT_TOLERANCE};
use kgatax_core::eval::Split;

use crate::dataset::{DataBundle, GraphStats};
use crate::error::{exit, AppError, Result};
use crate::grid::{grid_csv, run_grid};
use crate::parallel::evaluate_parallel;
use crate::persist::load_model;
use crate::pipeline::train_any;
use crate::report::{self, EpochRow};
use crate::run_config::{parse_override, RunConfig};
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "kgatax", version, about = "Knowledge-graph attentive recommender with auxiliary fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key=value config file ('#' comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model file (default: <out>/model.kgax).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated K values; `recommend` uses the first.
    #[arg(long, global = true)]
    pub k: Option<String>,
    /// Raw user id for `recommend`.
    #[arg(long, global = true)]
    pub user: Option<String>,
    #[arg(long, global = true)]
    pub max_cells: Option<usize>,
    /// Extra key=value overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Build and validate the collaborative graph, print its size.
    Prepare,
    /// Train and write model.kgax and epochs.csv.
    Train,
    /// Evaluate a saved model on the test split; write eval.csv and eval.json.
    Eval,
    /// Print the top-K unseen items for --user as TSV.
    Recommend,
    /// Finite-difference gradient checks on a built-in fixture.
    Gradcheck,
    /// Sweep grid.* axes; write grid.csv.
    Gridsearch,
    /// Write the synthetic attribute dataset into --out.
    Synth,
}

impl Cli {
    /// File < --set < dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let mut overrides = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<Vec<_>>>()?;
        let path = |p: &Path| p.to_string_lossy().into_owned();
        let flags = [
            ("data_dir", self.data_dir.as_deref().map(path)),
            ("out", self.out.as_deref().map(path)),
            ("model", self.model.as_deref().map(path)),
            ("seed", self.seed.map(|s| s.to_string())),
            ("k", self.k.clone()),
            ("max_cells", self.max_cells.map(|m| m.to_string())),
        ];
        overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_owned(), v))));
        RunConfig::parse(text.as_deref(), &overrides)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(AppError::io(format!("creating {}", dir.display())))
}

fn prepare(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let bundle = DataBundle::load(rc.data_dir()?, rc.model.seed)?;
    let g = bundle.graph(&rc.model)?;
    for (k, v) in GraphStats::of(&bundle, &g).lines() {
        let _ = writeln!(out, "{k}\t{v}");
    }
    Ok(())
}

fn train(rc: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let bundle = DataBundle::load(rc.data_dir()?, rc.model.seed)?;
    ensure_dir(&rc.out)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let result = train_any(&bundle, &rc.model, &mut |log| {
        let row = EpochRow {
            log: *log,
            elapsed_ms: start.elapsed().as_millis(),
        };
        let _ = writeln!(
            err,
            "epoch {:>3}  rec {:.5}  kg {:.5}  val_recall@20 {:.4}  {} ms",
            log.epoch, log.rec_loss, log.kg_loss, log.val_recall, row.elapsed_ms
        );
        rows.push(row);
    });
    report::write_text(&rc.out.join(report::EPOCHS_FILE), &report::epochs_csv(&rc.model, &rows))?;
    let (model, logs) = result?;
    let path = rc.model_file();
    model.save(&path)?;
    let _ = writeln!(out, "trained {} epochs; model written to {}", logs.len(), path.display());
    Ok(())
}

fn eval(rc: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let saved = load_model(&rc.model_file())?;
    let bundle = DataBundle::load(rc.data_dir()?, saved.config.seed)?;
    let model = saved.into_trained(&bundle)?;
    let start = Instant::now();
    let rep = evaluate_parallel(&model, &bundle.data, Split::Test, &rc.ks, rc.eval_threads)?;
    let _ = writeln!(err, "evaluated {} users in {} ms", rep.user_count, start.elapsed().as_millis());
    ensure_dir(&rc.out)?;
    let cfg = model.config();
    report::write_text(&rc.out.join(report::EVAL_CSV_FILE), &report::eval_csv(cfg, &rep, &bundle))?;
    report::write_json(&rc.out.join(report::EVAL_JSON_FILE), &report::eval_json(cfg, &rep, "test"))?;
    for (i, k) in rep.ks.iter().enumerate() {
        let _ = writeln!(out, "recall@{k}\t{}\nndcg@{k}\t{}", rep.mean_recall[i], rep.mean_ndcg[i]);
    }
    let _ = writeln!(out, "auc\t{}\nusers\t{}", rep.mean_auc, rep.user_count);
    Ok(())
}

fn recommend(rc: &RunConfig, user: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let user = user.ok_or_else(|| AppError::Config("recommend needs --user".into()))?;
    let saved = load_model(&rc.model_file())?;
    let bundle = DataBundle::load(rc.data_dir()?, saved.config.seed)?;
    let u = bundle
        .user_id(user)
        .ok_or_else(|| AppError::Data(format!("unknown user `{user}`")))?;
    let model = saved.into_trained(&bundle)?;
    for (item, score) in model.recommend_topk(&bundle.data, u, rc.ks[0])? {
        let _ = writeln!(out, "{}\t{score}", bundle.item_name(item));
    }
    Ok(())
}

fn gradcheck(out: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let suite = gradcheck_suite(DEFAULT_STEP, DEFAULT_TOLERANCE)?;
    let mut failed = Vec::new();
    let mut overall: f64 = 0.0;
    for (name, rep) in &suite {
        overall = overall.max(rep.max_rel_err());
        let worst = rep.worst().map_or(String::new(), |w| w.name.clone());
        let _ = writeln!(
            out,
            "{name}\tmax_rel_err={:.3e}\tworst={worst}\t{}",
            rep.max_rel_err(),
            if rep.pass { "pass" } else { "FAIL" }
        );
        if !rep.pass {
            failed.push(name.clone());
        }
    }
    let _ = writeln!(
        out,
        "overall max_rel_err={overall:.3e} tolerance={DEFAULT_TOLERANCE:e} ({} ms)",
        start.elapsed().as_millis()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::GradCheck(failed.join(", ")))
    }
}

fn gridsearch(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let bundle = DataBundle::load(rc.data_dir()?, rc.model.seed)?;
    let axes = rc.grid.effective();
    let result = run_grid(&bundle, &rc.model, &axes, rc.max_cells)?;
    ensure_dir(&rc.out)?;
    report::write_text(&rc.out.join(report::GRID_FILE), &grid_csv(&rc.model, &result))?;
    let _ = writeln!(out, "{} cells written to {}", result.rows.len(), rc.out.join(report::GRID_FILE).display());
    if let Some(b) = result.best {
        let r = &result.rows[b];
        let _ = writeln!(out, "best cell {} val_recall@20={}", r.cell.index, r.val_recall);
    }
    Ok(())
}

fn synth(rc: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let data = generate(&SynthSpec::default(), rc.model.seed);
    data.write_dir(&rc.out)?;
    let _ = writeln!(
        out,
        "wrote {} interactions, {} KG triples, {} aux pairs to {}",
        data.interactions.len(),
        data.kg.len(),
        data.aux.len(),
        rc.out.display()
    );
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let rc = cli.run_config()?;
    match cli.command {
        Command::Prepare => prepare(&rc, out),
        Command::Train => train(&rc, out, err),
        Command::Eval => eval(&rc, out, err),
        Command::Recommend => recommend(&rc, cli.user.as_deref(), out),
        Command::Gradcheck => gradcheck(out),
        Command::Gridsearch => gridsearch(&rc, out),
        Command::Synth => synth(&rc, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_command<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
