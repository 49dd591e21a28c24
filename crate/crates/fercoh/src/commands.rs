use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fercoh_core::dataset::{
    build_semisupervised_dataset, generate_synthetic_corpus, retain_labels, split_dataset, SemiSupervisedDataset,
    Split, VideoSequence,
};
use fercoh_core::eval::{
    evaluate, export_timeline, occlusion_experiment, peak_frames, summarize, Classifier, EvalOptions, EvalReport,
    OcclusionRow,
};
use fercoh_core::model::ModelPool;
use fercoh_core::train::{grid_cells, grid_search, train, StepLog, StopReason};
use serde_json::{json, Value};

use crate::checkpoint::{load_pool, save_pool};
use crate::config::{RunConfig, Settings, OUT_ROOT_ENV};
use crate::error::{CliError, Result};
use crate::manifest::{load_manifest, write_corpus};
use crate::reports::{self, num, opt, CsvFile};
use crate::svg;

#[derive(Parser, Debug)]
#[command(name = "fercoh", version, about = "Coherence-constrained training of face-part classifier pools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic landmark-face corpus (frames, landmarks, manifest).
    Synth(CommandArgs),
    /// Train a pool on a manifest; writes a checkpoint, logs and a summary.
    Train(CommandArgs),
    /// Train one pool per coherence weight and tabulate the results.
    Grid(CommandArgs),
    /// Evaluate trained runs on their test partitions.
    Eval(CommandArgs),
    /// Face-appearance vs face-shape accuracy with face parts covered.
    Occlude(CommandArgs),
    /// Per-frame predictions of one video under one or more runs.
    Timeline(CommandArgs),
}

#[derive(Args, Debug)]
pub struct CommandArgs {
    /// JSON file with any of the keys below (flag names with `-` as `_`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

impl CommandArgs {
    fn merged(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        Ok(file.overlay(&self.run))
    }
}

/// Runs a command with the output root taken from the environment.
pub fn run(cli: &Cli) -> Result<String> {
    let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from);
    run_with_root(cli, root.as_deref())
}

pub fn run_with_root(cli: &Cli, out_root: Option<&Path>) -> Result<String> {
    let args = match &cli.command {
        Command::Synth(a)
        | Command::Train(a)
        | Command::Grid(a)
        | Command::Eval(a)
        | Command::Occlude(a)
        | Command::Timeline(a) => a,
    };
    let cfg = args.merged()?;
    let settings = Settings::resolve(&cfg, out_root)?;
    fs::create_dir_all(&settings.out).map_err(|e| CliError::io(&settings.out, e))?;
    with_threads(settings.threads, || match &cli.command {
        Command::Synth(_) => cmd_synth(&settings),
        Command::Train(_) => cmd_train(&cfg, &settings),
        Command::Grid(_) => cmd_grid(&settings),
        Command::Eval(_) => cmd_eval(&settings),
        Command::Occlude(_) => cmd_occlude(&settings),
        Command::Timeline(_) => cmd_timeline(&settings),
    })
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads <= 1 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
        .install(f)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    write_text(path, &s)
}

fn cmd_synth(s: &Settings) -> Result<String> {
    let corpus = generate_synthetic_corpus(&s.synthetic)?;
    let manifest = write_corpus(&s.out, &corpus.videos)?;
    let frames: usize = corpus.videos.iter().map(|v| v.len()).sum();
    write_json(
        &s.out.join("synthetic.json"),
        &serde_json::to_value(&s.synthetic).expect("config serializes"),
    )?;
    Ok(format!(
        "wrote {} videos ({frames} frames); manifest {}",
        corpus.videos.len(),
        manifest.display()
    ))
}

/// Corpus, split and labeled partitions of a run.
struct Prepared {
    videos: Vec<VideoSequence>,
    split: Split,
    train: SemiSupervisedDataset,
    validation: SemiSupervisedDataset,
    test: SemiSupervisedDataset,
}

fn prepare(s: &Settings) -> Result<Prepared> {
    let videos = load_manifest(s.manifest()?)?;
    let split = split_dataset(&videos, &s.split)?;
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    let pick = |ix: &[usize]| ix.iter().map(|&i| videos[i].clone()).collect::<Vec<_>>();
    let mut train = build_semisupervised_dataset(&pick(&split.train), &s.semisup)?;
    if s.label_fraction < 1.0 {
        retain_labels(&mut train, s.label_fraction, s.seeds.labels)?;
    }
    let validation = build_semisupervised_dataset(&pick(&split.validation), &s.semisup)?;
    let test = build_semisupervised_dataset(&pick(&split.test), &s.semisup)?;
    if validation.labeled_count() == 0 {
        return Err(CliError::Data("validation partition has no labeled frames".into()));
    }
    Ok(Prepared {
        videos,
        split,
        train,
        validation,
        test,
    })
}

fn counts(p: &Prepared) -> Value {
    let part = |d: &SemiSupervisedDataset| {
        json!({
            "videos": d.sequences.len(),
            "frames": d.frame_count(),
            "labeled_frames": d.labeled_count(),
            "pairs": d.pair_count(),
        })
    };
    json!({
        "videos": p.videos.len(),
        "train": part(&p.train),
        "validation": part(&p.validation),
        "test": part(&p.test),
        "split_warnings": p.split.warnings,
    })
}

fn stop_label(s: &StopReason) -> String {
    match s {
        StopReason::Patience => "patience".into(),
        StopReason::MaxEpochs => "max-epochs".into(),
        StopReason::NonFinite(w) => format!("non-finite: {w}"),
    }
}

/// The configuration a run directory records, with the manifest made
/// absolute and per-invocation paths dropped.
fn run_record(cfg: &RunConfig, s: &Settings) -> Result<RunConfig> {
    let manifest = s.manifest()?;
    let abs = fs::canonicalize(manifest).map_err(|e| CliError::io(manifest, e))?;
    Ok(RunConfig {
        manifest: Some(abs),
        out: None,
        runs: None,
        seed: Some(s.seed),
        ..cfg.clone()
    })
}

fn cmd_train(cfg: &RunConfig, s: &Settings) -> Result<String> {
    let data = prepare(s)?;
    let record = run_record(cfg, s)?;
    let mut pool = ModelPool::new(s.pool)?;
    let mut steps: Vec<StepLog> = Vec::new();
    let mut on_step = |st: &StepLog| {
        if steps.last().is_some_and(|l| l.epoch != st.epoch) {
            eprintln!("epoch {} done, step {}", st.epoch - 1, st.step);
        }
        steps.push(*st);
    };
    let outcome = train(
        &mut pool,
        &data.train.sequences,
        &data.validation.sequences,
        &s.train,
        &mut on_step,
    )?;

    save_pool(&s.out.join("pool.ckpt"), &pool)?;
    reports::write_train_logs(&s.out, &steps, &outcome.log.epochs)?;
    let mut record = serde_json::to_value(&record).expect("config serializes");
    if let Value::Object(m) = &mut record {
        m.retain(|_, v| !v.is_null());
    }
    write_json(&s.out.join("run.json"), &record)?;
    let summary = json!({
        "seed": s.seed,
        "seeds": s.seeds,
        "data": counts(&data),
        "epochs_run": outcome.log.epochs.len(),
        "steps": steps.len(),
        "best_epoch": outcome.best_epoch,
        "best_val_micro": outcome.best_val_micro,
        "best_val_macro": outcome.best_val_macro,
        "stop": stop_label(&outcome.stop),
        "selection": s.train.selection.label(),
        "weights": s.train.weights,
    });
    write_json(&s.out.join("summary.json"), &summary)?;
    if let StopReason::NonFinite(what) = outcome.stop {
        return Err(CliError::Numeric(format!(
            "training stopped on a non-finite value in {what}; last good checkpoint saved in {}",
            s.out.display()
        )));
    }
    Ok(format!(
        "trained {} epochs; best validation micro {} at epoch {}; outputs in {}",
        outcome.log.epochs.len(),
        opt(outcome.best_val_micro),
        outcome.best_epoch.map_or("-".into(), |e| e.to_string()),
        s.out.display()
    ))
}

fn cmd_grid(s: &Settings) -> Result<String> {
    let data = prepare(s)?;
    let cells = grid_cells(s.grid_axis, &s.grid_values);
    let opts = EvalOptions {
        networks: vec![s.train.selection],
        ensemble: false,
    };
    let mut test_scores: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let cells_dir = s.out.join("cells");
    let report = grid_search(
        &s.pool,
        &data.train.sequences,
        &data.validation.sequences,
        &s.train,
        &cells,
        &mut |k, r, pool| {
            eprintln!("cell {k}: {:?}", r.outcome.as_ref().map(|c| c.val_micro));
            let mut scores = (None, None);
            if r.outcome.is_ok() {
                let dir = cells_dir.join(format!("{k:02}"));
                let saved = fs::create_dir_all(&dir)
                    .map_err(|e| CliError::io(&dir, e))
                    .and_then(|_| save_pool(&dir.join("pool.ckpt"), pool));
                if let Err(e) = saved {
                    failures.push(e.to_string());
                }
                match evaluate(pool, &data.test.sequences, &opts) {
                    Ok(rep) => scores = (rep.rows[0].video.micro, rep.rows[0].video.macro_avg),
                    Err(e) => failures.push(format!("cell {k}: {e}")),
                }
            }
            test_scores.push(scores);
        },
    )?;
    if let Some(f) = failures.first() {
        return Err(CliError::Data(f.clone()));
    }

    let mut f = CsvFile::create(
        &s.out.join("grid.csv"),
        &[
            "cell",
            "lambda_t",
            "lambda_c",
            "lambda_r",
            "status",
            "val_micro",
            "val_macro",
            "best_epoch",
            "epochs_run",
            "test_video_micro",
            "test_video_macro",
            "best_by_micro",
            "best_by_macro",
        ],
    )?;
    let mut rows_json = Vec::new();
    for (k, c) in report.cells.iter().enumerate() {
        let w = c.weights;
        let (status, vm, va, be, er) = match &c.outcome {
            Ok(sc) => (
                "ok".to_string(),
                Some(sc.val_micro),
                Some(sc.val_macro),
                sc.best_epoch.to_string(),
                sc.epochs_run.to_string(),
            ),
            Err(e) => (format!("failed: {e}"), None, None, String::new(), String::new()),
        };
        let (tm, ta) = test_scores[k];
        f.row([
            k.to_string(),
            num(w.lambda_t),
            num(w.lambda_c),
            num(w.lambda_r),
            status.clone(),
            opt(vm),
            opt(va),
            be,
            er,
            opt(tm),
            opt(ta),
            (report.best_micro == Some(k)).to_string(),
            (report.best_macro == Some(k)).to_string(),
        ])?;
        rows_json.push(json!({
            "cell": k, "weights": w, "status": status, "val_micro": vm, "val_macro": va,
            "test_video_micro": tm, "test_video_macro": ta,
        }));
    }
    f.finish()?;
    write_json(
        &s.out.join("grid.json"),
        &json!({
            "axis": format!("{:?}", s.grid_axis),
            "selection": s.train.selection.label(),
            "cells": rows_json,
            "best_micro": report.best_micro,
            "best_macro": report.best_macro,
        }),
    )?;
    let groups: Vec<String> = report
        .cells
        .iter()
        .map(|c| {
            let w = c.weights;
            match s.grid_axis {
                fercoh_core::train::GridAxis::Temporal => format!("{:e}", w.lambda_t),
                fercoh_core::train::GridAxis::Part => format!("{:e}", w.lambda_c),
                fercoh_core::train::GridAxis::AppShape => format!("{:e}", w.lambda_r),
                fercoh_core::train::GridAxis::TemporalAndAppShape => {
                    format!("{:e}/{:e}", w.lambda_t, w.lambda_r)
                }
            }
        })
        .collect();
    let values: Vec<Vec<Option<f64>>> = test_scores.iter().map(|(m, a)| vec![*m, *a]).collect();
    let highlight: Vec<usize> = report.best_micro.into_iter().chain(report.best_macro).collect();
    write_text(
        &s.out.join("grid.svg"),
        &svg::bar_chart(
            &format!("{} test video accuracy per grid cell", s.train.selection.label()),
            &groups,
            &["micro", "macro"],
            &values,
            &highlight,
        ),
    )?;
    Ok(format!(
        "{} cells; best by validation micro: {:?}, by macro: {:?}; outputs in {}",
        report.cells.len(),
        report.best_micro,
        report.best_macro,
        s.out.display()
    ))
}

/// A trained run directory: its settings, data and pool.
struct LoadedRun {
    name: String,
    data: Prepared,
    pool: ModelPool,
}

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let cfg = RunConfig::from_file(&dir.join("run.json"))?;
    let s = Settings::resolve(&cfg, None)?;
    let data = prepare(&s)?;
    let pool = load_pool(&dir.join("pool.ckpt"))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(LoadedRun { name, data, pool })
}

fn runs(s: &Settings) -> Result<Vec<LoadedRun>> {
    if s.runs.is_empty() {
        return Err(CliError::Config("at least one run directory is required (--runs)".into()));
    }
    s.runs.iter().map(|d| load_run(d)).collect()
}

fn cmd_eval(s: &Settings) -> Result<String> {
    let loaded = runs(s)?;
    let reports: Vec<EvalReport> = loaded
        .iter()
        .map(|r| evaluate(&r.pool, &r.data.test.sequences, &EvalOptions::default()))
        .collect::<fercoh_core::Result<_>>()?;
    let rows = summarize(&reports)?;
    reports::write_accuracy_tables(&s.out, &rows)?;
    reports::write_per_class_table(&s.out.join("table3.csv"), &rows)?;
    reports::write_face_app_table(&s.out.join("table4.csv"), &rows)?;
    let per_run: Vec<Value> = loaded
        .iter()
        .zip(&reports)
        .map(|(l, r)| {
            json!({
                "run": l.name,
                "labeled_frames": r.labeled_frames,
                "videos": r.videos,
                "rows": r.rows.iter().map(|c| json!({
                    "classifier": c.classifier.label(),
                    "image": c.image,
                    "video": c.video,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let summary: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "classifier": r.classifier.label(),
                "image_micro": r.image_micro, "image_macro": r.image_macro,
                "video_micro": r.video_micro, "video_macro": r.video_macro,
                "image_per_class": r.image_per_class, "video_per_class": r.video_per_class,
            })
        })
        .collect();
    write_json(&s.out.join("eval_summary.json"), &json!({"runs": per_run, "summary": summary}))?;
    Ok(format!(
        "evaluated {} run(s), {} classifier rows; outputs in {}",
        loaded.len(),
        rows.len(),
        s.out.display()
    ))
}

/// Averages per-run occlusion rows that share emotion and part.
fn merge_occlusion(per_run: &[Vec<OcclusionRow>]) -> Vec<OcclusionRow> {
    let mut out: Vec<(OcclusionRow, usize)> = Vec::new();
    for rows in per_run {
        for r in rows {
            match out.iter_mut().find(|(o, _)| o.emotion == r.emotion && o.part == r.part) {
                Some((o, n)) => {
                    o.acc_app += r.acc_app;
                    o.acc_shape += r.acc_shape;
                    o.frames += r.frames;
                    *n += 1;
                }
                None => out.push((*r, 1)),
            }
        }
    }
    out.into_iter()
        .map(|(mut o, n)| {
            o.acc_app /= n as f64;
            o.acc_shape /= n as f64;
            o
        })
        .collect()
}

fn cmd_occlude(s: &Settings) -> Result<String> {
    let loaded = runs(s)?;
    let per_run = loaded
        .iter()
        .map(|r| {
            let peaks = peak_frames(&r.data.test.sequences);
            occlusion_experiment(&r.pool, &peaks, &s.parts, s.occlusion_shape)
        })
        .collect::<fercoh_core::Result<Vec<_>>>()?;
    let rows = merge_occlusion(&per_run);
    reports::write_occlusion_table(&s.out.join("table5.csv"), &rows)?;
    Ok(format!("{} rows; outputs in {}", rows.len(), s.out.display()))
}

fn cmd_timeline(s: &Settings) -> Result<String> {
    let loaded = runs(s)?;
    let first = &loaded[0];
    let all = build_semisupervised_dataset(&first.data.videos, &first.data.train.config)?;
    let id = match &s.video {
        Some(v) => v.clone(),
        None => first
            .data
            .test
            .sequences
            .first()
            .map(|v| v.id.clone())
            .ok_or_else(|| CliError::Data("test partition is empty".into()))?,
    };
    let video = all
        .sequences
        .iter()
        .find(|v| v.id == id)
        .ok_or_else(|| CliError::Data(format!("video {id:?} not in the manifest")))?;
    let configs: Vec<(String, &ModelPool)> = loaded.iter().map(|r| (r.name.clone(), &r.pool)).collect();
    let t = export_timeline(&configs, s.classifier, video)?;

    let mut header = vec!["t".to_string(), "truth".to_string()];
    header.extend(t.tracks.iter().map(|tr| tr.name.clone()));
    let header_refs: Vec<&str> = header.iter().map(|h| h.as_str()).collect();
    let mut f = CsvFile::create(&s.out.join("timeline.csv"), &header_refs)?;
    for i in 0..t.truth.len() {
        let mut row = vec![(i + 1).to_string(), t.truth[i].map_or(String::new(), |e| e.name().to_string())];
        row.extend(t.tracks.iter().map(|tr| tr.decisions[i].name().to_string()));
        f.row(row)?;
    }
    f.finish()?;
    write_text(&s.out.join("timeline.svg"), &svg::timeline_strip(&t))?;
    let flips: Vec<Value> = t
        .tracks
        .iter()
        .map(|tr| json!({"run": tr.name, "flips": tr.flips}))
        .collect();
    write_json(
        &s.out.join("timeline.json"),
        &json!({
            "video": t.video_id,
            "classifier": match s.classifier { Classifier::Ensemble => "avg-all".to_string(), c => c.label() },
            "flips": flips,
        }),
    )?;
    Ok(format!("timeline of {} over {} run(s); outputs in {}", t.video_id, t.tracks.len(), s.out.display()))
}
