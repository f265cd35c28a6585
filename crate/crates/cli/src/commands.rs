use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use veracity_core::data::{load_checkpoint, load_corpus, save_checkpoint, save_corpus, synthetic, Corpus, SyntheticSpec};
use veracity_core::dump::graph_dump;
use veracity_core::encoders::{populate_cache, CacheOnlyGenerator, IntentCache, PromptSet};
use veracity_core::text::RuleSegmenter;
use veracity_core::training::{format_table, sweep as run_sweep, train_with, SweepParam};
use veracity_core::{evaluate as score, prepare_items, run_ablation, Components, Error, ModelConfig};

use crate::manifest::{self, EncoderSpec, FileDigest, Outputs, RunKind, RunManifest, SweepGrid, CODE_VERSION};
use crate::pipeline::{build_encoder, build_generator, build_recognizer, parse_choice, Runtime};
use crate::{EvaluateArgs, InputArgs, InspectArgs, PrepareArgs, RerunArgs, RunArgs, SplitName, SweepArgs, SynthArgs};

fn load_prompts(path: Option<&Path>) -> Result<PromptSet> {
    let set = match path {
        Some(p) => PromptSet::load(p)?,
        None => PromptSet::four_perspectives(),
    };
    set.validate()?;
    Ok(set)
}

fn encoder_spec(input: &InputArgs) -> EncoderSpec {
    EncoderSpec {
        encoder: input.encoder.clone(),
        endpoint: input.endpoint.clone(),
        api_key_env: input.api_key_env.clone(),
        max_in_flight: input.max_in_flight,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn prepare(a: &PrepareArgs) -> Result<()> {
    let input = &a.input;
    create_dir(&input.out)?;
    let corpus = load_corpus(&input.corpus)?;
    let prompts = load_prompts(input.prompts.as_deref())?;
    let spec = encoder_spec(input);
    let generator = build_generator(&a.generator, &spec)?;
    let cache_path = input.cache_path();
    if let Some(dir) = cache_path.parent() {
        create_dir(dir)?;
    }
    let cache = IntentCache::open(&cache_path)?;
    let added = populate_cache(&corpus.items, &prompts.perspectives, generator.as_ref(), &cache)?;
    log::info!("{added} new intent records in {}", cache_path.display());

    // Remote embeddings are fetched once here so later commands stay offline.
    if parse_choice(&spec.encoder, "offline")?.is_some() {
        let config = ModelConfig {
            dim: a.dim,
            ..ModelConfig::default()
        }
        .with_prompts(&prompts)?;
        let encoder = build_encoder(&spec, a.dim, &cache_path)?;
        let recognizer = build_recognizer(input.entity_dict.as_deref())?;
        let segmenter = RuleSegmenter::default();
        let comps = Components {
            segmenter: &segmenter,
            recognizer: recognizer.as_ref(),
            encoder: encoder.as_ref(),
            generator: &CacheOnlyGenerator,
            cache: &cache,
            prompts: &prompts.perspectives,
        };
        prepare_items(&corpus.items, &comps, &config)?;
    }
    print_json(&json!({
        "items": corpus.len(),
        "perspectives": prompts.len(),
        "new_records": added,
        "cache": cache_path,
    }))
}

fn new_manifest(kind: RunKind, run: &RunArgs) -> Result<RunManifest> {
    let input = &run.input;
    create_dir(&input.out)?;
    let prompts = load_prompts(input.prompts.as_deref())?;
    let mut config = run.model.train_config()?;
    config.model = config.model.with_prompts(&prompts)?;
    config.validate()?;
    let split = run.model.split_spec()?;

    let cache_path = input.cache_path();
    if !cache_path.exists() {
        let corpus = load_corpus(&input.corpus)?;
        return Err(Error::MissingCache {
            missing: corpus.len() * prompts.len(),
        }
        .into());
    }
    let files = match &kind {
        RunKind::Train => vec![manifest::CHECKPOINT, manifest::METRICS, manifest::HISTORY],
        RunKind::Ablate => vec![manifest::ABLATION_JSON, manifest::ABLATION_TABLE],
        RunKind::Sweep(_) => vec![manifest::SWEEP],
    };
    let dir = fs::canonicalize(&input.out)?;
    Ok(RunManifest {
        kind,
        code_version: CODE_VERSION.to_string(),
        seed: config.seed,
        config,
        split,
        encoder: encoder_spec(input),
        corpus: FileDigest::of(&input.corpus)?,
        prompts,
        intent_cache: FileDigest::of(&cache_path)?,
        entity_dict: input.entity_dict.as_deref().map(FileDigest::of).transpose()?,
        outputs: Outputs {
            files: files.into_iter().map(|f| dir.join(f)).collect(),
            dir,
        },
    })
}

fn execute(m: &RunManifest) -> Result<()> {
    let path = m.save()?;
    log::info!("wrote {}", path.display());
    match &m.kind {
        RunKind::Train => run_train(m),
        RunKind::Ablate => run_ablate(m),
        RunKind::Sweep(grid) => run_sweep_grid(m, grid),
    }
}

pub fn train(a: &RunArgs) -> Result<()> {
    execute(&new_manifest(RunKind::Train, a)?)
}

pub fn ablate(a: &RunArgs) -> Result<()> {
    execute(&new_manifest(RunKind::Ablate, a)?)
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    if a.l_grid.is_empty() && a.r_grid.is_empty() {
        bail!("give at least one of --l-grid or --r-grid");
    }
    let grid = SweepGrid {
        fine_l: a.l_grid.clone(),
        pseudo_r: a.r_grid.clone(),
    };
    execute(&new_manifest(RunKind::Sweep(grid), &a.run)?)
}

fn run_train(m: &RunManifest) -> Result<()> {
    let rt = Runtime::new(m)?;
    let s = rt.splits()?;
    let dir = &m.outputs.dir;
    let history_path = dir.join(manifest::HISTORY);
    let mut history = BufWriter::new(File::create(&history_path)?);
    let mut write_err = None;
    let outcome = train_with(&m.config, &s.train, &s.val, |rec| {
        if let Err(e) = serde_json::to_string(rec).map(|line| writeln!(history, "{line}")) {
            write_err.get_or_insert(e.to_string());
        }
    })?;
    history.flush()?;
    if let Some(e) = write_err {
        bail!("writing {}: {e}", history_path.display());
    }
    save_checkpoint(&outcome.params, dir.join(manifest::CHECKPOINT))?;
    let test = if s.test.is_empty() {
        None
    } else {
        Some(score(&outcome.params, &s.test)?.report)
    };
    let metrics = json!({
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.history.len(),
        "sizes": {"train": s.train.len(), "val": s.val.len(), "test": s.test.len()},
        "val": outcome.val,
        "test": test,
    });
    write_json(&dir.join(manifest::METRICS), &metrics)?;
    print_json(&metrics)
}

fn run_ablate(m: &RunManifest) -> Result<()> {
    let rt = Runtime::new(m)?;
    let s = rt.splits()?;
    let rows = run_ablation(&m.config, &s.train, &s.val, &s.test)?;
    let dir = &m.outputs.dir;
    write_json(&dir.join(manifest::ABLATION_JSON), &rows)?;
    let table = format_table(&rows);
    fs::write(dir.join(manifest::ABLATION_TABLE), &table)?;
    print!("{table}");
    Ok(())
}

fn run_sweep_grid(m: &RunManifest, grid: &SweepGrid) -> Result<()> {
    let rt = Runtime::new(m)?;
    let s = rt.splits()?;
    let path = m.outputs.dir.join(manifest::SWEEP);
    let mut out = BufWriter::new(File::create(&path)?);
    for (param, values) in [(SweepParam::FineL, &grid.fine_l), (SweepParam::PseudoR, &grid.pseudo_r)] {
        if values.is_empty() {
            continue;
        }
        for point in run_sweep(&m.config, param, values, &s.train, &s.val, &s.test)? {
            let line = serde_json::to_string(&point)?;
            writeln!(out, "{line}")?;
            println!("{line}");
        }
    }
    out.flush()?;
    Ok(())
}

pub fn rerun(a: &RerunArgs) -> Result<()> {
    let old = RunManifest::locate(&a.manifest)?;
    old.corpus.verify()?;
    if let Some(d) = &old.entity_dict {
        d.verify()?;
    }
    if old.intent_cache.verify().is_err() {
        // The cache is append-only, so growth does not change stored entries.
        log::warn!("intent cache {} has changed since the original run", old.intent_cache.path.display());
    }
    create_dir(&a.out)?;
    let dir = fs::canonicalize(&a.out)?;
    let mut m = old.clone();
    m.code_version = CODE_VERSION.to_string();
    m.outputs = Outputs {
        files: old
            .outputs
            .files
            .iter()
            .filter_map(|f| f.file_name())
            .map(|f| dir.join(f))
            .collect(),
        dir,
    };
    execute(&m)
}

fn split_corpus(rt: &Runtime, m: &RunManifest, which: SplitName) -> Result<Corpus> {
    let s = veracity_core::data::chronological_split(&rt.corpus, &m.split)?;
    Ok(match which {
        SplitName::Train => s.train,
        SplitName::Val => s.val,
        SplitName::Test => s.test,
        SplitName::All => rt.corpus.clone(),
    })
}

fn split_name(which: SplitName) -> &'static str {
    match which {
        SplitName::Train => "train",
        SplitName::Val => "val",
        SplitName::Test => "test",
        SplitName::All => "all",
    }
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let m = RunManifest::locate(&a.run)?;
    let checkpoint = a.checkpoint.clone().unwrap_or_else(|| m.checkpoint());
    let params = load_checkpoint(&checkpoint)?;
    let rt = Runtime::new(&m)?;
    let items = rt.prepare(&split_corpus(&rt, &m, a.split)?)?;
    let eval = score(&params, &items)?;
    let name = split_name(a.split);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| m.outputs.dir.join(format!("eval-{name}.json")));
    let report = json!({
        "checkpoint": checkpoint,
        "split": name,
        "items": items.len(),
        "loss": eval.loss,
        "report": eval.report,
        "predictions": eval.predictions,
    });
    write_json(&out, &report)?;
    print_json(&json!({"split": name, "loss": eval.loss, "report": eval.report}))
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

pub fn inspect_graph(a: &InspectArgs) -> Result<()> {
    let m = RunManifest::locate(&a.run)?;
    let checkpoint = a.checkpoint.clone().unwrap_or_else(|| m.checkpoint());
    let params = load_checkpoint(&checkpoint)?;
    let rt = Runtime::new(&m)?;
    let names: Vec<String> = m.prompts.perspectives.iter().map(|p| p.name.clone()).collect();
    let out_dir = a.out.clone().unwrap_or_else(|| m.outputs.dir.join("graphs"));
    create_dir(&out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for id in &a.items {
        let item = rt.corpus.get(id).ok_or_else(|| Error::UnknownItem(id.clone()))?;
        let one = Corpus::new("inspect", vec![item.clone()])?;
        let prepared = rt.prepare(&one)?.remove(0);
        let dump = graph_dump(&prepared, &params, &names)?;
        let path = out_dir.join(format!("{}.json", file_stem_for(id)));
        write_json(&path, &dump)?;
        written.push(path);
    }
    print_json(&written)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        name: "synthetic".into(),
        n_real: a.n_real,
        n_fake: a.n_fake,
        signal: a.signal,
        seed: a.seed,
    };
    let corpus = synthetic::generate(&spec);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_corpus(&corpus, &a.out)?;
    print_json(&json!({"items": corpus.len(), "out": a.out}))
}
