use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use serkit::corpus::{
    corpus_stats, load_manifest, save_manifest, scan_corpus, synth_corpus, ClipIndex, CorpusId, CorpusManifest,
    SynthSpec,
};
use serkit::experiments::{
    check_consistency, default_combos, default_pairs, evaluate, extract_features, render_csv, render_markdown,
    run_experiment1, run_experiment2, run_experiment3, train, ExperimentData, ExperimentKind, ExperimentOutput,
    ExperimentResults, RunOptions, TrainedModel, DEFAULT_SEEDS,
};
use serkit::features::{FeatureCache, FeatureStats, MfccConfig};
use serkit::models::{ModelConfig, ModelKind};
use serkit::nn::{load_checkpoint, save_checkpoint};
use serkit::splits::{
    cross_lingual_split, multilingual_split, sentence_split, speaker_split, verify_split, SplitRatios, SplitSpec,
};
use serkit::Error;

use crate::config::{CorpusSource, ExperimentConfigFile};
use crate::{Cli, Command, Failure};

type CmdResult = Result<(), Failure>;

pub fn run(cli: &Cli) -> CmdResult {
    let jobs = if cli.strict { 1 } else { cli.jobs.max(1) };
    match &cli.command {
        Command::Scan { corpus, root, out } => scan(corpus, root, out.as_deref()),
        Command::Features { manifests, cache, mfcc } => features(manifests, cache, mfcc.as_deref(), jobs),
        Command::Synth { out, spec } => synth(out, spec.as_deref(), cli.seed.unwrap_or(DEFAULT_SEEDS[0])),
        Command::Split {
            scenario,
            manifests,
            target,
            out,
        } => split(scenario, manifests, target.as_deref(), out, cli.seed.unwrap_or(DEFAULT_SEEDS[0])),
        Command::Train {
            config,
            split,
            model,
            out,
        } => train_cmd(config, split, model, out, cli.seed, jobs),
        Command::Eval {
            config,
            split,
            checkpoint,
            out,
        } => eval_cmd(config, split, checkpoint, out.as_deref(), jobs),
        Command::Expt { kind, config } => expt(kind, config, cli.seed, jobs),
        Command::Report { results, out } => report(results, out.as_deref()),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::User(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::User(format!("{what} {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn load_source(src: &CorpusSource) -> serkit::Result<CorpusManifest> {
    let m = if src.path.is_dir() {
        scan_corpus(&src.path, &src.id)?
    } else {
        load_manifest(&src.path)?
    };
    if m.corpus != src.id {
        return Err(Error::Config(format!(
            "{} holds corpus {}, configured as {}",
            src.path.display(),
            m.corpus,
            src.id
        )));
    }
    Ok(m)
}

/// Loads the manifests and features for `ids`, failing on any clip that
/// cannot be featurized.
fn load_data(cfg: &ExperimentConfigFile, ids: &[CorpusId], jobs: usize) -> Result<ExperimentData, Failure> {
    let manifests: Vec<CorpusManifest> = ids
        .iter()
        .map(|id| cfg.source(id).and_then(load_source))
        .collect::<serkit::Result<_>>()?;
    let cache = FeatureCache::new(&cfg.cache_dir);
    let (store, report) = extract_features(&manifests, &cfg.mfcc, Some(&cache), jobs)?;
    if !report.failures.is_empty() {
        for (id, why) in &report.failures {
            eprintln!("{id}: {why}");
        }
        return Err(Failure::User(format!("{} clip(s) could not be featurized", report.failures.len())));
    }
    Ok(ExperimentData::new(manifests, store))
}

fn scan(corpus: &str, root: &Path, out: Option<&Path>) -> CmdResult {
    let id: CorpusId = corpus.parse()?;
    let m = scan_corpus(root, &id)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| {
        let slug: String = id
            .to_string()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        PathBuf::from(format!("manifest_{slug}.csv"))
    });
    save_manifest(&m, &out)?;
    println!(
        "{}: {} clips, {} speakers ({} positive, {} negative)",
        id.display_name(),
        m.len(),
        m.speakers().len(),
        m.counts.positive,
        m.counts.negative
    );
    let stats = corpus_stats(&m);
    println!("\n| Duration (s) | Clips |\n|---|---|");
    for (b, n) in &stats.buckets {
        println!("| {b}-{} | {n} |", b + 1);
    }
    println!(
        "\nmean {:.2} s, std {:.2} s (one-second buckets); exact mean {:.3} s, std {:.3} s",
        stats.mean, stats.std, stats.raw_mean, stats.raw_std
    );
    println!("manifest written to {}", out.display());
    Ok(())
}

fn features(manifests: &[PathBuf], cache: &Path, mfcc: Option<&Path>, jobs: usize) -> CmdResult {
    let config: MfccConfig = match mfcc {
        Some(p) => read_json(p, "mfcc config")?,
        None => MfccConfig::default(),
    };
    config.validate()?;
    let ms: Vec<CorpusManifest> = manifests
        .iter()
        .map(|p| load_manifest(p))
        .collect::<serkit::Result<_>>()?;
    let (store, report) = extract_features(&ms, &config, Some(&FeatureCache::new(cache)), jobs)?;
    println!(
        "{} clips: {} computed, {} cached, {} failed (config {})",
        store.len() + report.failures.len(),
        report.computed,
        report.cached,
        report.failures.len(),
        config.fingerprint()
    );
    if report.failures.is_empty() {
        Ok(())
    } else {
        for (id, why) in &report.failures {
            eprintln!("{id}: {why}");
        }
        Err(Failure::User(format!("{} clip(s) could not be featurized", report.failures.len())))
    }
}

/// SHA-256 over sorted relative paths and file contents.
fn tree_hash(root: &Path) -> Result<String, Failure> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for e in fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, &mut files).map_err(|e| Failure::Internal(e.to_string()))?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(fs::read(&f).map_err(|e| Failure::Internal(e.to_string()))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn synth(out: &Path, spec: Option<&Path>, seed: u64) -> CmdResult {
    let spec: SynthSpec = match spec {
        Some(p) => read_json(p, "synth spec")?,
        None => SynthSpec::default(),
    };
    let corpus = synth_corpus(&spec, seed, out)?;
    for m in &corpus.manifests {
        println!(
            "{}: {} clips, {} speakers ({} positive, {} negative)",
            m.corpus,
            m.len(),
            m.speakers().len(),
            m.counts.positive,
            m.counts.negative
        );
    }
    println!("tree sha256 {}", tree_hash(out)?);
    Ok(())
}

fn split(scenario: &str, manifests: &[PathBuf], target: Option<&Path>, out: &Path, seed: u64) -> CmdResult {
    let kind: ExperimentKind = scenario.parse()?;
    let ms: Vec<CorpusManifest> = manifests
        .iter()
        .map(|p| load_manifest(p))
        .collect::<serkit::Result<_>>()?;
    let target = target.map(load_manifest).transpose()?;
    let need_target = || Failure::User(format!("--target is required for {kind}"));
    let one = || -> Result<&CorpusManifest, Failure> {
        match ms.as_slice() {
            [m] => Ok(m),
            _ => Err(Failure::User(format!("{kind} takes exactly one --manifest"))),
        }
    };
    let spec = match kind {
        ExperimentKind::Mono => speaker_split(one()?, SplitRatios::MONOLINGUAL, seed)?,
        ExperimentKind::Sent => sentence_split(one()?, SplitRatios::SENTENCE.test, seed)?,
        ExperimentKind::Cross => cross_lingual_split(one()?, target.as_ref().ok_or_else(need_target)?, seed)?,
        ExperimentKind::Multi => {
            let refs: Vec<&CorpusManifest> = ms.iter().collect();
            multilingual_split(&refs, target.as_ref().ok_or_else(need_target)?, seed)?
        }
    };
    let index = ClipIndex::new(ms.iter().chain(target.as_ref()));
    let report = verify_split(&spec, &index)?;
    spec.save(out)?;
    println!("{report}");
    println!("split written to {}", out.display());
    Ok(())
}

fn split_corpora(split: &SplitSpec) -> Vec<CorpusId> {
    let mut ids = split.source_corpora.clone();
    if !ids.contains(&split.target_corpus) {
        ids.push(split.target_corpus.clone());
    }
    ids
}

fn train_cmd(config: &Path, split_path: &Path, model: &str, out: &Path, seed: Option<u64>, jobs: usize) -> CmdResult {
    let cfg = ExperimentConfigFile::load(config)?;
    let split = SplitSpec::load(split_path)?;
    let data = load_data(&cfg, &split_corpora(&split), jobs)?;
    verify_split(&split, &data.index)?;
    let kind: ModelKind = model.parse()?;
    let model_cfg = kind.build(data.input_layout()?.0, 2)?;
    let seed = seed.unwrap_or(cfg.train.seeds[0]);
    let outcome = train(&model_cfg, &split, &data.index, &data.features, &cfg.train, seed)?;
    let meta = serde_json::json!({
        "model": outcome.model.config,
        "stats": outcome.model.stats,
        "optimizer_steps": outcome.model.optimizer_steps,
        "train": cfg.train,
        "seed": seed,
        "history": outcome.history,
    });
    save_checkpoint(&outcome.model.network, &meta, out)?;
    for h in &outcome.history {
        let val = h.validation_accuracy.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.4}  val acc {val}",
            h.epoch, h.train_loss, h.train_accuracy
        );
    }
    println!("{} optimizer steps; checkpoint written to {}", outcome.model.optimizer_steps, out.display());
    Ok(())
}

fn eval_cmd(config: &Path, split_path: &Path, checkpoint: &Path, out: Option<&Path>, jobs: usize) -> CmdResult {
    let cfg = ExperimentConfigFile::load(config)?;
    let split = SplitSpec::load(split_path)?;
    let (network, meta) = load_checkpoint::<f32>(checkpoint)?;
    let bad_meta = |field: &str| Failure::User(format!("{}: checkpoint meta lacks `{field}`", checkpoint.display()));
    let model_cfg: ModelConfig =
        serde_json::from_value(meta.get("model").cloned().ok_or_else(|| bad_meta("model"))?).map_err(|_| bad_meta("model"))?;
    let stats: FeatureStats =
        serde_json::from_value(meta.get("stats").cloned().ok_or_else(|| bad_meta("stats"))?).map_err(|_| bad_meta("stats"))?;
    let optimizer_steps = meta.get("optimizer_steps").and_then(|v| v.as_u64()).unwrap_or(0);
    let model = TrainedModel {
        config: model_cfg,
        network,
        stats,
        optimizer_steps,
    };
    let data = load_data(&cfg, &split_corpora(&split), jobs)?;
    let ev = evaluate(&model, &split.test, &data.index, &data.features)?;
    let m = &ev.metrics;
    println!("accuracy {:.4}  macro-F1 {:.4}  ({} clips)", m.accuracy, m.macro_f1, m.total());
    println!("confusion (rows true positive/negative, columns predicted): {:?}", m.confusion);
    if let Some(out) = out {
        write(out, serde_json::to_string_pretty(m).expect("metrics serialize") + "\n")?;
    }
    Ok(())
}

fn write_output(dir: &Path, out: &ExperimentOutput) -> CmdResult {
    let kind = out.results.kind;
    write(&dir.join(format!("results_{kind}.json")), out.results.to_json())?;
    write(&dir.join(format!("report_{kind}.md")), render_markdown(&out.results))?;
    for (name, csv) in render_csv(&out.results) {
        write(&dir.join(name), csv)?;
    }
    for (name, spec) in &out.splits {
        write(&dir.join("splits").join(name), spec.to_json())?;
    }
    Ok(())
}

fn expt(kind: &str, config: &Path, seed: Option<u64>, jobs: usize) -> CmdResult {
    let kind: ExperimentKind = kind.parse()?;
    let mut cfg = ExperimentConfigFile::load(config)?;
    if let Some(seed) = seed {
        cfg.train.seeds = vec![seed];
    }
    let opts = RunOptions {
        models: cfg.models.clone(),
        train: cfg.train.clone(),
        jobs,
    };
    let mut out = match kind {
        ExperimentKind::Mono | ExperimentKind::Sent => {
            let corpora = cfg.scenario.corpora.clone().unwrap_or_else(|| cfg.ids());
            let data = load_data(&cfg, &corpora, jobs)?;
            run_experiment1(&data, &corpora, kind == ExperimentKind::Sent, &opts)?
        }
        ExperimentKind::Cross => {
            let pairs = cfg
                .scenario
                .pairs
                .clone()
                .unwrap_or_else(|| default_pairs(&cfg.target(), &cfg.others()));
            let mut ids: Vec<CorpusId> = Vec::new();
            for (a, b) in &pairs {
                for c in [a, b] {
                    if !ids.contains(c) {
                        ids.push(c.clone());
                    }
                }
            }
            let data = load_data(&cfg, &ids, jobs)?;
            run_experiment2(&data, &pairs, &opts)?
        }
        ExperimentKind::Multi => {
            let target = cfg.target();
            let combos = cfg.scenario.combos.clone().unwrap_or_else(|| default_combos(&cfg.others()));
            let mut ids = vec![target.clone()];
            for c in combos.iter().flatten() {
                if !ids.contains(c) {
                    ids.push(c.clone());
                }
            }
            let data = load_data(&cfg, &ids, jobs)?;
            run_experiment3(&data, &combos, &target, &opts)?
        }
    };
    out.results.config = serde_json::to_value(&cfg).expect("config serializes");
    check_consistency(&out.results)?;
    write_output(&cfg.output_dir, &out)?;
    print!("{}", render_markdown(&out.results));
    println!(
        "\n{} runs; results written to {}",
        out.results.runs.len(),
        cfg.output_dir.join(format!("results_{kind}.json")).display()
    );
    Ok(())
}

fn report(results: &Path, out: Option<&Path>) -> CmdResult {
    let res: ExperimentResults = read_json(results, "results")?;
    check_consistency(&res)?;
    let md = render_markdown(&res);
    print!("{md}");
    if let Some(dir) = out {
        write(&dir.join(format!("report_{}.md", res.kind)), &md)?;
        for (name, csv) in render_csv(&res) {
            write(&dir.join(name), csv)?;
        }
    }
    Ok(())
}
