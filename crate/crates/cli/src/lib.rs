//! Command implementations behind the `reduxcorr` binary.
//!
//! Every command reads a plain-text `key=value` config (see
//! [`RunConfig`]) and writes CSV reports into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use reduxcorr::annotations::{
    confusion_matrix, label_counts, paired_levels, parse_function_regions, parse_regions,
    regions_to_frames, Confusion, FrameLabels, LabelCounts, ReductionRegion,
};
use reduxcorr::midlevel::{feature_matrix, feature_names, ChannelAnalysis, FeatureTable};
use reduxcorr::models::{
    evaluate, read_model, split_by_holdout, train_knn, train_linear, ConversationRows, Dataset,
    EvalReport, SplitPlan, TrainingMeta, DEFAULT_K, DEFAULT_RIDGE,
};
use reduxcorr::signal_io::{load_recording, Channel, Manifest, ManifestEntry};
use reduxcorr::stats::{
    correlation_table, function_stats, pearson, reduction_distribution, FunctionSource,
    DEFAULT_ALPHA, DEFAULT_COMPARISONS,
};
use reduxcorr::synth::{write_corpus, SynthConfig};
use reduxcorr::util::fmt6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Knn,
}

impl FromStr for ModelKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "knn" => Ok(ModelKind::Knn),
            _ => bail!("model must be linear or knn, got {s:?}"),
        }
    }
}

/// Run settings. Recognized keys:
///
/// | key | default | meaning |
/// |-----|---------|---------|
/// | `manifest` | `manifest.csv` | corpus manifest |
/// | `language` | `en` | tag written into reports and models |
/// | `holdout` | | comma-separated conversation ids kept for evaluation |
/// | `model` | `linear` | `linear` or `knn` |
/// | `k` | 5 | neighbors for `knn` |
/// | `lambda` | 1e-6 | ridge term for `linear` |
/// | `knn_stride` | 1 | keep every n-th training row for `knn` |
/// | `column_mask` | | comma-separated feature columns zeroed before training |
/// | `out` | `out` | output directory (`--out` overrides) |
/// | `features_dir` | `<out>/features` | feature-matrix CSVs |
/// | `labels_dir` | `labels` | first annotator's region files |
/// | `labels_b_dir` | `labels_b` | second annotator's region files |
/// | `functions_dir` | `functions` | function region files |
/// | `global_mean` | from labels | reference mean for function t-tests |
/// | `alpha`, `comparisons` | 0.05, 9 | Bonferroni gate |
/// | `seed`, `sample_rate` | 2024, 16000 | synthetic corpus |
/// | `synth_conversations` | four conversations, 10 min | `ID:seconds,...` |
///
/// Relative paths resolve against the config file's directory; the
/// label directories resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub language: String,
    pub holdout: Vec<String>,
    pub model: ModelKind,
    pub k: usize,
    pub lambda: f64,
    pub knn_stride: usize,
    pub column_mask: Vec<String>,
    pub out: PathBuf,
    pub features_dir: Option<PathBuf>,
    pub labels_dir: PathBuf,
    pub labels_b_dir: PathBuf,
    pub functions_dir: PathBuf,
    pub global_mean: Option<f64>,
    pub alpha: f64,
    pub comparisons: usize,
    pub seed: u64,
    pub sample_rate: u32,
    pub synth_conversations: Option<Vec<(String, f64)>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| kv.remove(key);
        let path = |v: Option<String>, default: &str| base.join(v.unwrap_or_else(|| default.into()));
        fn num<T: FromStr>(v: Option<String>, key: &str, default: T) -> Result<T> {
            match v {
                Some(s) => s.parse().map_err(|_| anyhow!("{key}: cannot parse {s:?}")),
                None => Ok(default),
            }
        }
        let list = |v: Option<String>| -> Vec<String> {
            v.map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default()
        };
        let cfg = RunConfig {
            manifest: path(take("manifest"), "manifest.csv"),
            language: take("language").unwrap_or_else(|| "en".into()),
            holdout: list(take("holdout")),
            model: take("model").as_deref().unwrap_or("linear").parse()?,
            k: num(take("k"), "k", DEFAULT_K)?,
            lambda: num(take("lambda"), "lambda", DEFAULT_RIDGE)?,
            knn_stride: num(take("knn_stride"), "knn_stride", 1usize)?.max(1),
            column_mask: list(take("column_mask")),
            out: path(take("out"), "out"),
            features_dir: take("features_dir").map(|p| base.join(p)),
            labels_dir: PathBuf::from(take("labels_dir").unwrap_or_else(|| "labels".into())),
            labels_b_dir: PathBuf::from(take("labels_b_dir").unwrap_or_else(|| "labels_b".into())),
            functions_dir: PathBuf::from(
                take("functions_dir").unwrap_or_else(|| "functions".into()),
            ),
            global_mean: take("global_mean")
                .map(|s| s.parse().map_err(|_| anyhow!("global_mean: cannot parse {s:?}")))
                .transpose()?,
            alpha: num(take("alpha"), "alpha", DEFAULT_ALPHA)?,
            comparisons: num(take("comparisons"), "comparisons", DEFAULT_COMPARISONS)?,
            seed: num(take("seed"), "seed", 2024u64)?,
            sample_rate: num(take("sample_rate"), "sample_rate", 16000u32)?,
            synth_conversations: take("synth_conversations")
                .map(|s| parse_conversation_list(&s))
                .transpose()?,
        };
        if let Some(k) = kv.keys().next() {
            bail!("unknown config key {k:?}");
        }
        let names = feature_names();
        for c in &cfg.column_mask {
            if !names.contains(c) {
                bail!("column_mask: unknown feature column {c:?}");
            }
        }
        Ok(cfg)
    }

    pub fn features_dir(&self) -> PathBuf {
        self.features_dir.clone().unwrap_or_else(|| self.out.join("features"))
    }

    fn manifest_dir(&self) -> PathBuf {
        self.manifest.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    fn labels_path(&self, dir: &Path, id: &str) -> PathBuf {
        self.manifest_dir().join(dir).join(format!("{id}.csv"))
    }
}

fn parse_conversation_list(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .map(|item| {
            let (id, secs) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("synth_conversations: expected ID:seconds, got {item:?}"))?;
            let secs: f64 = secs
                .parse()
                .map_err(|_| anyhow!("synth_conversations: bad duration {secs:?}"))?;
            Ok((id.to_string(), secs))
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_manifest(cfg: &RunConfig) -> Result<Manifest> {
    let m = Manifest::load(&cfg.manifest)?;
    for h in &cfg.holdout {
        if m.get(h).is_none() {
            bail!("holdout conversation {h:?} is not in the manifest");
        }
    }
    Ok(m)
}

pub fn feature_file(dir: &Path, id: &str, channel: Channel) -> PathBuf {
    dir.join(format!("{id}_{channel}.csv"))
}

/// Writes one feature-matrix CSV per conversation and channel, over
/// the manifest's annotated range. Returns the files written.
pub fn cmd_extract(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(cfg)?;
    let dir = cfg.features_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let written: Vec<Result<Vec<PathBuf>>> = manifest
        .entries
        .par_iter()
        .map(|entry| extract_one(entry, &dir))
        .collect();
    let mut files = Vec::new();
    for w in written {
        files.extend(w?);
    }
    Ok(files)
}

fn extract_one(entry: &ManifestEntry, dir: &Path) -> Result<Vec<PathBuf>> {
    let rec = load_recording(&entry.wav_path)?;
    let frames = entry.frame_range();
    let available = rec.clock().frame_count;
    if frames.end > available {
        bail!(
            "{}: annotated range ends at {} ms but the audio has {} frames",
            entry.conversation_id,
            entry.annotated_end_ms,
            available
        );
    }
    Channel::BOTH
        .par_iter()
        .map(|&ch| {
            let analysis = ChannelAnalysis::compute(&rec, ch);
            if analysis.baseline.unreliable {
                eprintln!(
                    "warning: {} {ch}: speaker baseline rests on {} voiced and {} speech frames",
                    entry.conversation_id,
                    analysis.baseline.voiced_frames,
                    analysis.baseline.speech_frames
                );
            }
            let m = feature_matrix(&entry.conversation_id, &analysis, frames.clone())?;
            let path = feature_file(dir, &entry.conversation_id, ch);
            let mut out = create(&path)?;
            m.write_csv(&mut out)?;
            out.flush()?;
            Ok(path)
        })
        .collect()
}

fn read_features(path: &Path) -> Result<FeatureTable> {
    let f = fs::File::open(path).with_context(|| {
        format!("missing feature file {} (run extract first)", path.display())
    })?;
    Ok(FeatureTable::read(BufReader::new(f), &path.display().to_string())?)
}

fn read_labels(path: &Path) -> Result<Vec<ReductionRegion>> {
    if !path.exists() {
        bail!("missing labels {}", path.display());
    }
    Ok(parse_regions(path)?)
}

fn frame_labels(regions: &[ReductionRegion], ch: Channel, table: &FeatureTable) -> FrameLabels {
    let n = table.frames.iter().max().map_or(0, |f| f + 1);
    let exp = regions_to_frames(regions, ch, n);
    for w in &exp.warnings {
        eprintln!("warning: {w}");
    }
    exp.labels
}

/// Labeled feature rows (both channels) of one conversation.
fn labeled_rows(cfg: &RunConfig, id: &str, mask: &[usize]) -> Result<ConversationRows> {
    let regions = read_labels(&cfg.labels_path(&cfg.labels_dir, id))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for ch in Channel::BOTH {
        let table = read_features(&feature_file(&cfg.features_dir(), id, ch))?;
        let fl = frame_labels(&regions, ch, &table);
        for (row, &f) in table.rows.into_iter().zip(&table.frames) {
            if let Some(l) = fl.get(f) {
                let mut row = row;
                for &j in mask {
                    row[j] = 0.0;
                }
                rows.push(row);
                labels.push(l as f64);
            }
        }
    }
    Ok(ConversationRows {
        conversation: id.to_string(),
        rows,
        labels,
    })
}

fn mask_indices(cfg: &RunConfig) -> Vec<usize> {
    let names = feature_names();
    cfg.column_mask
        .iter()
        .filter_map(|c| names.iter().position(|n| n == c))
        .collect()
}

/// Correlation of every feature column with the frame labels, pooled
/// over conversations and channels.
pub fn cmd_correlate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(cfg)?;
    let per_conv: Vec<ConversationRows> = manifest
        .entries
        .par_iter()
        .map(|e| labeled_rows(cfg, &e.conversation_id, &[]))
        .collect::<Result<_>>()?;
    let rows: Vec<&[f64]> = per_conv.iter().flat_map(|c| c.rows.iter().map(Vec::as_slice)).collect();
    let labels: Vec<Option<u8>> = per_conv
        .iter()
        .flat_map(|c| c.labels.iter().map(|&l| Some(l as u8)))
        .collect();
    let table = correlation_table(&cfg.language, &rows, &labels)?;
    let all = cfg.out.join("correlations.csv");
    let strong = cfg.out.join("correlations_strong.csv");
    let mut f = create(&all)?;
    table.write_csv(&mut f, false)?;
    f.flush()?;
    let mut f = create(&strong)?;
    table.write_csv(&mut f, true)?;
    f.flush()?;
    for e in table.undefined() {
        eprintln!("warning: {}_{} has zero variance; correlation undefined", e.kind, e.span);
    }

    let mut counts = LabelCounts::default();
    for e in &manifest.entries {
        let c = label_counts(&read_labels(&cfg.labels_path(&cfg.labels_dir, &e.conversation_id))?);
        for l in 0..4 {
            counts.regions[l] += c.regions[l];
            counts.frames[l] += c.frames[l];
        }
    }
    let lc = cfg.out.join("label_counts.csv");
    let mut f = create(&lc)?;
    writeln!(f, "language,level,regions,frames")?;
    for l in 0..4 {
        writeln!(f, "{},{l},{},{}", cfg.language, counts.regions[l], counts.frames[l])?;
    }
    f.flush()?;
    Ok(vec![all, strong, lc])
}

fn model_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("model.txt")
}

fn load_split(cfg: &RunConfig) -> Result<(reduxcorr::models::Split, Vec<usize>)> {
    let manifest = load_manifest(cfg)?;
    if cfg.holdout.is_empty() {
        bail!("config sets no holdout conversation");
    }
    let mask = mask_indices(cfg);
    let per_conv: Vec<ConversationRows> = manifest
        .entries
        .par_iter()
        .map(|e| labeled_rows(cfg, &e.conversation_id, &mask))
        .collect::<Result<_>>()?;
    Ok((split_by_holdout(per_conv, &cfg.holdout)?, mask))
}

fn strided(data: &Dataset, stride: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    data.rows
        .iter()
        .zip(&data.labels)
        .step_by(stride)
        .map(|(r, l)| (r.clone(), *l))
        .unzip()
}

/// Trains the configured model on all non-holdout conversations and
/// writes `model.txt` and `split.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (split, _) = load_split(cfg)?;
    let meta = TrainingMeta {
        language: cfg.language.clone(),
        conversations: split.train.conversations.clone(),
        rows: split.train.rows.len(),
    };
    let path = model_path(cfg);
    let mut out = create(&path)?;
    match cfg.model {
        ModelKind::Linear => {
            let mut m = train_linear(&split.train.rows, &split.train.labels, cfg.lambda)?;
            m.meta = meta;
            m.write(&mut out)?;
        }
        ModelKind::Knn => {
            let (x, y) = strided(&split.train, cfg.knn_stride);
            let mut m = train_knn(&x, &y, cfg.k)?;
            m.meta = TrainingMeta { rows: x.len(), ..meta };
            m.write(&mut out)?;
        }
    }
    out.flush()?;
    let sp = cfg.out.join("split.csv");
    write_split(&sp, &split.plan, &split.train.checksum())?;
    Ok(vec![path, sp])
}

fn write_split(path: &Path, plan: &SplitPlan, checksum: &str) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "set,conversations,frames,percent")?;
    let total = (plan.train_frames + plan.test_frames) as f64;
    writeln!(
        f,
        "train,{},{},{}",
        plan.train.join(";"),
        plan.train_frames,
        fmt6(100.0 * plan.train_frames as f64 / total)
    )?;
    writeln!(
        f,
        "test,{},{},{}",
        plan.test.join(";"),
        plan.test_frames,
        fmt6(100.0 * plan.test_frames as f64 / total)
    )?;
    writeln!(f, "train_checksum,{checksum},,")?;
    f.flush()?;
    Ok(())
}

/// Scores the trained model on the holdout conversations and writes
/// `evaluation.csv` and `predictions.csv`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(EvalReport, Vec<PathBuf>)> {
    let path = model_path(cfg);
    let f = fs::File::open(&path)
        .with_context(|| format!("missing model {} (run train first)", path.display()))?;
    let model = read_model(BufReader::new(f), &path.display().to_string())?;
    let (split, _) = load_split(cfg)?;
    if model.header.meta.conversations != split.train.conversations {
        bail!(
            "model was trained on {:?} but the config's split trains on {:?}",
            model.header.meta.conversations,
            split.train.conversations
        );
    }
    let predictions = match (&model.linear, model.header.kind.as_str()) {
        (Some(m), _) => m.predict(&split.test.rows)?,
        (None, "knn") => {
            let (x, y) = strided(&split.train, cfg.knn_stride);
            let k = model.header.k.unwrap_or(DEFAULT_K);
            train_knn(&x, &y, k)?.predict(&split.test.rows)?
        }
        _ => bail!("unsupported model kind {:?}", model.header.kind),
    };
    let report = evaluate(&predictions, &split.test.labels, &split.plan.test)?;
    let ev = cfg.out.join("evaluation.csv");
    let mut f = create(&ev)?;
    writeln!(f, "language,model,holdout,n,r")?;
    writeln!(
        f,
        "{},{},{},{},{}",
        cfg.language,
        model.header.kind,
        report.holdout.join(";"),
        report.n,
        report.r.map_or_else(|| "NA".into(), fmt6)
    )?;
    f.flush()?;
    let pr = cfg.out.join("predictions.csv");
    let mut f = create(&pr)?;
    writeln!(f, "prediction,label")?;
    for (p, l) in predictions.iter().zip(&split.test.labels) {
        writeln!(f, "{},{}", fmt6(*p), l)?;
    }
    f.flush()?;
    Ok((report, vec![ev, pr]))
}

/// Region-level agreement between the two annotators, pooled over the
/// manifest. Writes `confusion.csv` and `agreement.csv`.
pub fn cmd_agreement(cfg: &RunConfig) -> Result<(Confusion, Option<f64>, Vec<PathBuf>)> {
    let manifest = load_manifest(cfg)?;
    let mut confusion = Confusion {
        counts: [[0; 4]; 4],
        unpaired_a: 0,
        unpaired_b: 0,
    };
    let mut pair_a = Vec::new();
    let mut pair_b = Vec::new();
    for e in &manifest.entries {
        let a = read_labels(&cfg.labels_path(&cfg.labels_dir, &e.conversation_id))?;
        let b = read_labels(&cfg.labels_path(&cfg.labels_b_dir, &e.conversation_id))?;
        let c = confusion_matrix(&a, &b);
        for (row, add) in confusion.counts.iter_mut().zip(&c.counts) {
            for (x, y) in row.iter_mut().zip(add) {
                *x += y;
            }
        }
        confusion.unpaired_a += c.unpaired_a;
        confusion.unpaired_b += c.unpaired_b;
        // pairs are formed within a conversation, then pooled
        for (la, lb) in paired_levels(&a, &b) {
            pair_a.push(la);
            pair_b.push(lb);
        }
    }
    let x: Vec<f64> = pair_a.iter().map(|&l| l as f64).collect();
    let y: Vec<f64> = pair_b.iter().map(|&l| l as f64).collect();
    let r = match pearson(&x, &y) {
        Ok(r) => Some(r),
        Err(reduxcorr::Error::Undefined(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let cm = cfg.out.join("confusion.csv");
    let mut f = create(&cm)?;
    confusion.write_csv(&mut f)?;
    f.flush()?;
    let ag = cfg.out.join("agreement.csv");
    let mut f = create(&ag)?;
    writeln!(f, "language,pairs,unpaired_a,unpaired_b,r")?;
    writeln!(
        f,
        "{},{},{},{},{}",
        cfg.language,
        pair_a.len(),
        confusion.unpaired_a,
        confusion.unpaired_b,
        r.map_or_else(|| "NA".into(), fmt6)
    )?;
    f.flush()?;
    Ok((confusion, r, vec![cm, ag]))
}

/// Per-tag reduction statistics and the overall label distribution.
/// Writes `function_stats.csv` and `distribution.csv`.
pub fn cmd_functions(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(cfg)?;
    let mut functions = Vec::new();
    let mut labels: Vec<[FrameLabels; 2]> = Vec::new();
    for e in &manifest.entries {
        let regions = read_labels(&cfg.labels_path(&cfg.labels_dir, &e.conversation_id))?;
        let fpath = cfg.labels_path(&cfg.functions_dir, &e.conversation_id);
        let f = if fpath.exists() {
            parse_function_regions(&fpath)?
        } else {
            Vec::new()
        };
        let n = regions
            .iter()
            .map(|r| r.frames().end)
            .chain(f.iter().map(|r| r.frames().end))
            .max()
            .unwrap_or(0)
            .max(e.frame_range().end);
        let per_channel = Channel::BOTH.map(|ch| regions_to_frames(&regions, ch, n).labels);
        functions.push(f);
        labels.push(per_channel);
    }
    let all_labels: Vec<&FrameLabels> = labels.iter().flatten().collect();
    let dist = reduction_distribution(&all_labels)?;
    let global_mean = cfg.global_mean.unwrap_or(dist.mean);
    let sources: Vec<FunctionSource> = functions
        .iter()
        .zip(&labels)
        .map(|(regions, labels)| FunctionSource { regions, labels })
        .collect();
    let stats = function_stats(&sources, global_mean, cfg.alpha, cfg.comparisons)?;
    let fs_path = cfg.out.join("function_stats.csv");
    let mut f = create(&fs_path)?;
    stats.write_csv(&mut f)?;
    f.flush()?;
    let d_path = cfg.out.join("distribution.csv");
    let mut f = create(&d_path)?;
    writeln!(f, "language,frames,mean,sd,pct0,pct1,pct2,pct3")?;
    write!(f, "{},{},{},{}", cfg.language, dist.frames, fmt6(dist.mean), fmt6(dist.sd))?;
    for p in dist.percent {
        write!(f, ",{}", fmt6(p))?;
    }
    writeln!(f)?;
    f.flush()?;
    Ok(vec![fs_path, d_path])
}

/// Writes the synthetic corpus into the output directory together with
/// a `run.conf` that points the other commands at it.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let mut sc = SynthConfig {
        seed: cfg.seed,
        sample_rate: cfg.sample_rate,
        ..SynthConfig::default()
    };
    if let Some(c) = &cfg.synth_conversations {
        sc.conversations = c.clone();
    }
    let corpus = write_corpus(&cfg.out, &sc)?;
    let conf = cfg.out.join("run.conf");
    let mut f = create(&conf)?;
    writeln!(f, "manifest=manifest.csv")?;
    writeln!(f, "language=syn")?;
    writeln!(f, "holdout={}", corpus.holdout)?;
    writeln!(f, "model=linear")?;
    writeln!(f, "out=run")?;
    f.flush()?;
    Ok(conf)
}
