//! Pipeline stages. Each stage reads its inputs from files, writes its
//! artifacts into the output directory and returns their paths. Failures are
//! wrapped in [`StageError`] carrying the stage name and a digest of the
//! input files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use hemon_core::connectome::{
    build_network as network_from, group_average, group_average_fisher_z, pearson_correlation,
    select_emotion_epochs, ConnectomeError, CorrelationMatrix, EmotionRatings, RoiAtlas, TimeSeriesMatrix,
};
use hemon_core::graphcore::{edgelist, max_spanning_tree, GraphError, Tree};
use hemon_core::hemon::{
    build_dft_variant, build_ea1_variant, dft_sequence, regression_samples, split_samples, train as fit, AnyModel,
    Checkpoint, FnnModel, HemonModel, ModelConfig, ModelError, Sample, TrainOptions,
};
use hemon_core::influence::{audit, audit_csv};
use hemon_core::synth::{generate, SyntheticSpec};
use hemon_core::trunks::{composition_csv, decompose as decompose_tree, TrunkHierarchy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// How a failed stage maps onto the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Data,
    Numeric,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Data => 2,
            Failure::Numeric => 3,
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub digest: String,
    pub kind: Failure,
    source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed (inputs sha256 {})", self.stage, self.digest)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(self.source.as_ref())
    }
}

fn classify(e: &anyhow::Error) -> Failure {
    for cause in e.chain() {
        if let Some(ModelError::NonFiniteLoss { .. }) = cause.downcast_ref::<ModelError>() {
            return Failure::Numeric;
        }
        if let Some(ConnectomeError::ZeroVariance { .. }) = cause.downcast_ref::<ConnectomeError>() {
            return Failure::Numeric;
        }
        if let Some(GraphError::NonFiniteWeight { .. }) = cause.downcast_ref::<GraphError>() {
            return Failure::Numeric;
        }
    }
    Failure::Data
}

/// Hex SHA-256 over the concatenated bytes of `inputs`; unreadable files
/// contribute their path instead.
pub fn digest(inputs: &[&Path]) -> String {
    let mut h = Sha256::new();
    for p in inputs {
        match fs::read(p) {
            Ok(bytes) => h.update(&bytes),
            Err(_) => h.update(format!("missing:{}", p.display()).as_bytes()),
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn stage<T>(name: &'static str, inputs: &[&Path], body: impl FnOnce() -> Result<T>) -> Result<T> {
    body().map_err(|source| {
        anyhow::Error::new(StageError {
            stage: name,
            digest: digest(inputs),
            kind: classify(&source),
            source,
        })
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read `{}`", path.display()))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("cannot create `{}`", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write `{}`", path.display()))?;
    Ok(path)
}

fn load_ts(path: &Path) -> Result<TimeSeriesMatrix> {
    Ok(TimeSeriesMatrix::load(path)?)
}

fn load_ratings(path: &Path, max_rating: f64) -> Result<EmotionRatings> {
    Ok(EmotionRatings::load(path, max_rating)?)
}

fn load_tree(path: &Path) -> Result<Tree> {
    edgelist::parse_tree(&read(path)?).with_context(|| format!("in `{}`", path.display()))
}

pub fn synth(spec: &SyntheticSpec, out: &Path) -> Result<Vec<PathBuf>> {
    stage("synth", &[], || {
        let d = generate(spec)?;
        Ok(vec![
            write(out, "timeseries.csv", &d.time_series.to_csv())?,
            write(out, "ratings.csv", &d.ratings.to_csv())?,
            write(out, "atlas.json", &d.atlas.to_json())?,
            write(out, "planted_tree.txt", &edgelist::write_tree(&d.planted))?,
        ])
    })
}

/// How per-subject correlation matrices become one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    /// Use only the subject at this (0-based) position.
    Subject(usize),
}

impl std::str::FromStr for Aggregate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            _ => s
                .strip_prefix("subject:")
                .and_then(|k| k.parse().ok())
                .map(Aggregate::Subject)
                .ok_or_else(|| format!("expected `mean` or `subject:<k>`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkOptions {
    pub timeseries: Vec<PathBuf>,
    pub ratings: Option<PathBuf>,
    /// Category name or index used for epoch selection.
    pub epoch_category: Option<String>,
    pub epoch_quantile: f64,
    pub aggregate: Aggregate,
    pub fisher_z: bool,
    pub max_rating: f64,
}

pub fn build_network(opts: &NetworkOptions, out: &Path) -> Result<Vec<PathBuf>> {
    let mut inputs: Vec<&Path> = opts.timeseries.iter().map(PathBuf::as_path).collect();
    if let Some(r) = &opts.ratings {
        inputs.push(r);
    }
    stage("build-network", &inputs, || {
        if opts.timeseries.is_empty() {
            bail!("no time-series input given");
        }
        let selection = match (&opts.ratings, &opts.epoch_category) {
            (Some(path), Some(cat)) => {
                let ratings = load_ratings(path, opts.max_rating)?;
                let index = cat
                    .parse::<usize>()
                    .ok()
                    .or_else(|| ratings.categories().iter().position(|c| c == cat))
                    .ok_or_else(|| anyhow!("unknown rating category `{cat}`"))?;
                Some((ratings, index))
            }
            (None, Some(_)) => bail!("epoch selection needs a ratings file"),
            _ => None,
        };
        let chosen: Vec<&PathBuf> = match opts.aggregate {
            Aggregate::Mean => opts.timeseries.iter().collect(),
            Aggregate::Subject(k) => vec![opts
                .timeseries
                .get(k)
                .ok_or_else(|| anyhow!("subject {k} requested but {} given", opts.timeseries.len()))?],
        };
        let mut mats: Vec<CorrelationMatrix> = Vec::with_capacity(chosen.len());
        for path in chosen {
            let mut ts = load_ts(path)?;
            if let Some((ratings, index)) = &selection {
                ts = select_emotion_epochs(&ts, ratings, *index, opts.epoch_quantile)?;
            }
            mats.push(pearson_correlation(&ts).with_context(|| format!("in `{}`", path.display()))?);
        }
        let c = if opts.fisher_z { group_average_fisher_z(&mats)? } else { group_average(&mats)? };
        Ok(vec![write(out, "network.txt", &edgelist::write_graph(&network_from(&c)))?])
    })
}

pub fn extract_tree(network: &Path, abs_weights: bool, out: &Path) -> Result<Vec<PathBuf>> {
    stage("extract-tree", &[network], || {
        let g = edgelist::parse_graph(&read(network)?).with_context(|| format!("in `{}`", network.display()))?;
        let g = if abs_weights { g.with_abs_weights() } else { g };
        let t = max_spanning_tree(&g)?;
        Ok(vec![write(out, "tree.txt", &edgelist::write_tree(&t))?])
    })
}

pub fn decompose(tree: &Path, atlas: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    let mut inputs = vec![tree];
    inputs.extend(atlas);
    stage("decompose", &inputs, || {
        let h = decompose_tree(&load_tree(tree)?);
        let mut written = vec![write(out, "hierarchy.json", &h.to_json())?];
        if let Some(a) = atlas {
            let atlas = RoiAtlas::load(a)?;
            written.push(write(out, "composition.csv", &composition_csv(&h, &atlas)?)?);
        }
        Ok(written)
    })
}

pub fn influence(tree: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    stage("influence", &[tree], || {
        let t = load_tree(tree)?;
        Ok(vec![write(out, "influence.csv", &audit_csv(&audit(&t)))?])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Variant {
    Hemon,
    Ea1,
    Dft,
    Fnn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Hemon, Variant::Ea1, Variant::Dft, Variant::Fnn];

    /// Model label used in artifact names and reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Hemon => "hemon",
            Variant::Ea1 => "hemon-ea1",
            Variant::Dft => "hemon-dft",
            Variant::Fnn => "fnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s || v.to_possible_value().is_some_and(|p| p.get_name() == s))
            .ok_or_else(|| anyhow!("unknown variant `{s}` (expected hemon, ea1, dft or fnn)"))
    }
}

#[derive(Debug, Clone)]
pub struct DataInputs {
    pub timeseries: PathBuf,
    pub ratings: PathBuf,
    pub max_rating: f64,
    pub test_fraction: f64,
    pub val_fraction: f64,
}

struct SplitData {
    train: Vec<Sample>,
    val: Vec<Sample>,
    test: Vec<Sample>,
}

fn split_data(d: &DataInputs, seed: u64) -> Result<SplitData> {
    let ts = load_ts(&d.timeseries)?;
    let ratings = load_ratings(&d.ratings, d.max_rating)?;
    let samples = regression_samples(&ts, &ratings)?;
    let split = split_samples(samples.len(), d.test_fraction, d.val_fraction, seed)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok(SplitData {
        train: pick(&split.train),
        val: pick(&split.val),
        test: pick(&split.test),
    })
}

/// Trains one variant. `config` receives the number of rating categories and
/// returns the model configuration whose seed also drives the split.
pub fn train(
    data: &DataInputs,
    tree: &Path,
    variant: Variant,
    config: impl FnOnce(usize) -> Result<ModelConfig>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    stage("train", &[&data.timeseries, &data.ratings, tree], || {
        let t = load_tree(tree)?;
        let ratings = load_ratings(&data.ratings, data.max_rating)?;
        let cfg = config(ratings.category_count())?;
        let split = split_data(data, cfg.seed)?;
        let rois = split.train.first().map_or(0, |s| s.features.rows());
        if rois != t.node_count() {
            bail!("tree has {} nodes but the time series has {rois} ROIs", t.node_count());
        }
        let (model, report) = if variant == Variant::Fnn {
            let (m, r) = fit(FnnModel::new(cfg, t.node_count())?, &split.train, &split.val, TrainOptions::default())?;
            (AnyModel::Fnn(m), r)
        } else {
            let full = HemonModel::new(cfg, &decompose_tree(&t))?;
            let m = match variant {
                Variant::Ea1 => build_ea1_variant(&full),
                Variant::Dft => build_dft_variant(&full, dft_sequence(&t))?,
                _ => full,
            };
            let (m, r) = fit(m, &split.train, &split.val, TrainOptions::default())?;
            (AnyModel::Hemon(m), r)
        };
        let label = variant.label();
        Ok(vec![
            write(out, &format!("checkpoint_{label}.json"), &model.checkpoint().to_json())?,
            write(out, &format!("train_report_{label}.json"), &serde_json::to_string_pretty(&report)?)?,
            write(out, &format!("metrics_{label}.csv"), &report.metrics_csv())?,
        ])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub split: String,
    pub samples: usize,
    pub mae: f64,
    pub seed: u64,
}

pub fn eval(checkpoint: &Path, data: &DataInputs, all_samples: bool, out: &Path) -> Result<Vec<PathBuf>> {
    stage("eval", &[checkpoint, &data.timeseries, &data.ratings], || {
        let model = Checkpoint::from_json(&read(checkpoint)?)
            .with_context(|| format!("in `{}`", checkpoint.display()))?
            .into_model()?;
        let seed = model.config().seed;
        let split = split_data(data, seed)?;
        let samples: Vec<Sample> = if all_samples {
            split.train.into_iter().chain(split.val).chain(split.test).collect()
        } else {
            split.test
        };
        let record = EvalRecord {
            model: model.label().to_string(),
            split: if all_samples { "all" } else { "test" }.into(),
            samples: samples.len(),
            mae: model.evaluate(&samples)?,
            seed,
        };
        Ok(vec![write(
            out,
            &format!("eval_{}.json", record.model),
            &serde_json::to_string_pretty(&record)?,
        )?])
    })
}

pub fn report(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let hierarchy = dir.join("hierarchy.json");
    stage("report", &[&hierarchy], || {
        let h = if hierarchy.exists() {
            Some(TrunkHierarchy::from_json(&read(&hierarchy)?).with_context(|| format!("in `{}`", hierarchy.display()))?)
        } else {
            None
        };
        let atlas_path = dir.join("atlas.json");
        let atlas = if atlas_path.exists() { Some(RoiAtlas::load(&atlas_path)?) } else { None };
        let mut evals = Vec::new();
        let mut names: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("cannot read `{}`", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("eval_") && n.ends_with(".json"))
            })
            .collect();
        names.sort();
        for p in names {
            let rec: EvalRecord =
                serde_json::from_str(&read(&p)?).with_context(|| format!("schema mismatch in `{}`", p.display()))?;
            evals.push(rec);
        }
        let text = crate::report::render(h.as_ref(), atlas.as_ref(), &evals)?;
        print!("{text}");
        Ok(vec![write(out, "report.txt", &text)?])
    })
}
