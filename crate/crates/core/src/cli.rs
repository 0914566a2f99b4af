//! The `synet` command line.
//!
//! Every command writes its outputs under `--out`, starting with a
//! `run.json` manifest that is rewritten with artifact hashes at the end.
//! Exit codes: 0 success, 1 runtime failure, 2 usage or schema error,
//! 3 missing input.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::Error;
use crate::eval::{histogram_csv, threshold_grid};
use crate::format::{decode_checkpoint, decode_scene, encode_checkpoint, encode_scene, write_atomic, Checkpoint};
use crate::negatives::{write_manifest, InjectionConfig, LabeledScene};
use crate::pipeline::{
    ablation_csv, evaluate_scores, generate_injected, quality_ablation, ratio_ablation, score_scenes, DataConfig,
    ABLATION_RATIOS,
};
use crate::plot::{plot_csv, PlotKind};
use crate::trainer::{train, Branch, TrainConfig};

pub const SEED_ENV: &str = "SYNET_SEED";
pub const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "synet", version, about = "Synthetic-negative supervision for traversability, at toy scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled scenes, optionally with composed negatives.
    GenData(GenDataArgs),
    /// Train one model and write a checkpoint and loss log.
    Train(TrainArgs),
    /// Score a dataset and write pixel metrics plus score dumps.
    Eval(EvalArgs),
    /// Object-centric FPR over the threshold grid.
    SweepFpr(SweepArgs),
    /// Train across injection ratios and tabulate score overlap.
    AblateRatio(AblateRatioArgs),
    /// Train with HIGH-only and mixed-quality negatives.
    AblateQuality(AblateQualityArgs),
    /// Render a CSV artifact to SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed; falls back to the config file, then SYNET_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file whose fields override the built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Fraction of scenes that receive composed negatives.
    #[arg(long)]
    pub inject: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub branch: Option<Branch>,
    /// Fraction of training scenes that receive synthetic negatives.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Train without the synthetic-negative terms.
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics CSV file name inside `--out`.
    #[arg(long, default_value = "metrics.csv")]
    pub report: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateRatioArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out scenes carrying composed negatives.
    #[arg(long)]
    pub eval_data: PathBuf,
    /// Overrides the default grid 0,0.1,0.2,0.5.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateQualityArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub eval_data: PathBuf,
    /// LOW-quality fractions to compare; HIGH-only and 80% LOW by default.
    #[arg(long, value_delimiter = ',')]
    pub low_fractions: Option<Vec<f64>>,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<String>,
    /// Output file name (relative to `--out`) to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenDataConfig {
    pub scenes: usize,
    pub inject: f64,
    pub data: DataConfig,
    pub injection: InjectionConfig,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            scenes: 200,
            inject: 0.0,
            data: DataConfig::default(),
            injection: InjectionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub train: TrainConfig,
    pub grid: Vec<f64>,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn read_config_file(path: &Option<PathBuf>) -> CliResult<Option<Value>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.clone()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Usage(format!("config file {} must hold a JSON object", path.display())));
    }
    Ok(Some(v))
}

/// Defaults overlaid with the config file.
fn layered<T: Serialize + DeserializeOwned>(defaults: T, file: Option<Value>) -> CliResult<T> {
    let Some(patch) = file else { return Ok(defaults) };
    let mut base = serde_json::to_value(&defaults).map_err(Error::from)?;
    merge(&mut base, patch);
    serde_json::from_value(base).map_err(|e| CliError::Usage(format!("config file: {e}")))
}

fn resolve_seed(flag: Option<u64>, file: Option<&Value>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file.and_then(|v| v.get("seed")).and_then(Value::as_u64) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn resolve_train(flags: &TrainFlags, file: Option<Value>, seed: u64) -> CliResult<TrainConfig> {
    let branch = flags
        .branch
        .or_else(|| file.as_ref().and_then(|v| v.get("branch")).and_then(|b| serde_json::from_value(b.clone()).ok()))
        .unwrap_or(Branch::Pu);
    let mut c = layered(TrainConfig::for_branch(branch), file)?;
    c.branch = branch;
    c.seed = seed;
    if let Some(r) = flags.ratio {
        c.injection_ratio = r;
    }
    if let Some(e) = flags.epochs {
        c.epochs = e;
    }
    if let Some(b) = flags.batch_size {
        c.batch_size = b;
    }
    if let Some(lr) = flags.lr {
        c.learning_rate = lr;
    }
    if flags.baseline {
        c = c.baseline();
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts in memory and writes them atomically once the work succeeded.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    pending: Vec<(String, Vec<u8>)>,
}

impl Run {
    fn start(command: &str, common: &CommonArgs, seed: u64, config: &impl Serialize, inputs: &[&Path]) -> CliResult<Self> {
        fs::create_dir_all(&common.out).map_err(Error::from)?;
        let run = Self {
            dir: common.out.clone(),
            manifest: RunManifest {
                command: command.to_string(),
                seed,
                config: serde_json::to_value(config).map_err(Error::from)?,
                inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
                outputs: BTreeMap::new(),
            },
            pending: Vec::new(),
        };
        run.write_manifest()?;
        Ok(run)
    }

    fn write_manifest(&self) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(Error::from)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(())
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.pending.push((name.into(), bytes.into()));
    }

    fn finish(mut self) -> CliResult<()> {
        for (name, bytes) in &self.pending {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(Error::from)?;
            }
            write_atomic(&path, bytes)?;
            self.manifest.outputs.insert(name.clone(), sha256_hex(bytes));
        }
        self.write_manifest()
    }
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// Scene containers of a directory, in file-name order.
pub fn load_scenes(dir: &Path) -> CliResult<Vec<LabeledScene>> {
    require(dir)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::from)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "synt"))
        .collect();
    if files.is_empty() {
        return Err(CliError::MissingInput(dir.join("*.synt")));
    }
    files.sort();
    files
        .iter()
        .map(|f| Ok(decode_scene(&fs::read(f).map_err(Error::from)?)?))
        .collect()
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    require(path)?;
    Ok(decode_checkpoint(&fs::read(path).map_err(Error::from)?)?)
}

fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    let file = read_config_file(&a.common.config)?;
    let seed = resolve_seed(a.common.seed, file.as_ref())?;
    let mut c = layered(GenDataConfig::default(), file)?;
    if let Some(n) = a.scenes {
        c.scenes = n;
    }
    if let Some(r) = a.inject {
        c.inject = r;
    }
    if c.scenes == 0 || !(0.0..=1.0).contains(&c.inject) {
        return Err(CliError::Usage("need --scenes >= 1 and --inject in [0, 1]".into()));
    }
    let mut run = Run::start("gen-data", &a.common, seed, &c, &[])?;
    let (scenes, records) = generate_injected(c.scenes, seed, &c.data, c.inject, &c.injection)?;
    for (i, s) in scenes.iter().enumerate() {
        run.add(format!("scene_{i:05}.synt"), encode_scene(s)?);
    }
    run.add("manifest.jsonl", write_manifest(&records)?);
    run.finish()
}

fn train_cmd(a: &TrainArgs) -> CliResult<()> {
    let file = read_config_file(&a.common.config)?;
    let seed = resolve_seed(a.common.seed, file.as_ref())?;
    let config = resolve_train(&a.flags, file, seed)?;
    let scenes = load_scenes(&a.data)?;
    let mut run = Run::start("train", &a.common, seed, &config, &[&a.data])?;
    let out = train(&scenes, &config)?;
    run.add("model.ckpt", encode_checkpoint(&Checkpoint { model: out.model, config })?);
    run.add("loss.csv", out.log.to_csv());
    run.add("injection.jsonl", write_manifest(&out.injection)?);
    run.finish()
}

fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let scenes = load_scenes(&a.data)?;
    let seed = ckpt.config.seed;
    let mut run = Run::start("eval", &a.common, seed, &ckpt.config, &[&a.ckpt, &a.data])?;
    let scores = score_scenes(&ckpt.model, &scenes)?;
    let summary = evaluate_scores(&scenes, &scores)?;
    let mut dump = String::from("scene,pixel,score,gt\n");
    for (i, (s, sc)) in scenes.iter().zip(&scores).enumerate() {
        for (p, (v, gt)) in sc.iter().zip(crate::eval::ground_truth(s)).enumerate() {
            dump.push_str(&format!("{i},{p},{v},{}\n", gt as u8));
        }
    }
    run.add(a.report.display().to_string(), summary.metrics.to_csv());
    run.add("scores.csv", dump);
    run.add("histogram.csv", histogram_csv(&summary.density_pos, &summary.density_neg));
    run.finish()
}

fn sweep_cmd(a: &SweepArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let scenes = load_scenes(&a.data)?;
    let mut run = Run::start("sweep-fpr", &a.common, ckpt.config.seed, &ckpt.config, &[&a.ckpt, &a.data])?;
    let scores = score_scenes(&ckpt.model, &scenes)?;
    let summary = evaluate_scores(&scenes, &scores)?;
    debug_assert_eq!(summary.fpr_curve.thresholds, threshold_grid());
    run.add("fpr.csv", summary.fpr_curve.to_csv());
    run.finish()
}

fn ablation_setup(
    data: &Path,
    eval_data: &Path,
    flags: &TrainFlags,
    common: &CommonArgs,
    grid: Option<Vec<f64>>,
    default_grid: &[f64],
) -> CliResult<(Vec<LabeledScene>, Vec<LabeledScene>, AblationConfig)> {
    let file = read_config_file(&common.config)?;
    let seed = resolve_seed(common.seed, file.as_ref())?;
    let train_file = file.as_ref().and_then(|v| v.get("train")).cloned();
    let grid = grid
        .or_else(|| file.as_ref().and_then(|v| v.get("grid")).and_then(|g| serde_json::from_value(g.clone()).ok()))
        .unwrap_or_else(|| default_grid.to_vec());
    if grid.is_empty() || grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(CliError::Usage("ablation grid values must lie in [0, 1]".into()));
    }
    let train = resolve_train(flags, train_file, seed)?;
    let train_set = load_scenes(data)?;
    let eval_set = load_scenes(eval_data)?;
    Ok((train_set, eval_set, AblationConfig { train, grid }))
}

fn ablate_ratio(a: &AblateRatioArgs) -> CliResult<()> {
    let (train_set, eval_set, c) = ablation_setup(&a.data, &a.eval_data, &a.flags, &a.common, a.ratios.clone(), &ABLATION_RATIOS)?;
    let mut run = Run::start("ablate-ratio", &a.common, c.train.seed, &c, &[&a.data, &a.eval_data])?;
    let results = ratio_ablation(&train_set, &eval_set, &c.train, &c.grid)?;
    let points: Vec<_> = results.iter().map(|(p, _)| p.clone()).collect();
    run.add("ablation.csv", ablation_csv(&points));
    for (p, r) in &results {
        run.add(format!("histogram_{}.csv", p.setting), histogram_csv(&r.summary.density_pos, &r.summary.density_neg));
    }
    run.finish()
}

fn ablate_quality(a: &AblateQualityArgs) -> CliResult<()> {
    let (train_set, eval_set, c) = ablation_setup(&a.data, &a.eval_data, &a.flags, &a.common, a.low_fractions.clone(), &[0.0, 0.8])?;
    let mut run = Run::start("ablate-quality", &a.common, c.train.seed, &c, &[&a.data, &a.eval_data])?;
    let results = quality_ablation(&train_set, &eval_set, &c.train, &c.grid)?;
    let points: Vec<_> = results.iter().map(|(p, _)| p.clone()).collect();
    run.add("quality.csv", ablation_csv(&points));
    run.finish()
}

fn plot_cmd(a: &PlotArgs) -> CliResult<()> {
    require(&a.input)?;
    let text = fs::read_to_string(&a.input).map_err(Error::from)?;
    let svg = plot_csv(&text, a.kind).map_err(|e| CliError::Usage(e.to_string()))?;
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let mut run = Run::start("plot", &a.common, 0, &a.kind, &[&a.input])?;
    run.add(format!("{stem}.svg"), svg);
    run.finish()
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::SweepFpr(a) => sweep_cmd(a),
        Command::AblateRatio(a) => ablate_ratio(a),
        Command::AblateQuality(a) => ablate_quality(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
