//! Command-line driver: `rcnn synth | train | eval | gradcheck | compare`.
//!
//! Exit codes: 0 success, 1 runtime failure (divergence, failed check),
//! 2 usage or configuration error (bad flags, bad config, missing or
//! malformed input files).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::datapipe::{
    label_histogram, load_dataset, synth_generate, write_manifest, write_sequence, FrameSequence, LabelModel,
    SynthSpec,
};
use crate::error::{Error, Result};
use crate::evaluation::{compare_static_baseline, evaluate_by_subject, loso_crossval, LosoOptions, Timeline};
use crate::gradcheck::{check_network, GradCheckOptions};
use crate::network::{checkpoint, Network, NetworkConfig};
use crate::training::{train, TrainConfig, CHECKPOINT_FILE};

/// Everything one experiment needs. Unknown keys are rejected; missing keys
/// take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub training: TrainConfig,
    pub manifest: PathBuf,
    /// Seeds the network initialization; `training.seed` drives batch
    /// sampling.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Subjects held out from training: validation for `train`, test set
    /// for `compare`. Empty means validate on the training data.
    pub holdout_subjects: Vec<u32>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::reduced(64, 30, 16, 2, 2),
            training: TrainConfig::default(),
            manifest: PathBuf::from("data/manifest.txt"),
            seed: 42,
            output_dir: PathBuf::from("out"),
            holdout_subjects: Vec::new(),
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid run config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.training.level_weights.validate()
    }
}

#[derive(Parser, Debug)]
#[command(name = "rcnn", version, about = "Recurrent convolutional frame-level regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic blink/closure dataset and its manifest.
    Synth(SynthArgs),
    /// Train a model; writes model.ckpt, history.csv and config.json.
    Train(TrainArgs),
    /// Score a checkpoint per subject, or run leave-one-subject-out training.
    Eval(EvalArgs),
    /// Finite-difference check of every parameter gradient (64-bit).
    Gradcheck(GradcheckArgs),
    /// Temporal model vs single-frame baseline on held-out subjects.
    Compare(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelArg {
    Temporal,
    PerFrame,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for sequence files and manifest.txt.
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 25)]
    subjects: usize,
    #[arg(long, default_value_t = 2)]
    sequences: usize,
    /// Frames per sequence.
    #[arg(long, default_value_t = 200)]
    frames: usize,
    /// Longest blink in frames.
    #[arg(long, default_value_t = 3)]
    blink_max: usize,
    /// Shortest closure in frames.
    #[arg(long, default_value_t = 12)]
    closure_min: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Spread of per-subject base appearance.
    #[arg(long, default_value_t = 0.5)]
    subject_std: f64,
    /// Label of a fully developed closure.
    #[arg(long, default_value_t = 10.0)]
    height: f64,
    #[arg(long, value_enum, default_value = "temporal")]
    labels: LabelArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `training.max_epochs`.
    #[arg(long)]
    epochs: Option<usize>,
    /// Caps fold-level parallelism; overrides `threads`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Checkpoint to score [default: <output_dir>/model.ckpt].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Train and test one model per subject instead of loading a checkpoint.
    #[arg(long, default_value_t = false)]
    loso: bool,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 8)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    maps: usize,
    #[arg(long, default_value_t = 2)]
    rcl_count: usize,
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    #[arg(long, default_value_t = 2)]
    batch: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = crate::gradcheck::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, hide = true)]
    corrupt: Option<String>,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Dimension { .. } | Error::Format { .. } | Error::Json(_) | Error::Io { .. } => 2,
        Error::State(_) | Error::NonFinite(_) | Error::Diverged { .. } | Error::UndefinedCorrelation(_) => 1,
    }
}

/// Runs the CLI on `args` (program name first), writing reports to `out`.
/// Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Train(a) => cmd_train(&a.run, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    run_with(args, &mut std::io::stdout())
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let spec = SynthSpec {
        width: a.width,
        n_subjects: a.subjects,
        sequences_per_subject: a.sequences,
        frames_per_sequence: a.frames,
        blink_max: a.blink_max,
        closure_min: a.closure_min,
        noise_std: a.noise,
        subject_std: a.subject_std,
        label_height: a.height,
        label_model: match a.labels {
            LabelArg::Temporal => LabelModel::Temporal,
            LabelArg::PerFrame => LabelModel::PerFrame,
        },
        seed: a.seed,
    };
    let seqs = synth_generate(&spec)?;
    create_dir(&a.out)?;
    let mut names = Vec::with_capacity(seqs.len());
    let mut per_subject = std::collections::BTreeMap::<u32, usize>::new();
    for s in &seqs {
        let k = per_subject.entry(s.subject_id).or_default();
        *k += 1;
        let name = PathBuf::from(format!("subject{:03}_seq{:02}.rclseq", s.subject_id, k));
        write_sequence(s, a.out.join(&name))?;
        names.push(name);
    }
    write_manifest(a.out.join("manifest.txt"), &names)?;
    emit(out, &format_histogram(&seqs))?;
    Ok(0)
}

/// `level count` lines for every level present.
pub fn format_histogram(seqs: &[FrameSequence]) -> String {
    let mut s = String::from("level frames\n");
    for (level, count) in label_histogram(seqs).iter().enumerate() {
        if *count > 0 {
            let _ = writeln!(s, "{level} {count}");
        }
    }
    s
}

fn resolve(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &a.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.training.max_epochs = e;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn split_holdout(data: Vec<FrameSequence>, holdout: &[u32]) -> (Vec<FrameSequence>, Vec<FrameSequence>) {
    data.into_iter().partition(|s| !holdout.contains(&s.subject_id))
}

fn cmd_train(a: &RunArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let cfg = resolve(a)?;
    emit(out, &format!("{}\n", cfg.to_json()?))?;
    // Inputs are read before anything is written.
    let data = load_dataset(&cfg.manifest)?;
    let (mut train_set, val_set) = split_holdout(data, &cfg.holdout_subjects);
    let val_set = if val_set.is_empty() { train_set.clone() } else { val_set };
    if train_set.is_empty() {
        return Err(Error::config("every subject is held out; nothing to train on"));
    }
    create_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("config.json"), &cfg.to_json()?)?;
    let tc = TrainConfig {
        output_dir: Some(cfg.output_dir.clone()),
        ..cfg.training.clone()
    };
    let mut net = Network::<f32>::new(cfg.network.clone(), cfg.seed)?;
    train_set.shrink_to_fit();
    let run = train(&mut net, &train_set, &val_set, &tc)?;
    emit(
        out,
        &format!(
            "trained {} epochs, best validation MSE {:.4} at epoch {}\n",
            run.history.len(),
            run.best_val_mse,
            run.best_epoch
        ),
    )?;
    Ok(0)
}

fn describe_mismatch(ckpt: &NetworkConfig, cfg: &NetworkConfig) -> String {
    let a = serde_json::to_value(ckpt).unwrap_or_default();
    let b = serde_json::to_value(cfg).unwrap_or_default();
    let mut diffs = Vec::new();
    if let (Some(a), Some(b)) = (a.as_object(), b.as_object()) {
        for (k, va) in a {
            if b.get(k) != Some(va) {
                diffs.push(format!("{k}: checkpoint {va}, config {}", b.get(k).cloned().unwrap_or_default()));
            }
        }
    }
    format!("checkpoint does not match the configured network ({})", diffs.join("; "))
}

fn write_timelines(dir: &Path, timelines: &[Timeline]) -> Result<()> {
    let dir = dir.join("timelines");
    create_dir(&dir)?;
    let mut per_subject = std::collections::BTreeMap::<u32, usize>::new();
    for t in timelines {
        let k = per_subject.entry(t.subject_id).or_default();
        *k += 1;
        t.write_csv(dir.join(format!("subject{:03}_seq{:02}.csv", t.subject_id, k)))?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let cfg = resolve(&a.run)?;
    let data = load_dataset(&cfg.manifest)?;
    let (report, timelines) = if a.loso {
        let opts = LosoOptions {
            threads: cfg.threads,
            clamp: cfg.training.clamp,
        };
        loso_crossval(&data, &opts, |train_set, fold| {
            let mut net = Network::<f32>::new(cfg.network.clone(), cfg.seed)?;
            let tc = TrainConfig {
                output_dir: None,
                ..cfg.training.clone()
            };
            log::info!("fold {}: training on {} sequences", fold.subject, train_set.len());
            train(&mut net, train_set, train_set, &tc)?;
            Ok(net)
        })?
    } else {
        let path = a
            .checkpoint
            .clone()
            .unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE));
        let net = checkpoint::load(&path)?;
        if net.config() != &cfg.network {
            return Err(Error::config(describe_mismatch(net.config(), &cfg.network)));
        }
        evaluate_by_subject(&net, &data, cfg.training.clamp)?
    };
    create_dir(&cfg.output_dir)?;
    report.write_json(cfg.output_dir.join("report.json"))?;
    write_timelines(&cfg.output_dir, &timelines)?;
    emit(out, &format!("{}\n", report.to_json()?))?;
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let config = NetworkConfig::reduced(a.width, a.height, a.maps, a.rcl_count, a.iterations);
    let opts = GradCheckOptions {
        batch: a.batch,
        seed: a.seed,
        threshold: a.threshold,
        corrupt: a.corrupt.clone(),
        ..GradCheckOptions::default()
    };
    let report = check_network(&config, &opts)?;
    let mut text = String::new();
    for t in &report.tensors {
        let verdict = if t.max_rel_error < report.threshold { "ok" } else { "FAIL" };
        let _ = writeln!(text, "{:<16} {:>7} entries  max rel error {:.3e}  {verdict}", t.name, t.entries, t.max_rel_error);
    }
    let passed = report.passed();
    let _ = writeln!(
        text,
        "{}: max relative error {:.3e} (threshold {:.0e})",
        if passed { "PASS" } else { "FAIL" },
        report.max_rel_error(),
        report.threshold
    );
    emit(out, &text)?;
    Ok(if passed { 0 } else { 1 })
}

fn cmd_compare(a: &RunArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let cfg = resolve(a)?;
    let data = load_dataset(&cfg.manifest)?;
    let holdout = if cfg.holdout_subjects.is_empty() {
        // Hold out the last fifth of the subjects (at least one).
        let subjects: Vec<u32> = data.iter().map(|s| s.subject_id).collect::<BTreeSet<_>>().into_iter().collect();
        if subjects.is_empty() {
            return Err(Error::config("empty dataset"));
        }
        subjects[subjects.len() - (subjects.len() / 5).max(1)..].to_vec()
    } else {
        cfg.holdout_subjects.clone()
    };
    let tc = TrainConfig {
        output_dir: None,
        ..cfg.training.clone()
    };
    let report = compare_static_baseline(&data, &cfg.network, &tc, &holdout, cfg.seed)?;
    create_dir(&cfg.output_dir)?;
    let json = serde_json::to_string_pretty(&report)?;
    write_file(&cfg.output_dir.join("compare.json"), &json)?;
    emit(
        out,
        &format!(
            "{json}\ntemporal MSE {:.4}, static MSE {:.4}, relative gain {:.1}%\n",
            report.temporal.mse,
            report.static_baseline.mse,
            100.0 * report.relative_gain()
        ),
    )?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_defaults_and_unknown_keys() {
        let cfg = RunConfig::from_json(r#"{"seed": 5, "training": {"max_epochs": 2}}"#).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.training.max_epochs, 2);
        assert_eq!(cfg.training.batch_size, 64);
        assert_eq!(cfg.network, RunConfig::default().network);
        assert!(RunConfig::from_json(r#"{"sede": 5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"training": {"lr": 0.1}}"#).is_err());
        let echoed = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x")), 2);
        assert_eq!(
            exit_code(&Error::Diverged {
                epoch: 1,
                message: "nan".into(),
                checkpoint: None
            }),
            1
        );
    }
}
