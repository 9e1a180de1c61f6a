use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::predict::{predict_sequence, Timeline};
use super::report::{score_fold, EvalReport, FoldResult};
use crate::datapipe::FrameSequence;
use crate::error::{Error, Result};
use crate::network::Network;

/// One leave-one-subject-out split, as indices into the dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub subject: u32,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per distinct subject id, in increasing id order.
pub fn loso_folds(dataset: &[FrameSequence]) -> Result<Vec<Fold>> {
    let subjects: BTreeSet<u32> = dataset.iter().map(|s| s.subject_id).collect();
    if subjects.len() < 2 {
        return Err(Error::config(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    Ok(subjects
        .into_iter()
        .map(|subject| {
            let (test, train) = (0..dataset.len()).partition(|&i| dataset[i].subject_id == subject);
            Fold { subject, train, test }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct LosoOptions {
    /// Folds run concurrently, each with its own network.
    pub threads: usize,
    pub clamp: bool,
}

impl Default for LosoOptions {
    fn default() -> Self {
        LosoOptions { threads: 1, clamp: true }
    }
}

/// Predicts `seqs` and scores them as one group.
pub fn evaluate_group(
    net: &Network<f32>,
    dataset: &[FrameSequence],
    subject: u32,
    test: &[usize],
    train_subjects: Vec<u32>,
    clamp: bool,
) -> Result<(FoldResult, Vec<Timeline>, Duration)> {
    let start = Instant::now();
    let timelines = test
        .iter()
        .map(|&i| predict_sequence(net, &dataset[i], clamp))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed();
    let fold = score_fold(subject, test.to_vec(), train_subjects, &timelines)?;
    Ok((fold, timelines, elapsed))
}

fn frames_per_second(frames: usize, elapsed: Duration) -> f64 {
    frames as f64 / elapsed.as_secs_f64().max(1e-9)
}

/// Scores one already-trained network per subject group; the fold structure
/// matches [`loso_crossval`] without any training.
pub fn evaluate_by_subject(
    net: &Network<f32>,
    dataset: &[FrameSequence],
    clamp: bool,
) -> Result<(EvalReport, Vec<Timeline>)> {
    let subjects: BTreeSet<u32> = dataset.iter().map(|s| s.subject_id).collect();
    let mut folds = Vec::new();
    let mut timelines = Vec::new();
    let mut elapsed = Duration::ZERO;
    for subject in subjects {
        let test: Vec<usize> = (0..dataset.len()).filter(|&i| dataset[i].subject_id == subject).collect();
        let (fold, t, d) = evaluate_group(net, dataset, subject, &test, Vec::new(), clamp)?;
        folds.push(fold);
        timelines.extend(t);
        elapsed += d;
    }
    let frames = timelines.iter().map(|t| t.rows.len()).sum();
    let report = EvalReport::assemble(folds, &timelines, frames_per_second(frames, elapsed))?;
    Ok((report, timelines))
}

type FoldOutput = (FoldResult, Vec<Timeline>, Duration);

/// Leave-one-subject-out cross-validation. `train_fn` receives the training
/// sequences of a fold and returns the network to test on the held-out
/// subject. Results are merged in subject order regardless of which thread
/// finished first.
pub fn loso_crossval<T>(
    dataset: &[FrameSequence],
    opts: &LosoOptions,
    train_fn: T,
) -> Result<(EvalReport, Vec<Timeline>)>
where
    T: Fn(&[FrameSequence], &Fold) -> Result<Network<f32>> + Sync,
{
    let folds = loso_folds(dataset)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<FoldOutput>>>> = Mutex::new((0..folds.len()).map(|_| None).collect());
    let run = |fold: &Fold| -> Result<FoldOutput> {
        let train: Vec<FrameSequence> = fold.train.iter().map(|&i| dataset[i].clone()).collect();
        let net = train_fn(&train, fold)?;
        let train_subjects: BTreeSet<u32> = train.iter().map(|s| s.subject_id).collect();
        log::info!("fold for subject {} trained, testing", fold.subject);
        evaluate_group(&net, dataset, fold.subject, &fold.test, train_subjects.into_iter().collect(), opts.clamp)
    };
    std::thread::scope(|scope| {
        for _ in 0..opts.threads.clamp(1, folds.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= folds.len() {
                    break;
                }
                let out = run(&folds[k]);
                results.lock().unwrap()[k] = Some(out);
            });
        }
    });
    let mut fold_results = Vec::with_capacity(folds.len());
    let mut timelines = Vec::new();
    let mut elapsed = Duration::ZERO;
    for r in results.into_inner().unwrap() {
        let (fold, t, d) = r.expect("every fold ran")?;
        fold_results.push(fold);
        timelines.extend(t);
        elapsed += d;
    }
    let frames = timelines.iter().map(|t| t.rows.len()).sum();
    let report = EvalReport::assemble(fold_results, &timelines, frames_per_second(frames, elapsed))?;
    Ok((report, timelines))
}
