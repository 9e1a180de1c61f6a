use std::time::Instant;

use serde::Serialize;

use super::loso::evaluate_group;
use super::report::pcc_field;
use crate::datapipe::FrameSequence;
use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig};
use crate::tensor::PoolSpec;
use crate::training::{train, TrainConfig};

/// The static baseline: the same stack fed single-frame windows. Pools no
/// longer touch the (now unit) time axis.
pub fn static_config(cfg: &NetworkConfig) -> NetworkConfig {
    NetworkConfig {
        input_h: 1,
        pool_specs: cfg
            .pool_specs
            .iter()
            .map(|p| PoolSpec {
                pool_h: 1,
                stride_h: 1,
                ..*p
            })
            .collect(),
        ..cfg.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelScore {
    pub input_h: usize,
    pub parameter_count: usize,
    pub epochs: usize,
    pub train_seconds: f64,
    pub mse: f64,
    #[serde(serialize_with = "pcc_field")]
    pub pcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub test_subjects: Vec<u32>,
    pub temporal: ModelScore,
    pub static_baseline: ModelScore,
}

impl ComparisonReport {
    /// `(static - temporal) / static`: the fraction of the baseline's error
    /// the temporal model removes.
    pub fn relative_gain(&self) -> f64 {
        (self.static_baseline.mse - self.temporal.mse) / self.static_baseline.mse
    }

    /// `|static - temporal| / max(static, temporal)`.
    pub fn relative_difference(&self) -> f64 {
        let (a, b) = (self.static_baseline.mse, self.temporal.mse);
        (a - b).abs() / a.max(b)
    }
}

fn fit_and_score(
    cfg: NetworkConfig,
    train_set: &[FrameSequence],
    dataset: &[FrameSequence],
    test: &[usize],
    subject: u32,
    tc: &TrainConfig,
    seed: u64,
) -> Result<ModelScore> {
    let input_h = cfg.input_h;
    let mut net = Network::<f32>::new(cfg, seed)?;
    let start = Instant::now();
    let run = train(&mut net, train_set, train_set, tc)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let (fold, _, _) = evaluate_group(&net, dataset, subject, test, Vec::new(), tc.clamp)?;
    Ok(ModelScore {
        input_h,
        parameter_count: net.parameter_count(),
        epochs: run.history.len(),
        train_seconds,
        mse: fold.mse,
        pcc: fold.pcc,
    })
}

/// Trains the temporal model (`cfg.input_h` rows per window) and its
/// single-frame twin on every subject outside `test_subjects` with the same
/// training configuration, seed and budget, then scores both on the held-out
/// subjects. Model selection uses the training sequences only. The two runs
/// execute on separate threads.
pub fn compare_static_baseline(
    dataset: &[FrameSequence],
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    test_subjects: &[u32],
    seed: u64,
) -> Result<ComparisonReport> {
    let (test, train_idx): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| test_subjects.contains(&dataset[i].subject_id));
    if test.is_empty() || train_idx.is_empty() {
        return Err(Error::config(
            "comparison needs sequences both inside and outside the held-out subjects",
        ));
    }
    let train_set: Vec<FrameSequence> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let subject = test_subjects[0];
    let (temporal, baseline) = std::thread::scope(|s| {
        let t = s.spawn(|| fit_and_score(cfg.clone(), &train_set, dataset, &test, subject, tc, seed));
        let b = fit_and_score(static_config(cfg), &train_set, dataset, &test, subject, tc, seed);
        (t.join().expect("temporal run panicked"), b)
    });
    Ok(ComparisonReport {
        test_subjects: test_subjects.to_vec(),
        temporal: temporal?,
        static_baseline: baseline?,
    })
}
