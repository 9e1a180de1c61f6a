//! Synthetic blink/closure sequences.
//!
//! Each frame carries a latent "closed" bit. Closed frames add the same
//! template (with per-frame amplitude jitter) whether they belong to a short
//! event (a blink, at most `blink_max` frames) or a long one (a closure, at
//! least `closure_min` frames), so a single frame cannot tell them apart.
//! Under [`LabelModel::Temporal`] blinks are labelled 0 and closures ramp up
//! to `label_height` over their first `closure_min` frames; the label is a
//! function of how long the eye has been closed. [`LabelModel::PerFrame`]
//! labels every closed frame with `label_height`, a control where a single
//! frame suffices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sampler::level_of;
use super::sequence::{FrameSequence, CHANNELS};
use crate::error::{Error, Result};
use crate::network::PSPI_LEVELS;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelModel {
    #[default]
    Temporal,
    PerFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub width: usize,
    pub n_subjects: usize,
    pub sequences_per_subject: usize,
    pub frames_per_sequence: usize,
    /// Longest blink, in frames.
    pub blink_max: usize,
    /// Shortest closure, in frames; must exceed `blink_max`.
    pub closure_min: usize,
    pub noise_std: f64,
    /// Spread of the per-subject base appearance.
    pub subject_std: f64,
    pub label_height: f64,
    pub label_model: LabelModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 64,
            n_subjects: 25,
            sequences_per_subject: 2,
            frames_per_sequence: 200,
            blink_max: 3,
            closure_min: 12,
            noise_std: 0.3,
            subject_std: 0.5,
            label_height: 10.0,
            label_model: LabelModel::Temporal,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Blink,
    Closure,
}

/// A run of closed frames, `start` 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub kind: EventKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct AnnotatedSequence {
    pub sequence: FrameSequence,
    pub events: Vec<Event>,
}

const NUISANCE_BASES: usize = 4;
const NUISANCE_AR: f64 = 0.95;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.n_subjects == 0 || self.sequences_per_subject == 0 {
            return Err(Error::config("width, subject and sequence counts must be >= 1"));
        }
        if self.blink_max == 0 || self.closure_min <= self.blink_max {
            return Err(Error::config(format!(
                "need closure_min > blink_max >= 1 (got {} and {})",
                self.closure_min, self.blink_max
            )));
        }
        if self.frames_per_sequence < 2 * self.closure_min {
            return Err(Error::config(format!(
                "infeasible durations: {} frames per sequence cannot hold a gap and a closure of {} frames",
                self.frames_per_sequence, self.closure_min
            )));
        }
        if !(self.label_height > 0.0 && self.label_height <= 15.0) {
            return Err(Error::config("label height must be in (0, 15]"));
        }
        for (name, v) in [("noise_std", self.noise_std), ("subject_std", self.subject_std)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn label(&self, kind: EventKind, offset: usize) -> f32 {
        let h = self.label_height;
        let v = match (self.label_model, kind) {
            (LabelModel::PerFrame, _) => h,
            (LabelModel::Temporal, EventKind::Blink) => 0.0,
            (LabelModel::Temporal, EventKind::Closure) => {
                let ramp = ((offset + 1) as f64 / self.closure_min as f64).min(1.0);
                (h * ramp).ceil().min(h)
            }
        };
        v as f32
    }

    fn place_events(&self, rng: &mut impl Rng) -> Vec<Event> {
        let d = self.closure_min;
        let mut events = Vec::new();
        let mut t = rng.gen_range(d / 2..=2 * d);
        loop {
            let (kind, len) = if rng.gen_bool(0.5) {
                (EventKind::Blink, rng.gen_range(1..=self.blink_max))
            } else {
                (EventKind::Closure, rng.gen_range(d..=2 * d))
            };
            if t + len > self.frames_per_sequence {
                break;
            }
            events.push(Event { kind, start: t, len });
            t += len + rng.gen_range(d..=4 * d);
        }
        events
    }
}

fn gaussian_vec(rng: &mut impl Rng, n: usize, std: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Generates the dataset with its event annotations; deterministic in the
/// spec (seed included).
pub fn synth_generate_annotated(spec: &SynthSpec) -> Result<Vec<AnnotatedSequence>> {
    spec.validate()?;
    let dim = CHANNELS * spec.width;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let template = gaussian_vec(&mut rng, dim, 1.0);
    let bases: Vec<Vec<f64>> = (0..NUISANCE_BASES).map(|_| gaussian_vec(&mut rng, dim, 0.5)).collect();
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE)).expect("finite std");
    let innovation = Normal::new(0.0, (1.0 - NUISANCE_AR * NUISANCE_AR).sqrt()).unwrap();

    let mut out = Vec::with_capacity(spec.n_subjects * spec.sequences_per_subject);
    for subject in 1..=spec.n_subjects {
        let base = gaussian_vec(&mut rng, dim, spec.subject_std);
        for _ in 0..spec.sequences_per_subject {
            let events = spec.place_events(&mut rng);
            let n = spec.frames_per_sequence;
            let mut labels = vec![0.0f32; n];
            let mut closed = vec![false; n];
            for e in &events {
                for k in 0..e.len {
                    closed[e.start + k] = true;
                    labels[e.start + k] = spec.label(e.kind, k);
                }
            }
            let mut coeff = gaussian_vec(&mut rng, NUISANCE_BASES, 1.0);
            let mut frames = Vec::with_capacity(n);
            for &is_closed in &closed {
                for c in coeff.iter_mut() {
                    *c = NUISANCE_AR * *c + innovation.sample(&mut rng);
                }
                let amp = if is_closed { rng.gen_range(0.8..1.2) } else { 0.0 };
                let frame = (0..dim)
                    .map(|i| {
                        let nuisance: f64 = coeff.iter().zip(&bases).map(|(a, b)| a * b[i]).sum();
                        let jitter = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                        (base[i] + nuisance + amp * template[i] + jitter) as f32
                    })
                    .collect();
                frames.push(frame);
            }
            out.push(AnnotatedSequence {
                sequence: FrameSequence::new(subject as u32, spec.width, frames, labels)?,
                events,
            });
        }
    }
    Ok(out)
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<FrameSequence>> {
    Ok(synth_generate_annotated(spec)?
        .into_iter()
        .map(|a| a.sequence)
        .collect())
}

/// Frame counts per intensity level.
pub fn label_histogram(seqs: &[FrameSequence]) -> [usize; PSPI_LEVELS] {
    let mut hist = [0; PSPI_LEVELS];
    for s in seqs {
        for &l in s.labels() {
            hist[level_of(l)] += 1;
        }
    }
    hist
}
