use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sequence::FrameSequence;
use crate::error::{Error, Result};
use crate::network::PSPI_LEVELS;

/// Relative sampling weight of each intensity level 0..=15.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelWeights(pub Vec<f64>);

impl Default for LevelWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl LevelWeights {
    pub fn uniform() -> Self {
        LevelWeights(vec![1.0; PSPI_LEVELS])
    }

    /// Weights proportional to how often each level occurs, which
    /// reproduces the natural (unbalanced) label distribution.
    pub fn natural(levels: &[usize]) -> Self {
        let mut w = vec![0.0; PSPI_LEVELS];
        for &l in levels {
            w[l] += 1.0;
        }
        LevelWeights(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.len() != PSPI_LEVELS {
            return Err(Error::config(format!(
                "expected {PSPI_LEVELS} level weights, got {}",
                self.0.len()
            )));
        }
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config("level weights must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.0.iter().sum();
        self.0.iter().map(|w| w / total).collect()
    }
}

/// Intensity level used to key a window: its end-frame label rounded and
/// clamped to 0..=15.
pub fn level_of(label: f32) -> usize {
    (label.round().max(0.0) as usize).min(PSPI_LEVELS - 1)
}

/// Every window end frame of a set of sequences, grouped by level.
#[derive(Clone, Debug)]
pub struct WindowPool {
    /// `(sequence index, 1-based end frame)`
    pub entries: Vec<(usize, usize)>,
    pub levels: Vec<usize>,
}

impl WindowPool {
    pub fn new(seqs: &[FrameSequence]) -> Self {
        let mut entries = Vec::new();
        let mut levels = Vec::new();
        for (s, seq) in seqs.iter().enumerate() {
            for (i, &label) in seq.labels().iter().enumerate() {
                entries.push((s, i + 1));
                levels.push(level_of(label));
            }
        }
        WindowPool { entries, levels }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Two-stage sampler: pick a level from the weights restricted to levels
/// present in the pool, then a window uniformly within that level. Draws are
/// with replacement.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    by_level: Vec<Vec<usize>>,
    /// Cumulative probabilities over `present`.
    cumulative: Vec<f64>,
    present: Vec<usize>,
    probabilities: Vec<f64>,
    dropped: Vec<usize>,
}

impl WeightedSampler {
    pub fn new(levels: &[usize], weights: &LevelWeights) -> Result<Self> {
        weights.validate()?;
        if levels.is_empty() {
            return Err(Error::config("cannot sample from an empty window pool"));
        }
        let mut by_level = vec![Vec::new(); PSPI_LEVELS];
        for (i, &l) in levels.iter().enumerate() {
            if l >= PSPI_LEVELS {
                return Err(Error::config(format!("level {l} outside 0..{PSPI_LEVELS}")));
            }
            by_level[l].push(i);
        }
        let present: Vec<usize> = (0..PSPI_LEVELS)
            .filter(|&l| !by_level[l].is_empty() && weights.0[l] > 0.0)
            .collect();
        let dropped: Vec<usize> = (0..PSPI_LEVELS)
            .filter(|&l| by_level[l].is_empty() && weights.0[l] > 0.0)
            .collect();
        let total: f64 = present.iter().map(|&l| weights.0[l]).sum();
        if present.is_empty() || total <= 0.0 {
            return Err(Error::config(
                "all level weights are zero on the levels present in the pool",
            ));
        }
        if !dropped.is_empty() {
            log::warn!("level weights renormalized: levels {dropped:?} have weight but no windows");
        }
        let mut probabilities = vec![0.0; PSPI_LEVELS];
        let mut cumulative = Vec::with_capacity(present.len());
        let mut acc = 0.0;
        for &l in &present {
            probabilities[l] = weights.0[l] / total;
            acc += probabilities[l];
            cumulative.push(acc);
        }
        Ok(WeightedSampler {
            by_level,
            cumulative,
            present,
            probabilities,
            dropped,
        })
    }

    /// Effective per-level probabilities after renormalization.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Levels that had positive weight but no windows.
    pub fn dropped_levels(&self) -> &[usize] {
        &self.dropped
    }

    /// Index into the pool of one draw.
    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.present.len() - 1);
        let bucket = &self.by_level[self.present[k]];
        bucket[rng.gen_range(0..bucket.len())]
    }

    pub fn batch(&self, batch_size: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..batch_size).map(|_| self.draw(rng)).collect()
    }
}
