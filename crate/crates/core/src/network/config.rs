use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, PoolSpec};

/// Output head of the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Linear activation, one continuous prediction per window row.
    #[default]
    Regression,
    /// Softmax over `class_count` intensity levels, one label per window.
    Classification,
}

/// Hyper-parameters of the convolution → (RCL, pool)×m → dense stack.
///
/// `pool_specs` holds one pool after the first convolution and one after each
/// RCL, so its length is `rcl_count + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Frame-vector length (width axis).
    pub input_w: usize,
    /// Window height in frames (time axis); also the regression output size.
    pub input_h: usize,
    pub channels: usize,
    pub maps: usize,
    pub rcl_count: usize,
    pub iterations: usize,
    pub pool_specs: Vec<PoolSpec>,
    pub head: Head,
    pub class_count: usize,
    pub dropout_rate: f64,
    pub batch_norm: bool,
}

/// Extents of a feature map at one point of the stack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: String,
    pub maps: usize,
    pub h: usize,
    pub w: usize,
}

pub const PSPI_LEVELS: usize = 16;

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl NetworkConfig {
    /// 713-wide, 30-frame windows, 256 maps, four RCLs with three iterations.
    pub fn full() -> Self {
        NetworkConfig {
            input_w: 713,
            input_h: 30,
            channels: 3,
            maps: 256,
            rcl_count: 4,
            iterations: 3,
            pool_specs: vec![
                PoolSpec::tiled(4, 1),
                PoolSpec::tiled(4, 1),
                PoolSpec::tiled(4, 4),
                PoolSpec::tiled(2, 2),
                PoolSpec::tiled(1, 1),
            ],
            head: Head::Regression,
            class_count: PSPI_LEVELS,
            dropout_rate: 0.5,
            batch_norm: true,
        }
    }

    /// Small network with width-only pooling. Pools shrink the width by 4
    /// while at least 2 columns remain, then by 2, then not at all; the time
    /// axis is never pooled, so any `input_h` (including 1) is valid.
    pub fn reduced(input_w: usize, input_h: usize, maps: usize, rcl_count: usize, iterations: usize) -> Self {
        let mut w = input_w;
        let pool_specs = (0..=rcl_count)
            .map(|_| {
                let f = [4, 2].into_iter().find(|&f| w / f >= 2).unwrap_or(1);
                w /= f;
                PoolSpec::tiled(f, 1)
            })
            .collect();
        NetworkConfig {
            input_w,
            input_h,
            channels: 3,
            maps,
            rcl_count,
            iterations,
            pool_specs,
            head: Head::Regression,
            class_count: PSPI_LEVELS,
            dropout_rate: 0.5,
            batch_norm: true,
        }
    }

    pub fn output_len(&self) -> usize {
        match self.head {
            Head::Regression => self.input_h,
            Head::Classification => self.class_count,
        }
    }

    pub fn first_conv() -> ConvSpec {
        ConvSpec::same(3)
    }

    /// Feature-map extents after the first convolution and after every pool.
    /// Errors name the layer whose output would be empty.
    pub fn shape_trace(&self) -> Result<Vec<LayerShape>> {
        if self.input_w == 0 || self.input_h == 0 || self.channels == 0 || self.maps == 0 {
            return Err(Error::config("input extents, channels and maps must be >= 1"));
        }
        if self.rcl_count == 0 {
            return Err(Error::config("at least one RCL is required"));
        }
        if self.pool_specs.len() != self.rcl_count + 1 {
            return Err(Error::config(format!(
                "expected {} pool specs (one after the first convolution and one per RCL), got {}",
                self.rcl_count + 1,
                self.pool_specs.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.head == Head::Classification && self.class_count < 2 {
            return Err(Error::config("classification needs at least 2 classes"));
        }
        let (h, w) = Self::first_conv()
            .output_hw(self.input_h, self.input_w)
            .map_err(|e| Error::config(format!("layer c1: {e}")))?;
        let mut trace = vec![LayerShape {
            layer: "c1".into(),
            maps: self.maps,
            h,
            w,
        }];
        for (i, pool) in self.pool_specs.iter().enumerate() {
            let last = trace.last().unwrap();
            let (h, w) = pool
                .output_hw(last.h, last.w)
                .map_err(|e| Error::config(format!("layer pool{}: {e}", i + 1)))?;
            trace.push(LayerShape {
                layer: format!("pool{}", i + 1),
                maps: self.maps,
                h,
                w,
            });
        }
        Ok(trace)
    }

    /// Length of the flattened vector entering the dense layer.
    pub fn feature_count(&self) -> Result<usize> {
        let last = self.shape_trace()?.pop().unwrap();
        Ok(last.maps * last.h * last.w)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape_trace().map(|_| ())
    }

    /// Learnable scalars, including batch-norm scale and shift.
    pub fn parameter_count(&self) -> Result<usize> {
        let k = self.maps;
        let bn = if self.batch_norm { 2 * k } else { 0 };
        let c1 = k * self.channels * 9 + k + bn;
        let rcl = |c_in: usize| k * c_in + k * k * 9 + k + bn;
        let rcls = rcl(k) * self.rcl_count;
        let dense = self.feature_count()? * self.output_len() + self.output_len();
        Ok(c1 + rcls + dense)
    }
}
