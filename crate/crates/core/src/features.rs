//! One informative scalar per block.
//!
//! With `g` the mean of the whole feature image, a block contributes the sum
//! of its pixels that are `>= g`. A block with no such pixel contributes
//! `fallback * g`, where `fallback` is the block side by default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::FeatureImage;
use crate::sampling::{BlockOrigin, SamplingPlan};

/// Multiplier of the global mean used for blocks with no qualifying pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackScale {
    /// `k`
    #[default]
    BlockSide,
    /// `k * k`
    BlockArea,
}

impl FallbackScale {
    pub fn factor(self, block_k: usize) -> f64 {
        match self {
            FallbackScale::BlockSide => block_k as f64,
            FallbackScale::BlockArea => (block_k * block_k) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    pub source_id: String,
    pub values: Vec<f64>,
}

impl ObservationSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn global_mean(gf: &FeatureImage) -> Result<f64> {
    let values = gf.grid().as_slice();
    if values.is_empty() {
        return Err(Error::invalid("mean of an empty feature image"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn block_feature(
    gf: &FeatureImage,
    origin: BlockOrigin,
    block_k: usize,
    g_bar: f64,
    fallback: FallbackScale,
) -> Result<f64> {
    if block_k == 0 || origin.x0 + block_k > gf.width() || origin.y0 + block_k > gf.height() {
        return Err(Error::invalid(format!(
            "block {}x{} at ({}, {}) exceeds the {}x{} feature image",
            block_k,
            block_k,
            origin.x0,
            origin.y0,
            gf.width(),
            gf.height()
        )));
    }
    let grid = gf.grid();
    let mut sum = 0.0;
    let mut hits = 0usize;
    for y in origin.y0..origin.y0 + block_k {
        for &v in &grid.row(y)[origin.x0..origin.x0 + block_k] {
            if v >= g_bar {
                sum += v;
                hits += 1;
            }
        }
    }
    Ok(if hits == 0 {
        fallback.factor(block_k) * g_bar
    } else {
        sum
    })
}

/// `order` holds indices into `plan.blocks()`, normally from
/// [`crate::sampling::scan_order`].
pub fn extract_observations(
    gf: &FeatureImage,
    plan: &SamplingPlan,
    order: &[usize],
    fallback: FallbackScale,
    source_id: impl Into<String>,
) -> Result<ObservationSequence> {
    if gf.width() != plan.image_w || gf.height() != plan.image_h {
        return Err(Error::DimensionMismatch(format!(
            "feature image is {}x{}, sampling plan expects {}x{}",
            gf.width(),
            gf.height(),
            plan.image_w,
            plan.image_h
        )));
    }
    if order.len() != plan.len() {
        return Err(Error::DimensionMismatch(format!(
            "scan order has {} entries for {} blocks",
            order.len(),
            plan.len()
        )));
    }
    let g_bar = global_mean(gf)?;
    let values = order
        .iter()
        .map(|&i| {
            let origin = *plan
                .blocks()
                .get(i)
                .ok_or_else(|| Error::invalid(format!("block index {i} out of range")))?;
            block_feature(gf, origin, plan.block_k, g_bar, fallback)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservationSequence {
        source_id: source_id.into(),
        values,
    })
}
