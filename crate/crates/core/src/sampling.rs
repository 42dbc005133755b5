//! Strip and block geometry, and the order blocks are visited in.
//!
//! The image is cut into horizontal strips of height `strip_h` that overlap
//! by `overlap_p` rows. Inside a strip, k×k blocks step by `k - p` in both
//! directions, so a strip of height `h` and width `w` holds
//! `floor((h - p) / (k - p)) * floor((w - p) / (k - p))` blocks. Pixels past
//! the last full block on the right or bottom are not sampled.
//!
//! Blocks are stored row-major over the global block rows (strip by strip,
//! top to bottom). [`scan_order`] then linearises them either as a serpentine
//! (even rows left to right, odd rows right to left) or row-major zigzag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOrigin {
    pub x0: usize,
    pub y0: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub image_w: usize,
    pub image_h: usize,
    pub block_k: usize,
    pub overlap_p: usize,
    pub strip_h: usize,
    pub n_strips: usize,
    pub rows_per_strip: usize,
    pub blocks_per_row: usize,
    blocks: Vec<BlockOrigin>,
}

impl SamplingPlan {
    /// Block origins, row-major over block rows.
    pub fn blocks(&self) -> &[BlockOrigin] {
        &self.blocks
    }

    /// Total number of blocks, i.e. the observation sequence length.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.n_strips * self.rows_per_strip
    }

    pub fn step(&self) -> usize {
        self.block_k - self.overlap_p
    }

    /// Width actually covered by blocks.
    pub fn covered_width(&self) -> usize {
        self.overlap_p + self.blocks_per_row * self.step()
    }
}

pub fn plan_sampling(
    image_w: usize,
    image_h: usize,
    block_k: usize,
    overlap_p: usize,
    strip_h: usize,
) -> Result<SamplingPlan> {
    if block_k == 0 {
        return Err(Error::invalid("block size must be >= 1"));
    }
    if overlap_p >= block_k {
        return Err(Error::invalid(format!(
            "overlap {overlap_p} must be smaller than block size {block_k}"
        )));
    }
    if strip_h < block_k {
        return Err(Error::invalid(format!(
            "strip height {strip_h} must be at least the block size {block_k}"
        )));
    }
    if image_w < block_k || image_h < strip_h {
        return Err(Error::invalid(format!(
            "image {image_w}x{image_h} cannot hold one {block_k}-wide block in a {strip_h}-high strip"
        )));
    }

    let step = block_k - overlap_p;
    let strip_step = strip_h - overlap_p;
    let n_strips = (image_h - overlap_p) / strip_step;
    let rows_per_strip = (strip_h - overlap_p) / step;
    let blocks_per_row = (image_w - overlap_p) / step;

    let mut blocks = Vec::with_capacity(n_strips * rows_per_strip * blocks_per_row);
    for s in 0..n_strips {
        for r in 0..rows_per_strip {
            let y0 = s * strip_step + r * step;
            for c in 0..blocks_per_row {
                blocks.push(BlockOrigin { x0: c * step, y0 });
            }
        }
    }

    Ok(SamplingPlan {
        image_w,
        image_h,
        block_k,
        overlap_p,
        strip_h,
        n_strips,
        rows_per_strip,
        blocks_per_row,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Boustrophedon: alternate direction on every block row.
    #[default]
    Serpentine,
    /// Every row left to right.
    Zigzag,
}

/// Indices into [`SamplingPlan::blocks`] in visiting order.
pub fn scan_order(plan: &SamplingPlan, mode: ScanMode) -> Vec<usize> {
    let cols = plan.blocks_per_row;
    let mut order = Vec::with_capacity(plan.len());
    for row in 0..plan.n_rows() {
        let base = row * cols;
        if mode == ScanMode::Serpentine && row % 2 == 1 {
            order.extend((0..cols).rev().map(|c| base + c));
        } else {
            order.extend((0..cols).map(|c| base + c));
        }
    }
    order
}
