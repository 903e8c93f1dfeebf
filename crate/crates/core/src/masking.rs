//! Patch mask sampling and application for masked auto-encoding.
//!
//! Convolutional patches have overlapping receptive fields, so masking
//! isolated patches leaks their content through the neighbours. Block masks
//! hide contiguous runs of `block` patches instead, and keep at least one
//! visible patch between runs so that every run has exactly `block` patches
//! (only a run touching the last patch may be shorter).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAX_ATTEMPTS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub masked: Vec<bool>,
    /// Requested masked fraction.
    pub ratio: f64,
    /// Run length in patches; 1 is unit masking.
    pub block: usize,
}

impl MaskSpec {
    pub fn none(patches: usize) -> Self {
        MaskSpec {
            masked: vec![false; patches],
            ratio: 0.0,
            block: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }

    pub fn count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.masked
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }

    /// Lengths of the maximal masked runs, left to right.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &m) in self.masked.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i - s));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.masked.len() - s));
        }
        runs
    }
}

fn check_ratio(patches: usize, ratio: f64) -> Result<()> {
    if patches == 0 {
        return Err(Error::invalid("mask needs at least one patch"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(alloc::format!(
            "mask ratio {ratio} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Masked-patch budget `ceil(ratio·P)`, tolerant of float noise in `ratio·P`.
pub fn block_budget(patches: usize, ratio: f64) -> usize {
    libm::ceil(ratio * patches as f64 - 1e-9).max(0.0) as usize
}

/// Exactly `round(ratio·P)` patches, uniformly without replacement.
pub fn sample_unit_mask(patches: usize, ratio: f64, rng: &mut Rng) -> Result<MaskSpec> {
    check_ratio(patches, ratio)?;
    let count = libm::round(ratio * patches as f64) as usize;
    Ok(uniform_mask(patches, count, ratio, rng))
}

fn uniform_mask(patches: usize, count: usize, ratio: f64, rng: &mut Rng) -> MaskSpec {
    let mut masked = vec![false; patches];
    for i in index::sample(rng, patches, count.min(patches)) {
        masked[i] = true;
    }
    MaskSpec {
        masked,
        ratio,
        block: 1,
    }
}

/// Block mask with `ceil(ratio·P / block)` runs of `block` patches.
///
/// Run starts are drawn uniformly from the positions whose run (plus one
/// visible patch on either side) is still free. A run starting within
/// `block` of the end is truncated at `P`; such a start is only legal if
/// the truncated run still lets the total reach `ceil(ratio·P)`. A draw that
/// runs out of legal starts is restarted from scratch. Budgets close to the
/// packing limit rarely succeed that way, so after repeated failures starts
/// are further restricted to those that leave room for the rest of the budget.
pub fn sample_block_mask(
    patches: usize,
    ratio: f64,
    block: usize,
    rng: &mut Rng,
) -> Result<MaskSpec> {
    check_ratio(patches, ratio)?;
    if block == 0 || block > patches {
        return Err(Error::invalid(alloc::format!(
            "block size {block} outside [1, {patches}]"
        )));
    }
    let target = block_budget(patches, ratio);
    if block == 1 {
        return Ok(uniform_mask(patches, target, ratio, rng));
    }
    if target == 0 {
        return Ok(MaskSpec {
            masked: vec![false; patches],
            ratio,
            block,
        });
    }
    if region_capacity(patches, block, true) < target {
        return Err(Error::InfeasibleMask(alloc::format!(
            "{target} of {patches} patches cannot be covered by separated runs of {block}"
        )));
    }
    let plan = Placement {
        patches,
        block,
        target,
        n_blocks: target.div_ceil(block),
    };
    let mut legal = Vec::with_capacity(patches);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(masked) = plan.draw(false, rng, &mut legal) {
            return Ok(MaskSpec {
                masked,
                ratio,
                block,
            });
        }
    }
    match plan.draw(true, rng, &mut legal) {
        Some(masked) => Ok(MaskSpec {
            masked,
            ratio,
            block,
        }),
        None => Err(Error::InfeasibleMask(alloc::format!(
            "no placement of {} runs of {block} over {patches} patches found",
            plan.n_blocks
        ))),
    }
}

/// Most patches that separated runs can cover in `len` free patches; only a
/// region reaching the end may hold a truncated run.
fn region_capacity(len: usize, block: usize, at_end: bool) -> usize {
    let full = (len + 1) / (block + 1);
    if at_end {
        full * block + ((len + 1) % (block + 1)).saturating_sub(1)
    } else {
        full * block
    }
}

struct Placement {
    patches: usize,
    block: usize,
    target: usize,
    n_blocks: usize,
}

impl Placement {
    /// Maximal stretches `[a, b)` where a new run may go: unmasked and not
    /// adjacent to a masked patch.
    fn free_regions(&self, masked: &[bool]) -> Vec<(usize, usize)> {
        let p = self.patches;
        let open =
            |i: usize| !masked[i] && (i == 0 || !masked[i - 1]) && (i + 1 == p || !masked[i + 1]);
        let mut out = Vec::new();
        let mut i = 0;
        while i < p {
            if open(i) {
                let a = i;
                while i < p && open(i) {
                    i += 1;
                }
                out.push((a, i));
            } else {
                i += 1;
            }
        }
        out
    }

    fn cap(&self, a: usize, b: usize) -> usize {
        if b <= a {
            0
        } else {
            region_capacity(b - a, self.block, b == self.patches)
        }
    }

    fn draw(&self, prune: bool, rng: &mut Rng, legal: &mut Vec<usize>) -> Option<Vec<bool>> {
        let (p, block) = (self.patches, self.block);
        let mut masked = vec![false; p];
        let mut count = 0usize;
        let mut placed = 0usize;
        while count < self.target {
            // full runs still to come after this one contribute at most (n_blocks - placed - 1) * block
            let later = self.n_blocks.saturating_sub(placed + 1) * block;
            let need = self.target.saturating_sub(count + later).max(1);
            let regions = self.free_regions(&masked);
            let total: usize = regions.iter().map(|&(a, b)| self.cap(a, b)).sum();
            legal.clear();
            for &(a, b) in &regions {
                let others = total - self.cap(a, b);
                for s in a..b {
                    let len = block.min(p - s);
                    if len < need || s + len > b {
                        continue;
                    }
                    if prune {
                        let left = self.cap(a, s.saturating_sub(1).max(a));
                        let right = self.cap(s + len + 1, b);
                        if count + len + others + left + right < self.target {
                            continue;
                        }
                    }
                    legal.push(s);
                }
            }
            if legal.is_empty() {
                return None;
            }
            let s = legal[rng.random_range(0..legal.len())];
            let len = block.min(p - s);
            masked[s..s + len].iter_mut().for_each(|m| *m = true);
            count += len;
            placed += 1;
        }
        Some(masked)
    }
}

/// One independent block mask per modality, each from its own substream of `rng`.
pub fn sample_multimodal_masks(
    patches: usize,
    ratio: f64,
    block: usize,
    modalities: usize,
    rng: &mut Rng,
) -> Result<Vec<MaskSpec>> {
    if modalities < 2 {
        return Err(Error::invalid(
            "multimodal masking needs at least two modalities",
        ));
    }
    let base: u64 = rng.random();
    (0..modalities as u64)
        .map(|m| sample_block_mask(patches, ratio, block, &mut crate::rng::substream(base, m)))
        .collect()
}

/// Replace the masked rows of `[P × D]` (or `[N × P × D]` with one mask per
/// row block) by `token`; all other rows are copied bit for bit.
pub fn apply_mask<S: Scalar>(
    tokens: &Tensor<S>,
    mask: &MaskSpec,
    token: &[S],
) -> Result<Tensor<S>> {
    let shape = tokens.shape();
    let (p, d) = match shape {
        [p, d] => (*p, *d),
        [_, p, d] => (*p, *d),
        _ => return Err(Error::shape("apply_mask expects [P × D] or [N × P × D]")),
    };
    if mask.len() != p {
        return Err(Error::shape(alloc::format!(
            "mask covers {} patches, tokens have {p}",
            mask.len()
        )));
    }
    if token.len() != d {
        return Err(Error::shape(alloc::format!(
            "mask token width {} != {d}",
            token.len()
        )));
    }
    let mut out = tokens.clone();
    for (r, row) in out.data_mut().chunks_exact_mut(d).enumerate() {
        if mask.masked[r % p] {
            row.copy_from_slice(token);
        }
    }
    Ok(out)
}
