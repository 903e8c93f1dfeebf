use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldMode {
    Stratified,
    Grouped,
}

/// Assignment of every sample to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub mode: FoldMode,
    pub seed: u64,
}

impl FoldPlan {
    /// Test indices of `fold`, ascending.
    pub fn test(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Indices outside `fold`, ascending.
    pub fn rest(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignments {
            s[a] += 1;
        }
        s
    }
}

/// Shuffled stratified `k`-fold plan.
///
/// Members of each class are shuffled, then dealt to folds in turn; the
/// dealing position carries over between classes so that fold sizes stay
/// within one of each other.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class,
            count: members.len(),
            k,
        });
    }
    let mut rng = seeded(seed);
    let mut assignments = vec![0; labels.len()];
    let mut pos = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        mode: FoldMode::Stratified,
        seed,
    })
}

/// `k`-fold plan that never splits a group. Groups are shuffled, stably
/// sorted by size (largest first) and each placed into the currently
/// smallest fold (lowest index on ties).
pub fn grouped_folds(groups: &[u32], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    if members.len() < k {
        return Err(Error::TooFewGroups {
            groups: members.len(),
            k,
        });
    }
    let mut order: Vec<(u32, usize)> = members.iter().map(|(&g, m)| (g, m.len())).collect();
    order.shuffle(&mut seeded(seed));
    order.sort_by(|a, b| b.1.cmp(&a.1));
    let mut sizes = vec![0usize; k];
    let mut assignments = vec![0; groups.len()];
    for (g, size) in order {
        let fold = (0..k).min_by_key(|&f| (sizes[f], f)).unwrap();
        sizes[fold] += size;
        for &i in &members[&g] {
            assignments[i] = fold;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        mode: FoldMode::Grouped,
        seed,
    })
}

/// Split `total` proportionally to `weights` by largest remainder (ties to
/// the lower index).
pub(crate) fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out: Vec<usize> = weights.iter().map(|&w| total * w / sum).collect();
    let mut rem: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (total * w % sum, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let given: usize = out.iter().sum();
    for &(_, i) in rem.iter().take(total - given) {
        out[i] += 1;
    }
    out
}

/// Keep `ceil(pct% · n)` of `indices`, stratified by class, retaining every
/// class (and every subject-class cell when `groups` is given) at least once.
/// Returned ascending.
pub fn subsample_regime(
    indices: &[usize],
    labels: &[usize],
    groups: Option<&[u32]>,
    pct: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::invalid(format!(
            "regime must lie in (0, 100], got {pct}"
        )));
    }
    let mut all = indices.to_vec();
    all.sort_unstable();
    if pct >= 100.0 {
        return Ok(all);
    }
    let n = all.len();
    let budget = libm::ceil(pct / 100.0 * n as f64 - 1e-9) as usize;

    let mut rng = seeded(seed);
    let mut cells: BTreeMap<(u32, usize), Vec<usize>> = BTreeMap::new();
    for &i in &all {
        let g = groups.map_or(0, |g| g[i]);
        cells.entry((g, labels[i])).or_default().push(i);
    }
    if cells.len() > budget {
        return Err(Error::InfeasibleRegime(format!(
            "{pct}% keeps {budget} of {n} samples but {} {} must each be kept",
            cells.len(),
            if groups.is_some() {
                "subject-class cells"
            } else {
                "classes"
            }
        )));
    }
    let mut chosen = Vec::with_capacity(budget);
    let mut leftover: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ((_, class), mut members) in cells {
        members.shuffle(&mut rng);
        chosen.push(members[0]);
        leftover
            .entry(class)
            .or_default()
            .extend_from_slice(&members[1..]);
    }
    // Shuffle each class's remainder as a whole so cells are mixed.
    for rest in leftover.values_mut() {
        rest.shuffle(&mut rng);
    }
    let classes: Vec<usize> = leftover.keys().copied().collect();
    let counts: Vec<usize> = classes
        .iter()
        .map(|c| all.iter().filter(|&&i| labels[i] == *c).count())
        .collect();
    let desired = apportion(budget, &counts);
    let mut have: Vec<usize> = classes
        .iter()
        .map(|c| chosen.iter().filter(|&&i| labels[i] == *c).count())
        .collect();
    let mut cursor = vec![0usize; classes.len()];
    // Round-robin top-up toward the proportional quota, then fill anywhere.
    while chosen.len() < budget {
        let mut progressed = false;
        for (ci, class) in classes.iter().enumerate() {
            if chosen.len() >= budget {
                break;
            }
            let rest = &leftover[class];
            if have[ci] < desired[ci] && cursor[ci] < rest.len() {
                chosen.push(rest[cursor[ci]]);
                cursor[ci] += 1;
                have[ci] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    while chosen.len() < budget {
        let ci = (0..classes.len())
            .find(|&ci| cursor[ci] < leftover[&classes[ci]].len())
            .expect("budget within pool");
        chosen.push(leftover[&classes[ci]][cursor[ci]]);
        cursor[ci] += 1;
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Stratified split with `round(train_frac · n)` training samples
/// apportioned across classes. A singleton class goes to training.
pub fn train_val_split(
    indices: &[usize],
    labels: &[usize],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid(format!(
            "training fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    for &i in &sorted {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
    let n_train = libm::round(train_frac * sorted.len() as f64) as usize;
    let quota = apportion(n_train, &counts);
    let mut rng = seeded(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for ((class, members), q) in by_class.iter_mut().zip(quota) {
        members.shuffle(&mut rng);
        let q = if members.len() == 1 {
            log::warn!("class {class} has a single member; placed in training");
            1
        } else {
            q.clamp(1, members.len() - 1)
        };
        train.extend_from_slice(&members[..q]);
        val.extend_from_slice(&members[q..]);
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty(format!(
            "split of {} samples leaves one side empty",
            sorted.len()
        )));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}
