use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AttentionLabel, DecisionWindow};
use crate::{Error, Result};

/// Train / validation / test proportions.
pub const SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Vec<DecisionWindow>,
    pub validation: Vec<DecisionWindow>,
    pub test: Vec<DecisionWindow>,
    pub seed: u64,
    /// Windows discarded because they shared samples with another partition.
    pub dropped: usize,
}

impl SplitSet {
    pub fn partition(&self, p: Partition) -> &[DecisionWindow] {
        match p {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }
}

type GroupKey = (String, AttentionLabel);
type BlockKey = (usize, usize);

/// Splits windows into train/validation/test per (subject, label).
///
/// Windows are grouped into contiguous blocks of `block_samples` samples
/// within their trial. Blocks of each (subject, label) group are shuffled with
/// a generator seeded by `seed` and assigned greedily to the partition with the
/// largest remaining deficit, so each partition gets at least one block.
/// Windows that share samples with a window of another partition are dropped.
pub fn stratified_split(
    windows: Vec<DecisionWindow>,
    ratios: [f64; 3],
    block_samples: usize,
    seed: u64,
) -> Result<SplitSet> {
    if windows.is_empty() {
        return Err(Error::Empty("window set"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidConfig(alloc::format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    if block_samples == 0 {
        return Err(Error::InvalidConfig(
            "block length must be at least one sample".into(),
        ));
    }

    // Block grid is anchored at the first window of each trial.
    let mut trial_base: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for w in &windows {
        let e = trial_base
            .entry((w.subject_id.clone(), w.origin.trial))
            .or_insert(w.origin.start);
        *e = (*e).min(w.origin.start);
    }

    let mut groups: BTreeMap<GroupKey, BTreeMap<BlockKey, Vec<usize>>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        let base = trial_base[&(w.subject_id.clone(), w.origin.trial)];
        let block = (w.origin.start - base) / block_samples;
        groups
            .entry((w.subject_id.clone(), w.label))
            .or_default()
            .entry((w.origin.trial, block))
            .or_default()
            .push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Partition::Train; windows.len()];
    for ((subject, label), blocks) in &groups {
        let mut blocks: Vec<&Vec<usize>> = blocks.values().collect();
        blocks.shuffle(&mut rng);
        let total: usize = blocks.iter().map(|b| b.len()).sum();
        let targets = ratios.map(|r| r * total as f64);
        let mut counts = [0usize; 3];
        let mut filled = [false; 3];
        let wanted: Vec<Partition> = Partition::ALL
            .into_iter()
            .filter(|p| ratios[p.index()] > 0.0)
            .collect();
        for (bi, block) in blocks.iter().enumerate() {
            let remaining = blocks.len() - bi;
            let empty: Vec<Partition> = wanted
                .iter()
                .copied()
                .filter(|p| !filled[p.index()])
                .collect();
            let choice = if !empty.is_empty() && remaining <= empty.len() {
                // Too few blocks left: each must open an empty partition.
                empty[0]
            } else {
                let mut best = wanted[0];
                for &p in &wanted[1..] {
                    let d = targets[p.index()] - counts[p.index()] as f64;
                    let db = targets[best.index()] - counts[best.index()] as f64;
                    if d > db {
                        best = p;
                    }
                }
                best
            };
            counts[choice.index()] += block.len();
            filled[choice.index()] = true;
            for &i in block.iter() {
                assignment[i] = choice;
            }
        }
        if wanted.iter().any(|p| !filled[p.index()]) {
            return Err(Error::GroupTooSmall {
                subject: subject.clone(),
                label: label.to_string(),
                blocks: blocks.len(),
            });
        }
    }

    let dropped_mask = leakage_mask(&windows, &assignment);
    let dropped = dropped_mask.iter().filter(|d| **d).count();
    let mut out = SplitSet {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        dropped,
    };
    for ((w, p), drop) in windows.into_iter().zip(assignment).zip(dropped_mask) {
        if drop {
            continue;
        }
        match p {
            Partition::Train => out.train.push(w),
            Partition::Validation => out.validation.push(w),
            Partition::Test => out.test.push(w),
        }
    }
    Ok(out)
}

/// Marks windows overlapping (in samples) a window from a different partition.
fn leakage_mask(windows: &[DecisionWindow], assignment: &[Partition]) -> Vec<bool> {
    let mut by_trial: BTreeMap<(&str, usize), Vec<usize>> = BTreeMap::new();
    for (i, w) in windows.iter().enumerate() {
        by_trial
            .entry((w.subject_id.as_str(), w.origin.trial))
            .or_default()
            .push(i);
    }
    let mut drop = vec![false; windows.len()];
    for idx in by_trial.values_mut() {
        idx.sort_by_key(|&i| windows[i].origin.start);
        for a in 0..idx.len() {
            let wa = &windows[idx[a]];
            for &j in &idx[a + 1..] {
                if windows[j].origin.start >= wa.end() {
                    break;
                }
                if assignment[idx[a]] != assignment[j] {
                    drop[idx[a]] = true;
                    drop[j] = true;
                }
            }
        }
    }
    drop
}

/// Merges windows into maximal contiguous sample spans per (subject, trial).
/// Returns `(subject, trial, start, end)` sorted by key.
pub fn merge_spans(windows: &[DecisionWindow]) -> Vec<(String, usize, usize, usize)> {
    let mut by_trial: BTreeMap<(String, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for w in windows {
        by_trial
            .entry((w.subject_id.clone(), w.origin.trial))
            .or_default()
            .push((w.origin.start, w.end()));
    }
    let mut out = Vec::new();
    for ((subject, trial), mut ranges) in by_trial {
        ranges.sort_unstable();
        let mut cur = ranges[0];
        for &(s, e) in &ranges[1..] {
            if s <= cur.1 {
                cur.1 = cur.1.max(e);
            } else {
                out.push((subject.clone(), trial, cur.0, cur.1));
                cur = (s, e);
            }
        }
        out.push((subject, trial, cur.0, cur.1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WindowOrigin;

    fn win(
        subject: &str,
        label: AttentionLabel,
        trial: usize,
        start: usize,
        len: usize,
    ) -> DecisionWindow {
        DecisionWindow {
            subject_id: subject.into(),
            sample_rate: 10.0,
            samples: vec![vec![0.0; len]],
            label,
            origin: WindowOrigin { trial, start },
        }
    }

    fn balanced(n: usize) -> Vec<DecisionWindow> {
        let mut v = Vec::new();
        for i in 0..n {
            v.push(win("s", AttentionLabel::Left, 0, i * 10, 10));
            v.push(win("s", AttentionLabel::Right, 1, 10_000 + i * 10, 10));
        }
        v
    }

    fn count(ws: &[DecisionWindow], l: AttentionLabel) -> usize {
        ws.iter().filter(|w| w.label == l).count()
    }

    #[test]
    fn hundred_per_label_gives_exact_ratios() {
        let s = stratified_split(balanced(100), SPLIT_RATIOS, 10, 7).unwrap();
        for l in [AttentionLabel::Left, AttentionLabel::Right] {
            assert_eq!(count(&s.train, l), 80);
            assert_eq!(count(&s.validation, l), 10);
            assert_eq!(count(&s.test, l), 10);
        }
        assert_eq!(s.dropped, 0);
    }

    #[test]
    fn same_seed_same_split() {
        let a = stratified_split(balanced(50), SPLIT_RATIOS, 10, 3).unwrap();
        let b = stratified_split(balanced(50), SPLIT_RATIOS, 10, 3).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(balanced(50), SPLIT_RATIOS, 10, 4).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn too_few_blocks_is_error() {
        let v = vec![
            win("s", AttentionLabel::Left, 0, 0, 10),
            win("s", AttentionLabel::Left, 0, 10, 10),
        ];
        assert!(matches!(
            stratified_split(v, SPLIT_RATIOS, 10, 0),
            Err(Error::GroupTooSmall { blocks: 2, .. })
        ));
    }

    #[test]
    fn overlapping_windows_across_partitions_are_dropped() {
        // 50 % overlap, unit blocks: every boundary between partitions leaks
        let v: Vec<DecisionWindow> = (0..200)
            .map(|i| win("s", AttentionLabel::Left, 0, i * 5, 10))
            .collect();
        let s = stratified_split(v, SPLIT_RATIOS, 5, 1).unwrap();
        assert!(s.dropped > 0);
        for a in &s.train {
            for b in s.validation.iter().chain(&s.test) {
                assert!(a.end() <= b.origin.start || b.end() <= a.origin.start);
            }
        }
    }

    #[test]
    fn spans_merge_overlaps() {
        let v = vec![
            win("s", AttentionLabel::Left, 0, 0, 10),
            win("s", AttentionLabel::Left, 0, 5, 10),
            win("s", AttentionLabel::Left, 0, 30, 10),
        ];
        assert_eq!(
            merge_spans(&v),
            vec![("s".into(), 0, 0, 15), ("s".into(), 0, 30, 40)]
        );
    }
}
