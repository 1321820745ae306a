//! Mutual k-nearest-neighbour matching in descriptor space.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::AlignError;
use crate::descriptors::DescriptorSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// Row in the source descriptor set.
    pub source: usize,
    /// Row in the target descriptor set.
    pub target: usize,
    pub distance: f64,
}

/// One-to-one pairs, sorted by source row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Swaps the roles of source and target.
    pub fn transposed(&self) -> CorrespondenceSet {
        let mut pairs: Vec<Correspondence> = self
            .pairs
            .iter()
            .map(|c| Correspondence {
                source: c.target,
                target: c.source,
                distance: c.distance,
            })
            .collect();
        pairs.sort_by_key(|c| c.source);
        CorrespondenceSet { pairs }
    }
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Rows `j` of `dist` (as `(d, j)`) closest to row `i`, at most `k`.
fn nearest(dists: impl Iterator<Item = (f64, usize)>, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = dists.collect();
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, by_distance);
        all.truncate(k);
    }
    all.into_iter().map(|(_, j)| j).collect()
}

/// Keeps `(i, j)` when `j` is among the `k` nearest target rows of `i` and
/// `i` among the `k` nearest source rows of `j`; when a row takes part in
/// several such pairs the closest wins. Rows flagged empty are skipped.
pub fn match_descriptors(src: &DescriptorSet, tgt: &DescriptorSet, k: usize) -> Result<CorrespondenceSet, AlignError> {
    if src.kind != tgt.kind {
        return Err(AlignError::KindMismatch(src.kind, tgt.kind));
    }
    if k == 0 {
        return Err(AlignError::BadParams("k must be at least 1"));
    }
    let rows_s: Vec<usize> = (0..src.len()).filter(|&i| !src.empty[i]).collect();
    let rows_t: Vec<usize> = (0..tgt.len()).filter(|&j| !tgt.empty[j]).collect();
    if rows_s.is_empty() || rows_t.is_empty() {
        return Err(AlignError::EmptyDescriptors);
    }
    let m = rows_t.len();
    let mut dist = vec![0.0; rows_s.len() * m];
    for (a, &i) in rows_s.iter().enumerate() {
        let x = src.row(i);
        for (b, &j) in rows_t.iter().enumerate() {
            dist[a * m + b] = x.iter().zip(tgt.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
        }
    }
    let fwd: Vec<Vec<usize>> = (0..rows_s.len())
        .map(|a| nearest((0..m).map(|b| (dist[a * m + b], b)), k))
        .collect();
    let bwd: Vec<Vec<usize>> = (0..m)
        .map(|b| nearest((0..rows_s.len()).map(|a| (dist[a * m + b], a)), k))
        .collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (a, list) in fwd.iter().enumerate() {
        for &b in list {
            if bwd[b].contains(&a) {
                candidates.push((dist[a * m + b], a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_s = vec![false; rows_s.len()];
    let mut used_t = vec![false; m];
    let mut pairs = Vec::new();
    for (d, a, b) in candidates {
        if used_s[a] || used_t[b] {
            continue;
        }
        used_s[a] = true;
        used_t[b] = true;
        pairs.push(Correspondence {
            source: rows_s[a],
            target: rows_t[b],
            distance: d.sqrt(),
        });
    }
    pairs.sort_by_key(|c| c.source);
    Ok(CorrespondenceSet { pairs })
}
