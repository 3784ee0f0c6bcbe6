//! Gestalt pattern matching (Ratcliff/Obershelp).
//!
//! Two sequences are compared by locating their longest common contiguous
//! block, then recursing into the unmatched regions to the left and to the
//! right of it. The number of matched elements `K` gives the similarity
//! `2K / (|a| + |b|)`.
//!
//! Unlike `difflib.SequenceMatcher` there is no junk or popularity heuristic:
//! every element takes part in matching regardless of how often it occurs.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

/// A run of `length` equal elements starting at `a_start` in the first
/// sequence and `b_start` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatchBlock {
    pub a_start: usize,
    pub b_start: usize,
    pub length: usize,
}

impl MatchBlock {
    pub const fn new(a_start: usize, b_start: usize, length: usize) -> Self {
        Self {
            a_start,
            b_start,
            length,
        }
    }
}

impl From<(usize, usize, usize)> for MatchBlock {
    fn from((a, b, n): (usize, usize, usize)) -> Self {
        Self::new(a, b, n)
    }
}

/// Similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    /// `2 * matched / total`, with the empty/empty case defined as 1.
    pub fn from_counts(matched: usize, total_len: usize) -> Self {
        if total_len == 0 {
            return Self::ONE;
        }
        debug_assert!(2 * matched <= total_len);
        SimilarityScore((2 * matched) as f64 / total_len as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn meets(self, threshold: f64) -> bool {
        self.0 >= threshold
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Longest common contiguous block of `a[alo..ahi]` and `b[blo..bhi]`.
///
/// Ties go to the smallest `a_start`, then the smallest `b_start`. Returns a
/// zero-length block at `(alo, blo)` when nothing matches.
pub fn longest_match<T: PartialEq>(
    a: &[T],
    b: &[T],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> MatchBlock {
    let width = bhi.saturating_sub(blo);
    let mut best = MatchBlock::new(alo, blo, 0);
    if alo >= ahi || width == 0 {
        return best;
    }
    // run lengths ending at (i - 1, j) and (i, j), indexed by j - blo + 1
    let mut prev = vec![0usize; width + 1];
    let mut cur = vec![0usize; width + 1];
    for (i, ai) in a.iter().enumerate().take(ahi).skip(alo) {
        for (off, bj) in b[blo..bhi].iter().enumerate() {
            let k = if ai == bj { prev[off] + 1 } else { 0 };
            cur[off + 1] = k;
            // strict comparison keeps the earliest end in `a`, then in `b`
            if k > best.length {
                best = MatchBlock::new(i + 1 - k, blo + off + 1 - k, k);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// All matched blocks of `a` and `b`, ordered by position and closed by a
/// zero-length sentinel at `(|a|, |b|)`. Adjacent blocks are coalesced.
pub fn matching_blocks<T: PartialEq>(a: &[T], b: &[T]) -> Vec<MatchBlock> {
    let mut found = Vec::new();
    let mut pending = vec![(0, a.len(), 0, b.len())];
    while let Some((alo, ahi, blo, bhi)) = pending.pop() {
        let m = longest_match(a, b, alo, ahi, blo, bhi);
        if m.length == 0 {
            continue;
        }
        if alo < m.a_start && blo < m.b_start {
            pending.push((alo, m.a_start, blo, m.b_start));
        }
        let (a_end, b_end) = (m.a_start + m.length, m.b_start + m.length);
        if a_end < ahi && b_end < bhi {
            pending.push((a_end, ahi, b_end, bhi));
        }
        found.push(m);
    }
    found.sort_unstable_by_key(|m| m.a_start);

    let mut blocks: Vec<MatchBlock> = Vec::with_capacity(found.len() + 1);
    for m in found {
        match blocks.last_mut() {
            Some(last)
                if last.a_start + last.length == m.a_start
                    && last.b_start + last.length == m.b_start =>
            {
                last.length += m.length;
            }
            _ => blocks.push(m),
        }
    }
    blocks.push(MatchBlock::new(a.len(), b.len(), 0));
    blocks
}

/// Number of matched elements, the sum of all block lengths.
pub fn matched_count<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    matching_blocks(a, b).iter().map(|m| m.length).sum()
}

pub fn ratio_seq<T: PartialEq>(a: &[T], b: &[T]) -> SimilarityScore {
    SimilarityScore::from_counts(matched_count(a, b), a.len() + b.len())
}

/// Multiset-intersection bound on [`ratio_seq`]; never smaller than it.
pub fn ratio_upper_bound_seq<T: Eq + Hash>(a: &[T], b: &[T]) -> SimilarityScore {
    let mut avail: HashMap<&T, usize> = HashMap::new();
    for x in b {
        *avail.entry(x).or_default() += 1;
    }
    let mut common = 0;
    for x in a {
        if let Some(n) = avail.get_mut(x) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    SimilarityScore::from_counts(common, a.len() + b.len())
}

/// Matched blocks of two strings, compared character by character.
pub fn matching_blocks_str(s1: &str, s2: &str) -> Vec<MatchBlock> {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    matching_blocks(&a, &b)
}

/// Character-level similarity of two strings.
pub fn ratio(s1: &str, s2: &str) -> SimilarityScore {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    ratio_seq(&a, &b)
}

pub fn ratio_upper_bound(s1: &str, s2: &str) -> SimilarityScore {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    ratio_upper_bound_seq(&a, &b)
}
