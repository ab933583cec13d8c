//! Summary-level ROUGE-L.
//!
//! The longest common subsequence is computed with a bit-parallel recurrence
//! (Hyyrö's formulation): one bit per position of the shorter sequence, carried
//! across 64-bit words, so the cost is O(n * m / 64).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl RougeScore {
    pub const PERFECT: RougeScore = RougeScore {
        precision: 1.0,
        recall: 1.0,
        f: 1.0,
    };
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f: 0.0,
    };

    /// `(1 + β²)·P·R / (R + β²·P)`, zero when `P + R = 0`.
    pub fn from_pr(precision: f64, recall: f64, beta: f64) -> Self {
        let b2 = beta * beta;
        let f = if precision + recall == 0.0 {
            0.0
        } else {
            (1.0 + b2) * precision * recall / (recall + b2 * precision)
        };
        Self {
            precision,
            recall,
            f,
        }
    }
}

/// Length of the longest common subsequence of `a` and `b`.
pub fn lcs_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    if m == 0 {
        return 0;
    }
    let words = m.div_ceil(64);

    let mut match_masks: BTreeMap<&T, Vec<u64>> = BTreeMap::new();
    for (i, tok) in short.iter().enumerate() {
        match_masks.entry(tok).or_insert_with(|| vec![0; words])[i / 64] |= 1u64 << (i % 64);
    }

    // A zero bit in `v` marks a position that extends the current LCS.
    let mut v = vec![u64::MAX; words];
    for tok in long {
        let Some(mask) = match_masks.get(tok) else {
            continue;
        };
        let mut carry = false;
        for (vw, &mw) in v.iter_mut().zip(mask) {
            let u = *vw & mw;
            let (s1, c1) = vw.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            carry = c1 || c2;
            *vw = s2 | (*vw & !mw);
        }
    }

    let mut zeros = 0;
    for (w, &vw) in v.iter().enumerate() {
        let bits = (m - w * 64).min(64);
        let live = if bits == 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        };
        zeros += bits - (vw & live).count_ones() as usize;
    }
    zeros
}

/// ROUGE-L of `candidate` against `reference`.
///
/// Recall is `LCS / |reference|` and precision `LCS / |candidate|`. Two empty
/// sequences score 1, exactly one empty sequence scores 0.
pub fn rouge_l<T: Ord>(candidate: &[T], reference: &[T], beta: f64) -> RougeScore {
    match (candidate.is_empty(), reference.is_empty()) {
        (true, true) => return RougeScore::PERFECT,
        (true, false) | (false, true) => return RougeScore::ZERO,
        _ => {}
    }
    let lcs = lcs_len(candidate, reference) as f64;
    RougeScore::from_pr(
        lcs / candidate.len() as f64,
        lcs / reference.len() as f64,
        beta,
    )
}
