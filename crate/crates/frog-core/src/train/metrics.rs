//! Ranking and metric primitives: candidate ranking with deterministic
//! tie-breaking, HR@k, and NDCG@k (single relevant item per query).

use crate::error::{Error, Result};

/// Ranks the true candidate `v` against `negatives` for source user `u`
/// using `score`. Candidates are ordered by descending score, ties broken
/// by ascending user id; the returned rank is 1-based.
///
/// Caller guarantees `v` is not among the negatives and negatives are
/// non-adjacent to `u`.
pub fn rank_candidates<S>(score: &mut S, u: u32, v: u32, negatives: &[u32]) -> Result<usize>
where
    S: FnMut(u32, u32) -> Result<f64>,
{
    assert!(!negatives.contains(&v), "rank_candidates: positive listed as negative");
    let s_v = checked(score(u, v)?, u, v)?;
    let mut rank = 1;
    for &w in negatives {
        let s_w = checked(score(u, w)?, u, w)?;
        if s_w > s_v || (s_w == s_v && w < v) {
            rank += 1;
        }
    }
    Ok(rank)
}

fn checked(s: f64, u: u32, w: u32) -> Result<f64> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite(format!("score of pair ({u}, {w}) is {s}")))
    }
}

/// Fraction of ranks within the top k.
pub fn hit_rate_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput { op: "hit_rate_at_k" });
    }
    debug_assert!(ranks.iter().all(|&r| r >= 1), "ranks are 1-based");
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Mean of 1/log2(rank+1) over queries, zero outside the cutoff. With a
/// single relevant item per query the ideal DCG is 1, so this is already
/// normalized.
pub fn ndcg_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput { op: "ndcg_at_k" });
    }
    debug_assert!(ranks.iter().all(|&r| r >= 1), "ranks are 1-based");
    let total: f64 = ranks
        .iter()
        .map(|&r| if r <= k { 1.0 / ((r as f64) + 1.0).log2() } else { 0.0 })
        .sum();
    Ok(total / ranks.len() as f64)
}
