//! Multi-indices with graded lexicographic ordering.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A multi-index (a_1, ..., a_n) of nonnegative integers.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Unit multi-index e_i.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// |a| = sum of entries.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&x| x as usize).sum()
    }

    /// a! = product of entry factorials, exact in u128 for the orders we use.
    pub fn factorial(&self) -> u128 {
        self.0
            .iter()
            .map(|&x| (1..=x as u128).product::<u128>())
            .product()
    }

    /// v^a for a direction vector v.
    pub fn monomial(&self, v: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(v)
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }

    /// Concatenate (a, b) -> joint index on the product space.
    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        MultiIndex(v)
    }

    /// Split into the first `l` and remaining entries.
    pub fn split(&self, l: usize) -> (MultiIndex, MultiIndex) {
        (
            MultiIndex(self.0[..l].to_vec()),
            MultiIndex(self.0[l..].to_vec()),
        )
    }

    /// All multi-indices of dimension `n` and degree exactly `d`, graded-lex sorted.
    pub fn of_degree(n: usize, d: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(cur: &mut Vec<u32>, pos: usize, left: usize, out: &mut Vec<MultiIndex>) {
            if pos == cur.len() - 1 {
                cur[pos] = left as u32;
                out.push(MultiIndex(cur.clone()));
                return;
            }
            // descending first entry gives lex order within the grade
            for v in (0..=left).rev() {
                cur[pos] = v as u32;
                rec(cur, pos + 1, left - v, out);
            }
        }
        if n == 0 {
            if d == 0 {
                out.push(MultiIndex(vec![]));
            }
            return out;
        }
        rec(&mut cur, 0, d, &mut out);
        out
    }

    /// All multi-indices of dimension `n` with degree <= `max_degree`, graded-lex sorted.
    pub fn up_to_degree(n: usize, max_degree: usize) -> Vec<MultiIndex> {
        (0..=max_degree)
            .flat_map(|d| Self::of_degree(n, d))
            .collect()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // lex with larger leading entries first, matching of_degree order
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Compositions of `k` into `j` positive parts (ordered).
pub fn compositions_into(k: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if j == 0 {
        if k == 0 {
            out.push(vec![]);
        }
        return out;
    }
    let mut cur = vec![0usize; j];
    fn rec(cur: &mut Vec<usize>, pos: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        let remaining = cur.len() - pos;
        if remaining == 1 {
            if left >= 1 {
                cur[pos] = left;
                out.push(cur.clone());
            }
            return;
        }
        for v in 1..=(left.saturating_sub(remaining - 1)) {
            cur[pos] = v;
            rec(cur, pos + 1, left - v, out);
        }
    }
    rec(&mut cur, 0, k, &mut out);
    out
}

/// All compositions of `k` into any number of positive parts (2^(k-1) of them).
pub fn all_compositions(k: usize) -> Vec<Vec<usize>> {
    (1..=k).flat_map(|j| compositions_into(k, j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let idx = MultiIndex::up_to_degree(2, 2);
        let expect: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(idx.iter().map(|m| m.0.clone()).collect::<Vec<_>>(), expect);
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(sorted, idx);
    }

    #[test]
    fn factorial_and_degree() {
        let a = MultiIndex(vec![3, 0, 2]);
        assert_eq!(a.degree(), 5);
        assert_eq!(a.factorial(), 12);
    }

    #[test]
    fn composition_counts() {
        assert_eq!(all_compositions(3).len(), 4);
        assert_eq!(all_compositions(5).len(), 16);
        assert_eq!(compositions_into(4, 2), vec![vec![1, 3], vec![2, 2], vec![3, 1]]);
    }
}
