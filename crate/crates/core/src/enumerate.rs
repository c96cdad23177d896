//! Outcome enumeration reduced by permutation symmetry.
//!
//! Baskets that share a key (true response rate, and at stage two also the
//! interim count) are exchangeable, so only one sorted representative per
//! multiset of counts is visited, weighted by the number of distinct
//! permutations it stands for.

use arrayvec::ArrayVec;

use crate::design::MAX_BASKETS;

/// One representative outcome vector and the number of distinct vectors it stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeClass {
    pub outcome: ArrayVec<u32, MAX_BASKETS>,
    pub multiplicity: u64,
}

/// Partition of basket indices into groups of equal key, in order of first appearance.
pub fn group_by_key<K: PartialEq>(keys: &[K]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut reps: Vec<&K> = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        match reps.iter().position(|r| *r == key) {
            Some(g) => groups[g].push(i),
            None => {
                reps.push(key);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Iterator over the outcome classes of `{0..=m}^k` under permutations within groups.
#[derive(Debug, Clone)]
pub struct OutcomeClasses {
    m: u32,
    k: usize,
    groups: Vec<Vec<usize>>,
    // Non-decreasing count sequence per group.
    state: Vec<Vec<u32>>,
    done: bool,
}

impl OutcomeClasses {
    /// `groups` must partition `0..k`.
    pub fn new(m: u32, groups: Vec<Vec<usize>>) -> Self {
        let k = groups.iter().map(Vec::len).sum();
        debug_assert!(k <= MAX_BASKETS);
        let state = groups.iter().map(|g| vec![0; g.len()]).collect();
        Self {
            m,
            k,
            groups,
            state,
            done: k == 0,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    fn current(&self) -> OutcomeClass {
        let mut outcome: ArrayVec<u32, MAX_BASKETS> = (0..self.k).map(|_| 0).collect();
        let mut multiplicity = 1u64;
        for (group, seq) in self.groups.iter().zip(&self.state) {
            for (&basket, &count) in group.iter().zip(seq) {
                outcome[basket] = count;
            }
            multiplicity *= arrangements(seq);
        }
        OutcomeClass {
            outcome,
            multiplicity,
        }
    }

    fn advance(&mut self) {
        for seq in self.state.iter_mut().rev() {
            if let Some(pos) = seq.iter().rposition(|&c| c < self.m) {
                let next = seq[pos] + 1;
                for c in &mut seq[pos..] {
                    *c = next;
                }
                return;
            }
            seq.iter_mut().for_each(|c| *c = 0);
        }
        self.done = true;
    }
}

impl Iterator for OutcomeClasses {
    type Item = OutcomeClass;

    fn next(&mut self) -> Option<OutcomeClass> {
        if self.done {
            return None;
        }
        let class = self.current();
        self.advance();
        Some(class)
    }
}

/// Number of distinct orderings of a sorted sequence: g! / prod(run lengths!).
fn arrangements(sorted: &[u32]) -> u64 {
    let mut total = factorial(sorted.len());
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total /= factorial(run);
            run = 1;
        }
    }
    total / factorial(run)
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Classes of `{0..=m}^k` for baskets grouped by equal key.
pub fn enumerate_outcomes<K: PartialEq>(m: u32, keys: &[K]) -> OutcomeClasses {
    OutcomeClasses::new(m, group_by_key(keys))
}

/// Every vector of `{0..=m}^k` individually, with multiplicity one.
pub fn enumerate_all(m: u32, k: usize) -> OutcomeClasses {
    OutcomeClasses::new(m, (0..k).map(|i| vec![i]).collect())
}
