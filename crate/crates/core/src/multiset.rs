//! Attribute multisets and the canonical treatment / group-composition spaces.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// An unordered multiset of attributes, stored as a count per attribute.
///
/// Ordering is canonical: multisets compare as their sorted label sequences,
/// so `{1,1,2} < {1,2,2}`. For multisets of equal size this is the reverse of
/// the lexicographic order on count vectors.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AttrMultiset {
    counts: Vec<u32>,
}

impl AttrMultiset {
    /// Builds a multiset from per-attribute counts (`counts[a]` copies of `a`).
    pub fn from_counts(counts: Vec<u32>) -> Self {
        AttrMultiset { counts }
    }

    /// Builds a multiset over `h` attributes from a list of 0-based labels.
    pub fn from_labels(h: usize, labels: &[usize]) -> Self {
        let mut counts = vec![0u32; h];
        for &a in labels {
            counts[a] += 1;
        }
        AttrMultiset { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of attributes the multiset ranges over.
    pub fn num_attrs(&self) -> usize {
        self.counts.len()
    }

    pub fn size(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Multiplicity of attribute `a`.
    pub fn count(&self, a: usize) -> u32 {
        self.counts.get(a).copied().unwrap_or(0)
    }

    pub fn contains(&self, a: usize) -> bool {
        self.count(a) > 0
    }

    /// Multiset union with a single extra copy of `a`.
    pub fn with(&self, a: usize) -> Self {
        let mut counts = self.counts.clone();
        counts[a] += 1;
        AttrMultiset { counts }
    }

    /// Removes one copy of `a`, or `None` if `a` is absent.
    pub fn without(&self, a: usize) -> Option<Self> {
        if !self.contains(a) {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[a] -= 1;
        Some(AttrMultiset { counts })
    }

    /// Sorted 0-based labels.
    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| core::iter::repeat_n(a, c as usize))
    }
}

impl Ord for AttrMultiset {
    fn cmp(&self, other: &Self) -> Ordering {
        self.labels()
            .cmp(other.labels())
            .then_with(|| other.counts.cmp(&self.counts))
    }
}

impl PartialOrd for AttrMultiset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Renders as comma-separated 1-based labels, e.g. `1,1,2`.
impl fmt::Display for AttrMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.labels().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", a + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for AttrMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self)
    }
}

/// All size-`size` multisets over `h` attributes, in canonical order.
fn multisets(h: usize, size: usize) -> Vec<AttrMultiset> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; size];
    // combinations with replacement, labels non-decreasing
    loop {
        out.push(AttrMultiset::from_labels(h, &labels));
        let Some(pos) = labels.iter().rposition(|&x| x + 1 < h) else {
            break;
        };
        let next = labels[pos] + 1;
        for x in &mut labels[pos..] {
            *x = next;
        }
    }
    out
}

/// Possible peer attribute sets: every size-`k` multiset over `h` attributes.
pub fn enumerate_peer_sets(h: usize, k: usize) -> Vec<AttrMultiset> {
    multisets(h, k)
}

/// Possible group attribute sets: every size-`k + 1` multiset over `h` attributes.
pub fn enumerate_group_sets(h: usize, k: usize) -> Vec<AttrMultiset> {
    multisets(h, k + 1)
}

/// The canonical treatment space for `h` attributes and groups of `k + 1`.
///
/// Every vector indexed by treatment or by group composition in this crate
/// uses the orderings held here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentSpace {
    h: usize,
    k: usize,
    peer_sets: Vec<AttrMultiset>,
    group_sets: Vec<AttrMultiset>,
}

impl TreatmentSpace {
    pub fn new(h: usize, k: usize) -> Self {
        assert!(h >= 1 && k >= 1, "need at least one attribute and one peer");
        TreatmentSpace { h, k, peer_sets: enumerate_peer_sets(h, k), group_sets: enumerate_group_sets(h, k) }
    }

    pub fn num_attrs(&self) -> usize {
        self.h
    }

    /// Peers per unit.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn group_size(&self) -> usize {
        self.k + 1
    }

    pub fn peer_sets(&self) -> &[AttrMultiset] {
        &self.peer_sets
    }

    pub fn group_sets(&self) -> &[AttrMultiset] {
        &self.group_sets
    }

    /// `|R|`
    pub fn num_treatments(&self) -> usize {
        self.peer_sets.len()
    }

    /// `T = |G|`
    pub fn num_compositions(&self) -> usize {
        self.group_sets.len()
    }

    pub fn treatment(&self, r: usize) -> &AttrMultiset {
        &self.peer_sets[r]
    }

    pub fn composition(&self, t: usize) -> &AttrMultiset {
        &self.group_sets[t]
    }

    pub fn treatment_index(&self, r: &AttrMultiset) -> Option<usize> {
        self.peer_sets.binary_search(r).ok()
    }

    pub fn composition_index(&self, g: &AttrMultiset) -> Option<usize> {
        self.group_sets.binary_search(g).ok()
    }

    /// Composition index of `{a} ∪ r`.
    pub fn group_of(&self, a: usize, r: usize) -> usize {
        self.composition_index(&self.peer_sets[r].with(a)).expect("{a} ∪ r is always a valid composition")
    }

    /// Treatment index of `g \ {a}`, if `a ∈ g`.
    pub fn treatment_in(&self, t: usize, a: usize) -> Option<usize> {
        self.group_sets[t].without(a).and_then(|r| self.treatment_index(&r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_attrs_three_peers() {
        let r = enumerate_peer_sets(2, 3);
        let shown: Vec<_> = r.iter().map(|m| alloc::format!("{m}")).collect();
        assert_eq!(shown, ["1,1,1", "1,1,2", "1,2,2", "2,2,2"]);
        let g = enumerate_group_sets(2, 3);
        assert_eq!(g.len(), 5);
        assert_eq!(alloc::format!("{}", g[1]), "1,1,1,2");
    }

    #[test]
    fn single_attribute() {
        let r = enumerate_peer_sets(1, 5);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].count(0), 5);
        assert_eq!(enumerate_group_sets(1, 3).len(), 1);
    }

    #[test]
    fn brute_force_counts() {
        // count vectors summing to K, enumerated by nested brute force
        let mut brute = 0;
        for a in 0..=2u32 {
            for b in 0..=2u32 {
                for c in 0..=2u32 {
                    if a + b + c == 2 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(enumerate_peer_sets(3, 2).len(), brute);
        assert_eq!(brute, 6);
        assert_eq!(enumerate_group_sets(3, 1).len(), 6);
    }

    #[test]
    fn lengths_match_binomials() {
        for h in 1..=4 {
            for k in 1..=5 {
                let r = enumerate_peer_sets(h, k);
                let g = enumerate_group_sets(h, k);
                assert_eq!(r.len(), binom(k + h - 1, h - 1));
                assert_eq!(g.len(), binom(h + k, h - 1));
                assert!(r.windows(2).all(|w| w[0] < w[1]));
                assert!(g.windows(2).all(|w| w[0] < w[1]));
                assert!(r.iter().all(|m| m.size() == k));
                assert!(g.iter().all(|m| m.size() == k + 1));
            }
        }
    }

    #[test]
    fn union_and_lookup() {
        let s = TreatmentSpace::new(2, 3);
        let r = AttrMultiset::from_labels(2, &[0, 0, 1]);
        assert_eq!(s.treatment_index(&r), Some(1));
        assert_eq!(s.group_of(1, 1), 2); // {1,1,2} ∪ {2} = {1,1,2,2}
        assert_eq!(s.treatment_in(2, 0), Some(2));
        assert_eq!(s.treatment_in(0, 1), None);
        assert_eq!(AttrMultiset::from_labels(2, &[1, 0, 0]), r);
    }
}
