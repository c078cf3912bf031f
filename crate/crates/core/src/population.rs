//! Populations, group assignments and observed outcomes.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::multiset::{AttrMultiset, TreatmentSpace};

/// `n = m(K+1)` units, each with an attribute in `0..H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    ids: Vec<String>,
    attrs: Vec<usize>,
    k: usize,
    h: usize,
    attr_counts: Vec<usize>,
}

impl Population {
    /// Validates ids and attributes. `H` is inferred as `max(attr) + 1` and
    /// every attribute in `0..H` must occur.
    pub fn new(ids: Vec<String>, attrs: Vec<usize>, k: usize) -> Result<Self> {
        if ids.len() != attrs.len() {
            return Err(Error::Population(format!("{} ids but {} attributes", ids.len(), attrs.len())));
        }
        if k == 0 {
            return Err(Error::Population("groups need at least one peer (K >= 1)".into()));
        }
        let n = ids.len();
        if n == 0 {
            return Err(Error::Population("population is empty".into()));
        }
        if !n.is_multiple_of(k + 1) {
            return Err(Error::Indivisible { n, group_size: k + 1 });
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Population(format!("duplicate unit id `{id}`")));
            }
        }
        let h = attrs.iter().max().map_or(0, |&a| a + 1);
        let mut attr_counts = vec![0usize; h];
        for &a in &attrs {
            attr_counts[a] += 1;
        }
        if let Some(a) = attr_counts.iter().position(|&c| c == 0) {
            return Err(Error::Population(format!("attribute {} has no units", a + 1)));
        }
        Ok(Population { ids, attrs, k, h, attr_counts })
    }

    /// Population with ids `"0"`, `"1"`, ... in unit order.
    pub fn from_attrs(attrs: Vec<usize>, k: usize) -> Result<Self> {
        let ids = (0..attrs.len()).map(|i| i.to_string()).collect();
        Population::new(ids, attrs, k)
    }

    /// Population sorted by attribute with the given per-attribute sizes.
    pub fn from_counts(counts: &[usize], k: usize) -> Result<Self> {
        let attrs = counts.iter().enumerate().flat_map(|(a, &c)| core::iter::repeat_n(a, c)).collect();
        Population::from_attrs(attrs, k)
    }

    pub fn n(&self) -> usize {
        self.attrs.len()
    }

    /// Number of groups `m`.
    pub fn m(&self) -> usize {
        self.n() / (self.k + 1)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_attrs(&self) -> usize {
        self.h
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn attrs(&self) -> &[usize] {
        &self.attrs
    }

    pub fn attr(&self, unit: usize) -> usize {
        self.attrs[unit]
    }

    /// `n_[a]` for every attribute.
    pub fn attr_counts(&self) -> &[usize] {
        &self.attr_counts
    }

    /// `w_[a] = n_[a] / n`.
    pub fn weight(&self, a: usize) -> f64 {
        self.attr_counts[a] as f64 / self.n() as f64
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn space(&self) -> TreatmentSpace {
        TreatmentSpace::new(self.h, self.k)
    }
}

/// A partition of the population into `m` groups of `K + 1` units.
///
/// Groups are stored canonically: members ascending, groups ordered by their
/// smallest member. Two assignments are equal iff they are the same partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Assignment {
    /// Validates that `groups` partitions `0..n` into groups of `K + 1`.
    pub fn new(mut groups: Vec<Vec<usize>>, pop: &Population) -> Result<Self> {
        let n = pop.n();
        let size = pop.k() + 1;
        let mut group_of = vec![usize::MAX; n];
        for g in &mut groups {
            if g.len() != size {
                return Err(Error::Assignment(format!("group of size {} where {} was expected", g.len(), size)));
            }
            g.sort_unstable();
        }
        groups.sort_unstable_by_key(|g| g[0]);
        for (gi, g) in groups.iter().enumerate() {
            for &u in g {
                if u >= n {
                    return Err(Error::Assignment(format!("unit index {u} out of range")));
                }
                if group_of[u] != usize::MAX {
                    return Err(Error::Assignment(format!("unit `{}` appears in two groups", pop.ids()[u])));
                }
                group_of[u] = gi;
            }
        }
        if let Some(u) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::Assignment(format!("unit `{}` is in no group", pop.ids()[u])));
        }
        Ok(Assignment { groups, group_of })
    }

    /// Builds an assignment from a group label per unit.
    pub fn from_labels<L: Ord + Clone>(labels: &[L], pop: &Population) -> Result<Self> {
        if labels.len() != pop.n() {
            return Err(Error::Assignment(format!("{} group labels for {} units", labels.len(), pop.n())));
        }
        let mut by_label: alloc::collections::BTreeMap<L, Vec<usize>> = Default::default();
        for (u, l) in labels.iter().enumerate() {
            by_label.entry(l.clone()).or_default().push(u);
        }
        Assignment::new(by_label.into_values().collect(), pop)
    }

    pub(crate) fn from_canonical(groups: Vec<Vec<usize>>, n: usize) -> Self {
        let mut group_of = vec![0; n];
        for (gi, g) in groups.iter().enumerate() {
            for &u in g {
                group_of[u] = gi;
            }
        }
        Assignment { groups, group_of }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_index(&self, unit: usize) -> usize {
        self.group_of[unit]
    }

    /// Peer ids of `unit` (`Z_i`).
    pub fn peers(&self, unit: usize) -> impl Iterator<Item = usize> + '_ {
        self.groups[self.group_of[unit]].iter().copied().filter(move |&j| j != unit)
    }

    /// Attribute multiset of group `g`.
    pub fn group_set(&self, g: usize, pop: &Population) -> AttrMultiset {
        let labels: Vec<usize> = self.groups[g].iter().map(|&u| pop.attr(u)).collect();
        AttrMultiset::from_labels(pop.num_attrs(), &labels)
    }

    /// Peer attribute set `R_i` of `unit`.
    pub fn peer_set(&self, unit: usize, pop: &Population) -> AttrMultiset {
        let labels: Vec<usize> = self.peers(unit).map(|j| pop.attr(j)).collect();
        AttrMultiset::from_labels(pop.num_attrs(), &labels)
    }

    /// Treatment index of every unit in `space`.
    pub fn treatments(&self, pop: &Population, space: &TreatmentSpace) -> Vec<usize> {
        let h = pop.num_attrs();
        let mut out = vec![0; pop.n()];
        for g in &self.groups {
            let mut counts = vec![0u32; h];
            for &u in g {
                counts[pop.attr(u)] += 1;
            }
            for &u in g {
                let a = pop.attr(u);
                counts[a] -= 1;
                out[u] = space.treatment_index(&AttrMultiset::from_counts(counts.clone())).expect("peer set in space");
                counts[a] += 1;
            }
        }
        out
    }
}

/// `R_i` for the unit with id `unit_id`.
pub fn units_treatment(assignment: &Assignment, pop: &Population, unit_id: &str) -> Result<AttrMultiset> {
    let u = pop.unit_index(unit_id).ok_or_else(|| Error::UnknownUnit(unit_id.into()))?;
    Ok(assignment.peer_set(u, pop))
}

/// Composition vector `L`: number of groups with each attribute set in `G`.
pub fn composition_vector(assignment: &Assignment, pop: &Population) -> Vec<u64> {
    let space = pop.space();
    let mut l = vec![0u64; space.num_compositions()];
    for g in 0..assignment.groups().len() {
        let t = space.composition_index(&assignment.group_set(g, pop)).expect("group set in space");
        l[t] += 1;
    }
    l
}

/// Number of attribute-`a` units receiving treatment `r` implied by `l`:
/// `n_[a]r = Σ_t I(g_t = {a} ∪ r) l_t g_t(a)`.
pub fn n_ar_from_l(l: &[u64], a: usize, r: usize, space: &TreatmentSpace) -> Result<u64> {
    if l.len() != space.num_compositions() {
        return Err(Error::LengthMismatch { expected: space.num_compositions(), got: l.len() });
    }
    let t = space.group_of(a, r);
    Ok(l[t] * u64::from(space.composition(t).count(a)))
}

/// Matrix `n_[a]r` (rows: attributes, columns: treatments) implied by `l`.
pub fn cell_counts_from_l(l: &[u64], space: &TreatmentSpace) -> Result<Vec<Vec<u64>>> {
    (0..space.num_attrs())
        .map(|a| (0..space.num_treatments()).map(|r| n_ar_from_l(l, a, r, space)).collect())
        .collect()
}

/// Observed data: a population, the realized assignment and one outcome per unit.
#[derive(Debug, Clone)]
pub struct OutcomeData {
    pop: Population,
    assignment: Assignment,
    outcomes: Vec<f64>,
    space: TreatmentSpace,
    treatments: Vec<usize>,
}

impl OutcomeData {
    pub fn new(pop: Population, assignment: Assignment, outcomes: Vec<f64>) -> Result<Self> {
        if outcomes.len() != pop.n() {
            return Err(Error::Population(format!("{} outcomes for {} units", outcomes.len(), pop.n())));
        }
        if let Some(u) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::Population(format!("outcome of unit `{}` is not finite", pop.ids()[u])));
        }
        let space = pop.space();
        let treatments = assignment.treatments(&pop, &space);
        Ok(OutcomeData { pop, assignment, outcomes, space, treatments })
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn space(&self) -> &TreatmentSpace {
        &self.space
    }

    /// Treatment index `R_i` per unit.
    pub fn treatments(&self) -> &[usize] {
        &self.treatments
    }

    /// Same population and outcomes under a different assignment.
    pub fn with_assignment(&self, assignment: Assignment) -> OutcomeData {
        let treatments = assignment.treatments(&self.pop, &self.space);
        OutcomeData { pop: self.pop.clone(), assignment, outcomes: self.outcomes.clone(), space: self.space.clone(), treatments }
    }

    /// Same population and assignment with new outcomes.
    pub fn with_outcomes(&self, outcomes: Vec<f64>) -> Result<OutcomeData> {
        OutcomeData::new(self.pop.clone(), self.assignment.clone(), outcomes)
    }

    /// Observed cell sizes `n_[a]r`.
    pub fn cell_counts(&self) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; self.space.num_treatments()]; self.pop.num_attrs()];
        for (u, &r) in self.treatments.iter().enumerate() {
            out[self.pop.attr(u)][r] += 1;
        }
        out
    }

    /// Observed composition vector `L(Z)`.
    pub fn composition(&self) -> Vec<u64> {
        composition_vector(&self.assignment, &self.pop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn students() -> (Population, Assignment) {
        // 5 of type 1 (index 0), 3 of type 2 (index 1)
        let pop = Population::from_attrs(vec![0, 0, 0, 0, 0, 1, 1, 1], 3).unwrap();
        let asg = Assignment::new(vec![vec![0, 1, 2, 5], vec![3, 4, 6, 7]], &pop).unwrap();
        (pop, asg)
    }

    #[test]
    fn composition_of_student_example() {
        let (pop, asg) = students();
        assert_eq!(composition_vector(&asg, &pop), [0, 1, 1, 0, 0]);
        let space = pop.space();
        let l = [0, 1, 1, 0, 0];
        assert_eq!(n_ar_from_l(&l, 0, 1, &space).unwrap(), 3);
        assert_eq!(n_ar_from_l(&l, 0, 2, &space).unwrap(), 2);
        assert!(n_ar_from_l(&l[..3], 0, 1, &space).is_err());
    }

    #[test]
    fn roommate_treatment() {
        let (pop, asg) = students();
        // unit 6 is type 2 with roommates 3, 4 (type 1) and 7 (type 2)
        let r = units_treatment(&asg, &pop, "6").unwrap();
        assert_eq!(alloc::format!("{r}"), "1,1,2");
        assert!(units_treatment(&asg, &pop, "nope").is_err());
    }

    #[test]
    fn pairs_composition() {
        let pop = Population::from_attrs(vec![0, 0, 1, 1], 1).unwrap();
        let asg = Assignment::new(vec![vec![0, 1], vec![2, 3]], &pop).unwrap();
        assert_eq!(composition_vector(&asg, &pop), [1, 0, 1]);
        let r = units_treatment(&asg, &pop, "0").unwrap();
        assert_eq!(r.counts(), [1, 0]);
    }

    #[test]
    fn single_attribute_composition() {
        let pop = Population::from_attrs(vec![0; 6], 2).unwrap();
        let asg = Assignment::new(vec![vec![0, 3, 4], vec![1, 2, 5]], &pop).unwrap();
        assert_eq!(composition_vector(&asg, &pop), [2]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Population::from_attrs(vec![0, 1, 0], 1), Err(Error::Indivisible { .. })));
        assert!(Population::from_attrs(vec![0, 2, 0, 2], 1).is_err());
        assert!(Population::new(vec!["a".into(), "a".into()], vec![0, 0], 1).is_err());
        let pop = Population::from_attrs(vec![0, 0, 1, 1], 1).unwrap();
        assert!(Assignment::new(vec![vec![0, 1], vec![1, 2]], &pop).is_err());
        assert!(Assignment::new(vec![vec![0, 1, 2], vec![3]], &pop).is_err());
        assert!(Assignment::new(vec![vec![0, 1]], &pop).is_err());
    }

    #[test]
    fn canonical_groups() {
        let pop = Population::from_attrs(vec![0, 0, 1, 1], 1).unwrap();
        let a = Assignment::new(vec![vec![3, 1], vec![2, 0]], &pop).unwrap();
        let b = Assignment::from_labels(&["x", "y", "x", "y"], &pop).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.groups(), [vec![0, 2], vec![1, 3]]);
    }
}
