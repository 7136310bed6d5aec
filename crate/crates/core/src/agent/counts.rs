use std::collections::{BTreeSet, HashMap};

/// Visit counts per (chain prefix, action). The prefix is the ordered list of
/// actions chosen so far in the episode, which determines the state exactly
/// because the cascade kernel is deterministic.
#[derive(Clone, Debug)]
pub struct CountTable {
    n_actions: usize,
    counts: HashMap<Vec<usize>, Vec<u32>>,
}

impl CountTable {
    pub fn new(n_actions: usize) -> Self {
        Self { n_actions, counts: HashMap::new() }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, prefix: &[usize], action: usize) -> u32 {
        self.counts.get(prefix).map_or(0, |row| row[action])
    }

    pub fn row(&self, prefix: &[usize]) -> Option<&[u32]> {
        self.counts.get(prefix).map(Vec::as_slice)
    }

    pub fn increment(&mut self, prefix: &[usize], action: usize) {
        let n = self.n_actions;
        self.counts.entry(prefix.to_vec()).or_insert_with(|| vec![0; n])[action] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flatten().map(|&c| c as u64).sum()
    }
}

#[derive(Clone, Debug, Default)]
struct Node {
    available: BTreeSet<usize>,
    pruned: BTreeSet<usize>,
}

/// Records which continuations of each prefix have been fully explored so a
/// search never repeats a chain. Completing a chain prunes its last action at
/// its parent prefix; a prefix whose available actions are all pruned in turn
/// prunes its own last action one level up.
#[derive(Clone, Debug, Default)]
pub struct AvailabilityTree {
    nodes: HashMap<Vec<usize>, Node>,
}

impl AvailabilityTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the actions that exist at `prefix` (first visit wins; the
    /// kernel is deterministic so later visits see the same set).
    pub fn register(&mut self, prefix: &[usize], available: impl IntoIterator<Item = usize>) {
        self.nodes
            .entry(prefix.to_vec())
            .or_insert_with(|| Node { available: available.into_iter().collect(), pruned: BTreeSet::new() });
    }

    pub fn is_pruned(&self, prefix: &[usize], action: usize) -> bool {
        self.nodes.get(prefix).is_some_and(|n| n.pruned.contains(&action))
    }

    pub fn pruned(&self, prefix: &[usize]) -> Vec<usize> {
        self.nodes.get(prefix).map(|n| n.pruned.iter().copied().collect()).unwrap_or_default()
    }

    /// True when every registered action at `prefix` is pruned.
    pub fn is_exhausted(&self, prefix: &[usize]) -> bool {
        self.nodes.get(prefix).is_some_and(|n| n.available.is_subset(&n.pruned))
    }

    /// True once the whole chain space reachable from the empty prefix is used up.
    pub fn root_exhausted(&self) -> bool {
        self.is_exhausted(&[])
    }

    /// Marks the chain `actions` as explored and propagates upwards.
    pub fn complete_chain(&mut self, actions: &[usize]) {
        let mut depth = actions.len();
        while depth > 0 {
            let parent = &actions[..depth - 1];
            let node = self.nodes.entry(parent.to_vec()).or_default();
            node.pruned.insert(actions[depth - 1]);
            if !self.is_exhausted(parent) {
                break;
            }
            depth -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_keyed_by_ordered_prefix() {
        let mut c = CountTable::new(4);
        c.increment(&[1, 2], 3);
        c.increment(&[1, 2], 3);
        assert_eq!(c.get(&[1, 2], 3), 2);
        assert_eq!(c.get(&[2, 1], 3), 0);
        assert_eq!(c.get(&[], 0), 0);
        assert_eq!(c.total(), 2);
    }

    #[test]
    fn exhausting_children_prunes_parent_action() {
        let mut t = AvailabilityTree::new();
        t.register(&[], [0, 1]);
        t.register(&[0], [1]);
        t.complete_chain(&[0, 1]);
        assert!(t.is_pruned(&[0], 1));
        assert!(t.is_pruned(&[], 0));
        assert!(!t.root_exhausted());
        t.register(&[1], [0]);
        t.complete_chain(&[1, 0]);
        assert!(t.root_exhausted());
    }

    #[test]
    fn partial_exhaustion_stops_propagation() {
        let mut t = AvailabilityTree::new();
        t.register(&[], [0, 1, 2]);
        t.register(&[2], [0, 1]);
        t.complete_chain(&[2, 0]);
        assert!(t.is_pruned(&[2], 0));
        assert!(!t.is_pruned(&[], 2));
        assert_eq!(t.pruned(&[]), Vec::<usize>::new());
    }
}
