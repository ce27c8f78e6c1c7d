//! The microtheory inheritance graph.
//!
//! `(genlMt child parent)` makes the parent's contents visible from the
//! child. The relation is transitive and monotonic; the graph is kept
//! acyclic by rejecting any edge that would close a cycle. Visibility
//! queries return the reflexive-transitive ancestor set, memoized per node
//! with invalidation of affected descendants on edge mutation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use parking_lot::Mutex;

use crate::intern::EntityId;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MtId(pub EntityId);

impl fmt::Display for MtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mt{}", self.0 .0)
    }
}

impl fmt::Debug for MtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum GraphError {
    Cycle,
    MissingEdge,
}

#[derive(Default)]
pub struct MtGraph {
    nodes: BTreeSet<MtId>,
    parents: HashMap<MtId, BTreeSet<MtId>>,
    children: HashMap<MtId, BTreeSet<MtId>>,
    memo: Mutex<HashMap<MtId, Arc<BTreeSet<MtId>>>>,
}

impl MtGraph {
    pub fn new() -> MtGraph {
        MtGraph::default()
    }

    pub fn ensure_node(&mut self, mt: MtId) {
        self.nodes.insert(mt);
    }

    pub fn contains_node(&self, mt: MtId) -> bool {
        self.nodes.contains(&mt)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, child: MtId, parent: MtId) -> bool {
        self.parents
            .get(&child)
            .is_some_and(|ps| ps.contains(&parent))
    }

    /// Edges in deterministic (child, parent) order.
    pub fn edges(&self) -> impl Iterator<Item = (MtId, MtId)> + '_ {
        self.parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (*c, *p)))
    }

    /// Would adding (child, parent) close a directed cycle? True for
    /// self-loops. An already-present edge never cycles.
    pub fn would_cycle(&self, child: MtId, parent: MtId) -> bool {
        if self.has_edge(child, parent) {
            return false;
        }
        child == parent || self.reach_up(parent).contains(&child)
    }

    /// Add an inheritance edge. Idempotent for an existing edge; rejects
    /// edges that would create a directed cycle, leaving the graph unchanged.
    /// Returns true if the edge was newly added.
    pub fn add_edge(&mut self, child: MtId, parent: MtId) -> Result<bool, GraphError> {
        if self.has_edge(child, parent) {
            return Ok(false);
        }
        // A cycle forms iff child is already visible from parent.
        if child == parent || self.reach_up(parent).contains(&child) {
            return Err(GraphError::Cycle);
        }
        self.nodes.insert(child);
        self.nodes.insert(parent);
        self.parents.entry(child).or_default().insert(parent);
        self.children.entry(parent).or_default().insert(child);
        self.invalidate_from(child);
        Ok(true)
    }

    pub fn remove_edge(&mut self, child: MtId, parent: MtId) -> Result<(), GraphError> {
        if !self.has_edge(child, parent) {
            return Err(GraphError::MissingEdge);
        }
        self.parents.get_mut(&child).unwrap().remove(&parent);
        self.children.get_mut(&parent).unwrap().remove(&child);
        self.invalidate_from(child);
        Ok(())
    }

    /// Reflexive-transitive ancestor set: the microtheories whose contents
    /// are visible from `context`. Unknown contexts are isolated nodes.
    pub fn visible(&self, context: MtId) -> Arc<BTreeSet<MtId>> {
        if let Some(cached) = self.memo.lock().get(&context) {
            return Arc::clone(cached);
        }
        let set = Arc::new(self.reach_up(context));
        self.memo.lock().insert(context, Arc::clone(&set));
        set
    }

    fn reach_up(&self, start: MtId) -> BTreeSet<MtId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(mt) = stack.pop() {
            if !seen.insert(mt) {
                continue;
            }
            if let Some(ps) = self.parents.get(&mt) {
                stack.extend(ps.iter().copied());
            }
        }
        seen
    }

    /// Drop memo entries for `origin` and every descendant that can see it.
    fn invalidate_from(&self, origin: MtId) {
        let mut doomed = BTreeSet::new();
        let mut stack = vec![origin];
        while let Some(mt) = stack.pop() {
            if !doomed.insert(mt) {
                continue;
            }
            if let Some(cs) = self.children.get(&mt) {
                stack.extend(cs.iter().copied());
            }
        }
        let mut memo = self.memo.lock();
        for mt in doomed {
            memo.remove(&mt);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mt(n: u64) -> MtId {
        MtId(EntityId(n))
    }

    #[test]
    fn direct_inheritance() {
        let mut g = MtGraph::new();
        g.add_edge(mt(1), mt(2)).unwrap();
        assert_eq!(*g.visible(mt(1)), BTreeSet::from([mt(1), mt(2)]));
        assert_eq!(*g.visible(mt(2)), BTreeSet::from([mt(2)]));
    }

    #[test]
    fn inheritance_is_transitive() {
        let mut g = MtGraph::new();
        g.add_edge(mt(1), mt(2)).unwrap();
        g.add_edge(mt(2), mt(3)).unwrap();
        assert_eq!(*g.visible(mt(1)), BTreeSet::from([mt(1), mt(2), mt(3)]));
    }

    #[test]
    fn cycle_is_rejected_and_graph_unchanged() {
        let mut g = MtGraph::new();
        g.add_edge(mt(1), mt(2)).unwrap();
        assert_eq!(g.add_edge(mt(2), mt(1)), Err(GraphError::Cycle));
        assert_eq!(g.add_edge(mt(1), mt(1)), Err(GraphError::Cycle));
        assert_eq!(*g.visible(mt(2)), BTreeSet::from([mt(2)]));
        assert_eq!(g.edges().count(), 1);
    }

    #[test]
    fn isolated_node_sees_itself() {
        let g = MtGraph::new();
        assert_eq!(*g.visible(mt(9)), BTreeSet::from([mt(9)]));
    }

    #[test]
    fn diamond_visibility() {
        let mut g = MtGraph::new();
        g.add_edge(mt(1), mt(2)).unwrap();
        g.add_edge(mt(1), mt(3)).unwrap();
        g.add_edge(mt(2), mt(4)).unwrap();
        g.add_edge(mt(3), mt(4)).unwrap();
        assert_eq!(*g.visible(mt(1)), BTreeSet::from([mt(1), mt(2), mt(3), mt(4)]));
        // removing one path leaves the other
        g.remove_edge(mt(1), mt(3)).unwrap();
        assert_eq!(*g.visible(mt(1)), BTreeSet::from([mt(1), mt(2), mt(4)]));
    }

    #[test]
    fn remove_and_readd_restores_visibility() {
        let mut g = MtGraph::new();
        g.add_edge(mt(1), mt(2)).unwrap();
        let before = g.visible(mt(1));
        g.remove_edge(mt(1), mt(2)).unwrap();
        assert_eq!(*g.visible(mt(1)), BTreeSet::from([mt(1)]));
        assert_eq!(g.remove_edge(mt(1), mt(2)), Err(GraphError::MissingEdge));
        g.add_edge(mt(1), mt(2)).unwrap();
        assert_eq!(g.visible(mt(1)), before);
    }

    #[test]
    fn duplicate_edge_is_idempotent() {
        let mut g = MtGraph::new();
        assert!(g.add_edge(mt(1), mt(2)).unwrap());
        assert!(!g.add_edge(mt(1), mt(2)).unwrap());
    }
}
