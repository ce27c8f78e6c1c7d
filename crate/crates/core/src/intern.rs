//! Conceptual-entity interning: bijective mapping between terms and integer ids.
//!
//! Symbols, integers, strings, and canonical compounds (non-atomic terms,
//! microtheory names, event entities) all share one id space. Ids start at 1,
//! are assigned in interning order, and are never reused.

use std::collections::HashMap;
use std::fmt;

use crate::term::Term;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Default)]
pub struct Interner {
    by_term: HashMap<Term, EntityId>,
    by_id: HashMap<EntityId, Term>,
    next: u64,
}

impl Interner {
    pub fn new() -> Interner {
        Interner {
            by_term: HashMap::new(),
            by_id: HashMap::new(),
            next: 1,
        }
    }

    /// Intern a term, assigning a fresh id on first sight. Injective: equal
    /// terms get equal ids, distinct terms distinct ids.
    pub fn intern(&mut self, t: &Term) -> EntityId {
        debug_assert!(
            t.variables().is_empty(),
            "variables are never interned: {}",
            t
        );
        if let Some(&id) = self.by_term.get(t) {
            return id;
        }
        let id = EntityId(self.next);
        self.next += 1;
        self.by_term.insert(t.clone(), id);
        self.by_id.insert(id, t.clone());
        id
    }

    /// Non-creating lookup, used on the query path so reads never allocate ids.
    pub fn lookup(&self, t: &Term) -> Option<EntityId> {
        self.by_term.get(t).copied()
    }

    pub fn term_of(&self, id: EntityId) -> Option<&Term> {
        self.by_id.get(&id)
    }

    pub fn len(&self) -> usize {
        self.by_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_term.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next
    }

    /// Entries in ascending id order, for snapshots.
    pub fn iter_ordered(&self) -> impl Iterator<Item = (EntityId, &Term)> {
        let mut ids: Vec<_> = self.by_id.keys().copied().collect();
        ids.sort_unstable();
        ids.into_iter().map(move |id| (id, &self.by_id[&id]))
    }

    /// Replay path: install an entry at an exact id. Idempotent for an
    /// identical (id, term) pair; inconsistent replays are a logic error.
    pub(crate) fn insert_exact(&mut self, id: EntityId, t: &Term) {
        if let Some(existing) = self.by_id.get(&id) {
            debug_assert_eq!(existing, t, "intern replay mismatch for {}", id);
            return;
        }
        debug_assert!(!self.by_term.contains_key(t), "intern replay duplicates {}", t);
        self.by_term.insert(t.clone(), id);
        self.by_id.insert(id, t.clone());
        self.next = self.next.max(id.0 + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    #[test]
    fn equal_terms_share_an_id() {
        let mut i = Interner::new();
        let a = i.intern(&parse_term("(FruitFn AppleTree)").unwrap());
        let b = i.intern(&parse_term("(FruitFn AppleTree)").unwrap());
        let c = i.intern(&parse_term("AppleTree").unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(i.term_of(a), Some(&parse_term("(FruitFn AppleTree)").unwrap()));
    }

    #[test]
    fn ids_are_positive_and_dense_from_one() {
        let mut i = Interner::new();
        assert_eq!(i.intern(&Term::sym("a")), EntityId(1));
        assert_eq!(i.intern(&Term::sym("b")), EntityId(2));
        assert_eq!(i.lookup(&Term::sym("c")), None);
    }

    #[test]
    fn atoms_of_each_kind_intern_distinctly() {
        let mut i = Interner::new();
        let s = i.intern(&Term::sym("1"));
        let n = i.intern(&Term::Integer(1));
        let q = i.intern(&Term::string("1"));
        assert!(s != n && n != q && s != q);
    }
}
