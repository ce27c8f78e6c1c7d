//! Fact storage and the coarse-coded mention index.
//!
//! Each stored assertion is one fact object: an integer id, the term body,
//! and the set of microtheories in which it is believed. Structurally equal
//! bodies deduplicate to one fact across all microtheories.
//!
//! Every fact is indexed by the entities it mentions. A mention is an
//! (entity, position, fact) triple where the position is the top-level
//! argument slot the entity appears in; nested structure contributes all of
//! its atoms at the enclosing top-level position, and variables contribute
//! nothing. Mention keys are fixed-width big-endian byte strings, so all
//! mentions of an entity — and within them, of an (entity, position) pair —
//! sort adjacently and can be scanned with range cursors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::intern::{EntityId, Interner};
use crate::kv::OrderedKv;
use crate::mt::MtId;
use crate::term::Term;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactId(pub u64);

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Debug for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Argument positions above this clamp to the sentinel; arity that high
/// does not occur in practice.
pub const MAX_POSITION: u16 = 65_534;

pub const MENTION_KEY_LEN: usize = 18;

/// Big-endian (entity, position, fact) so byte order equals tuple order.
pub fn mention_key(entity: EntityId, position: u16, fact: FactId) -> [u8; MENTION_KEY_LEN] {
    let mut key = [0u8; MENTION_KEY_LEN];
    key[..8].copy_from_slice(&entity.0.to_be_bytes());
    key[8..10].copy_from_slice(&position.to_be_bytes());
    key[10..].copy_from_slice(&fact.0.to_be_bytes());
    key
}

pub fn decode_mention_key(key: &[u8]) -> (EntityId, u16, FactId) {
    debug_assert_eq!(key.len(), MENTION_KEY_LEN);
    let entity = u64::from_be_bytes(key[..8].try_into().unwrap());
    let position = u16::from_be_bytes(key[8..10].try_into().unwrap());
    let fact = u64::from_be_bytes(key[10..].try_into().unwrap());
    (EntityId(entity), position, FactId(fact))
}

fn clamp_position(position: usize) -> u16 {
    position.min(MAX_POSITION as usize) as u16
}

fn collect_atoms<'t>(t: &'t Term, out: &mut Vec<&'t Term>) {
    match t {
        Term::Variable(_) => {}
        Term::Compound(es) => {
            for e in es {
                collect_atoms(e, out);
            }
        }
        atom => out.push(atom),
    }
}

/// Walk a compound's top-level positions, resolving each mentioned atom to
/// an entity id. Returns `None` as soon as the resolver does.
pub fn mentions_with<F>(body: &Term, mut resolve: F) -> Option<BTreeSet<(EntityId, u16)>>
where
    F: FnMut(&Term) -> Option<EntityId>,
{
    let elements = body.elements()?;
    let mut out = BTreeSet::new();
    let mut atoms = Vec::new();
    for (position, element) in elements.iter().enumerate() {
        atoms.clear();
        collect_atoms(element, &mut atoms);
        let position = clamp_position(position);
        for atom in &atoms {
            out.insert((resolve(atom)?, position));
        }
    }
    Some(out)
}

/// The (entity, position) mention pairs of a fact body, interning any atom
/// not yet known. Used on the store path.
pub fn compute_mentions(interner: &mut Interner, body: &Term) -> BTreeSet<(EntityId, u16)> {
    mentions_with(body, |atom| Some(interner.intern(atom)))
        .expect("fact bodies are compounds")
}

/// Query-path variant: never allocates ids. Returns `None` when some atom in
/// the pattern was never interned — no stored fact can mention it, so a
/// query containing it has an empty candidate set.
pub fn lookup_mentions(interner: &Interner, pattern: &Term) -> Option<BTreeSet<(EntityId, u16)>> {
    mentions_with(pattern, |atom| interner.lookup(atom))
}

pub struct FactRecord {
    pub body: Term,
    pub mts: BTreeSet<MtId>,
    /// True for facts routed through a special handler; they carry no
    /// mention keys and are excluded from scans.
    pub special: bool,
}

#[derive(Default)]
pub struct FactStore {
    facts: BTreeMap<FactId, FactRecord>,
    by_body: HashMap<Term, FactId>,
    mentions: OrderedKv,
    /// Facts whose bodies contain variables (stored rules). Coarse coding
    /// cannot guarantee the candidate superset for them — a ground query
    /// argument has a mention the rule lacks — so retrieval unions this set
    /// into every candidate stream.
    var_facts: BTreeSet<FactId>,
    next_fact: u64,
}

impl FactStore {
    pub fn new() -> FactStore {
        FactStore {
            facts: BTreeMap::new(),
            by_body: HashMap::new(),
            mentions: OrderedKv::new(),
            var_facts: BTreeSet::new(),
            next_fact: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn next_fact_id(&self) -> u64 {
        self.next_fact
    }

    pub(crate) fn bump_next_fact(&mut self, at_least: u64) {
        self.next_fact = self.next_fact.max(at_least);
    }

    pub fn get(&self, id: FactId) -> Option<&FactRecord> {
        self.facts.get(&id)
    }

    pub fn id_of(&self, body: &Term) -> Option<FactId> {
        self.by_body.get(body).copied()
    }

    /// Facts in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (FactId, &FactRecord)> {
        self.facts.iter().map(|(id, rec)| (*id, rec))
    }

    /// Raw mention keys in index order, for audits.
    pub fn mention_keys(&self) -> impl Iterator<Item = (EntityId, u16, FactId)> + '_ {
        self.mentions.iter().map(|(k, _)| decode_mention_key(k))
    }

    /// Insert a fact body into a microtheory, deduplicating on the body.
    /// `mention_pairs` must be empty exactly when the fact is special.
    /// Returns (id, newly created fact, newly added membership).
    pub fn insert(
        &mut self,
        body: &Term,
        mt: MtId,
        mention_pairs: &BTreeSet<(EntityId, u16)>,
        special: bool,
        exact_id: Option<FactId>,
    ) -> (FactId, bool, bool) {
        if let Some(id) = self.by_body.get(body).copied() {
            let rec = self.facts.get_mut(&id).unwrap();
            let new_mt = rec.mts.insert(mt);
            return (id, false, new_mt);
        }
        let id = exact_id.unwrap_or(FactId(self.next_fact));
        self.next_fact = self.next_fact.max(id.0 + 1);
        self.by_body.insert(body.clone(), id);
        if !special && !body.variables().is_empty() {
            self.var_facts.insert(id);
        }
        self.facts.insert(
            id,
            FactRecord {
                body: body.clone(),
                mts: BTreeSet::from([mt]),
                special,
            },
        );
        for &(entity, position) in mention_pairs {
            self.mentions.insert(&mention_key(entity, position, id), b"");
        }
        (id, true, true)
    }

    /// Remove `mt` from the fact's membership set. When the set drains, the
    /// fact body and its mention keys are deleted and the body is returned
    /// so the caller can clean up derived state (direct indexes, edges).
    /// Returns `None` if the (fact, mt) pair is not stored.
    pub fn remove_membership(&mut self, id: FactId, mt: MtId) -> Option<Option<FactRecord>> {
        let rec = self.facts.get_mut(&id)?;
        if !rec.mts.remove(&mt) {
            return None;
        }
        if !rec.mts.is_empty() {
            return Some(None);
        }
        let rec = self.facts.remove(&id).unwrap();
        self.by_body.remove(&rec.body);
        self.var_facts.remove(&id);
        // Mention removal needs the interner to recompute the pairs; the
        // caller follows up with `remove_mentions`.
        Some(Some(rec))
    }

    /// Delete the mention keys of a fully removed fact.
    pub fn remove_mentions(&mut self, id: FactId, mention_pairs: &BTreeSet<(EntityId, u16)>) {
        for &(entity, position) in mention_pairs {
            self.mentions.remove(&mention_key(entity, position, id));
        }
    }

    /// The fact ids carrying mention (entity, position), ascending, via a
    /// range cursor over the 10-byte (entity, position) key prefix.
    pub fn bucket_iter(
        &self,
        entity: EntityId,
        position: u16,
    ) -> impl Iterator<Item = FactId> + '_ {
        let mut prefix = [0u8; 10];
        prefix[..8].copy_from_slice(&entity.0.to_be_bytes());
        prefix[8..].copy_from_slice(&position.to_be_bytes());
        self.mentions
            .scan_prefix_owned(prefix.to_vec())
            .map(|(k, _)| decode_mention_key(k).2)
    }

    /// Seekable cursor over one (entity, position) bucket, for leapfrog
    /// intersection.
    pub fn bucket_cursor(&self, entity: EntityId, position: u16) -> BucketCursor<'_> {
        BucketCursor {
            kv: &self.mentions,
            entity,
            position,
            state: CursorState::Unpositioned,
        }
    }

    /// All facts that mention an entity at any position: one contiguous
    /// range scan over the entity's key prefix, deduplicated.
    pub fn facts_mentioning(&self, entity: EntityId) -> BTreeSet<FactId> {
        let prefix = entity.0.to_be_bytes();
        self.mentions
            .scan_prefix(&prefix)
            .map(|(k, _)| decode_mention_key(k).2)
            .collect()
    }

    /// Size of one bucket (used to seed intersection from the smallest).
    pub fn bucket_len(&self, entity: EntityId, position: u16) -> usize {
        self.bucket_iter(entity, position).count()
    }

    /// Stored facts whose bodies contain variables, ascending.
    pub fn var_fact_ids(&self) -> impl Iterator<Item = FactId> + '_ {
        self.var_facts.iter().copied()
    }
}

enum CursorState {
    Unpositioned,
    At(FactId),
    Done,
}

/// Streaming cursor over a mention bucket with `seek` support. Seeks are
/// range lookups in the ordered index, so intersection gallops instead of
/// walking every key.
pub struct BucketCursor<'a> {
    kv: &'a OrderedKv,
    entity: EntityId,
    position: u16,
    state: CursorState,
}

impl BucketCursor<'_> {
    fn probe(&mut self, target: FactId) {
        let key = mention_key(self.entity, self.position, target);
        match self.kv.seek_ge(&key) {
            Some(found) if found[..10] == key[..10] => {
                self.state = CursorState::At(decode_mention_key(found).2);
            }
            _ => self.state = CursorState::Done,
        }
    }

    pub fn peek(&mut self) -> Option<FactId> {
        if matches!(self.state, CursorState::Unpositioned) {
            self.probe(FactId(0));
        }
        match self.state {
            CursorState::At(id) => Some(id),
            _ => None,
        }
    }

    /// Advance to the first id `>= target`.
    pub fn seek(&mut self, target: FactId) {
        match self.state {
            CursorState::Done => {}
            CursorState::At(cur) if cur >= target => {}
            _ => self.probe(target),
        }
    }

    /// Step past the current id.
    pub fn advance(&mut self) {
        if let Some(cur) = self.peek() {
            if cur.0 == u64::MAX {
                self.state = CursorState::Done;
            } else {
                self.probe(FactId(cur.0 + 1));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn mentions_of(src: &str) -> BTreeSet<(String, u16)> {
        let mut interner = Interner::new();
        let body = parse_term(src).unwrap();
        compute_mentions(&mut interner, &body)
            .into_iter()
            .map(|(e, p)| (interner.term_of(e).unwrap().canonical_print(), p))
            .collect()
    }

    #[test]
    fn coarse_coding_flattens_nested_structure() {
        let got = mentions_of("(foo (TheList A B))");
        let want: BTreeSet<(String, u16)> = [
            ("foo".into(), 0),
            ("TheList".into(), 1),
            ("A".into(), 1),
            ("B".into(), 1),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);
        // Order inside a position does not matter.
        assert_eq!(mentions_of("(foo (TheList B A))"), want);
    }

    #[test]
    fn variables_produce_no_mentions() {
        assert_eq!(mentions_of("(foo ?x)"), BTreeSet::from([("foo".into(), 0)]));
    }

    #[test]
    fn numbers_and_strings_are_mentioned_atoms() {
        let got = mentions_of("(age Joe 41 \"years\")");
        assert!(got.contains(&("41".into(), 2)));
        assert!(got.contains(&("\"years\"".into(), 3)));
    }

    #[test]
    fn dedup_returns_existing_id_and_merges_mts() {
        let mut interner = Interner::new();
        let mut store = FactStore::new();
        let body = parse_term("(foo Bar)").unwrap();
        let pairs = compute_mentions(&mut interner, &body);
        let (id1, new1, _) = store.insert(&body, MtId(EntityId(100)), &pairs, false, None);
        let (id2, new2, newmt) = store.insert(&body, MtId(EntityId(101)), &pairs, false, None);
        assert_eq!(id1, id2);
        assert!(new1 && !new2 && newmt);
        assert_eq!(store.get(id1).unwrap().mts.len(), 2);
    }

    #[test]
    fn bucket_contains_exactly_the_mentioning_facts() {
        let mut interner = Interner::new();
        let mut store = FactStore::new();
        let mt = MtId(EntityId(100));
        for src in ["(foo Bar)", "(foo Baz)", "(foo Quux)", "(goo Bar)"] {
            let body = parse_term(src).unwrap();
            let pairs = compute_mentions(&mut interner, &body);
            store.insert(&body, mt, &pairs, false, None);
        }
        let foo = interner.lookup(&Term::sym("foo")).unwrap();
        let bar = interner.lookup(&Term::sym("Bar")).unwrap();
        assert_eq!(store.bucket_iter(foo, 0).count(), 3);
        let bar_pos1: Vec<FactId> = store.bucket_iter(bar, 1).collect();
        assert_eq!(bar_pos1.len(), 2);
        assert_eq!(store.facts_mentioning(bar).len(), 2);
        assert_eq!(store.bucket_iter(EntityId(9999), 0).count(), 0);
    }

    #[test]
    fn cursor_seeks_within_bucket() {
        let mut interner = Interner::new();
        let mut store = FactStore::new();
        let mt = MtId(EntityId(100));
        for src in ["(p A)", "(p B)", "(p C)", "(p D)"] {
            let body = parse_term(src).unwrap();
            let pairs = compute_mentions(&mut interner, &body);
            store.insert(&body, mt, &pairs, false, None);
        }
        let p = interner.lookup(&Term::sym("p")).unwrap();
        let mut cur = store.bucket_cursor(p, 0);
        assert_eq!(cur.peek(), Some(FactId(1)));
        cur.seek(FactId(3));
        assert_eq!(cur.peek(), Some(FactId(3)));
        cur.advance();
        assert_eq!(cur.peek(), Some(FactId(4)));
        cur.advance();
        assert_eq!(cur.peek(), None);
    }

    #[test]
    fn full_removal_clears_mentions() {
        let mut interner = Interner::new();
        let mut store = FactStore::new();
        let mt = MtId(EntityId(100));
        let body = parse_term("(foo Bar)").unwrap();
        let pairs = compute_mentions(&mut interner, &body);
        let (id, _, _) = store.insert(&body, mt, &pairs, false, None);
        let removed = store.remove_membership(id, mt).unwrap();
        assert!(removed.is_some());
        store.remove_mentions(id, &pairs);
        assert_eq!(store.mention_keys().count(), 0);
        assert_eq!(store.id_of(&body), None);
        // ids are not reused
        let (id2, _, _) = store.insert(&body, mt, &pairs, false, None);
        assert!(id2 > id);
    }

    #[test]
    fn mention_keys_sort_by_entity_then_position_then_fact() {
        let a = mention_key(EntityId(1), 2, FactId(3));
        let b = mention_key(EntityId(1), 2, FactId(4));
        let c = mention_key(EntityId(1), 3, FactId(1));
        let d = mention_key(EntityId(2), 0, FactId(1));
        assert!(a < b && b < c && c < d);
    }
}
