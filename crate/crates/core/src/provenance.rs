//! The epistemic layer: provenance events and the fact/event support tables.
//!
//! Every stored (fact, microtheory) pair is backed by one or more support
//! entries naming the provenance event that introduced it. The mapping is
//! bidirectional — facts to events and events to facts — both held in
//! ordered maps so either direction is one range scan. A support entry may
//! carry a meta event (the provenance of the provenance, e.g. the file a
//! conversation record was read from); chains are limited to two layers.
//!
//! Retraction cascades and `:update` supersession are driven from the KB
//! layer, which owns the fact store this cache must stay consistent with.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::intern::EntityId;
use crate::kv::OrderedKv;
use crate::mt::MtId;
use crate::store::FactId;
use crate::term::Term;

/// Events are conceptual entities; their id is the interned id of the
/// event's entity term.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub EntityId);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ev{}", self.0 .0)
    }
}

impl fmt::Debug for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn default_event_type() -> Term {
    Term::sym("InformationTransferEvent")
}

#[derive(Debug, Clone)]
pub struct ProvenanceEvent {
    pub id: EventId,
    /// The entity term the id interns, e.g. `(ProvenanceEventFn 3)` or a
    /// caller-supplied `:entity` term.
    pub entity: Term,
    /// Where the information came from: a file URL term, a user term, a
    /// week term.
    pub source: Term,
    /// Universal-time seconds (since 1900-01-01 UTC).
    pub timestamp: u64,
    pub event_type: Term,
    /// Present when this event is nested under another (depth is capped at
    /// two layers).
    pub meta_event: Option<EventId>,
    /// Supersession: when the event closes, older events with an equal
    /// source are retracted.
    pub update: bool,
}

fn support_key(fact: FactId, mt: MtId, event: EventId) -> [u8; 24] {
    let mut k = [0u8; 24];
    k[..8].copy_from_slice(&fact.0.to_be_bytes());
    k[8..16].copy_from_slice(&mt.0 .0.to_be_bytes());
    k[16..].copy_from_slice(&event.0 .0.to_be_bytes());
    k
}

fn rev_key(event: EventId, fact: FactId, mt: MtId) -> [u8; 24] {
    let mut k = [0u8; 24];
    k[..8].copy_from_slice(&event.0 .0.to_be_bytes());
    k[8..16].copy_from_slice(&fact.0.to_be_bytes());
    k[16..].copy_from_slice(&mt.0 .0.to_be_bytes());
    k
}

fn meta_value(meta: Option<EventId>) -> [u8; 8] {
    meta.map_or(0u64, |m| m.0 .0).to_be_bytes()
}

fn decode_meta(v: &[u8]) -> Option<EventId> {
    let raw = u64::from_be_bytes(v.try_into().unwrap());
    (raw != 0).then_some(EventId(EntityId(raw)))
}

fn decode_triple(k: &[u8]) -> (u64, u64, u64) {
    (
        u64::from_be_bytes(k[..8].try_into().unwrap()),
        u64::from_be_bytes(k[8..16].try_into().unwrap()),
        u64::from_be_bytes(k[16..].try_into().unwrap()),
    )
}

#[derive(Default)]
pub struct ProvenanceCache {
    events: BTreeMap<EventId, ProvenanceEvent>,
    by_source: HashMap<Term, BTreeSet<EventId>>,
    /// (fact, mt, event) -> meta event id (0 when absent).
    supports: OrderedKv,
    /// (event, fact, mt) -> meta event id.
    rev: OrderedKv,
    /// meta event -> support entries tagged with it.
    meta_index: HashMap<EventId, BTreeSet<(FactId, MtId, EventId)>>,
}

impl ProvenanceCache {
    pub fn new() -> ProvenanceCache {
        ProvenanceCache::default()
    }

    pub fn event(&self, id: EventId) -> Option<&ProvenanceEvent> {
        self.events.get(&id)
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Events in ascending id order (creation order, since ids come from the
    /// interner counter).
    pub fn iter_events(&self) -> impl Iterator<Item = &ProvenanceEvent> {
        self.events.values()
    }

    /// Insert or overwrite an event record. Reuse of an existing id (a
    /// directive naming the same `:entity` again) keeps existing supports
    /// and refreshes the descriptive fields.
    pub fn put_event(&mut self, ev: ProvenanceEvent) {
        if let Some(old) = self.events.get(&ev.id) {
            if old.source != ev.source {
                if let Some(set) = self.by_source.get_mut(&old.source) {
                    set.remove(&ev.id);
                    if set.is_empty() {
                        self.by_source.remove(&old.source);
                    }
                }
            }
        }
        self.by_source
            .entry(ev.source.clone())
            .or_default()
            .insert(ev.id);
        self.events.insert(ev.id, ev);
    }

    /// Delete an event record. Support entries are the caller's business.
    pub fn remove_event(&mut self, id: EventId) -> Option<ProvenanceEvent> {
        let ev = self.events.remove(&id)?;
        if let Some(set) = self.by_source.get_mut(&ev.source) {
            set.remove(&id);
            if set.is_empty() {
                self.by_source.remove(&ev.source);
            }
        }
        self.meta_index.remove(&id);
        Some(ev)
    }

    /// Events whose source equals `source` under structural term equality.
    pub fn events_with_source(&self, source: &Term) -> Vec<EventId> {
        self.by_source
            .get(source)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Live events whose `meta_event` link points at `id`.
    pub fn events_with_meta(&self, id: EventId) -> Vec<EventId> {
        self.events
            .values()
            .filter(|e| e.meta_event == Some(id))
            .map(|e| e.id)
            .collect()
    }

    /// Record a support entry. Idempotent; returns true when newly added.
    pub fn add_support(
        &mut self,
        fact: FactId,
        mt: MtId,
        event: EventId,
        meta: Option<EventId>,
    ) -> bool {
        let new = self
            .supports
            .insert(&support_key(fact, mt, event), &meta_value(meta));
        self.rev.insert(&rev_key(event, fact, mt), &meta_value(meta));
        if new {
            if let Some(m) = meta {
                self.meta_index.entry(m).or_default().insert((fact, mt, event));
            }
        }
        new
    }

    /// Remove a support entry. Returns true when it was present.
    pub fn remove_support(&mut self, fact: FactId, mt: MtId, event: EventId) -> bool {
        let key = support_key(fact, mt, event);
        let meta = self.supports.get(&key).map(decode_meta);
        if !self.supports.remove(&key) {
            return false;
        }
        self.rev.remove(&rev_key(event, fact, mt));
        if let Some(Some(m)) = meta {
            if let Some(set) = self.meta_index.get_mut(&m) {
                set.remove(&(fact, mt, event));
                if set.is_empty() {
                    self.meta_index.remove(&m);
                }
            }
        }
        true
    }

    pub fn has_support_entry(&self, fact: FactId, mt: MtId, event: EventId) -> bool {
        self.supports.contains(&support_key(fact, mt, event))
    }

    /// The events currently supporting a contextualized fact, with their
    /// meta tags, via one range scan.
    pub fn supports_of(&self, fact: FactId, mt: MtId) -> Vec<(EventId, Option<EventId>)> {
        let mut prefix = Vec::with_capacity(16);
        prefix.extend_from_slice(&fact.0.to_be_bytes());
        prefix.extend_from_slice(&mt.0 .0.to_be_bytes());
        self.supports
            .scan_prefix_owned(prefix)
            .map(|(k, v)| {
                let (_, _, e) = decode_triple(k);
                (EventId(EntityId(e)), decode_meta(v))
            })
            .collect()
    }

    pub fn is_supported(&self, fact: FactId, mt: MtId) -> bool {
        let mut prefix = Vec::with_capacity(16);
        prefix.extend_from_slice(&fact.0.to_be_bytes());
        prefix.extend_from_slice(&mt.0 .0.to_be_bytes());
        self.supports.scan_prefix_owned(prefix).next().is_some()
    }

    /// All (fact, mt) pairs an event supports, via one range scan.
    pub fn event_supports(&self, event: EventId) -> Vec<(FactId, MtId, Option<EventId>)> {
        self.rev
            .scan_prefix_owned(event.0 .0.to_be_bytes().to_vec())
            .map(|(k, v)| {
                let (_, f, m) = decode_triple(k);
                (FactId(f), MtId(EntityId(m)), decode_meta(v))
            })
            .collect()
    }

    /// Support entries whose meta tag is `meta` (the two-layer cascade set).
    pub fn supports_with_meta(&self, meta: EventId) -> Vec<(FactId, MtId, EventId)> {
        self.meta_index
            .get(&meta)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Every support entry, in (fact, mt, event) order, for snapshots.
    pub fn iter_supports(
        &self,
    ) -> impl Iterator<Item = (FactId, MtId, EventId, Option<EventId>)> + '_ {
        self.supports.iter().map(|(k, v)| {
            let (f, m, e) = decode_triple(k);
            (FactId(f), MtId(EntityId(m)), EventId(EntityId(e)), decode_meta(v))
        })
    }

    pub fn support_count(&self) -> usize {
        self.supports.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(n: u64) -> EventId {
        EventId(EntityId(n))
    }

    fn mk_event(id: u64, source: &str, ts: u64) -> ProvenanceEvent {
        ProvenanceEvent {
            id: ev(id),
            entity: Term::app("ProvenanceEventFn", vec![Term::Integer(id as i64)]),
            source: Term::string(source),
            timestamp: ts,
            event_type: default_event_type(),
            meta_event: None,
            update: false,
        }
    }

    #[test]
    fn support_is_idempotent_and_bidirectional() {
        let mut cache = ProvenanceCache::new();
        cache.put_event(mk_event(10, "a", 1));
        let (f, m) = (FactId(1), MtId(EntityId(5)));
        assert!(cache.add_support(f, m, ev(10), None));
        assert!(!cache.add_support(f, m, ev(10), None));
        assert_eq!(cache.supports_of(f, m), vec![(ev(10), None)]);
        assert_eq!(cache.event_supports(ev(10)), vec![(f, m, None)]);
    }

    #[test]
    fn multiple_events_support_one_fact() {
        let mut cache = ProvenanceCache::new();
        cache.put_event(mk_event(10, "a", 1));
        cache.put_event(mk_event(11, "b", 2));
        let (f, m) = (FactId(1), MtId(EntityId(5)));
        cache.add_support(f, m, ev(10), None);
        cache.add_support(f, m, ev(11), None);
        assert_eq!(cache.supports_of(f, m).len(), 2);
        assert!(cache.remove_support(f, m, ev(10)));
        assert!(cache.is_supported(f, m));
        assert!(cache.remove_support(f, m, ev(11)));
        assert!(!cache.is_supported(f, m));
        assert!(!cache.remove_support(f, m, ev(11)));
    }

    #[test]
    fn meta_index_tracks_tagged_supports() {
        let mut cache = ProvenanceCache::new();
        cache.put_event(mk_event(10, "file", 1));
        cache.put_event(mk_event(11, "conv", 2));
        let (f, m) = (FactId(1), MtId(EntityId(5)));
        cache.add_support(f, m, ev(11), Some(ev(10)));
        assert_eq!(cache.supports_with_meta(ev(10)), vec![(f, m, ev(11))]);
        cache.remove_support(f, m, ev(11));
        assert!(cache.supports_with_meta(ev(10)).is_empty());
    }

    #[test]
    fn source_lookup_uses_structural_equality() {
        let mut cache = ProvenanceCache::new();
        cache.put_event(mk_event(10, "file:///kb/a.krf", 1));
        cache.put_event(mk_event(11, "file:///kb/a.krf", 2));
        cache.put_event(mk_event(12, "file:///kb/b.krf", 2));
        assert_eq!(
            cache.events_with_source(&Term::string("file:///kb/a.krf")),
            vec![ev(10), ev(11)]
        );
        cache.remove_event(ev(10));
        assert_eq!(
            cache.events_with_source(&Term::string("file:///kb/a.krf")),
            vec![ev(11)]
        );
    }
}
