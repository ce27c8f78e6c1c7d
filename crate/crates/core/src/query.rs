//! Unification-based retrieval: decompose the pattern into mentions,
//! intersect buckets, unify candidates, filter by microtheory visibility.
//! Special and indexed predicates short-circuit this pipeline.

use std::sync::Arc;

use crate::error::{KbError, Result};
use crate::intern::EntityId;
use crate::kb::KbState;
use crate::mt::MtId;
use crate::provenance::EventId;
use crate::store::{lookup_mentions, BucketCursor, FactId};
use crate::term::{rename_apart, unify, Bindings, Term};

/// One retrieval result: the stored body (unrenamed) and the unifier that
/// matched it against the pattern. `fact` is `None` for synthesized results
/// from special handlers that have no backing fact object.
#[derive(Debug, Clone)]
pub struct AskResult {
    pub fact: Option<FactId>,
    pub body: Term,
    pub bindings: Bindings,
}

/// Seekable cursor over an ascending stream of fact ids.
pub trait IdCursor {
    fn peek(&mut self) -> Option<FactId>;
    /// Position at the first id `>= target`.
    fn seek(&mut self, target: FactId);
    fn advance(&mut self);
}

impl IdCursor for BucketCursor<'_> {
    fn peek(&mut self) -> Option<FactId> {
        BucketCursor::peek(self)
    }
    fn seek(&mut self, target: FactId) {
        BucketCursor::seek(self, target)
    }
    fn advance(&mut self) {
        BucketCursor::advance(self)
    }
}

/// Cursor over a sorted slice, for tests and materialized id lists.
pub struct SliceCursor<'a> {
    ids: &'a [FactId],
    pos: usize,
}

impl<'a> SliceCursor<'a> {
    /// `ids` must be strictly ascending.
    pub fn new(ids: &'a [FactId]) -> SliceCursor<'a> {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        SliceCursor { ids, pos: 0 }
    }
}

impl IdCursor for SliceCursor<'_> {
    fn peek(&mut self) -> Option<FactId> {
        self.ids.get(self.pos).copied()
    }
    fn seek(&mut self, target: FactId) {
        // Gallop: the remaining slice is sorted.
        let rest = &self.ids[self.pos..];
        self.pos += rest.partition_point(|&id| id < target);
    }
    fn advance(&mut self) {
        if self.pos < self.ids.len() {
            self.pos += 1;
        }
    }
}

/// Streaming intersection of ascending id streams (leapfrog advance): yields
/// exactly the ids present in every input, without materializing any input.
/// An empty input list yields nothing.
pub fn intersect_buckets<C: IdCursor>(cursors: Vec<C>) -> Leapfrog<C> {
    Leapfrog {
        done: cursors.is_empty(),
        cursors,
    }
}

pub struct Leapfrog<C> {
    cursors: Vec<C>,
    done: bool,
}

impl<C: IdCursor> Iterator for Leapfrog<C> {
    type Item = FactId;

    fn next(&mut self) -> Option<FactId> {
        if self.done {
            return None;
        }
        loop {
            let mut max = match self.cursors[0].peek() {
                Some(id) => id,
                None => {
                    self.done = true;
                    return None;
                }
            };
            // Raise every cursor to at least `max`, tracking the new frontier.
            let mut agreed = true;
            for c in self.cursors.iter_mut() {
                c.seek(max);
                match c.peek() {
                    None => {
                        self.done = true;
                        return None;
                    }
                    Some(v) if v > max => {
                        max = v;
                        agreed = false;
                    }
                    Some(_) => {}
                }
            }
            if !agreed {
                continue;
            }
            // Confirm agreement (earlier cursors may sit below a later raise).
            let mut all_equal = true;
            for c in self.cursors.iter_mut() {
                c.seek(max);
                if c.peek() != Some(max) {
                    all_equal = false;
                    break;
                }
            }
            if all_equal {
                self.cursors[0].advance();
                return Some(max);
            }
        }
    }
}

/// Custom storage and retrieval hooks for one predicate. Special facts
/// bypass the mentions map and answer only predefined pattern shapes.
///
/// Handlers are runtime configuration: they must be registered before a
/// persisted store is reopened so logged stores replay through the same
/// hook, and both hooks must be deterministic.
pub trait SpecialHandler: Send + Sync {
    /// The predicate symbol this handler owns.
    fn predicate(&self) -> &str;
    fn store(
        &self,
        state: &mut KbState,
        body: &Term,
        mt: MtId,
        event: EventId,
        meta: Option<EventId>,
    ) -> Result<FactId>;
    fn retrieve(
        &self,
        state: &KbState,
        pattern: &Term,
        context: Option<MtId>,
    ) -> Result<Vec<AskResult>>;
}

#[derive(Clone)]
pub(crate) enum HandlerKind {
    GenlMt,
    Provenance,
    Custom(Arc<dyn SpecialHandler>),
}

impl HandlerKind {
    pub(crate) fn name(&self) -> &str {
        match self {
            HandlerKind::GenlMt => "genlMt",
            HandlerKind::Provenance => "provenance",
            HandlerKind::Custom(h) => h.predicate(),
        }
    }
}

impl KbState {
    /// Execute a contextualized query.
    ///
    /// Pipeline: special handler if the predicate has one; otherwise a direct
    /// key lookup when the predicate is indexed and the key argument is
    /// ground; otherwise mention-bucket intersection. Candidates are checked
    /// for microtheory visibility and unified. Results are in ascending fact
    /// id order.
    pub fn ask(&self, pattern: &Term, context: &Term) -> Result<Vec<AskResult>> {
        self.ask_with(pattern, context, true)
    }

    /// `ask`, with the indexed-fact short circuit switchable so both routes
    /// can be compared on the same store.
    pub fn ask_with(
        &self,
        pattern: &Term,
        context: &Term,
        use_direct_index: bool,
    ) -> Result<Vec<AskResult>> {
        let elements = match pattern.elements() {
            Some(es) => es,
            None => return Err(KbError::NotCompound(pattern.clone())),
        };
        let context_id = self.interner.lookup(context).map(MtId);

        let predicate = match &elements[0] {
            Term::Variable(_) => None,
            functor => self.interner.lookup(functor),
        };

        if let Some(pid) = predicate {
            if let Some(handler) = self.handlers.get(&pid) {
                let handler = handler.clone();
                return self.dispatch_retrieve(&handler, pattern, context_id);
            }
            if use_direct_index {
                if let Some(&position) = self.indexes.get(&pid) {
                    if let Some(key) = elements.get(position as usize) {
                        if key.is_ground() {
                            return Ok(self.ask_keyed(pid, key, pattern, context_id));
                        }
                    }
                }
            }
        }

        let visible = match context_id {
            Some(mt) => self.graph.visible(mt),
            // An unknown context is an isolated node: nothing was ever
            // stored under it, so only special handlers could answer.
            None => return Ok(Vec::new()),
        };

        let mentions = match lookup_mentions(&self.interner, pattern) {
            // Some atom in the pattern was never interned, so no stored
            // fact mentions it and nothing can unify.
            None => return Ok(Vec::new()),
            Some(pairs) => pairs,
        };

        if mentions.is_empty() {
            if !self.allow_scan {
                return Err(KbError::ScanRefused);
            }
            let mut out = Vec::new();
            for (id, rec) in self.facts.iter() {
                if rec.special {
                    continue;
                }
                if let Some(r) = check_candidate(pattern, id, &rec.body, &rec.mts, &visible) {
                    out.push(r);
                }
            }
            return Ok(out);
        }

        let cursors: Vec<BucketCursor<'_>> = mentions
            .iter()
            .map(|&(entity, position)| self.facts.bucket_cursor(entity, position))
            .collect();
        // Stored bodies with variables can unify with a pattern without
        // carrying all of its mentions, so they join the candidate set
        // unconditionally.
        let mut ids: std::collections::BTreeSet<FactId> = intersect_buckets(cursors).collect();
        ids.extend(self.facts.var_fact_ids());
        let mut out = Vec::new();
        for id in ids {
            let rec = match self.facts.get(id) {
                Some(rec) => rec,
                None => continue,
            };
            if let Some(r) = check_candidate(pattern, id, &rec.body, &rec.mts, &visible) {
                out.push(r);
            }
        }
        Ok(out)
    }

    fn ask_keyed(
        &self,
        predicate: EntityId,
        key: &Term,
        pattern: &Term,
        context_id: Option<MtId>,
    ) -> Vec<AskResult> {
        let visible = match context_id {
            Some(mt) => self.graph.visible(mt),
            None => return Vec::new(),
        };
        let mut ids: std::collections::BTreeSet<FactId> = self
            .direct
            .get(&(predicate, key.clone()))
            .map(|set| set.iter().copied().collect())
            .unwrap_or_default();
        ids.extend(self.facts.var_fact_ids());
        let mut out = Vec::new();
        for id in ids {
            if let Some(rec) = self.facts.get(id) {
                if let Some(r) = check_candidate(pattern, id, &rec.body, &rec.mts, &visible) {
                    out.push(r);
                }
            }
        }
        out
    }

    pub(crate) fn dispatch_retrieve(
        &self,
        handler: &HandlerKind,
        pattern: &Term,
        context: Option<MtId>,
    ) -> Result<Vec<AskResult>> {
        match handler {
            HandlerKind::GenlMt => self.retrieve_genl_mt(pattern),
            HandlerKind::Provenance => self.retrieve_provenance(pattern, context),
            HandlerKind::Custom(h) => h.retrieve(self, pattern, context),
        }
    }

    /// genlMt edges live in the inheritance graph and are visible from every
    /// context. Any combination of ground and variable arguments works.
    fn retrieve_genl_mt(&self, pattern: &Term) -> Result<Vec<AskResult>> {
        let elements = pattern.elements().unwrap();
        if elements.len() != 3 {
            return Ok(Vec::new());
        }
        let resolve = |t: &Term| -> Option<Option<MtId>> {
            if t.is_ground() {
                match self.interner.lookup(t) {
                    Some(id) => Some(Some(MtId(id))),
                    None => None, // unknown entity: no edge can match
                }
            } else {
                Some(None)
            }
        };
        let child = match resolve(&elements[1]) {
            Some(c) => c,
            None => return Ok(Vec::new()),
        };
        let parent = match resolve(&elements[2]) {
            Some(p) => p,
            None => return Ok(Vec::new()),
        };
        let mut hits: Vec<(FactId, &Term)> = Vec::new();
        for ((c, p), fact) in &self.genl_facts {
            if child.is_some_and(|want| want != *c) || parent.is_some_and(|want| want != *p) {
                continue;
            }
            if let Some(rec) = self.facts.get(*fact) {
                hits.push((*fact, &rec.body));
            }
        }
        hits.sort_by_key(|(id, _)| *id);
        Ok(hits
            .into_iter()
            .filter_map(|(id, body)| {
                unify(pattern, body).map(|bindings| AskResult {
                    fact: Some(id),
                    body: body.clone(),
                    bindings,
                })
            })
            .collect())
    }

    /// `(provenance <fact-term> ?event)`: the fact term must be ground; the
    /// second argument unifies with the entity term of each supporting event
    /// visible from the query context.
    fn retrieve_provenance(
        &self,
        pattern: &Term,
        context: Option<MtId>,
    ) -> Result<Vec<AskResult>> {
        let elements = pattern.elements().unwrap();
        if elements.len() != 3 {
            return Err(KbError::UnsupportedPattern(format!(
                "provenance takes 2 arguments, got {}",
                elements.len() - 1
            )));
        }
        let fact_term = &elements[1];
        if !fact_term.is_ground() {
            return Err(KbError::UnsupportedPattern(
                "provenance requires a ground fact term".into(),
            ));
        }
        let context = match context {
            Some(mt) => mt,
            None => return Ok(Vec::new()),
        };
        let fact = match self.facts.id_of(fact_term) {
            Some(id) => id,
            None => return Ok(Vec::new()),
        };
        let visible = self.graph.visible(context);
        let rec = self.facts.get(fact).unwrap();
        let mut events: Vec<EventId> = Vec::new();
        for mt in rec.mts.intersection(&visible) {
            for (event, _) in self.prov.supports_of(fact, *mt) {
                if !events.contains(&event) {
                    events.push(event);
                }
            }
        }
        events.sort_unstable();
        let mut out = Vec::new();
        for event in events {
            let entity = match self.prov.event(event) {
                Some(ev) => ev.entity.clone(),
                None => continue,
            };
            let body = Term::app("provenance", vec![fact_term.clone(), entity]);
            if let Some(bindings) = unify(pattern, &body) {
                out.push(AskResult {
                    fact: None,
                    body,
                    bindings,
                });
            }
        }
        Ok(out)
    }
}

fn check_candidate(
    pattern: &Term,
    id: FactId,
    body: &Term,
    mts: &std::collections::BTreeSet<MtId>,
    visible: &std::collections::BTreeSet<MtId>,
) -> Option<AskResult> {
    if mts.intersection(visible).next().is_none() {
        return None;
    }
    let bindings = if body.variables().is_empty() {
        unify(pattern, body)?
    } else {
        unify(pattern, &rename_apart(body, id.0))?
    };
    Some(AskResult {
        fact: Some(id),
        body: body.clone(),
        bindings,
    })
}
