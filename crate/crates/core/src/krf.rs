//! KRF file parsing: an ordered document of directives, assertions, and
//! macro forms, with source locations. Parsing performs no KB mutation.
//!
//! A file is a series of top-level s-expressions. `(in-microtheory M)` sets
//! the context for subsequent assertions; `(with-provenance :source S
//! :timestamp T ...)` sets the provenance event for subsequent assertions;
//! `(ist-Information M body)` asserts one fact in a specific microtheory;
//! registered macro heads become opaque macro forms; everything else is an
//! assertion.

use std::collections::BTreeSet;

use crate::error::{KbError, Result};
use crate::parse::{Loc, Reader};
use crate::term::Term;

pub const IN_MICROTHEORY: &str = "in-microtheory";
pub const WITH_PROVENANCE: &str = "with-provenance";
pub const IST_INFORMATION: &str = "ist-Information";

/// Head symbols treated as macro forms. The registry is the extension
/// point; only `defPlan` ships by default, and no expander is installed.
pub fn default_macro_heads() -> BTreeSet<String> {
    BTreeSet::from(["defPlan".to_string()])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithProvenance {
    pub source: Term,
    pub timestamp: Term,
    pub entity: Option<Term>,
    pub event_type: Option<Term>,
    pub meta: bool,
    pub update: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KrfItem {
    InMicrotheory(Term),
    WithProvenance(WithProvenance),
    Assertion(Term),
    IstInformation { mt: Term, body: Term },
    MacroForm { head: String, body: Term },
}

impl KrfItem {
    /// Reconstruct the surface s-expression for this item.
    pub fn to_term(&self) -> Term {
        match self {
            KrfItem::InMicrotheory(mt) => Term::app(IN_MICROTHEORY, vec![mt.clone()]),
            KrfItem::WithProvenance(wp) => {
                let mut args = vec![
                    Term::sym(":source"),
                    wp.source.clone(),
                    Term::sym(":timestamp"),
                    wp.timestamp.clone(),
                ];
                if let Some(entity) = &wp.entity {
                    args.push(Term::sym(":entity"));
                    args.push(entity.clone());
                }
                if let Some(ty) = &wp.event_type {
                    args.push(Term::sym(":type"));
                    args.push(ty.clone());
                }
                if wp.meta {
                    args.push(Term::sym(":meta"));
                    args.push(Term::sym("t"));
                }
                if wp.update {
                    args.push(Term::sym(":update"));
                    args.push(Term::sym("t"));
                }
                Term::app(WITH_PROVENANCE, args)
            }
            KrfItem::Assertion(t) => t.clone(),
            KrfItem::IstInformation { mt, body } => {
                Term::app(IST_INFORMATION, vec![mt.clone(), body.clone()])
            }
            KrfItem::MacroForm { body, .. } => body.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocatedItem {
    pub item: KrfItem,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone)]
pub struct KrfDocument {
    pub items: Vec<LocatedItem>,
    pub source_path: String,
    /// Universal-time seconds (since 1900-01-01 UTC), supplied by the caller.
    pub file_mtime: u64,
}

/// Classify one top-level s-expression. Pure; shared by the parser and
/// programmatic storage.
pub fn classify_assertion(t: &Term, macro_heads: &BTreeSet<String>) -> Result<KrfItem> {
    let elements = match t.elements() {
        Some(es) => es,
        None => return Err(KbError::NotCompound(t.clone())),
    };
    let head = match t.head_symbol() {
        Some(h) => h,
        None => return Ok(KrfItem::Assertion(t.clone())),
    };
    match head {
        IN_MICROTHEORY => {
            if elements.len() != 2 {
                return Err(KbError::MalformedDirective(format!(
                    "{} takes exactly one argument, got {}",
                    IN_MICROTHEORY,
                    elements.len() - 1
                )));
            }
            Ok(KrfItem::InMicrotheory(elements[1].clone()))
        }
        WITH_PROVENANCE => parse_with_provenance(&elements[1..]).map(KrfItem::WithProvenance),
        IST_INFORMATION => {
            if elements.len() != 3 {
                return Err(KbError::MalformedDirective(format!(
                    "{} takes exactly two arguments, got {}",
                    IST_INFORMATION,
                    elements.len() - 1
                )));
            }
            Ok(KrfItem::IstInformation {
                mt: elements[1].clone(),
                body: elements[2].clone(),
            })
        }
        h if macro_heads.contains(h) => Ok(KrfItem::MacroForm {
            head: h.to_string(),
            body: t.clone(),
        }),
        _ => Ok(KrfItem::Assertion(t.clone())),
    }
}

fn parse_bool(key: &str, value: &Term) -> Result<bool> {
    match value {
        Term::Symbol(s) if s == "t" || s == "true" => Ok(true),
        Term::Symbol(s) if s == "nil" || s == "false" => Ok(false),
        other => Err(KbError::MalformedDirective(format!(
            "{} expects t/nil or true/false, got {}",
            key, other
        ))),
    }
}

fn parse_with_provenance(args: &[Term]) -> Result<WithProvenance> {
    if args.len() % 2 != 0 {
        return Err(KbError::MalformedDirective(
            "with-provenance takes keyword/value pairs".into(),
        ));
    }
    let mut source = None;
    let mut timestamp = None;
    let mut entity = None;
    let mut event_type = None;
    let mut meta = false;
    let mut update = false;
    let mut seen = BTreeSet::new();
    for pair in args.chunks(2) {
        let key = match &pair[0] {
            Term::Symbol(s) if s.starts_with(':') => s.as_str(),
            other => {
                return Err(KbError::MalformedDirective(format!(
                    "expected a keyword, got {}",
                    other
                )))
            }
        };
        if !seen.insert(key.to_string()) {
            return Err(KbError::MalformedDirective(format!(
                "duplicate keyword {}",
                key
            )));
        }
        let value = &pair[1];
        match key {
            ":source" => source = Some(value.clone()),
            ":timestamp" => timestamp = Some(value.clone()),
            ":entity" => entity = Some(value.clone()),
            ":type" => event_type = Some(value.clone()),
            ":meta" => meta = parse_bool(key, value)?,
            ":update" => update = parse_bool(key, value)?,
            other => {
                return Err(KbError::MalformedDirective(format!(
                    "unknown with-provenance keyword {}",
                    other
                )))
            }
        }
    }
    let source = source.ok_or_else(|| {
        KbError::MalformedDirective("with-provenance requires :source".into())
    })?;
    let timestamp = timestamp.ok_or_else(|| {
        KbError::MalformedDirective("with-provenance requires :timestamp".into())
    })?;
    Ok(WithProvenance {
        source,
        timestamp,
        entity,
        event_type,
        meta,
        update,
    })
}

/// Parse a complete KRF file. Stops at the first error; the error carries a
/// 1-based (line, column).
pub fn parse_document(text: &str, source_path: &str, file_mtime: u64) -> Result<KrfDocument> {
    parse_document_with(text, source_path, file_mtime, &default_macro_heads())
}

pub fn parse_document_with(
    text: &str,
    source_path: &str,
    file_mtime: u64,
    macro_heads: &BTreeSet<String>,
) -> Result<KrfDocument> {
    let mut reader = Reader::new(text);
    let mut items = Vec::new();
    while !reader.at_eof() {
        let (term, loc) = reader.read_term()?;
        if !term.is_compound() {
            return Err(KbError::syntax(
                loc.line,
                loc.column,
                format!("expected a compound assertion or directive, got {}", term),
            ));
        }
        let item = classify_assertion(&term, macro_heads).map_err(|e| located(e, loc))?;
        items.push(LocatedItem {
            item,
            line: loc.line,
            column: loc.column,
        });
    }
    Ok(KrfDocument {
        items,
        source_path: source_path.to_string(),
        file_mtime,
    })
}

fn located(e: KbError, loc: Loc) -> KbError {
    match e {
        KbError::MalformedDirective(msg) => KbError::syntax(loc.line, loc.column, msg),
        other => other.at(loc.line, loc.column),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn doc(text: &str) -> KrfDocument {
        parse_document(text, "test.krf", 0).unwrap()
    }

    #[test]
    fn directive_scopes_parse_in_order() {
        let d = doc("(in-microtheory FactsAboutJoeMt)\n(likesType Joe (FruitFn AppleTree))");
        assert_eq!(d.items.len(), 2);
        assert_eq!(
            d.items[0].item,
            KrfItem::InMicrotheory(Term::sym("FactsAboutJoeMt"))
        );
        match &d.items[1].item {
            KrfItem::Assertion(t) => {
                assert_eq!(t.canonical_print(), "(likesType Joe (FruitFn AppleTree))")
            }
            other => panic!("expected assertion, got {:?}", other),
        }
        assert_eq!(d.items[1].line, 2);
    }

    #[test]
    fn with_provenance_keywords() {
        let d = doc(
            "(with-provenance\n  :source (MSTeamsUserFn \"<user_id>\")\n  :timestamp (UniversalTimeFn 3919440252)\n  :entity Discourse-3919440252-8397)",
        );
        match &d.items[0].item {
            KrfItem::WithProvenance(wp) => {
                assert_eq!(wp.source.canonical_print(), "(MSTeamsUserFn \"<user_id>\")");
                assert_eq!(wp.timestamp.canonical_print(), "(UniversalTimeFn 3919440252)");
                assert_eq!(
                    wp.entity.as_ref().unwrap().canonical_print(),
                    "Discourse-3919440252-8397"
                );
                assert!(!wp.meta && !wp.update);
                assert!(wp.event_type.is_none());
            }
            other => panic!("expected with-provenance, got {:?}", other),
        }
    }

    #[test]
    fn empty_file_yields_no_items() {
        assert!(doc("").items.is_empty());
        assert!(doc("; nothing but comments\n").items.is_empty());
    }

    #[test]
    fn ist_information_is_recognized_by_arity() {
        let d = doc("(ist-Information FactsAboutJoeMt (likesType Joe (FruitFn AppleTree)))");
        match &d.items[0].item {
            KrfItem::IstInformation { mt, body } => {
                assert_eq!(mt, &Term::sym("FactsAboutJoeMt"));
                assert_eq!(
                    body.canonical_print(),
                    "(likesType Joe (FruitFn AppleTree))"
                );
            }
            other => panic!("expected ist-Information, got {:?}", other),
        }
        assert!(parse_document("(ist-Information OnlyOneArg)", "t.krf", 0).is_err());
    }

    #[test]
    fn macro_heads_from_registry() {
        let d = doc("(defPlan (doThing ?x) :precondition (ready ?x))");
        match &d.items[0].item {
            KrfItem::MacroForm { head, .. } => assert_eq!(head, "defPlan"),
            other => panic!("expected macro form, got {:?}", other),
        }
        // Unregistered macro-looking heads are plain assertions.
        let d = doc("(defRule (r ?x))");
        assert!(matches!(d.items[0].item, KrfItem::Assertion(_)));
    }

    #[test]
    fn directive_errors_carry_location() {
        match parse_document("(foo Bar)\n(with-provenance :timestamp 1)", "t.krf", 0) {
            Err(KbError::Syntax { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains(":source"));
            }
            other => panic!("expected syntax error, got {:?}", other),
        }
        assert!(parse_document("(with-provenance :source a :timestamp 1 :frob 2)", "t", 0).is_err());
        assert!(parse_document("(with-provenance :source a :timestamp 1 :update maybe)", "t", 0)
            .is_err());
        assert!(parse_document("(in-microtheory A B)", "t", 0).is_err());
    }

    #[test]
    fn boolean_spellings() {
        for (spelling, expected) in [("t", true), ("true", true), ("nil", false), ("false", false)]
        {
            let text = format!("(with-provenance :source s :timestamp 1 :update {})", spelling);
            let d = doc(&text);
            match &d.items[0].item {
                KrfItem::WithProvenance(wp) => assert_eq!(wp.update, expected),
                other => panic!("unexpected {:?}", other),
            }
        }
    }

    #[test]
    fn item_locations_strictly_increase() {
        let d = doc("(a B)\n  (c D) (e F)\n(g H)");
        let locs: Vec<(u32, u32)> = d.items.iter().map(|i| (i.line, i.column)).collect();
        let mut sorted = locs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(locs.len(), 4);
        assert_eq!(locs, sorted);
    }

    #[test]
    fn reprint_reparse_round_trip() {
        let text = "(in-microtheory M1) ; context\n(foo Bar)\n(ist-Information M2 (baz Quux))\n(with-provenance :source \"s\" :timestamp 5 :update t)\n(foo (TheList A B))";
        let d1 = doc(text);
        let reprinted: Vec<String> = d1
            .items
            .iter()
            .map(|i| i.item.to_term().canonical_print())
            .collect();
        let d2 = doc(&reprinted.join("\n"));
        let items1: Vec<&KrfItem> = d1.items.iter().map(|i| &i.item).collect();
        let items2: Vec<&KrfItem> = d2.items.iter().map(|i| &i.item).collect();
        assert_eq!(items1, items2);
    }

    #[test]
    fn bare_atom_at_top_level_is_an_error() {
        assert!(parse_document("Cat", "t.krf", 0).is_err());
    }

    #[test]
    fn stops_at_first_error() {
        let err = parse_document("(ok A)\n(broken", "t.krf", 0).unwrap_err();
        match err {
            KbError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other),
        }
        let _ = parse_term("x"); // keep the import used
    }
}
