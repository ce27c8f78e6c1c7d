//! The symbolic term language shared by every other module.
//!
//! Terms are immutable values: atomic constants (symbols, integers, strings),
//! variables written with a `?` prefix, and compounds whose element 0 is the
//! functor/predicate position. Structural equality is total and coincides
//! with equality of canonical printing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Symbol(String),
    Integer(i64),
    Str(String),
    /// Name includes the leading `?`.
    Variable(String),
    /// Non-empty; element 0 is the functor position.
    Compound(Vec<Term>),
}

impl Term {
    pub fn sym(name: impl Into<String>) -> Term {
        Term::Symbol(name.into())
    }

    pub fn var(name: impl Into<String>) -> Term {
        let name = name.into();
        debug_assert!(name.starts_with('?'), "variable names carry the ? prefix");
        Term::Variable(name)
    }

    pub fn string(s: impl Into<String>) -> Term {
        Term::Str(s.into())
    }

    pub fn compound(elements: Vec<Term>) -> Term {
        debug_assert!(!elements.is_empty(), "compounds have at least one element");
        Term::Compound(elements)
    }

    /// Convenience constructor: `(head arg...)`.
    pub fn app(head: impl Into<String>, args: Vec<Term>) -> Term {
        let mut elements = vec![Term::sym(head)];
        elements.extend(args);
        Term::Compound(elements)
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_compound(&self) -> bool {
        matches!(self, Term::Compound(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Variable(_) => false,
            Term::Compound(es) => es.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn elements(&self) -> Option<&[Term]> {
        match self {
            Term::Compound(es) => Some(es),
            _ => None,
        }
    }

    /// The functor position (element 0) of a compound.
    pub fn functor(&self) -> Option<&Term> {
        self.elements().and_then(<[Term]>::first)
    }

    /// The functor's symbol name, when element 0 is a symbol.
    pub fn head_symbol(&self) -> Option<&str> {
        match self.functor() {
            Some(Term::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    /// The set of variable names occurring anywhere in the term.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Variable(v) => {
                out.insert(v.clone());
            }
            Term::Compound(es) => {
                for e in es {
                    e.collect_variables(out);
                }
            }
            _ => {}
        }
    }

    /// Canonical text form: `parse(canonical_print(t)) = t`, one space between
    /// siblings, strings quoted with `"` and backslash escapes.
    pub fn canonical_print(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) => f.write_str(s),
            Term::Integer(n) => write!(f, "{}", n),
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        '\r' => f.write_str("\\r")?,
                        other => write!(f, "{}", other)?,
                    }
                }
                f.write_str("\"")
            }
            Term::Variable(v) => f.write_str(v),
            Term::Compound(es) => {
                f.write_str("(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", e)?;
                }
                f.write_str(")")
            }
        }
    }
}

// Debug reuses the canonical form so test failures stay readable.
impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A substitution from variable names to terms, as produced by [`unify`].
///
/// Values are fully resolved: no value contains a variable that is itself
/// bound. Applying the bindings to the query pattern therefore yields the
/// matched term in one pass.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    map: BTreeMap<String, Term>,
}

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.map.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Substitute bound variables throughout `t`.
    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Variable(v) => match self.map.get(v) {
                Some(bound) => bound.clone(),
                None => t.clone(),
            },
            Term::Compound(es) => Term::Compound(es.iter().map(|e| self.apply(e)).collect()),
            other => other.clone(),
        }
    }

    /// Keep only bindings for the given variable names.
    pub fn restricted_to(&self, names: &BTreeSet<String>) -> Bindings {
        Bindings {
            map: self
                .map
                .iter()
                .filter(|(k, _)| names.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} = {}", k, v)?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn walk<'a>(mut t: &'a Term, map: &'a BTreeMap<String, Term>) -> &'a Term {
    while let Term::Variable(name) = t {
        match map.get(name) {
            Some(bound) => t = bound,
            None => break,
        }
    }
    t
}

fn occurs(name: &str, t: &Term, map: &BTreeMap<String, Term>) -> bool {
    match walk(t, map) {
        Term::Variable(v) => v == name,
        Term::Compound(es) => es.iter().any(|e| occurs(name, e, map)),
        _ => false,
    }
}

fn unify_into(a: &Term, b: &Term, map: &mut BTreeMap<String, Term>) -> bool {
    let a = walk(a, map).clone();
    let b = walk(b, map).clone();
    match (&a, &b) {
        (Term::Variable(x), Term::Variable(y)) if x == y => true,
        (Term::Variable(x), _) => {
            if occurs(x, &b, map) {
                false
            } else {
                map.insert(x.clone(), b);
                true
            }
        }
        (_, Term::Variable(y)) => {
            if occurs(y, &a, map) {
                false
            } else {
                map.insert(y.clone(), a);
                true
            }
        }
        (Term::Compound(xs), Term::Compound(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_into(x, y, map))
        }
        _ => a == b,
    }
}

fn resolve(t: &Term, map: &BTreeMap<String, Term>) -> Term {
    let t = walk(t, map);
    match t {
        Term::Compound(es) => Term::Compound(es.iter().map(|e| resolve(e, map)).collect()),
        other => other.clone(),
    }
}

/// Most-general unifier of two terms, with occurs check.
///
/// Failure is a value, not an error. Callers retrieving stored bodies that
/// may contain variables must rename them apart first (see [`rename_apart`]).
pub fn unify(pattern: &Term, fact_body: &Term) -> Option<Bindings> {
    let mut map = BTreeMap::new();
    if !unify_into(pattern, fact_body, &mut map) {
        return None;
    }
    let resolved = map
        .keys()
        .map(|k| (k.clone(), resolve(&Term::Variable(k.clone()), &map)))
        .collect();
    Some(Bindings { map: resolved })
}

/// Prefix reserved for variables renamed apart at retrieval time.
pub const RENAME_PREFIX: &str = "?__r";

/// Rename every variable in a stored body so it cannot collide with query
/// variables: `?v` in fact 42 becomes `?__r42_v`. Deterministic, so result
/// sets are stable across engines that follow the same convention.
pub fn rename_apart(t: &Term, fact_id: u64) -> Term {
    match t {
        Term::Variable(v) => Term::Variable(format!("{}{}_{}", RENAME_PREFIX, fact_id, &v[1..])),
        Term::Compound(es) => Term::Compound(es.iter().map(|e| rename_apart(e, fact_id)).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn canonical_print_nested_compound() {
        let term = Term::app(
            "likesType",
            vec![Term::sym("Joe"), Term::app("FruitFn", vec![Term::sym("AppleTree")])],
        );
        assert_eq!(term.canonical_print(), "(likesType Joe (FruitFn AppleTree))");
    }

    #[test]
    fn canonical_print_atoms() {
        assert_eq!(Term::sym("Cat").canonical_print(), "Cat");
        assert_eq!(Term::var("?x").canonical_print(), "?x");
        assert_eq!(Term::Integer(-42).canonical_print(), "-42");
        assert_eq!(Term::string("a \"b\"\n").canonical_print(), "\"a \\\"b\\\"\\n\"");
    }

    #[test]
    fn unify_binds_variable() {
        let b = unify(&t("(foo ?x)"), &t("(foo Bar)")).unwrap();
        assert_eq!(b.get("?x"), Some(&Term::sym("Bar")));
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn unify_ground_identity() {
        let b = unify(&t("(foo Bar)"), &t("(foo Bar)")).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn unify_fails_on_swapped_nested_args() {
        assert!(unify(&t("(foo (TheList A B))"), &t("(foo (TheList B A))")).is_none());
    }

    #[test]
    fn unify_applies_to_both_sides_equally() {
        let p = t("(r ?x (f ?x) ?y)");
        let q = t("(r A ?u (g ?u))");
        let b = unify(&p, &q).unwrap();
        assert_eq!(b.apply(&p), b.apply(&q));
    }

    #[test]
    fn unify_occurs_check() {
        assert!(unify(&t("(foo ?x)"), &t("(foo (bar ?x))")).is_none());
    }

    #[test]
    fn unify_variable_in_functor_position() {
        let b = unify(&t("(?p Joe)"), &t("(likesType Joe)")).unwrap();
        assert_eq!(b.get("?p"), Some(&Term::sym("likesType")));
    }

    #[test]
    fn unify_arity_mismatch_fails() {
        assert!(unify(&t("(foo ?x)"), &t("(foo Bar Baz)")).is_none());
    }

    #[test]
    fn variables_of_examples() {
        let vars = t("(foo ?x ?y)").variables();
        assert_eq!(vars.len(), 2);
        assert!(vars.contains("?x") && vars.contains("?y"));
        assert!(t("(foo Bar)").variables().is_empty());
        assert_eq!(t("(foo (bar ?x) ?x)").variables().len(), 1);
    }

    #[test]
    fn rename_apart_is_capture_free() {
        let body = t("(implies (p ?x) (q ?x ?y))");
        let renamed = rename_apart(&body, 7);
        assert_eq!(renamed.canonical_print(), "(implies (p ?__r7_x) (q ?__r7_x ?__r7_y))");
        assert!(renamed.variables().is_disjoint(&body.variables()));
    }
}
