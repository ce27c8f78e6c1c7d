//! Low-level s-expression reader shared by the term grammar and the KRF
//! file grammar: `term := symbol | integer | string | variable | '(' term+ ')'`.
//! `;` comments to end of line are trivia. Locations are 1-based (line, column).

use crate::error::{KbError, Result};
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Loc {
    pub line: u32,
    pub column: u32,
}

pub(crate) struct Reader<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(src: &'a str) -> Reader<'a> {
        Reader {
            src,
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            column: self.column,
        }
    }

    fn err(&self, loc: Loc, message: impl Into<String>) -> KbError {
        KbError::syntax(loc.line, loc.column, message)
    }

    /// Skip whitespace and `;` comments. Returns true if any input remains.
    pub(crate) fn skip_trivia(&mut self) -> bool {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(_) => return true,
                None => return false,
            }
        }
    }

    pub(crate) fn at_eof(&mut self) -> bool {
        !self.skip_trivia()
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    /// Read one term. The caller must have established via `skip_trivia`
    /// that input remains.
    pub(crate) fn read_term(&mut self) -> Result<(Term, Loc)> {
        self.skip_trivia();
        let loc = self.loc();
        match self.peek() {
            None => Err(self.err(loc, "unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut elements = Vec::new();
                loop {
                    if !self.skip_trivia() {
                        return Err(self.err(loc, "unbalanced parentheses: missing `)`"));
                    }
                    if self.peek() == Some(')') {
                        self.bump();
                        break;
                    }
                    let (t, _) = self.read_term()?;
                    elements.push(t);
                }
                if elements.is_empty() {
                    return Err(self.err(loc, "empty compound `()` is not a term"));
                }
                Ok((Term::Compound(elements), loc))
            }
            Some(')') => Err(self.err(loc, "unbalanced parentheses: unexpected `)`")),
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.err(loc, "unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => {
                            let esc_loc = self.loc();
                            match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('r') => s.push('\r'),
                                Some(c) => {
                                    return Err(self.err(
                                        esc_loc,
                                        format!("bad string escape `\\{}`", c),
                                    ))
                                }
                                None => {
                                    return Err(self.err(loc, "unterminated string literal"))
                                }
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
                Ok((Term::Str(s), loc))
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '"' || c == ';' {
                        break;
                    }
                    self.bump();
                }
                let token = &self.src[start..self.pos];
                debug_assert!(!token.is_empty());
                self.classify_atom(token, loc)
            }
        }
    }

    fn classify_atom(&self, token: &str, loc: Loc) -> Result<(Term, Loc)> {
        if let Some(rest) = token.strip_prefix('?') {
            if rest.is_empty() {
                return Err(self.err(loc, "bare `?` is not a variable name"));
            }
            return Ok((Term::Variable(token.to_string()), loc));
        }
        let digits = token.strip_prefix('-').unwrap_or(token);
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            let n = token
                .parse::<i64>()
                .map_err(|_| self.err(loc, format!("integer literal out of range: {}", token)))?;
            return Ok((Term::Integer(n), loc));
        }
        Ok((Term::Symbol(token.to_string()), loc))
    }
}

/// Parse exactly one term; trailing trivia is allowed, trailing content is not.
pub fn parse_term(src: &str) -> Result<Term> {
    let mut r = Reader::new(src);
    if r.at_eof() {
        return Err(KbError::syntax(r.line, r.column, "expected a term"));
    }
    let (t, _) = r.read_term()?;
    if !r.at_eof() {
        return Err(KbError::syntax(
            r.line,
            r.column,
            "trailing content after term",
        ));
    }
    Ok(t)
}

/// Parse one term from the front of `src`, returning the unconsumed remainder.
pub fn parse_term_prefix(src: &str) -> Result<(Term, &str)> {
    let mut r = Reader::new(src);
    if r.at_eof() {
        return Err(KbError::syntax(r.line, r.column, "expected a term"));
    }
    let (t, _) = r.read_term()?;
    Ok((t, r.rest()))
}
