//! Regex pattern parser.
//!
//! Supported syntax: concatenation, alternation `|`, grouping `( )`,
//! character classes `[a-z]` / `[^...]`, the dot, escapes (`\d \w \s` and
//! their complements, control escapes, punctuation escapes), and the
//! quantifiers `* + ? {m} {m,} {m,n}`. Anchors, captures and backreferences
//! are rejected: the streaming engine scans every start position and cannot
//! backtrack.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::RegexError;

/// Largest count allowed in a bounded repetition. Guards the automaton
/// builder against pathological blowup before the state budget can.
pub const MAX_REPEAT: u32 = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    /// Matches the empty string.
    Empty,
    /// Matches one char from the set.
    Class(ClassSet),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Repeat { node: Box<Ast>, min: u32, max: Option<u32> },
}

/// Normalized set of inclusive scalar-value ranges: sorted, non-adjacent,
/// non-overlapping. Kept as `u32` so complements never have to materialize
/// chars inside the surrogate gap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSet {
    ranges: Vec<(u32, u32)>,
}

const MAX_SCALAR: u32 = 0x10FFFF;
const SURROGATE_LO: u32 = 0xD800;
const SURROGATE_HI: u32 = 0xDFFF;

impl ClassSet {
    pub fn from_ranges(mut ranges: Vec<(u32, u32)>) -> Self {
        ranges.retain(|(lo, hi)| lo <= hi);
        ranges.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ranges.len());
        for (lo, hi) in ranges {
            match merged.last_mut() {
                Some((_, phi)) if lo <= phi.saturating_add(1) => *phi = (*phi).max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        ClassSet { ranges: merged }
    }

    pub fn single(c: char) -> Self {
        ClassSet { ranges: alloc::vec![(c as u32, c as u32)] }
    }

    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    #[cfg(test)]
    pub fn contains(&self, c: char) -> bool {
        let v = c as u32;
        self.ranges.iter().any(|&(lo, hi)| lo <= v && v <= hi)
    }

    /// Complement within the valid scalar space (surrogates excluded).
    pub fn negate(&self) -> Self {
        let mut out = Vec::new();
        let mut next = 0u32;
        for &(lo, hi) in &self.ranges {
            if next < lo {
                out.push((next, lo - 1));
            }
            next = hi.saturating_add(1);
        }
        if next <= MAX_SCALAR {
            out.push((next, MAX_SCALAR));
        }
        // Punch out the surrogate gap.
        let mut cleaned = Vec::with_capacity(out.len() + 1);
        for (lo, hi) in out {
            if hi < SURROGATE_LO || lo > SURROGATE_HI {
                cleaned.push((lo, hi));
            } else {
                if lo < SURROGATE_LO {
                    cleaned.push((lo, SURROGATE_LO - 1));
                }
                if hi > SURROGATE_HI {
                    cleaned.push((SURROGATE_HI + 1, hi));
                }
            }
        }
        ClassSet { ranges: cleaned }
    }

    fn union(mut self, other: &ClassSet) -> Self {
        self.ranges.extend_from_slice(&other.ranges);
        ClassSet::from_ranges(self.ranges)
    }
}

fn digit_class() -> ClassSet {
    ClassSet::from_ranges(alloc::vec![('0' as u32, '9' as u32)])
}

fn word_class() -> ClassSet {
    ClassSet::from_ranges(alloc::vec![
        ('a' as u32, 'z' as u32),
        ('A' as u32, 'Z' as u32),
        ('0' as u32, '9' as u32),
        ('_' as u32, '_' as u32),
    ])
}

fn space_class() -> ClassSet {
    ClassSet::from_ranges(alloc::vec![
        (' ' as u32, ' ' as u32),
        ('\t' as u32, '\t' as u32),
        ('\n' as u32, '\n' as u32),
        ('\r' as u32, '\r' as u32),
        (0x0B, 0x0C), // vertical tab, form feed
    ])
}

fn dot_class() -> ClassSet {
    ClassSet::single('\n').negate()
}

pub fn parse(pattern: &str) -> Result<Ast, RegexError> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut p = Parser { chars: &chars, pos: 0 };
    let ast = p.alternation()?;
    if p.pos < p.chars.len() {
        // Only unbalanced ')' can stop the parser early.
        return Err(p.err("unmatched ')'"));
    }
    Ok(ast)
}

struct Parser<'a> {
    chars: &'a [char],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> RegexError {
        RegexError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn alternation(&mut self) -> Result<Ast, RegexError> {
        let mut branches = alloc::vec![self.concat()?];
        while self.peek() == Some('|') {
            self.bump();
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Ast::Alt(branches) })
    }

    fn concat(&mut self) -> Result<Ast, RegexError> {
        let mut parts = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            parts.push(self.repeat()?);
        }
        Ok(match parts.len() {
            0 => Ast::Empty,
            1 => parts.pop().unwrap(),
            _ => Ast::Concat(parts),
        })
    }

    fn repeat(&mut self) -> Result<Ast, RegexError> {
        let atom = self.atom()?;
        let quantified = match self.peek() {
            Some('*') => {
                self.bump();
                Ast::Repeat { node: Box::new(atom), min: 0, max: None }
            }
            Some('+') => {
                self.bump();
                Ast::Repeat { node: Box::new(atom), min: 1, max: None }
            }
            Some('?') => {
                self.bump();
                Ast::Repeat { node: Box::new(atom), min: 0, max: Some(1) }
            }
            Some('{') => {
                self.bump();
                let (min, max) = self.counted_repeat()?;
                Ast::Repeat { node: Box::new(atom), min, max }
            }
            _ => return Ok(atom),
        };
        // Stacked quantifiers (a*+, a{2}?) have possessive/lazy meanings we
        // do not implement; reject instead of silently reinterpreting.
        if matches!(self.peek(), Some('*') | Some('+') | Some('?') | Some('{')) {
            return Err(self.err("quantifier follows quantifier"));
        }
        Ok(quantified)
    }

    fn counted_repeat(&mut self) -> Result<(u32, Option<u32>), RegexError> {
        let min = self.number()?;
        let max = match self.peek() {
            Some(',') => {
                self.bump();
                if self.peek() == Some('}') {
                    None
                } else {
                    Some(self.number()?)
                }
            }
            _ => Some(min),
        };
        if self.bump() != Some('}') {
            return Err(self.err("malformed repetition, expected '}'"));
        }
        if let Some(m) = max {
            if m < min {
                return Err(self.err("repetition minimum exceeds maximum"));
            }
        }
        if min > MAX_REPEAT || max.unwrap_or(0) > MAX_REPEAT {
            return Err(self.err("repetition count too large"));
        }
        Ok((min, max))
    }

    fn number(&mut self) -> Result<u32, RegexError> {
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(self.err("expected a number in repetition"));
        }
        digits.parse().map_err(|_| self.err("repetition count too large"))
    }

    fn atom(&mut self) -> Result<Ast, RegexError> {
        match self.peek() {
            None => Err(self.err("pattern ended unexpectedly")),
            Some('(') => {
                self.bump();
                let inner = self.alternation()?;
                if self.bump() != Some(')') {
                    return Err(self.err("unclosed group"));
                }
                Ok(inner)
            }
            Some('[') => {
                self.bump();
                Ok(Ast::Class(self.class()?))
            }
            Some('.') => {
                self.bump();
                Ok(Ast::Class(dot_class()))
            }
            Some('\\') => {
                self.bump();
                Ok(Ast::Class(self.escape()?))
            }
            Some('^') | Some('$') => Err(self.err("anchors are not supported")),
            Some('*') | Some('+') | Some('?') => Err(self.err("nothing to repeat")),
            Some('{') => Err(self.err("repetition with nothing to repeat")),
            Some(c) => {
                self.bump();
                Ok(Ast::Class(ClassSet::single(c)))
            }
        }
    }

    /// Escape outside a class; consumes the char after the backslash.
    fn escape(&mut self) -> Result<ClassSet, RegexError> {
        let c = self.bump().ok_or_else(|| self.err("dangling escape"))?;
        Ok(match c {
            'd' => digit_class(),
            'D' => digit_class().negate(),
            'w' => word_class(),
            'W' => word_class().negate(),
            's' => space_class(),
            'S' => space_class().negate(),
            'n' => ClassSet::single('\n'),
            't' => ClassSet::single('\t'),
            'r' => ClassSet::single('\r'),
            c if !c.is_alphanumeric() => ClassSet::single(c),
            _ => return Err(self.err("unknown escape")),
        })
    }

    /// Body of a `[...]` class, after the opening bracket.
    fn class(&mut self) -> Result<ClassSet, RegexError> {
        let negated = if self.peek() == Some('^') {
            self.bump();
            true
        } else {
            false
        };
        let mut set = ClassSet { ranges: Vec::new() };
        let mut any = false;
        loop {
            match self.peek() {
                None => return Err(self.err("unclosed character class")),
                Some(']') if any => {
                    self.bump();
                    break;
                }
                Some(']') => return Err(self.err("empty character class")),
                _ => {}
            }
            let item = self.class_item()?;
            set = set.union(&item);
            any = true;
        }
        Ok(if negated { set.negate() } else { set })
    }

    fn class_item(&mut self) -> Result<ClassSet, RegexError> {
        let lo = self.class_char()?;
        // A class escape like \d cannot form a range endpoint.
        let lo = match lo {
            ClassAtom::Set(s) => return Ok(s),
            ClassAtom::Char(c) => c,
        };
        if self.peek() == Some('-') && self.chars.get(self.pos + 1) != Some(&']') {
            self.bump();
            let hi = match self.class_char()? {
                ClassAtom::Set(_) => return Err(self.err("class escape cannot end a range")),
                ClassAtom::Char(c) => c,
            };
            if (hi as u32) < (lo as u32) {
                return Err(self.err("reversed range in character class"));
            }
            Ok(ClassSet::from_ranges(alloc::vec![(lo as u32, hi as u32)]))
        } else {
            Ok(ClassSet::single(lo))
        }
    }

    fn class_char(&mut self) -> Result<ClassAtom, RegexError> {
        match self.bump() {
            None => Err(self.err("unclosed character class")),
            Some('\\') => {
                let c = self.bump().ok_or_else(|| self.err("dangling escape"))?;
                Ok(match c {
                    'd' => ClassAtom::Set(digit_class()),
                    'D' => ClassAtom::Set(digit_class().negate()),
                    'w' => ClassAtom::Set(word_class()),
                    'W' => ClassAtom::Set(word_class().negate()),
                    's' => ClassAtom::Set(space_class()),
                    'S' => ClassAtom::Set(space_class().negate()),
                    'n' => ClassAtom::Char('\n'),
                    't' => ClassAtom::Char('\t'),
                    'r' => ClassAtom::Char('\r'),
                    c if !c.is_alphanumeric() => ClassAtom::Char(c),
                    _ => return Err(self.err("unknown escape")),
                })
            }
            Some(c) => Ok(ClassAtom::Char(c)),
        }
    }
}

enum ClassAtom {
    Char(char),
    Set(ClassSet),
}
