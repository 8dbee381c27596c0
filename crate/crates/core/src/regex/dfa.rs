//! Thompson NFA construction and subset-construction DFA.
//!
//! The DFA alphabet is partitioned into intervals cut at every class
//! boundary occurring in the pattern, so each state stores one transition
//! per interval. States are counted against a budget during construction;
//! exceeding it aborts with the count reached, which callers use both as a
//! hard error (software) and as an accelerability signal (partitioner).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::ast::Ast;
use crate::error::RegexError;

// Guards pathological patterns before subset construction; generous because
// NFA size is linear in (expanded) pattern size.
const MAX_NFA_STATES: usize = 1 << 16;

#[derive(Clone, Debug)]
enum NState {
    Class { ranges: Vec<(u32, u32)>, next: usize },
    Split { a: usize, b: usize },
    Accept,
}

struct Nfa {
    states: Vec<NState>,
    start: usize,
}

const UNPATCHED: usize = usize::MAX;

/// Dangling out-edge of a fragment: state index plus which branch to patch.
#[derive(Clone, Copy)]
enum Patch {
    Next(usize),
    SplitA(usize),
    SplitB(usize),
}

struct Builder {
    states: Vec<NState>,
}

impl Builder {
    fn push(&mut self, s: NState) -> Result<usize, RegexError> {
        if self.states.len() >= MAX_NFA_STATES {
            return Err(RegexError::TooComplex { states: MAX_NFA_STATES, budget: MAX_NFA_STATES });
        }
        self.states.push(s);
        Ok(self.states.len() - 1)
    }

    fn apply(&mut self, patch: Patch, target: usize) {
        match patch {
            Patch::Next(i) => match &mut self.states[i] {
                NState::Class { next, .. } => *next = target,
                _ => unreachable!(),
            },
            Patch::SplitA(i) => match &mut self.states[i] {
                NState::Split { a, .. } => *a = target,
                _ => unreachable!(),
            },
            Patch::SplitB(i) => match &mut self.states[i] {
                NState::Split { b, .. } => *b = target,
                _ => unreachable!(),
            },
        }
    }

    /// Returns (entry state, dangling outs).
    fn fragment(&mut self, ast: &Ast) -> Result<(usize, Vec<Patch>), RegexError> {
        match ast {
            Ast::Empty => {
                // One split whose both branches dangle to the same place.
                let s = self.push(NState::Split { a: UNPATCHED, b: UNPATCHED })?;
                Ok((s, alloc::vec![Patch::SplitA(s), Patch::SplitB(s)]))
            }
            Ast::Class(set) => {
                let s = self.push(NState::Class { ranges: set.ranges().to_vec(), next: UNPATCHED })?;
                Ok((s, alloc::vec![Patch::Next(s)]))
            }
            Ast::Concat(parts) => {
                debug_assert!(!parts.is_empty());
                let (entry, mut outs) = self.fragment(&parts[0])?;
                for part in &parts[1..] {
                    let (e2, o2) = self.fragment(part)?;
                    for p in outs {
                        self.apply(p, e2);
                    }
                    outs = o2;
                }
                Ok((entry, outs))
            }
            Ast::Alt(branches) => {
                debug_assert!(branches.len() >= 2);
                let mut outs = Vec::new();
                let mut entry = UNPATCHED;
                // Chain of splits, one per extra branch.
                let mut pending_split: Option<usize> = None;
                for (i, branch) in branches.iter().enumerate() {
                    let last = i + 1 == branches.len();
                    let (be, bo) = self.fragment(branch)?;
                    outs.extend(bo);
                    if last {
                        if let Some(s) = pending_split {
                            self.apply(Patch::SplitB(s), be);
                        } else {
                            entry = be;
                        }
                    } else {
                        let s = self.push(NState::Split { a: be, b: UNPATCHED })?;
                        if let Some(prev) = pending_split {
                            self.apply(Patch::SplitB(prev), s);
                        } else {
                            entry = s;
                        }
                        pending_split = Some(s);
                    }
                }
                Ok((entry, outs))
            }
            Ast::Repeat { node, min, max } => self.repeat(node, *min, *max),
        }
    }

    fn repeat(&mut self, node: &Ast, min: u32, max: Option<u32>) -> Result<(usize, Vec<Patch>), RegexError> {
        match max {
            None => {
                // min required copies, then a star.
                let star = |b: &mut Builder| -> Result<(usize, Vec<Patch>), RegexError> {
                    let s = b.push(NState::Split { a: UNPATCHED, b: UNPATCHED })?;
                    let (e, o) = b.fragment(node)?;
                    b.apply(Patch::SplitA(s), e);
                    for p in o {
                        b.apply(p, s);
                    }
                    Ok((s, alloc::vec![Patch::SplitB(s)]))
                };
                if min == 0 {
                    star(self)
                } else {
                    let mut seq = Vec::with_capacity(min as usize);
                    for _ in 0..min {
                        seq.push(self.fragment(node)?);
                    }
                    let tail = star(self)?;
                    seq.push(tail);
                    Ok(Self::chain(self, seq))
                }
            }
            Some(max) => {
                if max == 0 {
                    return self.fragment(&Ast::Empty);
                }
                let mut seq = Vec::with_capacity(max as usize);
                for _ in 0..min {
                    seq.push(self.fragment(node)?);
                }
                // Optional copies; each may be skipped straight to the end.
                let mut skip_outs: Vec<Patch> = Vec::new();
                for _ in min..max {
                    let s = self.push(NState::Split { a: UNPATCHED, b: UNPATCHED })?;
                    let (e, o) = self.fragment(node)?;
                    self.apply(Patch::SplitA(s), e);
                    skip_outs.push(Patch::SplitB(s));
                    seq.push((s, o));
                }
                let (entry, mut outs) = Self::chain(self, seq);
                outs.extend(skip_outs);
                Ok((entry, outs))
            }
        }
    }

    /// Concatenate prebuilt fragments.
    fn chain(builder: &mut Builder, mut seq: Vec<(usize, Vec<Patch>)>) -> (usize, Vec<Patch>) {
        debug_assert!(!seq.is_empty());
        let (entry, mut outs) = seq.remove(0);
        for (e, o) in seq {
            for p in outs {
                builder.apply(p, e);
            }
            outs = o;
        }
        (entry, outs)
    }
}

fn build_nfa(ast: &Ast) -> Result<Nfa, RegexError> {
    let mut b = Builder { states: Vec::new() };
    let (entry, outs) = b.fragment(ast)?;
    let accept = b.push(NState::Accept)?;
    for p in outs {
        b.apply(p, accept);
    }
    Ok(Nfa { states: b.states, start: entry })
}

/// Sentinel for "no transition" in the DFA table.
pub const DEAD: u32 = u32::MAX;

/// Deterministic automaton over an interval-partitioned alphabet.
#[derive(Clone, Debug)]
pub struct Dfa {
    /// Sorted interval boundaries; interval `i` covers `[bounds[i], bounds[i+1])`.
    bounds: Vec<u32>,
    /// `trans[state * intervals + i]` = next state or `DEAD`.
    trans: Vec<u32>,
    intervals: usize,
    accepting: Vec<bool>,
    /// False iff every transition out of the state is `DEAD`.
    can_extend: Vec<bool>,
    start: u32,
}

impl Dfa {
    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn state_count(&self) -> usize {
        self.accepting.len()
    }

    pub fn accepting(&self, s: u32) -> bool {
        self.accepting[s as usize]
    }

    /// True if some input could still extend a match from `s`.
    pub fn can_extend(&self, s: u32) -> bool {
        self.can_extend[s as usize]
    }

    pub fn step(&self, s: u32, c: char) -> Option<u32> {
        let v = c as u32;
        // partition_point gives the count of bounds ≤ v; interval index is
        // that minus one. v below the first bound falls outside.
        let idx = self.bounds.partition_point(|&b| b <= v);
        if idx == 0 || idx > self.intervals {
            return None;
        }
        match self.trans[s as usize * self.intervals + (idx - 1)] {
            DEAD => None,
            next => Some(next),
        }
    }
}

/// Compile `ast` to a DFA, failing once more than `budget` states exist.
pub fn build_dfa(ast: &Ast, budget: usize) -> Result<Dfa, RegexError> {
    let nfa = build_nfa(ast)?;
    let words = nfa.states.len().div_ceil(64);

    // Alphabet partition: cut at each range start and one past each end.
    let mut points: Vec<u32> = Vec::new();
    for st in &nfa.states {
        if let NState::Class { ranges, .. } = st {
            for &(lo, hi) in ranges {
                points.push(lo);
                points.push(hi + 1);
            }
        }
    }
    points.sort_unstable();
    points.dedup();
    let intervals = points.len().saturating_sub(1);

    let closure = |seed: &[usize], bits: &mut Vec<u64>| {
        bits.clear();
        bits.resize(words, 0);
        let mut stack: Vec<usize> = seed.to_vec();
        while let Some(i) = stack.pop() {
            if bits[i / 64] & (1 << (i % 64)) != 0 {
                continue;
            }
            bits[i / 64] |= 1 << (i % 64);
            if let NState::Split { a, b } = nfa.states[i] {
                stack.push(a);
                stack.push(b);
            }
        }
    };

    let is_accepting = |bits: &[u64]| {
        (0..nfa.states.len()).any(|i| {
            bits[i / 64] & (1 << (i % 64)) != 0 && matches!(nfa.states[i], NState::Accept)
        })
    };

    let mut start_bits = Vec::new();
    closure(&[nfa.start], &mut start_bits);

    let mut ids: BTreeMap<Vec<u64>, u32> = BTreeMap::new();
    let mut accepting = Vec::new();
    let mut trans: Vec<u32> = Vec::new();
    let mut queue: Vec<Vec<u64>> = Vec::new();

    ids.insert(start_bits.clone(), 0);
    accepting.push(is_accepting(&start_bits));
    trans.resize(intervals, DEAD);
    queue.push(start_bits);

    let mut qi = 0;
    let mut seed: Vec<usize> = Vec::new();
    let mut next_bits: Vec<u64> = Vec::new();
    while qi < queue.len() {
        let current = queue[qi].clone();
        let cur_id = qi as u32;
        qi += 1;
        for iv in 0..intervals {
            let lo = points[iv];
            seed.clear();
            for i in 0..nfa.states.len() {
                if current[i / 64] & (1 << (i % 64)) == 0 {
                    continue;
                }
                if let NState::Class { ranges, next } = &nfa.states[i] {
                    // Intervals never straddle a range boundary, so testing
                    // the interval start suffices.
                    if ranges.iter().any(|&(rlo, rhi)| rlo <= lo && lo <= rhi) {
                        seed.push(*next);
                    }
                }
            }
            if seed.is_empty() {
                continue;
            }
            closure(&seed, &mut next_bits);
            let next_id = match ids.get(&next_bits) {
                Some(&id) => id,
                None => {
                    let id = ids.len() as u32;
                    if ids.len() + 1 > budget {
                        return Err(RegexError::TooComplex { states: ids.len() + 1, budget });
                    }
                    ids.insert(next_bits.clone(), id);
                    accepting.push(is_accepting(&next_bits));
                    trans.resize(trans.len() + intervals, DEAD);
                    queue.push(next_bits.clone());
                    id
                }
            };
            trans[cur_id as usize * intervals + iv] = next_id;
        }
    }

    let can_extend = (0..accepting.len())
        .map(|s| trans[s * intervals..(s + 1) * intervals].iter().any(|&t| t != DEAD))
        .collect();

    Ok(Dfa { bounds: points, trans, intervals, accepting, can_extend, start: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::ast::parse;

    fn dfa(pattern: &str) -> Dfa {
        build_dfa(&parse(pattern).unwrap(), 4096).unwrap()
    }

    fn accepts(d: &Dfa, s: &str) -> bool {
        let mut state = d.start();
        for c in s.chars() {
            match d.step(state, c) {
                Some(next) => state = next,
                None => return false,
            }
        }
        d.accepting(state)
    }

    #[test]
    fn literal_concat_alt() {
        let d = dfa("ab|cd");
        assert!(accepts(&d, "ab"));
        assert!(accepts(&d, "cd"));
        assert!(!accepts(&d, "ad"));
        assert!(!accepts(&d, "a"));
    }

    #[test]
    fn quantifiers() {
        let d = dfa("a{2,4}");
        assert!(!accepts(&d, "a"));
        assert!(accepts(&d, "aa"));
        assert!(accepts(&d, "aaaa"));
        assert!(!accepts(&d, "aaaaa"));
        let d = dfa("ab*c?");
        assert!(accepts(&d, "a"));
        assert!(accepts(&d, "abbbc"));
        assert!(accepts(&d, "ac"));
        assert!(!accepts(&d, "abcb"));
    }

    #[test]
    fn classes_and_negation() {
        let d = dfa("[a-c]x[^0-9]");
        assert!(accepts(&d, "bx!"));
        assert!(!accepts(&d, "dx!"));
        assert!(!accepts(&d, "bx5"));
    }

    #[test]
    fn empty_pattern_accepts_empty_only() {
        let d = dfa("");
        assert!(accepts(&d, ""));
        assert!(!accepts(&d, "a"));
    }

    #[test]
    fn budget_enforced() {
        // (a|b)c{1,30} style patterns stay small; force blowup with a
        // counted repetition of a class.
        let err = build_dfa(&parse("[ab]{64}").unwrap(), 16).unwrap_err();
        match err {
            RegexError::TooComplex { states, budget } => {
                assert_eq!(budget, 16);
                assert!(states > 16);
            }
            other => panic!("unexpected error {:?}", other),
        }
        assert!(build_dfa(&parse("[ab]{64}").unwrap(), 4096).is_ok());
    }

    #[test]
    fn can_extend_false_only_at_dead_ends() {
        let d = dfa("ab");
        let s1 = d.step(d.start(), 'a').unwrap();
        let s2 = d.step(s1, 'b').unwrap();
        assert!(d.can_extend(d.start()));
        assert!(d.can_extend(s1));
        assert!(!d.can_extend(s2));
    }

    #[test]
    fn unicode_classes() {
        let d = dfa("[à-ü]+");
        assert!(accepts(&d, "éö"));
        assert!(!accepts(&d, "a"));
    }
}
