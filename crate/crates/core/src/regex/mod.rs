//! DFA-based regex engine with leftmost-longest, non-overlapping match
//! semantics and no backtracking.
//!
//! Matching restarts at each candidate position and runs the DFA forward,
//! remembering the furthest accepting offset; on failure the scan resumes
//! one char later, on success at the match end. Empty matches are never
//! emitted. [`StreamMatcher`] implements the same decision procedure
//! incrementally over a char-at-a-time feed so a pipeline stage can match
//! while the document streams past; equivalence with the batch scanner is
//! property-tested.

mod ast;
mod dfa;

pub use ast::MAX_REPEAT;

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::RegexError;
use crate::span::Span;
use dfa::Dfa;

/// State budget for patterns executed in software. Hardware-profile budgets
/// are narrower (see the partitioner's capability set); a pattern too big
/// even for this limit is a hard error rather than a placement decision.
pub const SOFTWARE_STATE_BUDGET: usize = 4096;

/// Syntax-check a pattern without building automata.
pub fn parse_pattern(pattern: &str) -> Result<(), RegexError> {
    ast::parse(pattern).map(|_| ())
}

#[derive(Clone, Debug)]
pub struct CompiledRegex {
    pattern: String,
    dfa: Dfa,
}

impl CompiledRegex {
    pub fn compile(pattern: &str, state_budget: usize) -> Result<Self, RegexError> {
        let ast = ast::parse(pattern)?;
        let dfa = dfa::build_dfa(&ast, state_budget)?;
        Ok(CompiledRegex { pattern: pattern.into(), dfa })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn state_count(&self) -> usize {
        self.dfa.state_count()
    }

    /// Scan a whole document. Matches are non-overlapping, strictly
    /// increasing in begin, and never empty.
    pub fn find_leftmost_longest(&self, chars: &[char]) -> Vec<Span> {
        let mut out = Vec::new();
        let n = chars.len();
        let mut i = 0usize;
        while i < n {
            let mut state = self.dfa.start();
            let mut last: Option<usize> = None;
            let mut j = i;
            while j < n {
                match self.dfa.step(state, chars[j]) {
                    None => break,
                    Some(s) => {
                        state = s;
                        j += 1;
                        if self.dfa.accepting(s) {
                            last = Some(j);
                        }
                    }
                }
            }
            match last {
                Some(end) => {
                    out.push(Span::new(i as u32, end as u32));
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }

    pub fn matcher(&self) -> StreamMatcher<'_> {
        StreamMatcher {
            dfa: &self.dfa,
            buf: VecDeque::new(),
            attempt_start: 0,
            cursor: 0,
            seen: 0,
            state: self.dfa.start(),
            last_accept: None,
            matches: VecDeque::new(),
            eof: false,
        }
    }
}

/// Incremental matcher over a char feed.
///
/// Keeps a replay buffer spanning the current attempt (`attempt_start` up to
/// the last char seen); a failed long attempt rewinds to `attempt_start + 1`
/// by re-driving the DFA over buffered chars, never by re-reading the
/// source. Completed matches queue in arrival order until popped.
pub struct StreamMatcher<'re> {
    dfa: &'re Dfa,
    buf: VecDeque<char>,
    /// Document offset of the current attempt's first char (= `buf` front).
    attempt_start: usize,
    /// Document offset of the next char the DFA will consume.
    cursor: usize,
    /// Total chars fed so far.
    seen: usize,
    state: u32,
    last_accept: Option<usize>,
    matches: VecDeque<Span>,
    eof: bool,
}

impl<'re> StreamMatcher<'re> {
    pub fn on_char(&mut self, c: char) {
        debug_assert!(!self.eof, "char after eof");
        self.buf.push_back(c);
        self.seen += 1;
        self.drive();
    }

    pub fn on_eof(&mut self) {
        self.eof = true;
        self.drive();
    }

    /// Next completed match, in increasing begin order.
    pub fn pop_match(&mut self) -> Option<Span> {
        self.matches.pop_front()
    }

    pub fn pending(&self) -> usize {
        self.matches.len()
    }

    fn drive(&mut self) {
        loop {
            if self.cursor == self.seen {
                if !self.eof {
                    return;
                }
                if self.attempt_start >= self.seen {
                    return;
                }
                self.finish_attempt();
                continue;
            }
            let c = self.buf[self.cursor - self.attempt_start];
            match self.dfa.step(self.state, c) {
                None => self.finish_attempt(),
                Some(s) => {
                    self.state = s;
                    self.cursor += 1;
                    if self.dfa.accepting(s) {
                        self.last_accept = Some(self.cursor);
                        // No input can extend the match further; emit now so
                        // streaming latency stays bounded. The batch scanner
                        // reaches the same span at the next (dead) step.
                        if !self.dfa.can_extend(s) {
                            self.matches.push_back(Span::new(
                                self.attempt_start as u32,
                                self.cursor as u32,
                            ));
                            self.restart_at(self.cursor);
                        }
                    }
                }
            }
        }
    }

    fn finish_attempt(&mut self) {
        match self.last_accept {
            Some(end) => {
                self.matches.push_back(Span::new(self.attempt_start as u32, end as u32));
                self.restart_at(end);
            }
            None => self.restart_at(self.attempt_start + 1),
        }
    }

    fn restart_at(&mut self, pos: usize) {
        for _ in self.attempt_start..pos.min(self.seen) {
            self.buf.pop_front();
        }
        self.attempt_start = pos;
        self.cursor = pos;
        self.state = self.dfa.start();
        self.last_accept = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compile(p: &str) -> CompiledRegex {
        CompiledRegex::compile(p, SOFTWARE_STATE_BUDGET).unwrap()
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn stream_scan(re: &CompiledRegex, text: &str) -> Vec<Span> {
        let mut m = re.matcher();
        let mut out = Vec::new();
        for c in text.chars() {
            m.on_char(c);
            while let Some(s) = m.pop_match() {
                out.push(s);
            }
        }
        m.on_eof();
        while let Some(s) = m.pop_match() {
            out.push(s);
        }
        out
    }

    #[test]
    fn leftmost_longest_nonoverlapping() {
        let re = compile("ab+");
        assert_eq!(
            re.find_leftmost_longest(&chars("xabby abz")),
            alloc::vec![Span::new(1, 4), Span::new(6, 8)]
        );
    }

    #[test]
    fn no_match_is_empty() {
        let re = compile("z+");
        assert!(re.find_leftmost_longest(&chars("aaaa")).is_empty());
    }

    #[test]
    fn phone_style_pattern() {
        let re = compile("[0-9]{3}-[0-9]{4}");
        assert_eq!(
            re.find_leftmost_longest(&chars("call 555-1234 now")),
            alloc::vec![Span::new(5, 13)]
        );
    }

    #[test]
    fn longest_wins_at_same_start() {
        let re = compile("a|ab");
        // DFA naturally prefers the longest at a position.
        assert_eq!(re.find_leftmost_longest(&chars("ab")), alloc::vec![Span::new(0, 2)]);
    }

    #[test]
    fn failed_long_attempt_rewinds_one_char() {
        // "ab" fails at position 0 of "aab" after consuming 'a'; the scan
        // must retry from position 1, not 2.
        let re = compile("ab");
        assert_eq!(re.find_leftmost_longest(&chars("aab")), alloc::vec![Span::new(1, 3)]);
    }

    #[test]
    fn empty_matches_never_emitted() {
        let re = compile("a*");
        assert_eq!(
            re.find_leftmost_longest(&chars("baa")),
            alloc::vec![Span::new(1, 3)]
        );
        let re = compile("()");
        assert!(re.find_leftmost_longest(&chars("ab")).is_empty());
    }

    #[test]
    fn stream_matches_batch_on_fixtures() {
        for (pat, text) in [
            ("ab+", "xabby abz"),
            ("a|ab", "abab aab b"),
            ("[0-9]{3}-[0-9]{4}", "call 555-1234 or 555-12 or 999-0000"),
            ("a*", "baa aaa"),
            ("(ab|ba)+", "ababa baba"),
            ("x.?y", "xy xay x\ny"),
            ("\\w+@\\w+", "mail me@host now"),
        ] {
            let re = compile(pat);
            assert_eq!(
                stream_scan(&re, text),
                re.find_leftmost_longest(&chars(text)),
                "pattern {:?} on {:?}",
                pat,
                text
            );
        }
    }

    #[test]
    fn stream_equivalence_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let patterns = [
            "a", "ab", "ab+", "a+b", "(a|b)c", "a{2,3}", "[ab]+c?", "a.b", "a*b*", "(ab)+",
            "a(b|c)*d", "[^a]+", "\\d+", "x{2}", "(a|ab)(c|bc)",
        ];
        for pat in patterns {
            let re = compile(pat);
            let alphabet = ['a', 'b', 'c', 'd', 'x', '1', ' '];
            for _ in 0..200 {
                let len = rng.gen_range(0..30);
                let text: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
                assert_eq!(
                    stream_scan(&re, &text),
                    re.find_leftmost_longest(&chars(&text)),
                    "pattern {:?} on {:?}",
                    pat,
                    text
                );
            }
        }
    }

    #[test]
    fn spans_count_chars_not_bytes() {
        let re = compile("é+");
        assert_eq!(re.find_leftmost_longest(&chars("xéé!")), alloc::vec![Span::new(1, 3)]);
    }
}
