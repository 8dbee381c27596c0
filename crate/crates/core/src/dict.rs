//! Dictionary (gazetteer) matching.
//!
//! Entries match case-insensitively and only whole-token aligned: both match
//! ends must fall on token boundaries. The batch scanner below is the
//! reference; [`AcAutomaton`] provides the streaming equivalent used by
//! pipeline stages, an Aho-Corasick automaton over the same folded entries.
//! A streamed candidate is held for one char after its last char arrives,
//! because the end-boundary test needs the following char (or end of input).

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::span::Span;
use crate::text::{fold_char, is_token_boundary, is_word_char};

/// A named set of folded entries. Entries equal after folding are stored
/// once; empty entries are dropped.
#[derive(Clone, Debug)]
pub struct Dictionary {
    name: String,
    entries: Vec<Vec<char>>,
}

impl Dictionary {
    pub fn new<I, S>(name: impl Into<String>, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut folded: Vec<Vec<char>> = entries
            .into_iter()
            .map(|e| e.as_ref().chars().map(fold_char).collect())
            .filter(|e: &Vec<char>| !e.is_empty())
            .collect();
        folded.sort();
        folded.dedup();
        Dictionary { name: name.into(), entries: folded }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_entry_len(&self) -> usize {
        self.entries.iter().map(|e| e.len()).max().unwrap_or(0)
    }

    /// Reference scan: every token-aligned occurrence of every entry,
    /// sorted by (begin, end).
    pub fn find_matches(&self, chars: &[char]) -> Vec<Span> {
        let mut out = Vec::new();
        for p in 0..chars.len() {
            if !is_token_boundary(chars, p) {
                continue;
            }
            for entry in &self.entries {
                let end = p + entry.len();
                if end > chars.len() || !is_token_boundary(chars, end) {
                    continue;
                }
                if chars[p..end].iter().map(|&c| fold_char(c)).eq(entry.iter().copied()) {
                    out.push(Span::new(p as u32, end as u32));
                }
            }
        }
        out.sort();
        out
    }
}

#[derive(Clone, Debug, Default)]
struct AcNode {
    children: BTreeMap<char, u32>,
    fail: u32,
    /// Lengths of entries ending at this state (own plus fail chain),
    /// descending so same-end candidates surface in begin-ascending order.
    out_lens: Vec<u32>,
}

/// Aho-Corasick automaton over a dictionary's folded entries.
#[derive(Clone, Debug)]
pub struct AcAutomaton {
    nodes: Vec<AcNode>,
    max_len: usize,
}

impl AcAutomaton {
    pub fn build(dict: &Dictionary) -> Self {
        let mut nodes = alloc::vec![AcNode::default()];
        for entry in &dict.entries {
            let mut state = 0u32;
            for &c in entry {
                let next = match nodes[state as usize].children.get(&c) {
                    Some(&n) => n,
                    None => {
                        nodes.push(AcNode::default());
                        let n = (nodes.len() - 1) as u32;
                        nodes[state as usize].children.insert(c, n);
                        n
                    }
                };
                state = next;
            }
            nodes[state as usize].out_lens.push(entry.len() as u32);
        }
        // BFS fail links; children of the root fail to the root.
        let mut queue: VecDeque<u32> = VecDeque::new();
        let root_children: Vec<(char, u32)> =
            nodes[0].children.iter().map(|(&c, &n)| (c, n)).collect();
        for (_, n) in &root_children {
            nodes[*n as usize].fail = 0;
            queue.push_back(*n);
        }
        while let Some(u) = queue.pop_front() {
            let children: Vec<(char, u32)> =
                nodes[u as usize].children.iter().map(|(&c, &n)| (c, n)).collect();
            for (c, v) in children {
                let mut f = nodes[u as usize].fail;
                let fail_of_v = loop {
                    if let Some(&n) = nodes[f as usize].children.get(&c) {
                        break n;
                    }
                    if f == 0 {
                        break 0;
                    }
                    f = nodes[f as usize].fail;
                };
                let fail_of_v = if fail_of_v == v { 0 } else { fail_of_v };
                nodes[v as usize].fail = fail_of_v;
                let inherited = nodes[fail_of_v as usize].out_lens.clone();
                nodes[v as usize].out_lens.extend(inherited);
                queue.push_back(v);
            }
        }
        for node in &mut nodes {
            node.out_lens.sort_unstable_by(|a, b| b.cmp(a));
            node.out_lens.dedup();
        }
        AcAutomaton { nodes, max_len: dict.max_entry_len() }
    }

    fn step(&self, mut state: u32, c: char) -> u32 {
        loop {
            if let Some(&n) = self.nodes[state as usize].children.get(&c) {
                return n;
            }
            if state == 0 {
                return 0;
            }
            state = self.nodes[state as usize].fail;
        }
    }

    pub fn matcher(&self) -> DictStreamMatcher<'_> {
        DictStreamMatcher {
            ac: self,
            state: 0,
            pos: 0,
            flags: VecDeque::new(),
            pending: Vec::new(),
            matches: VecDeque::new(),
        }
    }
}

/// Streaming dictionary matcher. Emission order is (end asc, begin asc);
/// that is not the canonical (begin, end) order, which is why dictionary
/// stages never claim sorted output.
pub struct DictStreamMatcher<'a> {
    ac: &'a AcAutomaton,
    state: u32,
    /// Chars consumed so far.
    pos: usize,
    /// Word-char flags for the last `max_len + 1` positions, ending at `pos - 1`.
    flags: VecDeque<bool>,
    /// Candidates ending exactly at `pos`, awaiting the end-boundary test.
    pending: Vec<Span>,
    matches: VecDeque<Span>,
}

impl<'a> DictStreamMatcher<'a> {
    /// Word flag of absolute position `p`; must lie within the window.
    fn flag(&self, p: usize) -> bool {
        let base = self.pos - self.flags.len();
        self.flags[p - base]
    }

    fn boundary_before(&self, p: usize) -> bool {
        if p == 0 {
            return true;
        }
        self.flag(p - 1) != self.flag(p)
    }

    pub fn on_char(&mut self, c: char) {
        // Resolve candidates that ended right before this char.
        if !self.pending.is_empty() {
            let boundary = *self.flags.back().expect("candidate implies prior char") != is_word_char(c);
            if boundary {
                self.matches.extend(self.pending.drain(..));
            } else {
                self.pending.clear();
            }
        }
        self.state = self.ac.step(self.state, fold_char(c));
        self.flags.push_back(is_word_char(c));
        while self.flags.len() > self.ac.max_len + 1 {
            self.flags.pop_front();
        }
        self.pos += 1;
        let out_lens = &self.ac.nodes[self.state as usize].out_lens;
        for &len in out_lens {
            let begin = self.pos - len as usize;
            if self.boundary_before(begin) {
                self.pending.push(Span::new(begin as u32, self.pos as u32));
            }
        }
    }

    pub fn on_eof(&mut self) {
        // End of text is always a boundary.
        self.matches.extend(self.pending.drain(..));
    }

    pub fn pop_match(&mut self) -> Option<Span> {
        self.matches.pop_front()
    }

    pub fn pending(&self) -> usize {
        self.matches.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn stream_scan(dict: &Dictionary, text: &str) -> Vec<Span> {
        let ac = AcAutomaton::build(dict);
        let mut m = ac.matcher();
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
    fn overlapping_entries_all_emitted() {
        let d = Dictionary::new("places", ["new york", "york"]);
        assert_eq!(
            d.find_matches(&chars("New York city")),
            alloc::vec![Span::new(0, 8), Span::new(4, 8)]
        );
    }

    #[test]
    fn token_alignment_required() {
        let d = Dictionary::new("d", ["cat"]);
        assert!(d.find_matches(&chars("concatenate")).is_empty());
        assert_eq!(d.find_matches(&chars("cat!")), alloc::vec![Span::new(0, 3)]);
        assert_eq!(d.find_matches(&chars("a cat.")), alloc::vec![Span::new(2, 5)]);
        // Interior punctuation inside the entry is fine either side.
        let d2 = Dictionary::new("d", ["e-mail"]);
        assert_eq!(d2.find_matches(&chars("send e-mail now")), alloc::vec![Span::new(5, 11)]);
    }

    #[test]
    fn empty_dictionary_matches_nothing() {
        let d = Dictionary::new("d", Vec::<String>::new());
        assert!(d.find_matches(&chars("anything")).is_empty());
    }

    #[test]
    fn case_insensitive_both_sides() {
        let d = Dictionary::new("d", ["MiXeD"]);
        assert_eq!(d.find_matches(&chars("mixed MIXED mIxEd")), alloc::vec![
            Span::new(0, 5),
            Span::new(6, 11),
            Span::new(12, 17)
        ]);
    }

    #[test]
    fn entries_equal_after_folding_collapse() {
        let d = Dictionary::new("d", ["York", "york", "YORK"]);
        assert_eq!(d.entry_count(), 1);
        assert_eq!(d.find_matches(&chars("york")), alloc::vec![Span::new(0, 4)]);
    }

    #[test]
    fn stream_equals_batch_on_fixtures() {
        let cases: &[(&[&str], &str)] = &[
            (&["new york", "york"], "New York city, new york!"),
            (&["cat"], "concatenate cat cats"),
            (&["a", "ab", "abc"], "abc ab a cabc"),
            (&["he", "she", "his", "hers"], "she sells hers and his"),
            (&["ü", "über"], "Über ü!"),
            (&["e-mail", "mail"], "e-mail mail"),
        ];
        for (entries, text) in cases {
            let d = Dictionary::new("d", entries.iter().copied());
            let mut batch = d.find_matches(&chars(text));
            let mut stream = stream_scan(&d, text);
            batch.sort();
            stream.sort();
            assert_eq!(stream, batch, "entries {:?} on {:?}", entries, text);
        }
    }

    #[test]
    fn stream_equals_batch_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xd1c7);
        let words = ["ab", "abc", "bc", "a", "xyz", "x y", "b-c"];
        for _ in 0..300 {
            let n_entries = rng.gen_range(1..5);
            let entries: Vec<&str> =
                (0..n_entries).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let d = Dictionary::new("d", entries.iter().copied());
            let len = rng.gen_range(0..40);
            let alphabet = ['a', 'b', 'c', 'x', 'y', ' ', '-'];
            let text: String =
                (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            let mut batch = d.find_matches(&chars(&text));
            let mut stream = stream_scan(&d, &text);
            batch.sort();
            stream.sort();
            assert_eq!(stream, batch, "entries {:?} on {:?}", entries, text);
        }
    }

    #[test]
    fn streaming_emission_is_end_then_begin_order() {
        // The shorter entry ends first and is emitted first, even though
        // canonical order would put the longer span ahead.
        let d = Dictionary::new("d", ["b c", "a b c d"]);
        let got = stream_scan(&d, "a b c d");
        assert_eq!(got, alloc::vec![Span::new(2, 5), Span::new(0, 7)]);
    }
}
