//! Input documents, prepared once for repeated executions.

use alloc::string::String;
use alloc::sync::Arc;

/// A document decoded for span work: identity, raw text, and the text as a
/// shared char slice so executors can index by character offset without
/// re-decoding. `bytes` is the UTF-8 length, the unit throughput is
/// measured in.
#[derive(Clone, Debug)]
pub struct DocText {
    pub id: String,
    pub text: Arc<str>,
    pub chars: Arc<[char]>,
    pub bytes: usize,
}

impl DocText {
    pub fn new(id: impl Into<String>, text: impl Into<Arc<str>>) -> Self {
        let text: Arc<str> = text.into();
        let chars: Arc<[char]> = text.chars().collect();
        let bytes = text.len();
        DocText { id: id.into(), text, chars, bytes }
    }

    /// Character count, the coordinate space spans live in.
    pub fn char_len(&self) -> usize {
        self.chars.len()
    }

    /// Slice of the original text covered by `[begin, end)` char offsets.
    pub fn slice(&self, begin: u32, end: u32) -> String {
        self.chars[begin as usize..end as usize].iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_offsets_not_bytes() {
        let doc = DocText::new("d0", "aü b");
        assert_eq!(doc.char_len(), 4);
        assert_eq!(doc.bytes, 5);
        assert_eq!(doc.slice(1, 2), "ü");
    }
}
