//! Character-level text helpers shared by extraction operators.
//!
//! Tokenization is deliberately crude: a token boundary sits wherever the
//! alphanumeric-ness of adjacent characters differs, plus both document
//! edges. Dictionary matching relies on these boundaries and on a simple
//! one-to-one case fold.

/// True if `c` counts as word material for token boundaries.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// A boundary sits before position `p` (0-based, `p <= len`): at either edge
/// of the document, or where word-ness flips between `chars[p-1]` and
/// `chars[p]`.
pub fn is_token_boundary(chars: &[char], p: usize) -> bool {
    if p == 0 || p == chars.len() {
        return true;
    }
    is_word_char(chars[p - 1]) != is_word_char(chars[p])
}

/// Simple case fold: the first scalar of the full lowercase mapping. One char
/// in, one char out, so folded strings stay index-aligned with the input.
pub fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

pub fn fold_str(s: &str) -> alloc::string::String {
    s.chars().map(fold_char).collect()
}
