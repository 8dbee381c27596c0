//! Half-open character spans, the unit every annotation is built from.

/// A half-open interval `[begin, end)` of character offsets into a document.
///
/// Offsets count Unicode scalar values, not bytes. `begin == end` denotes an
/// empty span, which is representable but never produced by extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub begin: u32,
    pub end: u32,
}

impl Span {
    /// Panics if `begin > end`; spans are always well formed.
    pub fn new(begin: u32, end: u32) -> Self {
        assert!(begin <= end, "span begin {} > end {}", begin, end);
        Span { begin, end }
    }

    pub fn len(&self) -> u32 {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    /// `other` starts at or after our start and ends at or before our end.
    pub fn contains(&self, other: &Span) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }

    /// Strict containment: contained and not equal.
    pub fn strictly_contains(&self, other: &Span) -> bool {
        self.contains(other) && self != other
    }

    /// Non-empty intersection under half-open semantics. Adjacent spans
    /// (`a.end == b.begin`) do not overlap, and an empty span overlaps
    /// nothing, not even a span that surrounds it.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.begin.max(other.begin) < self.end.min(other.end)
    }

    /// Signed gap from the end of `self` to the start of `other`.
    /// Negative when `other` starts inside or before `self`.
    pub fn gap_to(&self, other: &Span) -> i64 {
        other.begin as i64 - self.end as i64
    }
}
