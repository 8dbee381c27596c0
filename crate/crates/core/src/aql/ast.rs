//! Parsed rule programs, before name resolution.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Statement {
    CreateDict { name: String, source: DictSource },
    CreateView { name: String, body: ViewBody },
    /// `output view X;` or `output view X as 'name';`
    Output { view: String, alias: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DictSource {
    Inline(Vec<String>),
    File(String),
}

/// A view reference at a join input, optionally aliased for predicate
/// qualification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewRef {
    pub view: String,
    pub alias: Option<String>,
}

impl ViewRef {
    /// The name predicates may qualify columns with.
    pub fn label(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.view)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViewBody {
    ExtractRegex { pattern: String },
    ExtractDict { dict: String },
    Select { from: String, predicate: PredExpr },
    Project { columns: Vec<String>, from: String },
    Join { left: ViewRef, right: ViewRef, predicate: PredExpr },
    UnionAll { inputs: Vec<String> },
    Consolidate { from: String },
}

/// Column reference, possibly qualified by a view name or join alias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColRef {
    pub qualifier: Option<String>,
    pub column: String,
}

/// Predicate expression tree over unresolved column references.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PredExpr {
    Follows { left: ColRef, right: ColRef, min: i64, max: i64 },
    Contains { outer: ColRef, inner: ColRef },
    Overlaps { a: ColRef, b: ColRef },
    SpanLengthGreaterThan { column: ColRef, length: u32 },
    And(Box<PredExpr>, Box<PredExpr>),
    Or(Box<PredExpr>, Box<PredExpr>),
    Not(Box<PredExpr>),
}
