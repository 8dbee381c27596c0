//! Tuples, schemas and annotation sets.
//!
//! An [`AnnotationSet`] is the value flowing between operators: a typed
//! relation whose tuples usually carry at least one [`Span`]. Sets have a
//! canonical order (first span column ascending by `(begin, end)`, then the
//! remaining columns left to right) so that two sets with equal content
//! always serialize identically, no matter how they were produced.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::span::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnType {
    Span,
    Text,
    Int,
    Float,
    Bool,
}

impl ColumnType {
    pub fn name(&self) -> &'static str {
        match self {
            ColumnType::Span => "span",
            ColumnType::Text => "text",
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::Bool => "bool",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered list of named, typed columns. Column names are unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<(String, ColumnType)>,
}

impl Schema {
    /// Panics on duplicate column names; schemas are built by inference,
    /// which renames collisions before construction.
    pub fn new(columns: Vec<(String, ColumnType)>) -> Self {
        for (i, (name, _)) in columns.iter().enumerate() {
            for (other, _) in &columns[..i] {
                assert!(other != name, "duplicate column name {:?}", name);
            }
        }
        Schema { columns }
    }

    pub fn columns(&self) -> &[(String, ColumnType)] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn column_type(&self, index: usize) -> ColumnType {
        self.columns[index].1
    }

    pub fn column_name(&self, index: usize) -> &str {
        &self.columns[index].0
    }

    /// Index of the leftmost span column, the key column for canonical order.
    pub fn first_span_column(&self) -> Option<usize> {
        self.columns.iter().position(|(_, t)| *t == ColumnType::Span)
    }
}

#[derive(Clone, Debug)]
pub enum Value {
    Span(Span),
    Text(Arc<str>),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Span(_) => ColumnType::Span,
            Value::Text(_) => ColumnType::Text,
            Value::Int(_) => ColumnType::Int,
            Value::Float(_) => ColumnType::Float,
            Value::Bool(_) => ColumnType::Bool,
        }
    }

    pub fn as_span(&self) -> Option<Span> {
        match self {
            Value::Span(s) => Some(*s),
            _ => None,
        }
    }

    /// Total order; floats compare via `total_cmp`, so NaN is ordered too.
    /// Values of different types order by type, which only matters for
    /// defensive code paths: schemas keep columns homogeneous.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Span(a), Span(b)) => a.cmp(b),
            (Text(a), Text(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Float(a), Float(b)) => a.total_cmp(b),
            (Bool(a), Bool(b)) => a.cmp(b),
            _ => self.type_rank().cmp(&other.type_rank()),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            Value::Span(_) => 0,
            Value::Text(_) => 1,
            Value::Int(_) => 2,
            Value::Float(_) => 3,
            Value::Bool(_) => 4,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

pub type Tuple = Vec<Value>;

/// Compare two tuples of `schema` in canonical order: the first span column's
/// `(begin, end)` leads, then every column left to right breaks ties.
pub fn canonical_cmp(schema: &Schema, a: &Tuple, b: &Tuple) -> Ordering {
    if let Some(k) = schema.first_span_column() {
        let (sa, sb) = (a[k].as_span(), b[k].as_span());
        match (sa, sb) {
            (Some(sa), Some(sb)) => match sa.cmp(&sb) {
                Ordering::Equal => {}
                ord => return ord,
            },
            _ => {}
        }
    }
    for (va, vb) in a.iter().zip(b.iter()) {
        match va.total_cmp(vb) {
            Ordering::Equal => {}
            ord => return ord,
        }
    }
    Ordering::Equal
}

/// A relation: schema plus tuples. Multiset semantics; operators that demand
/// set semantics (consolidation) deduplicate explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationSet {
    schema: Arc<Schema>,
    tuples: Vec<Tuple>,
}

impl AnnotationSet {
    pub fn new(schema: Arc<Schema>) -> Self {
        AnnotationSet { schema, tuples: Vec::new() }
    }

    pub fn from_tuples(schema: Arc<Schema>, tuples: Vec<Tuple>) -> Self {
        let set = AnnotationSet { schema, tuples };
        set.debug_check_types();
        set
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn push(&mut self, tuple: Tuple) {
        debug_assert_eq!(tuple.len(), self.schema.len());
        self.tuples.push(tuple);
    }

    /// Sort into canonical order. Stable, so equal tuples keep multiplicity.
    pub fn sort_canonical(&mut self) {
        let schema = Arc::clone(&self.schema);
        self.tuples.sort_by(|a, b| canonical_cmp(&schema, a, b));
    }

    pub fn is_canonically_sorted(&self) -> bool {
        self.tuples
            .windows(2)
            .all(|w| canonical_cmp(&self.schema, &w[0], &w[1]) != Ordering::Greater)
    }

    pub fn into_tuples(self) -> Vec<Tuple> {
        self.tuples
    }

    fn debug_check_types(&self) {
        #[cfg(debug_assertions)]
        for t in &self.tuples {
            assert_eq!(t.len(), self.schema.len());
            for (v, (_, ty)) in t.iter().zip(self.schema.columns()) {
                assert_eq!(v.column_type(), *ty);
            }
        }
    }
}
