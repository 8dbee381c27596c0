//! Span predicates used by selection and join operators.
//!
//! Predicates are written against column names and compiled against a
//! concrete schema before evaluation, so the hot path works on column
//! indexes only.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::SchemaError;
use crate::graph::NodeId;
use crate::table::{ColumnType, Schema, Tuple, Value};

/// Predicate over named columns; the form rule programs and serialized
/// graphs carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    /// Right span starts within `[min, max]` characters after the left span
    /// ends. Bounds are signed: negative `min` admits overlap.
    Follows { left: String, right: String, min: i64, max: i64 },
    /// Outer span contains the inner one (inclusive both ends).
    Contains { outer: String, inner: String },
    Overlaps { a: String, b: String },
    SpanLengthGreaterThan { column: String, length: u32 },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Column names referenced by this predicate, in syntactic order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Follows { left, right, .. } => {
                out.push(left);
                out.push(right);
            }
            Predicate::Contains { outer, inner } => {
                out.push(outer);
                out.push(inner);
            }
            Predicate::Overlaps { a, b } => {
                out.push(a);
                out.push(b);
            }
            Predicate::SpanLengthGreaterThan { column, .. } => out.push(column),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            Predicate::Not(p) => p.collect_columns(out),
        }
    }

    /// Resolve column names to indexes in `schema`. Every referenced column
    /// must exist and be a span. `node` only labels errors.
    pub fn compile(&self, schema: &Schema, node: NodeId) -> Result<CompiledPredicate, SchemaError> {
        let op = self.compile_inner(schema, node)?;
        Ok(CompiledPredicate { op })
    }

    fn compile_inner(&self, schema: &Schema, node: NodeId) -> Result<PredOp, SchemaError> {
        let span_col = |name: &str| -> Result<usize, SchemaError> {
            let idx = schema
                .index_of(name)
                .ok_or_else(|| SchemaError::UnknownColumn { node, column: name.into() })?;
            if schema.column_type(idx) != ColumnType::Span {
                return Err(SchemaError::NotASpanColumn { node, column: name.into() });
            }
            Ok(idx)
        };
        Ok(match self {
            Predicate::Follows { left, right, min, max } => PredOp::Follows {
                left: span_col(left)?,
                right: span_col(right)?,
                min: *min,
                max: *max,
            },
            Predicate::Contains { outer, inner } => {
                PredOp::Contains { outer: span_col(outer)?, inner: span_col(inner)? }
            }
            Predicate::Overlaps { a, b } => {
                PredOp::Overlaps { a: span_col(a)?, b: span_col(b)? }
            }
            Predicate::SpanLengthGreaterThan { column, length } => {
                PredOp::SpanLengthGreaterThan { column: span_col(column)?, length: *length }
            }
            Predicate::And(a, b) => PredOp::And(
                Box::new(a.compile_inner(schema, node)?),
                Box::new(b.compile_inner(schema, node)?),
            ),
            Predicate::Or(a, b) => PredOp::Or(
                Box::new(a.compile_inner(schema, node)?),
                Box::new(b.compile_inner(schema, node)?),
            ),
            Predicate::Not(p) => PredOp::Not(Box::new(p.compile_inner(schema, node)?)),
        })
    }
}

/// Index-resolved predicate, ready to evaluate against tuples.
#[derive(Clone, Debug)]
pub struct CompiledPredicate {
    op: PredOp,
}

#[derive(Clone, Debug)]
enum PredOp {
    Follows { left: usize, right: usize, min: i64, max: i64 },
    Contains { outer: usize, inner: usize },
    Overlaps { a: usize, b: usize },
    SpanLengthGreaterThan { column: usize, length: u32 },
    And(Box<PredOp>, Box<PredOp>),
    Or(Box<PredOp>, Box<PredOp>),
    Not(Box<PredOp>),
}

impl CompiledPredicate {
    pub fn eval(&self, tuple: &Tuple) -> bool {
        Self::eval_op(&self.op, tuple)
    }

    fn eval_op(op: &PredOp, tuple: &Tuple) -> bool {
        let span = |idx: usize| match &tuple[idx] {
            Value::Span(s) => *s,
            other => panic!("predicate on non-span value {:?}", other),
        };
        match op {
            PredOp::Follows { left, right, min, max } => {
                let gap = span(*left).gap_to(&span(*right));
                *min <= gap && gap <= *max
            }
            PredOp::Contains { outer, inner } => span(*outer).contains(&span(*inner)),
            PredOp::Overlaps { a, b } => span(*a).overlaps(&span(*b)),
            PredOp::SpanLengthGreaterThan { column, length } => span(*column).len() > *length,
            PredOp::And(a, b) => Self::eval_op(a, tuple) && Self::eval_op(b, tuple),
            PredOp::Or(a, b) => Self::eval_op(a, tuple) || Self::eval_op(b, tuple),
            PredOp::Not(p) => !Self::eval_op(p, tuple),
        }
    }
}
