//! Declarative rule frontend.
//!
//! Programs are small: dictionaries, views built from seven operators, and
//! output statements. [`compile`] takes source text to a schema-stamped
//! [`OperatorGraph`] ready for the software executor or the partitioner.
//!
//! ```text
//! create dictionary Cities as ('new york', 'boston');
//! create view Caps   as extract regex /[A-Z][a-z]+/ on Document;
//! create view Where  as extract dictionary Cities on Document;
//! create view Pairs  as join Caps c, Where w on Follows(c.match, w.match, 0, 20);
//! output view Pairs;
//! ```

mod ast;
mod lexer;
mod lower;
mod parser;

pub use ast::{ColRef, DictSource, PredExpr, Statement, ViewBody, ViewRef};
pub use lower::lower_to_aog;
pub use parser::parse_program;

use alloc::string::String;
use core::fmt;

use crate::error::{GraphError, SchemaError};
use crate::graph::OperatorGraph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AqlError {
    Lex { line: u32, col: u32, msg: String },
    Parse { line: u32, col: u32, msg: String },
    UnknownView { name: String },
    UnknownDictionary { name: String },
    DuplicateName { name: String },
    UnknownColumn { view: String, column: String },
    AmbiguousColumn { column: String },
    Schema(SchemaError),
    Graph(GraphError),
}

impl fmt::Display for AqlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AqlError::Lex { line, col, msg } => write!(f, "{line}:{col}: {msg}"),
            AqlError::Parse { line, col, msg } => write!(f, "{line}:{col}: {msg}"),
            AqlError::UnknownView { name } => write!(f, "unknown view '{name}'"),
            AqlError::UnknownDictionary { name } => write!(f, "unknown dictionary '{name}'"),
            AqlError::DuplicateName { name } => write!(f, "name '{name}' already defined"),
            AqlError::UnknownColumn { view, column } => {
                write!(f, "view '{view}' has no column '{column}'")
            }
            AqlError::AmbiguousColumn { column } => {
                write!(f, "column reference '{column}' is ambiguous")
            }
            AqlError::Schema(e) => write!(f, "schema: {e}"),
            AqlError::Graph(e) => write!(f, "graph: {e}"),
        }
    }
}

impl core::error::Error for AqlError {}

impl From<SchemaError> for AqlError {
    fn from(e: SchemaError) -> Self {
        AqlError::Schema(e)
    }
}

impl From<GraphError> for AqlError {
    fn from(e: GraphError) -> Self {
        AqlError::Graph(e)
    }
}

/// Parse and lower a program in one step.
pub fn compile(src: &str) -> Result<OperatorGraph, AqlError> {
    lower_to_aog(&parse_program(src)?)
}

/// Graph-level rewriting hook. Currently the identity: lowering already
/// emits the minimal graph for each statement and no cross-statement
/// rewrites have proven worthwhile yet. The seam exists so the compile
/// pipeline has a fixed place for them.
pub fn optimize(graph: OperatorGraph) -> OperatorGraph {
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::DocText;
    use crate::operators::{execute_graph_software, PreparedGraph};
    use crate::span::Span;
    use crate::table::Value;
    use alloc::vec::Vec;

    #[test]
    fn compiled_program_runs_end_to_end() {
        let src = "
            -- city mentions near capitalized words
            create dictionary Cities as ('york', 'boston');
            create view Caps as extract regex /[A-Z][a-z]+/ on Document;
            create view Cty as extract dictionary Cities on Document;
            create view Pair as join Caps c, Cty t on Follows(c.match, t.match, 0, 5);
            output view Pair as 'pairs';
        ";
        let g = optimize(compile(src).unwrap());
        let prepared = PreparedGraph::new(g).unwrap();
        let doc = DocText::new("d", "Visit York or boston today");
        let views = execute_graph_software(&prepared, &doc).unwrap();
        let pairs = &views["pairs"];
        let rows: Vec<(Span, Span)> = pairs
            .tuples()
            .iter()
            .map(|t| {
                let (Value::Span(a), Value::Span(b)) = (&t[0], &t[1]) else {
                    panic!("two span columns");
                };
                (*a, *b)
            })
            .collect();
        // "Visit"->"York" (gap 1) and "York"->"boston" (gap 4) both satisfy
        // the follows window; "Visit"->"boston" is 9 apart.
        assert_eq!(
            rows,
            alloc::vec![
                (Span::new(0, 5), Span::new(6, 10)),
                (Span::new(6, 10), Span::new(14, 20)),
            ]
        );
    }

    #[test]
    fn compile_reports_parse_position() {
        let err = compile("create view V as extract regex 'oops' on Document;").unwrap_err();
        assert!(matches!(err, AqlError::Parse { line: 1, .. }));
    }

    #[test]
    fn error_messages_render() {
        let e = AqlError::UnknownColumn {
            view: "V".into(),
            column: "c".into(),
        };
        assert_eq!(alloc::format!("{e}"), "view 'V' has no column 'c'");
    }
}
