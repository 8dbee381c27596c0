//! Recursive descent parser for rule programs.
//!
//! Keywords match case-insensitively, so `CREATE VIEW` and `create view`
//! are the same program. View and dictionary names are case-sensitive
//! identifiers. Views must be defined before they are referenced, which the
//! lowering pass enforces; the parser only builds the statement list.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::aql::ast::*;
use crate::aql::lexer::{tokenize, Tok, Token};
use crate::aql::AqlError;

pub fn parse_program(src: &str) -> Result<Vec<Statement>, AqlError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut stmts = Vec::new();
    while p.peek().is_some() {
        stmts.push(p.statement()?);
    }
    Ok(stmts)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error(&self, msg: impl Into<String>) -> AqlError {
        let (line, col) = self
            .peek()
            .map(|t| (t.line, t.col))
            .unwrap_or_else(|| {
                self.tokens
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((1, 1))
            });
        AqlError::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    /// Does the next token equal the keyword, ignoring case?
    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(kw))
    }

    fn try_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), AqlError> {
        if self.try_kw(kw) {
            Ok(())
        } else {
            Err(self.error(alloc::format!("expected keyword '{kw}'")))
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), AqlError> {
        match self.peek() {
            Some(Token { tok: Tok::Punct(p), .. }) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(alloc::format!("expected '{c}'"))),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn ident(&mut self) -> Result<String, AqlError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected an identifier")),
        }
    }

    fn string(&mut self) -> Result<String, AqlError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected a string literal")),
        }
    }

    fn int(&mut self) -> Result<i64, AqlError> {
        match self.peek() {
            Some(Token { tok: Tok::Int(v), .. }) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected an integer")),
        }
    }

    fn statement(&mut self) -> Result<Statement, AqlError> {
        if self.try_kw("create") {
            if self.try_kw("dictionary") {
                return self.create_dictionary();
            }
            if self.try_kw("view") {
                return self.create_view();
            }
            return Err(self.error("expected 'dictionary' or 'view' after 'create'"));
        }
        if self.try_kw("output") {
            self.expect_kw("view")?;
            let view = self.ident()?;
            let alias = if self.try_kw("as") {
                Some(self.string()?)
            } else {
                None
            };
            self.expect_punct(';')?;
            return Ok(Statement::Output { view, alias });
        }
        Err(self.error("expected 'create' or 'output'"))
    }

    fn create_dictionary(&mut self) -> Result<Statement, AqlError> {
        let name = self.ident()?;
        let source = if self.try_kw("as") {
            self.expect_punct('(')?;
            let mut entries = alloc::vec![self.string()?];
            while self.at_punct(',') {
                self.pos += 1;
                entries.push(self.string()?);
            }
            self.expect_punct(')')?;
            DictSource::Inline(entries)
        } else if self.try_kw("from") {
            self.expect_kw("file")?;
            DictSource::File(self.string()?)
        } else {
            return Err(self.error("expected 'as (...)' or 'from file'"));
        };
        self.expect_punct(';')?;
        Ok(Statement::CreateDict { name, source })
    }

    fn create_view(&mut self) -> Result<Statement, AqlError> {
        let name = self.ident()?;
        self.expect_kw("as")?;
        let body = self.view_body()?;
        self.expect_punct(';')?;
        Ok(Statement::CreateView { name, body })
    }

    /// Extraction views read the raw document stream, nothing else.
    fn expect_document_source(&mut self) -> Result<(), AqlError> {
        self.expect_kw("on")?;
        let src = self.ident()?;
        if src != "Document" {
            return Err(self.error(alloc::format!(
                "extraction views read 'Document', not '{src}'"
            )));
        }
        Ok(())
    }

    fn view_body(&mut self) -> Result<ViewBody, AqlError> {
        if self.try_kw("extract") {
            if self.try_kw("regex") {
                let pattern = match self.peek() {
                    Some(Token { tok: Tok::Regex(s), .. }) => {
                        let s = s.clone();
                        self.pos += 1;
                        s
                    }
                    _ => return Err(self.error("expected a /regex/ literal")),
                };
                self.expect_document_source()?;
                return Ok(ViewBody::ExtractRegex { pattern });
            }
            if self.try_kw("dictionary") {
                let dict = self.ident()?;
                self.expect_document_source()?;
                return Ok(ViewBody::ExtractDict { dict });
            }
            return Err(self.error("expected 'regex' or 'dictionary' after 'extract'"));
        }
        if self.try_kw("select") {
            self.expect_punct('*')?;
            self.expect_kw("from")?;
            let from = self.ident()?;
            self.expect_kw("where")?;
            let predicate = self.predicate()?;
            return Ok(ViewBody::Select { from, predicate });
        }
        if self.try_kw("project") {
            let mut columns = alloc::vec![self.ident()?];
            while self.at_punct(',') {
                self.pos += 1;
                columns.push(self.ident()?);
            }
            self.expect_kw("from")?;
            let from = self.ident()?;
            return Ok(ViewBody::Project { columns, from });
        }
        if self.try_kw("join") {
            let left = self.view_ref()?;
            self.expect_punct(',')?;
            let right = self.view_ref()?;
            self.expect_kw("on")?;
            let predicate = self.predicate()?;
            return Ok(ViewBody::Join { left, right, predicate });
        }
        if self.try_kw("union") {
            self.expect_kw("all")?;
            let mut inputs = alloc::vec![self.ident()?];
            while self.at_punct(',') {
                self.pos += 1;
                inputs.push(self.ident()?);
            }
            if inputs.len() < 2 {
                return Err(self.error("union all needs at least two views"));
            }
            return Ok(ViewBody::UnionAll { inputs });
        }
        if self.try_kw("consolidate") {
            let from = self.ident()?;
            return Ok(ViewBody::Consolidate { from });
        }
        Err(self.error(
            "expected 'extract', 'select', 'project', 'join', 'union' or 'consolidate'",
        ))
    }

    fn view_ref(&mut self) -> Result<ViewRef, AqlError> {
        let view = self.ident()?;
        // A bare identifier after the view name is its alias; the next
        // token is otherwise ',' or the keyword 'on'.
        let alias = if self.at_kw("on") {
            None
        } else if matches!(self.peek(), Some(Token { tok: Tok::Ident(_), .. })) {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(ViewRef { view, alias })
    }

    fn predicate(&mut self) -> Result<PredExpr, AqlError> {
        let mut lhs = self.pred_and()?;
        while self.try_kw("or") {
            let rhs = self.pred_and()?;
            lhs = PredExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pred_and(&mut self) -> Result<PredExpr, AqlError> {
        let mut lhs = self.pred_unary()?;
        while self.try_kw("and") {
            let rhs = self.pred_unary()?;
            lhs = PredExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn pred_unary(&mut self) -> Result<PredExpr, AqlError> {
        if self.try_kw("not") {
            let inner = self.pred_unary()?;
            return Ok(PredExpr::Not(Box::new(inner)));
        }
        if self.at_punct('(') {
            self.pos += 1;
            let inner = self.predicate()?;
            self.expect_punct(')')?;
            return Ok(inner);
        }
        self.pred_call()
    }

    fn col_ref(&mut self) -> Result<ColRef, AqlError> {
        let first = self.ident()?;
        if self.at_punct('.') {
            self.pos += 1;
            let column = self.ident()?;
            Ok(ColRef {
                qualifier: Some(first),
                column,
            })
        } else {
            Ok(ColRef {
                qualifier: None,
                column: first,
            })
        }
    }

    fn pred_call(&mut self) -> Result<PredExpr, AqlError> {
        let name = self.ident()?;
        self.expect_punct('(')?;
        let expr = match name.to_ascii_lowercase().as_str() {
            "follows" => {
                let left = self.col_ref()?;
                self.expect_punct(',')?;
                let right = self.col_ref()?;
                self.expect_punct(',')?;
                let min = self.int()?;
                self.expect_punct(',')?;
                let max = self.int()?;
                PredExpr::Follows { left, right, min, max }
            }
            "contains" => {
                let outer = self.col_ref()?;
                self.expect_punct(',')?;
                let inner = self.col_ref()?;
                PredExpr::Contains { outer, inner }
            }
            "overlaps" => {
                let a = self.col_ref()?;
                self.expect_punct(',')?;
                let b = self.col_ref()?;
                PredExpr::Overlaps { a, b }
            }
            "spanlengthgreaterthan" => {
                let column = self.col_ref()?;
                self.expect_punct(',')?;
                let length = self.int()?;
                let length = u32::try_from(length)
                    .map_err(|_| self.error("length must be a nonnegative integer"))?;
                PredExpr::SpanLengthGreaterThan { column, length }
            }
            other => {
                return Err(self.error(alloc::format!("unknown predicate function '{other}'")))
            }
        };
        self.expect_punct(')')?;
        Ok(expr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_program_parses() {
        let src = "
            -- places of interest
            create dictionary Places as ('new york', 'boston');
            CREATE VIEW Caps AS EXTRACT REGEX /[A-Z][a-z]+/ ON Document;
            create view Here as extract dictionary Places on Document;
            create view Pairs as join Caps c, Here h on Follows(c.match, h.match, 0, 10);
            create view Близко as select * from Pairs where SpanLengthGreaterThan(match, 2);
            output view Pairs;
            output view Близко as 'near';
        ";
        let stmts = parse_program(src).unwrap();
        assert_eq!(stmts.len(), 7);
        assert!(matches!(
            &stmts[0],
            Statement::CreateDict { name, source: DictSource::Inline(e) }
                if name == "Places" && e.len() == 2
        ));
        assert!(matches!(
            &stmts[3],
            Statement::CreateView { body: ViewBody::Join { left, .. }, .. }
                if left.label() == "c"
        ));
        assert!(matches!(
            &stmts[6],
            Statement::Output { alias: Some(a), .. } if a == "near"
        ));
    }

    #[test]
    fn predicate_precedence_binds_and_tighter() {
        let src = "create view V as select * from W where \
                   Overlaps(a, b) or Contains(c, d) and not Overlaps(e, f);";
        let stmts = parse_program(src).unwrap();
        let Statement::CreateView { body: ViewBody::Select { predicate, .. }, .. } = &stmts[0]
        else {
            panic!("expected select");
        };
        let PredExpr::Or(lhs, rhs) = predicate else {
            panic!("or at the root, got {predicate:?}");
        };
        assert!(matches!(**lhs, PredExpr::Overlaps { .. }));
        assert!(matches!(**rhs, PredExpr::And(_, _)));
    }

    #[test]
    fn union_requires_two_inputs() {
        let err = parse_program("create view V as union all A;").unwrap_err();
        assert!(matches!(err, AqlError::Parse { .. }));
    }

    #[test]
    fn extraction_source_must_be_document() {
        let err =
            parse_program("create view V as extract regex /a/ on Other;").unwrap_err();
        assert!(matches!(err, AqlError::Parse { .. }));
    }

    #[test]
    fn join_aliases_are_optional() {
        let stmts =
            parse_program("create view V as join A, B on Overlaps(match, match_2);").unwrap();
        let Statement::CreateView { body: ViewBody::Join { left, right, .. }, .. } = &stmts[0]
        else {
            panic!();
        };
        assert_eq!(left.label(), "A");
        assert_eq!(right.label(), "B");
    }

    #[test]
    fn dictionary_from_file() {
        let stmts = parse_program("create dictionary D from file 'dicts/d.txt';").unwrap();
        assert!(matches!(
            &stmts[0],
            Statement::CreateDict { source: DictSource::File(p), .. } if p == "dicts/d.txt"
        ));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_program("create view V as select * from W;").unwrap_err();
        let AqlError::Parse { line, col, .. } = err else {
            panic!()
        };
        assert_eq!(line, 1);
        assert!(col > 30);
    }
}
