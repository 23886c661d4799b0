//! The operation set and the expression language behind generated features.
//!
//! Every generated column is a tree over original column names, so a feature
//! can always be re-derived from the raw table. Rendered names double as the
//! provenance format: `sqrt(age)`, `(lstat*lstat)`, `sigmoid((a/b))`. The
//! grammar is unambiguous because column names may not contain parentheses,
//! arithmetic symbols, commas, or whitespace (the loader replaces them).

use std::collections::HashSet;
use std::fmt;

use crate::data::DataTable;
use crate::{Error, Result};

/// Values are clamped into `[-CLAMP_LIMIT, CLAMP_LIMIT]` after every
/// operation; non-finite results become 0 first.
pub const CLAMP_LIMIT: f64 = 1e12;

/// The fourteen operations, in their fixed encoding order. One-hot vectors
/// and the operation agent's Q-head both index into [`Op::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    SquareRoot,
    Square,
    Cosine,
    Sine,
    Tangent,
    Exp,
    Cube,
    Log,
    Reciprocal,
    Sigmoid,
    Plus,
    Subtract,
    Multiply,
    Divide,
}

impl Op {
    pub const ALL: [Op; 14] = [
        Op::SquareRoot,
        Op::Square,
        Op::Cosine,
        Op::Sine,
        Op::Tangent,
        Op::Exp,
        Op::Cube,
        Op::Log,
        Op::Reciprocal,
        Op::Sigmoid,
        Op::Plus,
        Op::Subtract,
        Op::Multiply,
        Op::Divide,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|&o| o == self)
            .expect("op in table")
    }

    pub fn from_index(i: usize) -> Option<Op> {
        Self::ALL.get(i).copied()
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Op::Plus | Op::Subtract | Op::Multiply | Op::Divide)
    }

    pub fn arity(self) -> usize {
        if self.is_binary() {
            2
        } else {
            1
        }
    }

    /// Stable identifier used in reports and configs.
    pub fn name(self) -> &'static str {
        match self {
            Op::SquareRoot => "square_root",
            Op::Square => "square",
            Op::Cosine => "cosine",
            Op::Sine => "sine",
            Op::Tangent => "tangent",
            Op::Exp => "exp",
            Op::Cube => "cube",
            Op::Log => "log",
            Op::Reciprocal => "reciprocal",
            Op::Sigmoid => "sigmoid",
            Op::Plus => "plus",
            Op::Subtract => "subtract",
            Op::Multiply => "multiply",
            Op::Divide => "divide",
        }
    }

    /// Token used when rendering expressions: a keyword for unary ops, the
    /// infix symbol for binary ones.
    pub fn token(self) -> &'static str {
        match self {
            Op::SquareRoot => "sqrt",
            Op::Square => "square",
            Op::Cosine => "cos",
            Op::Sine => "sin",
            Op::Tangent => "tan",
            Op::Exp => "exp",
            Op::Cube => "cube",
            Op::Log => "log",
            Op::Reciprocal => "recip",
            Op::Sigmoid => "sigmoid",
            Op::Plus => "+",
            Op::Subtract => "-",
            Op::Multiply => "*",
            Op::Divide => "/",
        }
    }

    fn from_unary_token(s: &str) -> Option<Op> {
        Self::ALL
            .iter()
            .copied()
            .find(|o| !o.is_binary() && o.token() == s)
    }

    fn from_symbol(c: char) -> Option<Op> {
        match c {
            '+' => Some(Op::Plus),
            '-' => Some(Op::Subtract),
            '*' => Some(Op::Multiply),
            '/' => Some(Op::Divide),
            _ => None,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn sanitize(x: f64) -> f64 {
    if x.is_finite() {
        x.clamp(-CLAMP_LIMIT, CLAMP_LIMIT)
    } else {
        0.0
    }
}

fn unary_raw(op: Op, x: f64) -> f64 {
    match op {
        Op::SquareRoot => x.abs().sqrt(),
        Op::Square => x * x,
        Op::Cosine => x.cos(),
        Op::Sine => x.sin(),
        Op::Tangent => x.tan(),
        Op::Exp => x.exp(),
        Op::Cube => x * x * x,
        Op::Log => x.abs().ln(),
        Op::Reciprocal => 1.0 / x,
        Op::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        _ => unreachable!("binary op in unary_raw"),
    }
}

fn binary_raw(op: Op, a: f64, b: f64) -> f64 {
    match op {
        Op::Plus => a + b,
        Op::Subtract => a - b,
        Op::Multiply => a * b,
        Op::Divide => a / b,
        _ => unreachable!("unary op in binary_raw"),
    }
}

/// Apply an operation element-wise with the sanitation rule: compute the raw
/// value, turn non-finite results into 0, clamp into the limit interval.
/// `sqrt` and `log` act on absolute values; division by zero and `recip(0)`
/// come out as 0 via the non-finite rule.
pub fn apply_op(op: Op, a: &[f64], b: Option<&[f64]>) -> Result<Vec<f64>> {
    match (op.is_binary(), b) {
        (true, Some(b)) => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            Ok(a.iter()
                .zip(b)
                .map(|(&x, &y)| sanitize(binary_raw(op, x, y)))
                .collect())
        }
        (false, None) => Ok(a.iter().map(|&x| sanitize(unary_raw(op, x))).collect()),
        _ => Err(Error::Internal(format!(
            "operand count does not match arity of {op}"
        ))),
    }
}

/// An expression tree over original column names.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExpr {
    Leaf(String),
    Unary(Op, Box<FeatureExpr>),
    Binary(Op, Box<FeatureExpr>, Box<FeatureExpr>),
}

impl FeatureExpr {
    pub fn leaf(name: impl Into<String>) -> Self {
        FeatureExpr::Leaf(name.into())
    }

    pub fn unary(op: Op, child: FeatureExpr) -> Self {
        debug_assert!(!op.is_binary(), "unary node needs a unary op");
        FeatureExpr::Unary(op, Box::new(child))
    }

    pub fn binary(op: Op, left: FeatureExpr, right: FeatureExpr) -> Self {
        debug_assert!(op.is_binary(), "binary node needs a binary op");
        FeatureExpr::Binary(op, Box::new(left), Box::new(right))
    }

    /// Render the canonical name: leaves verbatim, `kw(inner)` for unary,
    /// `(left<sym>right)` for binary.
    pub fn render(&self) -> String {
        match self {
            FeatureExpr::Leaf(name) => name.clone(),
            FeatureExpr::Unary(op, inner) => format!("{}({})", op.token(), inner.render()),
            FeatureExpr::Binary(op, l, r) => {
                format!("({}{}{})", l.render(), op.token(), r.render())
            }
        }
    }

    /// Parse a rendered name back into a tree. Inverse of [`render`] for any
    /// tree whose leaves are in `known`.
    ///
    /// [`render`]: FeatureExpr::render
    pub fn parse(text: &str, known: &HashSet<String>) -> Result<Self> {
        let mut p = Parser {
            bytes: text.as_bytes(),
            pos: 0,
            known,
        };
        let expr = p.expr()?;
        if p.pos != p.bytes.len() {
            return Err(Error::Parse {
                position: p.pos,
                message: "trailing characters after expression".to_string(),
            });
        }
        Ok(expr)
    }

    /// Evaluate against a table's original columns, applying the same
    /// sanitation as generation. A leaf returns its column bitwise.
    pub fn evaluate(&self, table: &DataTable) -> Result<Vec<f64>> {
        match self {
            FeatureExpr::Leaf(name) => table
                .column(name)
                .map(|c| c.to_vec())
                .ok_or_else(|| Error::UnknownColumn(name.clone())),
            FeatureExpr::Unary(op, inner) => {
                let v = inner.evaluate(table)?;
                apply_op(*op, &v, None)
            }
            FeatureExpr::Binary(op, l, r) => {
                let lv = l.evaluate(table)?;
                let rv = r.evaluate(table)?;
                apply_op(*op, &lv, Some(&rv))
            }
        }
    }

    /// Depth of the tree; a leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            FeatureExpr::Leaf(_) => 0,
            FeatureExpr::Unary(_, inner) => 1 + inner.depth(),
            FeatureExpr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    known: &'a HashSet<String>,
}

impl Parser<'_> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected `{}`", c as char))
        }
    }

    fn expr(&mut self) -> Result<FeatureExpr> {
        match self.peek() {
            Some(b'(') => self.binary(),
            Some(_) => self.ident_or_unary(),
            None => self.fail("unexpected end of input"),
        }
    }

    fn binary(&mut self) -> Result<FeatureExpr> {
        self.expect(b'(')?;
        let left = self.expr()?;
        let op = match self.peek().map(char::from) {
            Some(c) => match Op::from_symbol(c) {
                Some(op) => {
                    self.pos += 1;
                    op
                }
                None => return self.fail(format!("expected operator, found `{c}`")),
            },
            None => return self.fail("unexpected end of input, expected operator"),
        };
        let right = self.expr()?;
        self.expect(b')')?;
        Ok(FeatureExpr::binary(op, left, right))
    }

    fn ident_or_unary(&mut self) -> Result<FeatureExpr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let ch = char::from(c);
            if ch == '('
                || ch == ')'
                || Op::from_symbol(ch).is_some()
                || ch == ','
                || ch.is_whitespace()
            {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("expected a column name or operation keyword");
        }
        let ident = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Parse {
                position: start,
                message: "expression is not valid UTF-8".to_string(),
            })?
            .to_string();
        if self.peek() == Some(b'(') {
            let Some(op) = Op::from_unary_token(&ident) else {
                self.pos = start;
                return self.fail(format!("unknown operation keyword `{ident}`"));
            };
            self.expect(b'(')?;
            let inner = self.expr()?;
            self.expect(b')')?;
            Ok(FeatureExpr::unary(op, inner))
        } else if self.known.contains(&ident) {
            Ok(FeatureExpr::Leaf(ident))
        } else {
            self.pos = start;
            Err(Error::UnknownColumn(ident))
        }
    }
}

/// A realized feature: its expression, the rendered name, and the column
/// values. The stored values always equal re-evaluating the expression on the
/// original table, because generation itself goes through [`apply_op`].
#[derive(Debug, Clone)]
pub struct Feature {
    pub name: String,
    pub expr: FeatureExpr,
    pub values: Vec<f64>,
}

impl Feature {
    pub fn new(expr: FeatureExpr, values: Vec<f64>) -> Self {
        Feature {
            name: expr.render(),
            expr,
            values,
        }
    }

    /// Wrap an original column.
    pub fn original(name: &str, values: Vec<f64>) -> Self {
        Feature {
            name: name.to_string(),
            expr: FeatureExpr::leaf(name),
            values,
        }
    }

    /// Realize an expression against a table.
    pub fn from_expr(expr: FeatureExpr, table: &DataTable) -> Result<Self> {
        let values = expr.evaluate(table)?;
        Ok(Feature::new(expr, values))
    }
}

/// Borrow all value columns; the layout most numeric code wants.
pub fn value_slices(features: &[Feature]) -> Vec<&[f64]> {
    features.iter().map(|f| f.values.as_slice()).collect()
}

/// Render features as provenance lines: `name<TAB>expression`, one per line.
pub fn render_provenance(features: &[Feature]) -> String {
    let mut out = String::new();
    for f in features {
        out.push_str(&f.name);
        out.push('\t');
        out.push_str(&f.expr.render());
        out.push('\n');
    }
    out
}

/// Parse a provenance document. Empty (or whitespace-only) input yields an
/// empty list, which callers treat as "original features only".
pub fn parse_provenance(text: &str, known: &HashSet<String>) -> Result<Vec<(String, FeatureExpr)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (name, expr_text) = line.split_once('\t').ok_or_else(|| Error::Parse {
            position: i,
            message: format!("provenance line {} has no tab separator", i + 1),
        })?;
        let expr = FeatureExpr::parse(expr_text, known)?;
        out.push((name.to_string(), expr));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;

    fn known(names: &[&str]) -> HashSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn op_order_is_stable() {
        assert_eq!(Op::SquareRoot.index(), 0);
        assert_eq!(Op::Sigmoid.index(), 9);
        assert_eq!(Op::Plus.index(), 10);
        assert_eq!(Op::Divide.index(), 13);
        assert_eq!(Op::COUNT, 14);
        for (i, op) in Op::ALL.iter().enumerate() {
            assert_eq!(Op::from_index(i), Some(*op));
            assert_eq!(op.index(), i);
        }
        assert_eq!(Op::ALL.iter().filter(|o| o.is_binary()).count(), 4);
    }

    #[test]
    fn square_et_al() {
        assert_eq!(
            apply_op(Op::Square, &[2.0, -3.0], None).unwrap(),
            vec![4.0, 9.0]
        );
        assert_eq!(apply_op(Op::Cube, &[-2.0], None).unwrap(), vec![-8.0]);
    }

    #[test]
    fn divide_by_zero_is_zero() {
        assert_eq!(
            apply_op(Op::Divide, &[1.0], Some(&[0.0])).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn log_on_absolute_value() {
        let out = apply_op(Op::Log, &[-1.0, std::f64::consts::E], None).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 1.0).abs() < 1e-15);
        // ln(0) is -inf raw, sanitized to 0.
        assert_eq!(apply_op(Op::Log, &[0.0], None).unwrap(), vec![0.0]);
    }

    #[test]
    fn reciprocal_of_zero_is_zero() {
        assert_eq!(
            apply_op(Op::Reciprocal, &[0.0, 2.0], None).unwrap(),
            vec![0.0, 0.5]
        );
    }

    #[test]
    fn sqrt_on_absolute_value() {
        assert_eq!(
            apply_op(Op::SquareRoot, &[-4.0, 9.0], None).unwrap(),
            vec![2.0, 3.0]
        );
    }

    #[test]
    fn sigmoid_midpoint() {
        assert_eq!(apply_op(Op::Sigmoid, &[0.0], None).unwrap(), vec![0.5]);
    }

    #[test]
    fn overflow_clamps() {
        let out = apply_op(Op::Exp, &[1000.0], None).unwrap();
        assert_eq!(out, vec![0.0]); // exp overflows to inf, sanitized to 0
        let out = apply_op(Op::Multiply, &[1e10], Some(&[1e10])).unwrap();
        assert_eq!(out, vec![CLAMP_LIMIT]);
        let out = apply_op(Op::Subtract, &[-1e300], Some(&[1e300])).unwrap();
        assert_eq!(out, vec![-CLAMP_LIMIT]);
    }

    #[test]
    fn arity_misuse_is_internal_error() {
        assert!(matches!(
            apply_op(Op::Plus, &[1.0], None),
            Err(Error::Internal(_))
        ));
        assert!(matches!(
            apply_op(Op::Square, &[1.0], Some(&[2.0])),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            apply_op(Op::Plus, &[1.0, 2.0], Some(&[1.0])),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn render_examples() {
        let lstat = FeatureExpr::leaf("lstat");
        assert_eq!(
            FeatureExpr::binary(Op::Multiply, lstat.clone(), lstat.clone()).render(),
            "(lstat*lstat)"
        );
        assert_eq!(FeatureExpr::leaf("age").render(), "age");
        assert_eq!(
            FeatureExpr::unary(Op::SquareRoot, FeatureExpr::leaf("x")).render(),
            "sqrt(x)"
        );
    }

    #[test]
    fn parse_examples() {
        let k = known(&["a", "b", "lstat", "age", "x"]);
        assert_eq!(
            FeatureExpr::parse("(a+b)", &k).unwrap(),
            FeatureExpr::binary(Op::Plus, FeatureExpr::leaf("a"), FeatureExpr::leaf("b"))
        );
        assert_eq!(
            FeatureExpr::parse("sigmoid((a/b))", &k).unwrap(),
            FeatureExpr::unary(
                Op::Sigmoid,
                FeatureExpr::binary(Op::Divide, FeatureExpr::leaf("a"), FeatureExpr::leaf("b"))
            )
        );
        assert_eq!(
            FeatureExpr::parse("age", &k).unwrap(),
            FeatureExpr::leaf("age")
        );
    }

    #[test]
    fn parse_unknown_column_fails() {
        let k = known(&["a"]);
        assert!(matches!(
            FeatureExpr::parse("(a+zz)", &k),
            Err(Error::UnknownColumn(n)) if n == "zz"
        ));
    }

    #[test]
    fn parse_syntax_errors() {
        let k = known(&["a", "b"]);
        assert!(matches!(
            FeatureExpr::parse("(a+b", &k),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            FeatureExpr::parse("(a b)", &k),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            FeatureExpr::parse("", &k),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            FeatureExpr::parse("a)", &k),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            FeatureExpr::parse("frob(a)", &k),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn column_named_like_a_keyword_still_parses() {
        let k = known(&["log", "b"]);
        assert_eq!(
            FeatureExpr::parse("log", &k).unwrap(),
            FeatureExpr::leaf("log")
        );
        assert_eq!(
            FeatureExpr::parse("log(log)", &k).unwrap(),
            FeatureExpr::unary(Op::Log, FeatureExpr::leaf("log"))
        );
    }

    fn toy_table() -> DataTable {
        DataTable::new(
            vec![
                ("a".to_string(), vec![1.0, 2.0, 3.0]),
                ("b".to_string(), vec![0.0, 4.0, -2.0]),
            ],
            "y".to_string(),
            vec![0.5, 1.5, 2.5],
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_squares_column() {
        let t = toy_table();
        let e = FeatureExpr::binary(Op::Multiply, FeatureExpr::leaf("a"), FeatureExpr::leaf("a"));
        assert_eq!(e.evaluate(&t).unwrap(), vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn evaluate_leaf_is_bitwise_identity() {
        let t = toy_table();
        assert_eq!(
            FeatureExpr::leaf("b").evaluate(&t).unwrap(),
            t.column("b").unwrap()
        );
    }

    #[test]
    fn evaluate_unknown_column() {
        let t = toy_table();
        assert!(matches!(
            FeatureExpr::leaf("zz").evaluate(&t),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn provenance_round_trip() {
        let t = toy_table();
        let exprs = [
            FeatureExpr::leaf("a"),
            FeatureExpr::unary(Op::Log, FeatureExpr::leaf("b")),
            FeatureExpr::binary(Op::Divide, FeatureExpr::leaf("a"), FeatureExpr::leaf("b")),
        ];
        let features: Vec<Feature> = exprs
            .iter()
            .map(|e| Feature::from_expr(e.clone(), &t).unwrap())
            .collect();
        let text = render_provenance(&features);
        let k = known(&["a", "b"]);
        let parsed = parse_provenance(&text, &k).unwrap();
        assert_eq!(parsed.len(), 3);
        for ((name, expr), feature) in parsed.iter().zip(&features) {
            assert_eq!(name, &feature.name);
            assert_eq!(expr, &feature.expr);
        }
        assert_eq!(parse_provenance("", &k).unwrap(), vec![]);
    }
}
