//! Typed expression trees over feature names.
//!
//! An expression is either numeric (features, constants, arithmetic) or
//! boolean (comparisons, logic). Classifier expressions are boolean-rooted
//! and evaluate to the predicted presence of the target event. Division is
//! protected: `x / 0` evaluates to 0, so evaluation is total.
//!
//! The textual grammar (rule files, suggestion interchange):
//!
//! ```text
//! bool  := bool "||" bool | bool "&&" bool | "!" bool | "(" bool ")" | cmp
//! cmp   := num rel num          rel := ">" | ">=" | "<" | "<=" | "=="
//! num   := num ("+"|"-"|"*"|"/") num | "max(" num "," num ")"
//!        | "min(" num "," num ")" | "(" num ")" | feature | const
//! ```

mod generate;
mod parser;

pub use generate::{clip_depth, gen_boolean, gen_numeric, gen_typed_subtree, random_expr, CONST_POOL};
pub use parser::{parse, parse_syntax};

use std::fmt;

use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector};

/// Tolerance for the `==` comparison on numerics.
pub const EQ_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumOp {
    Add,
    Sub,
    Mul,
    Div,
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Numeric,
    Boolean,
}

/// Expression tree node. Well-typed trees have numeric children under
/// arithmetic and comparisons, boolean children under logic.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Feature(String),
    Const(f64),
    NumBinary(NumOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    BoolBinary(BoolOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn ty(&self) -> ExprType {
        match self {
            Expr::Feature(_) | Expr::Const(_) | Expr::NumBinary(..) => ExprType::Numeric,
            Expr::Compare(..) | Expr::BoolBinary(..) | Expr::Not(_) => ExprType::Boolean,
        }
    }

    /// Node count of the whole tree, leaves included.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Feature(_) | Expr::Const(_) => 1,
            Expr::NumBinary(_, l, r) | Expr::Compare(_, l, r) | Expr::BoolBinary(_, l, r) => {
                1 + l.complexity() + r.complexity()
            }
            Expr::Not(c) => 1 + c.complexity(),
        }
    }

    /// Tree depth with leaves at 0; a comparison over two leaves has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Feature(_) | Expr::Const(_) => 0,
            Expr::NumBinary(_, l, r) | Expr::Compare(_, l, r) | Expr::BoolBinary(_, l, r) => {
                1 + l.depth().max(r.depth())
            }
            Expr::Not(c) => 1 + c.depth(),
        }
    }

    /// Preorder walk of all nodes.
    pub fn nodes(&self) -> Vec<&Expr> {
        let mut out = Vec::with_capacity(self.complexity());
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            out.push(e);
            match e {
                Expr::Feature(_) | Expr::Const(_) => {}
                Expr::NumBinary(_, l, r) | Expr::Compare(_, l, r) | Expr::BoolBinary(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Not(c) => walk(c, out),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Rebuild the tree with the node at preorder index `target` replaced.
    pub fn with_replaced(&self, target: usize, replacement: &Expr) -> Expr {
        fn walk(e: &Expr, idx: &mut usize, target: usize, repl: &Expr) -> Expr {
            let here = *idx;
            *idx += 1;
            if here == target {
                // Skip the subtree we are replacing so sibling indices stay
                // aligned with the preorder of the original tree.
                *idx += e.complexity() - 1;
                return repl.clone();
            }
            match e {
                Expr::Feature(_) | Expr::Const(_) => e.clone(),
                Expr::NumBinary(op, l, r) => Expr::NumBinary(
                    *op,
                    Box::new(walk(l, idx, target, repl)),
                    Box::new(walk(r, idx, target, repl)),
                ),
                Expr::Compare(op, l, r) => Expr::Compare(
                    *op,
                    Box::new(walk(l, idx, target, repl)),
                    Box::new(walk(r, idx, target, repl)),
                ),
                Expr::BoolBinary(op, l, r) => Expr::BoolBinary(
                    *op,
                    Box::new(walk(l, idx, target, repl)),
                    Box::new(walk(r, idx, target, repl)),
                ),
                Expr::Not(c) => Expr::Not(Box::new(walk(c, idx, target, repl))),
            }
        }
        let mut idx = 0;
        walk(self, &mut idx, target, replacement)
    }

    /// Verify internal typing, feature resolution, and constant finiteness.
    /// Returns the root type.
    pub fn check_types(&self, schema: &FeatureSchema) -> Result<ExprType> {
        fn walk(e: &Expr, schema: &FeatureSchema, path: &mut String) -> Result<ExprType> {
            let require = |child: &Expr,
                           schema: &FeatureSchema,
                           path: &mut String,
                           seg: &str,
                           want: ExprType|
             -> Result<()> {
                let len = path.len();
                path.push('.');
                path.push_str(seg);
                let got = walk(child, schema, path)?;
                if got != want {
                    let err = Err(Error::Type {
                        path: path.clone(),
                        msg: format!(
                            "expected {} operand, found {}",
                            type_name(want),
                            type_name(got)
                        ),
                    });
                    path.truncate(len);
                    return err;
                }
                path.truncate(len);
                Ok(())
            };
            match e {
                Expr::Feature(name) => {
                    if schema.contains(name) {
                        Ok(ExprType::Numeric)
                    } else {
                        Err(Error::UnknownFeature(name.clone()))
                    }
                }
                Expr::Const(v) => {
                    if v.is_finite() {
                        Ok(ExprType::Numeric)
                    } else {
                        Err(Error::Type {
                            path: path.clone(),
                            msg: format!("non-finite constant {v}"),
                        })
                    }
                }
                Expr::NumBinary(_, l, r) => {
                    require(l, schema, path, "left", ExprType::Numeric)?;
                    require(r, schema, path, "right", ExprType::Numeric)?;
                    Ok(ExprType::Numeric)
                }
                Expr::Compare(_, l, r) => {
                    require(l, schema, path, "left", ExprType::Numeric)?;
                    require(r, schema, path, "right", ExprType::Numeric)?;
                    Ok(ExprType::Boolean)
                }
                Expr::BoolBinary(_, l, r) => {
                    require(l, schema, path, "left", ExprType::Boolean)?;
                    require(r, schema, path, "right", ExprType::Boolean)?;
                    Ok(ExprType::Boolean)
                }
                Expr::Not(c) => {
                    require(c, schema, path, "child", ExprType::Boolean)?;
                    Ok(ExprType::Boolean)
                }
            }
        }
        let mut path = String::from("root");
        walk(self, schema, &mut path)
    }

    /// Check that this is a well-typed classifier: boolean root, resolved
    /// features, finite constants.
    pub fn check_classifier(&self, schema: &FeatureSchema) -> Result<()> {
        match self.check_types(schema)? {
            ExprType::Boolean => Ok(()),
            ExprType::Numeric => Err(Error::Type {
                path: "root".to_string(),
                msg: "expected boolean expression, found numeric".to_string(),
            }),
        }
    }
}

fn type_name(t: ExprType) -> &'static str {
    match t {
        ExprType::Numeric => "numeric",
        ExprType::Boolean => "boolean",
    }
}

/// Evaluate a boolean-rooted expression against one feature vector.
///
/// Strict semantics: both operands of `&&`/`||` are computed. `x / 0` is 0,
/// and any non-finite arithmetic result collapses to 0, so evaluation never
/// fails on well-typed input.
pub fn evaluate(expr: &Expr, features: &FeatureVector, schema: &FeatureSchema) -> Result<bool> {
    eval_bool(expr, features, schema)
}

fn eval_bool(expr: &Expr, features: &FeatureVector, schema: &FeatureSchema) -> Result<bool> {
    match expr {
        Expr::Compare(op, l, r) => {
            let l = eval_num(l, features, schema)?;
            let r = eval_num(r, features, schema)?;
            Ok(match op {
                CmpOp::Gt => l > r,
                CmpOp::Ge => l >= r,
                CmpOp::Lt => l < r,
                CmpOp::Le => l <= r,
                CmpOp::Eq => (l - r).abs() <= EQ_TOLERANCE,
            })
        }
        Expr::BoolBinary(op, l, r) => {
            let l = eval_bool(l, features, schema)?;
            let r = eval_bool(r, features, schema)?;
            Ok(match op {
                BoolOp::And => l && r,
                BoolOp::Or => l || r,
            })
        }
        Expr::Not(c) => Ok(!eval_bool(c, features, schema)?),
        other => Err(Error::Type {
            path: "root".to_string(),
            msg: format!("cannot evaluate numeric node {other} as boolean"),
        }),
    }
}

fn eval_num(expr: &Expr, features: &FeatureVector, schema: &FeatureSchema) -> Result<f64> {
    match expr {
        Expr::Feature(name) => {
            let idx = schema
                .index_of(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            Ok(features.values[idx])
        }
        Expr::Const(v) => Ok(*v),
        Expr::NumBinary(op, l, r) => {
            let l = eval_num(l, features, schema)?;
            let r = eval_num(r, features, schema)?;
            let v = match op {
                NumOp::Add => l + r,
                NumOp::Sub => l - r,
                NumOp::Mul => l * r,
                NumOp::Div => {
                    if r == 0.0 {
                        0.0
                    } else {
                        l / r
                    }
                }
                NumOp::Max => l.max(r),
                NumOp::Min => l.min(r),
            };
            Ok(if v.is_finite() { v } else { 0.0 })
        }
        other => Err(Error::Type {
            path: "root".to_string(),
            msg: format!("cannot evaluate boolean node {other} as numeric"),
        }),
    }
}

impl NumOp {
    fn token(self) -> &'static str {
        match self {
            NumOp::Add => "+",
            NumOp::Sub => "-",
            NumOp::Mul => "*",
            NumOp::Div => "/",
            NumOp::Max => "max",
            NumOp::Min => "min",
        }
    }
}

impl CmpOp {
    fn token(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
        }
    }
}

impl BoolOp {
    fn token(self) -> &'static str {
        match self {
            BoolOp::And => "&&",
            BoolOp::Or => "||",
        }
    }
}

/// Canonical fully-parenthesized form; `parse(print(e))` is structurally `e`.
/// No simplification is performed.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Feature(name) => write!(f, "{name}"),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::NumBinary(op @ (NumOp::Max | NumOp::Min), l, r) => {
                write!(f, "{}({l}, {r})", op.token())
            }
            Expr::NumBinary(op, l, r) => write!(f, "({l} {} {r})", op.token()),
            Expr::Compare(op, l, r) => write!(f, "({l} {} {r})", op.token()),
            Expr::BoolBinary(op, l, r) => write!(f, "({l} {} {r})", op.token()),
            Expr::Not(c) => write!(f, "(!{c})"),
        }
    }
}

/// Canonical printed text of an expression.
pub fn print(expr: &Expr) -> String {
    expr.to_string()
}
