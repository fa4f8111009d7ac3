//! Recursive-descent parser for the expression grammar.
//!
//! Parsing is untyped (one unified precedence ladder), followed by a type
//! check against the active schema. Precedence, loosest to tightest:
//! `||`, `&&`, comparisons, `+ -`, `* /`, `!`, atoms.

use crate::error::{Error, Result};
use crate::features::FeatureSchema;

use super::{BoolOp, CmpOp, Expr, NumOp};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Bang,
    AndAnd,
    OrOr,
    Gt,
    Ge,
    Lt,
    Le,
    EqEq,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '!' => {
                tokens.push((Token::Bang, i));
                i += 1;
            }
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    tokens.push((Token::AndAnd, i));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        position: i,
                        msg: "expected '&&'".to_string(),
                    });
                }
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    tokens.push((Token::OrOr, i));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        position: i,
                        msg: "expected '||'".to_string(),
                    });
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((Token::Ge, i));
                    i += 2;
                } else {
                    tokens.push((Token::Gt, i));
                    i += 1;
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((Token::Le, i));
                    i += 2;
                } else {
                    tokens.push((Token::Lt, i));
                    i += 1;
                }
            }
            '=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    tokens.push((Token::EqEq, i));
                    i += 2;
                } else {
                    return Err(Error::Parse {
                        position: i,
                        msg: "expected '=='".to_string(),
                    });
                }
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()) {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let raw = &text[start..i];
                let value: f64 = raw.parse().map_err(|_| Error::Parse {
                    position: start,
                    msg: format!("invalid number '{raw}'"),
                })?;
                tokens.push((Token::Number(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(Error::Parse {
                    position: i,
                    msg: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.input_len)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Token, desc: &str) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                position: self.position(),
                msg: format!("expected {desc}"),
            })
        }
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut left = self.and_expr()?;
        while self.peek() == Some(&Token::OrOr) {
            self.pos += 1;
            let right = self.and_expr()?;
            left = Expr::BoolBinary(BoolOp::Or, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut left = self.cmp_expr()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.pos += 1;
            let right = self.cmp_expr()?;
            left = Expr::BoolBinary(BoolOp::And, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cmp_expr(&mut self) -> Result<Expr> {
        let left = self.sum_expr()?;
        let op = match self.peek() {
            Some(Token::Gt) => CmpOp::Gt,
            Some(Token::Ge) => CmpOp::Ge,
            Some(Token::Lt) => CmpOp::Lt,
            Some(Token::Le) => CmpOp::Le,
            Some(Token::EqEq) => CmpOp::Eq,
            _ => return Ok(left),
        };
        self.pos += 1;
        let right = self.sum_expr()?;
        Ok(Expr::Compare(op, Box::new(left), Box::new(right)))
    }

    fn sum_expr(&mut self) -> Result<Expr> {
        let mut left = self.product_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => NumOp::Add,
                Some(Token::Minus) => NumOp::Sub,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.product_expr()?;
            left = Expr::NumBinary(op, Box::new(left), Box::new(right));
        }
    }

    fn product_expr(&mut self) -> Result<Expr> {
        let mut left = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => NumOp::Mul,
                Some(Token::Slash) => NumOp::Div,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.unary_expr()?;
            left = Expr::NumBinary(op, Box::new(left), Box::new(right));
        }
    }

    fn unary_expr(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Token::Bang) {
            self.pos += 1;
            let child = self.unary_expr()?;
            return Ok(Expr::Not(Box::new(child)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.position();
        match self.bump().cloned() {
            Some(Token::LParen) => {
                let inner = self.or_expr()?;
                self.expect(&Token::RParen, "')'")?;
                Ok(inner)
            }
            Some(Token::Number(v)) => Ok(Expr::Const(v)),
            Some(Token::Minus) => match self.bump().cloned() {
                Some(Token::Number(v)) => Ok(Expr::Const(-v)),
                _ => Err(Error::Parse {
                    position,
                    msg: "expected number after unary '-'".to_string(),
                }),
            },
            Some(Token::Ident(name)) => {
                if (name == "max" || name == "min") && self.peek() == Some(&Token::LParen) {
                    self.pos += 1;
                    let left = self.or_expr()?;
                    self.expect(&Token::Comma, "','")?;
                    let right = self.or_expr()?;
                    self.expect(&Token::RParen, "')'")?;
                    let op = if name == "max" { NumOp::Max } else { NumOp::Min };
                    return Ok(Expr::NumBinary(op, Box::new(left), Box::new(right)));
                }
                Ok(Expr::Feature(name))
            }
            Some(_) => Err(Error::Parse {
                position,
                msg: "expected expression".to_string(),
            }),
            None => Err(Error::Parse {
                position,
                msg: "unexpected end of input".to_string(),
            }),
        }
    }
}

/// Parse the grammar without resolving features or checking types.
pub fn parse_syntax(text: &str) -> Result<Expr> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        input_len: text.len(),
    };
    let expr = parser.or_expr()?;
    if parser.pos != tokens.len() {
        return Err(Error::Parse {
            position: parser.position(),
            msg: "trailing input after expression".to_string(),
        });
    }
    Ok(expr)
}

/// Parse a classifier expression: syntax, then a type check (boolean root,
/// resolved features) against the schema.
pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Expr> {
    let expr = parse_syntax(text)?;
    expr.check_classifier(schema)?;
    Ok(expr)
}
