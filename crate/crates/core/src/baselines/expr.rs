//! Boolean expressions over named masks.
//!
//! ```text
//! expr    := term ("OR" term)*
//! term    := factor ("AND" factor)*
//! factor  := "NOT" factor | name | "(" expr ")"
//! name    := [A-Za-z0-9_]+ (other than a keyword)
//! ```
//!
//! Keywords are case-insensitive. Positions in errors are 1-based character
//! offsets; the end of input is reported as `len + 1`.

use std::fmt;

use super::MaskSet;
use crate::{Error, Mask, Plane, Result, BACKGROUND, FOREGROUND};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FusionExpr {
    Name(String),
    Not(Box<FusionExpr>),
    And(Box<FusionExpr>, Box<FusionExpr>),
    Or(Box<FusionExpr>, Box<FusionExpr>),
}

impl fmt::Display for FusionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionExpr::Name(n) => write!(f, "{n}"),
            FusionExpr::Not(e) => write!(f, "NOT({e})"),
            FusionExpr::And(a, b) => write!(f, "AND({a}, {b})"),
            FusionExpr::Or(a, b) => write!(f, "OR({a}, {b})"),
        }
    }
}

impl FusionExpr {
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            FusionExpr::Name(n) => out.push(n),
            FusionExpr::Not(e) => e.collect_names(out),
            FusionExpr::And(a, b) | FusionExpr::Or(a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    And,
    Or,
    Not,
    Open,
    Close,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("name `{n}`"),
        Tok::And => "AND".into(),
        Tok::Or => "OR".into(),
        Tok::Not => "NOT".into(),
        Tok::Open => "`(`".into(),
        Tok::Close => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            toks.push((Tok::Open, pos));
            i += 1;
        } else if c == ')' {
            toks.push((Tok::Close, pos));
            i += 1;
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.to_ascii_uppercase().as_str() {
                "AND" => Tok::And,
                "OR" => Tok::Or,
                "NOT" => Tok::Not,
                _ => Tok::Name(word),
            };
            toks.push((tok, pos));
        } else {
            return Err(Error::Parse {
                position: pos,
                message: format!("unknown token `{c}`"),
            });
        }
    }
    toks.push((Tok::End, chars.len() + 1));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<FusionExpr> {
        let mut lhs = self.term()?;
        while self.peek().0 == Tok::Or {
            self.bump();
            lhs = FusionExpr::Or(Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<FusionExpr> {
        let mut lhs = self.factor()?;
        while self.peek().0 == Tok::And {
            self.bump();
            lhs = FusionExpr::And(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<FusionExpr> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Not => Ok(FusionExpr::Not(Box::new(self.factor()?))),
            Tok::Name(n) => Ok(FusionExpr::Name(n)),
            Tok::Open => {
                let inner = self.expr()?;
                let (close, cpos) = self.bump();
                if close != Tok::Close {
                    return Err(Error::Parse {
                        position: cpos,
                        message: format!("expected `)` to close `(` at {pos}, found {}", describe(&close)),
                    });
                }
                Ok(inner)
            }
            other => Err(Error::Parse {
                position: pos,
                message: format!("expected a mask name, NOT or `(`, found {}", describe(&other)),
            }),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<FusionExpr> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            position: 1,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
    };
    let e = p.expr()?;
    let (tok, pos) = p.peek().clone();
    if tok != Tok::End {
        let message = if tok == Tok::Close {
            "unbalanced `)`".to_string()
        } else {
            format!("unexpected {}", describe(&tok))
        };
        return Err(Error::Parse { position: pos, message });
    }
    Ok(e)
}

fn eval_bits(expr: &FusionExpr, set: &MaskSet) -> Result<Vec<bool>> {
    Ok(match expr {
        FusionExpr::Name(n) => set
            .get(n)
            .ok_or_else(|| Error::UnboundName(n.clone()))?
            .data()
            .iter()
            .map(|&v| v == FOREGROUND)
            .collect(),
        FusionExpr::Not(e) => eval_bits(e, set)?.into_iter().map(|b| !b).collect(),
        FusionExpr::And(a, b) => {
            let (a, b) = (eval_bits(a, set)?, eval_bits(b, set)?);
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        FusionExpr::Or(a, b) => {
            let (a, b) = (eval_bits(a, set)?, eval_bits(b, set)?);
            a.into_iter().zip(b).map(|(x, y)| x || y).collect()
        }
    })
}

/// Evaluates the expression pixel by pixel.
pub fn eval_expr(expr: &FusionExpr, set: &MaskSet) -> Result<Mask> {
    if let Some(missing) = expr.names().into_iter().find(|n| set.get(n).is_none()) {
        return Err(Error::UnboundName(missing.to_string()));
    }
    let (w, h) = set.dims();
    let data = eval_bits(expr, set)?
        .into_iter()
        .map(|b| if b { FOREGROUND } else { BACKGROUND })
        .collect();
    Plane::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(n: &str) -> Box<FusionExpr> {
        Box::new(FusionExpr::Name(n.into()))
    }

    fn position(text: &str) -> usize {
        match parse_expr(text) {
            Err(Error::Parse { position, .. }) => position,
            other => panic!("expected parse error for {text:?}, got {other:?}"),
        }
    }

    #[test]
    fn parentheses_group() {
        let e = parse_expr("A AND (B OR C)").unwrap();
        assert_eq!(e, FusionExpr::And(name("A"), Box::new(FusionExpr::Or(name("B"), name("C")))));
        assert_eq!(e.to_string(), "AND(A, OR(B, C))");
    }

    #[test]
    fn precedence_not_and_or() {
        assert_eq!(
            parse_expr("NOT A AND B").unwrap(),
            FusionExpr::And(Box::new(FusionExpr::Not(name("A"))), name("B"))
        );
        assert_eq!(parse_expr("A OR B AND C").unwrap().to_string(), "OR(A, AND(B, C))");
        assert_eq!(parse_expr("a and b and c").unwrap().to_string(), "AND(AND(a, b), c)");
    }

    #[test]
    fn error_positions() {
        assert_eq!(position("A OR"), 5);
        assert_eq!(position("A $ B"), 3);
        assert_eq!(position("(A OR B"), 8);
        assert_eq!(position("A OR B)"), 7);
        assert_eq!(position("A B"), 3);
        assert_eq!(position("AND A"), 1);
        assert_eq!(position("   "), 1);
    }

    fn set() -> MaskSet {
        let a = Plane::new(4, 1, vec![255, 255, 0, 0]).unwrap();
        let b = Plane::new(4, 1, vec![0, 0, 255, 255]).unwrap();
        MaskSet::from_masks(vec![a, b]).unwrap()
    }

    #[test]
    fn evaluation() {
        let s = set();
        assert_eq!(eval_expr(&parse_expr("A AND B").unwrap(), &s).unwrap(), Plane::filled(4, 1, 0));
        assert_eq!(eval_expr(&parse_expr("A OR NOT A").unwrap(), &s).unwrap(), Plane::filled(4, 1, 255));
        assert_eq!(&eval_expr(&parse_expr("A").unwrap(), &s).unwrap(), s.get("A").unwrap());
        assert!(matches!(
            eval_expr(&parse_expr("A OR Q").unwrap(), &s),
            Err(Error::UnboundName(n)) if n == "Q"
        ));
    }
}
