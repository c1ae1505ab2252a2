//! Human-readable expression text: fully parenthesized infix for the four
//! arithmetic operators, call syntax for everything else (`sin(x0)`,
//! `max(a, b)`, `modi2(a, b)`), and the companion parser.

use crate::error::{Error, Result};
use crate::funcs::FunctionSet;
use crate::tree::{decode_tree, RefTree, TreeSlice};

/// Render an encoded tree as expression text.
pub fn to_infix_string(s: TreeSlice<'_>, fs: &FunctionSet) -> Result<String> {
    let t = decode_tree(s, fs)?;
    let mut out = String::new();
    write_ref(&t, fs, &mut out);
    Ok(out)
}

/// Render a pointer tree as expression text.
pub fn ref_to_string(t: &RefTree, fs: &FunctionSet) -> String {
    let mut out = String::new();
    write_ref(t, fs, &mut out);
    out
}

fn write_ref(t: &RefTree, fs: &FunctionSet, out: &mut String) {
    use std::fmt::Write;
    match t {
        RefTree::Const(v) => {
            let _ = write!(out, "{v:?}");
        }
        RefTree::Var(i) => {
            let _ = write!(out, "x{i}");
        }
        RefTree::Unary { id, arg } => {
            let name = fs.op(*id).map(|o| o.name()).unwrap_or("?");
            let _ = write!(out, "{name}(");
            write_ref(arg, fs, out);
            out.push(')');
        }
        RefTree::Binary { id, left, right } => {
            let op = fs.op(*id);
            match op {
                Some(o) if o.is_infix() => {
                    out.push('(');
                    write_ref(left, fs, out);
                    let _ = write!(out, " {} ", o.name());
                    write_ref(right, fs, out);
                    out.push(')');
                }
                _ => {
                    let name = op.map(|o| o.name()).unwrap_or("?");
                    let _ = write!(out, "{name}(");
                    write_ref(left, fs, out);
                    out.push_str(", ");
                    write_ref(right, fs, out);
                    out.push(')');
                }
            }
        }
        RefTree::Modi { out: slot, left, right } => {
            let _ = write!(out, "modi{slot}(");
            write_ref(left, fs, out);
            out.push_str(", ");
            write_ref(right, fs, out);
            out.push(')');
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '+' | '*' | '/' => {
                tokens.push(Token::Op(c));
                i += 1;
            }
            '-' => {
                // Minus starts a number only in operand position.
                let operand_pos = matches!(
                    tokens.last(),
                    None | Some(Token::LParen) | Some(Token::Comma) | Some(Token::Op(_))
                );
                let next_is_digit = bytes
                    .get(i + 1)
                    .map(|&b| b.is_ascii_digit() || b == b'.')
                    .unwrap_or(false);
                if operand_pos && next_is_digit {
                    let (v, end) = lex_number(text, i)?;
                    tokens.push(Token::Num(v));
                    i = end;
                } else {
                    tokens.push(Token::Op('-'));
                    i += 1;
                }
            }
            '0'..='9' | '.' => {
                let (v, end) = lex_number(text, i)?;
                tokens.push(Token::Num(v));
                i = end;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(text[start..i].to_string()));
            }
            other => return Err(Error::ExprParse(format!("unexpected character {other:?}"))),
        }
    }
    Ok(tokens)
}

fn lex_number(text: &str, start: usize) -> Result<(f64, usize)> {
    let bytes = text.as_bytes();
    let mut i = start;
    if bytes[i] == b'-' {
        i += 1;
    }
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    let lit = &text[start..i];
    lit.parse::<f64>()
        .map(|v| (v, i))
        .map_err(|_| Error::ExprParse(format!("bad number literal {lit:?}")))
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    fs: &'a FunctionSet,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::ExprParse("unexpected end of expression".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<()> {
        let got = self.next()?;
        if &got != want {
            return Err(Error::ExprParse(format!("expected {what}, found {got:?}")));
        }
        Ok(())
    }

    fn parse_expr(&mut self) -> Result<RefTree> {
        match self.next()? {
            Token::Num(v) => Ok(RefTree::Const(v)),
            Token::Ident(name) => self.parse_ident(name),
            Token::LParen => {
                // Fully parenthesized infix binary.
                let left = self.parse_expr()?;
                let op = match self.next()? {
                    Token::Op(c) => c,
                    other => {
                        return Err(Error::ExprParse(format!(
                            "expected infix operator, found {other:?}"
                        )))
                    }
                };
                let right = self.parse_expr()?;
                self.expect(&Token::RParen, "closing parenthesis")?;
                let id = self
                    .fs
                    .id_of(&op.to_string())
                    .ok_or_else(|| Error::ExprParse(format!("operator {op:?} not in function set")))?;
                Ok(RefTree::binary(id, left, right))
            }
            other => Err(Error::ExprParse(format!("unexpected token {other:?}"))),
        }
    }

    fn parse_ident(&mut self, name: String) -> Result<RefTree> {
        if let Some(idx) = suffix_index(&name, "x") {
            return Ok(RefTree::Var(idx));
        }
        if let Some(out) = suffix_index(&name, "modi") {
            self.expect(&Token::LParen, "opening parenthesis")?;
            let left = self.parse_expr()?;
            self.expect(&Token::Comma, "comma")?;
            let right = self.parse_expr()?;
            self.expect(&Token::RParen, "closing parenthesis")?;
            return Ok(RefTree::modi(out, left, right));
        }
        let id = self
            .fs
            .id_of(&name)
            .ok_or_else(|| Error::ExprParse(format!("unknown function {name:?}")))?;
        self.expect(&Token::LParen, "opening parenthesis")?;
        let first = self.parse_expr()?;
        match self.fs.arity(id).unwrap() {
            1 => {
                self.expect(&Token::RParen, "closing parenthesis")?;
                Ok(RefTree::unary(id, first))
            }
            _ => {
                self.expect(&Token::Comma, "comma")?;
                let second = self.parse_expr()?;
                self.expect(&Token::RParen, "closing parenthesis")?;
                Ok(RefTree::binary(id, first, second))
            }
        }
    }
}

fn suffix_index(name: &str, prefix: &str) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Parse expression text into a pointer tree. Variable and output indices
/// are range-checked later, when the tree is encoded against a config.
pub fn parse_infix(text: &str, fs: &FunctionSet) -> Result<RefTree> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        fs,
    };
    let tree = p.parse_expr()?;
    if p.peek().is_some() {
        return Err(Error::ExprParse(format!(
            "trailing input after expression: {:?}",
            &p.tokens[p.pos..]
        )));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{encode_tree, EncodingConfig};

    fn cfg() -> EncodingConfig {
        EncodingConfig::new(64, 4, 3)
    }

    #[test]
    fn prints_examples() {
        let fs = FunctionSet::standard();
        let plus = RefTree::binary(0, RefTree::Var(0), RefTree::Const(1.0));
        let enc = encode_tree(&plus, &cfg(), &fs).unwrap();
        assert_eq!(to_infix_string(enc.as_slice(), &fs).unwrap(), "(x0 + 1.0)");

        let sin = RefTree::unary(4, RefTree::Var(1));
        let enc = encode_tree(&sin, &cfg(), &fs).unwrap();
        assert_eq!(to_infix_string(enc.as_slice(), &fs).unwrap(), "sin(x1)");
    }

    #[test]
    fn prints_modi_and_calls() {
        let fs = FunctionSet::with_min_max();
        let t = RefTree::modi(
            2,
            RefTree::binary(7, RefTree::Var(0), RefTree::Var(1)),
            RefTree::Const(0.5),
        );
        let enc = encode_tree(&t, &cfg(), &fs).unwrap();
        assert_eq!(
            to_infix_string(enc.as_slice(), &fs).unwrap(),
            "modi2(max(x0, x1), 0.5)"
        );
    }

    #[test]
    fn parser_round_trips() {
        let fs = FunctionSet::with_min_max();
        let cases = [
            "(x0 + 1.0)",
            "sin(x1)",
            "(tan((x0 - -2.5)) / min(x2, 0.125))",
            "modi0((x1 * x1), modi2(cos(x3), 7.0))",
            "3.0",
            "-0.5",
        ];
        for text in cases {
            let t = parse_infix(text, &fs).unwrap();
            assert_eq!(ref_to_string(&t, &fs), text, "case {text}");
        }
    }

    #[test]
    fn parser_rejects_garbage() {
        let fs = FunctionSet::standard();
        assert!(parse_infix("", &fs).is_err());
        assert!(parse_infix("(x0 +", &fs).is_err());
        assert!(parse_infix("foo(x0)", &fs).is_err());
        assert!(parse_infix("x0 x1", &fs).is_err());
        assert!(parse_infix("max(x0, x1)", &fs).is_err(), "max not in standard set");
    }

    #[test]
    fn variable_bounds_check_happens_at_encode() {
        let fs = FunctionSet::standard();
        let t = parse_infix("x9", &fs).unwrap();
        let narrow = EncodingConfig::new(8, 2, 1);
        assert!(matches!(
            encode_tree(&t, &narrow, &fs),
            Err(crate::error::Error::IllegalValue { .. })
        ));
    }
}
