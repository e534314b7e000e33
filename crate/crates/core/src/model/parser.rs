//! Recursive-descent parser for `.hyp` model files.
//!
//! ```text
//! model   := 'hypothesis' (IDENT | STRING) '{' item* '}'
//! item    := 'id' '=' NUMBER ';'
//!          | 'param' IDENT (',' IDENT)* ';'
//!          | 'dim' IDENT (',' IDENT)* ';'
//!          | 'out' IDENT '=' expr ';'
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | IDENT | 'sqrt' '(' expr ')' | '(' expr ')'
//! ```
//!
//! `#` and `//` start comments that run to the end of the line.

use super::ast::{BinOp, Expr};
use super::{ModelError, Output, RawModel};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax { line, col, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>, ModelError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let bump = |i: &mut usize, col: &mut usize| {
            *i += 1;
            *col += 1;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            bump(&mut i, &mut col);
        } else if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut col);
            }
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump(&mut i, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    col += j - i;
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| syntax(start_line, start_col, format!("invalid number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), line: start_line, col: start_col });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump(&mut i, &mut col);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: start_line, col: start_col });
        } else if c == '"' {
            bump(&mut i, &mut col);
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                bump(&mut i, &mut col);
            }
            if chars.get(i) != Some(&'"') {
                return Err(syntax(start_line, start_col, "unterminated string"));
            }
            let s: String = chars[start..i].iter().collect();
            bump(&mut i, &mut col);
            out.push(Token { tok: Tok::Str(s), line: start_line, col: start_col });
        } else if "{}();,=+-*/^".contains(c) {
            bump(&mut i, &mut col);
            out.push(Token { tok: Tok::Sym(c), line: start_line, col: start_col });
        } else {
            return Err(syntax(line, col, format!("unexpected character `{c}`")));
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ModelError {
        let t = self.peek();
        syntax(t.line, t.col, msg)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ModelError> {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(format!("expected `{c}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ModelError> {
        match &self.peek().tok {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => Err(self.err_here(format!("expected identifier, found {}", describe(other)))),
        }
    }

    fn keyword(&self) -> Option<&str> {
        match &self.peek().tok {
            Tok::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn model(&mut self) -> Result<RawModel, ModelError> {
        if self.keyword() != Some("hypothesis") {
            return Err(self.err_here("expected `hypothesis`"));
        }
        self.next();
        let name = match self.next().tok {
            Tok::Ident(s) | Tok::Str(s) => s,
            other => {
                self.pos -= 1;
                return Err(self.err_here(format!("expected hypothesis name, found {}", describe(&other))));
            }
        };
        self.expect_sym('{')?;
        let mut m = RawModel { name, ..RawModel::default() };
        loop {
            if self.eat_sym('}') {
                break;
            }
            let (line, col) = (self.peek().line, self.peek().col);
            match self.keyword() {
                Some("id") => {
                    self.next();
                    self.expect_sym('=')?;
                    match self.next().tok {
                        Tok::Num(n) if n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                            if m.id.is_some() {
                                return Err(syntax(line, col, "duplicate `id` clause"));
                            }
                            m.id = Some(n as u32);
                        }
                        _ => return Err(syntax(line, col, "`id` must be a positive integer")),
                    }
                }
                Some("param") | Some("dim") => {
                    let is_param = self.keyword() == Some("param");
                    self.next();
                    loop {
                        let (l, c) = (self.peek().line, self.peek().col);
                        let name = self.ident()?;
                        m.positions.insert(name.clone(), (l, c));
                        if is_param {
                            m.params.push(name);
                        } else {
                            m.dims.push(name);
                        }
                        if !self.eat_sym(',') {
                            break;
                        }
                    }
                }
                Some("out") => {
                    self.next();
                    let name = self.ident()?;
                    m.positions.insert(name.clone(), (line, col));
                    self.expect_sym('=')?;
                    let expr = self.expr()?;
                    m.outputs.push(Output { name, expr });
                }
                _ => {
                    return Err(self.err_here(format!("expected `id`, `param`, `dim`, `out` or `}}`, found {}", describe(&self.peek().tok))))
                }
            }
            self.expect_sym(';')?;
        }
        if self.peek().tok != Tok::Eof {
            return Err(self.err_here("unexpected input after model"));
        }
        Ok(m)
    }

    fn expr(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ModelError> {
        if self.eat_sym('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ModelError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Sym('^') {
            let (line, col) = (self.peek().line, self.peek().col);
            self.next();
            let exp = self.unary()?;
            if !exp.is_constant() {
                return Err(ModelError::NonConstantExponent { line, col });
            }
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ModelError> {
        let t = self.next();
        match t.tok {
            Tok::Num(n) => Ok(Expr::Const(n)),
            Tok::Ident(ref s) if s == "sqrt" => {
                self.expect_sym('(')?;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(Expr::Sqrt(Box::new(e)))
            }
            Tok::Ident(s) if !is_keyword(&s) => Ok(Expr::Var(s)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            other => Err(syntax(t.line, t.col, format!("expected expression, found {}", describe(&other)))),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "hypothesis" | "id" | "param" | "dim" | "out" | "sqrt")
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Num(n) => format!("number {n}"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

pub(super) fn parse_raw(src: &str) -> Result<RawModel, ModelError> {
    let toks = lex(src)?;
    Parser { toks, pos: 0 }.model()
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(src: &str) -> Result<Expr, ModelError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err_here("unexpected input after expression"));
    }
    Ok(e)
}
