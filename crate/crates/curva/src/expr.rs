//! Closed-form prescriptions: numbers, `x y r θ pi`, `+ - * / ^`, and
//! `exp log sin cos tanh sqrt`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        match c {
            c if c.is_whitespace() => k += 1,
            '0'..='9' | '.' => {
                let start = k;
                while k < chars.len() && (chars[k].1.is_ascii_digit() || chars[k].1 == '.') {
                    k += 1;
                }
                if k < chars.len() && matches!(chars[k].1, 'e' | 'E') {
                    let mut j = k + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-' | '−') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        k = j;
                        while k < chars.len() && chars[k].1.is_ascii_digit() {
                            k += 1;
                        }
                    }
                }
                let text: String = chars[start..k].iter().map(|&(_, c)| if c == '−' { '-' } else { c }).collect();
                let v = text.parse().map_err(|_| Error::Expression(format!("bad number `{text}` at {pos}")))?;
                out.push((pos, Tok::Num(v)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = k;
                while k < chars.len() && (chars[k].1.is_alphanumeric() || chars[k].1 == '_') {
                    k += 1;
                }
                out.push((pos, Tok::Ident(chars[start..k].iter().map(|&(_, c)| c).collect())));
            }
            '+' | '*' | '/' | '^' => {
                out.push((pos, Tok::Op(c)));
                k += 1;
            }
            '-' | '−' => {
                out.push((pos, Tok::Op('-')));
                k += 1;
            }
            '(' => {
                out.push((pos, Tok::Open));
                k += 1;
            }
            ')' => {
                out.push((pos, Tok::Close));
                k += 1;
            }
            _ => return Err(Error::Expression(format!("unexpected `{c}` at {pos}"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    k: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.k).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.k).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(Error::Expression(format!("{what} at {}", self.pos())))
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.k += 1;
            let rhs = self.product()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.k += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // -x^2 is -(x^2)
    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.k += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.k += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.k += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("unexpected end of expression");
        };
        self.k += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Open => {
                let e = self.sum()?;
                if self.peek() != Some(&Tok::Close) {
                    return self.fail("expected `)`");
                }
                self.k += 1;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tanh" => Some(Func::Tanh),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    if self.peek() != Some(&Tok::Open) {
                        return self.fail(&format!("expected `(` after {name}"));
                    }
                    return Ok(Expr::Call(f, Box::new(self.atom()?)));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "r" => Ok(Expr::Var(Var::R)),
                    "theta" | "θ" => Ok(Expr::Var(Var::Theta)),
                    "pi" | "π" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => {
                        self.k -= 1;
                        self.fail(&format!("unknown name `{name}`"))
                    }
                }
            }
            Tok::Op(c) => {
                self.k -= 1;
                self.fail(&format!("unexpected `{c}`"))
            }
            Tok::Close => {
                self.k -= 1;
                self.fail("unexpected `)`")
            }
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = lex(src)?;
        let mut p = Parser { toks, k: 0, len: src.len() };
        let e = p.sum()?;
        if p.k != p.toks.len() {
            return p.fail("trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64, r: f64, theta: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::R) => r,
            Expr::Var(Var::Theta) => theta,
            Expr::Neg(e) => -e.eval(x, y, r, theta),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y, r, theta), b.eval(x, y, r, theta));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x, y, r, theta);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tanh => v.tanh(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }
}
