//! Scalar expressions over named variables, used for the `f`, `g` and
//! nonlinearity fields of experiment configs.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest and
//! associates to the right, unary minus sits below it), parentheses, numeric
//! literals, the constants `pi` and `e`, and the functions `abs sin cos tan
//! exp log sqrt` (one argument) and `min max` (two arguments).

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    /// 1-based character column of the offending token.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Self::Abs,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            "min" => Self::Min,
            "max" => Self::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Self::Min | Self::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => a.eval(vars).powf(b.eval(vars)),
            Node::Call(f, args) => {
                let a = args[0].eval(vars);
                match f {
                    Func::Abs => a.abs(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Min => a.min(args[1].eval(vars)),
                    Func::Max => a.max(args[1].eval(vars)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

impl Lexer {
    fn new(src: &str) -> Result<Self, ExprError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| ExprError {
                    column: col,
                    message: format!("malformed number '{text}'"),
                })?;
                toks.push((Tok::Num(v), col));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else if "+-*/^(),".contains(c) {
                toks.push((Tok::Op(c), col));
                i += 1;
            } else {
                return Err(ExprError {
                    column: col,
                    message: format!("unexpected character '{c}'"),
                });
            }
        }
        toks.push((Tok::End, chars.len() + 1));
        Ok(Self { toks })
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if *self.peek() == Tok::Op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let col = self.column();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(f) = Func::lookup(&name) {
                    if !self.eat('(') {
                        return self.err(format!("expected '(' after function '{name}'"));
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return self.err("expected ',' or ')' in argument list");
                    }
                    if args.len() != f.arity() {
                        return Err(ExprError {
                            column: col,
                            message: format!(
                                "function '{name}' takes {} argument(s), got {}",
                                f.arity(),
                                args.len()
                            ),
                        });
                    }
                    return Ok(Node::Call(f, args));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ExprError {
                        column: col,
                        message: format!(
                            "unknown identifier '{name}' (variables: {})",
                            self.vars.join(", ")
                        ),
                    }),
                }
            }
            Tok::End => self.err("unexpected end of expression"),
            Tok::Op(c) => self.err(format!("unexpected '{c}'")),
        }
    }
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl Expr {
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self, ExprError> {
        let vars: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        let mut p = Parser {
            toks: Lexer::new(src)?.toks,
            pos: 0,
            vars: &vars,
        };
        let root = p.expr()?;
        if *p.peek() != Tok::End {
            return p.err("unexpected trailing input");
        }
        Ok(Self {
            source: src.to_string(),
            root,
            vars,
        })
    }

    /// Parses a field over `x1..xd`, plus `r` for the Euclidean norm of `x`.
    pub fn field(src: &str, dim: usize) -> Result<Self, ExprError> {
        let mut names: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        names.push("r".into());
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Self::parse(src, &refs)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `values[i]` bound to the `i`-th variable.
    pub fn eval(&self, values: &[f64]) -> f64 {
        assert_eq!(
            values.len(),
            self.vars.len(),
            "expression expects {} values",
            self.vars.len()
        );
        self.root.eval(values)
    }

    /// Evaluates a field built by [`Expr::field`] at the point `x`.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        let mut vals = Vec::with_capacity(x.len() + 1);
        vals.extend_from_slice(x);
        vals.push(x.iter().map(|c| c * c).sum::<f64>().sqrt());
        self.root.eval(&vals)
    }
}
