//! Prenex QBF formulas: parsing, brute-force evaluation, and the compilation
//! into single-process TSO game programs.
//!
//! The generated program has one gadget per quantifier and per body node.
//! The process player reaches the outermost output state iff the formula is
//! true, under both the reachability objective (targeting that state) and the
//! safety objective with an empty unsafe set (the output self-loop is the
//! only way into an infinite play).

use thiserror::Error;

use crate::program::{
    ConcurrentProgram, Mode, Objective, ProcId, ProgramBuilder, RawInstr,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    ForAll,
}

/// Boolean body tree; negation appears only on variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    And(Box<Body>, Box<Body>),
    Or(Box<Body>, Box<Body>),
    /// Positive literal, indexing into the prefix.
    Pos(usize),
    /// Negative literal.
    Neg(usize),
}

impl Body {
    pub fn node_count(&self) -> usize {
        match self {
            Body::And(a, b) | Body::Or(a, b) => 1 + a.node_count() + b.node_count(),
            Body::Pos(_) | Body::Neg(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QbfFormula {
    /// Quantifier prefix, outermost first; variable names are unique.
    pub prefix: Vec<(Quantifier, String)>,
    pub body: Body,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QbfError {
    #[error("offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("offset {pos}: negation is only allowed on variables")]
    NegationOnCompound { pos: usize },
    #[error("variable `{0}` is not bound in the prefix")]
    Unbound(String),
    #[error("variable `{0}` is bound twice")]
    BoundTwice(String),
    #[error("too many variables for brute-force evaluation: {0} > 20")]
    TooManyVariables(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Colon,
    And,
    Or,
    Not,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, QbfError> {
    let mut tokens = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            ':' => {
                tokens.push((i, Token::Colon));
                i += 1;
            }
            '&' => {
                tokens.push((i, Token::And));
                i += 1;
            }
            '|' => {
                tokens.push((i, Token::Or));
                i += 1;
            }
            '!' => {
                tokens.push((i, Token::Not));
                i += 1;
            }
            '(' => {
                tokens.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                tokens.push((i, Token::RParen));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                tokens.push((start, Token::Ident(bytes[start..i].iter().collect())));
            }
            other => {
                return Err(QbfError::Parse {
                    pos: i,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    vars: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&(usize, Token)> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&(usize, Token)> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn offset(&self) -> usize {
        self.peek().map(|(o, _)| *o).unwrap_or(usize::MAX)
    }

    fn parse_or(&mut self) -> Result<Body, QbfError> {
        let mut left = self.parse_and()?;
        while matches!(self.peek(), Some((_, Token::Or))) {
            self.bump();
            let right = self.parse_and()?;
            left = Body::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Body, QbfError> {
        let mut left = self.parse_atom()?;
        while matches!(self.peek(), Some((_, Token::And))) {
            self.bump();
            let right = self.parse_atom()?;
            left = Body::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn var_index(&self, name: &str) -> Result<usize, QbfError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| QbfError::Unbound(name.to_string()))
    }

    fn parse_atom(&mut self) -> Result<Body, QbfError> {
        let pos = self.offset();
        match self.bump().cloned() {
            Some((_, Token::Not)) => match self.bump().cloned() {
                Some((_, Token::Ident(name))) => Ok(Body::Neg(self.var_index(&name)?)),
                _ => Err(QbfError::NegationOnCompound { pos }),
            },
            Some((_, Token::Ident(name))) => Ok(Body::Pos(self.var_index(&name)?)),
            Some((_, Token::LParen)) => {
                let inner = self.parse_or()?;
                match self.bump() {
                    Some((_, Token::RParen)) => Ok(inner),
                    _ => Err(QbfError::Parse {
                        pos,
                        msg: "unclosed parenthesis".into(),
                    }),
                }
            }
            other => Err(QbfError::Parse {
                pos,
                msg: format!("expected a literal or `(`, got {other:?}"),
            }),
        }
    }
}

/// Parses `(E|A) var ... : body` with `&`, `|`, `!` and parentheses; `!`
/// binds only to a variable.
pub fn parse_qbf(text: &str) -> Result<QbfFormula, QbfError> {
    let tokens = lex(text)?;
    let mut prefix = Vec::new();
    let mut i = 0;
    loop {
        match tokens.get(i) {
            Some((_, Token::Colon)) => {
                i += 1;
                break;
            }
            Some((pos, Token::Ident(q))) if q == "E" || q == "A" => {
                let quant = if q == "E" {
                    Quantifier::Exists
                } else {
                    Quantifier::ForAll
                };
                match tokens.get(i + 1) {
                    Some((_, Token::Ident(name))) => {
                        if prefix.iter().any(|(_, v): &(Quantifier, String)| v == name) {
                            return Err(QbfError::BoundTwice(name.clone()));
                        }
                        prefix.push((quant, name.clone()));
                        i += 2;
                    }
                    _ => {
                        return Err(QbfError::Parse {
                            pos: *pos,
                            msg: "quantifier must be followed by a variable".into(),
                        })
                    }
                }
            }
            Some((pos, _)) => {
                return Err(QbfError::Parse {
                    pos: *pos,
                    msg: "expected quantifier `E`/`A` or `:`".into(),
                })
            }
            None => {
                return Err(QbfError::Parse {
                    pos: text.len(),
                    msg: "missing `:` separator".into(),
                })
            }
        }
    }
    if prefix.is_empty() {
        return Err(QbfError::Parse {
            pos: 0,
            msg: "prefix must bind at least one variable".into(),
        });
    }
    let mut parser = Parser {
        tokens: &tokens,
        pos: i,
        vars: prefix.iter().map(|(_, v)| v.clone()).collect(),
    };
    let body = parser.parse_or()?;
    if let Some((pos, _)) = parser.peek() {
        return Err(QbfError::Parse {
            pos: *pos,
            msg: "trailing input after formula body".into(),
        });
    }
    Ok(QbfFormula { prefix, body })
}

fn eval_body(body: &Body, assignment: &[bool]) -> bool {
    match body {
        Body::And(a, b) => eval_body(a, assignment) && eval_body(b, assignment),
        Body::Or(a, b) => eval_body(a, assignment) || eval_body(b, assignment),
        Body::Pos(i) => assignment[*i],
        Body::Neg(i) => !assignment[*i],
    }
}

/// Brute-force evaluation over all assignments, respecting quantifier order.
pub fn eval_qbf(f: &QbfFormula) -> Result<bool, QbfError> {
    let n = f.prefix.len();
    if n > 20 {
        return Err(QbfError::TooManyVariables(n));
    }
    fn go(f: &QbfFormula, k: usize, assignment: &mut Vec<bool>) -> bool {
        if k == f.prefix.len() {
            return eval_body(&f.body, assignment);
        }
        let combine = |f: &QbfFormula, assignment: &mut Vec<bool>, value: bool| {
            assignment[k] = value;
            go(f, k + 1, assignment)
        };
        match f.prefix[k].0 {
            Quantifier::Exists => {
                combine(f, assignment, false) || combine(f, assignment, true)
            }
            Quantifier::ForAll => {
                combine(f, assignment, false) && combine(f, assignment, true)
            }
        }
    }
    let mut assignment = vec![false; n];
    Ok(go(f, 0, &mut assignment))
}

/// Gadget endpoints: input and output state names.
struct Gadget {
    input: String,
    output: String,
}

/// Compiles a formula into a single-process program over {0,1}-valued
/// variables, one per prefix entry, all initially 0. Reach mode targets the
/// outermost quantifier's output state; safe mode has no unsafe states.
pub fn qbf_to_program(f: &QbfFormula, mode: Mode) -> (ConcurrentProgram, Objective) {
    let mut b = ProgramBuilder::new();
    b.value("0").value("1");
    for (_, x) in &f.prefix {
        b.var(x.clone());
        b.init(x.clone(), "0");
    }
    b.process("P", "Q0_in");

    // Body gadgets, numbered in preorder.
    fn build_body(b: &mut ProgramBuilder, f: &QbfFormula, body: &Body, next: &mut usize) -> Gadget {
        let id = *next;
        *next += 1;
        let gadget = Gadget {
            input: format!("N{id}_in"),
            output: format!("N{id}_out"),
        };
        match body {
            Body::Or(l, r) => {
                let gl = build_body(b, f, l, next);
                let gr = build_body(b, f, r, next);
                b.trans(&gadget.input, &gl.input, RawInstr::Skip);
                b.trans(&gadget.input, &gr.input, RawInstr::Skip);
                b.trans(&gl.output, &gadget.output, RawInstr::Skip);
                b.trans(&gr.output, &gadget.output, RawInstr::Skip);
            }
            Body::And(l, r) => {
                let gl = build_body(b, f, l, next);
                let gr = build_body(b, f, r, next);
                b.trans(&gadget.input, &gl.input, RawInstr::Skip);
                b.trans(&gl.output, &gr.input, RawInstr::Skip);
                b.trans(&gr.output, &gadget.output, RawInstr::Skip);
            }
            Body::Pos(x) => {
                let var = f.prefix[*x].1.clone();
                b.trans(&gadget.input, &gadget.output, RawInstr::Read(var, "1".into()));
            }
            Body::Neg(x) => {
                let var = f.prefix[*x].1.clone();
                b.trans(&gadget.input, &gadget.output, RawInstr::Read(var, "0".into()));
            }
        }
        gadget
    }

    let mut next = 0usize;
    let body_gadget = build_body(&mut b, f, &f.body, &mut next);

    // Quantifier gadgets, wired innermost-to-body, outermost as entry.
    let mut successor = body_gadget;
    for (k, (quant, x)) in f.prefix.iter().enumerate().rev() {
        let gadget = Gadget {
            input: format!("Q{k}_in"),
            output: format!("Q{k}_out"),
        };
        match quant {
            Quantifier::Exists => {
                b.trans(&gadget.input, &successor.input, RawInstr::Write(x.clone(), "0".into()));
                b.trans(&gadget.input, &successor.input, RawInstr::Write(x.clone(), "1".into()));
                b.trans(&successor.output, &gadget.output, RawInstr::Skip);
            }
            Quantifier::ForAll => {
                let sweep = format!("Q{k}_sweep");
                b.trans(&gadget.input, &successor.input, RawInstr::Write(x.clone(), "0".into()));
                b.trans(&successor.output, &sweep, RawInstr::Read(x.clone(), "0".into()));
                b.trans(&sweep, &successor.input, RawInstr::Write(x.clone(), "1".into()));
                b.trans(&successor.output, &gadget.output, RawInstr::Read(x.clone(), "1".into()));
            }
        }
        successor = gadget;
    }
    // Infinite plays are possible exactly at the outermost output.
    b.trans(&successor.output, &successor.output, RawInstr::Skip);

    let program = b.build().expect("generated program is well-formed");
    let targets = match mode {
        Mode::Reach => {
            let proc = ProcId(0);
            let out = program
                .process(proc)
                .state_id(&successor.output)
                .expect("output state exists");
            vec![(proc, out)]
        }
        Mode::Safe => Vec::new(),
    };
    (program, Objective::new(mode, targets))
}

/// Audited size bound: at most 4 states per quantifier plus 3 per body node
/// plus 2.
pub fn state_bound(f: &QbfFormula) -> usize {
    4 * f.prefix.len() + 3 * f.body.node_count() + 2
}
