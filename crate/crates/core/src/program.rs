//! Concurrent program model: domain types, the textual program format,
//! per-process projection and game-input validation.
//!
//! Programs are finite processes over read/write/skip/fence instructions,
//! shared variables and a finite value domain. Identifiers are interned into
//! dense indices at construction time; all iteration orders are deterministic
//! (values, variables and processes in declaration order, states sorted by
//! name, transitions sorted as triples).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Index of a process, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcId(pub usize);

/// Index of a shared variable, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Index of a domain value, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueId(pub usize);

/// Index of a local state within its process (states sorted by name).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// A program instruction. Operands are resolved against the owning program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instruction {
    Read(VarId, ValueId),
    Write(VarId, ValueId),
    Skip,
    MemFence,
}

/// One local transition of a process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: StateId,
    pub instr: Instruction,
    pub to: StateId,
}

/// A finite-state process: local states plus a labelled transition relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub name: String,
    /// State names, sorted; `StateId` indexes into this list.
    pub states: Vec<String>,
    pub initial: StateId,
    /// Sorted, duplicate-free transition triples.
    pub transitions: Vec<Transition>,
}

impl Process {
    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(StateId)
    }

    /// Transitions leaving `from`, in sorted order.
    pub fn transitions_from(&self, from: StateId) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == from)
    }
}

/// Reach or safety objective over local states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Reach,
    Safe,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Reach => write!(f, "reach"),
            Mode::Safe => write!(f, "safe"),
        }
    }
}

/// Winning condition induced by a set of local states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub mode: Mode,
    /// Sorted, duplicate-free (process, state) pairs.
    pub targets: Vec<(ProcId, StateId)>,
}

impl Objective {
    pub fn new(mode: Mode, mut targets: Vec<(ProcId, StateId)>) -> Self {
        targets.sort();
        targets.dedup();
        Objective { mode, targets }
    }

    pub fn is_target(&self, proc: ProcId, state: StateId) -> bool {
        self.targets.binary_search(&(proc, state)).is_ok()
    }
}

/// A concurrent program: processes over shared variables and a finite domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcurrentProgram {
    pub values: Vec<String>,
    pub vars: Vec<String>,
    /// Initial memory valuation, indexed by `VarId`.
    pub init_memory: Vec<ValueId>,
    pub processes: Vec<Process>,
}

impl ConcurrentProgram {
    pub fn value_name(&self, v: ValueId) -> &str {
        &self.values[v.0]
    }

    pub fn var_name(&self, x: VarId) -> &str {
        &self.vars[x.0]
    }

    pub fn value_id(&self, name: &str) -> Option<ValueId> {
        self.values.iter().position(|v| v == name).map(ValueId)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v == name).map(VarId)
    }

    pub fn proc_id(&self, name: &str) -> Option<ProcId> {
        self.processes.iter().position(|p| p.name == name).map(ProcId)
    }

    pub fn process(&self, id: ProcId) -> &Process {
        &self.processes[id.0]
    }

    pub fn proc_ids(&self) -> impl Iterator<Item = ProcId> {
        (0..self.processes.len()).map(ProcId)
    }

    pub fn instr_string(&self, instr: &Instruction) -> String {
        match instr {
            Instruction::Read(x, d) => format!("rd({},{})", self.var_name(*x), self.value_name(*d)),
            Instruction::Write(x, d) => {
                format!("wr({},{})", self.var_name(*x), self.value_name(*d))
            }
            Instruction::Skip => "skip".to_string(),
            Instruction::MemFence => "mf".to_string(),
        }
    }

    /// `P.q` rendering of a target pair.
    pub fn target_string(&self, proc: ProcId, state: StateId) -> String {
        format!(
            "{}.{}",
            self.process(proc).name,
            self.process(proc).state_name(state)
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("line {line}, column {col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: undeclared variable `{name}`")]
    UndeclaredVar { line: usize, name: String },
    #[error("line {line}: undeclared value `{name}`")]
    UndeclaredValue { line: usize, name: String },
    #[error("line {line}: unknown state `{name}`")]
    UndeclaredState { line: usize, name: String },
    #[error("line {line}: duplicate process id `{name}`")]
    DuplicateProcess { line: usize, name: String },
    #[error("variable `{name}` has no initial value")]
    MissingInit { name: String },
    #[error("process `{name}` has no initial state")]
    MissingInitialState { name: String },
    #[error("unknown process id `{name}`")]
    UnknownProcess { name: String },
    #[error("duplicate declaration of `{name}`")]
    Duplicate { name: String },
}

/// Incremental constructor used by the parser and by the reduction generators.
#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    values: Vec<String>,
    vars: Vec<String>,
    init: BTreeMap<String, String>,
    processes: Vec<RawProcess>,
}

#[derive(Debug, Clone)]
struct RawProcess {
    name: String,
    initial: String,
    transitions: Vec<(String, String, RawInstr)>,
}

#[derive(Debug, Clone)]
pub enum RawInstr {
    Read(String, String),
    Write(String, String),
    Skip,
    MemFence,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&mut self, name: impl Into<String>) -> &mut Self {
        self.values.push(name.into());
        self
    }

    pub fn var(&mut self, name: impl Into<String>) -> &mut Self {
        self.vars.push(name.into());
        self
    }

    pub fn init(&mut self, var: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.init.insert(var.into(), value.into());
        self
    }

    pub fn process(&mut self, name: impl Into<String>, initial: impl Into<String>) -> &mut Self {
        self.processes.push(RawProcess {
            name: name.into(),
            initial: initial.into(),
            transitions: Vec::new(),
        });
        self
    }

    /// Adds a transition to the most recently declared process.
    pub fn trans(
        &mut self,
        from: impl Into<String>,
        to: impl Into<String>,
        instr: RawInstr,
    ) -> &mut Self {
        let proc = self
            .processes
            .last_mut()
            .expect("trans before any process declaration");
        proc.transitions.push((from.into(), to.into(), instr));
        self
    }

    pub fn build(&self) -> Result<ConcurrentProgram, ProgramError> {
        let mut seen = BTreeSet::new();
        for v in &self.values {
            if !seen.insert(v.clone()) {
                return Err(ProgramError::Duplicate { name: v.clone() });
            }
        }
        seen.clear();
        for x in &self.vars {
            if !seen.insert(x.clone()) {
                return Err(ProgramError::Duplicate { name: x.clone() });
            }
        }

        let value_id = |name: &str, line: usize| {
            self.values
                .iter()
                .position(|v| v == name)
                .map(ValueId)
                .ok_or(ProgramError::UndeclaredValue {
                    line,
                    name: name.to_string(),
                })
        };
        let var_id = |name: &str, line: usize| {
            self.vars
                .iter()
                .position(|v| v == name)
                .map(VarId)
                .ok_or(ProgramError::UndeclaredVar {
                    line,
                    name: name.to_string(),
                })
        };

        let mut init_memory = Vec::with_capacity(self.vars.len());
        for x in &self.vars {
            let v = self
                .init
                .get(x)
                .ok_or(ProgramError::MissingInit { name: x.clone() })?;
            init_memory.push(value_id(v, 0)?);
        }
        for x in self.init.keys() {
            if !self.vars.contains(x) {
                return Err(ProgramError::UndeclaredVar {
                    line: 0,
                    name: x.clone(),
                });
            }
        }

        let mut processes = Vec::with_capacity(self.processes.len());
        let mut proc_names = BTreeSet::new();
        for raw in &self.processes {
            if !proc_names.insert(raw.name.clone()) {
                return Err(ProgramError::DuplicateProcess {
                    line: 0,
                    name: raw.name.clone(),
                });
            }
            if raw.initial.is_empty() {
                return Err(ProgramError::MissingInitialState {
                    name: raw.name.clone(),
                });
            }
            let mut states: BTreeSet<String> = BTreeSet::new();
            states.insert(raw.initial.clone());
            for (from, to, _) in &raw.transitions {
                states.insert(from.clone());
                states.insert(to.clone());
            }
            let states: Vec<String> = states.into_iter().collect();
            let sid = |name: &str| {
                StateId(
                    states
                        .binary_search_by(|n| n.as_str().cmp(name))
                        .expect("state collected above"),
                )
            };
            let mut transitions = Vec::with_capacity(raw.transitions.len());
            for (from, to, instr) in &raw.transitions {
                let instr = match instr {
                    RawInstr::Read(x, d) => Instruction::Read(var_id(x, 0)?, value_id(d, 0)?),
                    RawInstr::Write(x, d) => Instruction::Write(var_id(x, 0)?, value_id(d, 0)?),
                    RawInstr::Skip => Instruction::Skip,
                    RawInstr::MemFence => Instruction::MemFence,
                };
                transitions.push(Transition {
                    from: sid(from),
                    instr,
                    to: sid(to),
                });
            }
            transitions.sort();
            transitions.dedup();
            processes.push(Process {
                name: raw.name.clone(),
                initial: sid(&raw.initial),
                states,
                transitions,
            });
        }

        Ok(ConcurrentProgram {
            values: self.values.clone(),
            vars: self.vars.clone(),
            init_memory,
            processes,
        })
    }
}

fn is_ident(tok: &str) -> bool {
    let mut chars = tok.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// Value tokens may start with a digit (`values 0 1`).
fn is_value_token(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_instr_token(tok: &str, line: usize, col: usize) -> Result<RawInstr, ProgramError> {
    match tok {
        "skip" => return Ok(RawInstr::Skip),
        "mf" => return Ok(RawInstr::MemFence),
        _ => {}
    }
    let (kind, rest) = if let Some(rest) = tok.strip_prefix("rd(") {
        ("rd", rest)
    } else if let Some(rest) = tok.strip_prefix("wr(") {
        ("wr", rest)
    } else {
        return Err(ProgramError::Syntax {
            line,
            col,
            msg: format!("expected instruction, got `{tok}`"),
        });
    };
    let inner = rest.strip_suffix(')').ok_or(ProgramError::Syntax {
        line,
        col,
        msg: format!("unterminated instruction `{tok}`"),
    })?;
    let (x, d) = inner.split_once(',').ok_or(ProgramError::Syntax {
        line,
        col,
        msg: format!("expected `{kind}(var,value)`, got `{tok}`"),
    })?;
    if !is_ident(x) || !is_value_token(d) {
        return Err(ProgramError::Syntax {
            line,
            col,
            msg: format!("bad operands in `{tok}`"),
        });
    }
    Ok(match kind {
        "rd" => RawInstr::Read(x.to_string(), d.to_string()),
        _ => RawInstr::Write(x.to_string(), d.to_string()),
    })
}

/// Parses a single instruction token like `wr(x,1)` against a program's
/// declarations.
pub fn parse_instruction(p: &ConcurrentProgram, token: &str) -> Result<Instruction, ProgramError> {
    match parse_instr_token(token, 0, 1)? {
        RawInstr::Skip => Ok(Instruction::Skip),
        RawInstr::MemFence => Ok(Instruction::MemFence),
        RawInstr::Read(x, d) => Ok(Instruction::Read(
            p.var_id(&x)
                .ok_or(ProgramError::UndeclaredVar { line: 0, name: x })?,
            p.value_id(&d)
                .ok_or(ProgramError::UndeclaredValue { line: 0, name: d })?,
        )),
        RawInstr::Write(x, d) => Ok(Instruction::Write(
            p.var_id(&x)
                .ok_or(ProgramError::UndeclaredVar { line: 0, name: x })?,
            p.value_id(&d)
                .ok_or(ProgramError::UndeclaredValue { line: 0, name: d })?,
        )),
    }
}

/// Parses the line-oriented program format. Returns the program together with
/// the optional `objective` line.
pub fn parse_program(
    text: &str,
) -> Result<(ConcurrentProgram, Option<Objective>), ProgramError> {
    type RawObjective = (usize, Mode, Vec<(String, String)>);
    let mut builder = ProgramBuilder::new();
    let mut seen_values = false;
    let mut seen_vars = false;
    let mut seen_init = false;
    let mut in_process = false;
    let mut objective_raw: Option<RawObjective> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.split_once('#') {
            Some((before, _)) => before,
            None => raw_line,
        };
        // Tokens with their 1-based column.
        let base = content.as_ptr() as usize;
        let tokens: Vec<(usize, &str)> = content
            .split_whitespace()
            .map(|tok| (tok.as_ptr() as usize - base + 1, tok))
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let (col0, head) = tokens[0];
        match head {
            "values" => {
                if seen_values {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "duplicate `values` section".into(),
                    });
                }
                seen_values = true;
                if tokens.len() < 2 {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "`values` requires at least one value".into(),
                    });
                }
                for (col, v) in &tokens[1..] {
                    if !is_value_token(v) {
                        return Err(ProgramError::Syntax {
                            line,
                            col: *col,
                            msg: format!("bad value name `{v}`"),
                        });
                    }
                    builder.value(*v);
                }
            }
            "vars" => {
                if !seen_values || seen_vars {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "`vars` must follow `values`".into(),
                    });
                }
                seen_vars = true;
                for (col, x) in &tokens[1..] {
                    if !is_ident(x) {
                        return Err(ProgramError::Syntax {
                            line,
                            col: *col,
                            msg: format!("bad variable name `{x}`"),
                        });
                    }
                    builder.var(*x);
                }
            }
            "init" => {
                if !seen_vars || seen_init {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "`init` must follow `vars`".into(),
                    });
                }
                seen_init = true;
                for (col, assign) in &tokens[1..] {
                    let (x, v) = assign.split_once('=').ok_or(ProgramError::Syntax {
                        line,
                        col: *col,
                        msg: format!("expected `var=value`, got `{assign}`"),
                    })?;
                    builder.init(x, v);
                }
            }
            "process" => {
                if !seen_init {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "`process` must follow `init`".into(),
                    });
                }
                if tokens.len() != 4 || tokens[2].1 != "init" {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "expected `process NAME init STATE`".into(),
                    });
                }
                if !is_ident(tokens[1].1) || !is_ident(tokens[3].1) {
                    return Err(ProgramError::Syntax {
                        line,
                        col: tokens[1].0,
                        msg: "process and state names must be identifiers".into(),
                    });
                }
                builder.process(tokens[1].1, tokens[3].1);
                in_process = true;
            }
            "objective" => {
                if objective_raw.is_some() {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "duplicate `objective` line".into(),
                    });
                }
                if tokens.len() < 2 {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "expected `objective reach|safe [P.q ...]`".into(),
                    });
                }
                let mode = match tokens[1].1 {
                    "reach" => Mode::Reach,
                    "safe" => Mode::Safe,
                    other => {
                        return Err(ProgramError::Syntax {
                            line,
                            col: tokens[1].0,
                            msg: format!("unknown objective mode `{other}`"),
                        })
                    }
                };
                let mut targets = Vec::new();
                for (col, t) in &tokens[2..] {
                    let (p, q) = t.split_once('.').ok_or(ProgramError::Syntax {
                        line,
                        col: *col,
                        msg: format!("expected `P.q`, got `{t}`"),
                    })?;
                    targets.push((p.to_string(), q.to_string()));
                }
                objective_raw = Some((line, mode, targets));
                in_process = false;
            }
            _ => {
                if !in_process {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: format!("unexpected token `{head}`"),
                    });
                }
                if tokens.len() != 3 {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "expected `FROM TO INSTR`".into(),
                    });
                }
                if !is_ident(tokens[0].1) || !is_ident(tokens[1].1) {
                    return Err(ProgramError::Syntax {
                        line,
                        col: col0,
                        msg: "state names must be identifiers".into(),
                    });
                }
                let instr = parse_instr_token(tokens[2].1, line, tokens[2].0)?;
                // Operand resolution happens in build(); re-tag errors with
                // the line number here for usable diagnostics.
                match &instr {
                    RawInstr::Read(x, d) | RawInstr::Write(x, d) => {
                        if !builder.vars.iter().any(|v| v == x) {
                            return Err(ProgramError::UndeclaredVar {
                                line,
                                name: x.clone(),
                            });
                        }
                        if !builder.values.iter().any(|v| v == d) {
                            return Err(ProgramError::UndeclaredValue {
                                line,
                                name: d.clone(),
                            });
                        }
                    }
                    _ => {}
                }
                builder.trans(tokens[0].1, tokens[1].1, instr);
            }
        }
    }

    if !seen_values {
        return Err(ProgramError::Syntax {
            line: text.lines().count() + 1,
            col: 1,
            msg: "missing `values` section".into(),
        });
    }
    let program = builder.build()?;
    let objective = match objective_raw {
        None => None,
        Some((line, mode, raw_targets)) => {
            let mut targets = Vec::new();
            for (p, q) in raw_targets {
                let proc = program
                    .proc_id(&p)
                    .ok_or(ProgramError::UnknownProcess { name: p.clone() })?;
                let state = program.process(proc).state_id(&q).ok_or(
                    ProgramError::UndeclaredState {
                        line,
                        name: format!("{p}.{q}"),
                    },
                )?;
                targets.push((proc, state));
            }
            Some(Objective::new(mode, targets))
        }
    };
    Ok((program, objective))
}

/// Canonical serialization; `parse_program` accepts the output unchanged.
pub fn serialize_program(p: &ConcurrentProgram, objective: Option<&Objective>) -> String {
    let mut out = String::new();
    out.push_str("values");
    for v in &p.values {
        out.push(' ');
        out.push_str(v);
    }
    out.push('\n');
    out.push_str("vars");
    for x in &p.vars {
        out.push(' ');
        out.push_str(x);
    }
    out.push('\n');
    out.push_str("init");
    for (i, x) in p.vars.iter().enumerate() {
        out.push(' ');
        out.push_str(x);
        out.push('=');
        out.push_str(p.value_name(p.init_memory[i]));
    }
    out.push('\n');
    for proc in &p.processes {
        out.push_str(&format!(
            "process {} init {}\n",
            proc.name,
            proc.state_name(proc.initial)
        ));
        for t in &proc.transitions {
            out.push_str(&format!(
                "  {} {} {}\n",
                proc.state_name(t.from),
                proc.state_name(t.to),
                p.instr_string(&t.instr)
            ));
        }
    }
    if let Some(o) = objective {
        out.push_str(&format!("objective {}", o.mode));
        for (proc, state) in &o.targets {
            out.push(' ');
            out.push_str(&p.target_string(*proc, *state));
        }
        out.push('\n');
    }
    out
}

/// Restriction of the program to a single process; shared declarations and
/// initial memory are kept unchanged.
pub fn project(p: &ConcurrentProgram, proc: ProcId) -> Result<ConcurrentProgram, ProgramError> {
    let process = p
        .processes
        .get(proc.0)
        .ok_or(ProgramError::UnknownProcess {
            name: format!("#{}", proc.0),
        })?;
    Ok(ConcurrentProgram {
        values: p.values.clone(),
        vars: p.vars.clone(),
        init_memory: p.init_memory.clone(),
        processes: vec![process.clone()],
    })
}

/// Objective restricted to the states of `proc` (targets renumbered to the
/// single remaining process).
pub fn project_objective(o: &Objective, proc: ProcId) -> Objective {
    let targets = o
        .targets
        .iter()
        .filter(|(p, _)| *p == proc)
        .map(|(_, q)| (ProcId(0), *q))
        .collect();
    Objective::new(o.mode, targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A finding of `validate_for_game`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
}

/// Checks the side conditions the game construction assumes: the initial
/// global state must not already satisfy the objective, and reach targets
/// should have an always-enabled outgoing instruction (skip or write) so the
/// process cannot deadlock there. Reads and fences can be disabled by memory
/// and buffer contents, so they do not count.
pub fn validate_for_game(p: &ConcurrentProgram, o: &Objective) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (proc, state) in &o.targets {
        if p.process(*proc).initial == *state {
            issues.push(ValidationIssue {
                severity: Severity::Error,
                message: format!(
                    "initial configuration in C_W: target {} is the initial state",
                    p.target_string(*proc, *state)
                ),
            });
        }
    }
    if o.mode == Mode::Reach {
        for (proc, state) in &o.targets {
            let always_enabled = p.process(*proc).transitions_from(*state).any(|t| {
                matches!(t.instr, Instruction::Skip | Instruction::Write(_, _))
            });
            if !always_enabled {
                issues.push(ValidationIssue {
                    severity: Severity::Warning,
                    message: format!(
                        "target may deadlock: {} has no outgoing skip or write",
                        p.target_string(*proc, *state)
                    ),
                });
            }
        }
    }
    issues
}

/// Audits that every instruction operand indexes into the declared tables.
/// Generated programs are checked with this before they are handed to tests.
pub fn audit_operands(p: &ConcurrentProgram) -> Result<(), String> {
    for proc in &p.processes {
        for t in &proc.transitions {
            if t.from.0 >= proc.states.len() || t.to.0 >= proc.states.len() {
                return Err(format!("process {}: transition endpoint out of range", proc.name));
            }
            match t.instr {
                Instruction::Read(x, d) | Instruction::Write(x, d) => {
                    if x.0 >= p.vars.len() {
                        return Err(format!("process {}: variable out of range", proc.name));
                    }
                    if d.0 >= p.values.len() {
                        return Err(format!("process {}: value out of range", proc.name));
                    }
                }
                _ => {}
            }
        }
    }
    if p.init_memory.len() != p.vars.len() {
        return Err("init memory does not cover all variables".into());
    }
    Ok(())
}
